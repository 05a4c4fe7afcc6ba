#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sjrp/core.hpp"
#include "sjrp/nn.hpp"

namespace sjrp::bsde {

/// Randomized order-up-to reference policy: order epochs are Poisson(lambda)
/// event times (Bernoulli-thinned on the grid), order-up-to draws are
/// componentwise lognormal with mean S_i and sd nu*S_i, and orders are floored
/// by exponentials with mean alpha*mu_i/lambda (disabled when alpha = 0).
struct ReferencePolicy {
  double lambda = 1.0;
  Vec order_up_to_mean;  // E[Z]
  double nu = 0.2;
  double alpha = 0.0;

  void validate() const;
  /// Moment-matched lognormal parameters for component i.
  void lognormal_params(int item, double& mu_log, double& sigma_log) const;
};

/// One discretized reference-process trajectory.  The recursion
///   states[n+1][i] = states[n][i] - mu[i]*dt - sigma[i]*brownian[n][i] + orders[n][i]
/// holds exactly, term for term.
struct PathBundle {
  int n_steps = 0;
  int dim = 0;
  double dt = 0.0;
  Vec states;    // (n_steps+1) x dim, flat row-major
  Vec brownian;  // n_steps x dim, raw N(0, dt) increments
  Vec orders;    // n_steps x dim
  double slack = 0.0;  // discounted-inequality violation; filled by the loss

  double* state(int n) { return states.data() + static_cast<size_t>(n) * dim; }
  const double* state(int n) const { return states.data() + static_cast<size_t>(n) * dim; }
  const double* db(int n) const { return brownian.data() + static_cast<size_t>(n) * dim; }
  const double* du(int n) const { return orders.data() + static_cast<size_t>(n) * dim; }
};

/// Subroutine: Euler-Maruyama path of the reference process on [0, T] with
/// n_steps equal intervals, starting at x0.
PathBundle euler_maruyama(const ReferencePolicy& policy, const DiffusionParams& diff,
                          double horizon, int n_steps, const Vec& x0,
                          RandomStream& rng);

struct LossResult {
  double loss = 0.0;
  double mean_h0 = 0.0;
  double violation_fraction = 0.0;
};

/// Penalized training loss over a batch of paths; fills each bundle's slack.
/// `params` must already carry any cost scaling used for training.
/// When gh/gg are given, parameter gradients are accumulated into them.
LossResult loss(const nn::Mlp& h, const nn::Mlp& g, std::vector<PathBundle>& batch,
                double beta, const CostParams& params, const DiffusionParams& diff,
                nn::Mlp::Gradients* gh = nullptr, nn::Mlp::Gradients* gg = nullptr);

/// Fraction of paths whose pathwise inequality is violated (slack > 0).
double violation_probability(const nn::Mlp& h, const nn::Mlp& g,
                             std::vector<PathBundle>& batch, const CostParams& params,
                             const DiffusionParams& diff);

/// Piecewise-constant step schedule: value of the last breakpoint whose
/// start iteration (1-based) is <= iter.
struct Schedule {
  std::vector<std::pair<int, double>> steps;
  double at(int iter) const;
  void validate(int iterations) const;
};

struct TrainConfig {
  double horizon_years = 0.1;  // T
  int n_steps = 50;            // N
  int batch_size = 2500;       // K
  int iterations = 25000;      // M
  std::vector<int> hidden_widths = {500, 500, 500, 500};
  Schedule lr_schedule;
  Schedule beta_schedule;
  double kappa = 1.0;  // cost scaling applied during training
  uint64_t seed = 1;
  double divergence_guard = 1e12;
  int checkpoint_every = 1000;
  std::string checkpoint_path;    // optional: latest H/G nets + resume state
  std::string diagnostics_csv;    // optional: per-iteration trace

  void validate(double lambda) const;
};

struct IterationDiagnostics {
  int iteration = 0;
  double loss = 0.0;
  double violation = 0.0;
  double mean_h0 = 0.0;
  double lr = 0.0;
  double beta = 0.0;
};

struct TrainResult {
  nn::Mlp h, g;
  std::vector<IterationDiagnostics> diagnostics;
  bool aborted = false;
  std::string abort_reason;
};

/// Algorithm: per iteration simulate a fresh batch from the current per-path
/// initial states, take one Adam step on the penalized loss, and roll each
/// path's initial state forward to its terminal state.  `params` carries the
/// unscaled costs; training internally uses params.scaled(kappa).
/// If `resume` is true and cfg.checkpoint_path holds a matching state file,
/// training continues from it (bit-identical to an uninterrupted run).
TrainResult train(const TrainConfig& cfg, const ReferencePolicy& policy,
                  const DiffusionParams& diff, const CostParams& params,
                  const Vec& x_init, bool resume = false,
                  const std::function<void(const IterationDiagnostics&)>& on_iter = {});

}  // namespace sjrp::bsde
