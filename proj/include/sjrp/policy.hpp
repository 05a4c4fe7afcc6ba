#pragma once

#include <functional>
#include <memory>
#include <unordered_map>

#include "sjrp/core.hpp"
#include "sjrp/nn.hpp"
#include "sjrp/sim.hpp"

namespace sjrp::policy {

/// View over a value approximation and its gradient field.  The network pair
/// (H, G) is the production implementation; tests use analytic stubs.
class ValueModel {
 public:
  virtual ~ValueModel() = default;
  virtual int dim() const = 0;
  virtual double value(const Vec& x) const = 0;               // V(x)
  virtual Vec gradient(const Vec& x) const = 0;               // grad V(x)
  virtual nn::Matrix gradient_jacobian(const Vec& x) const = 0;  // Hessian est.
};

class MlpValueModel final : public ValueModel {
 public:
  MlpValueModel(std::shared_ptr<const nn::Mlp> h, std::shared_ptr<const nn::Mlp> g);
  int dim() const override { return h_->input_dim(); }
  double value(const Vec& x) const override { return h_->forward(x)[0]; }
  Vec gradient(const Vec& x) const override { return g_->forward(x); }
  nn::Matrix gradient_jacobian(const Vec& x) const override {
    return g_->input_jacobian(x);
  }

 private:
  std::shared_ptr<const nn::Mlp> h_, g_;
};

enum class ExtractionMethod { minimize_value, gradient_stationarity };

struct ExtractionConfig {
  double epsilon_threshold = -2.5;  // trigger when no_action_value <= this
  Vec bounds_lo, bounds_hi;         // absolute per-item search box
  Vec start;                        // absolute start point
  ExtractionMethod method = ExtractionMethod::minimize_value;
  int restarts = 10;
  double gradient_tol = 1e-8;
  int max_iterations = 400;
  uint64_t jitter_seed = 1234;

  void validate(int d) const;
};

/// (L + r)V - f at x from the approximations: -0.5 Tr(sigma sigma^T J_G) +
/// mu.G(x) + r V(x) - f(x).  `params` must carry the same cost scaling the
/// networks were trained under.
double no_action_value(const ValueModel& m, const Vec& x, const CostParams& params,
                       const DiffusionParams& diff);

struct OrderUpToResult {
  Vec z;
  double objective = 0.0;
  /// Set when the minimizer finished pressed against the search box with a
  /// gradient pointing outward: the region beyond was never explored.
  bool boundary_warning = false;
};

/// The single order-up-to vector: argmin over the box of H(z) + c0 + c.z
/// (gradient supplied by G), or of 0.5 |G(z) + c|^2 for the stationarity
/// method.  Best of `restarts` jittered starts.
OrderUpToResult compute_order_up_to(const ValueModel& m, const CostParams& params,
                                    const ExtractionConfig& cfg);

/// One decision: order (z_star - x)^+ when no_action_value(x) <= epsilon.
Vec nn_policy_decide(const ValueModel& m, const Vec& x, const Vec& z_star,
                     double epsilon, const CostParams& params,
                     const DiffusionParams& diff);

// --------------------------- box minimization --------------------------------

struct BoxResult {
  Vec x;
  double f = 0.0;
  double projected_gradient_norm = 0.0;
  int iterations = 0;
  bool at_bound_outward = false;
};

/// Projected L-BFGS with backtracking line search; `fg` returns the objective
/// and fills the gradient.
BoxResult minimize_box(const std::function<double(const Vec&, Vec&)>& fg,
                       const Vec& lo, const Vec& hi, const Vec& x0, double tol,
                       int max_iterations);

// ------------------------------ sim adapter ----------------------------------

/// Discrete-time policy wrapping trained networks: the weekly no-action test
/// plus the precomputed order-up-to vector.  Decisions are memoized on the
/// (integer) state per clone.
class NnPolicy : public sim::Policy {
 public:
  NnPolicy(std::shared_ptr<const nn::Mlp> h, std::shared_ptr<const nn::Mlp> g,
           Vec z_star, double epsilon, CostParams scaled_params,
           DiffusionParams diff);
  Vec decide(const InventoryState& x, const sim::Observation& obs) override;
  std::unique_ptr<sim::Policy> clone() const override;
  std::string id() const override { return "nn_policy"; }
  const Vec& z_star() const { return z_star_; }

 private:
  MlpValueModel model_;
  Vec z_star_;
  double epsilon_;
  CostParams params_;
  DiffusionParams diff_;
  std::unordered_map<std::string, Vec> cache_;
};

/// Grid dump of the trigger region for d = 2: "x1,x2,order1,order2" rows.
void write_region_csv(const std::string& path, const ValueModel& m, const Vec& z_star,
                      double epsilon, const CostParams& params,
                      const DiffusionParams& diff, const std::vector<int>& lo,
                      const std::vector<int>& hi);

}  // namespace sjrp::policy
