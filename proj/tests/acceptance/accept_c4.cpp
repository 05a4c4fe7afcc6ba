// Acceptance gate 4: one-dimensional validation against the grid QVI oracle.
// Trains H/G on the diffusion-demand instance and checks the sup-norm match
// of the value and its gradient on [-1, 3], plus the held-out violation rate.

#include <chrono>
#include <cmath>
#include <cstdio>

#include "common.hpp"
#include "sjrp/bsde.hpp"
#include "sjrp/mdp.hpp"

namespace accept {

int run_c4(const std::string& workdir) {
  Gate gate("c4");
  const sjrp::CostParams prm = one_d_costs();
  const sjrp::DiffusionParams diff = one_d_diffusion();

  // Oracle first.
  const auto oracle = sjrp::mdp::solve_1d_qvi(prm, diff, {-3.0, 6.0, 1801});
  gate.note("qvi oracle: V(0)=" + std::to_string(oracle.value_at(0.0)) +
            " reorder threshold=" + std::to_string(oracle.reorder_threshold()));

  sjrp::bsde::ReferencePolicy pol;
  pol.lambda = 0.4;
  pol.order_up_to_mean = {2.0};
  pol.nu = 0.5;  // lognormal mean 2, variance 1
  pol.alpha = 0.0;

  sjrp::bsde::TrainConfig cfg;
  cfg.horizon_years = 0.8;
  cfg.n_steps = 200;
  cfg.batch_size = 1250;
  cfg.iterations = 15000;
  cfg.hidden_widths = {250, 250, 250, 250};
  cfg.lr_schedule.steps = {{1, 1e-3}, {5001, 1e-4}, {10001, 1e-5}};
  cfg.beta_schedule.steps = {{1, 1e2}, {5001, 1e4}, {10001, 2e5}};
  cfg.kappa = 1.0;
  cfg.seed = 20260808;
  cfg.checkpoint_every = 1000;
  cfg.checkpoint_path = workdir + "/c4_nets.bin";
  cfg.diagnostics_csv = workdir + "/c4_train.csv";

  auto t0 = std::chrono::steady_clock::now();
  const auto res = sjrp::bsde::train(
      cfg, pol, diff, prm, {0.0}, /*resume=*/true,
      [&](const sjrp::bsde::IterationDiagnostics& d) {
        if (d.iteration % 100 == 0) {
          const double mins =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                  .count() /
              60.0;
          std::fprintf(stderr,
                       "[c4] iter %d/%d loss=%.5f viol=%.4f meanH0=%.4f (%.1f min)\n",
                       d.iteration, cfg.iterations, d.loss, d.violation, d.mean_h0,
                       mins);
        }
      });
  gate.check(!res.aborted, "training completed without divergence (" +
                               (res.aborted ? res.abort_reason : "ok") + ")");
  if (res.aborted) return gate.fails();

  // Sup-norm comparison on [-1, 3].
  double sup_v = 0.0, sup_dv = 0.0, err_h = 0.0, err_g = 0.0;
  double worst_h_at = 0.0, worst_g_at = 0.0;
  for (double x = -1.0; x <= 3.0 + 1e-9; x += 0.01) {
    const double v = oracle.value_at(x);
    const double dv = oracle.gradient_at(x);
    sup_v = std::max(sup_v, std::abs(v));
    sup_dv = std::max(sup_dv, std::abs(dv));
    const double hx = res.h.forward({x})[0];
    const double gx = res.g.forward({x})[0];
    if (std::abs(hx - v) > err_h) {
      err_h = std::abs(hx - v);
      worst_h_at = x;
    }
    if (std::abs(gx - dv) > err_g) {
      err_g = std::abs(gx - dv);
      worst_g_at = x;
    }
  }
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "H sup-error %.4f (%.2f%% of sup|V|=%.2f, worst at x=%.2f) <= 2%%",
                err_h, 100.0 * err_h / sup_v, sup_v, worst_h_at);
  gate.check(err_h <= 0.02 * sup_v, buf);
  std::snprintf(buf, sizeof(buf),
                "G sup-error %.4f (%.2f%% of sup|V'|=%.2f, worst at x=%.2f) <= 5%%",
                err_g, 100.0 * err_g / sup_dv, sup_dv, worst_g_at);
  gate.check(err_g <= 0.05 * sup_dv, buf);

  // Violation probability is nonincreasing across the beta stages (mean over
  // each stage's final 500 iterations).
  {
    const std::vector<int> stage_starts = {1, 5001, 10001};
    double prev = 1.0;
    bool monotone = true;
    for (size_t s = 0; s < stage_starts.size(); ++s) {
      const int end = s + 1 < stage_starts.size() ? stage_starts[s + 1] - 1
                                                  : cfg.iterations;
      double mean = 0.0;
      for (int it = end - 500; it < end; ++it) mean += res.diagnostics[it].violation;
      mean /= 500.0;
      if (mean > prev + 1e-9) monotone = false;
      prev = mean;
    }
    gate.check(monotone,
               "stage-end violation probability nonincreasing across beta stages");
  }

  // Held-out violation probability over 1e4 fresh paths from x0 = 0.
  std::vector<sjrp::bsde::PathBundle> held(10000);
  for (size_t k = 0; k < held.size(); ++k) {
    sjrp::RandomStream rng = sjrp::RandomStream::from_key(cfg.seed, 0x4e1d, 0, k);
    held[k] = sjrp::bsde::euler_maruyama(pol, diff, cfg.horizon_years, cfg.n_steps,
                                         {0.0}, rng);
  }
  const double viol = sjrp::bsde::violation_probability(res.h, res.g, held, prm, diff);
  std::snprintf(buf, sizeof(buf), "held-out violation probability %.4f < 1%%", viol);
  gate.check(viol < 0.01, buf);
  return gate.fails();
}

}  // namespace accept
