// Acceptance gate 2: 2-D optimality gap.  Trains H/G on the base case at the
// published hyperparameters, extracts the policy, and simulates it.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>

#include "common.hpp"
#include "sjrp/bench.hpp"
#include "sjrp/bsde.hpp"
#include "sjrp/mdp.hpp"
#include "sjrp/policy.hpp"

namespace accept {

int run_c2(const std::string& workdir) {
  Gate gate("c2");
  const sjrp::CostParams params = two_item_costs(50.0, 50.0);
  const sjrp::DemandModel model = two_item_demand(false, 0.5);
  const sjrp::DiffusionParams diff = sjrp::diffusion_moments(model);

  sjrp::bsde::ReferencePolicy pol;
  pol.lambda = 1.0;
  pol.order_up_to_mean = {35.0, 20.0};
  pol.nu = 0.2;
  pol.alpha = 0.0;

  sjrp::bsde::TrainConfig cfg;
  cfg.horizon_years = 0.1;
  cfg.n_steps = 50;
  cfg.batch_size = 2500;
  cfg.iterations = 25000;
  cfg.hidden_widths = {500, 500, 500, 500};
  cfg.lr_schedule.steps = {{1, 1e-3}, {10000, 1e-4}, {15000, 1e-5}, {20000, 1e-6}};
  cfg.beta_schedule.steps = {{1, 1e0},    {2500, 1e1},  {5000, 1e2}, {7500, 1e3},
                             {10000, 1e4}, {15000, 1e5}, {20000, 1e6}};
  cfg.kappa = 0.1;
  cfg.seed = 424242;
  cfg.checkpoint_every = 1000;
  cfg.checkpoint_path = workdir + "/c2_nets.bin";
  cfg.diagnostics_csv = workdir + "/c2_train.csv";

  const auto t0 = std::chrono::steady_clock::now();
  const auto res = sjrp::bsde::train(
      cfg, pol, diff, params, {0.0, 0.0}, /*resume=*/true,
      [&](const sjrp::bsde::IterationDiagnostics& d) {
        if (d.iteration % 100 == 0) {
          const double hrs =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                  .count() /
              3600.0;
          std::fprintf(stderr,
                       "[c2] iter %d/%d loss=%.5f viol=%.4f meanH0=%.4f beta=%g "
                       "(%.2f h)\n",
                       d.iteration, cfg.iterations, d.loss, d.violation, d.mean_h0,
                       d.beta, hrs);
        }
      });
  gate.check(!res.aborted, "training completed without divergence (" +
                               (res.aborted ? res.abort_reason : "ok") + ")");
  if (res.aborted) return gate.fails();

  // Policy extraction at the published settings (epsilon and bounds are in
  // the kappa-scaled cost units used during training).
  const sjrp::CostParams scaled = params.scaled(cfg.kappa);
  auto h = std::make_shared<sjrp::nn::Mlp>(res.h);
  auto g = std::make_shared<sjrp::nn::Mlp>(res.g);
  const sjrp::policy::MlpValueModel value_model(h, g);
  sjrp::policy::ExtractionConfig ext;
  ext.epsilon_threshold = -2.5;
  ext.bounds_lo = {0.0, 0.0};
  ext.bounds_hi = {1.5 * 35.0, 1.5 * 20.0};
  ext.start = {35.0, 20.0};
  ext.method = sjrp::policy::ExtractionMethod::minimize_value;
  const auto zres = sjrp::policy::compute_order_up_to(value_model, scaled, ext);
  char buf[300];
  std::snprintf(buf, sizeof(buf), "order-up-to z* = (%.2f, %.2f)%s", zres.z[0],
                zres.z[1], zres.boundary_warning ? " [boundary warning]" : "");
  gate.note(buf);

  sjrp::policy::NnPolicy nn_pol(h, g, zres.z, ext.epsilon_threshold, scaled, diff);
  sjrp::sim::SimConfig eval_cfg;
  eval_cfg.horizon_periods = 5000;
  eval_cfg.n_paths = 1000;
  eval_cfg.seed = 777;
  const auto est = sjrp::sim::simulate_policy(nn_pol, model, params, eval_cfg);
  const double se_pct = 100.0 * est.std_error / est.mean;
  std::snprintf(buf, sizeof(buf), "NN policy cost %.2f +- %.2f (SE %.2f%% < 0.5%%)",
                est.mean, est.std_error, se_pct);
  gate.check(se_pct < 0.5, buf);
  std::snprintf(buf, sizeof(buf),
                "NN cost %.2f within 1.5%% of the MDP value 2936.24 (gap %.2f%%)",
                est.mean, 100.0 * (est.mean - 2936.24) / 2936.24);
  gate.check(std::abs(est.mean - 2936.24) <= 0.015 * 2936.24, buf);

  // Order-region overlap against the exact MDP policy, when gate 1 has run.
  const std::string mdp_path = workdir + "/base_case_mdp.bin";
  if (std::filesystem::exists(mdp_path)) {
    const auto sol = sjrp::mdp::load_solution(mdp_path);
    int64_t mdp_region = 0, sym_diff = 0;
    for (int a = -60; a <= 60; ++a) {
      for (int b = -60; b <= 60; ++b) {
        const std::vector<int> x = {a, b};
        const auto z = sol.order_up_to(x);
        const bool mdp_orders = z[0] > a || z[1] > b;
        const sjrp::Vec y = nn_pol.decide(
            {static_cast<double>(a), static_cast<double>(b)}, sjrp::sim::Observation{});
        const bool nn_orders = sjrp::vec::sum(y) > 0.0;
        mdp_region += mdp_orders;
        sym_diff += mdp_orders != nn_orders;
      }
    }
    std::snprintf(buf, sizeof(buf),
                  "order-region symmetric difference %lld cells vs MDP region %lld "
                  "(%.1f%% <= 10%%)",
                  static_cast<long long>(sym_diff), static_cast<long long>(mdp_region),
                  100.0 * sym_diff / std::max<int64_t>(mdp_region, 1));
    gate.check(sym_diff <= 0.10 * mdp_region, buf);
    sjrp::policy::write_region_csv(workdir + "/c2_nn_region.csv", value_model, zres.z,
                                   ext.epsilon_threshold, scaled, diff, {-60, -60},
                                   {60, 60});
  } else {
    gate.note("base_case_mdp.bin not found; run gate c1 first for the region check");
  }
  return gate.fails();
}

}  // namespace accept
