// Acceptance gate 7: 12-item pipeline check at reduced scale (iterations cut
// to 4,000 and batch to 1,000; the step schedules are compressed by the same
// factor of ten).  Verifies mechanics, not the published table values.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>

#include "common.hpp"
#include "sjrp/bench.hpp"
#include "sjrp/bsde.hpp"
#include "sjrp/policy.hpp"

namespace accept {

namespace {

sjrp::DemandModel twelve_item_demand() {
  sjrp::DemandModel m;
  m.kind = sjrp::DemandKind::poisson;
  m.annual_mean = {40, 35, 40, 40, 40, 20, 20, 20, 28, 20, 20, 20};
  return m;
}

sjrp::CostParams twelve_item_costs(double c0, double p) {
  sjrp::CostParams prm;
  prm.c0 = c0;
  prm.c = {0.1, 0.1, 0.2, 0.2, 0.4, 0.2, 0.4, 0.4, 0.6, 0.6, 0.8, 0.8};
  prm.h.assign(12, 2.0);
  prm.p.assign(12, p);
  prm.annual_rate = 0.05;
  return prm;
}

}  // namespace

int run_c7(const std::string& workdir) {
  Gate gate("c7");
  const sjrp::DemandModel model = twelve_item_demand();
  const sjrp::CostParams params = twelve_item_costs(20.0, 10.0);
  const sjrp::DiffusionParams diff = sjrp::diffusion_moments(model);
  char buf[320];

  // Reference order-up-to vector: the tuned (Q,S) policy's S.
  sjrp::sim::SimConfig search_cfg;
  search_cfg.horizon_periods = 4000;
  search_cfg.n_paths = 500;
  search_cfg.seed = 7001;
  const auto t0 = std::chrono::steady_clock::now();
  const auto rs = sjrp::bench::rs_search(model, params, 40, search_cfg);
  const auto qs = sjrp::bench::qs_search(model, params, rs.policy->review_period(),
                                         search_cfg);
  const auto ss = sjrp::bench::independent_ss_search(model, params, search_cfg);
  std::snprintf(buf, sizeof(buf),
                "benchmarks tuned in %.1f min: R*=%d, Q*=%.0f, ss alpha=%.2f",
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                        .count() /
                    60.0,
                rs.policy->review_period(), qs.policy->trigger(), ss.policy->alpha());
  gate.note(buf);

  sjrp::bsde::ReferencePolicy pol;
  pol.lambda = 4.00;
  pol.order_up_to_mean = qs.policy->base_stock();
  pol.nu = 0.2;
  pol.alpha = 0.4;

  sjrp::bsde::TrainConfig cfg;
  cfg.horizon_years = 0.1;
  cfg.n_steps = 50;
  cfg.batch_size = 1000;
  cfg.iterations = 4000;
  cfg.hidden_widths = {1000, 1000, 1000};
  cfg.lr_schedule.steps = {{1, 1e-3}, {500, 5e-4}, {1000, 1e-4}, {1500, 1e-5},
                           {2000, 1e-6}};
  cfg.beta_schedule.steps = {{1, 1e0},    {250, 1e1},  {500, 1e2}, {750, 1e3},
                             {1000, 1e4}, {1500, 1e5}, {2000, 1e6}};
  cfg.kappa = 0.1;
  cfg.seed = 1212;
  cfg.checkpoint_every = 500;
  cfg.checkpoint_path = workdir + "/c7_nets.bin";
  cfg.diagnostics_csv = workdir + "/c7_train.csv";

  const auto t1 = std::chrono::steady_clock::now();
  const auto res = sjrp::bsde::train(
      cfg, pol, diff, params, sjrp::Vec(12, 0.0), /*resume=*/true,
      [&](const sjrp::bsde::IterationDiagnostics& d) {
        if (d.iteration % 50 == 0)
          std::fprintf(stderr, "[c7] iter %d/%d loss=%.5f viol=%.4f (%.1f min)\n",
                       d.iteration, cfg.iterations, d.loss, d.violation,
                       std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - t1)
                               .count() /
                           60.0);
      });
  gate.check(!res.aborted, "training completed without divergence (" +
                               (res.aborted ? res.abort_reason : "ok") + ")");
  if (res.aborted) return gate.fails();

  // Loss decreases within each beta stage (first vs last quarter means).
  {
    const auto& diag = res.diagnostics;
    int decreasing = 0, stages = 0;
    for (size_t s = 0; s < cfg.beta_schedule.steps.size(); ++s) {
      const int from = cfg.beta_schedule.steps[s].first;
      const int to = s + 1 < cfg.beta_schedule.steps.size()
                         ? cfg.beta_schedule.steps[s + 1].first - 1
                         : cfg.iterations;
      const int len = to - from + 1;
      if (len < 200) continue;
      ++stages;
      const int quarter = len / 4;
      double first = 0.0, last = 0.0;
      for (int i = 0; i < quarter; ++i) {
        first += diag[from - 1 + i].loss;
        last += diag[to - quarter + i].loss;
      }
      if (last < first) ++decreasing;
    }
    std::snprintf(buf, sizeof(buf),
                  "training loss decreases across beta stages (%d of %d stages)",
                  decreasing, stages);
    gate.check(decreasing == stages, buf);
  }

  // Held-out violation probability below 5%.
  std::vector<sjrp::bsde::PathBundle> held(2000);
  for (size_t k = 0; k < held.size(); ++k) {
    sjrp::RandomStream rng = sjrp::RandomStream::from_key(cfg.seed, 0x4e1d, 1, k);
    held[k] = sjrp::bsde::euler_maruyama(pol, diff, cfg.horizon_years, cfg.n_steps,
                                         sjrp::Vec(12, 0.0), rng);
  }
  const sjrp::CostParams scaled = params.scaled(cfg.kappa);
  const double viol =
      sjrp::bsde::violation_probability(res.h, res.g, held, scaled, diff);
  std::snprintf(buf, sizeof(buf), "held-out violation probability %.4f < 5%%", viol);
  gate.check(viol < 0.05, buf);

  // Extraction (bounds [0, 2] x E[Z], start 0.5 x E[Z], epsilon -2.5) and the
  // 10-path x 2000-period comparison against independent (s,S).
  auto h = std::make_shared<sjrp::nn::Mlp>(res.h);
  auto g = std::make_shared<sjrp::nn::Mlp>(res.g);
  const sjrp::policy::MlpValueModel value_model(h, g);
  sjrp::policy::ExtractionConfig ext;
  ext.epsilon_threshold = -2.5;
  ext.bounds_lo.assign(12, 0.0);
  ext.bounds_hi.resize(12);
  ext.start.resize(12);
  for (int i = 0; i < 12; ++i) {
    ext.bounds_hi[i] = 2.0 * pol.order_up_to_mean[i];
    ext.start[i] = 0.5 * pol.order_up_to_mean[i];
  }
  const auto zres = sjrp::policy::compute_order_up_to(value_model, scaled, ext);
  std::string zs = "z* = (";
  for (int i = 0; i < 12; ++i)
    zs += std::to_string(zres.z[i]) + (i + 1 < 12 ? ", " : ")");
  gate.note(zs + (zres.boundary_warning ? " [boundary warning]" : ""));

  sjrp::policy::NnPolicy nn_pol(h, g, zres.z, ext.epsilon_threshold, scaled, diff);
  sjrp::sim::SimConfig eval_cfg;
  eval_cfg.horizon_periods = 2000;
  eval_cfg.n_paths = 10;
  eval_cfg.seed = 7777;
  const auto nn_est = sjrp::sim::simulate_policy(nn_pol, model, params, eval_cfg);
  const auto ss_est = sjrp::sim::simulate_policy(*ss.policy, model, params, eval_cfg);
  std::snprintf(buf, sizeof(buf),
                "NN policy %.2f +- %.2f beats independent (s,S) %.2f +- %.2f",
                nn_est.mean, nn_est.std_error, ss_est.mean, ss_est.std_error);
  gate.check(nn_est.mean < ss_est.mean, buf);
  return gate.fails();
}

}  // namespace accept
