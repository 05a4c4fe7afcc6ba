// Acceptance gate 5: closed/renewal-form (R,S) and (Q,S) costs agree with
// simulation within 3 combined standard errors on randomized instances.

#include <cmath>
#include <cstdio>

#include "common.hpp"
#include "sjrp/bench.hpp"

namespace accept {

int run_c5(const std::string& workdir) {
  (void)workdir;
  Gate gate("c5");
  sjrp::RandomStream pick = sjrp::RandomStream::from_key(5050);
  char buf[320];

  for (int inst = 0; inst < 5; ++inst) {
    sjrp::CostParams prm;
    prm.c0 = 10.0 + 90.0 * pick.uniform();
    prm.c = {0.5 * pick.uniform(), 0.5 * pick.uniform()};
    prm.h = {0.5 + 3.0 * pick.uniform(), 0.5 + 3.0 * pick.uniform()};
    prm.p = {5.0 + 60.0 * pick.uniform(), 5.0 + 60.0 * pick.uniform()};
    prm.annual_rate = 0.05;
    sjrp::DemandModel model;
    const bool poisson = (pick.next_u64() & 1) != 0;
    model.kind = poisson ? sjrp::DemandKind::poisson : sjrp::DemandKind::neg_binomial;
    model.annual_mean = {10.0 + 50.0 * pick.uniform(), 10.0 + 50.0 * pick.uniform()};
    if (!poisson) model.annual_cv = {0.5 + 0.5 * pick.uniform(), 0.5 + 0.5 * pick.uniform()};

    const int review = 1 + static_cast<int>(pick.next_u64() % 8);
    sjrp::Vec s(2);
    for (int i = 0; i < 2; ++i)
      s[i] = sjrp::bench::rs_optimal_basestock(review, i, model, prm);
    sjrp::bench::RsPolicy rs(review, s);
    const double analytic = sjrp::bench::rs_analytic_cost(rs, model, prm);
    sjrp::sim::SimConfig cfg;
    cfg.horizon_periods = 10000;
    cfg.n_paths = 1500;
    cfg.seed = 7100 + inst;
    const auto est = sjrp::sim::simulate_policy(rs, model, prm, cfg);
    std::snprintf(buf, sizeof(buf),
                  "instance %d (R,S): closed form %.2f vs simulated %.2f +- %.2f "
                  "(|diff| = %.2f SE)",
                  inst, analytic, est.mean, est.std_error,
                  std::abs(analytic - est.mean) / est.std_error);
    gate.check(std::abs(analytic - est.mean) <= 3.0 * est.std_error, buf);

    const double q_trigger =
        std::floor((1 + static_cast<int>(pick.next_u64() % 6)) *
                   model.aggregate_weekly_mean());
    sjrp::Vec sq(2);
    for (int i = 0; i < 2; ++i)
      sq[i] = sjrp::bench::qs_optimal_basestock(q_trigger, i, model, prm, 3000,
                                                6200 + inst);
    sjrp::bench::QsPolicy qs(q_trigger, sq);
    const auto renewal = sjrp::bench::qs_analytic_cost(qs, model, prm, 40000, 6300 + inst);
    cfg.seed = 7200 + inst;
    const auto qest = sjrp::sim::simulate_policy(qs, model, prm, cfg);
    const double combined = std::sqrt(renewal.std_error * renewal.std_error +
                                      qest.std_error * qest.std_error);
    std::snprintf(buf, sizeof(buf),
                  "instance %d (Q,S): renewal form %.2f +- %.2f vs simulated %.2f +- "
                  "%.2f (|diff| = %.2f SE)",
                  inst, renewal.cost, renewal.std_error, qest.mean, qest.std_error,
                  std::abs(renewal.cost - qest.mean) / combined);
    gate.check(std::abs(renewal.cost - qest.mean) <= 3.0 * combined, buf);
  }
  return gate.fails();
}

}  // namespace accept
