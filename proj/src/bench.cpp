#include "sjrp/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace sjrp::bench {

namespace {

// Per-candidate search trace.
class CandidateCsv {
 public:
  explicit CandidateCsv(const std::string& path) {
    if (path.empty()) return;
    f_.open(path, std::ios::trunc);
    if (f_) f_ << "# schema=1 candidate,mean,std_error\n";
  }
  void row(const std::string& cand, const sim::CostEstimate& est) {
    if (f_) f_ << cand << ',' << est.mean << ',' << est.std_error << '\n';
  }

 private:
  std::ofstream f_;
};

Vec order_up_to_order(const InventoryState& x, const Vec& target) {
  Vec y(x.size(), 0.0);
  for (size_t i = 0; i < x.size(); ++i) y[i] = std::max(target[i] - x[i], 0.0);
  return y;
}

}  // namespace

// ------------------------------- policies -----------------------------------

RsPolicy::RsPolicy(int review_period, Vec base_stock)
    : r_(review_period), s_(std::move(base_stock)) {
  if (r_ < 1) throw ConfigError("RsPolicy: R must be >= 1");
  if (!vec::all_geq_zero(s_)) throw ConfigError("RsPolicy: base stock must be >= 0");
}

Vec RsPolicy::decide(const InventoryState& x, const sim::Observation& obs) {
  if ((obs.period - 1) % r_ == 0) return order_up_to_order(x, s_);
  return Vec(x.size(), 0.0);
}

std::unique_ptr<sim::Policy> RsPolicy::clone() const {
  return std::make_unique<RsPolicy>(*this);
}

std::string RsPolicy::id() const { return "rs(R=" + std::to_string(r_) + ")"; }

QsPolicy::QsPolicy(double trigger, Vec base_stock)
    : q_(trigger), s_(std::move(base_stock)) {
  if (q_ < 0.0) throw ConfigError("QsPolicy: Q must be >= 0");
  if (!vec::all_geq_zero(s_)) throw ConfigError("QsPolicy: base stock must be >= 0");
}

Vec QsPolicy::decide(const InventoryState& x, const sim::Observation& obs) {
  if (obs.period == 1 || obs.aggregate_demand_since_order >= q_)
    return order_up_to_order(x, s_);
  return Vec(x.size(), 0.0);
}

std::unique_ptr<sim::Policy> QsPolicy::clone() const {
  return std::make_unique<QsPolicy>(*this);
}

std::string QsPolicy::id() const { return "qs(Q=" + std::to_string(q_) + ")"; }

CanOrderPolicy::CanOrderPolicy(Vec reorder, Vec can_order, Vec order_up_to)
    : s_(std::move(reorder)), o_(std::move(can_order)), up_(std::move(order_up_to)) {
  for (size_t i = 0; i < s_.size(); ++i)
    if (!(s_[i] <= o_[i] && o_[i] <= up_[i]))
      throw ConfigError("CanOrderPolicy: need s <= o <= S componentwise");
}

Vec CanOrderPolicy::decide(const InventoryState& x, const sim::Observation&) {
  bool trigger = false;
  for (size_t i = 0; i < x.size(); ++i)
    if (x[i] <= s_[i]) trigger = true;
  Vec y(x.size(), 0.0);
  if (!trigger) return y;
  for (size_t i = 0; i < x.size(); ++i)
    if (x[i] <= o_[i]) y[i] = std::max(up_[i] - x[i], 0.0);
  return y;
}

std::unique_ptr<sim::Policy> CanOrderPolicy::clone() const {
  return std::make_unique<CanOrderPolicy>(*this);
}

std::string CanOrderPolicy::id() const { return "can_order"; }

IndependentSsPolicy::IndependentSsPolicy(Vec reorder, Vec order_up_to, double alpha)
    : s_(std::move(reorder)), up_(std::move(order_up_to)), alpha_(alpha) {
  for (size_t i = 0; i < s_.size(); ++i)
    if (!(s_[i] < up_[i])) throw ConfigError("IndependentSsPolicy: need s_i < S_i");
}

Vec IndependentSsPolicy::decide(const InventoryState& x, const sim::Observation&) {
  Vec y(x.size(), 0.0);
  for (size_t i = 0; i < x.size(); ++i)
    if (x[i] <= s_[i]) y[i] = std::max(up_[i] - x[i], 0.0);
  return y;
}

std::unique_ptr<sim::Policy> IndependentSsPolicy::clone() const {
  return std::make_unique<IndependentSsPolicy>(*this);
}

std::string IndependentSsPolicy::id() const {
  return "independent_ss(alpha=" + std::to_string(alpha_) + ")";
}

MdpTablePolicy::MdpTablePolicy(std::shared_ptr<const mdp::MdpSolution> sol)
    : sol_(std::move(sol)) {}

Vec MdpTablePolicy::decide(const InventoryState& x, const sim::Observation&) {
  std::vector<int> xi(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const int v = static_cast<int>(std::llround(x[i]));
    xi[i] = std::clamp(v, sol_->state_lo[i], sol_->state_hi[i]);
  }
  const std::vector<int> z = sol_->order_up_to(xi);
  Vec y(x.size(), 0.0);
  for (size_t i = 0; i < x.size(); ++i) y[i] = std::max(z[i] - x[i], 0.0);
  return y;
}

std::unique_ptr<sim::Policy> MdpTablePolicy::clone() const {
  return std::make_unique<MdpTablePolicy>(*this);
}

std::string MdpTablePolicy::id() const { return "mdp_table"; }

// ---------------------------- analytic costs --------------------------------

double rs_analytic_cost(const RsPolicy& policy, const DemandModel& model,
                        const CostParams& params) {
  const int d = model.dim();
  const int r = policy.review_period();
  const Vec& s = policy.base_stock();
  const double gamma = weekly_discount(params);
  const double gr = std::pow(gamma, r);

  // P(aggregate R-week demand > 0) = 1 - prod_i P(D_i^(R) = 0).
  double p_zero = 1.0;
  for (int i = 0; i < d; ++i) {
    if (model.kind == DemandKind::poisson) {
      p_zero *= std::exp(-model.weekly_mean(i) * r);
    } else {
      const NbParams nb = model.nb_params(i);
      p_zero *= std::pow(nb.q, nb.annual_shape * r / model.periods_per_year);
    }
  }
  const double p_pos = 1.0 - p_zero;
  const bool any_positive = vec::sum(s) > 0.0;
  double fixed = params.c0 * gr / (1.0 - gr) * p_pos;
  if (any_positive) fixed += params.c0;

  double item_costs = 0.0;
  for (int i = 0; i < d; ++i) {
    double hb = 0.0;
    for (int rr = 0; rr < r; ++rr) {
      const Vec pmf = demand_pmf(model, i, rr + 1);
      hb += std::pow(gamma, rr) * kWeekFraction *
            expected_state_cost(pmf, s[i], params.h[i], params.p[i]);
    }
    const double mean_r = model.weekly_mean(i) * r;
    item_costs += params.c[i] * s[i] + hb / (1.0 - gr) +
                  gr / (1.0 - gr) * params.c[i] * mean_r;
  }
  return fixed + item_costs;
}

int rs_optimal_basestock(int review_period, int item, const DemandModel& model,
                         const CostParams& params) {
  if (review_period < 1) throw ConfigError("rs_optimal_basestock: R must be >= 1");
  const double gamma = weekly_discount(params);
  const double gr = std::pow(gamma, review_period);
  std::vector<Vec> pmfs(review_period);
  for (int rr = 0; rr < review_period; ++rr) pmfs[rr] = demand_pmf(model, item, rr + 1);
  auto objective = [&](int y) {
    double v = (1.0 - gr) * params.c[item] * y;
    for (int rr = 0; rr < review_period; ++rr)
      v += std::pow(gamma, rr) * kWeekFraction *
           expected_state_cost(pmfs[rr], y, params.h[item], params.p[item]);
    return v;
  };
  // Convex in y: scan until the first increase.
  double best = objective(0);
  int y = 0;
  for (;;) {
    const double next = objective(y + 1);
    if (next >= best) return y;
    best = next;
    ++y;
    if (y > 100000000) throw NumericError("rs_optimal_basestock: unbounded scan");
  }
}

std::vector<int> qs_cycle_samples(double trigger, const DemandModel& model,
                                  int n_samples, RandomStream& rng) {
  if (trigger < 0.0) throw ConfigError("qs_cycle_samples: Q must be >= 0");
  std::vector<int> out(n_samples);
  for (int s = 0; s < n_samples; ++s) {
    double cum = 0.0;
    int weeks = 0;
    do {
      cum += vec::sum(weekly_demand_sample(model, rng));
      ++weeks;
      if (weeks > 100000000) throw NumericError("qs_cycle_samples: cycle does not end");
    } while (cum < trigger);
    out[s] = weeks;
  }
  return out;
}

int qs_optimal_basestock(double trigger, int item, const DemandModel& model,
                         const CostParams& params, int n_samples, uint64_t seed) {
  if (n_samples < 100)
    throw ConfigError("qs_optimal_basestock: need at least 100 cycle samples");
  RandomStream rng = RandomStream::from_key(seed, 0x9505, item);
  const std::vector<int> cycles = qs_cycle_samples(trigger, model, n_samples, rng);
  const int r_max = *std::max_element(cycles.begin(), cycles.end());
  const double gamma = weekly_discount(params);
  // w[r] = empirical P(R_Q > r); q_mean = E[1 - gamma^{R_Q}].
  Vec w(r_max, 0.0);
  double q_mean = 0.0;
  for (int rq : cycles) {
    for (int r = 0; r < rq; ++r) w[r] += 1.0;
    q_mean += 1.0 - std::pow(gamma, rq);
  }
  for (auto& v : w) v /= n_samples;
  q_mean /= n_samples;
  std::vector<Vec> pmfs(r_max);
  for (int r = 0; r < r_max; ++r) pmfs[r] = demand_pmf(model, item, r + 1);
  auto objective = [&](int y) {
    double v = q_mean * params.c[item] * y;
    for (int r = 0; r < r_max; ++r)
      v += w[r] * std::pow(gamma, r) * kWeekFraction *
           expected_state_cost(pmfs[r], y, params.h[item], params.p[item]);
    return v;
  };
  double best = objective(0);
  int y = 0;
  for (;;) {
    const double next = objective(y + 1);
    if (next >= best) return y;
    best = next;
    ++y;
    if (y > 100000000) throw NumericError("qs_optimal_basestock: unbounded scan");
  }
}

QsAnalyticCost qs_analytic_cost(const QsPolicy& policy, const DemandModel& model,
                                const CostParams& params, int n_samples,
                                uint64_t seed) {
  const int d = model.dim();
  const Vec& s = policy.base_stock();
  const double gamma = weekly_discount(params);
  // Simulate cycles; within each, track realized per-item cumulative demand so
  // the f-costs and the cycle length share the same randomness.
  const int n_batches = 50;
  const int per_batch = std::max(n_samples / n_batches, 1);
  Vec batch_cost(n_batches);
  RandomStream rng = RandomStream::from_key(seed, 0x9C7C);
  double first_order = params.c0;
  for (int i = 0; i < d; ++i) first_order += params.c[i] * s[i];

  for (int b = 0; b < n_batches; ++b) {
    double cycle_sum = 0.0, disc_mean = 0.0;
    for (int it = 0; it < per_batch; ++it) {
      Vec cum(d, 0.0);
      double agg = 0.0, disc = 1.0, cost = 0.0;
      int weeks = 0;
      do {
        const Vec demand = weekly_demand_sample(model, rng);
        for (int i = 0; i < d; ++i) cum[i] += demand[i];
        agg += vec::sum(demand);
        double f = 0.0;
        for (int i = 0; i < d; ++i) {
          const double v = s[i] - cum[i];
          f += v >= 0.0 ? params.h[i] * v : -params.p[i] * v;
        }
        cost += disc * f * kWeekFraction;
        disc *= gamma;
        ++weeks;
        if (weeks > 100000000) throw NumericError("qs_analytic_cost: cycle overrun");
      } while (agg < policy.trigger());
      // End-of-cycle replenishment back to S, discounted to the cycle start.
      double var = 0.0;
      for (int i = 0; i < d; ++i) var += params.c[i] * cum[i];
      cost += disc * var;
      cycle_sum += cost;
      disc_mean += disc;  // gamma^{R_Q}
    }
    cycle_sum /= per_batch;
    disc_mean /= per_batch;
    batch_cost[b] = first_order + (cycle_sum + params.c0 * disc_mean) / (1.0 - disc_mean);
  }
  QsAnalyticCost out;
  for (double v : batch_cost) out.cost += v;
  out.cost /= n_batches;
  double sd = 0.0;
  for (double v : batch_cost) sd += (v - out.cost) * (v - out.cost);
  out.std_error = std::sqrt(sd / (n_batches - 1) / n_batches);
  return out;
}

// ------------------------------- searches -----------------------------------

RsSearchResult rs_search(const DemandModel& model, const CostParams& params, int r_max,
                         const sim::SimConfig& cfg, const std::string& candidates_csv) {
  RsSearchResult best;
  CandidateCsv csv(candidates_csv);
  for (int r = 1; r <= r_max; ++r) {
    Vec s(model.dim());
    for (int i = 0; i < model.dim(); ++i)
      s[i] = rs_optimal_basestock(r, i, model, params);
    RsPolicy cand(r, s);
    const sim::CostEstimate est = sim::simulate_policy(cand, model, params, cfg);
    csv.row("R=" + std::to_string(r), est);
    if (!best.policy || est.mean < best.estimate.mean) {
      best.policy = std::make_unique<RsPolicy>(cand);
      best.estimate = est;
    }
  }
  return best;
}

QsSearchResult qs_search(const DemandModel& model, const CostParams& params, int r_star,
                         const sim::SimConfig& cfg, const std::string& candidates_csv) {
  const double weekly_aggregate = model.aggregate_weekly_mean();
  const int q_lo =
      std::max(0, static_cast<int>(std::floor((r_star - 5) * weekly_aggregate)));
  const int q_hi = static_cast<int>(std::floor((r_star + 5) * weekly_aggregate));
  QsSearchResult best;
  CandidateCsv csv(candidates_csv);
  for (int q = q_lo; q <= q_hi; ++q) {
    Vec s(model.dim());
    for (int i = 0; i < model.dim(); ++i)
      s[i] = qs_optimal_basestock(q, i, model, params, 4000, cfg.seed + q);
    QsPolicy cand(q, s);
    const sim::CostEstimate est = sim::simulate_policy(cand, model, params, cfg);
    csv.row("Q=" + std::to_string(q), est);
    if (!best.policy || est.mean < best.estimate.mean) {
      best.policy = std::make_unique<QsPolicy>(cand);
      best.estimate = est;
    }
  }
  return best;
}

IndependentSsPolicy make_independent_ss(double alpha, const DemandModel& model,
                                        const CostParams& params) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw ConfigError("make_independent_ss: alpha must lie in (0, 1]");
  const int d = model.dim();
  Vec s(d), up(d);
  for (int i = 0; i < d; ++i) {
    DemandModel item_model;
    item_model.kind = model.kind;
    item_model.annual_mean = {model.annual_mean[i]};
    if (model.kind == DemandKind::neg_binomial) item_model.annual_cv = {model.annual_cv[i]};
    CostParams item_params;
    item_params.c0 = alpha * params.c0;
    item_params.c = {params.c[i]};
    item_params.h = {params.h[i]};
    item_params.p = {params.p[i]};
    item_params.annual_rate = params.annual_rate;

    int half = std::max(8, static_cast<int>(std::ceil(40.0 * model.weekly_mean(i))));
    bool ok = false;
    for (int widening = 0; widening <= 3 && !ok; ++widening, half *= 2) {
      mdp::TruncatedMdpSpec spec;
      spec.state_lo = {-half};
      spec.state_hi = {half};
      spec.action_hi = {half};
      spec.model = item_model;
      spec.params = item_params;
      const mdp::MdpSolution sol = mdp::policy_iteration(spec);
      // Extract s_i as the largest state with a positive order.
      int s_i = spec.state_lo[0] - 1;
      int up_i = 0;
      for (int x = spec.state_lo[0]; x <= spec.state_hi[0]; ++x) {
        const int z = sol.order_up_to({x})[0];
        if (z > x) {
          s_i = x;
          up_i = z;
        }
      }
      if (s_i < spec.state_lo[0]) throw NumericError("make_independent_ss: never orders");
      // Bound pressed: widen and retry.
      if (up_i >= spec.action_hi[0] - 2 || s_i <= spec.state_lo[0] + 2) continue;
      s[i] = s_i;
      up[i] = up_i;
      ok = true;
    }
    if (!ok)
      throw NumericError("make_independent_ss: truncation bound still binding after 3 widenings");
  }
  return IndependentSsPolicy(s, up, alpha);
}

SsSearchResult independent_ss_search(const DemandModel& model, const CostParams& params,
                                     const sim::SimConfig& cfg,
                                     const std::string& candidates_csv) {
  SsSearchResult best;
  CandidateCsv csv(candidates_csv);
  for (int a = 1; a <= 20; ++a) {
    const double alpha = 0.05 * a;
    IndependentSsPolicy cand = make_independent_ss(alpha, model, params);
    const sim::CostEstimate est = sim::simulate_policy(cand, model, params, cfg);
    csv.row("alpha=" + std::to_string(alpha), est);
    if (!best.policy || est.mean < best.estimate.mean) {
      best.policy = std::make_unique<IndependentSsPolicy>(cand);
      best.estimate = est;
    }
  }
  return best;
}

CanOrderSearchResult can_order_search(const DemandModel& model, const CostParams& params,
                                      const sim::SimConfig& cfg,
                                      const std::string& candidates_csv) {
  CanOrderSearchResult best;
  CandidateCsv csv(candidates_csv);
  for (int a = 0; a <= 20; ++a) {
    // The grid nominally includes alpha = 0; the (s,S) family needs
    // alpha > 0, so that column maps to the smallest grid value.
    const double alpha = a == 0 ? 0.05 : 0.05 * a;
    const IndependentSsPolicy base = make_independent_ss(alpha, model, params);
    for (int kk = 0; kk <= 10; ++kk) {
      const double kappa = 0.1 * kk;
      Vec o(model.dim());
      for (int i = 0; i < model.dim(); ++i)
        o[i] = std::round(kappa * base.reorder()[i] + (1.0 - kappa) * base.order_up_to()[i]);
      CanOrderPolicy cand(base.reorder(), o, base.order_up_to());
      const sim::CostEstimate est = sim::simulate_policy(cand, model, params, cfg);
      csv.row("alpha=" + std::to_string(alpha) + ";kappa=" + std::to_string(kappa), est);
      if (!best.policy || est.mean < best.estimate.mean) {
        best.policy = std::make_unique<CanOrderPolicy>(cand);
        best.estimate = est;
        best.alpha = alpha;
        best.kappa = kappa;
      }
    }
  }
  return best;
}

}  // namespace sjrp::bench
