#pragma once

#include <memory>
#include <string>
#include <vector>

#include "sjrp/core.hpp"
#include "sjrp/mdp.hpp"
#include "sjrp/sim.hpp"

namespace sjrp::bench {

/// Replenish every R weeks up to S (first order in period 1).
class RsPolicy : public sim::Policy {
 public:
  RsPolicy(int review_period, Vec base_stock);
  Vec decide(const InventoryState& x, const sim::Observation& obs) override;
  std::unique_ptr<sim::Policy> clone() const override;
  std::string id() const override;
  int review_period() const { return r_; }
  const Vec& base_stock() const { return s_; }

 private:
  int r_;
  Vec s_;
};

/// Order up to S whenever aggregate demand since the last order reaches Q
/// (an order is also placed in period 1 to establish S).
class QsPolicy : public sim::Policy {
 public:
  QsPolicy(double trigger, Vec base_stock);
  Vec decide(const InventoryState& x, const sim::Observation& obs) override;
  std::unique_ptr<sim::Policy> clone() const override;
  std::string id() const override;
  double trigger() const { return q_; }
  const Vec& base_stock() const { return s_; }

 private:
  double q_;
  Vec s_;
};

/// Reorder points s, can-order points o, order-up-to levels S.
class CanOrderPolicy : public sim::Policy {
 public:
  CanOrderPolicy(Vec reorder, Vec can_order, Vec order_up_to);
  Vec decide(const InventoryState& x, const sim::Observation& obs) override;
  std::unique_ptr<sim::Policy> clone() const override;
  std::string id() const override;
  const Vec& reorder() const { return s_; }
  const Vec& can_order() const { return o_; }
  const Vec& order_up_to() const { return up_; }

 private:
  Vec s_, o_, up_;
};

/// Item-wise (s_i, S_i) with no coordination.
class IndependentSsPolicy : public sim::Policy {
 public:
  IndependentSsPolicy(Vec reorder, Vec order_up_to, double alpha);
  Vec decide(const InventoryState& x, const sim::Observation& obs) override;
  std::unique_ptr<sim::Policy> clone() const override;
  std::string id() const override;
  const Vec& reorder() const { return s_; }
  const Vec& order_up_to() const { return up_; }
  double alpha() const { return alpha_; }

 private:
  Vec s_, up_;
  double alpha_;
};

/// Table lookup into an exact MDP solution (states clamped into the box).
class MdpTablePolicy : public sim::Policy {
 public:
  explicit MdpTablePolicy(std::shared_ptr<const mdp::MdpSolution> sol);
  Vec decide(const InventoryState& x, const sim::Observation& obs) override;
  std::unique_ptr<sim::Policy> clone() const override;
  std::string id() const override;

 private:
  std::shared_ptr<const mdp::MdpSolution> sol_;
};

// ---------------------------------------------------------------------------
// Closed and renewal-form discounted costs.
// ---------------------------------------------------------------------------

/// Exact expected total discounted cost of an (R,S) policy: the fixed part in
/// closed form, per-item parts from exact r-week demand pmfs.
double rs_analytic_cost(const RsPolicy& policy, const DemandModel& model,
                        const CostParams& params);

/// Integer minimizer of (1-gamma^R) c_i y + sum_{r<R} gamma^r E f_i(y - D^(r+1)).
int rs_optimal_basestock(int review_period, int item, const DemandModel& model,
                         const CostParams& params);

/// i.i.d. samples of R_Q = min{R >= 1 : aggregate demand over R weeks >= Q}.
std::vector<int> qs_cycle_samples(double trigger, const DemandModel& model,
                                  int n_samples, RandomStream& rng);

/// Sample-average minimizer of the (Q,S) base-stock objective, reusing one
/// fixed R_Q sample set across all candidate levels.
int qs_optimal_basestock(double trigger, int item, const DemandModel& model,
                         const CostParams& params, int n_samples, uint64_t seed);

struct QsAnalyticCost {
  double cost = 0.0;
  double std_error = 0.0;  // batch-means error of the renewal-form estimate
};

/// Renewal-reward form of the (Q,S) discounted cost, estimated by common-
/// random-number simulation of replenishment cycles.
QsAnalyticCost qs_analytic_cost(const QsPolicy& policy, const DemandModel& model,
                                const CostParams& params, int n_samples,
                                uint64_t seed = 71);

// ---------------------------------------------------------------------------
// Tuning searches.  Ties break toward the lexicographically smaller parameter.
// ---------------------------------------------------------------------------

struct RsSearchResult {
  std::unique_ptr<RsPolicy> policy;
  sim::CostEstimate estimate;
};
RsSearchResult rs_search(const DemandModel& model, const CostParams& params,
                         int r_max, const sim::SimConfig& cfg,
                         const std::string& candidates_csv = "");

struct QsSearchResult {
  std::unique_ptr<QsPolicy> policy;
  sim::CostEstimate estimate;
};
QsSearchResult qs_search(const DemandModel& model, const CostParams& params,
                         int r_star, const sim::SimConfig& cfg,
                         const std::string& candidates_csv = "");

/// Single-item (s,S) tuned for fixed cost alpha*c0 by 1-D policy iteration;
/// widens the truncation box up to three times if the optimum presses it.
IndependentSsPolicy make_independent_ss(double alpha, const DemandModel& model,
                                        const CostParams& params);

struct SsSearchResult {
  std::unique_ptr<IndependentSsPolicy> policy;
  sim::CostEstimate estimate;
};
SsSearchResult independent_ss_search(const DemandModel& model, const CostParams& params,
                                     const sim::SimConfig& cfg,
                                     const std::string& candidates_csv = "");

struct CanOrderSearchResult {
  std::unique_ptr<CanOrderPolicy> policy;
  sim::CostEstimate estimate;
  double alpha = 0.0, kappa = 0.0;
};
CanOrderSearchResult can_order_search(const DemandModel& model, const CostParams& params,
                                      const sim::SimConfig& cfg,
                                      const std::string& candidates_csv = "");

}  // namespace sjrp::bench
