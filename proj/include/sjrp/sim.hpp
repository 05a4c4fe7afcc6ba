#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sjrp/core.hpp"

namespace sjrp::sim {

/// What a policy sees at the start of a period, besides the state: the
/// (1-based) period index and the aggregate demand accumulated since the last
/// period in which it placed a nonzero order.
struct Observation {
  int64_t period = 1;
  double aggregate_demand_since_order = 0.0;
};

/// Stateful decision rule.  decide() returns the order vector (>= 0) for the
/// current period; the engine clones one instance per sample path.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void reset() {}
  virtual Vec decide(const InventoryState& x, const Observation& obs) = 0;
  virtual std::unique_ptr<Policy> clone() const = 0;
  virtual std::string id() const = 0;
};

struct SimConfig {
  int64_t horizon_periods = 10000;
  int n_paths = 10000;
  uint64_t seed = 1;
  InventoryState initial_state;  // defaults to zero of the model dimension

  void validate() const;
};

struct CostComponents {
  double ordering = 0.0;  // fixed-cost part
  double variable = 0.0;
  double holding = 0.0;
  double backlog = 0.0;
};

struct CostEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int n_paths = 0;
  CostComponents components;  // per-path means of each discounted component
};

/// End-of-period state: x + order - demand (orders received before demand).
InventoryState step(const InventoryState& x, const Vec& order, const Vec& demand);

/// Mean over paths of sum_{n=1..horizon} gamma^{n-1} (f(X(n)) + c(y(n))).
/// Demand for (path, period) comes from a counter-based stream keyed on
/// (seed, path, period), so estimates are bit-identical for any worker count
/// and common random numbers hold across policies sharing a seed.
CostEstimate simulate_policy(const Policy& policy, const DemandModel& model,
                             const CostParams& params, const SimConfig& cfg);

/// Same engine with an injected demand source (deterministic stubs in tests).
using DemandSource = std::function<Vec(uint64_t seed, int64_t path, int64_t period)>;
CostEstimate simulate_policy_with(const Policy& policy, const DemandSource& demand,
                                  int dim, const CostParams& params,
                                  const SimConfig& cfg);

/// Appends "policy,mean,std_error,ordering,variable,holding,backlog,paths,
/// horizon,wall_seconds"; writes the schema comment row when creating.
void append_result_csv(const std::string& path, const std::string& policy_id,
                       const CostEstimate& est, int64_t horizon, double wall_seconds);

}  // namespace sjrp::sim
