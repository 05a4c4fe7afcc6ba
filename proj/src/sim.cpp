#include "sjrp/sim.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "sjrp/parallel.hpp"

namespace sjrp::sim {

void SimConfig::validate() const {
  if (horizon_periods < 0 || n_paths < 1)
    throw ConfigError("SimConfig: horizon must be >= 0 and n_paths >= 1");
}

InventoryState step(const InventoryState& x, const Vec& order, const Vec& demand) {
  if (x.size() != order.size() || x.size() != demand.size())
    throw std::invalid_argument("step: dimension mismatch");
  InventoryState out(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    if (order[i] < 0.0) throw PolicyContractError("step: negative order component");
    out[i] = x[i] + order[i] - demand[i];
  }
  return out;
}

CostEstimate simulate_policy(const Policy& policy, const DemandModel& model,
                             const CostParams& params, const SimConfig& cfg) {
  model.validate();
  return simulate_policy_with(
      policy,
      [&model](uint64_t seed, int64_t path, int64_t period) {
        RandomStream rng = RandomStream::from_key(seed, 0xD43A, path, period);
        return weekly_demand_sample(model, rng);
      },
      model.dim(), params, cfg);
}

CostEstimate simulate_policy_with(const Policy& policy, const DemandSource& demand_at,
                                  int d, const CostParams& params,
                                  const SimConfig& cfg) {
  cfg.validate();
  params.validate();
  if (params.dim() != d) throw ConfigError("simulate_policy: cost/demand dimension mismatch");
  InventoryState x0 = cfg.initial_state;
  if (x0.empty()) x0.assign(d, 0.0);
  if (static_cast<int>(x0.size()) != d)
    throw ConfigError("simulate_policy: initial state dimension mismatch");
  const double gamma = weekly_discount(params);

  struct PathTotals {
    double total = 0.0;
    CostComponents comp;
  };
  std::vector<PathTotals> totals(cfg.n_paths);

  parallel::parallel_for(cfg.n_paths, [&](int64_t p0, int64_t p1) {
    for (int64_t p = p0; p < p1; ++p) {
      std::unique_ptr<Policy> pol = policy.clone();
      pol->reset();
      InventoryState x = x0;
      Observation obs;
      PathTotals acc;
      double disc = 1.0;
      for (int64_t n = 1; n <= cfg.horizon_periods; ++n) {
        obs.period = n;
        const Vec y = pol->decide(x, obs);
        double order_total = 0.0, var_cost = 0.0;
        for (int i = 0; i < d; ++i) {
          if (y[i] < 0.0)
            throw PolicyContractError(pol->id() + ": negative order component");
          order_total += y[i];
          var_cost += params.c[i] * y[i];
        }
        const Vec demand = demand_at(cfg.seed, p, n);
        x = step(x, y, demand);
        const StateCostSplit f = holding_backlog_split(x, params);
        acc.comp.holding += disc * f.holding * kWeekFraction;
        acc.comp.backlog += disc * f.backlog * kWeekFraction;
        if (order_total > 0.0) {
          acc.comp.ordering += disc * params.c0;
          acc.comp.variable += disc * var_cost;
          obs.aggregate_demand_since_order = 0.0;
        }
        obs.aggregate_demand_since_order += vec::sum(demand);
        acc.total += disc * ((f.holding + f.backlog) * kWeekFraction +
                             (order_total > 0.0 ? params.c0 + var_cost : 0.0));
        disc *= gamma;
      }
      totals[p] = acc;
    }
  });

  CostEstimate out;
  out.n_paths = cfg.n_paths;
  double sum = 0.0, sumsq = 0.0;
  for (const auto& t : totals) {
    sum += t.total;
    sumsq += t.total * t.total;
    out.components.ordering += t.comp.ordering;
    out.components.variable += t.comp.variable;
    out.components.holding += t.comp.holding;
    out.components.backlog += t.comp.backlog;
  }
  const double n = static_cast<double>(cfg.n_paths);
  out.mean = sum / n;
  out.components.ordering /= n;
  out.components.variable /= n;
  out.components.holding /= n;
  out.components.backlog /= n;
  if (cfg.n_paths > 1) {
    const double var = (sumsq - sum * sum / n) / (n - 1.0);
    out.std_error = std::sqrt(std::max(var, 0.0) / n);
  }
  return out;
}

void append_result_csv(const std::string& path, const std::string& policy_id,
                       const CostEstimate& est, int64_t horizon, double wall_seconds) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream f(path, std::ios::app);
  if (!f) throw std::runtime_error("cannot open results csv: " + path);
  if (fresh)
    f << "# schema=1 policy,mean,std_error,ordering,variable,holding,backlog,paths,"
         "horizon,wall_seconds\n";
  f << policy_id << ',' << est.mean << ',' << est.std_error << ','
    << est.components.ordering << ',' << est.components.variable << ','
    << est.components.holding << ',' << est.components.backlog << ',' << est.n_paths
    << ',' << horizon << ',' << wall_seconds << '\n';
}

}  // namespace sjrp::sim
