#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sjrp/core.hpp"

namespace sjrp::mdp {

/// Truncated discrete MDP: states x with state_lo <= x <= state_hi per item,
/// order-up-to actions z with x <= z and 0 <= z <= action_hi.  Demand
/// transitions that would fall below state_lo are projected onto state_lo,
/// with the period cost still charged at the true pre-projection state.
struct TruncatedMdpSpec {
  std::vector<int> state_lo;
  std::vector<int> state_hi;
  std::vector<int> action_hi;
  DemandModel model;
  CostParams params;
  double tail_mass = kPmfTailMass;

  int dim() const { return static_cast<int>(state_lo.size()); }
  void validate() const;
};

struct MdpSolution {
  std::vector<int> state_lo, state_hi;
  Vec value;                    // flat, row-major over state grid
  std::vector<int32_t> policy;  // order-up-to z per state, d entries per state
  double residual = 0.0;
  int iterations = 0;

  int dim() const { return static_cast<int>(state_lo.size()); }
  int extent(int i) const { return state_hi[i] - state_lo[i] + 1; }
  int64_t num_states() const;
  int64_t state_index(const std::vector<int>& x) const;

  double value_at(const std::vector<int>& x) const;
  /// Order-up-to vector at x; equal to x when no order is placed.
  std::vector<int> order_up_to(const std::vector<int>& x) const;
};

/// Exact optimal value/policy of the truncated MDP in order-up-to form,
/// by policy iteration with a shared continuation table over candidate z.
MdpSolution policy_iteration(const TruncatedMdpSpec& spec);

/// max_x |V(x) - min_z {c(z-x) + E[f(z-xi)] + gamma E[V(z-xi)]}|.
double bellman_residual(const MdpSolution& sol, const TruncatedMdpSpec& spec);

/// Flat binary layout: magic, dims header, then row-major values and policy.
void save_solution(const std::string& path, const MdpSolution& sol);
MdpSolution load_solution(const std::string& path);
/// CSV rows "x1,x2,order1,order2" (zeros where no order) for region plots.
void write_policy_csv(const std::string& path, const MdpSolution& sol);

// ---------------------------------------------------------------------------
// 1-D impulse-control quasi-variational inequality on a grid.
// ---------------------------------------------------------------------------

struct QviGrid {
  double x_lo = -3.0;
  double x_hi = 6.0;
  int n_points = 1801;
};

struct QviSolution {
  Vec x;       // grid points
  Vec value;   // V at grid points
  std::vector<int32_t> target;  // order-up-to grid index; target[i]==i: no action
  int iterations = 0;
  double final_change = 0.0;
  /// Largest pointwise increase seen across obstacle updates (the iterates
  /// should only decrease from the no-intervention solution).
  double max_pointwise_increase = 0.0;

  double value_at(double xq) const;     // linear interpolation
  double gradient_at(double xq) const;  // central differences on the grid
  /// Largest grid x where an order is placed (the reorder threshold), or
  /// -inf when the policy never orders.
  double reorder_threshold() const;
};

/// Upwind finite-difference solve of
///   max( -0.5 sigma^2 V'' + mu V' + r V - f,  V - min_{y>=0} [V(x+y)+c(y)] ) = 0
/// by policy iteration on the grid.  Throws NumericError when the order
/// region touches the top of the grid (grid too small).
QviSolution solve_1d_qvi(const CostParams& params, const DiffusionParams& diff,
                         const QviGrid& grid);

}  // namespace sjrp::mdp
