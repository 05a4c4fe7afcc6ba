#include <cstdio>
#include <cstdlib>
#include <algorithm>
#include <cmath>
#include <limits>

#include "sjrp/mdp.hpp"

namespace sjrp::mdp {

namespace {

// Thomas solve for a strictly diagonally dominant tridiagonal system.
void tridiag_solve(const Vec& lo, const Vec& di, const Vec& up, const Vec& rhs, Vec& x,
                   Vec& cp, Vec& dp) {
  const size_t n = di.size();
  cp.resize(n);
  dp.resize(n);
  cp[0] = up[0] / di[0];
  dp[0] = rhs[0] / di[0];
  for (size_t i = 1; i < n; ++i) {
    const double m = di[i] - lo[i] * cp[i - 1];
    cp[i] = up[i] / m;
    dp[i] = (rhs[i] - lo[i] * dp[i - 1]) / m;
  }
  x.resize(n);
  x[n - 1] = dp[n - 1];
  for (size_t i = n - 1; i-- > 0;) x[i] = dp[i] - cp[i] * x[i + 1];
}

}  // namespace

double QviSolution::value_at(double xq) const {
  const double dx = x[1] - x[0];
  if (xq <= x.front()) return value.front();
  if (xq >= x.back()) return value.back();
  const double t = (xq - x.front()) / dx;
  const int i = std::min<int>(static_cast<int>(t), static_cast<int>(x.size()) - 2);
  const double w = t - i;
  return (1.0 - w) * value[i] + w * value[i + 1];
}

double QviSolution::gradient_at(double xq) const {
  const double dx = x[1] - x[0];
  const int n = static_cast<int>(x.size());
  auto node_grad = [&](int i) {
    if (i <= 0) return (value[1] - value[0]) / dx;
    if (i >= n - 1) return (value[n - 1] - value[n - 2]) / dx;
    return (value[i + 1] - value[i - 1]) / (2.0 * dx);
  };
  if (xq <= x.front()) return node_grad(0);
  if (xq >= x.back()) return node_grad(n - 1);
  const double t = (xq - x.front()) / dx;
  const int i = std::min<int>(static_cast<int>(t), n - 2);
  const double w = t - i;
  return (1.0 - w) * node_grad(i) + w * node_grad(i + 1);
}

double QviSolution::reorder_threshold() const {
  double thr = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < target.size(); ++i)
    if (target[i] != static_cast<int32_t>(i)) thr = std::max(thr, x[i]);
  return thr;
}

QviSolution solve_1d_qvi(const CostParams& params, const DiffusionParams& diff,
                         const QviGrid& grid) {
  if (params.dim() != 1 || diff.dim() != 1)
    throw ConfigError("solve_1d_qvi: one-dimensional problems only");
  if (grid.n_points < 16 || !(grid.x_hi > grid.x_lo))
    throw ConfigError("solve_1d_qvi: bad grid");
  params.validate();
  if (!(params.c0 > 0.0))
    throw ConfigError("solve_1d_qvi: c0 must be positive (impulse fixed cost)");

  const int n = grid.n_points;
  const double dx = (grid.x_hi - grid.x_lo) / (n - 1);
  const double mu = diff.mu[0];
  const double s2 = diff.sigma_sq_diag[0];
  const double r = params.annual_rate;
  const double h = params.h[0], p = params.p[0], c = params.c[0], c0 = params.c0;
  if (!(mu > 0.0)) throw ConfigError("solve_1d_qvi: drift must be positive");

  QviSolution sol;
  sol.x.resize(n);
  for (int i = 0; i < n; ++i) sol.x[i] = grid.x_lo + i * dx;
  Vec f(n);
  for (int i = 0; i < n; ++i)
    f[i] = sol.x[i] >= 0.0 ? h * sol.x[i] : -p * sol.x[i];

  // Upwind no-action rows (drift term mu V' uses a backward difference).
  const double lo_c = -0.5 * s2 / (dx * dx) - mu / dx;
  const double di_c = s2 / (dx * dx) + mu / dx + r;
  const double up_c = -0.5 * s2 / (dx * dx);
  // Deep-backlog asymptote used as the bottom Dirichlet row.
  const double v_bottom = -p * grid.x_lo / r + mu * p / (r * r);

  // Row coefficients for a no-action row i.
  auto row_coeff = [&](int i, double& l, double& d_, double& u) {
    if (i == 0) {
      l = 0.0;
      d_ = 1.0;
      u = 0.0;
    } else if (i == n - 1) {
      l = -mu / dx;
      d_ = mu / dx + r;
      u = 0.0;
    } else {
      l = lo_c;
      d_ = di_c;
      u = up_c;
    }
  };
  auto row_rhs = [&](int i) { return i == 0 ? v_bottom : f[i]; };

  // Initial value: no intervention anywhere.
  Vec tl(n), td(n), tu(n), rhs(n), cp, dp;
  for (int i = 0; i < n; ++i) {
    row_coeff(i, tl[i], td[i], tu[i]);
    rhs[i] = row_rhs(i);
  }
  tridiag_solve(tl, td, tu, rhs, sol.value, cp, dp);
  sol.target.assign(n, 0);
  for (int i = 0; i < n; ++i) sol.target[i] = i;

  // Iterated optimal stopping: freeze the intervention obstacle computed from
  // the current iterate, solve that stopping problem exactly by policy
  // iteration (obstacle rows are Dirichlet), then refresh the obstacle.  The
  // iterates decrease monotonically from the no-intervention solution.
  Vec w(n), psi(n), vnew(n);
  std::vector<int32_t> mj(n);
  std::vector<char> stopped(n, 0), stopped_new(n, 0);
  Vec tl2(n), td2(n), tu2(n), rhs2(n), cps, dps;
  const int max_outer = 5000;
  for (int outer = 1; outer <= max_outer; ++outer) {
    sol.iterations = outer;
    // Obstacle psi_i = min_{j >= i} (V_j + c x_j) + c0 - c x_i, smallest j on
    // ties.
    int best = n - 1;
    for (int i = 0; i < n; ++i) w[i] = sol.value[i] + c * sol.x[i];
    for (int i = n - 1; i >= 0; --i) {
      if (i == n - 1 || w[i] <= w[best]) best = i;
      mj[i] = best;
      psi[i] = w[best] + c0 - c * sol.x[i];
    }
    // Homogeneous tolerance scale so that scaling all costs by kappa scales
    // every iterate (and the stopping decisions) exactly.
    double scale = std::abs(sol.value[0]);
    if (scale == 0.0) scale = 1.0;

    // Inner stopping solve with the frozen obstacle.  Row assignment follows
    // the max-form Howard rule: clamp to the obstacle wherever the obstacle
    // residual V - psi exceeds the operator residual (L+r)V - f.
    Vec vcur = sol.value;
    auto assign = [&](const Vec& v, std::vector<char>& out) {
      for (int i = 0; i < n; ++i) {
        double l, d_, u;
        row_coeff(i, l, d_, u);
        double r1 = d_ * v[i] - (i == 0 ? v_bottom : f[i]);
        if (i > 0) r1 += l * v[i - 1];
        if (i < n - 1) r1 += u * v[i + 1];
        const double r2 = v[i] - psi[i];
        out[i] = i < n - 1 && r2 > r1;
      }
    };
    assign(vcur, stopped);
    for (int inner = 0; inner < 400; ++inner) {
      for (int i = 0; i < n; ++i) {
        if (stopped[i]) {
          tl2[i] = 0.0;
          td2[i] = 1.0;
          tu2[i] = 0.0;
          rhs2[i] = psi[i];
        } else {
          row_coeff(i, tl2[i], td2[i], tu2[i]);
          rhs2[i] = row_rhs(i);
        }
      }
      tridiag_solve(tl2, td2, tu2, rhs2, vnew, cps, dps);
      assign(vnew, stopped_new);
      bool stable = true;
      for (int i = 0; i < n; ++i)
        if (stopped_new[i] != stopped[i]) stable = false;
      vcur = vnew;
      stopped.swap(stopped_new);
      if (stable) break;
    }

    double change = 0.0;
    for (int i = 0; i < n; ++i) {
      change = std::max(change, std::abs(vcur[i] - sol.value[i]));
      sol.max_pointwise_increase =
          std::max(sol.max_pointwise_increase, vcur[i] - sol.value[i]);
    }
    sol.value = vcur;
    sol.final_change = change;
    for (int i = 0; i < n; ++i) sol.target[i] = stopped[i] ? mj[i] : i;
    if (std::getenv("SJRP_QVI_TRACE")) {
      int act = 0;
      for (int i = 0; i < n; ++i) act += sol.target[i] != i;
      std::fprintf(stderr, "qvi outer=%d change=%.3e act=%d v0=%.4f argmin_x=%.3f\n",
                   outer, change, act, sol.value[std::min<int>(n - 1, static_cast<int>((0.0 - sol.x[0]) / dx))],
                   sol.x[mj[0]]);
    }
    if (change <= 1e-9 * scale) {
      // Boundary-layer check on the converged policy: an order region that
      // reaches the top cells means the order-up-to point escaped the grid.
      for (int i = 0; i < n; ++i)
        if (sol.target[i] != i && (sol.target[i] >= n - 2 || i >= n - 2))
          throw NumericError(
              "solve_1d_qvi: order region touches the grid top; widen grid");
      return sol;
    }
  }
  throw NumericError("solve_1d_qvi: did not converge after 5000 obstacle updates");
}

}  // namespace sjrp::mdp
