#include "sjrp/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "sjrp/parallel.hpp"

namespace sjrp::mdp {

void TruncatedMdpSpec::validate() const {
  const int d = dim();
  if (d < 1 || d > 2)
    throw ConfigError("TruncatedMdpSpec: only d <= 2 is supported exactly");
  if (static_cast<int>(state_hi.size()) != d || static_cast<int>(action_hi.size()) != d ||
      model.dim() != d || params.dim() != d)
    throw ConfigError("TruncatedMdpSpec: dimension mismatch");
  for (int i = 0; i < d; ++i) {
    if (!(state_lo[i] < 0 && 0 <= action_hi[i] && action_hi[i] <= state_hi[i]))
      throw ConfigError("TruncatedMdpSpec: need state_lo < 0 <= action_hi <= state_hi");
  }
  model.validate();
  params.validate();
}

int64_t MdpSolution::num_states() const {
  int64_t n = 1;
  for (int i = 0; i < dim(); ++i) n *= extent(i);
  return n;
}

int64_t MdpSolution::state_index(const std::vector<int>& x) const {
  int64_t idx = 0;
  for (int i = 0; i < dim(); ++i) {
    if (x[i] < state_lo[i] || x[i] > state_hi[i])
      throw std::out_of_range("MdpSolution: state outside truncation box");
    idx = idx * extent(i) + (x[i] - state_lo[i]);
  }
  return idx;
}

double MdpSolution::value_at(const std::vector<int>& x) const {
  return value[state_index(x)];
}

std::vector<int> MdpSolution::order_up_to(const std::vector<int>& x) const {
  const int64_t idx = state_index(x);
  std::vector<int> z(dim());
  for (int i = 0; i < dim(); ++i) z[i] = policy[idx * dim() + i];
  return z;
}

namespace {

struct Grid {
  int d = 1;
  std::vector<int> lo, hi, ext;
  int64_t n = 1;

  explicit Grid(const TruncatedMdpSpec& spec)
      : d(spec.dim()), lo(spec.state_lo), hi(spec.state_hi) {
    ext.resize(d);
    for (int i = 0; i < d; ++i) {
      ext[i] = hi[i] - lo[i] + 1;
      n *= ext[i];
    }
  }
  int ext2() const { return d == 2 ? ext[1] : 1; }
};

// E[f_i(v - xi_i)] for every grid value v of item i (true pre-projection
// state; the sum runs over the full pmf support even below the floor).
Vec item_expected_f(const Vec& pmf, int lo, int hi, double h, double p) {
  Vec out(hi - lo + 1);
  for (int v = lo; v <= hi; ++v) {
    double s = 0.0;
    for (size_t k = 0; k < pmf.size(); ++k) {
      const double w = static_cast<double>(v) - static_cast<double>(k);
      s += pmf[k] * (w >= 0.0 ? h * w : -p * w);
    }
    out[v - lo] = s;
  }
  return out;
}

// One separable convolution pass with floor projection:
// out[t, .] = sum_k pmf[k] * in[max(t-k, 0), .] along the given axis.
void conv_axis(const Grid& g, int axis, const Vec& pmf, const Vec& suffix, const Vec& in,
               Vec& out) {
  if (axis == 0) {
    const int ext0 = g.ext[0];
    const int cols = g.ext2();
    parallel::parallel_for(ext0, [&](int64_t t0, int64_t t1) {
      for (int64_t t = t0; t < t1; ++t) {
        const int kmax = std::min<int64_t>(static_cast<int64_t>(pmf.size()) - 1, t);
        for (int c = 0; c < cols; ++c) {
          double s = 0.0;
          for (int k = 0; k <= kmax; ++k) s += pmf[k] * in[(t - k) * cols + c];
          if (kmax + 1 < static_cast<int>(pmf.size())) s += suffix[kmax + 1] * in[c];
          out[t * cols + c] = s;
        }
      }
    });
  } else {
    const int ext0 = g.ext[0];
    const int cols = g.ext2();
    parallel::parallel_for(ext0, [&](int64_t r0, int64_t r1) {
      for (int64_t row = r0; row < r1; ++row) {
        const double* src = in.data() + row * cols;
        double* dst = out.data() + row * cols;
        for (int t = 0; t < cols; ++t) {
          const int kmax = std::min<int>(static_cast<int>(pmf.size()) - 1, t);
          double s = 0.0;
          for (int k = 0; k <= kmax; ++k) s += pmf[k] * src[t - k];
          if (kmax + 1 < static_cast<int>(pmf.size())) s += suffix[kmax + 1] * src[0];
          dst[t] = s;
        }
      }
    });
  }
}

struct Tables {
  Grid grid;
  double gamma;
  std::vector<Vec> pmf, suffix;  // per item
  std::vector<Vec> ef;           // per item, over its grid values
  Vec ef_total;                  // E[f(s - xi)] on the full grid
  Vec scratch;                   // conv workspace

  explicit Tables(const TruncatedMdpSpec& spec)
      : grid(spec), gamma(weekly_discount(spec.params)) {
    const int d = grid.d;
    pmf.resize(d);
    suffix.resize(d);
    ef.resize(d);
    for (int i = 0; i < d; ++i) {
      pmf[i] = demand_pmf(spec.model, i, 1, spec.tail_mass);
      suffix[i].assign(pmf[i].size() + 1, 0.0);
      for (int k = static_cast<int>(pmf[i].size()) - 1; k >= 0; --k)
        suffix[i][k] = suffix[i][k + 1] + pmf[i][k];
      ef[i] = item_expected_f(pmf[i], grid.lo[i], grid.hi[i], spec.params.h[i],
                              spec.params.p[i]);
      for (auto& v : ef[i]) v *= kWeekFraction;
    }
    ef_total.resize(grid.n);
    if (d == 1) {
      ef_total = ef[0];
    } else {
      for (int a = 0; a < grid.ext[0]; ++a)
        for (int b = 0; b < grid.ext[1]; ++b)
          ef_total[static_cast<int64_t>(a) * grid.ext[1] + b] = ef[0][a] + ef[1][b];
    }
    scratch.resize(grid.n);
  }

  // conv(V)(s) = E[V(proj(s - xi))] for every grid point s.
  void conv_value(const Vec& v, Vec& out) {
    conv_axis(grid, 0, pmf[0], suffix[0], v, grid.d == 1 ? out : scratch);
    if (grid.d == 2) conv_axis(grid, 1, pmf[1], suffix[1], scratch, out);
  }
};

// Suffix minimum over the action box of m(z) = sum_i c_i z_i + w(z), together
// with the argmin, so best_order(x) = c0 - c.x + smin(max(x,0)).
struct SuffixMin {
  std::vector<int> alo, aext;  // action box [0, action_hi] in grid coordinates
  Vec smin;
  std::vector<int32_t> argmin;  // d entries per action cell

  void build(const Tables& tb, const TruncatedMdpSpec& spec, const Vec& w) {
    const Grid& g = tb.grid;
    const int d = g.d;
    alo.assign(d, 0);
    aext.resize(d);
    for (int i = 0; i < d; ++i) {
      alo[i] = -g.lo[i];  // grid index of z_i = 0
      aext[i] = spec.action_hi[i] + 1;
    }
    const int64_t an = d == 1 ? aext[0] : static_cast<int64_t>(aext[0]) * aext[1];
    smin.assign(an, 0.0);
    argmin.assign(an * d, 0);
    if (d == 1) {
      for (int a = aext[0] - 1; a >= 0; --a) {
        const int z = a;  // z value equals index since z starts at 0
        const double m = spec.params.c[0] * z + w[alo[0] + a];
        if (a == aext[0] - 1 || m <= smin[a + 1]) {
          smin[a] = m;
          argmin[a] = z;
        } else {
          smin[a] = smin[a + 1];
          argmin[a] = argmin[a + 1];
        }
      }
    } else {
      const int e1 = aext[0], e2 = aext[1];
      for (int a = e1 - 1; a >= 0; --a) {
        for (int b = e2 - 1; b >= 0; --b) {
          const double m =
              spec.params.c[0] * a + spec.params.c[1] * b +
              w[static_cast<int64_t>(alo[0] + a) * g.ext[1] + (alo[1] + b)];
          double best = m;
          int64_t from = -1;
          if (a + 1 < e1 && smin[static_cast<int64_t>(a + 1) * e2 + b] < best) {
            best = smin[static_cast<int64_t>(a + 1) * e2 + b];
            from = static_cast<int64_t>(a + 1) * e2 + b;
          }
          if (b + 1 < e2 && smin[static_cast<int64_t>(a) * e2 + b + 1] < best) {
            best = smin[static_cast<int64_t>(a) * e2 + b + 1];
            from = static_cast<int64_t>(a) * e2 + b + 1;
          }
          const int64_t here = static_cast<int64_t>(a) * e2 + b;
          smin[here] = best;
          if (from < 0) {
            argmin[here * 2] = a;
            argmin[here * 2 + 1] = b;
          } else {
            argmin[here * 2] = argmin[from * 2];
            argmin[here * 2 + 1] = argmin[from * 2 + 1];
          }
        }
      }
    }
  }

  // Returns the order value c0 - c.x + smin and the argmin z for state x, or
  // +inf when x exceeds the action box.
  double order_value(const TruncatedMdpSpec& spec, const Grid& g,
                     const std::vector<int>& x, std::vector<int>& z) const {
    int64_t cell = 0;
    for (int i = 0; i < g.d; ++i) {
      const int a = std::max(x[i], 0);
      if (a > spec.action_hi[i]) return std::numeric_limits<double>::infinity();
      cell = cell * aext[i] + a;
    }
    double cx = 0.0;
    for (int i = 0; i < g.d; ++i) cx += spec.params.c[i] * x[i];
    for (int i = 0; i < g.d; ++i) z[i] = argmin[cell * g.d + i];
    return spec.params.c0 - cx + smin[cell];
  }
};

void state_from_flat(const Grid& g, int64_t idx, std::vector<int>& x) {
  if (g.d == 1) {
    x[0] = g.lo[0] + static_cast<int>(idx);
  } else {
    x[0] = g.lo[0] + static_cast<int>(idx / g.ext[1]);
    x[1] = g.lo[1] + static_cast<int>(idx % g.ext[1]);
  }
}

}  // namespace

MdpSolution policy_iteration(const TruncatedMdpSpec& spec) {
  spec.validate();
  Tables tb(spec);
  const Grid& g = tb.grid;
  const double gamma = tb.gamma;
  const int d = g.d;

  MdpSolution sol;
  sol.state_lo = spec.state_lo;
  sol.state_hi = spec.state_hi;
  sol.value.assign(g.n, 0.0);
  sol.policy.assign(g.n * d, 0);

  Vec w(g.n), convv(g.n), vnew(g.n), cost_pi(g.n);
  std::vector<int64_t> next_idx(g.n);  // flat index of pi(x) for evaluation
  SuffixMin sm;

  const int max_pi_iters = 100;
  bool policy_stable = false;
  for (int it = 1; it <= max_pi_iters; ++it) {
    sol.iterations = it;
    // ---- improvement: w(s) = E f(s-xi) + gamma E V(proj(s-xi)) ----
    tb.conv_value(sol.value, convv);
    for (int64_t s = 0; s < g.n; ++s) w[s] = tb.ef_total[s] + gamma * convv[s];
    sm.build(tb, spec, w);

    bool changed = false;
    std::vector<int> x(d), z(d);
    for (int64_t s = 0; s < g.n; ++s) {
      state_from_flat(g, s, x);
      const double stay = w[s];
      const double order = sm.order_value(spec, g, x, z);
      // Ties go to not ordering.
      const bool buy = order < stay;
      for (int i = 0; i < d; ++i) {
        const int zi = buy ? z[i] : x[i];
        if (sol.policy[s * d + i] != zi) changed = true;
        sol.policy[s * d + i] = zi;
      }
    }
    if (!changed && it > 1) {
      policy_stable = true;
      break;
    }

    // ---- evaluation ----
    // Cost and successor tables for the fixed policy.
    std::vector<int> xx(d), zz(d);
    for (int64_t s = 0; s < g.n; ++s) {
      state_from_flat(g, s, xx);
      bool any = false;
      double cz = 0.0;
      int64_t zidx = 0;
      double ef = 0.0;
      for (int i = 0; i < d; ++i) {
        zz[i] = sol.policy[s * d + i];
        const double y = zz[i] - xx[i];
        if (y > 0) any = true;
        cz += spec.params.c[i] * y;
        zidx = zidx * g.ext[i] + (zz[i] - g.lo[i]);
        ef += tb.ef[i][zz[i] - g.lo[i]];
      }
      cost_pi[s] = (any ? spec.params.c0 + cz : 0.0) + ef;
      next_idx[s] = zidx;
    }
    // Fixed-point sweeps with MacQueen span bounds.
    const int max_sweeps = 500000;
    double vinf = 0.0;
    for (double v : sol.value) vinf = std::max(vinf, std::abs(v));
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
      tb.conv_value(sol.value, convv);
      double dmin = std::numeric_limits<double>::infinity();
      double dmax = -dmin;
      for (int64_t s = 0; s < g.n; ++s) {
        vnew[s] = cost_pi[s] + gamma * convv[next_idx[s]];
        const double delta = vnew[s] - sol.value[s];
        dmin = std::min(dmin, delta);
        dmax = std::max(dmax, delta);
      }
      sol.value.swap(vnew);
      vinf = 0.0;
      for (double v : sol.value) vinf = std::max(vinf, std::abs(v));
      const double half_width = 0.5 * gamma / (1.0 - gamma) * (dmax - dmin);
      if (half_width <= 2.5e-10 * (1.0 + vinf)) {
        const double shift = 0.5 * gamma / (1.0 - gamma) * (dmax + dmin);
        for (auto& v : sol.value) v += shift;
        break;
      }
      if (sweep == max_sweeps - 1)
        throw NumericError("policy evaluation did not converge");
    }
  }

  sol.residual = bellman_residual(sol, spec);
  double vinf = 0.0;
  for (double v : sol.value) vinf = std::max(vinf, std::abs(v));
  if (!policy_stable || sol.residual > 1e-8 * (1.0 + vinf))
    throw NumericError("policy iteration did not converge; residual " +
                       std::to_string(sol.residual));
  return sol;
}

double bellman_residual(const MdpSolution& sol, const TruncatedMdpSpec& spec) {
  Tables tb(spec);
  const Grid& g = tb.grid;
  const double gamma = tb.gamma;
  Vec w(g.n), convv(g.n);
  tb.conv_value(sol.value, convv);
  for (int64_t s = 0; s < g.n; ++s) w[s] = tb.ef_total[s] + gamma * convv[s];
  SuffixMin sm;
  sm.build(tb, spec, w);
  double resid = 0.0;
  std::vector<int> x(g.d), z(g.d);
  for (int64_t s = 0; s < g.n; ++s) {
    state_from_flat(g, s, x);
    const double best = std::min(w[s], sm.order_value(spec, g, x, z));
    resid = std::max(resid, std::abs(sol.value[s] - best));
  }
  return resid;
}

namespace {
constexpr char kMdpMagic[8] = {'S', 'J', 'R', 'P', 'M', 'D', 'P', '1'};
}

void save_solution(const std::string& path, const MdpSolution& sol) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write mdp solution: " + path);
  f.write(kMdpMagic, 8);
  const int32_t d = sol.dim();
  f.write(reinterpret_cast<const char*>(&d), 4);
  for (int i = 0; i < d; ++i) {
    const int32_t lo = sol.state_lo[i], hi = sol.state_hi[i];
    f.write(reinterpret_cast<const char*>(&lo), 4);
    f.write(reinterpret_cast<const char*>(&hi), 4);
  }
  f.write(reinterpret_cast<const char*>(sol.value.data()), sol.value.size() * 8);
  f.write(reinterpret_cast<const char*>(sol.policy.data()), sol.policy.size() * 4);
  f.write(reinterpret_cast<const char*>(&sol.residual), 8);
}

MdpSolution load_solution(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open mdp solution: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMdpMagic, 8) != 0)
    throw std::runtime_error("bad mdp solution file: " + path);
  int32_t d = 0;
  f.read(reinterpret_cast<char*>(&d), 4);
  MdpSolution sol;
  sol.state_lo.resize(d);
  sol.state_hi.resize(d);
  for (int i = 0; i < d; ++i) {
    int32_t lo, hi;
    f.read(reinterpret_cast<char*>(&lo), 4);
    f.read(reinterpret_cast<char*>(&hi), 4);
    sol.state_lo[i] = lo;
    sol.state_hi[i] = hi;
  }
  sol.value.resize(sol.num_states());
  sol.policy.resize(sol.num_states() * d);
  f.read(reinterpret_cast<char*>(sol.value.data()), sol.value.size() * 8);
  f.read(reinterpret_cast<char*>(sol.policy.data()), sol.policy.size() * 4);
  f.read(reinterpret_cast<char*>(&sol.residual), 8);
  if (!f) throw std::runtime_error("truncated mdp solution: " + path);
  return sol;
}

void write_policy_csv(const std::string& path, const MdpSolution& sol) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write policy csv: " + path);
  f << "# schema=1 state components, order components\n";
  const int d = sol.dim();
  std::vector<int> x(d);
  for (int64_t s = 0; s < sol.num_states(); ++s) {
    int64_t rem = s;
    for (int i = d - 1; i >= 0; --i) {
      x[i] = sol.state_lo[i] + static_cast<int>(rem % sol.extent(i));
      rem /= sol.extent(i);
    }
    for (int i = 0; i < d; ++i) f << x[i] << ',';
    for (int i = 0; i < d; ++i) {
      f << (sol.policy[s * d + i] - x[i]);
      f << (i + 1 < d ? ',' : '\n');
    }
  }
}

}  // namespace sjrp::mdp
