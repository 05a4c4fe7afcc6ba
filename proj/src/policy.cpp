#include "sjrp/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>

namespace sjrp::policy {

MlpValueModel::MlpValueModel(std::shared_ptr<const nn::Mlp> h,
                             std::shared_ptr<const nn::Mlp> g)
    : h_(std::move(h)), g_(std::move(g)) {
  if (h_->output_dim() != 1 || g_->output_dim() != g_->input_dim() ||
      h_->input_dim() != g_->input_dim())
    throw ConfigError("MlpValueModel: H must be scalar and G must map R^d -> R^d");
}

void ExtractionConfig::validate(int d) const {
  if (static_cast<int>(bounds_lo.size()) != d ||
      static_cast<int>(bounds_hi.size()) != d || static_cast<int>(start.size()) != d)
    throw ConfigError("ExtractionConfig: bounds/start dimension mismatch");
  for (int i = 0; i < d; ++i)
    if (!(bounds_lo[i] <= start[i] && start[i] <= bounds_hi[i]))
      throw ConfigError("ExtractionConfig: start must lie inside the bounds");
  if (!std::isfinite(epsilon_threshold))
    throw ConfigError("ExtractionConfig: epsilon must be finite");
  if (restarts < 1) throw ConfigError("ExtractionConfig: need at least one start");
}

double no_action_value(const ValueModel& m, const Vec& x, const CostParams& params,
                       const DiffusionParams& diff) {
  const int d = m.dim();
  const double h = m.value(x);
  const Vec g = m.gradient(x);
  const nn::Matrix jac = m.gradient_jacobian(x);
  double out = params.annual_rate * h - holding_backlog_cost(x, params);
  for (int i = 0; i < d; ++i) {
    out += diff.mu[i] * g[i];
    out -= 0.5 * diff.sigma_sq_diag[i] * jac.at(i, i);
  }
  if (!std::isfinite(out)) throw NumericError("no_action_value: non-finite output");
  return out;
}

BoxResult minimize_box(const std::function<double(const Vec&, Vec&)>& fg,
                       const Vec& lo, const Vec& hi, const Vec& x0, double tol,
                       int max_iterations) {
  const int d = static_cast<int>(x0.size());
  auto project = [&](Vec& v) {
    for (int i = 0; i < d; ++i) v[i] = std::clamp(v[i], lo[i], hi[i]);
  };
  BoxResult res;
  res.x = x0;
  project(res.x);
  Vec g(d);
  res.f = fg(res.x, g);

  // L-BFGS memory.
  constexpr int kMem = 8;
  std::deque<Vec> s_hist, y_hist;
  std::deque<double> rho;

  auto projected_gradient = [&](const Vec& x, const Vec& grad) {
    Vec pg(d);
    for (int i = 0; i < d; ++i) {
      if (x[i] <= lo[i] + 1e-14 && grad[i] > 0.0)
        pg[i] = 0.0;
      else if (x[i] >= hi[i] - 1e-14 && grad[i] < 0.0)
        pg[i] = 0.0;
      else
        pg[i] = grad[i];
    }
    return pg;
  };

  for (int it = 0; it < max_iterations; ++it) {
    res.iterations = it;
    Vec pg = projected_gradient(res.x, g);
    double pgn = 0.0;
    for (double v : pg) pgn = std::max(pgn, std::abs(v));
    res.projected_gradient_norm = pgn;
    if (pgn <= tol) break;

    // Two-loop recursion on the full-space gradient, then project the step.
    Vec dir = g;
    {
      std::vector<double> alpha(s_hist.size());
      for (int k = static_cast<int>(s_hist.size()) - 1; k >= 0; --k) {
        alpha[k] = rho[k] * vec::dot(s_hist[k], dir);
        for (int i = 0; i < d; ++i) dir[i] -= alpha[k] * y_hist[k][i];
      }
      if (!s_hist.empty()) {
        const double gamma =
            vec::dot(s_hist.back(), y_hist.back()) / vec::dot(y_hist.back(), y_hist.back());
        for (auto& v : dir) v *= gamma;
      }
      for (size_t k = 0; k < s_hist.size(); ++k) {
        const double beta = rho[k] * vec::dot(y_hist[k], dir);
        for (int i = 0; i < d; ++i) dir[i] += s_hist[k][i] * (alpha[k] - beta);
      }
      for (auto& v : dir) v = -v;
    }
    // Descent fallback.
    if (vec::dot(dir, g) > -1e-16) {
      for (int i = 0; i < d; ++i) dir[i] = -g[i];
      s_hist.clear();
      y_hist.clear();
      rho.clear();
    }

    double step = 1.0;
    Vec xn(d), gn(d);
    double fn = 0.0;
    bool moved = false;
    for (int ls = 0; ls < 40; ++ls) {
      for (int i = 0; i < d; ++i) xn[i] = res.x[i] + step * dir[i];
      project(xn);
      fn = fg(xn, gn);
      // Armijo on the projected step.
      double decrease = 0.0;
      for (int i = 0; i < d; ++i) decrease += g[i] * (xn[i] - res.x[i]);
      if (fn <= res.f + 1e-4 * decrease && decrease < 0.0) {
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;  // no further progress at line-search resolution

    Vec s(d), y(d);
    for (int i = 0; i < d; ++i) {
      s[i] = xn[i] - res.x[i];
      y[i] = gn[i] - g[i];
    }
    const double sy = vec::dot(s, y);
    if (sy > 1e-12 * vec::dot(y, y)) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > kMem) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho.pop_front();
      }
    }
    res.x = xn;
    res.f = fn;
    g = gn;
  }

  for (int i = 0; i < d; ++i) {
    if ((res.x[i] <= lo[i] + 1e-12 && g[i] > 10.0 * tol) ||
        (res.x[i] >= hi[i] - 1e-12 && g[i] < -10.0 * tol))
      res.at_bound_outward = true;
  }
  return res;
}

OrderUpToResult compute_order_up_to(const ValueModel& m, const CostParams& params,
                                    const ExtractionConfig& cfg) {
  const int d = m.dim();
  cfg.validate(d);
  std::function<double(const Vec&, Vec&)> fg;
  if (cfg.method == ExtractionMethod::minimize_value) {
    // H(z) + c0 + c.z with the gradient taken from G (plus the constant c).
    fg = [&](const Vec& z, Vec& grad) {
      grad = m.gradient(z);
      for (int i = 0; i < d; ++i) grad[i] += params.c[i];
      return m.value(z) + params.c0 + vec::dot(params.c, z);
    };
  } else {
    // 0.5 |G(z) + c|^2 with gradient J_G(z)^T (G(z) + c).
    fg = [&](const Vec& z, Vec& grad) {
      Vec r = m.gradient(z);
      for (int i = 0; i < d; ++i) r[i] += params.c[i];
      const nn::Matrix jac = m.gradient_jacobian(z);
      grad.assign(d, 0.0);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) grad[j] += jac.at(i, j) * r[i];
      return 0.5 * vec::dot(r, r);
    };
  }

  OrderUpToResult best;
  bool have = false;
  RandomStream jitter = RandomStream::from_key(cfg.jitter_seed, 0x2A11);
  for (int attempt = 0; attempt < cfg.restarts; ++attempt) {
    Vec x0 = cfg.start;
    if (attempt > 0)
      for (int i = 0; i < d; ++i)
        x0[i] = cfg.bounds_lo[i] +
                jitter.uniform() * (cfg.bounds_hi[i] - cfg.bounds_lo[i]);
    const BoxResult r = minimize_box(fg, cfg.bounds_lo, cfg.bounds_hi, x0,
                                     cfg.gradient_tol, cfg.max_iterations);
    if (!have || r.f < best.objective) {
      best.z = r.x;
      best.objective = r.f;
      best.boundary_warning = r.at_bound_outward;
      have = true;
    }
  }
  return best;
}

Vec nn_policy_decide(const ValueModel& m, const Vec& x, const Vec& z_star,
                     double epsilon, const CostParams& params,
                     const DiffusionParams& diff) {
  Vec y(x.size(), 0.0);
  if (no_action_value(m, x, params, diff) <= epsilon) {
    for (size_t i = 0; i < x.size(); ++i) y[i] = std::max(z_star[i] - x[i], 0.0);
  }
  return y;
}

NnPolicy::NnPolicy(std::shared_ptr<const nn::Mlp> h, std::shared_ptr<const nn::Mlp> g,
                   Vec z_star, double epsilon, CostParams scaled_params,
                   DiffusionParams diff)
    : model_(std::move(h), std::move(g)),
      z_star_(std::move(z_star)),
      epsilon_(epsilon),
      params_(std::move(scaled_params)),
      diff_(std::move(diff)) {}

Vec NnPolicy::decide(const InventoryState& x, const sim::Observation&) {
  // States in the discrete simulation are integer vectors; memoize on them.
  std::string key(x.size() * sizeof(int64_t), '\0');
  bool integral = true;
  for (size_t i = 0; i < x.size(); ++i) {
    const int64_t v = static_cast<int64_t>(std::llround(x[i]));
    if (std::abs(x[i] - static_cast<double>(v)) > 1e-9) integral = false;
    std::memcpy(key.data() + i * sizeof(int64_t), &v, sizeof(int64_t));
  }
  if (integral) {
    const auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  Vec y = nn_policy_decide(model_, x, z_star_, epsilon_, params_, diff_);
  if (integral) cache_.emplace(std::move(key), y);
  return y;
}

std::unique_ptr<sim::Policy> NnPolicy::clone() const {
  auto copy = std::make_unique<NnPolicy>(*this);
  copy->cache_.clear();
  return copy;
}

void write_region_csv(const std::string& path, const ValueModel& m, const Vec& z_star,
                      double epsilon, const CostParams& params,
                      const DiffusionParams& diff, const std::vector<int>& lo,
                      const std::vector<int>& hi) {
  if (m.dim() != 2) throw ConfigError("write_region_csv: d = 2 only");
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write region csv: " + path);
  f << "# schema=1 state components, order components\n";
  for (int a = lo[0]; a <= hi[0]; ++a) {
    for (int b = lo[1]; b <= hi[1]; ++b) {
      const Vec x = {static_cast<double>(a), static_cast<double>(b)};
      const Vec y = nn_policy_decide(m, x, z_star, epsilon, params, diff);
      f << a << ',' << b << ',' << y[0] << ',' << y[1] << '\n';
    }
  }
}

}  // namespace sjrp::policy
