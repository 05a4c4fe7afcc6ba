#include "sjrp/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <chrono>
#include <filesystem>
#include <fstream>

#include "sjrp/parallel.hpp"

namespace sjrp::bsde {

void ReferencePolicy::validate() const {
  if (!(lambda > 0.0)) throw ConfigError("reference policy: lambda must be positive");
  if (nu < 0.0) throw ConfigError("reference policy: nu must be nonnegative");
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw ConfigError("reference policy: alpha must lie in [0,1)");
  if (order_up_to_mean.empty()) throw ConfigError("reference policy: empty E[Z]");
  for (double s : order_up_to_mean)
    if (!(s > 0.0)) throw ConfigError("reference policy: E[Z] must be positive");
}

void ReferencePolicy::lognormal_params(int item, double& mu_log, double& sigma_log) const {
  // Mean m, sd nu*m: sigma^2 = ln(1+nu^2), mu = ln m - sigma^2/2.
  const double m = order_up_to_mean[item];
  const double s2 = std::log1p(nu * nu);
  sigma_log = std::sqrt(s2);
  mu_log = std::log(m) - 0.5 * s2;
}

PathBundle euler_maruyama(const ReferencePolicy& policy, const DiffusionParams& diff,
                          double horizon, int n_steps, const Vec& x0,
                          RandomStream& rng) {
  policy.validate();
  const int d = diff.dim();
  if (static_cast<int>(x0.size()) != d || static_cast<int>(policy.order_up_to_mean.size()) != d)
    throw std::invalid_argument("euler_maruyama: dimension mismatch");
  if (n_steps < 1 || !(horizon > 0.0)) throw ConfigError("euler_maruyama: bad horizon");
  const double dt = horizon / n_steps;
  const double p_order = policy.lambda * dt;
  if (p_order > 1.0)
    throw ConfigError("euler_maruyama: lambda*dt > 1 breaks Bernoulli thinning");

  PathBundle b;
  b.n_steps = n_steps;
  b.dim = d;
  b.dt = dt;
  b.states.resize(static_cast<size_t>(n_steps + 1) * d);
  b.brownian.resize(static_cast<size_t>(n_steps) * d);
  b.orders.assign(static_cast<size_t>(n_steps) * d, 0.0);
  std::copy(x0.begin(), x0.end(), b.states.begin());

  const double sqrt_dt = std::sqrt(dt);
  Vec mu_log(d), sg_log(d);
  for (int i = 0; i < d; ++i) policy.lognormal_params(i, mu_log[i], sg_log[i]);

  for (int n = 0; n < n_steps; ++n) {
    double* x = b.state(n);
    double* xn = b.state(n + 1);
    double* db = b.brownian.data() + static_cast<size_t>(n) * d;
    double* du = b.orders.data() + static_cast<size_t>(n) * d;
    for (int i = 0; i < d; ++i) db[i] = sqrt_dt * rng.normal();
    const bool fire = rng.uniform() < p_order;
    if (fire) {
      for (int i = 0; i < d; ++i) {
        const double z = rng.lognormal(mu_log[i], sg_log[i]);
        double floor = 0.0;
        if (policy.alpha > 0.0)
          floor = rng.exponential(policy.alpha * diff.mu[i] / policy.lambda);
        du[i] = std::max(z - x[i], floor);
        if (du[i] < 0.0) du[i] = 0.0;  // alpha = 0 and z below the state
      }
    }
    for (int i = 0; i < d; ++i)
      xn[i] = x[i] - diff.mu[i] * dt - diff.sigma_diag[i] * db[i] + du[i];
  }
  return b;
}

namespace {

// Discounted f- and c-sums along one path under the (scaled) costs.
void path_cost_sums(const PathBundle& b, const CostParams& params, const Vec& disc,
                    double& f_sum, double& c_sum) {
  f_sum = 0.0;
  c_sum = 0.0;
  const int d = b.dim;
  for (int n = 0; n < b.n_steps; ++n) {
    const double* x = b.state(n);
    const double* du = b.du(n);
    double f = 0.0;
    double total_order = 0.0;
    double var_cost = 0.0;
    for (int i = 0; i < d; ++i) {
      f += x[i] >= 0.0 ? params.h[i] * x[i] : -params.p[i] * x[i];
      total_order += du[i];
      var_cost += params.c[i] * du[i];
    }
    f_sum += disc[n] * f * b.dt;
    if (total_order > 0.0) c_sum += disc[n] * (params.c0 + var_cost);
  }
}

int pick_block_size(int64_t rows_total, int n_steps, int batch) {
  const int64_t budget = 256LL << 20;  // bytes of trace per block
  int64_t bb = budget / (8LL * std::max<int64_t>(rows_total, 1) * n_steps);
  bb = std::min<int64_t>(bb, batch);
  return static_cast<int>(std::max<int64_t>(bb, 8));
}

}  // namespace

LossResult loss(const nn::Mlp& h, const nn::Mlp& g, std::vector<PathBundle>& batch,
                double beta, const CostParams& params, const DiffusionParams& diff,
                nn::Mlp::Gradients* gh, nn::Mlp::Gradients* gg) {
  if (batch.empty()) return {};
  const int d = batch[0].dim;
  const int n_steps = batch[0].n_steps;
  const double dt = batch[0].dt;
  const int k_paths = static_cast<int>(batch.size());
  if (h.input_dim() != d || g.input_dim() != d || g.output_dim() != d ||
      h.output_dim() != 1)
    throw std::invalid_argument("loss: network dimensions do not match the problem");

  Vec disc(n_steps + 1);
  for (int n = 0; n <= n_steps; ++n)
    disc[n] = std::exp(-params.annual_rate * dt * n);

  int64_t rows_total = 0;
  for (int w : g.widths()) rows_total += w;
  const int block = pick_block_size(rows_total, n_steps, k_paths);

  double loss_acc = 0.0, h0_acc = 0.0;
  int violations = 0;
  const double inv_k = 1.0 / static_cast<double>(k_paths);

  // Block-sized buffers reused across blocks and across calls.
  thread_local nn::Matrix hx0, hxt, gx, dh0, dht, dgo;
  thread_local nn::Mlp::Trace tr_h0, tr_ht, tr_g;
  thread_local nn::Mlp::Workspace ws_h, ws_g;
  auto shaped = [](nn::Matrix& m, int rows, int64_t cols) {
    if (m.rows != rows || m.cols != cols) m = nn::Matrix(rows, cols);
  };

  for (int b0 = 0; b0 < k_paths; b0 += block) {
    const int bb = std::min(block, k_paths - b0);
    // Assemble input blocks: H at x0 and X_T, G at every left endpoint.
    shaped(hx0, d, bb);
    shaped(hxt, d, bb);
    shaped(gx, d, static_cast<int64_t>(bb) * n_steps);
    for (int p = 0; p < bb; ++p) {
      const PathBundle& pb = batch[b0 + p];
      for (int i = 0; i < d; ++i) {
        hx0.at(i, p) = pb.state(0)[i];
        hxt.at(i, p) = pb.state(n_steps)[i];
      }
      for (int n = 0; n < n_steps; ++n) {
        const double* x = pb.state(n);
        const int64_t col = static_cast<int64_t>(p) * n_steps + n;
        for (int i = 0; i < d; ++i) gx.at(i, col) = x[i];
      }
    }
    const nn::Matrix h0 = h.forward_batch_traced(hx0, tr_h0);
    const nn::Matrix ht = h.forward_batch_traced(hxt, tr_ht);
    const nn::Matrix go = g.forward_batch_traced(gx, tr_g);

    // Per-path slack and loss terms.
    Vec slack(bb);
    for (int p = 0; p < bb; ++p) {
      PathBundle& pb = batch[b0 + p];
      double f_sum, c_sum;
      path_cost_sums(pb, params, disc, f_sum, c_sum);
      double mart = 0.0;
      for (int n = 0; n < n_steps; ++n) {
        const int64_t col = static_cast<int64_t>(p) * n_steps + n;
        const double* db = pb.db(n);
        double dot = 0.0;
        for (int i = 0; i < d; ++i) dot += go.at(i, col) * diff.sigma_diag[i] * db[i];
        mart += disc[n] * dot;
      }
      const double s = h0.at(0, p) - disc[n_steps] * ht.at(0, p) - mart - f_sum - c_sum;
      slack[p] = s;
      pb.slack = s;
      const double viol = s > 0.0 ? s : 0.0;
      loss_acc += inv_k * (-h0.at(0, p) + beta * viol * viol);
      h0_acc += inv_k * h0.at(0, p);
      if (s > 0.0) ++violations;
    }

    if (gh && gg) {
      shaped(dh0, 1, bb);
      shaped(dht, 1, bb);
      shaped(dgo, d, static_cast<int64_t>(bb) * n_steps);
      for (int p = 0; p < bb; ++p) {
        const double pen = slack[p] > 0.0 ? 2.0 * beta * slack[p] : 0.0;
        dh0.at(0, p) = inv_k * (-1.0 + pen);
        dht.at(0, p) = inv_k * pen * (-disc[n_steps]);
        const PathBundle& pb = batch[b0 + p];
        for (int n = 0; n < n_steps; ++n) {
          const int64_t col = static_cast<int64_t>(p) * n_steps + n;
          const double w = inv_k * pen * (-disc[n]);
          const double* db = pb.db(n);
          for (int i = 0; i < d; ++i) dgo.at(i, col) = w * diff.sigma_diag[i] * db[i];
        }
      }
      h.backward_batch(tr_h0, dh0, *gh, &ws_h);
      h.backward_batch(tr_ht, dht, *gh, &ws_h);
      g.backward_batch(tr_g, dgo, *gg, &ws_g);
    }
  }

  LossResult out;
  out.loss = loss_acc;
  out.mean_h0 = h0_acc;
  out.violation_fraction = static_cast<double>(violations) / k_paths;
  return out;
}

double violation_probability(const nn::Mlp& h, const nn::Mlp& g,
                             std::vector<PathBundle>& batch, const CostParams& params,
                             const DiffusionParams& diff) {
  return loss(h, g, batch, 0.0, params, diff).violation_fraction;
}

double Schedule::at(int iter) const {
  double v = 0.0;
  bool found = false;
  for (const auto& [start, value] : steps) {
    if (iter >= start) {
      v = value;
      found = true;
    }
  }
  if (!found) throw ConfigError("schedule undefined at iteration " + std::to_string(iter));
  return v;
}

void Schedule::validate(int iterations) const {
  if (steps.empty()) throw ConfigError("empty schedule");
  if (steps.front().first != 1) throw ConfigError("schedule must start at iteration 1");
  for (size_t i = 1; i < steps.size(); ++i)
    if (steps[i].first <= steps[i - 1].first)
      throw ConfigError("schedule breakpoints must be increasing");
  (void)iterations;
}

void TrainConfig::validate(double lambda) const {
  if (!(horizon_years > 0.0) || n_steps < 1 || batch_size < 1 || iterations < 0)
    throw ConfigError("train config: bad sizes");
  if (lambda * horizon_years / n_steps > 1.0)
    throw ConfigError("train config: lambda*dt must be <= 1");
  lr_schedule.validate(iterations);
  beta_schedule.validate(iterations);
  if (!(kappa > 0.0)) throw ConfigError("train config: kappa must be positive");
}

namespace {

// Resume sidecar: everything needed to continue training bit-identically.
constexpr char kStateMagic[8] = {'S', 'J', 'R', 'P', 'T', 'R', 'N', '1'};

void save_train_state(const std::string& path, int iteration, const nn::Mlp& h,
                      const nn::Mlp& g, nn::AdamState& ah, nn::AdamState& ag,
                      const std::vector<Vec>& x0s) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write train state: " + tmp);
    f.write(kStateMagic, 8);
    auto wi64 = [&](int64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); };
    wi64(iteration);
    wi64(static_cast<int64_t>(x0s.size()));
    wi64(static_cast<int64_t>(x0s.empty() ? 0 : x0s[0].size()));
    for (const auto& x : x0s)
      f.write(reinterpret_cast<const char*>(x.data()), x.size() * sizeof(double));
    auto dump_adam = [&](nn::AdamState& a, const nn::Mlp& net) {
      wi64(a.step_count());
      for (int l = 0; l < net.layers(); ++l) {
        f.write(reinterpret_cast<const char*>(a.m_weight()[l].a.data()),
                a.m_weight()[l].a.size() * sizeof(double));
        f.write(reinterpret_cast<const char*>(a.v_weight()[l].a.data()),
                a.v_weight()[l].a.size() * sizeof(double));
        f.write(reinterpret_cast<const char*>(a.m_bias()[l].data()),
                a.m_bias()[l].size() * sizeof(double));
        f.write(reinterpret_cast<const char*>(a.v_bias()[l].data()),
                a.v_bias()[l].size() * sizeof(double));
      }
    };
    dump_adam(ah, h);
    dump_adam(ag, g);
  }
  std::filesystem::rename(tmp, path);
}

bool load_train_state(const std::string& path, int& iteration, nn::AdamState& ah,
                      const nn::Mlp& h, nn::AdamState& ag, const nn::Mlp& g,
                      std::vector<Vec>& x0s) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return false;
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kStateMagic, 8) != 0) return false;
  auto ri64 = [&]() {
    int64_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  iteration = static_cast<int>(ri64());
  const int64_t npaths = ri64();
  const int64_t dim = ri64();
  if (npaths != static_cast<int64_t>(x0s.size()) ||
      (npaths > 0 && dim != static_cast<int64_t>(x0s[0].size())))
    return false;
  for (auto& x : x0s) f.read(reinterpret_cast<char*>(x.data()), x.size() * sizeof(double));
  auto read_adam = [&](nn::AdamState& a, const nn::Mlp& net) {
    a.set_step_count(ri64());
    for (int l = 0; l < net.layers(); ++l) {
      f.read(reinterpret_cast<char*>(a.m_weight()[l].a.data()),
             a.m_weight()[l].a.size() * sizeof(double));
      f.read(reinterpret_cast<char*>(a.v_weight()[l].a.data()),
             a.v_weight()[l].a.size() * sizeof(double));
      f.read(reinterpret_cast<char*>(a.m_bias()[l].data()),
             a.m_bias()[l].size() * sizeof(double));
      f.read(reinterpret_cast<char*>(a.v_bias()[l].data()),
             a.v_bias()[l].size() * sizeof(double));
    }
  };
  read_adam(ah, h);
  read_adam(ag, g);
  return static_cast<bool>(f);
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const ReferencePolicy& policy,
                  const DiffusionParams& diff, const CostParams& params,
                  const Vec& x_init, bool resume,
                  const std::function<void(const IterationDiagnostics&)>& on_iter) {
  policy.validate();
  cfg.validate(policy.lambda);
  const int d = diff.dim();
  if (static_cast<int>(x_init.size()) != d)
    throw std::invalid_argument("train: x_init dimension mismatch");
  const CostParams scaled = params.scaled(cfg.kappa);

  std::vector<int> widths_h = {d};
  std::vector<int> widths_g = {d};
  for (int w : cfg.hidden_widths) {
    widths_h.push_back(w);
    widths_g.push_back(w);
  }
  widths_h.push_back(1);
  widths_g.push_back(d);

  RandomStream init_rng = RandomStream::from_key(cfg.seed, 0xC0FFEE);
  TrainResult out;
  out.h = nn::he_init(widths_h, init_rng);
  out.g = nn::he_init(widths_g, init_rng);
  nn::AdamState adam_h(out.h), adam_g(out.g);

  std::vector<Vec> x0s(cfg.batch_size, x_init);
  int start_iter = 1;
  if (resume && !cfg.checkpoint_path.empty()) {
    int saved_iter = 0;
    const std::string state_path = cfg.checkpoint_path + ".state";
    if (std::filesystem::exists(cfg.checkpoint_path) &&
        std::filesystem::exists(state_path)) {
      auto nets = nn::load_checkpoint(cfg.checkpoint_path);
      if (nets.size() == 2 && nets[0].widths() == widths_h &&
          nets[1].widths() == widths_g &&
          load_train_state(state_path, saved_iter, adam_h, nets[0], adam_g, nets[1],
                           x0s)) {
        out.h = std::move(nets[0]);
        out.g = std::move(nets[1]);
        start_iter = saved_iter + 1;
        std::fprintf(stderr, "[train] resuming from iteration %d\n", saved_iter);
      }
    }
  }

  std::ofstream diag_csv;
  if (!cfg.diagnostics_csv.empty()) {
    const bool fresh = start_iter == 1 || !std::filesystem::exists(cfg.diagnostics_csv);
    diag_csv.open(cfg.diagnostics_csv, fresh ? std::ios::trunc : std::ios::app);
    if (fresh) diag_csv << "# schema=1 iteration,loss,violation,mean_h0,lr,beta\n";
  }

  std::vector<PathBundle> batch(cfg.batch_size);
  auto checkpoint = [&](int iter) {
    if (cfg.checkpoint_path.empty()) return;
    nn::save_checkpoint(cfg.checkpoint_path, {&out.h, &out.g});
    save_train_state(cfg.checkpoint_path + ".state", iter, out.h, out.g, adam_h, adam_g,
                     x0s);
  };

  const bool trace_timing = std::getenv("SJRP_TRAIN_TIMING") != nullptr;
  for (int m = start_iter; m <= cfg.iterations; ++m) {
    const double lr = cfg.lr_schedule.at(m);
    const double beta = cfg.beta_schedule.at(m);
    const auto tp0 = std::chrono::steady_clock::now();

    parallel::parallel_for(cfg.batch_size, [&](int64_t k0, int64_t k1) {
      for (int64_t k = k0; k < k1; ++k) {
        RandomStream rng = RandomStream::from_key(cfg.seed, 0x77A7, m, k);
        batch[k] = euler_maruyama(policy, diff, cfg.horizon_years, cfg.n_steps,
                                  x0s[k], rng);
      }
    });
    const auto tp1 = std::chrono::steady_clock::now();

    nn::Mlp::Gradients gh, gg;
    gh.init_like(out.h);
    gg.init_like(out.g);
    const auto tp2 = std::chrono::steady_clock::now();
    const LossResult lr_res = loss(out.h, out.g, batch, beta, scaled, diff, &gh, &gg);
    const auto tp3 = std::chrono::steady_clock::now();
    if (trace_timing)
      std::fprintf(stderr, "[timing] paths=%.2fs init=%.2fs loss=%.2fs\n",
                   std::chrono::duration<double>(tp1 - tp0).count(),
                   std::chrono::duration<double>(tp2 - tp1).count(),
                   std::chrono::duration<double>(tp3 - tp2).count());

    if (!std::isfinite(lr_res.loss) || std::abs(lr_res.loss) > cfg.divergence_guard) {
      checkpoint(m - 1);
      out.aborted = true;
      out.abort_reason = "divergence guard tripped at iteration " + std::to_string(m) +
                         " (loss=" + std::to_string(lr_res.loss) + ")";
      return out;
    }

    adam_h.step(out.h, gh, lr);
    adam_g.step(out.g, gg, lr);
    for (int k = 0; k < cfg.batch_size; ++k) {
      const double* xt = batch[k].state(cfg.n_steps);
      std::copy(xt, xt + d, x0s[k].begin());
    }

    IterationDiagnostics diag{m, lr_res.loss, lr_res.violation_fraction, lr_res.mean_h0,
                              lr, beta};
    out.diagnostics.push_back(diag);
    if (diag_csv.is_open()) {
      diag_csv << m << ',' << diag.loss << ',' << diag.violation << ',' << diag.mean_h0
               << ',' << diag.lr << ',' << diag.beta << '\n';
      diag_csv.flush();
    }
    if (on_iter) on_iter(diag);
    if (cfg.checkpoint_every > 0 && m % cfg.checkpoint_every == 0) checkpoint(m);
  }
  checkpoint(cfg.iterations);
  return out;
}

}  // namespace sjrp::bsde
