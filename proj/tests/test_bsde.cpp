#include "sjrp/bsde.hpp"

#include <cmath>

#include "doctest.h"
#include "sjrp/parallel.hpp"

using namespace sjrp;
using bsde::PathBundle;
using bsde::ReferencePolicy;

namespace {

DiffusionParams diffusion(Vec mu, Vec sigma) {
  DiffusionParams d;
  d.mu = std::move(mu);
  d.sigma_diag = std::move(sigma);
  d.sigma_sq_diag.resize(d.sigma_diag.size());
  for (size_t i = 0; i < d.sigma_diag.size(); ++i)
    d.sigma_sq_diag[i] = d.sigma_diag[i] * d.sigma_diag[i];
  return d;
}

CostParams costs2(double c0, Vec c, Vec h, Vec p) {
  CostParams prm;
  prm.c0 = c0;
  prm.c = std::move(c);
  prm.h = std::move(h);
  prm.p = std::move(p);
  prm.annual_rate = 0.05;
  return prm;
}

// Mlp computing a constant v (zero weights, output bias v).
nn::Mlp constant_net(int d, int out, double v) {
  nn::Mlp net(std::vector<int>{d, 4, out});
  for (int o = 0; o < out; ++o) net.bias(1)[o] = v;
  net.sync_packs();
  return net;
}

}  // namespace

TEST_CASE("euler-maruyama: deterministic drift when noise and orders vanish") {
  ReferencePolicy pol;
  pol.lambda = 1e-12;
  pol.order_up_to_mean = {35.0, 20.0};
  pol.nu = 0.2;
  const auto diff = diffusion({40.0, 20.0}, {0.0, 0.0});
  RandomStream rng = RandomStream::from_key(1);
  const auto b = bsde::euler_maruyama(pol, diff, 0.1, 50, {3.0, 1.0}, rng);
  for (int n = 0; n <= 50; ++n) {
    const double t = 0.1 / 50 * n;
    CHECK(b.state(n)[0] == doctest::Approx(3.0 - 40.0 * t).epsilon(1e-12));
    CHECK(b.state(n)[1] == doctest::Approx(1.0 - 20.0 * t).epsilon(1e-12));
  }
}

TEST_CASE("euler-maruyama: degenerate lognormal orders hit the target") {
  ReferencePolicy pol;
  pol.lambda = 500.0;  // fire essentially every step
  pol.order_up_to_mean = {35.0, 20.0};
  pol.nu = 0.0;
  pol.alpha = 0.0;
  const auto diff = diffusion({0.0, 0.0}, {0.0, 0.0});
  // mu = 0 exercises only the jump part.
  RandomStream rng = RandomStream::from_key(2);
  const auto b = bsde::euler_maruyama(pol, diff, 0.1, 50, {3.0, -4.0}, rng);
  bool fired = false;
  for (int n = 0; n < 50; ++n) {
    if (b.du(n)[0] > 0.0) {
      fired = true;
      CHECK(b.state(n + 1)[0] == doctest::Approx(35.0).epsilon(1e-12));
      CHECK(b.state(n + 1)[1] == doctest::Approx(20.0).epsilon(1e-12));
      break;
    }
  }
  CHECK(fired);
  CHECK_THROWS_AS(bsde::euler_maruyama(pol, diff, 1.0, 50, {0.0, 0.0}, rng),
                  ConfigError);  // lambda*dt > 1
}

TEST_CASE("euler-maruyama: path recursion reconstructs bitwise") {
  ReferencePolicy pol;
  pol.lambda = 1.0;
  pol.order_up_to_mean = {35.0, 20.0};
  pol.nu = 0.2;
  pol.alpha = 0.3;
  const auto diff = diffusion({40.0, 20.0}, {std::sqrt(400.0), std::sqrt(400.0)});
  RandomStream rng = RandomStream::from_key(3);
  const auto b = bsde::euler_maruyama(pol, diff, 0.1, 50, {0.0, 0.0}, rng);
  for (int n = 0; n < b.n_steps; ++n) {
    for (int i = 0; i < b.dim; ++i) {
      const double expect = b.state(n)[i] - diff.mu[i] * b.dt -
                            diff.sigma_diag[i] * b.db(n)[i] + b.du(n)[i];
      CHECK(b.state(n + 1)[i] == expect);  // exact reconstruction
      CHECK(b.du(n)[i] >= 0.0);
    }
  }
}

TEST_CASE("euler-maruyama: terminal mean consistent with realized orders") {
  ReferencePolicy pol;
  pol.lambda = 1.0;
  pol.order_up_to_mean = {35.0, 20.0};
  pol.nu = 0.2;
  pol.alpha = 0.0;
  const auto diff = diffusion({40.0, 20.0}, {20.0, 20.0});
  const double horizon = 0.1;
  const int n_paths = 100000;
  // Run A: terminal states.
  double mean_xt = 0.0, var_xt = 0.0;
  for (int p = 0; p < n_paths; ++p) {
    RandomStream rng = RandomStream::from_key(40, p);
    const auto b = bsde::euler_maruyama(pol, diff, horizon, 50, {0.0, 0.0}, rng);
    const double v = b.state(50)[0];
    mean_xt += v;
    var_xt += v * v;
  }
  mean_xt /= n_paths;
  var_xt = var_xt / n_paths - mean_xt * mean_xt;
  // Run B (independent seed): mean total ordered quantity.
  double mean_u = 0.0, var_u = 0.0;
  for (int p = 0; p < n_paths; ++p) {
    RandomStream rng = RandomStream::from_key(41, p);
    const auto b = bsde::euler_maruyama(pol, diff, horizon, 50, {0.0, 0.0}, rng);
    double u = 0.0;
    for (int n = 0; n < 50; ++n) u += b.du(n)[0];
    mean_u += u;
    var_u += u * u;
  }
  mean_u /= n_paths;
  var_u = var_u / n_paths - mean_u * mean_u;
  const double lhs = mean_xt;
  const double rhs = 0.0 - diff.mu[0] * horizon + mean_u;
  const double se = std::sqrt(var_xt / n_paths + var_u / n_paths);
  CHECK(std::abs(lhs - rhs) <= 3.0 * se);
}

TEST_CASE("loss: zero-penalty, zero-cost and constant-net hand values") {
  const auto diff = diffusion({40.0, 20.0}, {20.0, 20.0});
  ReferencePolicy pol;
  pol.lambda = 1.0;
  pol.order_up_to_mean = {35.0, 20.0};
  pol.nu = 0.2;
  std::vector<PathBundle> batch(32);
  for (size_t k = 0; k < batch.size(); ++k) {
    RandomStream rng = RandomStream::from_key(50, k);
    batch[k] = bsde::euler_maruyama(pol, diff, 0.1, 20, {0.0, 0.0}, rng);
  }
  const CostParams zero = costs2(0.0, {0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0});
  const CostParams real = costs2(50.0, {0.1, 0.4}, {2.0, 2.0}, {50.0, 50.0});

  // beta = 0: loss is -mean H(x0).
  RandomStream rng = RandomStream::from_key(51);
  nn::Mlp h = nn::he_init({2, 8, 1}, rng);
  nn::Mlp g = nn::he_init({2, 8, 2}, rng);
  const auto l0 = bsde::loss(h, g, batch, 0.0, real, diff);
  CHECK(l0.loss == doctest::Approx(-l0.mean_h0).epsilon(1e-12));

  // H = G = 0 with zero costs: loss vanishes for any beta.
  nn::Mlp hz = constant_net(2, 1, 0.0);
  nn::Mlp gz = constant_net(2, 2, 0.0);
  const auto lz = bsde::loss(hz, gz, batch, 123.0, zero, diff);
  CHECK(lz.loss == doctest::Approx(0.0));
  CHECK(lz.violation_fraction == 0.0);

  // H = 1 constant, zero costs: slack = 1 - e^{-rT} on every path.
  nn::Mlp h1 = constant_net(2, 1, 1.0);
  const auto l1 = bsde::loss(h1, gz, batch, 10.0, zero, diff);
  const double slack = 1.0 - std::exp(-0.05 * 0.1);
  CHECK(l1.loss == doctest::Approx(-1.0 + 10.0 * slack * slack).epsilon(1e-12));
  CHECK(l1.violation_fraction == 1.0);
  for (const auto& b : batch) CHECK(b.slack == doctest::Approx(slack).epsilon(1e-12));

  // H = -1e9: deeply feasible; H = +1e9: deeply infeasible.
  nn::Mlp hi = constant_net(2, 1, 1e9);
  nn::Mlp hlo = constant_net(2, 1, -1e9);
  CHECK(bsde::violation_probability(hlo, gz, batch, real, diff) == 0.0);
  CHECK(bsde::violation_probability(hi, gz, batch, real, diff) == 1.0);
}

TEST_CASE("loss: slack scales bitwise with power-of-two cost/net scaling") {
  const auto diff = diffusion({40.0, 20.0}, {20.0, 20.0});
  ReferencePolicy pol;
  pol.lambda = 2.0;
  pol.order_up_to_mean = {35.0, 20.0};
  pol.nu = 0.2;
  std::vector<PathBundle> batch(16), batch2(16);
  for (size_t k = 0; k < batch.size(); ++k) {
    RandomStream rng = RandomStream::from_key(60, k);
    batch[k] = bsde::euler_maruyama(pol, diff, 0.1, 25, {0.0, 0.0}, rng);
    batch2[k] = batch[k];
  }
  const CostParams prm = costs2(50.0, {0.1, 0.4}, {2.0, 2.0}, {50.0, 50.0});
  RandomStream rng = RandomStream::from_key(61);
  nn::Mlp h = nn::he_init({2, 8, 1}, rng);
  nn::Mlp g = nn::he_init({2, 8, 2}, rng);
  nn::Mlp h2 = h, g2 = g;
  // Doubling the output layer of each net doubles its output exactly.
  for (auto& v : h2.weight(h2.layers() - 1).a) v *= 2.0;
  for (auto& v : h2.bias(h2.layers() - 1)) v *= 2.0;
  for (auto& v : g2.weight(g2.layers() - 1).a) v *= 2.0;
  for (auto& v : g2.bias(g2.layers() - 1)) v *= 2.0;
  h2.sync_packs();
  g2.sync_packs();
  bsde::loss(h, g, batch, 1.0, prm, diff);
  bsde::loss(h2, g2, batch2, 1.0, prm.scaled(2.0), diff);
  for (size_t k = 0; k < batch.size(); ++k)
    CHECK(batch2[k].slack == 2.0 * batch[k].slack);
}

TEST_CASE("loss gradients match finite differences through the penalty") {
  const auto diff = diffusion({10.0, 5.0}, {4.0, 4.0});
  ReferencePolicy pol;
  pol.lambda = 4.0;
  pol.order_up_to_mean = {4.0, 3.0};
  pol.nu = 0.3;
  std::vector<PathBundle> batch(6);
  for (size_t k = 0; k < batch.size(); ++k) {
    RandomStream rng = RandomStream::from_key(70, k);
    batch[k] = bsde::euler_maruyama(pol, diff, 0.1, 8, {0.0, 0.0}, rng);
  }
  const CostParams prm = costs2(5.0, {0.1, 0.4}, {2.0, 2.0}, {10.0, 10.0});
  RandomStream rng = RandomStream::from_key(71);
  nn::Mlp h = nn::he_init({2, 6, 5, 1}, rng);
  nn::Mlp g = nn::he_init({2, 6, 5, 2}, rng);
  const double beta = 3.0;

  nn::Mlp::Gradients gh, gg;
  gh.init_like(h);
  gg.init_like(g);
  bsde::loss(h, g, batch, beta, prm, diff, &gh, &gg);

  RandomStream pick = RandomStream::from_key(72);
  const double step = 1e-6;
  for (int trial = 0; trial < 25; ++trial) {
    const bool on_h = (pick.next_u64() & 1) != 0;
    nn::Mlp& net = on_h ? h : g;
    const auto& grads = on_h ? gh : gg;
    const int l = static_cast<int>(pick.next_u64() % net.layers());
    const size_t i = pick.next_u64() % net.weight(l).a.size();
    const double save = net.weight(l).a[i];
    net.weight(l).a[i] = save + step;
    net.sync_packs();
    const double up = bsde::loss(h, g, batch, beta, prm, diff).loss;
    net.weight(l).a[i] = save - step;
    net.sync_packs();
    const double dn = bsde::loss(h, g, batch, beta, prm, diff).loss;
    net.weight(l).a[i] = save;
    net.sync_packs();
    const double fd = (up - dn) / (2.0 * step);
    CHECK(grads.weight[l].a[i] ==
          doctest::Approx(fd).epsilon(2e-5).scale(std::max(1.0, std::abs(fd))));
  }
}

TEST_CASE("train: empty loop, determinism, thread independence, divergence guard") {
  const auto diff = diffusion({10.0}, {4.0});
  ReferencePolicy pol;
  pol.lambda = 4.0;
  pol.order_up_to_mean = {3.0};
  pol.nu = 0.3;
  CostParams prm;
  prm.c0 = 2.0;
  prm.c = {0.5};
  prm.h = {1.0};
  prm.p = {5.0};
  prm.annual_rate = 0.05;

  bsde::TrainConfig cfg;
  cfg.horizon_years = 0.1;
  cfg.n_steps = 10;
  cfg.batch_size = 16;
  cfg.iterations = 0;
  cfg.hidden_widths = {8, 8};
  cfg.lr_schedule.steps = {{1, 1e-3}};
  cfg.beta_schedule.steps = {{1, 1.0}};
  cfg.seed = 7;
  cfg.checkpoint_every = 0;

  const auto r0 = bsde::train(cfg, pol, diff, prm, {0.0});
  CHECK(r0.diagnostics.empty());
  const auto r0b = bsde::train(cfg, pol, diff, prm, {0.0});
  CHECK(r0.h.weight(0).a == r0b.h.weight(0).a);  // fresh init is deterministic

  cfg.iterations = 5;
  const int restore = parallel::threads();
  parallel::set_threads(1);
  const auto r1 = bsde::train(cfg, pol, diff, prm, {0.0});
  parallel::set_threads(4);
  const auto r2 = bsde::train(cfg, pol, diff, prm, {0.0});
  parallel::set_threads(restore);
  REQUIRE(r1.diagnostics.size() == 5);
  REQUIRE(r2.diagnostics.size() == 5);
  for (int m = 0; m < 5; ++m) {
    CHECK(r1.diagnostics[m].loss == r2.diagnostics[m].loss);
    CHECK(r1.diagnostics[m].violation == r2.diagnostics[m].violation);
  }
  CHECK(r1.h.weight(1).a == r2.h.weight(1).a);
  CHECK(r1.g.weight(1).a == r2.g.weight(1).a);

  cfg.divergence_guard = 1e-300;
  const auto rbad = bsde::train(cfg, pol, diff, prm, {0.0});
  CHECK(rbad.aborted);
  CHECK(!rbad.abort_reason.empty());
}

TEST_CASE("schedules: step lookup and validation") {
  bsde::Schedule s;
  s.steps = {{1, 1e-3}, {10, 1e-4}, {20, 1e-5}};
  s.validate(30);
  CHECK(s.at(1) == 1e-3);
  CHECK(s.at(9) == 1e-3);
  CHECK(s.at(10) == 1e-4);
  CHECK(s.at(19) == 1e-4);
  CHECK(s.at(25) == 1e-5);
  bsde::Schedule bad;
  bad.steps = {{2, 1.0}};
  CHECK_THROWS_AS(bad.validate(10), ConfigError);
}
