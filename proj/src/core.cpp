#include "sjrp/core.hpp"

#include <cmath>

namespace sjrp {

namespace {

uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

void CostParams::validate() const {
  const size_t d = c.size();
  if (d == 0 || h.size() != d || p.size() != d)
    throw ConfigError("CostParams: cost vectors must share dimension d >= 1");
  if (c0 < 0.0) throw ConfigError("CostParams: c0 must be nonnegative");
  for (size_t i = 0; i < d; ++i)
    if (c[i] < 0.0 || h[i] < 0.0 || p[i] < 0.0)
      throw ConfigError("CostParams: unit costs must be nonnegative");
  if (!(annual_rate > 0.0)) throw ConfigError("CostParams: interest rate must be > 0");
}

CostParams CostParams::scaled(double kappa) const {
  if (!(kappa > 0.0)) throw ConfigError("cost scaling factor must be positive");
  CostParams out = *this;
  out.c0 *= kappa;
  for (auto& v : out.c) v *= kappa;
  for (auto& v : out.h) v *= kappa;
  for (auto& v : out.p) v *= kappa;
  return out;
}

void DemandModel::validate() const {
  if (annual_mean.empty()) throw ConfigError("DemandModel: no items");
  if (periods_per_year < 1) throw ConfigError("DemandModel: periods_per_year must be >= 1");
  for (double m : annual_mean)
    if (!(m > 0.0)) throw ConfigError("DemandModel: annual mean must be positive");
  if (kind == DemandKind::neg_binomial) {
    if (annual_cv.size() != annual_mean.size())
      throw ConfigError("DemandModel: NB needs one CV per item");
    for (size_t i = 0; i < annual_mean.size(); ++i) {
      const double cv2m = annual_cv[i] * annual_cv[i] * annual_mean[i];
      if (!(cv2m > 1.0))
        throw ConfigError("DemandModel: NB requires cv^2 * mean > 1 (item " +
                          std::to_string(i) + ")");
    }
  }
}

double DemandModel::aggregate_weekly_mean() const {
  double s = 0.0;
  for (int i = 0; i < dim(); ++i) s += weekly_mean(i);
  return s;
}

double DemandModel::annual_variance(int item) const {
  if (kind == DemandKind::poisson) return annual_mean[item];
  const double sd = annual_cv[item] * annual_mean[item];
  return sd * sd;
}

NbParams DemandModel::nb_params(int item) const {
  // CV^2 = 1/(q mu)  =>  q = 1/(cv^2 mu);  mu = shape (1-q)/q.
  const double mu = annual_mean[item];
  const double cv = annual_cv[item];
  const double q = 1.0 / (cv * cv * mu);
  if (!(q > 0.0 && q < 1.0))
    throw ConfigError("DemandModel: NB success probability outside (0,1)");
  return NbParams{mu * q / (1.0 - q), q};
}

// --------------------------- RandomStream ----------------------------------

void RandomStream::seed_from(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
  uint64_t st = seed;
  st ^= 0x8f3a2c1d5e7b9f01ULL + splitmix64(st) + a;
  st ^= splitmix64(st) + (b << 1);
  st ^= splitmix64(st) + (c << 2);
  for (auto& w : s_) w = splitmix64(st);
  have_spare_ = false;
}

uint64_t RandomStream::next_u64() {
  const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RandomStream::uniform() {
  // 53-bit mantissa in (0,1): offset by half an ulp to exclude 0.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double ang = 2.0 * M_PI * u2;
  spare_ = rad * std::sin(ang);
  have_spare_ = true;
  return rad * std::cos(ang);
}

double RandomStream::exponential(double mean) {
  return -mean * std::log(uniform());
}

double RandomStream::lognormal(double mu_log, double sigma_log) {
  return std::exp(mu_log + sigma_log * normal());
}

int64_t RandomStream::poisson(double mean) {
  if (!(mean >= 0.0)) throw NumericError("poisson: negative mean");
  if (mean == 0.0) return 0;
  const double u = uniform();
  double pk = std::exp(-mean);
  double cum = pk;
  int64_t k = 0;
  while (u > cum) {
    ++k;
    pk *= mean / static_cast<double>(k);
    cum += pk;
    if (k > 100000000) throw NumericError("poisson: inversion did not terminate");
  }
  return k;
}

int64_t RandomStream::neg_binomial(double shape, double q) {
  if (!(shape > 0.0) || !(q > 0.0 && q < 1.0))
    throw ConfigError("neg_binomial: invalid parameters");
  const double u = uniform();
  double pk = std::pow(q, shape);
  double cum = pk;
  int64_t k = 0;
  while (u > cum) {
    pk *= (1.0 - q) * (static_cast<double>(k) + shape) / (static_cast<double>(k) + 1.0);
    ++k;
    cum += pk;
    if (k > 100000000) throw NumericError("neg_binomial: inversion did not terminate");
  }
  return k;
}

double RandomStream::gamma(double shape, double scale) {
  // Marsaglia-Tsang; shape < 1 boosted through Gamma(shape+1) U^{1/shape}.
  if (!(shape > 0.0)) throw NumericError("gamma: shape must be positive");
  double boost = 1.0;
  double a = shape;
  if (a < 1.0) {
    boost = std::pow(uniform(), 1.0 / a);
    a += 1.0;
  }
  const double d = a - 1.0 / 3.0;
  const double cte = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + cte * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return boost * d * v * scale;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return boost * d * v * scale;
  }
}

// ------------------------------ costs ---------------------------------------

double ordering_cost(const Vec& y, const CostParams& params) {
  if (y.size() != params.c.size())
    throw std::invalid_argument("ordering_cost: dimension mismatch");
  double total = 0.0;
  double variable = 0.0;
  for (size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0.0) throw std::invalid_argument("ordering_cost: negative order component");
    total += y[i];
    variable += params.c[i] * y[i];
  }
  return total > 0.0 ? params.c0 + variable : 0.0;
}

double holding_backlog_cost(const InventoryState& x, const CostParams& params) {
  const auto s = holding_backlog_split(x, params);
  return s.holding + s.backlog;
}

StateCostSplit holding_backlog_split(const InventoryState& x, const CostParams& params) {
  if (x.size() != params.h.size())
    throw std::invalid_argument("holding_backlog_cost: dimension mismatch");
  StateCostSplit out;
  for (size_t i = 0; i < x.size(); ++i) {
    if (x[i] >= 0.0)
      out.holding += params.h[i] * x[i];
    else
      out.backlog -= params.p[i] * x[i];
  }
  return out;
}

Vec weekly_demand_sample(const DemandModel& model, RandomStream& rng) {
  Vec d(model.dim());
  for (int i = 0; i < model.dim(); ++i) {
    if (model.kind == DemandKind::poisson) {
      d[i] = static_cast<double>(rng.poisson(model.weekly_mean(i)));
    } else {
      const NbParams nb = model.nb_params(i);
      d[i] = static_cast<double>(
          rng.neg_binomial(nb.annual_shape / model.periods_per_year, nb.q));
    }
  }
  return d;
}

DiffusionParams diffusion_moments(const DemandModel& model) {
  DiffusionParams out;
  out.mu = model.annual_mean;
  out.sigma_diag.resize(model.dim());
  out.sigma_sq_diag.resize(model.dim());
  for (int i = 0; i < model.dim(); ++i) {
    out.sigma_sq_diag[i] = model.annual_variance(i);
    out.sigma_diag[i] = std::sqrt(out.sigma_sq_diag[i]);
  }
  return out;
}

double weekly_discount(const CostParams& params) {
  if (!(params.annual_rate > 0.0))
    throw std::invalid_argument("weekly_discount: rate must be positive");
  return std::exp(-params.annual_rate / kPeriodsPerYear);
}

Vec demand_pmf(const DemandModel& model, int item, int weeks, double tail_mass) {
  if (weeks < 1) throw std::invalid_argument("demand_pmf: weeks must be >= 1");
  Vec pmf;
  pmf.reserve(64);
  const double keep = 1.0 - tail_mass;
  if (model.kind == DemandKind::poisson) {
    const double lam = model.weekly_mean(item) * weeks;
    double pk = std::exp(-lam);
    double cum = pk;
    pmf.push_back(pk);
    while (cum < keep) {
      const double k = static_cast<double>(pmf.size());
      pk *= lam / k;
      cum += pk;
      pmf.push_back(pk);
      if (pmf.size() > 20000000)
        throw NumericError("demand_pmf: truncation quantile unreachable");
    }
  } else {
    const NbParams nb = model.nb_params(item);
    const double shape = nb.annual_shape * weeks / model.periods_per_year;
    const double q = nb.q;
    double pk = std::pow(q, shape);
    double cum = pk;
    pmf.push_back(pk);
    while (cum < keep) {
      const double k = static_cast<double>(pmf.size()) - 1.0;
      pk *= (1.0 - q) * (k + shape) / (k + 1.0);
      cum += pk;
      pmf.push_back(pk);
      if (pmf.size() > 20000000)
        throw NumericError("demand_pmf: truncation quantile unreachable");
    }
  }
  return pmf;
}

double expected_state_cost(const Vec& pmf, double y, double h, double p) {
  double acc = 0.0;
  for (size_t k = 0; k < pmf.size(); ++k) {
    const double v = y - static_cast<double>(k);
    acc += pmf[k] * (v >= 0.0 ? h * v : -p * v);
  }
  return acc;
}

namespace vec {

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sum(const Vec& a) {
  double s = 0.0;
  for (double v : a) s += v;
  return s;
}

Vec add(const Vec& a, const Vec& b) {
  Vec r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

Vec sub(const Vec& a, const Vec& b) {
  Vec r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

Vec scale(const Vec& a, double k) {
  Vec r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] * k;
  return r;
}

bool all_leq(const Vec& a, const Vec& b) {
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i] > b[i]) return false;
  return true;
}

bool all_geq_zero(const Vec& a) {
  for (double v : a)
    if (v < 0.0) return false;
  return true;
}

}  // namespace vec

}  // namespace sjrp
