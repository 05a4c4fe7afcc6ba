#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sjrp {

using Vec = std::vector<double>;

/// Inventory levels per item; negative components are backlog.
using InventoryState = Vec;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PolicyContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kPeriodsPerYear = 52;
/// Weekly share of an annual cost rate: discrete-time periods charge
/// holding/backlog at f(x) * kWeekFraction per week.
inline constexpr double kWeekFraction = 1.0 / kPeriodsPerYear;

/// Economic environment: one shared fixed ordering cost, per-item variable,
/// holding and backlog rates, and the annual interest rate.
struct CostParams {
  double c0 = 0.0;          // fixed cost per order
  Vec c;                    // variable cost per unit
  Vec h;                    // holding cost per unit-year (annual rate)
  Vec p;                    // backlog cost per unit-year (annual rate)
  double annual_rate = 0.05;

  int dim() const { return static_cast<int>(c.size()); }
  void validate() const;
  CostParams scaled(double kappa) const;
};

enum class DemandKind { poisson, neg_binomial };

/// Weekly NB parameterization derived from an annual mean/CV pair.
/// Annual demand is NB(shape, q) with mean shape*(1-q)/q; the weekly law is
/// NB(shape/52, q) by divisibility in the shape parameter.
struct NbParams {
  double annual_shape = 0.0;
  double q = 0.0;  // success probability in (0,1)
};

struct DemandModel {
  DemandKind kind = DemandKind::poisson;
  Vec annual_mean;
  Vec annual_cv;  // for poisson this is implied (1/sqrt(mean)) and ignored
  int periods_per_year = kPeriodsPerYear;

  int dim() const { return static_cast<int>(annual_mean.size()); }
  void validate() const;

  double weekly_mean(int item) const { return annual_mean[item] / periods_per_year; }
  double aggregate_weekly_mean() const;
  /// Annualized variance of item demand: mean for Poisson, (cv*mean)^2 for NB.
  double annual_variance(int item) const;
  NbParams nb_params(int item) const;
};

/// Drift and (diagonal) diffusion coefficient of the Gaussian demand
/// approximation, in annual units.
struct DiffusionParams {
  Vec mu;               // units/year
  Vec sigma_diag;       // sigma is diagonal here
  Vec sigma_sq_diag;    // (sigma sigma^T)_ii

  int dim() const { return static_cast<int>(mu.size()); }
};

// ---------------------------------------------------------------------------
// Random streams.
//
// xoshiro256++ seeded through splitmix64 from a (seed, id...) key, so that
// per-path / per-period substreams are reproducible and independent of
// scheduling order.
// ---------------------------------------------------------------------------

class RandomStream {
 public:
  RandomStream() : RandomStream(0xdeadbeef) {}
  explicit RandomStream(uint64_t seed) { seed_from(seed, 0, 0, 0); }

  static RandomStream from_key(uint64_t seed, uint64_t a = 0, uint64_t b = 0,
                               uint64_t c = 0) {
    RandomStream r;
    r.seed_from(seed, a, b, c);
    return r;
  }

  uint64_t next_u64();
  /// Uniform on (0,1), never exactly 0 or 1.
  double uniform();
  double normal();
  double exponential(double mean) ;
  double lognormal(double mu_log, double sigma_log);
  /// Inversion by sequential search; one uniform per draw.
  int64_t poisson(double mean);
  /// NB(shape, q) counting failures before the shape-th success.
  int64_t neg_binomial(double shape, double q);
  double gamma(double shape, double scale);

 private:
  void seed_from(uint64_t seed, uint64_t a, uint64_t b, uint64_t c);
  uint64_t s_[4];
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Cost and demand operations.
// ---------------------------------------------------------------------------

/// Total ordering cost: 0 for a zero order, else c0 + sum_i c_i y_i.
double ordering_cost(const Vec& y, const CostParams& params);

/// Annual state-cost rate: sum_i h_i x_i^+ + p_i x_i^-.  Weekly periods in
/// the discrete model charge kWeekFraction of it.
double holding_backlog_cost(const InventoryState& x, const CostParams& params);

/// Same split into holding and backlog parts (for component accounting).
struct StateCostSplit {
  double holding = 0.0;
  double backlog = 0.0;
};
StateCostSplit holding_backlog_split(const InventoryState& x, const CostParams& params);

/// One period's demand vector (integer-valued, stored as doubles).
Vec weekly_demand_sample(const DemandModel& model, RandomStream& rng);

/// Moment-matched diffusion approximation of cumulative annual demand.
DiffusionParams diffusion_moments(const DemandModel& model);

/// gamma = exp(-r/52).
double weekly_discount(const CostParams& params);

// ---------------------------------------------------------------------------
// Exact r-week demand pmfs (additive closure of Poisson / NB), truncated at
// the 1 - kPmfTailMass quantile.
// ---------------------------------------------------------------------------

inline constexpr double kPmfTailMass = 1e-12;

/// pmf[k] = P(D = k) for the cumulative demand of one item over `weeks` weeks.
/// The returned vector sums to >= 1 - kPmfTailMass.
Vec demand_pmf(const DemandModel& model, int item, int weeks,
               double tail_mass = kPmfTailMass);

/// E[f(y - D)] for scalar y with D ~ pmf, where f(v)=h v^+ + p v^-.
double expected_state_cost(const Vec& pmf, double y, double h, double p);

// Small vector helpers shared across modules.
namespace vec {
double dot(const Vec& a, const Vec& b);
double sum(const Vec& a);
Vec add(const Vec& a, const Vec& b);
Vec sub(const Vec& a, const Vec& b);
Vec scale(const Vec& a, double k);
bool all_leq(const Vec& a, const Vec& b);
bool all_geq_zero(const Vec& a);
}  // namespace vec

}  // namespace sjrp
