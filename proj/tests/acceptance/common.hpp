#pragma once

#include <cstdio>
#include <string>

#include "sjrp/core.hpp"

namespace accept {

// One pass/fail line per acceptance check; main() exits with the fail count.
class Gate {
 public:
  explicit Gate(std::string tag) : tag_(std::move(tag)) {}

  void check(bool ok, const std::string& what) {
    std::printf("[%s] %s: %s\n", tag_.c_str(), ok ? "PASS" : "FAIL", what.c_str());
    std::fflush(stdout);
    if (!ok) ++fails_;
  }

  void note(const std::string& what) {
    std::printf("[%s] note: %s\n", tag_.c_str(), what.c_str());
    std::fflush(stdout);
  }

  int fails() const { return fails_; }

 private:
  std::string tag_;
  int fails_ = 0;
};

// The two-item test problem: items 1 and 7 of the 12-item table, weekly
// reviews, annual rate 5%.
inline sjrp::CostParams two_item_costs(double c0, double p) {
  sjrp::CostParams prm;
  prm.c0 = c0;
  prm.c = {0.1, 0.4};
  prm.h = {2.0, 2.0};
  prm.p = {p, p};
  prm.annual_rate = 0.05;
  return prm;
}

inline sjrp::DemandModel two_item_demand(bool poisson, double cv) {
  sjrp::DemandModel m;
  m.kind = poisson ? sjrp::DemandKind::poisson : sjrp::DemandKind::neg_binomial;
  m.annual_mean = {40.0, 20.0};
  if (!poisson) m.annual_cv = {cv, cv};
  return m;
}

// One-dimensional diffusion-demand instance (continuous review).
inline sjrp::CostParams one_d_costs() {
  sjrp::CostParams prm;
  prm.c0 = 1.5;
  prm.c = {1.0};
  prm.h = {0.5};
  prm.p = {2.0};
  prm.annual_rate = 0.05;
  return prm;
}

inline sjrp::DiffusionParams one_d_diffusion() {
  sjrp::DiffusionParams d;
  d.mu = {1.0};
  d.sigma_diag = {0.2};
  d.sigma_sq_diag = {0.04};
  return d;
}

}  // namespace accept
