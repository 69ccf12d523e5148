#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "thinfb/elliptic.hpp"
#include "thinfb/grid.hpp"

namespace thinfb::testing {

// Seeded draws for property tests; each test owns its generator.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double s_value() { return uniform(0.05, 0.95); }

  // Smooth random Dirichlet data: a few low modes plus an offset.
  BoundaryData smooth_boundary(double offset_lo, double offset_hi) {
    const double c = uniform(offset_lo, offset_hi);
    const double a = uniform(-0.3, 0.3), b = uniform(-0.3, 0.3), d = uniform(-0.2, 0.2);
    const double k = uniform(0.5, 3.0);
    return [=](double x1, double xn) { return c + a * x1 + b * std::sin(k * x1) + d * xn * x1; };
  }

  std::vector<double> increasing(std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (auto& x : v) x = uniform(lo, hi);
    std::sort(v.begin(), v.end());
    return v;
  }

 private:
  std::mt19937_64 rng_;
};

inline ProblemParams small_problem(double s, double eps, std::size_t nx = 33, std::size_t nz = 17) {
  ProblemParams p;
  p.s = s;
  p.eps = eps;
  p.grid = GridSpec{1.0, 1.0, nx, nz};
  return p;
}

}  // namespace thinfb::testing
