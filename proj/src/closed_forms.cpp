#include "thinfb/closed_forms.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include <Eigen/Sparse>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "thinfb/errors.hpp"
#include "thinfb/format.hpp"
#include "thinfb/grid.hpp"

namespace thinfb {
namespace {

constexpr double kPi = std::numbers::pi;

void require_s(double s) {
  if (!(s > 0.0 && s < 1.0)) throw InvalidParameter("s must lie in (0, 1), got " + format_number(s));
}

template <class F>
double tanh_sinh(F f, double a, double b) {
  boost::math::quadrature::tanh_sinh<double> rule;
  double error = 0.0;
  double l1 = 0.0;
  return rule.integrate(f, a, b, 1e-14, &error, &l1);
}

// sqrt(x1^2 + xn^2) + x1 without cancellation for x1 < 0.
double profile_base(double x1, double xn) {
  const double r = std::hypot(x1, xn);
  if (x1 >= 0.0) return r + x1;
  if (xn == 0.0) return 0.0;
  return xn * xn / (r - x1);
}

}  // namespace

double profile_P(double x1, double xn, double s) {
  require_s(s);
  const double a = profile_base(x1, xn);
  return a > 0.0 ? std::pow(0.5 * a, s) : 0.0;
}

std::array<double, 2> profile_gradient(double x1, double xn, double s) {
  require_s(s);
  const double r = std::hypot(x1, xn);
  const double a = profile_base(x1, xn);
  if (r == 0.0 || a == 0.0) return {0.0, 0.0};
  const double p = std::pow(0.5 * a, s);
  return {s * p / r, s * p * xn / (a * r)};
}

double c0_gamma(double s) {
  require_s(s);
  return s * s * std::pow(2.0, -1.0 - 2.0 * s) * std::sqrt(kPi) * (7.0 + 4.0 * s * (s - 2.0)) *
         std::tgamma(1.0 - s) / std::tgamma(3.5 - s);
}

double c0_quadrature(double s) {
  require_s(s);
  // (cos(t/2))^{2s-1} (sin t)^{1-2s} = (2 sin(t/2))^{1-2s}, bounded near t = pi.
  const auto integrand = [s](double t) {
    const double c = std::cos(t);
    return std::pow(2.0 * std::sin(0.5 * t), 1.0 - 2.0 * s) * c * c;
  };
  return s * s * tanh_sinh(integrand, 0.0, kPi);
}

double alpha_star(double s, double mass) {
  if (!(mass > 0.0)) throw InvalidParameter("mass must be positive, got " + format_number(mass));
  return std::sqrt(2.0 * mass / c0_gamma(s));
}

double tip_flux_constant(double s) {
  require_s(s);
  return s * s * std::pow(2.0, 1.0 - 2.0 * s) * kPi / std::sin(kPi * s);
}

double alpha_variational(double s, double mass) {
  if (!(mass > 0.0)) throw InvalidParameter("mass must be positive, got " + format_number(mass));
  return std::sqrt(2.0 * mass / tip_flux_constant(s));
}

double poisson_constant(double s) {
  require_s(s);
  static std::mutex mutex;
  static std::map<double, double> cache;
  std::lock_guard lock(mutex);
  if (auto it = cache.find(s); it != cache.end()) return it->second;
  // z = cot(phi) turns the mass integral into 2 int_0^{pi/2} sin^{2s-1}; the
  // singular end sits at phi = 0 where sin keeps full relative accuracy.
  const double mass =
      2.0 * tanh_sinh([s](double phi) { return std::pow(std::sin(phi), 2.0 * s - 1.0); }, 0.0,
                      0.5 * kPi);
  const double c = 1.0 / mass;
  cache.emplace(s, c);
  return c;
}

double poisson_constant_closed(double s) {
  require_s(s);
  return std::tgamma(s + 0.5) / (std::sqrt(kPi) * std::tgamma(s));
}

double poisson_kernel(double z, double xn, double s) {
  if (!(xn > 0.0)) throw InvalidParameter("poisson_kernel needs xn > 0, got " + format_number(xn));
  return poisson_constant(s) * std::pow(xn, 2.0 * s) /
         std::pow(z * z + xn * xn, 0.5 + s);
}

std::vector<double> poisson_extend(const std::vector<double>& trace, double spacing, double xn,
                                   double s) {
  if (!(spacing > 0.0)) throw InvalidParameter("spacing must be positive");
  if (!(xn > 0.0)) throw InvalidParameter("poisson_extend needs xn > 0");
  const std::size_t n = trace.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  const double c = poisson_constant(s);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double z = (static_cast<double>(i) - static_cast<double>(k)) * spacing;
      const double w = (k == 0 || k + 1 == n) ? 0.5 : 1.0;
      total += w * trace[k] * std::pow(xn, 2.0 * s) / std::pow(z * z + xn * xn, 0.5 + s);
    }
    out[i] = c * spacing * total;
  }
  return out;
}

FluxCheck fractional_flux_check(int k, double s, const FluxCheckGrid& spec) {
  require_s(s);
  if (k < 0) throw InvalidParameter("mode number must be nonnegative");
  if (spec.nx < 4 || spec.nz < 3) throw InvalidParameter("flux check grid is too small");
  // Reuse the weighted grid for its row weights; nx + 1 nodes span one period.
  const GridPtr weights =
      Grid::build(s, GridSpec{spec.half_period, spec.height, spec.nx + 1, spec.nz});
  const Grid& g = *weights;
  const std::size_t nx = spec.nx;
  const std::size_t nz = spec.nz;
  const double hx = g.hx();
  const double omega = static_cast<double>(k) * kPi / spec.half_period;

  std::vector<double> trace(nx);
  for (std::size_t i = 0; i < nx; ++i) trace[i] = std::cos(omega * g.x(i));

  // Unknowns: rows 1 .. nz-1, row-major, periodic in i.
  const auto unknown = [nx](std::size_t i, std::size_t j) {
    return static_cast<int>((j - 1) * nx + i);
  };
  const int count = static_cast<int>((nz - 1) * nx);
  std::vector<Eigen::Triplet<double>> entries;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(count);
  const auto add_edge = [&](std::size_t ia, std::size_t ja, std::size_t ib, std::size_t jb,
                            double c) {
    const bool fa = ja > 0;
    const bool fb = jb > 0;
    if (fa) entries.emplace_back(unknown(ia, ja), unknown(ia, ja), c);
    if (fb) entries.emplace_back(unknown(ib, jb), unknown(ib, jb), c);
    if (fa && fb) {
      entries.emplace_back(unknown(ia, ja), unknown(ib, jb), -c);
      entries.emplace_back(unknown(ib, jb), unknown(ia, ja), -c);
    } else if (fa) {
      rhs(unknown(ia, ja)) += c * trace[ib];
    } else if (fb) {
      rhs(unknown(ib, jb)) += c * trace[ia];
    }
  };
  for (std::size_t j = 1; j < nz; ++j) {
    const double c = g.horizontal_weight(j) / hx;
    for (std::size_t i = 0; i < nx; ++i) add_edge(i, j, (i + 1) % nx, j, c);
  }
  for (std::size_t j = 0; j + 1 < nz; ++j) {
    const double c = g.vertical_weight(j) * hx / g.hz();
    for (std::size_t i = 0; i < nx; ++i) add_edge(i, j, i, j + 1, c);
  }
  Eigen::SparseMatrix<double> a(count, count);
  a.setFromTriplets(entries.begin(), entries.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(a);
  if (ldlt.info() != Eigen::Success) throw SolverBreakdown("flux check factorization failed");
  const Eigen::VectorXd sol = ldlt.solve(rhs);
  if (!sol.allFinite()) throw SolverBreakdown("flux check produced non-finite values");

  const auto value = [&](std::size_t i, std::size_t j) {
    return j == 0 ? trace[i] : sol(unknown(i, j));
  };
  FluxCheck result;
  result.k = k;
  double amplitude = 0.0;
  const double ch = g.horizontal_weight(0) / hx;
  const double cv = g.vertical_weight(0) * hx / g.hz();
  for (std::size_t i = 0; i < nx; ++i) {
    const std::size_t left = (i + nx - 1) % nx;
    const std::size_t right = (i + 1) % nx;
    const double ku = ch * (2.0 * trace[i] - trace[left] - trace[right]) +
                      cv * (trace[i] - value(i, 1));
    const double flux = ku / hx;
    amplitude += flux * (k == 0 ? 1.0 : 2.0 * trace[i]);
  }
  result.flux_amplitude = amplitude / static_cast<double>(nx);
  result.symbol = std::pow(omega, 2.0 * s);
  result.rho = k == 0 ? 0.0 : result.flux_amplitude / result.symbol;

  double top = 0.0;
  double bottom = 0.0;
  for (std::size_t i = 0; i < nx; ++i) {
    top = std::max(top, std::abs(value(i, nz - 1)));
    bottom = std::max(bottom, std::abs(trace[i]));
  }
  result.top_decay_ratio = k == 0 ? 0.0 : top / bottom;
  result.decayed = result.top_decay_ratio < 1e-3;
  if (!result.decayed) {
    result.warning = "mode " + std::to_string(k) + " has not decayed at the top: ratio " +
                     format_number(result.top_decay_ratio);
  }
  return result;
}

double fundamental_solution(double r, double s, int n) {
  require_s(s);
  const double exponent = static_cast<double>(n - 1) - 2.0 * s;
  if (std::abs(exponent) < 1e-14) {
    throw Unsupported("fundamental solution is logarithmic when n - 1 = 2s");
  }
  if (!(r > 0.0)) throw InvalidParameter("fundamental_solution needs r > 0");
  return std::pow(r, -exponent);
}

double fundamental_residual(double x1, double xn, double s, double h) {
  require_s(s);
  if (!(xn > 2.0 * h)) throw InvalidParameter("residual point too close to the thin plane");
  const auto phi = [s](double a, double b) { return fundamental_solution(std::hypot(a, b), s); };
  const auto second = [h](auto&& f) {
    return (-f(2.0 * h) + 16.0 * f(h) - 30.0 * f(0.0) + 16.0 * f(-h) - f(-2.0 * h)) / (12.0 * h * h);
  };
  const double d11 = second([&](double t) { return phi(x1 + t, xn); });
  const double dnn = second([&](double t) { return phi(x1, xn + t); });
  const double dn = (-phi(x1, xn + 2.0 * h) + 8.0 * phi(x1, xn + h) - 8.0 * phi(x1, xn - h) +
                     phi(x1, xn - 2.0 * h)) /
                    (12.0 * h);
  return std::pow(xn, 1.0 - 2.0 * s) * (d11 + dnn + (1.0 - 2.0 * s) / xn * dn);
}

double angular_eigen_residual(double s, const std::function<double(double)>& f) {
  require_s(s);
  constexpr double h = 1e-3;
  const auto diff = [](auto&& g, double t) {
    return (-g(t + 2.0 * h) + 8.0 * g(t + h) - 8.0 * g(t - h) + g(t - 2.0 * h)) / (12.0 * h);
  };
  const auto flux = [&](double t) { return std::pow(std::sin(t), 1.0 - 2.0 * s) * diff(f, t); };
  double worst = 0.0;
  constexpr int samples = 113;
  for (int q = 0; q < samples; ++q) {
    const double t = kPi / 16.0 + (14.0 * kPi / 16.0) * q / (samples - 1);
    const double lhs = std::pow(std::sin(t), 2.0 * s - 1.0) * diff(flux, t);
    worst = std::max(worst, std::abs(lhs - s * (s - 1.0) * f(t)));
  }
  return worst;
}

double angular_eigen_residual(double s) {
  return angular_eigen_residual(s, [s](double t) { return std::pow(std::cos(0.5 * t), 2.0 * s); });
}

}  // namespace thinfb
