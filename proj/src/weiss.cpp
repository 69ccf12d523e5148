#include "thinfb/weiss.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <utility>

#include "thinfb/errors.hpp"
#include "thinfb/format.hpp"

namespace thinfb {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::array<double, 4> kGLx{-0.8611363115940526, -0.3399810435848563,
                                     0.3399810435848563, 0.8611363115940526};
constexpr std::array<double, 4> kGLw{0.3478548451374538, 0.6521451548625461,
                                     0.6521451548625461, 0.3478548451374538};

template <class F>
double gauss(F&& f, double a, double b) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double total = 0.0;
  for (std::size_t q = 0; q < kGLx.size(); ++q) total += kGLw[q] * f(mid + half * kGLx[q]);
  return half * total;
}

double grid_step(const Grid& g) { return std::max(g.hx(), g.hz()); }

double distance_to_box(const Grid& g, double x0) {
  return std::min({x0 + g.half_width(), g.half_width() - x0, g.height()});
}

void require_ball(const Grid& g, double x0, double r) {
  const double slack = 1e-12 * std::max(g.half_width(), g.height());
  if (!(r > 0.0)) throw InvalidRadius("radius must be positive, got " + format_number(r));
  if (r > distance_to_box(g, x0) + slack) {
    throw InvalidRadius("ball of radius " + format_number(r) + " around x1 = " + format_number(x0) +
                        " leaves the grid");
  }
}

double safe_face_weight(double s, double a, double b) {
  return b > a ? face_weight(s, a, b) : 0.0;
}

// Weighted measure of {(x, z) in cell : (x - x0)^2 + z^2 <= r^2} over the
// weighted measure of the cell.
double disk_fraction(const Grid& g, double x0, double r, std::size_t i, std::size_t j) {
  const double xa = g.x(i), xb = g.x(i + 1), za = g.z(j), zb = g.z(j + 1);
  const double nearx = std::clamp(x0, xa, xb) - x0;
  const double near = std::hypot(nearx, za);
  const double farx = std::max(std::abs(xa - x0), std::abs(xb - x0));
  const double far = std::hypot(farx, zb);
  if (far <= r) return 1.0;
  if (near >= r) return 0.0;

  std::vector<double> cuts{xa, xb};
  for (double level : {za, zb}) {
    if (level < r) {
      const double w = std::sqrt(r * r - level * level);
      cuts.push_back(x0 - w);
      cuts.push_back(x0 + w);
    }
  }
  cuts.push_back(x0 - r);
  cuts.push_back(x0 + r);
  std::sort(cuts.begin(), cuts.end());
  const double s = g.s();
  const auto height = [&](double x) {
    const double d = r * r - (x - x0) * (x - x0);
    const double zc = d > 0.0 ? std::sqrt(d) : 0.0;
    return safe_face_weight(s, za, std::clamp(zc, za, zb));
  };
  double inside = 0.0;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const double lo = std::max(cuts[c], xa);
    const double hi = std::min(cuts[c + 1], xb);
    if (hi > lo) inside += gauss(height, lo, hi);
  }
  return inside / ((xb - xa) * face_weight(s, za, zb));
}

// Share of the quadratic edge energy owned by cell (i, j); the shares sum to
// u^T K u exactly.
double cell_energy(const Field& u, std::size_t i, std::size_t j) {
  const Grid& g = u.grid();
  const double s = g.s();
  const double za = g.z(j), zb = g.z(j + 1);
  const double zm = 0.5 * (za + zb);
  const double dbot = u(i + 1, j) - u(i, j);
  const double dtop = u(i + 1, j + 1) - u(i, j + 1);
  const double dleft = u(i, j + 1) - u(i, j);
  const double dright = u(i + 1, j + 1) - u(i + 1, j);
  return (face_weight(s, za, zm) * dbot * dbot + face_weight(s, zm, zb) * dtop * dtop) / g.hx() +
         g.vertical_weight(j) * 0.5 * g.hx() / g.hz() * (dleft * dleft + dright * dright);
}

double bulk_term(const Field& u, double x0, double r) {
  const Grid& g = u.grid();
  const auto ilo = static_cast<std::size_t>(
      std::max(0.0, std::floor((x0 - r + g.half_width()) / g.hx()) - 1.0));
  const auto ihi = std::min(g.nx() - 1, static_cast<std::size_t>(
                                             std::ceil((x0 + r + g.half_width()) / g.hx()) + 1.0));
  const auto jhi = std::min(g.nz() - 1, static_cast<std::size_t>(std::ceil(r / g.hz()) + 1.0));
  double total = 0.0;
  for (std::size_t j = 0; j < jhi; ++j) {
    for (std::size_t i = ilo; i < ihi; ++i) {
      const double frac = disk_fraction(g, x0, r, i, j);
      if (frac > 0.0) total += frac * cell_energy(u, i, j);
    }
  }
  return 2.0 * total / r;
}

// int_0^pi sin^{1-2s}(theta) f(theta) d theta with theta = (pi/2) t^p measured
// from the nearer endpoint, p = 1/(2-2s), which cancels the endpoint
// behaviour of the weight.
template <class F>
double weighted_arc(double s, std::size_t panels, F&& f) {
  const double p = 1.0 / (2.0 - 2.0 * s);
  double total = 0.0;
  for (int side = 0; side < 2; ++side) {
    const auto integrand = [&](double t) {
      if (t <= 0.0) return 0.0;
      const double phi = 0.5 * kPi * std::pow(t, p);
      const double jac = 0.5 * kPi * p * std::pow(t, p - 1.0);
      const double theta = side == 0 ? phi : kPi - phi;
      return std::pow(std::sin(phi), 1.0 - 2.0 * s) * jac * f(theta);
    };
    for (std::size_t k = 0; k < panels; ++k) {
      total += gauss(integrand, static_cast<double>(k) / panels,
                     static_cast<double>(k + 1) / panels);
    }
  }
  return total;
}

std::size_t arc_panels(const Grid& g, double r) {
  return std::max<std::size_t>(32, static_cast<std::size_t>(std::ceil(2.0 * kPi * r / grid_step(g))));
}

double sphere_term(const Field& u, double x0, double r) {
  const Grid& g = u.grid();
  const double s = g.s();
  const double integral = weighted_arc(s, arc_panels(g, r), [&](double theta) {
    const double v = u.sample(x0 + r * std::cos(theta), r * std::sin(theta));
    return v * v;
  });
  return -2.0 * s * std::pow(r, -2.0 * s) * integral;
}

// int over [a, b] of B_eps applied to the piecewise-linear trace.
double reaction_mass(const Field& u, const ProblemParams& params, double a, double b) {
  if (!params.reaction) return 0.0;
  const Grid& g = u.grid();
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < g.nx(); ++i) {
    const double xa = g.x(i), xb = g.x(i + 1);
    const double lo = std::max(a, xa), hi = std::min(b, xb);
    if (hi <= lo) continue;
    const double ua = u(i, 0), ub = u(i + 1, 0);
    const auto trace = [&](double x) { return ua + (ub - ua) * (x - xa) / (xb - xa); };
    std::vector<double> cuts{lo, hi};
    if (ub != ua) {
      for (double level : {0.0, params.eps}) {
        const double x = xa + (level - ua) / (ub - ua) * (xb - xa);
        if (x > lo && x < hi) cuts.push_back(x);
      }
    }
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      total += gauss([&](double x) { return B_eps(*params.reaction, params.eps, trace(x)); },
                     cuts[c], cuts[c + 1]);
    }
  }
  return total;
}

// The cut-cell energy carries an O(h) error from the cells around the
// singular point at the centre. When the node counts allow it, the same data
// restricted to every other node gives the 2h value and the two are
// extrapolated.
class BulkRule {
 public:
  explicit BulkRule(const Field& u) : fine_(u) {
    const Grid& g = u.grid();
    if (g.nx() % 2 == 1 && g.nz() % 2 == 1 && g.nx() >= 5 && g.nz() >= 5) {
      const GridSpec spec{g.half_width(), g.height(), (g.nx() + 1) / 2, (g.nz() + 1) / 2};
      Field coarse(Grid::build(g.s(), spec));
      for (std::size_t j = 0; j < spec.nz; ++j) {
        for (std::size_t i = 0; i < spec.nx; ++i) coarse(i, j) = u(2 * i, 2 * j);
      }
      coarse_.emplace(std::move(coarse));
    }
  }

  double operator()(double x0, double r) const {
    const double fine = bulk_term(fine_, x0, r);
    if (!coarse_) return fine;
    return 2.0 * fine - bulk_term(*coarse_, x0, r);
  }

 private:
  const Field& fine_;
  std::optional<Field> coarse_;
};

WeissTerms quadratic_terms(const Field& u, const BulkRule& bulk, double x0, double r) {
  require_ball(u.grid(), x0, r);
  WeissTerms t;
  t.bulk = bulk(x0, r);
  t.sphere = sphere_term(u, x0, r);
  return t;
}

WeissTerms eps_terms(const Field& u, const BulkRule& bulk, const ProblemParams& params, double x0,
                     double r) {
  if (!matches_grid(u.grid(), params)) {
    throw InvalidArgument("field grid does not match the problem parameters");
  }
  WeissTerms t = quadratic_terms(u, bulk, x0, r);
  t.thin = 4.0 * reaction_mass(u, params, x0 - r, x0 + r) / r;
  return t;
}

WeissTerms limit_terms(const Field& u, const BulkRule& bulk, const ThinField& chi, double x0,
                       double r) {
  if (chi.size() != u.grid().nx()) throw InvalidArgument("chi length must equal nx");
  WeissTerms t = quadratic_terms(u, bulk, x0, r);
  t.thin = 4.0 * chi.integrate(x0 - r, x0 + r) / r;
  return t;
}

template <class Terms>
WeissCurve make_curve(const Grid& g, double x0, const std::vector<double>& radii, double c_mono,
                      Terms&& terms) {
  if (radii.empty()) throw InvalidParameter("radius list is empty");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0)) throw InvalidRadius("radii must be positive");
    if (i > 0 && !(radii[i] > radii[i - 1])) throw InvalidRadius("radii must be strictly increasing");
  }
  if (2.0 * radii.back() > distance_to_box(g, x0) * (1.0 + 1e-12)) {
    throw InvalidRadius("twice the largest radius must fit inside the grid around x1 = " +
                        format_number(x0));
  }
  if (!(c_mono >= 0.0)) throw InvalidParameter("c_mono must be nonnegative");
  WeissCurve curve;
  curve.x0 = x0;
  curve.radii = radii;
  for (double r : radii) {
    curve.terms.push_back(terms(r));
    curve.psi.push_back(curve.terms.back().total());
  }
  curve.audit.c_mono = c_mono;
  curve.audit.h = grid_step(g);
  for (std::size_t i = 0; i + 1 < radii.size(); ++i) {
    const double tol = c_mono * curve.audit.h / radii[i];
    const double drop = curve.psi[i] - curve.psi[i + 1];
    if (drop > tol) curve.audit.violations.push_back(i);
    if (drop > 0.0) {
      curve.audit.worst_drop = std::max(curve.audit.worst_drop, tol > 0.0 ? drop / tol : INFINITY);
    }
  }
  return curve;
}

}  // namespace

WeissTerms weiss_eps(const Field& u, const ProblemParams& params, double x0, double r) {
  return eps_terms(u, BulkRule(u), params, x0, r);
}

WeissTerms weiss_limit(const Field& u, const ThinField& chi, double x0, double r) {
  return limit_terms(u, BulkRule(u), chi, x0, r);
}

WeissCurve weiss_curve(const Field& u, const ProblemParams& params, double x0,
                       const std::vector<double>& radii, double c_mono) {
  const BulkRule bulk(u);
  return make_curve(u.grid(), x0, radii, c_mono,
                    [&](double r) { return eps_terms(u, bulk, params, x0, r); });
}

WeissCurve weiss_curve(const Field& u, const ThinField& chi, double x0,
                       const std::vector<double>& radii, double c_mono) {
  const BulkRule bulk(u);
  return make_curve(u.grid(), x0, radii, c_mono,
                    [&](double r) { return limit_terms(u, bulk, chi, x0, r); });
}

double homogeneity_defect(const Field& u, double x0, double ra, double rb) {
  const Grid& g = u.grid();
  if (!(ra > 0.0 && rb > ra)) throw InvalidParameter("need 0 < ra < rb");
  require_ball(g, x0, rb);
  const double s = g.s();
  const auto shell = [&](double r) {
    const double integral = weighted_arc(s, arc_panels(g, r), [&](double theta) {
      const double c = std::cos(theta), sn = std::sin(theta);
      const double x = x0 + r * c, z = r * sn;
      const auto grad = u.gradient(x, z);
      const double euler = r * (c * grad[0] + sn * grad[1]) - s * u.sample(x, z);
      return euler * euler;
    });
    // Reflected circle: twice the upper half; |xn|^{1-2s} = r^{1-2s} sin^{1-2s}.
    return 2.0 / (r * r * r) * 2.0 * std::pow(r, 2.0 - 2.0 * s) * integral;
  };
  const auto panels = std::max<std::size_t>(8, static_cast<std::size_t>(std::ceil((rb - ra) / grid_step(g))));
  double total = 0.0;
  for (std::size_t k = 0; k < panels; ++k) {
    const double a = ra + (rb - ra) * static_cast<double>(k) / panels;
    const double b = ra + (rb - ra) * static_cast<double>(k + 1) / panels;
    total += gauss(shell, a, b);
  }
  return total;
}

}  // namespace thinfb
