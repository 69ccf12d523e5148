#include "thinfb/limit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "thinfb/closed_forms.hpp"
#include "thinfb/format.hpp"

namespace thinfb {
namespace {

struct NodeRange {
  std::size_t i_lo, i_hi, j_lo, j_hi;  // inclusive
  bool empty() const { return i_lo > i_hi || j_lo > j_hi; }
};

NodeRange nodes_in(const Grid& g, const Region& region) {
  const double tol = 1e-12 * std::max(g.half_width(), g.height());
  if (!(region.x_lo < region.x_hi && region.z_lo < region.z_hi)) {
    throw InvalidParameter("region must have positive extent");
  }
  if (region.x_lo < -g.half_width() - tol || region.x_hi > g.half_width() + tol ||
      region.z_lo < -tol || region.z_hi > g.height() + tol) {
    throw InvalidParameter("region leaves the grid");
  }
  const auto lo = [tol](double v, double h) {
    return static_cast<std::size_t>(std::max(0.0, std::ceil(v / h - tol / h)));
  };
  const auto hi = [tol](double v, double h) {
    return static_cast<std::size_t>(std::max(0.0, std::floor(v / h + tol / h)));
  };
  NodeRange r{lo(region.x_lo + g.half_width(), g.hx()), hi(region.x_hi + g.half_width(), g.hx()),
              lo(region.z_lo, g.hz()), hi(region.z_hi, g.hz())};
  r.i_hi = std::min(r.i_hi, g.nx() - 1);
  r.j_hi = std::min(r.j_hi, g.nz() - 1);
  return r;
}

double sup_difference(const Field& a, const Field& b, const Region& region) {
  const NodeRange r = nodes_in(a.grid(), region);
  double worst = 0.0;
  for (std::size_t j = r.j_lo; j <= r.j_hi; ++j) {
    for (std::size_t i = r.i_lo; i <= r.i_hi; ++i) worst = std::max(worst, std::abs(a(i, j) - b(i, j)));
  }
  return worst;
}

void require_ladder(const std::vector<double>& values, const std::string& what) {
  if (values.empty()) throw InvalidParameter(what + " is empty");
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!(values[k] > 0.0)) throw InvalidParameter(what + " entries must be positive");
    if (k > 0 && !(values[k] < values[k - 1])) {
      throw InvalidParameter(what + " must be strictly decreasing");
    }
  }
}

}  // namespace

double holder_seminorm(const Field& u, const Region& region, double exponent,
                       const HolderOptions& options) {
  if (!(exponent > 0.0 && exponent < 1.0)) {
    throw InvalidParameter("Hoelder exponent must lie in (0, 1), got " + format_number(exponent));
  }
  const Grid& g = u.grid();
  const NodeRange r = nodes_in(g, region);
  if (r.empty()) return 0.0;
  const std::size_t ni = r.i_hi - r.i_lo + 1;
  const std::size_t nj = r.j_hi - r.j_lo + 1;
  const std::size_t count = ni * nj;
  double worst = 0.0;
  const auto visit = [&](std::size_t ia, std::size_t ja, std::size_t ib, std::size_t jb) {
    const double dx = g.x(ib) - g.x(ia);
    const double dz = g.z(jb) - g.z(ja);
    const double dist = std::hypot(dx, dz);
    if (dist == 0.0) return;
    worst = std::max(worst, std::abs(u(ia, ja) - u(ib, jb)) / std::pow(dist, exponent));
  };

  if (count * (count - 1) / 2 <= options.pair_cap) {
    for (std::size_t a = 0; a < count; ++a) {
      for (std::size_t b = a + 1; b < count; ++b) {
        visit(r.i_lo + a % ni, r.j_lo + a / ni, r.i_lo + b % ni, r.j_lo + b / ni);
      }
    }
    return worst;
  }

  // Every pair inside a small stencil, then random pairs stratified by
  // distance decade above it.
  const auto k = static_cast<long>(options.near_offset);
  for (std::size_t ja = r.j_lo; ja <= r.j_hi; ++ja) {
    for (std::size_t ia = r.i_lo; ia <= r.i_hi; ++ia) {
      for (long dj = 0; dj <= k; ++dj) {
        for (long di = -k; di <= k; ++di) {
          if (dj == 0 && di <= 0) continue;
          const long ib = static_cast<long>(ia) + di;
          const long jb = static_cast<long>(ja) + dj;
          if (ib < static_cast<long>(r.i_lo) || ib > static_cast<long>(r.i_hi) ||
              jb > static_cast<long>(r.j_hi)) {
            continue;
          }
          visit(ia, ja, static_cast<std::size_t>(ib), static_cast<std::size_t>(jb));
        }
      }
    }
  }
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick_i(r.i_lo, r.i_hi);
  std::uniform_int_distribution<std::size_t> pick_j(r.j_lo, r.j_hi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double h = std::min(g.hx(), g.hz());
  const double diameter = std::hypot(g.x(r.i_hi) - g.x(r.i_lo), g.z(r.j_hi) - g.z(r.j_lo));
  for (double lo = h * static_cast<double>(k + 1); lo < diameter; lo *= 10.0) {
    const double hi = std::min(10.0 * lo, diameter);
    for (std::size_t n = 0; n < options.samples_per_decade; ++n) {
      const std::size_t ia = pick_i(rng);
      const std::size_t ja = pick_j(rng);
      const double len = lo * std::pow(hi / lo, unit(rng));
      const double angle = 2.0 * std::numbers::pi * unit(rng);
      const long ib = std::lround(static_cast<double>(ia) + len * std::cos(angle) / g.hx());
      const long jb = std::lround(static_cast<double>(ja) + len * std::sin(angle) / g.hz());
      if (ib < static_cast<long>(r.i_lo) || ib > static_cast<long>(r.i_hi) ||
          jb < static_cast<long>(r.j_lo) || jb > static_cast<long>(r.j_hi)) {
        continue;
      }
      visit(ia, ja, static_cast<std::size_t>(ib), static_cast<std::size_t>(jb));
    }
  }
  return worst;
}

ThinField chi_extract(const Field& u, const ProblemParams& params) {
  const Grid& g = u.grid();
  std::vector<double> chi(g.nx(), 0.0);
  if (params.reaction) {
    for (std::size_t i = 0; i < g.nx(); ++i) chi[i] = B_eps(*params.reaction, params.eps, u(i, 0));
  }
  return ThinField(u.grid_ptr(), std::move(chi));
}

double two_valuedness_defect(const ThinField& chi, double mass, double delta) {
  if (!(mass > 0.0)) throw InvalidParameter("mass must be positive");
  if (!(delta >= 0.0 && delta < 0.5 * mass)) throw InvalidParameter("delta must lie in [0, M/2)");
  const Grid& g = *chi.grid_ptr();
  double measure = 0.0;
  for (std::size_t i = 0; i < chi.size(); ++i) {
    if (chi[i] > delta && chi[i] < mass - delta) measure += g.column_width(i);
  }
  return measure / (2.0 * g.half_width());
}

double thin_reaction_mass(const Field& u, const ProblemParams& params) {
  if (!params.reaction) return 0.0;
  const Grid& g = u.grid();
  double total = 0.0;
  for (std::size_t i = 0; i < g.nx(); ++i) {
    total += beta_eps(*params.reaction, params.eps, u(i, 0)) * g.column_width(i);
  }
  return total;
}

std::vector<double> free_boundary(const ThinField& trace, double level) {
  if (!(level >= 0.0)) throw InvalidParameter("level must be nonnegative");
  const Grid& g = *trace.grid_ptr();
  const double cut = level + 1e-12;
  std::vector<double> points;
  for (std::size_t i = 0; i + 1 < trace.size(); ++i) {
    const double a = trace[i];
    const double b = trace[i + 1];
    if ((a > cut) == (b > cut)) continue;
    const double t = std::clamp((level - a) / (b - a), 0.0, 1.0);
    points.push_back(g.x(i) + t * g.hx());
  }
  return points;
}

ContinuationResult continuation(const ProblemParams& base, const std::vector<double>& ladder,
                                const ContinuationOptions& options,
                                const std::optional<Field>& initial) {
  base.validate();
  require_ladder(ladder, "eps ladder");
  const double exponent = options.holder_exponent > 0.0 ? options.holder_exponent : base.s;
  const double mass = base.reaction ? base.reaction->mass() : 0.0;

  ContinuationResult out;
  ContinuationReport& rep = out.report;
  std::optional<Field> start = initial;
  const auto run = [&](double eps) {
    ProblemParams p = base;
    p.eps = eps;
    SolveResult result = solve(p, start);
    for (const auto& w : result.report.warnings) {
      rep.warnings.push_back("eps " + format_number(eps) + ": " + w);
    }
    if (!result.report.converged) {
      rep.eps.push_back(eps);
      rep.solves.push_back(result.report);
      throw ContinuationFailure("solve at eps " + format_number(eps) + " did not converge (residual " +
                                    format_number(result.report.residual_norm) + ")",
                                rep);
    }
    start = result.field;
    return result;
  };

  for (std::size_t step = 0; step < ladder.size(); ++step) {
    if (step > 0) {
      const double prev = ladder[step - 1];
      for (std::size_t k = 1; k <= options.substeps; ++k) {
        run(prev * std::pow(ladder[step] / prev,
                            static_cast<double>(k) / static_cast<double>(options.substeps + 1)));
      }
    }
    SolveResult result = run(ladder[step]);
    ProblemParams p = base;
    p.eps = ladder[step];
    rep.eps.push_back(ladder[step]);
    rep.solves.push_back(result.report);
    rep.holder.push_back(holder_seminorm(result.field, options.compact, exponent, options.holder));
    rep.thin_mass.push_back(thin_reaction_mass(result.field, p));
    rep.defect.push_back(mass > 0.0 ? two_valuedness_defect(chi_extract(result.field, p), mass,
                                                             options.delta_fraction * mass)
                                    : 0.0);
    if (!out.fields.empty()) {
      rep.cauchy.push_back(sup_difference(out.fields.back(), result.field, options.compact));
      const std::size_t n = rep.cauchy.size();
      if (n >= 2 && rep.cauchy[n - 1] > rep.cauchy[n - 2]) {
        rep.warnings.push_back("Cauchy difference grew from " + format_number(rep.cauchy[n - 2]) +
                               " to " + format_number(rep.cauchy[n - 1]) + " at eps " +
                               format_number(ladder[step]));
      }
    }
    out.fields.push_back(std::move(result.field));
  }
  return out;
}

BlowupFit blowup_fit(const Sampler& u, double s, double reach, double x0,
                     const std::vector<double>& lambdas, int orientation, const Annulus& annulus) {
  if (!(s > 0.0 && s < 1.0)) throw InvalidParameter("s must lie in (0, 1)");
  if (orientation != 1 && orientation != -1) throw InvalidParameter("orientation must be +1 or -1");
  if (!(annulus.inner > 0.0 && annulus.outer > annulus.inner)) {
    throw InvalidParameter("annulus needs 0 < inner < outer");
  }
  if (annulus.radial == 0 || annulus.angular == 0) throw InvalidParameter("annulus has no samples");
  require_ladder(lambdas, "lambda ladder");
  if (lambdas.front() * annulus.outer > reach * (1.0 + 1e-12)) {
    throw InvalidParameter("blowup annulus of radius " + format_number(lambdas.front() * annulus.outer) +
                           " exits the domain");
  }

  BlowupFit fit;
  fit.x0 = x0;
  fit.orientation = orientation;
  fit.annulus = annulus;
  fit.lambdas = lambdas;
  const double dr = (annulus.outer - annulus.inner) / static_cast<double>(annulus.radial);
  const double dt = std::numbers::pi / static_cast<double>(annulus.angular);
  std::vector<std::array<double, 3>> samples;  // (rho, value, profile)
  samples.reserve(annulus.radial * annulus.angular);
  for (double lambda : lambdas) {
    const double scale = std::pow(lambda, -s);
    samples.clear();
    double up = 0.0, pp = 0.0;
    for (std::size_t a = 0; a < annulus.radial; ++a) {
      const double rho = annulus.inner + (static_cast<double>(a) + 0.5) * dr;
      for (std::size_t b = 0; b < annulus.angular; ++b) {
        const double theta = (static_cast<double>(b) + 0.5) * dt;
        const double c = rho * std::cos(theta);
        const double z = rho * std::sin(theta);
        const double value = scale * u(x0 + lambda * c, lambda * z);
        const double profile = profile_P(orientation * c, z, s);
        up += rho * value * profile;
        pp += rho * profile * profile;
        samples.push_back({rho, value, profile});
      }
    }
    const double alpha = up / pp;
    // Second pass: the expanded form of ||u - alpha P||^2 cancels to sqrt(eps).
    double miss = 0.0, uu = 0.0;
    for (const auto& [rho, value, profile] : samples) {
      miss += rho * (value - alpha * profile) * (value - alpha * profile);
      uu += rho * value * value;
    }
    fit.alpha.push_back(alpha);
    fit.residual.push_back(uu > 0.0 ? std::sqrt(miss / uu) : 0.0);
  }
  return fit;
}

BlowupFit blowup_fit(const Field& u, double x0, const std::vector<double>& lambdas,
                     int orientation, const Annulus& annulus) {
  const Grid& g = u.grid();
  const double reach = std::min({x0 + g.half_width(), g.half_width() - x0, g.height()});
  if (!(reach > 0.0)) throw InvalidParameter("blowup center must lie inside the thin row");
  return blowup_fit([&u](double x1, double xn) { return u.sample(x1, xn); }, g.s(), reach, x0,
                    lambdas, orientation, annulus);
}

std::optional<double> detect_front(const ThinField& trace, double level) {
  const Grid& g = *trace.grid_ptr();
  std::optional<double> best;
  double best_reach = -1.0;
  for (double x : free_boundary(trace, level)) {
    const double reach = std::min({x + g.half_width(), g.half_width() - x, g.height()});
    if (reach > best_reach) {
      best = x;
      best_reach = reach;
    }
  }
  return best;
}

std::optional<double> extrapolate_front(const ThinField& trace, double level, double lo, double hi) {
  if (!(level > 0.0) || !(lo > 1.0) || !(hi > lo)) {
    throw InvalidParameter("front extrapolation needs level > 0 and 1 < lo < hi");
  }
  const auto crossing = detect_front(trace, level);
  if (!crossing) return crossing;
  const Grid& g = *trace.grid_ptr();
  const double inv_s = 1.0 / g.s();
  const std::size_t n = g.nx();
  // First node on the positive side of the crossing, and the direction into it.
  std::size_t right = 0;
  while (right < n && g.x(right) <= *crossing) ++right;
  const bool up = right < n && trace[right] > level;
  std::ptrdiff_t i = up ? static_cast<std::ptrdiff_t>(right) : static_cast<std::ptrdiff_t>(right) - 1;
  const std::ptrdiff_t step = up ? 1 : -1;

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t count = 0;
  for (; i >= 0 && i < static_cast<std::ptrdiff_t>(n); i += step) {
    const double v = trace[static_cast<std::size_t>(i)];
    if (v < level || v > hi * level) break;
    if (v < lo * level) continue;
    const double x = g.x(static_cast<std::size_t>(i)), y = std::pow(v, inv_s);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++count;
  }
  if (count < 2) return crossing;
  const double m = static_cast<double>(count);
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  if (!(slope * step > 0.0)) return crossing;
  return (sx * slope - sy) / (m * slope);
}

double blowup_floor(const Grid& grid, double eps, double alpha) {
  if (!(eps > 0.0) || !(alpha > 0.0)) throw InvalidParameter("eps and alpha must be positive");
  return 4.0 * std::max({grid.hx(), grid.hz(), std::pow(eps / alpha, 1.0 / grid.s())});
}

std::vector<double> blowup_lambda_ladder(double reach, double floor, const Annulus& annulus) {
  if (!(reach > 0.0) || !(floor > 0.0)) throw InvalidParameter("reach and floor must be positive");
  std::vector<double> out;
  for (double lambda = reach / annulus.outer; lambda * annulus.inner >= floor; lambda *= 0.5) {
    out.push_back(lambda);
  }
  return out;
}

int infer_orientation(const ThinField& trace, double x0) {
  const Grid& g = *trace.grid_ptr();
  const double d = std::max(0.0, std::min(x0 + g.half_width(), g.half_width() - x0));
  return trace.integrate(x0, x0 + d) >= trace.integrate(x0 - d, x0) ? 1 : -1;
}

std::vector<double> nondegeneracy(const ThinField& trace, double x0,
                                  const std::vector<double>& radii) {
  const Grid& g = *trace.grid_ptr();
  const double slack = 1e-12 * g.half_width();
  std::vector<double> out;
  out.reserve(radii.size());
  for (double r : radii) {
    if (!(r > 0.0)) throw InvalidRadius("radius must be positive");
    if (x0 - r < -g.half_width() - slack || x0 + r > g.half_width() + slack) {
      throw InvalidRadius("thin ball of radius " + format_number(r) + " leaves the grid");
    }
    out.push_back(std::pow(r, -1.0 - g.s()) * trace.integrate(x0 - r, x0 + r));
  }
  return out;
}

}  // namespace thinfb
