#include "thinfb/elliptic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "thinfb/closed_forms.hpp"
#include "thinfb/errors.hpp"
#include "thinfb/format.hpp"

namespace thinfb {
namespace {

constexpr double kPi = std::numbers::pi;

// Gauss-Legendre nodes/weights on [-1, 1].
constexpr std::array<double, 3> kGL3x{-0.7745966692414834, 0.0, 0.7745966692414834};
constexpr std::array<double, 3> kGL3w{5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
constexpr std::array<double, 4> kGL4x{-0.8611363115940526, -0.3399810435848563,
                                      0.3399810435848563, 0.8611363115940526};
constexpr std::array<double, 4> kGL4w{0.3478548451374538, 0.6521451548625461,
                                      0.6521451548625461, 0.3478548451374538};

double edge_horizontal(const Grid& g, std::size_t j) { return g.horizontal_weight(j) / g.hx(); }
double edge_vertical(const Grid& g, std::size_t i, std::size_t j) {
  return g.vertical_weight(j) * g.column_width(i) / g.hz();
}

template <class Visit>
void for_each_edge(const Grid& g, Visit&& visit) {
  for (std::size_t j = 0; j < g.nz(); ++j) {
    const double c = edge_horizontal(g, j);
    for (std::size_t i = 0; i + 1 < g.nx(); ++i) visit(g.index(i, j), g.index(i + 1, j), c);
  }
  for (std::size_t j = 0; j + 1 < g.nz(); ++j) {
    for (std::size_t i = 0; i < g.nx(); ++i) {
      visit(g.index(i, j), g.index(i, j + 1), edge_vertical(g, i, j));
    }
  }
}

double quadratic_energy(const Field& u) {
  const auto v = u.values();
  double total = 0.0;
  for_each_edge(u.grid(), [&](std::size_t a, std::size_t b, double c) {
    const double d = v[b] - v[a];
    total += c * d * d;
  });
  return total;
}

double beta_at(const ProblemParams& p, double t) {
  return p.reaction ? beta_eps(*p.reaction, p.eps, t) : 0.0;
}
double beta_prime_at(const ProblemParams& p, double t) {
  return p.reaction ? beta_eps_prime(*p.reaction, p.eps, t) : 0.0;
}
double primitive_at(const ProblemParams& p, double t) {
  return p.reaction ? B_eps(*p.reaction, p.eps, t) : 0.0;
}

// Integral of beta_eps over [a, b] without forming B(b) - B(a), so that tiny
// Newton steps still produce accurate energy differences.
double reaction_increment(const ProblemParams& p, double a, double b) {
  if (!p.reaction || a == b) return 0.0;
  const double sign = b > a ? 1.0 : -1.0;
  double lo = std::min(a, b);
  const double hi = std::max(a, b);
  const std::array<double, 3> cuts{0.0, p.eps, hi};
  double total = 0.0;
  for (double cut : cuts) {
    const double right = std::min(cut, hi);
    if (right <= lo) continue;
    if (lo >= 0.0 && right <= p.eps) {
      const double half = 0.5 * (right - lo);
      const double mid = 0.5 * (right + lo);
      for (std::size_t q = 0; q < kGL4x.size(); ++q) {
        total += kGL4w[q] * half * beta_at(p, mid + half * kGL4x[q]);
      }
    }
    lo = right;
  }
  return sign * total;
}

// Points of (0, 1) where a + tau (b - a) crosses 0 or eps, appended to cuts.
void add_crossings(double a, double b, double eps, std::vector<double>& cuts) {
  if (a == b) return;
  for (double level : {0.0, eps}) {
    const double tau = (level - a) / (b - a);
    if (tau > 0.0 && tau < 1.0) cuts.push_back(tau);
  }
}

template <class F>
double piecewise_gauss(std::vector<double>& cuts, F&& f) {
  cuts.push_back(0.0);
  cuts.push_back(1.0);
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const double half = 0.5 * (cuts[c + 1] - cuts[c]);
    if (half <= 0.0) continue;
    const double mid = 0.5 * (cuts[c + 1] + cuts[c]);
    for (std::size_t q = 0; q < kGL4x.size(); ++q) total += kGL4w[q] * half * f(mid + half * kGL4x[q]);
  }
  return total;
}

// Thin term T(row) over the full thin row (nx values) under either rule.
// Residual and Hessian entries are those of T / 2.
class ThinTerm {
 public:
  ThinTerm(const ProblemParams& p, const Grid& g) : p_(p), g_(g) {}

  double energy(const Eigen::VectorXd& row) const {
    if (!p_.reaction) return 0.0;
    double total = 0.0;
    if (p_.thin_rule == ThinRule::lumped) {
      for (Eigen::Index i = 0; i < row.size(); ++i) total += 2.0 * B(row(i)) * width(i);
      return total;
    }
    for (Eigen::Index k = 0; k + 1 < row.size(); ++k) {
      const double a = row(k), b = row(k + 1);
      if (saturated(a, b)) {
        total += 2.0 * g_.hx() * p_.reaction->mass();
      } else if (!inert(a, b)) {
        std::vector<double> cuts;
        add_crossings(a, b, p_.eps, cuts);
        total += 2.0 * g_.hx() * piecewise_gauss(cuts, [&](double tau) { return B(a + tau * (b - a)); });
      }
    }
    return total;
  }

  void add_residual(const Eigen::VectorXd& row, Eigen::VectorXd& out) const {
    if (!p_.reaction) return;
    if (p_.thin_rule == ThinRule::lumped) {
      for (Eigen::Index i = 0; i < row.size(); ++i) out(i) += beta_at(p_, row(i)) * width(i);
      return;
    }
    for (Eigen::Index k = 0; k + 1 < row.size(); ++k) {
      const double a = row(k), b = row(k + 1);
      if (saturated(a, b) || inert(a, b)) continue;
      std::vector<double> cuts;
      add_crossings(a, b, p_.eps, cuts);
      std::vector<double> again = cuts;
      const auto beta = [&](double tau) { return beta_at(p_, a + tau * (b - a)); };
      out(k) += g_.hx() * piecewise_gauss(cuts, [&](double tau) { return beta(tau) * (1.0 - tau); });
      out(k + 1) += g_.hx() * piecewise_gauss(again, [&](double tau) { return beta(tau) * tau; });
    }
  }

  // diag(i) and off(i) (coupling i and i + 1) of the Hessian of T / 2.
  void hessian(const Eigen::VectorXd& row, Eigen::VectorXd& diag, Eigen::VectorXd& off) const {
    diag.setZero(row.size());
    off.setZero(row.size());
    if (!p_.reaction) return;
    if (p_.thin_rule == ThinRule::lumped) {
      for (Eigen::Index i = 0; i < row.size(); ++i) diag(i) = beta_prime_at(p_, row(i)) * width(i);
      return;
    }
    for (Eigen::Index k = 0; k + 1 < row.size(); ++k) {
      const double a = row(k), b = row(k + 1);
      if (saturated(a, b) || inert(a, b)) continue;
      std::vector<double> base;
      add_crossings(a, b, p_.eps, base);
      const auto moment = [&](auto&& weight) {
        std::vector<double> cuts = base;
        return g_.hx() * piecewise_gauss(cuts, [&](double tau) {
          return beta_prime_at(p_, a + tau * (b - a)) * weight(tau);
        });
      };
      diag(k) += moment([](double tau) { return (1.0 - tau) * (1.0 - tau); });
      diag(k + 1) += moment([](double tau) { return tau * tau; });
      off(k) += moment([](double tau) { return tau * (1.0 - tau); });
    }
  }

  // T(row + d) - T(row) without cancellation against T itself.
  double change(const Eigen::VectorXd& row, const Eigen::VectorXd& d) const {
    if (!p_.reaction) return 0.0;
    double total = 0.0;
    if (p_.thin_rule == ThinRule::lumped) {
      for (Eigen::Index i = 0; i < row.size(); ++i) {
        total += 2.0 * width(i) * reaction_increment(p_, row(i), row(i) + d(i));
      }
      return total;
    }
    for (Eigen::Index k = 0; k + 1 < row.size(); ++k) {
      const double a = row(k), b = row(k + 1);
      const double c = a + d(k), e = b + d(k + 1);
      if ((saturated(a, b) && saturated(c, e)) || (inert(a, b) && inert(c, e))) continue;
      std::vector<double> cuts;
      add_crossings(a, b, p_.eps, cuts);
      add_crossings(c, e, p_.eps, cuts);
      total += 2.0 * g_.hx() * piecewise_gauss(cuts, [&](double tau) {
        return reaction_increment(p_, a + tau * (b - a), c + tau * (e - c));
      });
    }
    return total;
  }

 private:
  double B(double t) const { return primitive_at(p_, t); }
  double width(Eigen::Index i) const { return g_.column_width(static_cast<std::size_t>(i)); }
  bool saturated(double a, double b) const { return a >= p_.eps && b >= p_.eps; }
  static bool inert(double a, double b) { return a <= 0.0 && b <= 0.0; }

  const ProblemParams& p_;
  const Grid& g_;
};

Eigen::VectorXd thin_row(const Field& u) {
  const Grid& g = u.grid();
  Eigen::VectorXd row(static_cast<Eigen::Index>(g.nx()));
  for (std::size_t i = 0; i < g.nx(); ++i) row(static_cast<Eigen::Index>(i)) = u(i, 0);
  return row;
}

void require_grid(const Field& u, const ProblemParams& params) {
  if (!matches_grid(u.grid(), params)) {
    throw InvalidArgument("field grid does not match the problem parameters");
  }
}

}  // namespace

BoundaryData constant_boundary(double value) {
  return [value](double, double) { return value; };
}

BoundaryData profile_boundary(double s, double amplitude, double shift) {
  return [=](double x1, double xn) { return amplitude * profile_P(x1 - shift, xn, s); };
}

void ProblemParams::validate() const {
  if (!(s > 0.0 && s < 1.0)) throw InvalidParameter("s must lie in (0, 1), got " + format_number(s));
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw InvalidParameter("eps must be positive, got " + format_number(eps));
  }
  if (grid.nx < 3 || grid.nz < 3) throw InvalidParameter("nx and nz must be at least 3");
  if (!(grid.half_width > 0.0) || !(grid.height > 0.0)) {
    throw InvalidParameter("L and H must be positive");
  }
  if (!(solver.residual_tol > 0.0)) throw InvalidParameter("residual_tol must be positive");
  if (solver.max_iter < 0) throw InvalidParameter("max_iter must be nonnegative");
  if (!(solver.damping_floor > 0.0 && solver.damping_floor < 1.0)) {
    throw InvalidParameter("damping_floor must lie in (0, 1)");
  }
  if (!boundary) throw InvalidParameter("boundary data is missing");
}

bool matches_grid(const Grid& grid, const ProblemParams& params) {
  const GridSpec& a = grid.spec();
  const GridSpec& b = params.grid;
  return grid.s() == params.s && a.nx == b.nx && a.nz == b.nz && a.half_width == b.half_width &&
         a.height == b.height;
}

Eigen::SparseMatrix<double> assemble_stiffness(const Grid& grid) {
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(8 * grid.size());
  for_each_edge(grid, [&](std::size_t a, std::size_t b, double c) {
    const auto ia = static_cast<int>(a);
    const auto ib = static_cast<int>(b);
    entries.emplace_back(ia, ia, c);
    entries.emplace_back(ib, ib, c);
    entries.emplace_back(ia, ib, -c);
    entries.emplace_back(ib, ia, -c);
  });
  Eigen::SparseMatrix<double> k(static_cast<int>(grid.size()), static_cast<int>(grid.size()));
  k.setFromTriplets(entries.begin(), entries.end());
  return k;
}

Field apply_stiffness(const Field& u) {
  Field out(u.grid_ptr());
  const auto v = u.values();
  auto o = out.values();
  for_each_edge(u.grid(), [&](std::size_t a, std::size_t b, double c) {
    const double flux = c * (v[b] - v[a]);
    o[a] -= flux;
    o[b] += flux;
  });
  return out;
}

void impose_boundary(Field& u, const BoundaryData& g) {
  const Grid& grid = u.grid();
  for (std::size_t j = 0; j < grid.nz(); ++j) {
    for (std::size_t i = 0; i < grid.nx(); ++i) {
      if (grid.on_dirichlet_boundary(i, j)) u(i, j) = g(grid.x(i), grid.z(j));
    }
  }
}

SeparableSolver::SeparableSolver(GridPtr grid) : grid_(std::move(grid)), m_(grid_->nx() - 2) {
  const Grid& g = *grid_;
  const auto m = static_cast<Eigen::Index>(m_);
  const double norm = std::sqrt(2.0 / static_cast<double>(m_ + 1));
  sine_.resize(m, m);
  lambda_.resize(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const double theta = kPi * static_cast<double>(k + 1) / static_cast<double>(m_ + 1);
    lambda_(k) = (2.0 - 2.0 * std::cos(theta)) / g.hx();
    for (Eigen::Index a = 0; a < m; ++a) {
      sine_(a, k) = norm * std::sin(theta * static_cast<double>(a + 1));
    }
  }

  // Backward elimination of rows nz-2 .. 1 leaves the thin-row pivot per mode.
  const double ratio = g.hx() / g.hz();
  Eigen::VectorXd sigma(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    double d = 0.0;
    for (std::size_t jj = g.nz() - 1; jj-- > 0;) {
      const double below = jj > 0 ? g.vertical_weight(jj - 1) : 0.0;
      const double diag = lambda_(k) * g.horizontal_weight(jj) + ratio * (below + g.vertical_weight(jj));
      if (jj + 2 == g.nz()) {
        d = diag;
      } else {
        const double off = ratio * g.vertical_weight(jj);
        d = diag - off * off / d;
      }
    }
    sigma(k) = d;
  }
  schur_ = sine_ * sigma.asDiagonal() * sine_;
}

Eigen::MatrixXd SeparableSolver::solve_modes(const Eigen::MatrixXd& rhs,
                                             std::size_t first_row) const {
  const Grid& g = *grid_;
  const double ratio = g.hx() / g.hz();
  const Eigen::Index rows = rhs.cols();
  Eigen::MatrixXd hat = sine_ * rhs;
  std::vector<double> diag(static_cast<std::size_t>(rows));
  std::vector<double> cprime(static_cast<std::size_t>(rows));
  for (Eigen::Index k = 0; k < hat.rows(); ++k) {
    // Thomas algorithm along xn for mode k.
    for (Eigen::Index r = 0; r < rows; ++r) {
      const std::size_t j = first_row + static_cast<std::size_t>(r);
      const double below = j > 0 ? g.vertical_weight(j - 1) : 0.0;
      diag[r] = lambda_(k) * g.horizontal_weight(j) + ratio * (below + g.vertical_weight(j));
    }
    double prev_c = 0.0;
    for (Eigen::Index r = 0; r < rows; ++r) {
      const std::size_t j = first_row + static_cast<std::size_t>(r);
      const double lower = r > 0 ? -ratio * g.vertical_weight(j - 1) : 0.0;
      const double upper = r + 1 < rows ? -ratio * g.vertical_weight(j) : 0.0;
      const double denom = diag[r] - lower * prev_c;
      cprime[r] = upper / denom;
      hat(k, r) = (hat(k, r) - lower * (r > 0 ? hat(k, r - 1) : 0.0)) / denom;
      prev_c = cprime[r];
    }
    for (Eigen::Index r = rows - 1; r-- > 0;) hat(k, r) -= cprime[r] * hat(k, r + 1);
  }
  return sine_ * hat;
}

void SeparableSolver::harmonic_fill(Field& u, bool thin_free) const {
  const Grid& g = *grid_;
  const std::size_t first = thin_free ? 0 : 1;
  const std::size_t rows = g.nz() - 1 - first;
  if (rows == 0) return;
  Field known = u;
  for (std::size_t j = first; j + 1 < g.nz(); ++j) {
    for (std::size_t i = 1; i + 1 < g.nx(); ++i) known(i, j) = 0.0;
  }
  const Field k_known = apply_stiffness(known);
  Eigen::MatrixXd rhs(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(rows));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 1; i + 1 < g.nx(); ++i) rhs(i - 1, r) = -k_known(i, first + r);
  }
  const Eigen::MatrixXd sol = solve_modes(rhs, first);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 1; i + 1 < g.nx(); ++i) u(i, first + r) = sol(i - 1, r);
  }
}

double discrete_energy(const Field& u, const ProblemParams& params) {
  require_grid(u, params);
  return quadratic_energy(u) + ThinTerm(params, u.grid()).energy(thin_row(u));
}

Field assemble_residual(const Field& u, const ProblemParams& params) {
  require_grid(u, params);
  const Grid& g = u.grid();
  Field r = apply_stiffness(u);
  Eigen::VectorXd thin = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.nx()));
  ThinTerm(params, g).add_residual(thin_row(u), thin);
  for (std::size_t i = 0; i < g.nx(); ++i) r(i, 0) += thin(static_cast<Eigen::Index>(i));
  for (std::size_t j = 0; j < g.nz(); ++j) {
    for (std::size_t i = 0; i < g.nx(); ++i) {
      if (g.on_dirichlet_boundary(i, j)) r(i, j) = 0.0;
    }
  }
  return r;
}

ThinField neumann_flux(const Field& u, const ProblemParams& params) {
  require_grid(u, params);
  const Grid& g = u.grid();
  const Field ku = apply_stiffness(u);
  std::vector<double> flux(g.nx());
  for (std::size_t i = 0; i < g.nx(); ++i) flux[i] = ku(i, 0) / g.column_width(i);
  return ThinField(u.grid_ptr(), std::move(flux));
}

namespace {

// Reduced problem on the free thin nodes t (thin row = [g_0, t, g_end]):
//   J(t) = J0 + 2 t.R0 + t^T S t + T(row),  r(t) = S t + R0 + grad T(row) / 2.
struct ThinProblem {
  const Eigen::MatrixXd& S;
  ThinTerm thin;
  Eigen::VectorXd R0;
  double J0 = 0.0;
  double left = 0.0;
  double right = 0.0;

  Eigen::VectorXd row(const Eigen::VectorXd& t) const {
    Eigen::VectorXd full(t.size() + 2);
    full << left, t, right;
    return full;
  }

  Eigen::VectorXd residual(const Eigen::VectorXd& t) const {
    Eigen::VectorXd extra = Eigen::VectorXd::Zero(t.size() + 2);
    thin.add_residual(row(t), extra);
    return S * t + R0 + extra.segment(1, t.size());
  }

  double energy(const Eigen::VectorXd& t) const {
    return J0 + 2.0 * R0.dot(t) + t.dot(S * t) + thin.energy(row(t));
  }

  double energy_change(const Eigen::VectorXd& t, const Eigen::VectorXd& d) const {
    Eigen::VectorXd dd = Eigen::VectorXd::Zero(d.size() + 2);
    dd.segment(1, d.size()) = d;
    return 2.0 * d.dot(S * t + R0) + d.dot(S * d) + thin.change(row(t), dd);
  }

  // Thin Hessian restricted to the free nodes.
  void thin_hessian(const Eigen::VectorXd& t, Eigen::VectorXd& diag, Eigen::VectorXd& off) const {
    Eigen::VectorXd d, o;
    thin.hessian(row(t), d, o);
    diag = d.segment(1, t.size());
    off = o.segment(1, t.size());  // off(i) couples free nodes i and i + 1
  }
};

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

SolveResult solve(const ProblemParams& params, const std::optional<Field>& initial) {
  params.validate();
  const GridPtr grid = Grid::build(params.s, params.grid);
  const Grid& g = *grid;

  Field v0(grid);
  impose_boundary(v0, params.boundary);
  double gmax = 0.0;
  for (std::size_t j = 0; j < g.nz(); ++j) {
    for (std::size_t i = 0; i < g.nx(); ++i) {
      if (!g.on_dirichlet_boundary(i, j)) continue;
      const double value = v0(i, j);
      if (!std::isfinite(value) || value < 0.0) {
        throw InvalidParameter("boundary data must be finite and nonnegative; g(" +
                               format_number(g.x(i)) + ", " + format_number(g.z(j)) +
                               ") = " + format_number(value));
      }
      gmax = std::max(gmax, value);
    }
  }

  const SeparableSolver separable(grid);
  separable.harmonic_fill(v0, false);
  const std::size_t m = separable.thin_unknowns();
  const Field kv0 = apply_stiffness(v0);

  ThinProblem problem{separable.schur(), ThinTerm(params, g), Eigen::VectorXd(m),
                      quadratic_energy(v0), v0(0, 0), v0(g.nx() - 1, 0)};
  for (std::size_t i = 0; i < m; ++i) problem.R0(i) = kv0(i + 1, 0);

  Eigen::VectorXd t(m);
  if (initial) {
    if (!matches_grid(initial->grid(), params)) {
      throw InvalidArgument("initial field grid does not match the problem parameters");
    }
    for (std::size_t i = 0; i < m; ++i) t(i) = (*initial)(i + 1, 0);
  } else if (!params.reaction) {
    t = problem.S.llt().solve(-problem.R0);
  } else {
    // Harmonic extension of g with g also imposed on the thin row. Starting
    // from the zero-flux extension would stop at once whenever its trace
    // clears eps, which is a critical point without a free boundary.
    for (std::size_t i = 0; i < m; ++i) t(i) = params.boundary(g.x(i + 1), 0.0);
  }

  SolveReport report;
  Eigen::VectorXd r = problem.residual(t);
  double energy = problem.energy(t);
  report.energy_history.push_back(energy);

  const double tol = params.solver.residual_tol;
  while (r.norm() > tol && report.iterations < params.solver.max_iter) {
    Eigen::MatrixXd h = problem.S;
    Eigen::VectorXd thin_diag, thin_off;
    problem.thin_hessian(t, thin_diag, thin_off);
    h.diagonal() += thin_diag;
    for (std::size_t i = 0; i + 1 < m; ++i) {
      h(i, i + 1) += thin_off(i);
      h(i + 1, i) += thin_off(i);
    }
    // S plus a nonnegative diagonal stays positive definite.
    const Eigen::VectorXd clamped_diag = thin_diag.cwiseMax(0.0);
    auto convex_direction = [&]() -> Eigen::VectorXd {
      Eigen::MatrixXd hc = problem.S;
      hc.diagonal() += clamped_diag;
      return hc.llt().solve(-r);
    };

    std::vector<Eigen::VectorXd> directions;
    Eigen::VectorXd newton = h.partialPivLu().solve(-r);
    if (!all_finite(newton)) throw SolverBreakdown("non-finite Newton step");
    if (newton.dot(r) < 0.0) directions.push_back(std::move(newton));
    directions.push_back(convex_direction());
    if (!all_finite(directions.back())) throw SolverBreakdown("non-finite descent step");

    bool accepted = false;
    for (const auto& d : directions) {
      const double slope = 2.0 * r.dot(d);
      for (double step = 1.0; step >= params.solver.damping_floor; step *= 0.5) {
        const Eigen::VectorXd trial = step * d;
        const double change = problem.energy_change(t, trial);
        if (!std::isfinite(change)) throw SolverBreakdown("non-finite energy in line search");
        if (change <= 1e-4 * step * slope) {
          t += trial;
          energy += change;
          accepted = true;
          break;
        }
      }
      if (accepted) break;
    }
    if (!accepted) {
      report.warnings.push_back("line search stalled at residual " + format_number(r.norm()));
      break;
    }
    ++report.iterations;
    report.energy_history.push_back(energy);
    r = problem.residual(t);
    if (!all_finite(r)) throw SolverBreakdown("non-finite residual");
  }

  Field u = v0;
  for (std::size_t i = 0; i < m; ++i) u(i + 1, 0) = t(i);
  separable.harmonic_fill(u, false);
  for (double value : u.values()) {
    if (!std::isfinite(value)) throw SolverBreakdown("non-finite value in solution field");
  }

  const Field full = assemble_residual(u, params);
  double sq = 0.0;
  for (double value : full.values()) sq += value * value;
  report.residual_norm = std::sqrt(sq);
  report.energy = discrete_energy(u, params);
  report.converged = report.residual_norm <= tol;
  if (!report.converged && r.norm() <= tol) {
    report.warnings.push_back("thin residual converged but the reconstructed field residual is " +
                              format_number(report.residual_norm));
  }
  if (!report.converged && report.iterations >= params.solver.max_iter) {
    report.warnings.push_back("max_iter reached");
  }
  const auto values = u.values();
  report.min_value = *std::min_element(values.begin(), values.end());
  if (report.min_value < -1e-12 * std::max(gmax, 1.0)) {
    report.undershoot = true;
    report.warnings.push_back("negative undershoot " + format_number(report.min_value));
  }
  return {std::move(u), std::move(report)};
}

VectorField bump_field_e1(double center, double radius) {
  if (!(radius > 0.0)) throw InvalidParameter("bump radius must be positive");
  VectorField field;
  field.value = [=](double x1, double xn) -> std::array<double, 2> {
    const double q = ((x1 - center) * (x1 - center) + xn * xn) / (radius * radius);
    if (q >= 1.0) return {0.0, 0.0};
    return {std::exp(1.0 - 1.0 / (1.0 - q)), 0.0};
  };
  field.jacobian = [=](double x1, double xn) -> std::array<std::array<double, 2>, 2> {
    const double q = ((x1 - center) * (x1 - center) + xn * xn) / (radius * radius);
    if (q >= 1.0) return {{{0.0, 0.0}, {0.0, 0.0}}};
    const double phi = std::exp(1.0 - 1.0 / (1.0 - q));
    const double factor = -2.0 * phi / (radius * radius * (1.0 - q) * (1.0 - q));
    return {{{factor * (x1 - center), factor * xn}, {0.0, 0.0}}};
  };
  return field;
}

double domain_variation_residual(const Field& u, const ThinField& chi, const VectorField& psi) {
  const Grid& g = u.grid();
  if (&chi.grid() != &g && !(chi.grid().nx() == g.nx() && chi.grid().half_width() == g.half_width())) {
    throw InvalidArgument("chi does not live on the thin row of u's grid");
  }
  double scale = 0.0;
  for (std::size_t i = 0; i < g.nx(); ++i) {
    const auto v = psi.value(g.x(i), 0.0);
    scale = std::max({scale, std::abs(v[0]), std::abs(v[1])});
  }
  for (std::size_t i = 0; i < g.nx(); ++i) {
    if (std::abs(psi.value(g.x(i), 0.0)[1]) > 1e-12 * (1.0 + scale)) {
      throw InvalidArgument("psi is not tangential on the thin row at x1 = " + format_number(g.x(i)));
    }
  }
  for (std::size_t j = 0; j < g.nz(); ++j) {
    for (std::size_t i = 0; i < g.nx(); ++i) {
      if (!g.on_dirichlet_boundary(i, j)) continue;
      const auto v = psi.value(g.x(i), g.z(j));
      if (std::abs(v[0]) + std::abs(v[1]) > 1e-12 * (1.0 + scale)) {
        throw InvalidArgument("psi must vanish on the outer boundary");
      }
    }
  }

  const double s = g.s();
  const double p = 1.0 - 2.0 * s;
  const double hx = g.hx();
  const double hz = g.hz();

  // Two-point Gauss rule for the weight t^{1-2s} on [0, 1] (first cell row).
  const double mu0 = 1.0 / (p + 1.0), mu1 = 1.0 / (p + 2.0), mu2 = 1.0 / (p + 3.0),
               mu3 = 1.0 / (p + 4.0);
  const double det = mu1 * mu1 - mu0 * mu2;
  const double c1 = (mu0 * mu3 - mu1 * mu2) / det;
  const double c0 = (mu2 * mu2 - mu1 * mu3) / det;
  const double disc = std::sqrt(c1 * c1 / 4.0 - c0);
  const std::array<double, 2> jac_x{-c1 / 2.0 - disc, -c1 / 2.0 + disc};
  const std::array<double, 2> jac_w{(mu1 - jac_x[1] * mu0) / (jac_x[0] - jac_x[1]),
                                    (mu1 - jac_x[0] * mu0) / (jac_x[1] - jac_x[0])};
  const double row0_scale = std::pow(hz, p + 1.0);

  double bulk = 0.0;
  for (std::size_t j = 0; j + 1 < g.nz(); ++j) {
    std::vector<std::pair<double, double>> zrule;  // (tau in [0,1], weight incl. w(z) dz)
    if (j == 0) {
      for (int q = 0; q < 2; ++q) zrule.emplace_back(jac_x[q], jac_w[q] * row0_scale);
    } else {
      for (int q = 0; q < 3; ++q) {
        const double tau = 0.5 * (1.0 + kGL3x[q]);
        const double z = g.z(j) + tau * hz;
        zrule.emplace_back(tau, 0.5 * hz * kGL3w[q] * std::pow(z, p));
      }
    }
    for (std::size_t i = 0; i + 1 < g.nx(); ++i) {
      const double u00 = u(i, j), u10 = u(i + 1, j), u01 = u(i, j + 1), u11 = u(i + 1, j + 1);
      for (int qx = 0; qx < 3; ++qx) {
        const double xi = 0.5 * (1.0 + kGL3x[qx]);
        const double x = g.x(i) + xi * hx;
        const double wx = 0.5 * hx * kGL3w[qx];
        const double dn = ((1.0 - xi) * (u01 - u00) + xi * (u11 - u10)) / hz;
        for (const auto& [tau, wz] : zrule) {
          const double z = g.z(j) + tau * hz;
          const double d1 = ((1.0 - tau) * (u10 - u00) + tau * (u11 - u01)) / hx;
          const auto jac = psi.jacobian(x, z);
          const double div = jac[0][0] + jac[1][1];
          const double grad2 = d1 * d1 + dn * dn;
          const double stress = d1 * (jac[0][0] * d1 + jac[0][1] * dn) +
                                dn * (jac[1][0] * d1 + jac[1][1] * dn);
          // psi_n d_n w / w = (1-2s) psi_n / xn.
          const double weight_term = p * psi.value(x, z)[1] / z;
          bulk += wx * wz * (0.5 * grad2 * (div + weight_term) - stress);
        }
      }
    }
  }

  double thin = 0.0;
  for (std::size_t i = 0; i + 1 < g.nx(); ++i) {
    for (int q = 0; q < 3; ++q) {
      const double xi = 0.5 * (1.0 + kGL3x[q]);
      const double x = g.x(i) + xi * hx;
      const double c = (1.0 - xi) * chi[i] + xi * chi[i + 1];
      thin += 0.5 * hx * kGL3w[q] * 2.0 * c * psi.jacobian(x, 0.0)[0][0];
    }
  }
  return 2.0 * bulk + thin;
}

}  // namespace thinfb
