#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "thinfb/grid.hpp"
#include "thinfb/reaction.hpp"

namespace thinfb {

/// Dirichlet data g(x1, xn), sampled at the lateral walls and the top row.
using BoundaryData = std::function<double(double x1, double xn)>;

BoundaryData constant_boundary(double value);
/// amplitude * P(x1 - shift, xn).
BoundaryData profile_boundary(double s, double amplitude, double shift = 0.0);

struct SolverOptions {
  double residual_tol = 1e-10;
  int max_iter = 200;
  double damping_floor = 1e-10;  // smallest line-search step before giving up
};

/// Quadrature of the thin term int 2 B_eps(u(x1, 0)) dx1.
enum class ThinRule {
  lumped,  // nodal values times column widths
  trace,   // exact integral along the piecewise-linear trace
};

struct ProblemParams {
  double s = 0.5;
  double eps = 0.1;
  /// nullopt switches the thin reaction off (pure weighted Laplace problem).
  std::optional<ReactionProfile> reaction = beta_default(1.0);
  GridSpec grid;
  BoundaryData boundary = constant_boundary(0.0);
  SolverOptions solver;
  ThinRule thin_rule = ThinRule::lumped;

  /// Throws InvalidParameter on the first offending field.
  void validate() const;
};

struct SolveReport {
  int iterations = 0;
  double residual_norm = 0.0;
  double energy = 0.0;
  std::vector<double> energy_history;  // accepted iterates, starting with the initial guess
  bool converged = false;
  double min_value = 0.0;
  bool undershoot = false;  // min_value < -1e-12 * max|g|
  std::vector<std::string> warnings;
};

struct SolveResult {
  Field field;
  SolveReport report;
};

/// Symmetric stiffness K with u^T K u = sum of weighted edge energies, on all
/// nodes (boundary rows included).
Eigen::SparseMatrix<double> assemble_stiffness(const Grid& grid);

/// Applies K node by node without forming the matrix.
Field apply_stiffness(const Field& u);

/// Fills every Dirichlet node of u from g.
void impose_boundary(Field& u, const BoundaryData& g);

/// Fast solver for the interior blocks of K, diagonalized by sine modes in x1
/// and tridiagonal in xn. Also exposes the Dirichlet-to-Neumann map of the
/// thin row, S = K_TT - K_TI K_II^{-1} K_IT over the free thin nodes.
class SeparableSolver {
 public:
  explicit SeparableSolver(GridPtr grid);

  const Grid& grid() const { return *grid_; }
  std::size_t thin_unknowns() const { return m_; }

  /// Dense S on thin nodes i = 1..nx-2.
  const Eigen::MatrixXd& schur() const { return schur_; }

  /// Overwrites the interior of u (and the thin row too when thin_free)
  /// with the K-harmonic values for the remaining node values.
  void harmonic_fill(Field& u, bool thin_free) const;

 private:
  Eigen::MatrixXd solve_modes(const Eigen::MatrixXd& rhs, std::size_t first_row) const;

  GridPtr grid_;
  std::size_t m_;
  Eigen::MatrixXd sine_;  // orthonormal, symmetric
  Eigen::VectorXd lambda_;
  Eigen::MatrixXd schur_;
};

/// J = u^T K u + thin term; the lumped rule sums 2 B_eps(u) * column width.
double discrete_energy(const Field& u, const ProblemParams& params);

/// Half the gradient of discrete_energy at the free nodes, zero at Dirichlet
/// nodes. Lumped thin entries are (K u)_i + beta_eps(u_i) * column width.
Field assemble_residual(const Field& u, const ProblemParams& params);

/// Damped Newton on the thin row with the interior eliminated exactly; each
/// step is accepted only if it satisfies an Armijo decrease of J.
/// Without an initial field the start is the K-harmonic field taking g on the
/// whole boundary, thin row included (the zero-flux extension when the
/// reaction is off, which is then already the answer).
SolveResult solve(const ProblemParams& params, const std::optional<Field>& initial = std::nullopt);

/// Discrete -lim xn^{1-2s} d_n u on the thin row: (K u)_i / column width.
ThinField neumann_flux(const Field& u, const ProblemParams& params);

/// Smooth vector field with its Jacobian, J[a][b] = d psi_a / d x_b.
struct VectorField {
  std::function<std::array<double, 2>(double x1, double xn)> value;
  std::function<std::array<std::array<double, 2>, 2>(double x1, double xn)> jacobian;
};

/// phi(x) e1 with phi = exp(1 - 1/(1 - rho^2)), rho = |x - (c, 0)| / radius.
VectorField bump_field_e1(double center, double radius);

/// Reflected-ball quadrature of
///   int w [ |grad u|^2 div(w psi)/(2w) - grad u^T Dpsi grad u ] + int_thin 2 chi div psi.
/// psi must be tangential on the thin row and vanish on the outer boundary.
double domain_variation_residual(const Field& u, const ThinField& chi, const VectorField& psi);

/// True when u lives on a grid with the same s and layout as params.
bool matches_grid(const Grid& grid, const ProblemParams& params);

}  // namespace thinfb
