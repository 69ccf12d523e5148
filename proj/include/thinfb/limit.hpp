#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "thinfb/elliptic.hpp"
#include "thinfb/errors.hpp"
#include "thinfb/grid.hpp"

namespace thinfb {

/// Axis-aligned box [x_lo, x_hi] x [z_lo, z_hi] in (x1, xn).
struct Region {
  double x_lo = -0.5;
  double x_hi = 0.5;
  double z_lo = 0.0;
  double z_hi = 0.5;
};

struct HolderOptions {
  std::size_t pair_cap = 2'000'000;  // all pairs below this count
  std::size_t near_offset = 4;       // exhaustive stencil radius (nodes) when sampling
  std::size_t samples_per_decade = 50'000;
  std::uint64_t seed = 20240917;
};

/// max over node pairs in the region of |u(x) - u(y)| / |x - y|^exponent.
double holder_seminorm(const Field& u, const Region& region, double exponent,
                       const HolderOptions& options = {});

/// B_eps(u(., 0)) nodewise.
ThinField chi_extract(const Field& u, const ProblemParams& params);

/// |{delta < chi < M - delta}| / (2L), the measure taken from column widths.
double two_valuedness_defect(const ThinField& chi, double mass, double delta);

/// int beta_eps(u(., 0)) with nodal column weights.
double thin_reaction_mass(const Field& u, const ProblemParams& params);

/// Boundary points of {trace > level + 1e-12}, interpolated linearly.
std::vector<double> free_boundary(const ThinField& trace, double level = 0.0);

struct ContinuationOptions {
  Region compact;
  double delta_fraction = 0.1;  // defect threshold delta = delta_fraction * M
  /// Hoelder exponent; nonpositive means use s.
  double holder_exponent = 0.0;
  HolderOptions holder;
  /// Extra geometric eps values solved between ladder entries (not reported).
  std::size_t substeps = 0;
};

struct ContinuationReport {
  std::vector<double> eps;
  std::vector<SolveReport> solves;
  std::vector<double> cauchy;  // cauchy[j] compares step j+1 with step j
  std::vector<double> holder;
  std::vector<double> thin_mass;
  std::vector<double> defect;
  std::vector<std::string> warnings;
};

struct ContinuationResult {
  std::vector<Field> fields;
  ContinuationReport report;
};

/// Thrown when a ladder solve does not converge; carries the report so far,
/// including the failed solve.
class ContinuationFailure : public SolverBreakdown {
 public:
  ContinuationFailure(const std::string& what, ContinuationReport report)
      : SolverBreakdown(what), report_(std::move(report)) {}
  const ContinuationReport& report() const { return report_; }

 private:
  ContinuationReport report_;
};

/// Solves along a strictly decreasing eps ladder, each step warm-started from
/// the previous one (the first from `initial` or the default start).
ContinuationResult continuation(const ProblemParams& base, const std::vector<double>& ladder,
                                const ContinuationOptions& options = {},
                                const std::optional<Field>& initial = std::nullopt);

struct Annulus {
  double inner = 0.25;
  double outer = 0.75;
  std::size_t radial = 16;
  std::size_t angular = 64;
};

struct BlowupFit {
  double x0 = 0.0;
  int orientation = 1;
  Annulus annulus;
  std::vector<double> lambdas;
  std::vector<double> alpha;
  std::vector<double> residual;  // ||u_lambda - alpha P|| / ||u_lambda|| on the annulus
  double headline_alpha() const { return alpha.back(); }
};

/// Samples u(x1, xn) for xn >= 0.
using Sampler = std::function<double(double x1, double xn)>;

/// Least-squares amplitude of P(orientation * x1, xn) against
/// u(x0 + lambda x) / lambda^s on the upper half annulus, for each lambda.
/// `reach` is the largest admissible |x - (x0, 0)|.
BlowupFit blowup_fit(const Sampler& u, double s, double reach, double x0,
                     const std::vector<double>& lambdas, int orientation,
                     const Annulus& annulus = {});
/// Field version with bilinear sampling; the annulus must fit in the box.
BlowupFit blowup_fit(const Field& u, double x0, const std::vector<double>& lambdas,
                     int orientation, const Annulus& annulus = {});

/// Crossing of `level` by the trace that lies deepest inside the box, or
/// nullopt when the trace does not cross it.
std::optional<double> detect_front(const ThinField& trace, double level);

/// Front of a pre-limit trace. Near its free boundary the trace behaves like
/// a (x - x0)_+^s, so trace^{1/s} is linear there; a line fitted to the nodes
/// with level * lo <= trace <= level * hi next to the level crossing is
/// extrapolated to zero. Falls back to the crossing with fewer than two nodes.
std::optional<double> extrapolate_front(const ThinField& trace, double level, double lo = 2.0,
                                        double hi = 8.0);

/// Smallest resolvable blowup scale for the annulus inner radius:
/// 4 max(h, (eps / alpha)^{1/s}), h the larger grid step.
double blowup_floor(const Grid& grid, double eps, double alpha);

/// lambda_0 = reach / outer, halved while lambda * inner >= floor.
std::vector<double> blowup_lambda_ladder(double reach, double floor, const Annulus& annulus = {});

/// +1 if the trace carries at least as much mass right of x0 as left of it
/// (over the largest symmetric window), else -1.
int infer_orientation(const ThinField& trace, double x0);

/// r^{-1-s} int_{x0-r}^{x0+r} trace for each r.
std::vector<double> nondegeneracy(const ThinField& trace, double x0,
                                  const std::vector<double>& radii);

}  // namespace thinfb
