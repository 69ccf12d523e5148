#pragma once

#include <vector>

#include "thinfb/elliptic.hpp"
#include "thinfb/grid.hpp"

namespace thinfb {

/// The three terms of the Weiss energy on the reflected ball B_r((x0, 0)).
struct WeissTerms {
  double bulk = 0.0;    // r^{-1} int_{B_r} |xn|^{1-2s} |grad u|^2
  double sphere = 0.0;  // -s r^{-2} int_{dB_r} |xn|^{1-2s} u^2
  double thin = 0.0;    // r^{-1} int_{B'_r} 4 chi
  double total() const { return bulk + sphere + thin; }
};

struct MonotonicityAudit {
  double c_mono = 0.0;  // tolerance model: tol_i = c_mono * h / r_i
  double h = 0.0;
  std::vector<std::size_t> violations;  // indices i with psi[i+1] < psi[i] - tol_i
  double worst_drop = 0.0;              // max over i of (psi[i] - psi[i+1]) / tol_i, 0 if none
  bool passed() const { return violations.empty(); }
};

struct WeissCurve {
  double x0 = 0.0;
  std::vector<double> radii;
  std::vector<WeissTerms> terms;
  std::vector<double> psi;
  MonotonicityAudit audit;
};

inline constexpr double kDefaultMonotonicitySlack = 0.5;

/// Psi_eps with thin density B_eps(u(., 0)). Throws InvalidRadius unless the
/// ball fits in the box.
WeissTerms weiss_eps(const Field& u, const ProblemParams& params, double x0, double r);
/// Psi with a prescribed thin density chi.
WeissTerms weiss_limit(const Field& u, const ThinField& chi, double x0, double r);

/// Curves over increasing radii with 2 max(radii) inside the box.
WeissCurve weiss_curve(const Field& u, const ProblemParams& params, double x0,
                       const std::vector<double>& radii, double c_mono = kDefaultMonotonicitySlack);
WeissCurve weiss_curve(const Field& u, const ThinField& chi, double x0,
                       const std::vector<double>& radii, double c_mono = kDefaultMonotonicitySlack);

/// int_{ra}^{rb} 2 r^{-3} int_{dB_r} |xn|^{1-2s} ((x - x0).grad u - s u)^2 dsigma dr over the
/// reflected circles; the lower bound of Psi(rb) - Psi(ra) for limit pairs.
double homogeneity_defect(const Field& u, double x0, double ra, double rb);

}  // namespace thinfb
