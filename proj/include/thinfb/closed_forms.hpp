#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace thinfb {

/// P(x) = 2^{-s} (sqrt(x1^2 + xn^2) + x1)^s. Zero on {xn = 0, x1 <= 0}.
double profile_P(double x1, double xn, double s);
/// Analytic gradient of P, finite away from the origin.
std::array<double, 2> profile_gradient(double x1, double xn, double s);

/// s^2 2^{-1-2s} sqrt(pi) (7 + 4s(s-2)) Gamma(1-s) / Gamma(7/2-s).
double c0_gamma(double s);
/// Independent tanh-sinh quadrature of the theta-integral defining c0.
double c0_quadrature(double s);
/// sqrt(2M / c0_gamma(s)).
double alpha_star(double s, double mass);

/// Energy flux of P through a small upper half circle around the tip,
///   -int_0^pi sin^{1-2s} (|grad P|^2 cos(theta) - 2 d_1 P d_r P) d theta
///   = s^2 2^{1-2s} pi / sin(pi s).
double tip_flux_constant(double s);
/// sqrt(2M / tip_flux_constant(s)): the amplitude that balances the
/// domain variation of the half-domain energy with thin mass M.
double alpha_variational(double s, double mass);

/// Normalization C of the n = 2 Poisson kernel, by quadrature of its mass.
double poisson_constant(double s);
/// Gamma(s + 1/2) / (sqrt(pi) Gamma(s)).
double poisson_constant_closed(double s);
/// C xn^{2s} / (z^2 + xn^2)^{(1+2s)/2}.
double poisson_kernel(double z, double xn, double s);

/// Trapezoid convolution of a uniformly sampled, zero-extended trace with the
/// Poisson kernel at height xn; output at the same sample abscissae.
std::vector<double> poisson_extend(const std::vector<double>& trace, double spacing, double xn,
                                   double s);

struct FluxCheckGrid {
  double half_period = 3.141592653589793;  // x1 in [-L, L), periodic
  double height = 12.0;
  std::size_t nx = 128;  // nodes per period
  std::size_t nz = 384;
};

struct FluxCheck {
  int k = 0;
  double flux_amplitude = 0.0;  // cosine coefficient of the thin-row weighted flux
  double symbol = 0.0;          // (k pi / L)^{2s}
  double rho = 0.0;             // flux_amplitude / symbol; 0 for k = 0
  double top_decay_ratio = 0.0;  // max|u(., H)| / max|u(., 0)|
  bool decayed = true;           // top_decay_ratio below 1e-3
  std::string warning;
};

/// Weighted extension of cos(k pi x1 / L) on a periodic strip with a no-flux
/// top row, and the ratio of its discrete thin flux to the fractional symbol.
/// For k = 0 the extension is constant and the flux vanishes.
FluxCheck fractional_flux_check(int k, double s, const FluxCheckGrid& grid = {});

/// |x|^{-(n-1-2s)} with unit constant. Throws Unsupported when n - 1 = 2s.
double fundamental_solution(double r, double s, int n = 2);
/// xn^{1-2s} (Laplace Phi + (1-2s)/xn d_n Phi) at (x1, xn), xn > 0, by fourth
/// order central differences of step h.
double fundamental_residual(double x1, double xn, double s, double h = 1e-3);

/// sup over theta in [pi/16, 15pi/16] of
///   |sin^{2s-1} (sin^{1-2s} f')' - s(s-1) f|,  f = cos^{2s}(theta/2).
double angular_eigen_residual(double s);
/// Same residual for an arbitrary angular function.
double angular_eigen_residual(double s, const std::function<double(double)>& f);

}  // namespace thinfb
