#include <boost/math/special_functions/gamma.hpp>
#include <numbers>

#include "doctest.h"
#include "support.hpp"
#include "thinfb/closed_forms.hpp"
#include "thinfb/errors.hpp"
#include "thinfb/weiss.hpp"

using namespace thinfb;
using std::numbers::pi;

namespace {

// int_0^{2 pi} |sin|^{1-2s}
double circle_weight(double s) {
  return 2 * std::sqrt(pi) * boost::math::tgamma(1 - s) / boost::math::tgamma(1.5 - s);
}

// M chi_{x1 > x0}; a node sitting on the jump gets M/2 so the linear
// interpolant carries the exact mass.
ThinField heaviside(const GridPtr& g, double mass, double x0) {
  std::vector<double> chi(g->nx());
  for (std::size_t i = 0; i < g->nx(); ++i) {
    const double d = g->x(i) - x0;
    chi[i] = std::abs(d) < 1e-12 ? 0.5 * mass : (d > 0 ? mass : 0.0);
  }
  return ThinField(g, chi);
}

Field scaled_profile(const GridPtr& g, double amplitude, double shift = 0.0) {
  const double s = g->s();
  return Field::from_function(g, [=](double x, double z) { return amplitude * profile_P(x - shift, z, s); });
}

}  // namespace

TEST_SUITE("weiss") {

TEST_CASE("exact pair is flat at 2M|B'_1|") {
  for (double s : {0.3, 0.5, 0.75}) {
    const GridPtr g = Grid::build(s, GridSpec{1.0, 1.0, 257, 129});
    const ThinField chi = heaviside(g, 1.0, 0.0);
    const Field u = scaled_profile(g, alpha_star(s, 1.0));
    const WeissCurve c = weiss_curve(u, chi, 0.0, {0.1, 0.2, 0.3, 0.4, 0.5});
    for (std::size_t i = 0; i < c.psi.size(); ++i) {
      CHECK(c.psi[i] == doctest::Approx(4.0).epsilon(0.02));
      CHECK(std::abs(c.terms[i].bulk + c.terms[i].sphere) <= 0.02 * c.terms[i].thin);
    }
    CHECK(c.audit.passed());
    CHECK(c.audit.c_mono == kDefaultMonotonicitySlack);
    CHECK(c.audit.h == doctest::Approx(1.0 / 128));
  }
}

TEST_CASE("any multiple of P with the Heaviside density converges to 2M|B'_1|") {
  // bulk + sphere vanishes for every amplitude, so 2 alpha* P also gives 4M.
  for (double s : {0.3, 0.6}) {
    double prev = 1.0;
    for (std::size_t n : {129, 257, 513}) {
      const GridPtr g = Grid::build(s, GridSpec{1.0, 1.0, n, (n + 1) / 2});
      const double err = std::abs(weiss_limit(scaled_profile(g, 2 * alpha_star(s, 1.0)), heaviside(g, 1.0, 0.0), 0.0, 0.1).total() - 4.0);
      CHECK(err < 0.4 * prev);
      prev = err;
    }
    CHECK(prev < 0.03);
  }
}

TEST_CASE("constant field: sphere term in closed form, no bulk") {
  for (double s : {0.25, 0.5, 0.8}) {
    const GridPtr g = Grid::build(s, GridSpec{1.0, 1.0, 129, 65});
    const Field u(g, 1.5);
    const ThinField chi(g, std::vector<double>(g->nx(), 0.0));
    for (double r : {0.1, 0.3}) {
      const WeissTerms t = weiss_limit(u, chi, 0.05, r);
      CHECK(std::abs(t.bulk) < 1e-12);
      CHECK(t.thin == 0.0);
      CHECK(t.sphere == doctest::Approx(-s * 2.25 * std::pow(r, -2 * s) * circle_weight(s)).epsilon(1e-8));
    }
  }
}

TEST_CASE("thin term of a Heaviside density with a zero field") {
  const GridPtr g = Grid::build(0.5, GridSpec{1.0, 1.0, 201, 101});
  const Field u(g, 0.0);
  // Jump halfway between nodes so the linear interpolant is symmetric about x0.
  const double x0 = 0.5 * (g->x(100) + g->x(101));
  const ThinField chi = heaviside(g, 2.0, x0);
  const WeissTerms t = weiss_limit(u, chi, x0, 0.2);
  CHECK(t.thin == doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("property: scaling identity psi(u_lambda, r) = psi(u, lambda r)") {
  testing::Gen gen(51);
  for (int trial = 0; trial < 4; ++trial) {
    const double s = gen.uniform(0.3, 0.8);
    const double lambda = gen.uniform(1.5, 2.5);
    const double b = gen.uniform(-0.5, 0.5);
    const GridPtr g = Grid::build(s, GridSpec{1.0, 1.0, 257, 129});
    // u = P + b x1 is not homogeneous; u_lambda = P + b lambda^{1-s} x1.
    const Field u = Field::from_function(g, [=](double x, double z) { return profile_P(x, z, s) + b * x; });
    const Field ul = Field::from_function(
        g, [=](double x, double z) { return profile_P(x, z, s) + b * std::pow(lambda, 1 - s) * x; });
    const ThinField chi = heaviside(g, 1.0, 0.0);
    const double r = 0.4 / lambda;
    const double lhs = weiss_limit(ul, chi, 0.0, r).total();
    const double rhs = weiss_limit(u, chi, 0.0, lambda * r).total();
    CHECK(lhs == doctest::Approx(rhs).epsilon(0.01));
  }
}

TEST_CASE("homogeneity defect") {
  for (double s : {0.3, 0.6}) {
    const GridPtr g = Grid::build(s, GridSpec{1.0, 1.0, 257, 129});
    // (r d_r u - s u)^2 = s^2 for u = 1.
    const Field one(g, 1.0);
    const double ra = 0.1, rb = 0.4;
    const double exact = s * circle_weight(s) * (std::pow(ra, -2 * s) - std::pow(rb, -2 * s));
    CHECK(homogeneity_defect(one, 0.0, ra, rb) == doctest::Approx(exact).epsilon(1e-6));
    const Field p = scaled_profile(g, 1.3);
    CHECK(homogeneity_defect(p, 0.0, ra, rb) < 1e-3 * exact);
    CHECK_THROWS_AS(homogeneity_defect(p, 0.0, 0.3, 0.2), InvalidParameter);
  }
}

TEST_CASE("curve and ball validation") {
  const GridPtr g = Grid::build(0.5, GridSpec{1.0, 1.0, 65, 33});
  const Field u = scaled_profile(g, 1.0);
  const ThinField chi = heaviside(g, 1.0, 0.0);
  CHECK_THROWS_AS(weiss_limit(u, chi, 0.0, 1.2), InvalidRadius);
  CHECK_THROWS_AS(weiss_limit(u, chi, 0.9, 0.2), InvalidRadius);
  CHECK_THROWS_AS(weiss_limit(u, chi, 0.0, -0.1), InvalidRadius);
  CHECK_THROWS_AS(weiss_curve(u, chi, 0.0, {}), InvalidParameter);
  CHECK_THROWS_AS(weiss_curve(u, chi, 0.0, {0.2, 0.1}), InvalidRadius);
  CHECK_THROWS_AS(weiss_curve(u, chi, 0.0, {0.1, 0.6}), InvalidRadius);
  CHECK_THROWS_AS(weiss_curve(u, chi, 0.0, {0.1}, -1.0), InvalidParameter);
  ProblemParams p;
  p.s = 0.5;
  p.grid = GridSpec{1.0, 1.0, 33, 17};
  CHECK_THROWS_AS(weiss_eps(u, p, 0.0, 0.1), InvalidArgument);
}

TEST_CASE("eps version uses B_eps of the trace") {
  const double s = 0.5, eps = 0.1;
  ProblemParams p;
  p.s = s;
  p.eps = eps;
  p.grid = GridSpec{1.0, 1.0, 129, 65};
  const GridPtr g = Grid::build(s, p.grid);
  const Field u = scaled_profile(g, 1.7);
  std::vector<double> chi(g->nx());
  for (std::size_t i = 0; i < g->nx(); ++i) chi[i] = B_eps(*p.reaction, eps, u(i, 0));
  const WeissTerms a = weiss_eps(u, p, 0.1, 0.3);
  const WeissTerms b = weiss_limit(u, ThinField(g, chi), 0.1, 0.3);
  CHECK(a.bulk == b.bulk);
  CHECK(a.sphere == b.sphere);
  // The eps thin term integrates B_eps along the linear trace, the limit one the
  // linear interpolant of the nodal values; they agree to the cell scale.
  CHECK(a.thin == doctest::Approx(b.thin).epsilon(0.05));
}

}
