// Acceptance run: one PASS/FAIL line per criterion, INFO lines for context.
// Exits nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "thinfb/cli.hpp"
#include "thinfb/closed_forms.hpp"
#include "thinfb/elliptic.hpp"
#include "thinfb/limit.hpp"
#include "thinfb/weiss.hpp"

using namespace thinfb;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(double v, int digits = 6) {
  std::ostringstream o;
  o.precision(digits);
  o << v;
  return o.str();
}

void info(int id, const std::string& text) { std::printf("  INFO C%d %s\n", id, text.c_str()); }

int failures = 0;
constexpr double mass = 1.0;

void criterion(int id, const char* title, double budget_s, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.require(false, std::string("exception: ") + e.what());
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.require(dt < budget_s, "runtime " + fmt(dt, 3) + " s over " + fmt(budget_s, 3) + " s");
  if (!o.pass) ++failures;
  std::printf("C%-2d %s  %s  (%.2f s)%s%s\n", id, o.pass ? "PASS" : "FAIL", title, dt,
              o.detail.empty() ? "" : "  ", o.detail.c_str());
  std::fflush(stdout);
}

fs::path workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "thinfb_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

// Runs the CLI in a fresh directory with a config text; returns the exit code.
int pipeline(const std::string& name, const std::string& toml, const std::vector<std::string>& tail) {
  const fs::path dir = workdir() / name;
  fs::create_directories(dir);
  std::ofstream(dir / "config.toml") << toml;
  std::vector<std::string> args{"--config", (dir / "config.toml").string(), "--out-dir", dir.string()};
  args.insert(args.end(), tail.begin(), tail.end());
  std::ostringstream out, err;
  return cli::run(args, out, err);
}

// M chi_{x1 > x0}, the node on the jump carrying M/2.
ThinField heaviside(const GridPtr& g, double mass, double x0) {
  std::vector<double> chi(g->nx());
  for (std::size_t i = 0; i < g->nx(); ++i) {
    const double d = g->x(i) - x0;
    chi[i] = std::abs(d) < 1e-12 ? 0.5 * mass : (d > 0 ? mass : 0.0);
  }
  return ThinField(g, chi);
}

Field profile_field(const GridPtr& g, double amplitude) {
  const double s = g->s();
  return Field::from_function(g, [=](double x, double z) { return amplitude * profile_P(x, z, s); });
}

GridPtr grid(double s, std::size_t cells) { return Grid::build(s, GridSpec{1.0, 1.0, cells + 1, cells / 2 + 1}); }

// Max of |K P| / (hx hz) over nodes of [-0.5, 0.5] x [0.25, 0.75].
double interior_operator_residual(double s, std::size_t cells) {
  const GridPtr g = grid(s, cells);
  const Field kp = apply_stiffness(profile_field(g, 1.0));
  double worst = 0.0;
  for (std::size_t j = 0; j < g->nz(); ++j) {
    if (g->z(j) < 0.25 - 1e-12 || g->z(j) > 0.75 + 1e-12) continue;
    for (std::size_t i = 0; i < g->nx(); ++i) {
      if (std::abs(g->x(i)) > 0.5 + 1e-12) continue;
      worst = std::max(worst, std::abs(kp(i, j)) / (g->hx() * g->hz()));
    }
  }
  return worst;
}

// Domain-variation residual of (amplitude P, chi) with a unit bump at the origin.
double dv(double s, std::size_t cells, double amplitude, bool heaviside_chi) {
  const GridPtr g = grid(s, cells);
  const ThinField chi = heaviside_chi ? heaviside(g, 1.0, 0.0) : ThinField(g, std::vector<double>(g->nx(), 1.0));
  return domain_variation_residual(profile_field(g, amplitude), chi, bump_field_e1(0.0, 0.5));
}

// Richardson limit from three successive halvings, with the observed order.
std::pair<double, double> richardson(double a, double b, double c) {
  const double ratio = (a - b) / (b - c);
  if (!(ratio > 1.0)) return {c, 0.0};
  const double order = std::log2(ratio);
  return {c - (b - c) / (ratio - 1.0), order};
}

std::string reference_toml(double s, const std::string& ladder) {
  return "[problem]\ns = " + fmt(s, 17) + "\nmass = 1.0\nnx = 513\nnz = 257\nboundary = \"scaled-profile\"\n"
         "[continuation]\nladder = " + ladder + "\n[weiss]\ncount = 12\n[blowup]\ninner = 0.25\nouter = 0.75\n";
}

}  // namespace

int main() {
  using std::numbers::pi;


  criterion(1, "constant c0: pi/8 at s = 1/2, gamma vs quadrature", 1.0, [](Outcome& o) {
    o.require(std::abs(c0_gamma(0.5) - pi / 8) <= 1e-12, "c0(1/2) - pi/8 = " + fmt(c0_gamma(0.5) - pi / 8));
    double worst = 0.0;
    for (int k = 1; k <= 9; ++k) worst = std::max(worst, std::abs(c0_gamma(0.1 * k) - c0_quadrature(0.1 * k)));
    info(1, "max |c0_gamma - c0_quadrature| over s = 0.1..0.9: " + fmt(worst, 3));
    o.require(worst <= 1e-8, "gamma vs quadrature " + fmt(worst, 3));
  });

  criterion(2, "profile: Euler relation, operator residual order", 30.0, [](Outcome& o) {
    const double h = 1e-4;
    double euler = 0.0;
    for (double s : {0.25, 0.5, 0.75}) {
      for (int a = 1; a < 24; ++a) {
        const double th = pi * a / 24.0;
        for (double r : {0.3, 1.0, 2.0}) {
          const double x = r * std::cos(th), z = r * std::sin(th);
          const double d1 = (profile_P(x + h, z, s) - profile_P(x - h, z, s)) / (2 * h);
          const double dn = (profile_P(x, z + h, s) - profile_P(x, z - h, s)) / (2 * h);
          euler = std::max(euler, std::abs(x * d1 + z * dn - s * profile_P(x, z, s)));
        }
      }
    }
    info(2, "max Euler residual " + fmt(euler, 3));
    o.require(euler <= 1e-6, "Euler residual " + fmt(euler, 3));
    for (double s : {0.25, 0.5, 0.75}) {
      const double coarse = interior_operator_residual(s, 128);
      const double fine = interior_operator_residual(s, 256);
      const double order = std::log2(coarse / fine);
      info(2, "s = " + fmt(s) + ": residual " + fmt(coarse, 3) + " -> " + fmt(fine, 3) + ", order " + fmt(order, 3));
      o.require(order >= 1.5 && order <= 2.5, "order " + fmt(order, 3) + " at s = " + fmt(s));
    }
  });

  std::vector<double> smallest_radius_psi;
  criterion(3, "Weiss on the exact pair: flat at 2M|B'_1| = 4M", 60.0, [&](Outcome& o) {
    for (double s : {0.5, 0.75}) {
      const GridPtr g = grid(s, 512);
      std::vector<double> radii;
      for (int k = 0; k <= 8; ++k) radii.push_back(0.1 + 0.05 * k);
      const WeissCurve c = weiss_curve(profile_field(g, alpha_star(s, mass)), heaviside(g, mass, 0.0), 0.0, radii);
      const auto [lo, hi] = std::minmax_element(c.psi.begin(), c.psi.end());
      double worst_target = 0.0, worst_cancel = 0.0;
      for (std::size_t i = 0; i < c.psi.size(); ++i) {
        worst_target = std::max(worst_target, std::abs(c.psi[i] - 4 * mass) / (4 * mass));
        worst_cancel = std::max(worst_cancel, std::abs(c.terms[i].bulk + c.terms[i].sphere) / c.terms[i].thin);
      }
      const double spread = (*hi - *lo) / *lo;
      info(3, "s = " + fmt(s) + ": psi in [" + fmt(*lo) + ", " + fmt(*hi) + "], spread " + fmt(spread, 3) +
                  ", max |psi - 4M|/4M " + fmt(worst_target, 3) + ", max |bulk+sphere|/thin " + fmt(worst_cancel, 3));
      o.require(spread <= 0.02, "spread " + fmt(spread, 3) + " at s = " + fmt(s));
      o.require(worst_target <= 0.02, "distance to 4M " + fmt(worst_target, 3) + " at s = " + fmt(s));
      o.require(worst_cancel <= 0.02, "bulk+sphere " + fmt(worst_cancel, 3) + " at s = " + fmt(s));
      smallest_radius_psi.push_back(c.psi.front());
    }
  });

  criterion(4, "monotonicity audit of the converged solve at (0.5, 0.05, 1), 256x128", 120.0, [](Outcome& o) {
    const std::string base = "[problem]\ns = 0.5\neps = 0.05\nmass = 1.0\nnx = 257\nnz = 129\n[weiss]\ncount = 12\n";
    const int code = pipeline("c4_solve", base, {"weiss"});
    o.require(code == 0, "weiss exit " + std::to_string(code));
    if (code != 0) return;
    const json w = read_json(workdir() / "c4_solve" / "weiss.json");
    const json& a = w["monotone_audit"];
    info(4, "solve: x0 " + fmt(w["x0"].get<double>()) + ", violations " + std::to_string(a["violations"].size()) +
                ", worst drop " + fmt(a["worst_drop"].get<double>(), 3) + " tolerances");
    o.require(a["passed"].get<bool>(), std::to_string(a["violations"].size()) + " hard violations");

    // The same parameters reached by continuation from eps = 0.2 (a lower-energy branch).
    const int cc = pipeline("c4_continued", base + "[continuation]\nladder = [0.2, 0.1, 0.05]\n", {"report"});
    if (cc == 0) {
      const json c = read_json(workdir() / "c4_continued" / "weiss.json");
      const json& ca = c["monotone_audit"];
      info(4, "continuation branch: x0 " + fmt(c["x0"].get<double>()) + ", violations " +
                  std::to_string(ca["violations"].size()) + ", worst drop " +
                  fmt(ca["worst_drop"].get<double>(), 3) + " tolerances (psi " +
                  fmt(c["psi"].front().get<double>()) + " -> " + fmt(c["psi"].back().get<double>()) + ")");
    } else {
      info(4, "continuation branch: report exit " + std::to_string(cc));
    }
  });

  // One reference run per s feeds criteria 5, 6 and 7.
  const std::string ladder = "[0.2, 0.1, 0.05, 0.025]";
  int ref_half = -1, ref_three_quarters = -1;

  criterion(5, "two-valuedness defect decreases along the ladder, ends <= 0.05", 600.0, [&](Outcome& o) {
    ref_half = pipeline("ref_0.5", reference_toml(0.5, ladder), {"report"});
    o.require(ref_half == 0, "report exit " + std::to_string(ref_half));
    if (ref_half != 0) return;
    const json c = read_json(workdir() / "ref_0.5" / "continuation.json");
    const auto d = c["defect"].get<std::vector<double>>();
    std::string row;
    for (double v : d) row += fmt(v, 4) + " ";
    info(5, "defect along eps = 0.2, 0.1, 0.05, 0.025: " + row);
    for (std::size_t i = 1; i < d.size(); ++i) o.require(d[i] <= d[i - 1], "defect rises at step " + std::to_string(i));
    o.require(d.back() <= 0.05, "final defect " + fmt(d.back(), 4));
  });

  criterion(6, "Hoelder-s seminorm on the compact stays within a factor 2", 600.0, [&](Outcome& o) {
    o.require(ref_half == 0, "reference run unavailable");
    if (ref_half != 0) return;
    const json c = read_json(workdir() / "ref_0.5" / "continuation.json");
    const auto hs = c["holder"].get<std::vector<double>>();
    std::string row;
    for (double v : hs) row += fmt(v, 5) + " ";
    info(6, "seminorms: " + row);
    const auto [lo, hi] = std::minmax_element(hs.begin(), hs.end());
    for (double v : hs) o.require(std::isfinite(v), "non-finite seminorm");
    o.require(*lo > 0 && *hi / *lo <= 2.0, "ratio " + fmt(*hi / *lo, 4));
  });

  criterion(7, "blowup amplitude at the ladder endpoint within 15% of alpha*", 1200.0, [&](Outcome& o) {
    ref_three_quarters = pipeline("ref_0.75", reference_toml(0.75, ladder), {"report"});
    for (const auto& [s, code] : {std::pair{0.5, ref_half}, std::pair{0.75, ref_three_quarters}}) {
      o.require(code == 0, "report exit " + std::to_string(code) + " at s = " + fmt(s));
      if (code != 0) continue;
      const json b = read_json(workdir() / ("ref_" + fmt(s)) / "blowup.json");
      const double fit = b["alpha_fit"].get<double>();
      const double star = b["alpha_star"].get<double>();
      const auto res = b["residual"].get<std::vector<double>>();
      std::string row;
      for (double v : res) row += fmt(v, 3) + " ";
      info(7, "s = " + fmt(s) + ": x0 " + fmt(b["x0"].get<double>()) + ", alpha_fit " + fmt(fit) + ", alpha* " +
                  fmt(star) + " (" + fmt(100 * (fit / star - 1), 3) + "%), alpha_variational " +
                  fmt(b["alpha_variational"].get<double>()) + ", residuals " + row);
      o.require(std::abs(fit - star) <= 0.15 * star,
                "s = " + fmt(s) + ": alpha " + fmt(fit, 4) + " vs alpha* " + fmt(star, 4));
      for (std::size_t i = 1; i < res.size(); ++i) {
        o.require(res[i] <= res[i - 1], "s = " + fmt(s) + ": residual rises at lambda " + std::to_string(i));
      }
    }
  });

  criterion(8, "domain-variation identity on the exact pair", 60.0, [](Outcome& o) {
    const double s = 0.5;
    const double scale = 2 * mass;  // |int 2 chi div psi| for the unit bump
    const auto limit = [&](double amplitude, bool hv) {
      return richardson(dv(s, 128, amplitude, hv), dv(s, 256, amplitude, hv), dv(s, 512, amplitude, hv));
    };
    const auto [exact, p_exact] = limit(alpha_star(s, mass), true);
    const auto [wrong, p_wrong] = limit(alpha_star(s, mass), false);
    const auto [corrected, p_corr] = limit(alpha_variational(s, mass), true);
    info(8, "alpha* P, M chi_{x1>0}: extrapolated " + fmt(exact) + " (order " + fmt(p_exact, 3) + "), " +
                fmt(100 * std::abs(exact) / scale, 3) + "% of the thin term");
    info(8, "alpha* P, chi = M: extrapolated " + fmt(wrong) + " (order " + fmt(p_wrong, 3) + ")");
    info(8, "alpha_variational P, M chi_{x1>0}: extrapolated " + fmt(corrected) + " (order " + fmt(p_corr, 3) + ")");
    o.require(std::abs(exact) <= 0.01 * scale, "exact pair imbalance " + fmt(exact, 4));
    o.require(std::abs(wrong) >= 0.1 * scale, "wrong pair imbalance " + fmt(wrong, 4));
  });

  criterion(9, "extension flux against the fractional symbol", 120.0, [](Outcome& o) {
    for (double s : {0.25, 0.5, 0.75}) {
      for (std::size_t mult : {1, 2}) {
        FluxCheckGrid fg;
        fg.nx *= mult;
        fg.nz *= mult;
        std::vector<double> rho;
        for (int k : {1, 2, 4}) rho.push_back(fractional_flux_check(k, s, fg).rho);
        const auto [lo, hi] = std::minmax_element(rho.begin(), rho.end());
        info(9, "s = " + fmt(s) + ", " + std::to_string(fg.nx) + "x" + std::to_string(fg.nz) + ": rho " +
                    fmt(rho[0], 5) + " " + fmt(rho[1], 5) + " " + fmt(rho[2], 5));
        o.require(*hi / *lo - 1 <= 0.05, "rho spread " + fmt(*hi / *lo - 1, 3) + " at s = " + fmt(s));
        if (s == 0.5) {
          for (double r : rho) o.require(std::abs(r - 1) <= 0.02, "classical ratio " + fmt(r, 5));
        }
      }
    }
  });

  criterion(10, "angular eigen-identity and negative control", 1.0, [](Outcome& o) {
    for (double s : {0.25, 0.5, 0.75}) {
      const double good = angular_eigen_residual(s);
      const double bad = angular_eigen_residual(s, [s](double th) { return std::pow(std::cos(0.5 * th), s); });
      info(10, "s = " + fmt(s) + ": residual " + fmt(good, 3) + ", control " + fmt(bad, 3));
      o.require(good <= 1e-6, "residual " + fmt(good, 3));
      o.require(bad >= 1e-2, "control " + fmt(bad, 3));
    }
  });

  criterion(11, "Weiss threshold separation for the flat pair", 1.0, [&](Outcome& o) {
    o.require(!smallest_radius_psi.empty(), "exact-pair curve unavailable");
    for (double psi : smallest_radius_psi) {
      info(11, "psi(0+) estimate " + fmt(psi) + " in (0, " + fmt(8 * mass) + "), target " + fmt(4 * mass));
      o.require(psi > 0 && psi < 8 * mass, "outside (0, 8M): " + fmt(psi));
      o.require(std::abs(psi - 4 * mass) <= 0.02 * 4 * mass, "distance to 4M " + fmt(psi - 4 * mass));
    }
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
