#include "thinfb/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "thinfb/closed_forms.hpp"
#include "thinfb/format.hpp"
#include "thinfb/reaction.hpp"
#include "thinfb/weiss.hpp"

namespace thinfb::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Alpha band for --strict audits of the blowup amplitude.
constexpr double kAlphaBand = 0.15;

std::optional<double> parse_double(const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || first == last) return std::nullopt;
  return v;
}

std::optional<long long> parse_integer(const std::string& text) {
  long long v = 0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || first == last) return std::nullopt;
  return v;
}

// Consumes "section.key" entries; whatever is left over is unknown.
class KeyReader {
 public:
  KeyReader(std::map<std::string, std::vector<std::string>> entries, Diagnostics& diag)
      : entries_(std::move(entries)), diag_(diag) {}

  void real(const std::string& key, double& target) {
    if (auto v = scalar(key)) {
      if (auto d = parse_double(*v)) target = *d;
      else fail(key, "expected a number, got '" + *v + "'");
    }
  }

  void real(const std::string& key, std::optional<double>& target) {
    double v = 0.0;
    if (present(key)) {
      real(key, v);
      target = v;
    }
  }

  template <class Int>
  void integer(const std::string& key, Int& target) {
    if (auto v = scalar(key)) {
      const auto d = parse_integer(*v);
      if (!d) return fail(key, "expected an integer, got '" + *v + "'");
      if (std::is_unsigned_v<Int> && *d < 0) return fail(key, "must be nonnegative");
      target = static_cast<Int>(*d);
    }
  }

  void text(const std::string& key, std::string& target) {
    if (auto v = scalar(key)) target = *v;
  }

  void reals(const std::string& key, std::vector<double>& target) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return;
    std::vector<double> out;
    for (const auto& item : it->second) {
      if (auto d = parse_double(item)) out.push_back(*d);
      else fail(key, "expected a number, got '" + item + "'");
    }
    entries_.erase(it);
    target = std::move(out);
  }

  void reals(const std::string& key, std::optional<std::vector<double>>& target) {
    if (!present(key)) return;
    std::vector<double> v;
    reals(key, v);
    target = std::move(v);
  }

  void integers(const std::string& key, std::vector<int>& target) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return;
    std::vector<int> out;
    for (const auto& item : it->second) {
      if (auto d = parse_integer(item)) out.push_back(static_cast<int>(*d));
      else fail(key, "expected an integer, got '" + item + "'");
    }
    entries_.erase(it);
    target = std::move(out);
  }

  void finish() {
    for (const auto& [key, values] : entries_) fail(key, "unknown key");
    entries_.clear();
  }

 private:
  bool present(const std::string& key) const { return entries_.count(key) != 0; }

  std::optional<std::string> scalar(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    std::vector<std::string> values = std::move(it->second);
    entries_.erase(it);
    if (values.size() != 1) {
      fail(key, "expected a single value");
      return std::nullopt;
    }
    return values.front();
  }

  void fail(const std::string& key, const std::string& message) {
    diag_.errors.push_back(key + ": " + message);
  }

  std::map<std::string, std::vector<std::string>> entries_;
  Diagnostics& diag_;
};

void read_keys(KeyReader& r, ExperimentConfig& c) {
  ProblemBlock& p = c.problem;
  r.real("problem.s", p.s);
  r.real("problem.eps", p.eps);
  r.real("problem.mass", p.mass);
  r.text("problem.reaction", p.reaction);
  r.real("problem.L", p.L);
  r.real("problem.H", p.H);
  r.integer("problem.nx", p.nx);
  r.integer("problem.nz", p.nz);
  r.text("problem.boundary", p.boundary);
  r.real("problem.amplitude", p.amplitude);
  r.real("problem.shift", p.shift);
  r.real("problem.value", p.value);
  r.text("problem.boundary_csv", p.boundary_csv);
  r.real("problem.residual_tol", p.residual_tol);
  r.integer("problem.max_iter", p.max_iter);
  r.real("problem.damping_floor", p.damping_floor);
  r.text("problem.thin_rule", p.thin_rule);

  ContinuationBlock& k = c.continuation;
  r.reals("continuation.ladder", k.ladder);
  r.real("continuation.delta_fraction", k.delta_fraction);
  r.real("continuation.holder_exponent", k.holder_exponent);
  r.integer("continuation.substeps", k.substeps);
  r.real("continuation.x_lo", k.compact.x_lo);
  r.real("continuation.x_hi", k.compact.x_hi);
  r.real("continuation.z_lo", k.compact.z_lo);
  r.real("continuation.z_hi", k.compact.z_hi);
  r.integer("continuation.seed", k.holder.seed);
  r.integer("continuation.pair_cap", k.holder.pair_cap);
  r.integer("continuation.near_offset", k.holder.near_offset);
  r.integer("continuation.samples_per_decade", k.holder.samples_per_decade);

  WeissBlock& w = c.weiss;
  r.text("weiss.field", w.field);
  r.real("weiss.x0", w.x0);
  r.reals("weiss.radii", w.radii);
  r.integer("weiss.count", w.count);
  r.real("weiss.c_mono", w.c_mono);

  BlowupBlock& b = c.blowup;
  r.text("blowup.field", b.field);
  r.real("blowup.x0", b.x0);
  r.reals("blowup.lambdas", b.lambdas);
  r.real("blowup.inner", b.annulus.inner);
  r.real("blowup.outer", b.annulus.outer);
  r.integer("blowup.radial", b.annulus.radial);
  r.integer("blowup.angular", b.annulus.angular);
  r.integer("blowup.orientation", b.orientation);
  r.real("blowup.level", b.level);

  SymbolBlock& y = c.symbol;
  r.reals("symbol.s_values", y.s_values);
  r.integers("symbol.ks", y.ks);
  r.real("symbol.half_period", y.grid.half_period);
  r.real("symbol.height", y.grid.height);
  r.integer("symbol.nx", y.grid.nx);
  r.integer("symbol.nz", y.grid.nz);

  r.reals("constants.s_values", c.constants.s_values);

  std::string dir;
  r.text("output.dir", dir);
  if (!dir.empty()) c.out_dir = dir;
  r.finish();
}

// Collects per-key messages for validate().
struct Checker {
  Diagnostics& diag;
  void require(bool ok, const std::string& key, const std::string& message) {
    if (!ok) diag.errors.push_back(key + ": " + message);
  }
  void unit_interval(double v, const std::string& key) {
    require(v > 0.0 && v < 1.0, key, "must lie in (0, 1), got " + format_number(v));
  }
  void positive(double v, const std::string& key) {
    require(v > 0.0 && std::isfinite(v), key, "must be positive and finite, got " + format_number(v));
  }
  void ladder(const std::vector<double>& v, const std::string& key, bool decreasing) {
    require(!v.empty(), key, "must not be empty");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!(v[i] > 0.0 && std::isfinite(v[i]))) {
        require(false, key, "entries must be positive and finite");
        return;
      }
      if (i > 0 && (decreasing ? !(v[i] < v[i - 1]) : !(v[i] > v[i - 1]))) {
        require(false, key, decreasing ? "must be strictly decreasing" : "must be strictly increasing");
        return;
      }
    }
  }
};

void validate_problem(Checker& c, const ProblemBlock& p) {
  c.unit_interval(p.s, "problem.s");
  c.positive(p.eps, "problem.eps");
  c.positive(p.mass, "problem.mass");
  const auto names = ReactionProfile::registered_names();
  c.require(std::find(names.begin(), names.end(), p.reaction) != names.end(), "problem.reaction",
            "unknown reaction '" + p.reaction + "'");
  c.positive(p.L, "problem.L");
  c.positive(p.H, "problem.H");
  c.require(p.nx >= 3, "problem.nx", "must be at least 3");
  c.require(p.nz >= 3, "problem.nz", "must be at least 3");
  c.require(p.boundary == "scaled-profile" || p.boundary == "constant" || p.boundary == "custom-csv",
            "problem.boundary", "must be scaled-profile, constant or custom-csv");
  if (p.boundary == "custom-csv") {
    c.require(!p.boundary_csv.empty() && fs::exists(p.boundary_csv), "problem.boundary_csv",
              "custom-csv needs an existing file");
  }
  if (p.amplitude) c.require(std::isfinite(*p.amplitude), "problem.amplitude", "must be finite");
  c.require(std::isfinite(p.shift), "problem.shift", "must be finite");
  c.require(std::isfinite(p.value), "problem.value", "must be finite");
  c.positive(p.residual_tol, "problem.residual_tol");
  c.require(p.max_iter >= 0, "problem.max_iter", "must be nonnegative");
  c.unit_interval(p.damping_floor, "problem.damping_floor");
  c.require(p.thin_rule == "lumped" || p.thin_rule == "trace", "problem.thin_rule",
            "must be lumped or trace");
}

void validate_continuation(Checker& c, const ContinuationBlock& k, const ProblemBlock& p) {
  c.ladder(k.ladder, "continuation.ladder", true);
  c.require(k.delta_fraction >= 0.0 && k.delta_fraction < 0.5, "continuation.delta_fraction",
            "must lie in [0, 0.5)");
  c.require(k.holder_exponent < 1.0, "continuation.holder_exponent",
            "must be below 1 (nonpositive selects s)");
  const Region& r = k.compact;
  c.require(r.x_lo < r.x_hi && r.z_lo < r.z_hi, "continuation.compact", "must have positive extent");
  c.require(r.x_lo >= -p.L && r.x_hi <= p.L && r.z_lo >= 0.0 && r.z_hi <= p.H,
            "continuation.compact", "must lie inside the box");
  c.require(k.holder.samples_per_decade > 0, "continuation.samples_per_decade", "must be positive");
}

void validate_center(Checker& c, const std::optional<double>& x0, const ProblemBlock& p,
                     const std::string& key) {
  if (x0) c.require(*x0 > -p.L && *x0 < p.L, key, "must lie strictly inside (-L, L)");
}

void validate_weiss(Checker& c, const WeissBlock& w, const ProblemBlock& p) {
  if (w.radii) c.ladder(*w.radii, "weiss.radii", false);
  c.require(w.count >= 1, "weiss.count", "must be at least 1");
  c.require(w.c_mono >= 0.0 && std::isfinite(w.c_mono), "weiss.c_mono", "must be nonnegative");
  c.require(w.field.empty() || fs::exists(w.field), "weiss.field", "file does not exist");
  validate_center(c, w.x0, p, "weiss.x0");
}

void validate_blowup(Checker& c, const BlowupBlock& b, const ProblemBlock& p) {
  if (b.lambdas) c.ladder(*b.lambdas, "blowup.lambdas", true);
  c.require(b.annulus.inner > 0.0 && b.annulus.inner < b.annulus.outer, "blowup.inner",
            "needs 0 < inner < outer");
  c.require(b.annulus.radial > 0, "blowup.radial", "must be positive");
  c.require(b.annulus.angular > 0, "blowup.angular", "must be positive");
  c.require(b.orientation >= -1 && b.orientation <= 1, "blowup.orientation", "must be -1, 0 or 1");
  if (b.level) c.require(*b.level >= 0.0 && std::isfinite(*b.level), "blowup.level", "must be nonnegative");
  c.require(b.field.empty() || fs::exists(b.field), "blowup.field", "file does not exist");
  validate_center(c, b.x0, p, "blowup.x0");
}

std::string csv_row(std::initializer_list<std::string> cells) {
  std::string line;
  for (const auto& cell : cells) {
    if (!line.empty()) line += ',';
    line += cell;
  }
  return line + '\n';
}

std::string num(double v) { return format_number(v); }

// Writes a table to the output directory and echoes it.
void emit_table(const fs::path& path, const std::string& table, std::ostream* echo) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw InvalidArgument("cannot open " + path.string() + " for writing");
  file << table;
  if (echo) *echo << table;
}

void emit_json(const fs::path& path, const json& doc) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw InvalidArgument("cannot open " + path.string() + " for writing");
  file << doc.dump(2) << '\n';
}

json to_json(const SolveReport& r) {
  return json{{"iterations", r.iterations},         {"residual_norm", r.residual_norm},
              {"energy", r.energy},                 {"energy_history", r.energy_history},
              {"converged", r.converged},           {"min_value", r.min_value},
              {"undershoot", r.undershoot},         {"warnings", r.warnings}};
}

json to_json(const ContinuationReport& r) {
  json solves = json::array();
  for (const auto& s : r.solves) solves.push_back(to_json(s));
  return json{{"eps", r.eps},       {"solves", solves},         {"cauchy", r.cauchy},
              {"holder", r.holder}, {"thin_mass", r.thin_mass}, {"defect", r.defect},
              {"warnings", r.warnings}};
}

json to_json(const MonotonicityAudit& a) {
  return json{{"passed", a.passed()},
              {"c_mono", a.c_mono},
              {"h", a.h},
              {"violations", a.violations},
              {"worst_drop", a.worst_drop}};
}

// A solve that stopped short; the report is written before exiting.
class SolveFailed : public SolverBreakdown {
 public:
  explicit SolveFailed(SolveReport report)
      : SolverBreakdown("solve did not converge (residual " + format_number(report.residual_norm) +
                        ")"),
        report_(std::move(report)) {}
  const SolveReport& report() const { return report_; }

 private:
  SolveReport report_;
};

// Analysis step that cannot proceed on a valid configuration.
class AnalysisFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Field read_field_table(const fs::path& path, double s) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::array<double, 3>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::array<double, 3> row{};
    std::stringstream cells(line);
    std::string cell;
    for (double& v : row) {
      if (!std::getline(cells, cell, ',')) throw InvalidArgument(path.string() + ": short row");
      const auto d = parse_double(cell);
      if (!d) throw InvalidArgument(path.string() + ": bad number '" + cell + "'");
      v = *d;
    }
    rows.push_back(row);
  }
  std::set<double> xs, zs;
  for (const auto& r : rows) {
    xs.insert(r[0]);
    zs.insert(r[1]);
  }
  if (xs.size() < 3 || zs.size() < 3 || rows.size() != xs.size() * zs.size() || *zs.begin() != 0.0 ||
      std::abs(*xs.begin() + *xs.rbegin()) > 1e-12 * *xs.rbegin()) {
    throw InvalidArgument(path.string() + ": not a full field table on [-L, L] x [0, H]");
  }
  const GridPtr grid = Grid::build(s, GridSpec{*xs.rbegin(), *zs.rbegin(), xs.size(), zs.size()});
  const std::vector<double> xv(xs.begin(), xs.end());
  const std::vector<double> zv(zs.begin(), zs.end());
  Field f(grid);
  for (const auto& r : rows) {
    const auto i = static_cast<std::size_t>(std::lower_bound(xv.begin(), xv.end(), r[0]) - xv.begin());
    const auto j = static_cast<std::size_t>(std::lower_bound(zv.begin(), zv.end(), r[1]) - zv.begin());
    f(i, j) = r[2];
  }
  return f;
}

// Shared state of one invocation.
struct Session {
  ExperimentConfig config;
  std::ostream& out;
  std::ostream& err;

  fs::path file(const std::string& name) const { return config.out_dir / name; }

  ProblemParams params() const { return make_problem(config); }

  Field solved(const ProblemParams& params) {
    SolveResult r = solve(params);
    for (const auto& w : r.report.warnings) err << "warning: " << w << '\n';
    if (!r.report.converged) {
      emit_json(file("solve.json"), json{{"report", to_json(r.report)}});
      throw SolveFailed(r.report);
    }
    return std::move(r.field);
  }

  // Loads a raw field, adopting its grid layout; s must agree with [problem].
  Field field_or_solve(const std::string& path, ProblemParams& params) {
    if (path.empty()) return solved(params);
    Field f = read_field_raw(path);
    if (f.grid().s() != params.s) {
      throw InvalidParameter(path + ": field has s = " + num(f.grid().s()) + ", problem.s is " +
                             num(params.s));
    }
    params.grid = f.grid().spec();
    return f;
  }

  double front(const Field& u, const std::optional<double>& x0, double level) const {
    if (x0) return *x0;
    const auto x = extrapolate_front(ThinField::trace_of(u), level);
    if (!x) throw AnalysisFailure("the trace never crosses level " + num(level));
    return *x;
  }

  WeissCurve weiss_on(const Field& u, const ProblemParams& params) {
    const WeissBlock& w = config.weiss;
    const double x0 = front(u, w.x0, params.eps);
    std::vector<double> radii;
    if (w.radii) {
      radii = *w.radii;
    } else {
      const Grid& g = u.grid();
      const double r_max = 0.5 * std::min({x0 + g.half_width(), g.half_width() - x0, g.height()});
      for (std::size_t k = 1; k <= w.count; ++k) {
        radii.push_back(r_max * static_cast<double>(k) / static_cast<double>(w.count));
      }
    }
    return weiss_curve(u, params, x0, radii, w.c_mono);
  }

  void write_weiss(const WeissCurve& c, bool echo) {
    std::string table = csv_row({"r", "psi", "bulk", "sphere", "thin"});
    for (std::size_t i = 0; i < c.radii.size(); ++i) {
      const WeissTerms& t = c.terms[i];
      table += csv_row({num(c.radii[i]), num(c.psi[i]), num(t.bulk), num(t.sphere), num(t.thin)});
    }
    emit_table(file("weiss.csv"), table, echo ? &out : nullptr);
    emit_json(file("weiss.json"), json{{"x0", c.x0}, {"radii", c.radii}, {"psi", c.psi},
                                       {"monotone_audit", to_json(c.audit)}});
  }

  BlowupFit blowup_on(const Field& u, const ProblemParams& params) {
    const BlowupBlock& b = config.blowup;
    const double x0 = front(u, b.x0, b.level.value_or(params.eps));
    const int orientation =
        b.orientation != 0 ? b.orientation : infer_orientation(ThinField::trace_of(u), x0);
    std::vector<double> lambdas;
    if (b.lambdas) {
      lambdas = *b.lambdas;
    } else {
      const Grid& g = u.grid();
      const double reach = std::min({x0 + g.half_width(), g.half_width() - x0, g.height()});
      const double floor = blowup_floor(g, params.eps, alpha_variational(params.s, config.problem.mass));
      lambdas = blowup_lambda_ladder(reach, floor, b.annulus);
      if (lambdas.empty()) {
        throw InvalidParameter("no blowup scale above the resolution floor " + num(floor) +
                               "; refine the grid or lower eps");
      }
    }
    return blowup_fit(u, x0, lambdas, orientation, b.annulus);
  }

  bool within_band(double alpha) const {
    const double target = alpha_star(config.problem.s, config.problem.mass);
    return std::abs(alpha - target) <= kAlphaBand * target;
  }

  json write_blowup(const BlowupFit& fit, bool echo) {
    std::string table = csv_row({"lambda", "alpha", "residual"});
    for (std::size_t i = 0; i < fit.lambdas.size(); ++i) {
      table += csv_row({num(fit.lambdas[i]), num(fit.alpha[i]), num(fit.residual[i])});
    }
    emit_table(file("blowup.csv"), table, echo ? &out : nullptr);
    const ProblemBlock& p = config.problem;
    json doc{{"x0", fit.x0},
             {"orientation", fit.orientation},
             {"annulus",
              {{"inner", fit.annulus.inner},
               {"outer", fit.annulus.outer},
               {"radial", fit.annulus.radial},
               {"angular", fit.annulus.angular}}},
             {"lambdas", fit.lambdas},
             {"alpha", fit.alpha},
             {"residual", fit.residual},
             {"alpha_fit", fit.headline_alpha()},
             {"alpha_star", alpha_star(p.s, p.mass)},
             {"alpha_variational", alpha_variational(p.s, p.mass)},
             {"alpha_within_band", within_band(fit.headline_alpha())}};
    emit_json(file("blowup.json"), doc);
    return doc;
  }

  ContinuationResult continued(const ProblemParams& params) {
    const ContinuationBlock& k = config.continuation;
    ContinuationOptions options;
    options.compact = k.compact;
    options.delta_fraction = k.delta_fraction;
    options.holder_exponent = k.holder_exponent;
    options.holder = k.holder;
    options.substeps = k.substeps;
    try {
      ContinuationResult r = continuation(params, k.ladder, options);
      for (const auto& w : r.report.warnings) err << "warning: " << w << '\n';
      return r;
    } catch (const ContinuationFailure& e) {
      emit_json(file("continuation.json"), to_json(e.report()));
      throw;
    }
  }

  void write_continuation(const ContinuationReport& r, bool echo) {
    std::string table = csv_row({"eps", "iterations", "residual_norm", "energy", "cauchy", "holder",
                                 "thin_mass", "defect"});
    for (std::size_t i = 0; i < r.eps.size(); ++i) {
      const SolveReport& s = r.solves[i];
      table += csv_row({num(r.eps[i]), std::to_string(s.iterations), num(s.residual_norm),
                        num(s.energy), i == 0 ? std::string() : num(r.cauchy[i - 1]), num(r.holder[i]),
                        num(r.thin_mass[i]), num(r.defect[i])});
    }
    emit_table(file("continuation.csv"), table, echo ? &out : nullptr);
    emit_json(file("continuation.json"), to_json(r));
  }
};

std::vector<double> s_list(const std::vector<double>& configured, const std::optional<double>& s_flag) {
  return s_flag ? std::vector<double>{*s_flag} : configured;
}

int cmd_constants(Session& ss, const std::optional<double>& s_flag) {
  const double mass = ss.config.problem.mass;
  std::string table = csv_row({"s", "c0_gamma", "c0_quadrature", "abs_diff", "alpha_star",
                               "tip_flux_constant", "alpha_variational", "poisson_constant",
                               "poisson_constant_closed"});
  for (double s : s_list(ss.config.constants.s_values, s_flag)) {
    const double g = c0_gamma(s);
    const double q = c0_quadrature(s);
    table += csv_row({num(s), num(g), num(q), num(std::abs(g - q)), num(alpha_star(s, mass)),
                      num(tip_flux_constant(s)), num(alpha_variational(s, mass)),
                      num(poisson_constant(s)), num(poisson_constant_closed(s))});
  }
  emit_table(ss.file("constants.csv"), table, &ss.out);
  return kSuccess;
}

int cmd_symbol(Session& ss, const std::optional<double>& s_flag) {
  std::string table =
      csv_row({"s", "k", "flux_amplitude", "symbol", "rho", "top_decay_ratio", "decayed"});
  for (double s : s_list(ss.config.symbol.s_values, s_flag)) {
    for (int k : ss.config.symbol.ks) {
      const FluxCheck f = fractional_flux_check(k, s, ss.config.symbol.grid);
      if (!f.warning.empty()) ss.err << "warning: s = " << num(s) << ", k = " << k << ": " << f.warning << '\n';
      table += csv_row({num(s), std::to_string(k), num(f.flux_amplitude), num(f.symbol), num(f.rho),
                        num(f.top_decay_ratio), f.decayed ? "1" : "0"});
    }
  }
  emit_table(ss.file("symbol.csv"), table, &ss.out);
  return kSuccess;
}

int cmd_solve(Session& ss) {
  const ProblemParams params = ss.params();
  SolveResult r = solve(params);
  for (const auto& w : r.report.warnings) ss.err << "warning: " << w << '\n';
  write_field_raw(r.field, ss.file("field.raw"));
  write_field_csv(r.field, ss.file("field.csv"));
  const ThinField flux = neumann_flux(r.field, params);
  const Grid& g = r.field.grid();
  std::string table = csv_row({"x1", "u", "B_eps", "flux"});
  for (std::size_t i = 0; i < g.nx(); ++i) {
    table += csv_row({num(g.x(i)), num(r.field(i, 0)), num(B_eps(*params.reaction, params.eps, r.field(i, 0))),
                      num(flux[i])});
  }
  emit_table(ss.file("trace.csv"), table, nullptr);
  emit_json(ss.file("solve.json"), json{{"report", to_json(r.report)}});
  ss.out << "solve: " << (r.report.converged ? "converged" : "not converged") << " after "
         << r.report.iterations << " iterations, residual " << num(r.report.residual_norm) << '\n';
  if (!r.report.converged) {
    ss.err << "error: solve did not converge\n";
    return kSolverFailure;
  }
  return kSuccess;
}

int cmd_weiss(Session& ss) {
  ProblemParams params = ss.params();
  const Field u = ss.field_or_solve(ss.config.weiss.field, params);
  const WeissCurve curve = ss.weiss_on(u, params);
  ss.write_weiss(curve, true);
  if (!curve.audit.passed()) {
    ss.err << "audit: " << curve.audit.violations.size() << " monotonicity violation(s), worst drop "
           << num(curve.audit.worst_drop) << " tolerances\n";
    if (ss.config.strict) return kAuditFailure;
  }
  return kSuccess;
}

int cmd_continuation(Session& ss) {
  const ContinuationResult r = ss.continued(ss.params());
  ss.write_continuation(r.report, true);
  write_field_raw(r.fields.back(), ss.file("field.raw"));
  return kSuccess;
}

int cmd_blowup(Session& ss) {
  ProblemParams params = ss.params();
  const Field u = ss.field_or_solve(ss.config.blowup.field, params);
  const BlowupFit fit = ss.blowup_on(u, params);
  ss.write_blowup(fit, true);
  if (!ss.within_band(fit.headline_alpha())) {
    ss.err << "audit: alpha " << num(fit.headline_alpha()) << " outside the band around alpha_star\n";
    if (ss.config.strict) return kAuditFailure;
  }
  return kSuccess;
}

int cmd_report(Session& ss) {
  ProblemParams params = ss.params();
  const ContinuationResult r = ss.continued(params);
  ss.write_continuation(r.report, false);
  const Field& u = r.fields.back();
  write_field_raw(u, ss.file("field.raw"));
  params.eps = r.report.eps.back();
  const BlowupFit fit = ss.blowup_on(u, params);
  const json blowup = ss.write_blowup(fit, false);
  const WeissCurve curve = ss.weiss_on(u, params);
  ss.write_weiss(curve, false);

  const ProblemBlock& p = ss.config.problem;
  const bool band = ss.within_band(fit.headline_alpha());
  json summary{{"s", p.s},
               {"mass", p.mass},
               {"eps", params.eps},
               {"grid", {{"nx", params.grid.nx}, {"nz", params.grid.nz}, {"L", params.grid.half_width},
                         {"H", params.grid.height}}},
               {"x0", fit.x0},
               {"orientation", fit.orientation},
               {"alpha_fit", fit.headline_alpha()},
               {"alpha_star", blowup["alpha_star"]},
               {"alpha_variational", blowup["alpha_variational"]},
               {"alpha_within_band", band},
               {"blowup_residual", fit.residual.back()},
               {"weiss_x0", curve.x0},
               {"weiss_radius", curve.radii.front()},
               {"weiss_value", curve.psi.front()},
               {"monotone_audit", to_json(curve.audit)},
               {"final_defect", r.report.defect.back()},
               {"holder", r.report.holder},
               {"warnings", r.report.warnings}};
  emit_json(ss.file("summary.json"), summary);
  ss.out << summary.dump(2) << '\n';
  const bool audit_ok = curve.audit.passed() && band;
  if (!audit_ok) {
    ss.err << "audit: " << (curve.audit.passed() ? "" : "monotonicity violated; ")
           << (band ? "" : "alpha outside the band around alpha_star") << '\n';
    if (ss.config.strict) return kAuditFailure;
  }
  return kSuccess;
}

std::optional<std::vector<double>> parse_list(const std::string& text, Diagnostics& diag,
                                              const std::string& key) {
  std::vector<double> out;
  std::string item;
  std::stringstream in(text);
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    if (auto d = parse_double(item)) out.push_back(*d);
    else diag.errors.push_back(key + ": expected a number, got '" + item + "'");
  }
  return out;
}

}  // namespace

Diagnostics parse_config(std::istream& in, ExperimentConfig& config) {
  Diagnostics diag;
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const CLI::Error& e) {
    diag.errors.push_back(std::string("config: ") + e.what());
    return diag;
  }
  std::map<std::string, std::vector<std::string>> entries;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    const std::string key = item.fullname();
    if (entries.count(key)) diag.errors.push_back(key + ": duplicate key");
    entries[key] = item.inputs;
  }
  KeyReader reader(std::move(entries), diag);
  read_keys(reader, config);
  return diag;
}

Diagnostics load_config(const fs::path& path, ExperimentConfig& config) {
  std::ifstream in(path);
  if (!in) return Diagnostics{{"config: cannot read " + path.string()}};
  return parse_config(in, config);
}

Diagnostics validate(const ExperimentConfig& config, const std::string& subcommand) {
  Diagnostics diag;
  Checker c{diag};
  if (subcommand == "constants") {
    for (double s : config.constants.s_values) c.unit_interval(s, "constants.s_values");
    c.positive(config.problem.mass, "problem.mass");
    return diag;
  }
  if (subcommand == "symbol-check") {
    for (double s : config.symbol.s_values) c.unit_interval(s, "symbol.s_values");
    for (int k : config.symbol.ks) c.require(k >= 0, "symbol.ks", "must be nonnegative");
    c.positive(config.symbol.grid.half_period, "symbol.half_period");
    c.positive(config.symbol.grid.height, "symbol.height");
    c.require(config.symbol.grid.nx >= 4, "symbol.nx", "must be at least 4");
    c.require(config.symbol.grid.nz >= 3, "symbol.nz", "must be at least 3");
    return diag;
  }
  validate_problem(c, config.problem);
  if (subcommand == "continuation" || subcommand == "report") {
    validate_continuation(c, config.continuation, config.problem);
  }
  if (subcommand == "weiss" || subcommand == "report") validate_weiss(c, config.weiss, config.problem);
  if (subcommand == "blowup" || subcommand == "report") validate_blowup(c, config.blowup, config.problem);
  return diag;
}

ProblemParams make_problem(const ExperimentConfig& config) {
  const ProblemBlock& p = config.problem;
  ProblemParams params;
  params.s = p.s;
  params.eps = p.eps;
  params.reaction = ReactionProfile::from_name(p.reaction, p.mass);
  params.grid = GridSpec{p.L, p.H, p.nx, p.nz};
  if (p.boundary == "scaled-profile") {
    params.boundary = profile_boundary(p.s, p.amplitude.value_or(alpha_star(p.s, p.mass)), p.shift);
  } else if (p.boundary == "constant") {
    params.boundary = constant_boundary(p.value);
  } else {
    auto table = std::make_shared<Field>(read_field_table(p.boundary_csv, p.s));
    params.boundary = [table](double x1, double xn) {
      const Grid& g = table->grid();
      return table->sample(std::clamp(x1, -g.half_width(), g.half_width()),
                           std::clamp(xn, 0.0, g.height()));
    };
  }
  params.solver = SolverOptions{p.residual_tol, p.max_iter, p.damping_floor};
  params.thin_rule = p.thin_rule == "trace" ? ThinRule::trace : ThinRule::lumped;
  return params;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Numerical lab for the thin one-phase singular perturbation problem", "thinfb"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  std::string config_path, out_dir, radii_text;
  double s_flag = 0.0, eps_flag = 0.0, mass_flag = 0.0, x0_flag = 0.0;
  std::string field_flag;
  bool strict = false;
  app.add_option("--config", config_path, "TOML config file")->check(CLI::ExistingFile);
  app.add_option("--out-dir", out_dir, "directory for emitted files");
  app.add_option("--s", s_flag, "fractional order s");
  app.add_option("--eps", eps_flag, "reaction width eps");
  app.add_option("--mass", mass_flag, "reaction mass M");
  app.add_flag("--strict", strict, "exit 4 on failed audits");

  auto* constants = app.add_subcommand("constants", "c0, alpha* and related constants");
  auto* symbol = app.add_subcommand("symbol-check", "discrete flux against the fractional symbol");
  auto* solve_cmd = app.add_subcommand("solve", "solve the eps problem");
  auto* weiss = app.add_subcommand("weiss", "Weiss energy curve and monotonicity audit");
  weiss->add_option("--field", field_flag, "raw field file");
  weiss->add_option("--x0", x0_flag, "ball centre on the thin row");
  weiss->add_option("--radii", radii_text, "comma-separated increasing radii");
  auto* cont = app.add_subcommand("continuation", "eps ladder with compactness diagnostics");
  auto* blowup = app.add_subcommand("blowup", "blowup amplitude fit at a free-boundary point");
  blowup->add_option("--field", field_flag, "raw field file");
  blowup->add_option("--x0", x0_flag, "free-boundary point");
  auto* report = app.add_subcommand("report", "continuation, blowup and Weiss summary");
  (void)constants, (void)symbol, (void)solve_cmd, (void)cont, (void)report;

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kValidation;
  }
  const std::string name = app.get_subcommands().front()->get_name();

  Session ss{ExperimentConfig{}, out, err};
  ExperimentConfig& config = ss.config;
  Diagnostics diag;
  if (!config_path.empty()) diag = load_config(config_path, config);
  std::optional<double> s_only;
  if (app.count("--s")) {
    config.problem.s = s_flag;
    s_only = s_flag;
  }
  if (app.count("--eps")) config.problem.eps = eps_flag;
  if (app.count("--mass")) config.problem.mass = mass_flag;
  if (!out_dir.empty()) config.out_dir = out_dir;
  config.strict = strict;
  if (name == "weiss") {
    if (weiss->count("--field")) config.weiss.field = field_flag;
    if (weiss->count("--x0")) config.weiss.x0 = x0_flag;
    if (weiss->count("--radii")) config.weiss.radii = parse_list(radii_text, diag, "weiss.radii");
  }
  if (name == "blowup") {
    if (blowup->count("--field")) config.blowup.field = field_flag;
    if (blowup->count("--x0")) config.blowup.x0 = x0_flag;
  }
  if (s_only && (name == "constants" || name == "symbol-check")) {
    Checker c{diag};
    c.unit_interval(*s_only, "--s");
  }
  for (const auto& e : validate(config, name).errors) diag.errors.push_back(e);
  if (!diag.ok()) {
    for (const auto& e : diag.errors) err << "config error: " << e << '\n';
    return kValidation;
  }
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec || !fs::is_directory(config.out_dir)) {
    err << "config error: output.dir: cannot create " << config.out_dir.string() << '\n';
    return kValidation;
  }

  const std::map<std::string, std::function<int()>> commands{
      {"constants", [&] { return cmd_constants(ss, s_only); }},
      {"symbol-check", [&] { return cmd_symbol(ss, s_only); }},
      {"solve", [&] { return cmd_solve(ss); }},
      {"weiss", [&] { return cmd_weiss(ss); }},
      {"continuation", [&] { return cmd_continuation(ss); }},
      {"blowup", [&] { return cmd_blowup(ss); }},
      {"report", [&] { return cmd_report(ss); }},
  };
  try {
    return commands.at(name)();
  } catch (const SolverBreakdown& e) {
    err << "solver error: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const AnalysisFailure& e) {
    err << "analysis error: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const std::invalid_argument& e) {
    err << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const Unsupported& e) {
    err << "validation error: " << e.what() << '\n';
    return kValidation;
  }
}

}  // namespace thinfb::cli
