#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "thinfb/closed_forms.hpp"
#include "thinfb/elliptic.hpp"
#include "thinfb/limit.hpp"

namespace thinfb::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsage = 1,
  kValidation = 2,
  kSolverFailure = 3,
  kAuditFailure = 4,
};

struct ProblemBlock {
  double s = 0.5;
  double eps = 0.05;
  double mass = 1.0;
  std::string reaction = "poly6";
  double L = 1.0;
  double H = 1.0;
  std::size_t nx = 257;
  std::size_t nz = 129;
  std::string boundary = "scaled-profile";  // "scaled-profile", "constant", "custom-csv"
  std::optional<double> amplitude;          // scaled-profile; alpha_star(s, mass) when unset
  double shift = 0.0;
  double value = 0.0;                       // constant
  std::string boundary_csv;                 // custom-csv: a field table "x1,xn,value"
  double residual_tol = 1e-10;
  int max_iter = 200;
  double damping_floor = 1e-10;
  std::string thin_rule = "lumped";
};

struct ContinuationBlock {
  std::vector<double> ladder{0.2, 0.1, 0.05, 0.025};
  double delta_fraction = 0.1;
  double holder_exponent = 0.0;
  std::size_t substeps = 0;
  Region compact;
  HolderOptions holder;
};

struct WeissBlock {
  std::string field;              // raw field; solved from [problem] when empty
  std::optional<double> x0;       // detected front when unset
  std::optional<std::vector<double>> radii;
  std::size_t count = 12;         // default radii r_max k / count
  double c_mono = 0.5;
};

struct BlowupBlock {
  std::string field;
  std::optional<double> x0;
  std::optional<std::vector<double>> lambdas;
  Annulus annulus;
  int orientation = 0;            // 0 infers it from the trace
  std::optional<double> level;    // front level; eps when unset
};

struct SymbolBlock {
  std::vector<double> s_values{0.25, 0.5, 0.75};
  std::vector<int> ks{1, 2, 4};
  FluxCheckGrid grid;
};

struct ConstantsBlock {
  std::vector<double> s_values{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
};

struct ExperimentConfig {
  ProblemBlock problem;
  ContinuationBlock continuation;
  WeissBlock weiss;
  BlowupBlock blowup;
  SymbolBlock symbol;
  ConstantsBlock constants;
  std::filesystem::path out_dir = ".";
  bool strict = false;
};

/// Validation outcome: one message per offending key, empty when valid.
struct Diagnostics {
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

/// Parses the TOML subset (sections, scalars, flat arrays) into `config`,
/// keeping defaults for absent keys. Unknown keys and unparsable values are
/// reported per key.
Diagnostics parse_config(std::istream& in, ExperimentConfig& config);
Diagnostics load_config(const std::filesystem::path& path, ExperimentConfig& config);

/// Checks every field against the preconditions of the operation that uses it.
Diagnostics validate(const ExperimentConfig& config, const std::string& subcommand);

ProblemParams make_problem(const ExperimentConfig& config);

/// Entry point: args exclude the program name. Tables go to `out` as well as
/// to files in the output directory; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace thinfb::cli
