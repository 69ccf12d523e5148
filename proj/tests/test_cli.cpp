#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "thinfb/cli.hpp"

using namespace thinfb;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("thinfb_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_text(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

const char* kSmall =
    "[problem]\n"
    "s = 0.5\n"
    "nx = 65\n"
    "nz = 33\n"
    "[continuation]\n"
    "ladder = [0.2, 0.1]\n"
    "[weiss]\n"
    "count = 6\n";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("constants row at s = 1/2 carries pi/8 at full precision") {
  const fs::path dir = scratch("constants");
  const Run r = run_cli({"constants", "--s", "0.5", "--out-dir", dir.string()});
  CHECK(r.code == cli::kSuccess);
  CHECK(r.out.find("0.39269908169872414") != std::string::npos);
  const std::string csv = slurp(dir / "constants.csv");
  CHECK(csv.rfind("s,c0_gamma,c0_quadrature,abs_diff,alpha_star", 0) == 0);
  CHECK(csv.find("0.5,0.39269908169872414,") != std::string::npos);
}

TEST_CASE("validation failures exit 2 with per-key diagnostics") {
  const fs::path dir = scratch("validation");
  Run r = run_cli({"weiss", "--radii", "", "--out-dir", dir.string()});
  CHECK(r.code == cli::kValidation);
  CHECK(r.err.find("weiss.radii") != std::string::npos);

  r = run_cli({"--config", write_text(dir / "unknown.toml", "[problem]\nfoo = 1\n").string(), "solve"});
  CHECK(r.code == cli::kValidation);
  CHECK(r.err.find("problem.foo") != std::string::npos);

  r = run_cli({"constants", "--s", "1.5"});
  CHECK(r.code == cli::kValidation);
  r = run_cli({"solve", "--eps", "-0.1"});
  CHECK(r.code == cli::kValidation);
  r = run_cli({"frobnicate"});
  CHECK(r.code == cli::kValidation);
}

TEST_CASE("parse_config reports every bad key and keeps defaults") {
  cli::ExperimentConfig config;
  std::istringstream in("[problem]\ns = 0.3\nnx = many\nbogus = 2\n[weiss]\nradii = [0.1, 0.2]\n");
  const cli::Diagnostics d = cli::parse_config(in, config);
  CHECK(d.errors.size() == 2);
  CHECK(config.problem.s == 0.3);
  CHECK(config.problem.nz == 129);
  REQUIRE(config.weiss.radii);
  CHECK(*config.weiss.radii == std::vector<double>{0.1, 0.2});

  cli::ExperimentConfig clean;
  std::istringstream ok("[problem]\neps = 0.1\n");
  CHECK(cli::parse_config(ok, clean).ok());
  CHECK(cli::validate(clean, "solve").ok());
  clean.weiss.radii = std::vector<double>{0.3, 0.2};
  CHECK_FALSE(cli::validate(clean, "weiss").ok());
}

TEST_CASE("identical runs write byte-identical tables") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  const fs::path cfg = write_text(a / "small.toml", kSmall);
  for (const fs::path& dir : {a, b}) {
    REQUIRE(run_cli({"--config", cfg.string(), "--out-dir", dir.string(), "constants"}).code == 0);
    REQUIRE(run_cli({"--config", cfg.string(), "--out-dir", dir.string(), "--eps", "0.1", "solve"}).code == 0);
  }
  for (const char* name : {"constants.csv", "field.csv", "trace.csv", "field.raw"}) {
    CAPTURE(name);
    CHECK_FALSE(slurp(a / name).empty());
    CHECK(slurp(a / name) == slurp(b / name));
  }
}

TEST_CASE("solver failure exits 3") {
  const fs::path dir = scratch("solver");
  const fs::path cfg = write_text(dir / "bad.toml", "[problem]\nmax_iter = 1\nnx = 33\nnz = 17\n");
  const Run r = run_cli({"--config", cfg.string(), "--out-dir", dir.string(), "solve"});
  CHECK(r.code == cli::kSolverFailure);
  const auto report = nlohmann::json::parse(slurp(dir / "solve.json"))["report"];
  CHECK_FALSE(report["converged"].get<bool>());
}

TEST_CASE("report summary and the strict audit exit") {
  const fs::path dir = scratch("report");
  const fs::path cfg = write_text(dir / "small.toml", kSmall);
  const Run r = run_cli({"--config", cfg.string(), "--out-dir", dir.string(), "report"});
  CHECK(r.code == cli::kSuccess);
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  for (const char* key : {"alpha_fit", "alpha_star", "weiss_value", "monotone_audit"}) {
    CAPTURE(key);
    CHECK(summary.contains(key));
  }
  CHECK(summary["alpha_star"].get<double>() == doctest::Approx(std::sqrt(16 / std::acos(-1.0))));
  CHECK(summary["eps"].get<double>() == 0.1);
  for (const char* name : {"continuation.csv", "blowup.csv", "weiss.csv", "field.raw"}) CHECK(fs::exists(dir / name));
  // This coarse run misses the band, so --strict turns it into an audit failure.
  REQUIRE_FALSE(summary["alpha_within_band"].get<bool>());
  CHECK(run_cli({"--config", cfg.string(), "--out-dir", dir.string(), "--strict", "report"}).code == cli::kAuditFailure);
}

TEST_CASE("weiss and blowup reuse a stored field") {
  const fs::path dir = scratch("reuse");
  const fs::path cfg = write_text(dir / "small.toml", kSmall);
  REQUIRE(run_cli({"--config", cfg.string(), "--out-dir", dir.string(), "--eps", "0.1", "solve"}).code == 0);
  const std::string field = (dir / "field.raw").string();
  Run r = run_cli({"--config", cfg.string(), "--out-dir", dir.string(), "weiss", "--field", field, "--x0", "0",
                   "--radii", "0.1,0.2,0.3"});
  CHECK(r.code == cli::kSuccess);
  const auto weiss = nlohmann::json::parse(slurp(dir / "weiss.json"));
  CHECK(weiss["radii"].size() == 3);
  r = run_cli({"--config", cfg.string(), "--out-dir", dir.string(), "--s", "0.7", "weiss", "--field", field});
  CHECK(r.code == cli::kValidation);
  r = run_cli({"--config", cfg.string(), "--out-dir", dir.string(), "blowup", "--field", field});
  CHECK(r.code == cli::kSuccess);
  CHECK(fs::exists(dir / "blowup.json"));
}

}
