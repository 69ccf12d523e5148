#include "thinfb/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "thinfb/errors.hpp"
#include "thinfb/format.hpp"

namespace thinfb {
namespace {

// (b^p - a^p) / p without cancellation when b is close to a.
double power_difference(double p, double a, double b) {
  if (a == 0.0) return std::pow(b, p) / p;
  return std::pow(a, p) * std::expm1(p * std::log1p((b - a) / a)) / p;
}

void require_interval(double s, double a, double b) {
  if (!(s > 0.0 && s < 1.0)) throw InvalidParameter("s must lie in (0, 1)");
  if (!(a >= 0.0)) throw InvalidParameter("weight interval must start at a >= 0");
  if (!(b > a)) throw InvalidParameter("weight interval needs b > a");
}

constexpr double kSlack = 1e-12;

}  // namespace

double face_weight(double s, double a, double b) {
  require_interval(s, a, b);
  return power_difference(2.0 - 2.0 * s, a, b);
}

double reciprocal_weight_integral(double s, double a, double b) {
  require_interval(s, a, b);
  return power_difference(2.0 * s, a, b);
}

std::shared_ptr<const Grid> Grid::build(double s, const GridSpec& spec) {
  return std::shared_ptr<const Grid>(new Grid(s, spec));
}

Grid::Grid(double s, const GridSpec& spec) : s_(s), spec_(spec) {
  if (!(s > 0.0 && s < 1.0)) throw InvalidParameter("s must lie in (0, 1)");
  if (spec.nx < 3 || spec.nz < 3) throw InvalidParameter("grid needs at least 3 nodes per axis");
  if (!(spec.half_width > 0.0) || !(spec.height > 0.0)) {
    throw InvalidParameter("grid extents must be positive");
  }
  hx_ = 2.0 * spec.half_width / static_cast<double>(spec.nx - 1);
  hz_ = spec.height / static_cast<double>(spec.nz - 1);

  horizontal_weight_.resize(spec.nz);
  for (std::size_t j = 0; j < spec.nz; ++j) {
    const double lo = j == 0 ? 0.0 : z(j) - 0.5 * hz_;
    const double hi = j + 1 == spec.nz ? spec.height : z(j) + 0.5 * hz_;
    horizontal_weight_[j] = face_weight(s, lo, hi);
  }
  vertical_weight_.resize(spec.nz - 1);
  for (std::size_t j = 0; j + 1 < spec.nz; ++j) {
    vertical_weight_[j] = hz_ / reciprocal_weight_integral(s, z(j), z(j + 1));
  }
}

double Grid::x(std::size_t i) const {
  if (i + 1 == spec_.nx) return spec_.half_width;
  return -spec_.half_width + static_cast<double>(i) * hx_;
}

double Grid::z(std::size_t j) const {
  if (j + 1 == spec_.nz) return spec_.height;
  return static_cast<double>(j) * hz_;
}

double Grid::column_width(std::size_t i) const {
  return (i == 0 || i + 1 == spec_.nx) ? 0.5 * hx_ : hx_;
}

double Grid::weighted_area(double xa, double xb, double za, double zb) const {
  if (xb <= xa || zb <= za) return 0.0;
  return (xb - xa) * face_weight(s_, za, zb);
}

Field::Field(GridPtr grid, double fill) : grid_(std::move(grid)) {
  values_.assign(grid_->size(), fill);
}

Field::Field(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_->size()) {
    throw InvalidArgument("field value count does not match the grid");
  }
}

Field Field::from_function(GridPtr grid, const std::function<double(double, double)>& f) {
  Field field(grid);
  for (std::size_t j = 0; j < grid->nz(); ++j) {
    for (std::size_t i = 0; i < grid->nx(); ++i) field(i, j) = f(grid->x(i), grid->z(j));
  }
  return field;
}

bool Field::contains(double x1, double xn) const {
  const double tol = kSlack * std::max(grid_->half_width(), grid_->height());
  return std::abs(x1) <= grid_->half_width() + tol && std::abs(xn) <= grid_->height() + tol;
}

namespace {

struct CellLocation {
  std::size_t i, j;
  double tx, tz;
};

CellLocation locate(const Grid& g, double x1, double xn) {
  const double fx = (x1 + g.half_width()) / g.hx();
  const double fz = xn / g.hz();
  const auto i = static_cast<std::size_t>(
      std::clamp(std::floor(fx), 0.0, static_cast<double>(g.nx() - 2)));
  const auto j = static_cast<std::size_t>(
      std::clamp(std::floor(fz), 0.0, static_cast<double>(g.nz() - 2)));
  return {i, j, std::clamp(fx - static_cast<double>(i), 0.0, 1.0),
          std::clamp(fz - static_cast<double>(j), 0.0, 1.0)};
}

}  // namespace

double Field::sample(double x1, double xn) const {
  xn = std::abs(xn);
  if (!contains(x1, xn)) {
    throw InvalidParameter("sample point (" + std::to_string(x1) + ", " + std::to_string(xn) +
                           ") lies outside the grid");
  }
  const auto c = locate(*grid_, x1, xn);
  const Field& u = *this;
  return (1.0 - c.tz) * ((1.0 - c.tx) * u(c.i, c.j) + c.tx * u(c.i + 1, c.j)) +
         c.tz * ((1.0 - c.tx) * u(c.i, c.j + 1) + c.tx * u(c.i + 1, c.j + 1));
}

std::array<double, 2> Field::gradient(double x1, double xn) const {
  if (!contains(x1, xn) || xn < 0.0) {
    throw InvalidParameter("gradient point lies outside the grid");
  }
  const auto c = locate(*grid_, x1, xn);
  const Field& u = *this;
  const double d1 = (1.0 - c.tz) * (u(c.i + 1, c.j) - u(c.i, c.j)) +
                    c.tz * (u(c.i + 1, c.j + 1) - u(c.i, c.j + 1));
  const double dn = (1.0 - c.tx) * (u(c.i, c.j + 1) - u(c.i, c.j)) +
                    c.tx * (u(c.i + 1, c.j + 1) - u(c.i + 1, c.j));
  return {d1 / grid_->hx(), dn / grid_->hz()};
}

ThinField::ThinField(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_->nx()) throw InvalidArgument("thin field length must equal nx");
}

ThinField ThinField::trace_of(const Field& field) {
  const auto v = field.values();
  return ThinField(field.grid_ptr(), std::vector<double>(v.begin(), v.begin() + field.grid().nx()));
}

double ThinField::sample(double x1) const {
  const Grid& g = *grid_;
  const double f = std::clamp((x1 + g.half_width()) / g.hx(), 0.0, static_cast<double>(g.nx() - 1));
  const auto i = std::min(static_cast<std::size_t>(f), g.nx() - 2);
  const double t = f - static_cast<double>(i);
  return (1.0 - t) * values_[i] + t * values_[i + 1];
}

double ThinField::integrate(double a, double b) const {
  const Grid& g = *grid_;
  a = std::max(a, -g.half_width());
  b = std::min(b, g.half_width());
  if (b <= a) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < g.nx(); ++i) {
    const double xa = g.x(i);
    const double xb = g.x(i + 1);
    const double lo = std::max(a, xa);
    const double hi = std::min(b, xb);
    if (hi <= lo) continue;
    // Trapezoid on the clipped sub-segment is exact for the linear interpolant.
    const auto value_at = [&](double x) {
      const double t = (x - xa) / (xb - xa);
      return (1.0 - t) * values_[i] + t * values_[i + 1];
    };
    total += 0.5 * (hi - lo) * (value_at(lo) + value_at(hi));
  }
  return total;
}

void write_field_csv(const Field& field, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open " + path.string() + " for writing");
  const Grid& g = field.grid();
  out << "x1,xn,value\n";
  for (std::size_t j = 0; j < g.nz(); ++j) {
    for (std::size_t i = 0; i < g.nx(); ++i) {
      out << format_number(g.x(i)) << ',' << format_number(g.z(j)) << ','
          << format_number(field(i, j)) << '\n';
    }
  }
}

void write_field_raw(const Field& field, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little, "raw field format is little-endian");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot open " + path.string() + " for writing");
  const Grid& g = field.grid();
  nlohmann::json header{{"format", "thinfb-field"}, {"nx", g.nx()}, {"nz", g.nz()},
                        {"s", g.s()},               {"L", g.half_width()}, {"H", g.height()}};
  out << header.dump() << '\n';
  const auto v = field.values();
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

Field read_field_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("bad field header in " + path.string() + ": " + e.what());
  }
  if (header.value("format", "") != "thinfb-field") {
    throw InvalidArgument(path.string() + " is not a thinfb field file");
  }
  GridSpec spec{header.at("L").get<double>(), header.at("H").get<double>(),
                header.at("nx").get<std::size_t>(), header.at("nz").get<std::size_t>()};
  auto grid = Grid::build(header.at("s").get<double>(), spec);
  std::vector<double> values(grid->size());
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(values.size() * sizeof(double))) {
    throw InvalidArgument("truncated field data in " + path.string());
  }
  return Field(std::move(grid), std::move(values));
}

}  // namespace thinfb
