#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace thinfb {

/// Exact integral of x^{1-2s} over [a, b], 0 <= a < b.
double face_weight(double s, double a, double b);

/// Exact integral of x^{2s-1} (the reciprocal weight) over [a, b], 0 <= a < b.
double reciprocal_weight_integral(double s, double a, double b);

struct GridSpec {
  double half_width = 1.0;  // x1 in [-L, L]
  double height = 1.0;      // xn in [0, H]
  std::size_t nx = 129;     // node counts
  std::size_t nz = 65;
};

/// Uniform node grid on [-L, L] x [0, H] carrying the face-integrated
/// weights of div(|xn|^{1-2s} grad). Node (i, j) sits at
/// (-L + i hx, j hz); row j = 0 is the thin plane xn = 0.
///
/// Edge energies of the discrete Dirichlet form are
///   horizontal edge in row j:    horizontal_weight(j) * (du)^2 / hx
///   vertical edge j -> j+1:      vertical_weight(j) * column_width(i) * (du)^2 / hz
/// horizontal_weight integrates the weight over the control extent of row j.
/// vertical_weight is the flux-exact (harmonic) mean of the weight on the
/// segment, which reproduces the xn^{2s} boundary behaviour in the first cell.
class Grid {
 public:
  static std::shared_ptr<const Grid> build(double s, const GridSpec& spec);

  double s() const { return s_; }
  double half_width() const { return spec_.half_width; }
  double height() const { return spec_.height; }
  std::size_t nx() const { return spec_.nx; }
  std::size_t nz() const { return spec_.nz; }
  std::size_t size() const { return spec_.nx * spec_.nz; }
  const GridSpec& spec() const { return spec_; }
  double hx() const { return hx_; }
  double hz() const { return hz_; }

  double x(std::size_t i) const;
  double z(std::size_t j) const;
  std::size_t index(std::size_t i, std::size_t j) const { return j * spec_.nx + i; }

  double horizontal_weight(std::size_t j) const { return horizontal_weight_[j]; }
  double vertical_weight(std::size_t j) const { return vertical_weight_[j]; }
  /// Transverse measure of a vertical edge in column i (hx, halved at the walls).
  double column_width(std::size_t i) const;

  bool on_dirichlet_boundary(std::size_t i, std::size_t j) const {
    return i == 0 || i + 1 == spec_.nx || j + 1 == spec_.nz;
  }

  /// Weighted measure of the rectangle [xa, xb] x [za, zb] (za >= 0).
  double weighted_area(double xa, double xb, double za, double zb) const;

 private:
  Grid(double s, const GridSpec& spec);

  double s_;
  GridSpec spec_;
  double hx_;
  double hz_;
  std::vector<double> horizontal_weight_;
  std::vector<double> vertical_weight_;
};

using GridPtr = std::shared_ptr<const Grid>;

/// Nodal values on a grid, row-major with the thin row first.
class Field {
 public:
  explicit Field(GridPtr grid, double fill = 0.0);
  Field(GridPtr grid, std::vector<double> values);

  static Field from_function(GridPtr grid, const std::function<double(double, double)>& f);

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double operator()(std::size_t i, std::size_t j) const { return values_[grid_->index(i, j)]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[grid_->index(i, j)]; }

  /// Bilinear interpolation with even reflection across xn = 0.
  double sample(double x1, double xn) const;
  /// Gradient of the bilinear interpolant at (x1, xn), xn >= 0.
  std::array<double, 2> gradient(double x1, double xn) const;

  bool contains(double x1, double xn) const;

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

/// Values on the thin row xn = 0.
class ThinField {
 public:
  ThinField(GridPtr grid, std::vector<double> values);

  static ThinField trace_of(const Field& field);

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  /// Integral of the piecewise-linear interpolant over [a, b] (clipped to the grid).
  double integrate(double a, double b) const;
  double sample(double x1) const;

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

/// CSV with header "x1,xn,value", one node per line, 17 significant digits.
void write_field_csv(const Field& field, const std::filesystem::path& path);

/// One-line JSON header (dims, s, L, H) followed by nx*nz little-endian
/// 64-bit floats in row-major order.
void write_field_raw(const Field& field, const std::filesystem::path& path);
Field read_field_raw(const std::filesystem::path& path);

}  // namespace thinfb
