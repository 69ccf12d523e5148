#include "thinfb/reaction.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "thinfb/errors.hpp"

namespace thinfb {
namespace {

double poly6_density(double t) { return 6.0 * t * (1.0 - t); }
double poly6_primitive(double t) { return t * t * (3.0 - 2.0 * t); }
double poly6_derivative(double t) { return 6.0 - 12.0 * t; }

constexpr double kPi = std::numbers::pi;

double sine_density(double t) { return 0.5 * kPi * std::sin(kPi * t); }
double sine_primitive(double t) { return 0.5 * (1.0 - std::cos(kPi * t)); }
double sine_derivative(double t) { return 0.5 * kPi * kPi * std::cos(kPi * t); }

constexpr std::array<ReactionShape, 2> kShapes{{
    {"poly6", poly6_density, poly6_primitive, poly6_derivative, 1.5, 6.0},
    {"sine", sine_density, sine_primitive, sine_derivative, 0.5 * kPi, 0.5 * kPi * kPi},
}};

void require_eps(double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw InvalidParameter("eps must be positive, got " + std::to_string(eps));
  }
}

}  // namespace

ReactionProfile ReactionProfile::from_name(std::string_view name, double mass) {
  for (const auto& shape : kShapes) {
    if (shape.name == name) return ReactionProfile(shape, mass);
  }
  throw InvalidParameter("unknown reaction profile '" + std::string(name) + "'");
}

std::vector<std::string_view> ReactionProfile::registered_names() {
  std::vector<std::string_view> names;
  for (const auto& shape : kShapes) names.push_back(shape.name);
  return names;
}

ReactionProfile::ReactionProfile(const ReactionShape& shape, double mass)
    : shape_(&shape), mass_(mass) {
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    throw InvalidParameter("reaction mass must be positive, got " + std::to_string(mass));
  }
}

double ReactionProfile::lipschitz_bound() const {
  return mass_ * std::max(shape_->sup_density, shape_->sup_derivative);
}

double ReactionProfile::beta(double t) const {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  return mass_ * shape_->density(t);
}

double ReactionProfile::beta_prime(double t) const {
  // beta is only Lipschitz at 0 and 1; there the derivative from inside the
  // support is returned, so a Newton step from u = 0 sees the reaction.
  if (t < 0.0 || t > 1.0) return 0.0;
  return mass_ * shape_->derivative(t);
}

double ReactionProfile::primitive(double t) const {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return mass_;
  return mass_ * shape_->primitive(t);
}

ReactionProfile beta_default(double mass) { return ReactionProfile::from_name("poly6", mass); }

double beta_eps(const ReactionProfile& profile, double eps, double t) {
  require_eps(eps);
  return profile.beta(t / eps) / eps;
}

double beta_eps_prime(const ReactionProfile& profile, double eps, double t) {
  require_eps(eps);
  return profile.beta_prime(t / eps) / (eps * eps);
}

double B_eps(const ReactionProfile& profile, double eps, double t) {
  require_eps(eps);
  return profile.primitive(t / eps);
}

}  // namespace thinfb
