#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace thinfb {

/// Unit-mass reaction shape on [0, 1]. All callbacks are evaluated only on
/// t in [0, 1]; the profile handles the support cut-off.
struct ReactionShape {
  std::string_view name;
  double (*density)(double t);     // integrates to 1 over [0, 1]
  double (*primitive)(double t);   // 0 at t = 0, 1 at t = 1
  double (*derivative)(double t);
  double sup_density;              // sup |density|
  double sup_derivative;           // sup |derivative|
};

/// Combustion-type reaction beta with total mass M and its primitive B.
///
/// beta vanishes outside (0, 1), is positive inside, and integrates to M.
/// Instances are immutable and cheap to copy.
class ReactionProfile {
 public:
  /// Looks a registered shape up by name ("poly6", "sine").
  static ReactionProfile from_name(std::string_view name, double mass);
  static std::vector<std::string_view> registered_names();

  ReactionProfile(const ReactionShape& shape, double mass);

  double mass() const { return mass_; }
  /// max(sup|beta|, sup|beta'|).
  double lipschitz_bound() const;
  std::string_view name() const { return shape_->name; }

  double beta(double t) const;
  double beta_prime(double t) const;
  /// B(t) = integral of beta over [0, t]; M for t >= 1.
  double primitive(double t) const;

 private:
  const ReactionShape* shape_;
  double mass_;
};

/// beta(t) = 6M t(1-t) on [0, 1]; B(t) = M t^2 (3 - 2t).
ReactionProfile beta_default(double mass);

/// beta_eps(t) = beta(t/eps)/eps.
double beta_eps(const ReactionProfile& profile, double eps, double t);
/// d/dt beta_eps(t) = beta'(t/eps)/eps^2.
double beta_eps_prime(const ReactionProfile& profile, double eps, double t);
/// B_eps(t) = B(t/eps).
double B_eps(const ReactionProfile& profile, double eps, double t);

}  // namespace thinfb
