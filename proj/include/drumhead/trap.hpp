#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

#include "drumhead/constants.hpp"

namespace drumhead {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  friend Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
  friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, const Vec3& a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

/// Penning-trap and ion constants in SI units, angular frequencies in rad/s.
///
/// Construct through `from_hz` (or call `validate`) so that the invariants hold:
/// positive axial and cyclotron frequencies, 0 < omega_r < Omega_c, positive
/// radial confinement beta, and 0 <= delta_wall < beta.
struct TrapParams {
  double omega_1 = 0.0;    // axial COM frequency
  double cyclotron = 0.0;  // Omega_c
  double rotation = 0.0;   // omega_r
  double delta_wall = 0.0;
  double mass = constants::mass_be9;
  double charge = constants::elementary_charge;

  static TrapParams from_hz(double axial_hz, double cyclotron_hz, double rotation_hz,
                            double delta_wall = 0.0, double mass = constants::mass_be9,
                            double charge = constants::elementary_charge);

  void validate() const;

  /// k q^2 in J m.
  double coulomb_strength() const { return constants::coulomb_k * charge * charge; }
  /// (k q^2 / M omega_1^2)^(1/3); the natural length of the trap-plus-Coulomb problem.
  double length_scale() const;
  /// M omega_1^2 l0, the force unit matching length_scale.
  double force_scale() const { return mass * omega_1 * omega_1 * length_scale(); }
  double energy_scale() const { return force_scale() * length_scale(); }

  friend bool operator==(const TrapParams&, const TrapParams&) = default;
};

/// Rotating-frame radial confinement omega_r (Omega_c - omega_r) / omega_1^2 - 1/2.
/// Throws std::domain_error when the result is not positive.
double beta(const TrapParams& params);

/// Same expression without the positivity check; used when mapping stability windows.
double beta_unchecked(const TrapParams& params) noexcept;

/// Trap (with rotating-wall quadrupole) plus pairwise Coulomb energy in joules.
/// Throws std::domain_error on coincident ions.
double total_potential(std::span<const Vec3> positions_m, const TrapParams& params);

}  // namespace drumhead
