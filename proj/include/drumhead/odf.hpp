#pragma once

#include <stdexcept>
#include <variant>
#include <vector>

namespace drumhead {

/// Two-beam ODF geometry. Angles in radians, lengths in meters.
struct BeamGeometry {
  double wavelength = 313.133e-9;
  double theta_r = 0.0;  // full crossing angle
  double waist_z = 100e-6;
  double waist_x = 1e-3;
  double misalignment_err = 0.0;  // reported only; the dynamics assume delta_k along z

  void validate() const;
  friend bool operator==(const BeamGeometry&, const BeamGeometry&) = default;
};

/// Single-beam Stark shifts (rad/s) for pi (A) and sigma (B) polarization.
struct StarkCoefficients {
  double a_up = 0.0;
  double a_dn = 0.0;
  double b_up = 0.0;
  double b_dn = 0.0;
};

class NoNullAngleError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// delta_k = 2 (2 pi / lambda) sin(theta_R / 2), in 1/m.
double effective_wavevector(const BeamGeometry& geom);

/// Period of the moving optical lattice, 2 pi / delta_k.
double lattice_wavelength(const BeamGeometry& geom);

/// Differential (qubit) AC Stark shift at polarization angle phi_p, rad/s.
double acss_shift(const StarkCoefficients& c, double phi_p);

/// Polarization angle in (0, pi/2) that nulls the differential Stark shift.
/// Throws NoNullAngleError when A_up - A_dn and B_up - B_dn do not have opposite signs.
double acss_null_angle(const StarkCoefficients& c);

struct StateForces {
  double up = 0.0;  // N
  double down = 0.0;
  /// |F_up + F_down| / |F_up| < 1e-6, the antisymmetric operating condition.
  bool antisymmetric = false;
};

StateForces state_dependent_forces(const StarkCoefficients& c, double phi_p, double delta_k);

/// Force per ion at the calibrated operating point (313.133 nm, 4.8 degrees,
/// -63.8 GHz detuning): 1.5e-23 N per W/cm^2.
double force_from_intensity(double intensity_w_per_cm2);

inline constexpr double kForcePerIntensity = 1.5e-23;  // N / (W/cm^2)

struct Ramsey {
  double tau = 0.0;  // s
  friend bool operator==(const Ramsey&, const Ramsey&) = default;
};

struct SpinEcho {
  double tau = 0.0;  // s, one arm
  double t_pi = 0.0;
  friend bool operator==(const SpinEcho&, const SpinEcho&) = default;
};

using PulseSequence = std::variant<Ramsey, SpinEcho>;

double arm_duration(const PulseSequence& seq);
/// Total time the ODF beams are on: tau for Ramsey, 2 tau for spin echo.
double odf_on_time(const PulseSequence& seq);

struct DriveConfig {
  /// One entry for a uniform force, or one per ion.
  std::vector<double> forces{0.0};  // N
  double mu_r = 0.0;                // rad/s
  double gamma = 0.0;               // 1/s
  PulseSequence sequence = SpinEcho{};

  double force_on(std::size_t ion) const { return forces.size() == 1 ? forces[0] : forces.at(ion); }
  /// (max - min) / mean over the per-ion forces.
  double force_spread() const;
  bool spread_flagged() const { return force_spread() > 0.2; }
  /// Throws std::invalid_argument when an invariant is violated for n_ions ions.
  void validate(std::size_t n_ions) const;

  friend bool operator==(const DriveConfig&, const DriveConfig&) = default;
};

}  // namespace drumhead
