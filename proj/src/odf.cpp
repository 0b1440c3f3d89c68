#include "drumhead/odf.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "drumhead/constants.hpp"

namespace drumhead {

void BeamGeometry::validate() const {
  if (!(wavelength > 0.0)) throw std::invalid_argument("beam wavelength must be positive");
  if (!(theta_r > 0.0 && theta_r < std::numbers::pi / 2))
    throw std::invalid_argument("crossing angle must lie in (0, 90) degrees");
}

double effective_wavevector(const BeamGeometry& geom) {
  return 2.0 * (constants::two_pi / geom.wavelength) * std::sin(0.5 * geom.theta_r);
}

double lattice_wavelength(const BeamGeometry& geom) {
  return constants::two_pi / effective_wavevector(geom);
}

double acss_shift(const StarkCoefficients& c, double phi_p) {
  const double cs = std::cos(phi_p);
  const double sn = std::sin(phi_p);
  return (c.a_up - c.a_dn) * cs * cs + (c.b_up - c.b_dn) * sn * sn;
}

double acss_null_angle(const StarkCoefficients& c) {
  const double da = c.a_up - c.a_dn;
  const double db = c.b_up - c.b_dn;
  if (da == 0.0 || db == 0.0 || (da > 0.0) == (db > 0.0))
    throw NoNullAngleError("differential Stark shifts for pi and sigma light must have opposite signs");
  // tan^2 phi = -da / db; atan2 keeps the ratio well conditioned when one side is tiny.
  return std::atan2(std::sqrt(std::abs(da)), std::sqrt(std::abs(db)));
}

StateForces state_dependent_forces(const StarkCoefficients& c, double phi_p, double delta_k) {
  const double c2 = std::cos(phi_p) * std::cos(phi_p);
  const double s2 = std::sin(phi_p) * std::sin(phi_p);
  StateForces f;
  f.up = 2.0 * delta_k * constants::hbar * (c.a_up * c2 - c.b_up * s2);
  f.down = 2.0 * delta_k * constants::hbar * (c.a_dn * c2 - c.b_dn * s2);
  f.antisymmetric = f.up != 0.0 && std::abs(f.up + f.down) / std::abs(f.up) < 1e-6;
  return f;
}

double force_from_intensity(double intensity) {
  if (!(intensity >= 0.0)) throw std::invalid_argument("intensity must be non-negative");
  return kForcePerIntensity * intensity;
}

double arm_duration(const PulseSequence& seq) {
  return std::visit([](const auto& s) { return s.tau; }, seq);
}

double odf_on_time(const PulseSequence& seq) {
  return std::holds_alternative<SpinEcho>(seq) ? 2.0 * arm_duration(seq) : arm_duration(seq);
}

double DriveConfig::force_spread() const {
  if (forces.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(forces.begin(), forces.end());
  const double mean = std::accumulate(forces.begin(), forces.end(), 0.0) / static_cast<double>(forces.size());
  return mean > 0.0 ? (*hi - *lo) / mean : 0.0;
}

void DriveConfig::validate(std::size_t n_ions) const {
  if (forces.empty()) throw std::invalid_argument("drive needs at least one force value");
  if (forces.size() != 1 && forces.size() != n_ions)
    throw std::invalid_argument("per-ion force list has " + std::to_string(forces.size()) +
                                " entries for " + std::to_string(n_ions) + " ions");
  for (double f : forces)
    if (!(f >= 0.0)) throw std::invalid_argument("forces must be non-negative");
  if (!(gamma >= 0.0)) throw std::invalid_argument("decoherence rate must be non-negative");
  if (!(arm_duration(sequence) > 0.0)) throw std::invalid_argument("arm duration tau must be positive");
  if (const auto* se = std::get_if<SpinEcho>(&sequence); se && !(se->t_pi >= 0.0))
    throw std::invalid_argument("pi-pulse time must be non-negative");
}

}  // namespace drumhead
