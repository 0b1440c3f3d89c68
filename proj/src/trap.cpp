#include "drumhead/trap.hpp"

#include <string>

namespace drumhead {

TrapParams TrapParams::from_hz(double axial_hz, double cyclotron_hz, double rotation_hz,
                               double delta_wall, double mass, double charge) {
  TrapParams p;
  p.omega_1 = constants::two_pi * axial_hz;
  p.cyclotron = constants::two_pi * cyclotron_hz;
  p.rotation = constants::two_pi * rotation_hz;
  p.delta_wall = delta_wall;
  p.mass = mass;
  p.charge = charge;
  p.validate();
  return p;
}

void TrapParams::validate() const {
  if (!(omega_1 > 0.0)) throw std::invalid_argument("omega_1 must be positive");
  if (!(cyclotron > 0.0)) throw std::invalid_argument("cyclotron frequency must be positive");
  if (!(rotation > 0.0 && rotation < cyclotron))
    throw std::invalid_argument("rotation frequency must satisfy 0 < omega_r < Omega_c");
  if (!(mass > 0.0)) throw std::invalid_argument("mass must be positive");
  if (charge == 0.0) throw std::invalid_argument("charge must be nonzero");
  const double b = beta(*this);
  if (!(delta_wall >= 0.0 && delta_wall < b))
    throw std::invalid_argument("rotating-wall strength must satisfy 0 <= delta_wall < beta (beta = " +
                                std::to_string(b) + ")");
}

double TrapParams::length_scale() const {
  return std::cbrt(coulomb_strength() / (mass * omega_1 * omega_1));
}

double beta_unchecked(const TrapParams& p) noexcept {
  return p.rotation * (p.cyclotron - p.rotation) / (p.omega_1 * p.omega_1) - 0.5;
}

double beta(const TrapParams& p) {
  const double b = beta_unchecked(p);
  if (!(b > 0.0))
    throw std::domain_error("beta = " + std::to_string(b) +
                            " <= 0: no radial confinement in the rotating frame");
  return b;
}

double total_potential(std::span<const Vec3> r, const TrapParams& params) {
  const double b = beta(params);
  const double half_k = 0.5 * params.mass * params.omega_1 * params.omega_1;
  const double kq2 = params.coulomb_strength();

  double trap = 0.0;
  for (const auto& p : r) {
    trap += half_k * (p.z * p.z + b * (p.x * p.x + p.y * p.y) +
                      params.delta_wall * (p.x * p.x - p.y * p.y));
  }
  double coulomb = 0.0;
  for (std::size_t j = 0; j < r.size(); ++j) {
    for (std::size_t k = j + 1; k < r.size(); ++k) {
      const double d = norm(r[j] - r[k]);
      if (d == 0.0)
        throw std::domain_error("ions " + std::to_string(j) + " and " + std::to_string(k) +
                                " coincide");
      coulomb += kq2 / d;
    }
  }
  return trap + coulomb;
}

}  // namespace drumhead
