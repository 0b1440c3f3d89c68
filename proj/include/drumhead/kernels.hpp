#pragma once

#include <span>

#include <Eigen/Dense>

#include "drumhead/trap.hpp"

// Pairwise kernels in reduced units: lengths in l0 = (k q^2 / M omega_1^2)^(1/3),
// energies in M omega_1^2 l0^2, stiffness in omega_1^2. The top-level functions
// are OpenMP-parallel; `serial` holds the straightforward reference versions.
//
// The parallel kernels never reduce across threads: every ion's contribution is
// accumulated by one thread in a fixed order, so results do not depend on the
// thread count.
namespace drumhead::kernels {

struct ReducedTrap {
  double beta = 0.0;
  double wall = 0.0;
};

double energy(std::span<const Vec3> r, const ReducedTrap& trap);

void gradient(std::span<const Vec3> r, const ReducedTrap& trap, std::span<Vec3> grad);

/// E(r + step) - E(r), evaluated term by term so that the difference keeps full
/// relative precision even when it is many orders below E itself.
double energy_difference(std::span<const Vec3> r, std::span<const Vec3> step,
                         const ReducedTrap& trap);

/// Transverse (z-block) Hessian at a planar configuration.
Eigen::MatrixXd transverse_stiffness(std::span<const Vec3> r);

/// Smallest pairwise distance; zero flags coincident ions.
double min_pair_distance(std::span<const Vec3> r);

namespace serial {

double energy(std::span<const Vec3> r, const ReducedTrap& trap);
void gradient(std::span<const Vec3> r, const ReducedTrap& trap, std::span<Vec3> grad);
double energy_difference(std::span<const Vec3> r, std::span<const Vec3> step,
                         const ReducedTrap& trap);
Eigen::MatrixXd transverse_stiffness(std::span<const Vec3> r);

}  // namespace serial

}  // namespace drumhead::kernels
