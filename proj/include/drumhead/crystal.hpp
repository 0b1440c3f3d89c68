#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "drumhead/trap.hpp"

namespace drumhead {

/// Equilibrium ion positions in the rotating frame (meters).
struct CrystalLattice {
  TrapParams params;
  std::vector<Vec3> positions;
  bool converged = false;
  double residual_force_max = 0.0;  // N
  bool planar = false;
  double energy = 0.0;  // J
  std::uint64_t seed = 0;
  int iterations = 0;
  /// Energy change (J) of every accepted minimizer step, when requested.
  std::vector<double> descent_log;

  std::size_t n_ions() const { return positions.size(); }
};

struct SolveOptions {
  /// Largest gradient component allowed at the returned positions, in units of
  /// the trap force scale M omega_1^2 l0.
  double gradient_tolerance = 1e-11;
  double relative_energy_tolerance = 1e-12;
  int max_iterations = 200000;
  int lbfgs_memory = 12;
  std::uint64_t seed = 1;
  /// Relative in-plane jitter of the seed lattice; the z jitter is a fixed
  /// fraction of it so that planarity is decided by the energetics.
  double jitter = 0.05;
  /// max|z| <= planarity_tolerance * mean nearest-neighbor spacing marks a plane.
  double planarity_tolerance = 1e-6;
  bool record_descent = false;
};

/// Thrown when the minimizer exhausts its budget; carries the best state found.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, CrystalLattice best)
      : std::runtime_error(what), best_(std::move(best)) {}
  const CrystalLattice& best() const noexcept { return best_; }

 private:
  CrystalLattice best_;
};

/// Triangular-lattice disk patch plus deterministic jitter, in meters.
std::vector<Vec3> seed_configuration(const TrapParams& params, std::size_t n_ions,
                                     std::uint64_t seed, double jitter = 0.05);

/// Local minimum of `total_potential` by L-BFGS. Non-planar minima are returned
/// with planar = false rather than thrown.
CrystalLattice solve_equilibrium(const TrapParams& params, std::size_t n_ions,
                                 const SolveOptions& options = {},
                                 std::optional<std::vector<Vec3>> seed_positions = std::nullopt);

/// Largest gradient component of the total potential at `positions`, in newtons.
double max_residual_force(std::span<const Vec3> positions, const TrapParams& params);

struct LatticeStats {
  std::optional<double> mean_spacing;  // m; absent for a single ion
  double diameter = 0.0;               // m
};

LatticeStats lattice_stats(const CrystalLattice& lattice);

bool is_planar(std::span<const Vec3> positions, double reference_spacing, double tolerance);

}  // namespace drumhead
