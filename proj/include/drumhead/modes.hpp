#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "drumhead/crystal.hpp"

namespace drumhead {

/// Mass-normalized transverse Hessian, entries in (rad/s)^2.
struct StiffnessMatrix {
  Eigen::MatrixXd entries;
  std::uint64_t source_lattice_hash = 0;
  double ion_mass = constants::mass_be9;  // kg, carried through to the spectrum
};

/// Transverse drumhead modes, sorted by descending frequency (index 0 is the COM).
///
/// Column m of `b` is the unit eigenvector of mode m; b(j, m) is the relative
/// displacement of ion j. Unstable directions (negative stiffness eigenvalues)
/// are reported through `stable`/`unstable_modes`, and their `omega` entry holds
/// -sqrt(|eigenvalue|).
struct ModeSpectrum {
  std::vector<double> omega;        // rad/s
  std::vector<double> eigenvalues;  // (rad/s)^2
  Eigen::MatrixXd b;
  /// Modes sharing a label are numerically degenerate (|d omega| / omega < 1e-10).
  std::vector<int> cluster;
  bool stable = true;
  std::vector<int> unstable_modes;
  std::uint64_t source_lattice_hash = 0;
  double ion_mass = constants::mass_be9;

  std::size_t size() const { return omega.size(); }
};

/// FNV-1a over the raw position bytes; ties a spectrum to the lattice it came from.
std::uint64_t lattice_hash(const CrystalLattice& lattice);

/// Requires a converged planar lattice; throws std::invalid_argument otherwise.
StiffnessMatrix transverse_stiffness(const CrystalLattice& lattice, const TrapParams& params);

/// Same matrix assembled by the serial reference kernel.
StiffnessMatrix transverse_stiffness_serial(const CrystalLattice& lattice, const TrapParams& params);

ModeSpectrum diagonalize(const StiffnessMatrix& stiffness);

struct ModeHistogram {
  double bin_width_hz = 0.0;
  int first_bin = 0;  // bin i covers [i w, (i + 1) w)
  std::vector<int> counts;

  double bin_center_hz(std::size_t k) const { return (first_bin + static_cast<double>(k) + 0.5) * bin_width_hz; }
  double bin_lower_hz(std::size_t k) const { return (first_bin + static_cast<double>(k)) * bin_width_hz; }
  /// Bin index (into counts) holding frequency f, or -1 when f is outside.
  long index_of(double f_hz) const;
};

ModeHistogram mode_histogram(const ModeSpectrum& spectrum, double bin_width_hz);

/// Number of nearest-neighbor pairs (distance within `shell` x the pair's
/// nearest spacing) whose displacements have opposite sign in mode m.
int neighbor_sign_flips(const CrystalLattice& lattice, const ModeSpectrum& spectrum, std::size_t m,
                        double shell = 1.2);

}  // namespace drumhead
