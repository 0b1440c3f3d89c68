#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "drumhead/crystal.hpp"
#include "drumhead/dynamics.hpp"
#include "drumhead/modes.hpp"
#include "drumhead/odf.hpp"
#include "drumhead/thermometry.hpp"

namespace drumhead::io {

/// Malformed or inconsistent input. `line` is 1-based, 0 when unknown.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Unreadable or unwritable files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Run configuration, kept in file units (Hz, degrees, seconds, meters) so that
// load(save(c)) == c holds exactly. Conversions to SI happen in the accessors.

struct TrapSpec {
  double axial_hz = 795e3;
  double cyclotron_hz = 7.6e6;
  double rotation_hz = 43.2e3;
  double delta_wall = 0.0;
  double mass_kg = constants::mass_be9;
  double charge_c = constants::elementary_charge;
  friend bool operator==(const TrapSpec&, const TrapSpec&) = default;
};

struct BeamSpec {
  double wavelength_m = 313.133e-9;
  double theta_r_deg = 4.8;
  double theta_r_rel_err = 0.05;
  double waist_z_m = 100e-6;
  double waist_x_m = 1e-3;
  double misalignment_deg = 0.0;
  friend bool operator==(const BeamSpec&, const BeamSpec&) = default;
};

struct DriveSpec {
  // Exactly one of the three force inputs is set.
  std::optional<double> force_n;
  std::optional<std::vector<double>> forces_n;
  std::optional<double> intensity_w_cm2;
  double gamma_per_s = 0.0;
  std::string sequence = "spin_echo";  // or "ramsey"
  double tau_s = 500e-6;
  double t_pi_s = 65e-6;
  friend bool operator==(const DriveSpec&, const DriveSpec&) = default;
};

struct ThermalSpec {
  std::optional<std::vector<double>> nbar;   // one per mode
  std::optional<double> temperature_k;       // every mode, or every non-COM mode with com_temperature_k
  std::optional<double> com_temperature_k;
  friend bool operator==(const ThermalSpec&, const ThermalSpec&) = default;
};

struct SweepSpec {
  double start_hz = 0.0;
  double stop_hz = 0.0;
  double step_hz = 0.0;
  bool per_ion = false;
  friend bool operator==(const SweepSpec&, const SweepSpec&) = default;
};

struct SolverSpec {
  double gradient_tolerance = 1e-11;
  int max_iterations = 200000;
  double jitter = 0.05;
  double planarity_tolerance = 1e-6;
  friend bool operator==(const SolverSpec&, const SolverSpec&) = default;
};

struct TrajectorySpec {
  std::size_t mode_index = 0;
  double mu_hz = 0.0;
  std::size_t n_samples = 200;
  friend bool operator==(const TrajectorySpec&, const TrajectorySpec&) = default;
};

struct FitSpec {
  std::size_t target_mode = 0;
  double synthetic_sigma = 0.02;
  double nbar_max = 1e6;
  friend bool operator==(const FitSpec&, const FitSpec&) = default;
};

struct Seeds {
  std::uint64_t lattice = 1;
  std::uint64_t noise = 1;
  friend bool operator==(const Seeds&, const Seeds&) = default;
};

struct RunConfig {
  TrapSpec trap;
  std::size_t n_ions = 1;
  BeamSpec beam;
  DriveSpec drive;
  ThermalSpec thermal;
  std::optional<SweepSpec> sweep;
  SolverSpec solver;
  std::optional<TrajectorySpec> trajectory;
  FitSpec fit;
  Seeds seeds;

  TrapParams trap_params() const;
  BeamGeometry beam_geometry() const;
  SolveOptions solve_options() const;
  PulseSequence pulse_sequence() const;
  /// Forces resolved for `n_ions`; mu_r is left at zero.
  DriveConfig drive_config() const;
  /// Resolves the thermal section against a computed spectrum.
  ThermalState thermal_state(const ModeSpectrum& spectrum) const;
  std::vector<double> sweep_grid() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parses and validates a configuration document. Errors carry the line of the
/// offending key where it can be located.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
std::string dump_config(const RunConfig& config);
void save_config(const RunConfig& config, const std::filesystem::path& path);

/// Writes through a temporary sibling and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

std::string lattice_to_json(const CrystalLattice& lattice);
CrystalLattice lattice_from_json(const std::string& text);
std::string lattice_to_csv(const CrystalLattice& lattice);

std::string spectrum_to_json(const ModeSpectrum& spectrum);
ModeSpectrum spectrum_from_json(const std::string& text);

std::string histogram_to_csv(const ModeHistogram& histogram);
/// Reads (bin_center_hz, count) rows back.
std::vector<std::pair<double, int>> histogram_rows_from_csv(const std::string& text);

std::string trace_to_csv(const SpectrumTrace& trace);
SpectrumTrace trace_from_csv(const std::string& text);

std::string trajectory_to_csv(const std::vector<TrajectoryPoint>& points);
std::vector<TrajectoryPoint> trajectory_from_csv(const std::string& text);

std::string observed_to_csv(const ObservedSpectrum& data);
std::string observed_meta_to_json(const ObservedMetadata& meta);
/// CSV rows plus the optional JSON sidecar text.
ObservedSpectrum observed_from_text(const std::string& csv, const std::optional<std::string>& sidecar_json);

std::string fit_to_json(const FitResult& fit);

}  // namespace drumhead::io
