#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "drumhead/dynamics.hpp"

namespace drumhead {

// Classical occupation nbar = k_B T / (hbar omega), without the +1/2.
double occupation_to_temperature(double nbar, double omega);
double temperature_to_occupation(double kelvin, double omega);

struct SpectrumPoint {
  double mu_hz = 0.0;
  double p_up = 0.0;
  double sigma = 0.0;
};

struct ObservedMetadata {
  double n_ions = 0.0;
  double n_ions_err = 0.0;
  double tau = 0.0;    // s
  double t_pi = 0.0;   // s
  double theta_r = 0.0;          // rad
  double theta_r_rel_err = 0.0;  // fractional, e.g. 0.05
};

struct ObservedSpectrum {
  std::vector<SpectrumPoint> points;
  ObservedMetadata meta;

  void validate() const;
};

struct FitResult {
  double nbar = 0.0;
  double nbar_err = 0.0;       // statistical and systematic in quadrature
  double nbar_stat_err = 0.0;
  double nbar_sys_err = 0.0;
  double temperature = 0.0;    // K
  double temperature_err = 0.0;
  double gamma_used = 0.0;     // 1/s
  double chi2_reduced = 0.0;
  std::size_t target_mode = 0;
  std::size_t n_points = 0;
  bool at_boundary = false;
  bool insufficient_signal = false;
  std::string systematic_note;
};

class FitError : public std::runtime_error {
 public:
  enum class Kind { non_convergence, insufficient_span, unphysical_background, invalid_input };
  FitError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct FitOptions {
  /// Occupations of the non-target modes; defaults to zero when absent.
  std::optional<ThermalState> background_modes;
  double nbar_max = 1e6;
  int max_iterations = 200;
};

/// Weighted least-squares fit of the target mode's occupation to P_up data,
/// with every other model input (forces, Gamma, sequence) taken from `drive`.
/// A best fit at nbar = 0 is returned with `at_boundary` set rather than thrown.
FitResult fit_occupation(const ObservedSpectrum& data, const ModeSpectrum& spectrum, const DriveConfig& drive,
                         std::size_t target_mode, const FitOptions& options = {});

/// Gamma from off-resonant points: -ln(1 - 2 Pbar) / T_odf with Pbar the
/// inverse-variance weighted mean. Requires >= 3 points, each detuned from every
/// mode by at least `min_loops` x 2 pi / tau.
double fit_background_gamma(const std::vector<SpectrumPoint>& points, const ModeSpectrum& spectrum,
                            const PulseSequence& sequence, double min_loops = 5.0);

/// Forward model sampled on `grid_hz` with Gaussian noise of width sigma
/// (sigma = 0 gives the exact model). Probabilities are clamped to [0, 1].
ObservedSpectrum synthesize_spectrum(const DriveConfig& drive, const ModeSpectrum& spectrum,
                                     const ThermalState& thermal, const std::vector<double>& grid_hz,
                                     double sigma, std::uint64_t seed);

}  // namespace drumhead
