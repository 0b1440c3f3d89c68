#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drumhead/modes.hpp"
#include "drumhead/odf.hpp"

namespace drumhead {

/// Ground-state extent sqrt(hbar / 2 M omega) of a mode, in meters.
double ground_state_length(double omega, double mass);

/// Mode response of a single ODF arm of duration t and drive phase phi:
///
///   [omega cos(phi) - i mu sin(phi) - e^{i omega t}(omega cos(mu t + phi) - i mu sin(mu t + phi))]
///   / (mu^2 - omega^2)
///
/// in seconds. For |mu - omega| / omega < 1e-8 the 0/0 form is replaced by its
/// Taylor expansion to second order in the detuning.
std::complex<double> arm_response(double mu, double omega, double t, double phi);

/// Spin-echo mode response: arm(tau, 0) - arm(tau, (tau + t_pi)(mu - omega)).
std::complex<double> echo_response(double mu, double omega, double tau, double t_pi);

enum class FieldKind { single_arm, spin_echo };

/// Spin-dependent displacements alpha(j, m), dimensionless.
struct DisplacementField {
  Eigen::MatrixXcd alpha;
  FieldKind kind = FieldKind::single_arm;
  double mu_r = 0.0;
};

/// alpha_jm(t, phi) = F_j b_jm z0m / hbar * arm_response(mu_R, omega_m, t, phi).
DisplacementField alpha_single_arm(const DriveConfig& drive, const ModeSpectrum& spectrum, double t,
                                   double phi);

/// Requires a SpinEcho sequence in `drive`.
DisplacementField alpha_spin_echo(const DriveConfig& drive, const ModeSpectrum& spectrum);

/// Field produced by the drive's own pulse sequence (Ramsey: one arm at phi = 0).
DisplacementField sequence_field(const DriveConfig& drive, const ModeSpectrum& spectrum);

struct ThermalState {
  std::vector<double> nbar;

  /// nbar_m = k_B T_m / (hbar omega_m), the classical occupation without the +1/2.
  static ThermalState from_temperatures(const std::vector<double>& kelvin, const ModeSpectrum& spectrum);
  /// COM at `com_kelvin`, every other mode at `other_kelvin`.
  static ThermalState com_and_rest(double com_kelvin, double other_kelvin, const ModeSpectrum& spectrum);
  void validate(std::size_t n_modes) const;
};

struct BrightProbability {
  std::vector<double> per_ion;
  double mean = 0.0;
};

/// P_up(j) = 1/2 [1 - exp(-gamma T) exp(-2 sum_m |alpha_jm|^2 (2 nbar_m + 1))], T = total ODF time.
BrightProbability bright_probability(const DisplacementField& field, const ThermalState& thermal,
                                     double gamma, double total_odf_time);

/// Flat level reached when no mode is driven: 1/2 (1 - exp(-gamma T)).
double background_probability(double gamma, double total_odf_time);

struct SpectrumTrace {
  std::vector<double> mu_over_2pi;  // Hz
  std::vector<double> p_up_mean;
  /// Row i holds the per-ion probabilities at grid point i, when requested.
  std::optional<Eigen::MatrixXd> p_up_ion;
};

/// P_up versus beat note for the drive's sequence. `mu_grid_hz` must be sorted.
/// Grid points are evaluated in parallel; the result does not depend on the
/// thread count.
SpectrumTrace sweep_spectrum(const DriveConfig& drive_template, const ModeSpectrum& spectrum,
                             const ThermalState& thermal, const std::vector<double>& mu_grid_hz,
                             bool per_ion = false);

/// Serial reference: builds the full alpha field at every grid point.
SpectrumTrace sweep_spectrum_reference(const DriveConfig& drive_template, const ModeSpectrum& spectrum,
                                       const ThermalState& thermal, const std::vector<double>& mu_grid_hz,
                                       bool per_ion = false);

/// Evenly spaced grid [start, stop] in Hz, inclusive of stop when it lands on a step.
std::vector<double> frequency_grid(double start_hz, double stop_hz, double step_hz);

struct TrajectoryPoint {
  double t = 0.0;  // s since the first ODF pulse
  std::complex<double> alpha;
  int arm = 1;
};

/// Collective displacement sum_j alpha_jm of |up>_N sampled through each arm.
/// The second spin-echo arm starts at tau + t_pi and moves from alpha(tau, 0)
/// toward alpha_SE.
std::vector<TrajectoryPoint> phase_space_trajectory(const DriveConfig& drive, const ModeSpectrum& spectrum,
                                                    std::size_t mode_index, std::size_t n_samples);

struct Excursion {
  double rms_m = 0.0;      // RMS over the uniform spin superposition
  double aligned_m = 0.0;  // all spins aligned
  std::string convention;
};

/// Ion displacement produced by mode `mode_index` of `field`:
///   rms     = 2 z0m sqrt(sum_j |alpha_jm|^2 / N)
///   aligned = 2 z0m |sum_j alpha_jm| / sqrt(N)
/// For the COM with a uniform force the aligned value is 2 z01 sqrt(N) |alpha_j1|.
Excursion mean_excursion(const DisplacementField& field, const ModeSpectrum& spectrum, std::size_t mode_index);

/// Pairwise phase J_jk(t) of the spin-spin part of the evolution (dimensionless,
/// radians). Stable at mu_R = omega_m.
Eigen::MatrixXd spin_spin_coupling(const DriveConfig& drive, const ModeSpectrum& spectrum, double t);

/// Rate J = F^2 z01^2 omega_1 / (2 hbar^2 N (mu^2 - omega_1^2)) bounding |J(t)| <~ J t near the COM.
double com_coupling_rate(double force, double z01, double omega_1, double mu, std::size_t n_ions);

struct ValidityEstimate {
  double ratio = 0.0;
  bool warning = false;  // ratio > 0.1
};

/// P_SS / P_SM ~ (F^2 / 4 hbar^2) z01^2 t^2 / (2 nbar + 1).
ValidityEstimate validity_ratio(double force, double z01, double nbar, double t);

}  // namespace drumhead
