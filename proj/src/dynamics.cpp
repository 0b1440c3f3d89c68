#include "drumhead/dynamics.hpp"

#include <cmath>
#include <stdexcept>

#include "drumhead/constants.hpp"
#include "drumhead/thermometry.hpp"

namespace drumhead {
namespace {

using cd = std::complex<double>;
constexpr cd I{0.0, 1.0};

// Relative detuning below which arm_response switches to its Taylor expansion.
constexpr double kResonanceSwitch = 1e-8;

void require_stable(const ModeSpectrum& s) {
  if (!s.stable) throw std::invalid_argument("mode spectrum is unstable; displacements are undefined");
}

// Resonant expansion of the arm response. With g(mu) the numerator and
// g(omega) = 0, g = g1 d + g2 d^2 / 2 + g3 d^3 / 6 + ..., and the response is
// (g1 + g2 d / 2 + g3 d^2 / 6) / (2 omega + d).
cd arm_response_series(double mu, double omega, double t, double phi) {
  const double d = mu - omega;
  const double th = omega * t + phi;
  const double s = std::sin(th);
  const double c = std::cos(th);
  const cd rot = std::exp(I * (omega * t));
  const cd h1 = -omega * t * s - I * s - I * omega * t * c;
  const cd h2 = -omega * t * t * c - 2.0 * I * t * c + I * omega * t * t * s;
  const cd h3 = omega * t * t * t * s + 3.0 * I * t * t * s + I * omega * t * t * t * c;
  const cd g1 = -I * std::sin(phi) - rot * h1;
  const cd g2 = -rot * h2;
  const cd g3 = -rot * h3;
  return (g1 + g2 * (d / 2.0) + g3 * (d * d / 6.0)) / (2.0 * omega + d);
}

// (sinc(x) - 1) / x
double sinc_minus_one_over_x(double x) {
  if (std::abs(x) < 1e-3) {
    const double x2 = x * x;
    return x * (-1.0 / 6.0 + x2 * (1.0 / 120.0 - x2 / 5040.0));
  }
  return (std::sin(x) / x - 1.0) / x;
}

double sinc(double x) { return std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x; }

// Braced term of J_jk divided by (mu^2 - omega^2), rewritten so that every
// 0/0 at mu = omega cancels analytically.
double coupling_response(double mu, double omega, double t) {
  const double d = mu - omega;
  const double a1 = 2.0 * omega + d;        // mu + omega
  const double a2 = 2.0 * omega + 2.0 * d;  // 2 mu
  const double x = d * t;
  // [sin(a2 t)/a2 - sin(a1 t)/a1] / d
  const double divided =
      (a1 * t * std::cos(0.5 * (a1 + a2) * t) * sinc(0.5 * x) - std::sin(a1 * t)) / (a1 * a2);
  const double braces_over_d = omega * t * t * sinc_minus_one_over_x(x) - omega * divided;
  return braces_over_d / a1;
}

std::vector<double> mode_lengths(const ModeSpectrum& s) {
  std::vector<double> z0(s.size());
  for (std::size_t m = 0; m < s.size(); ++m) z0[m] = ground_state_length(s.omega[m], s.ion_mass);
  return z0;
}

double sequence_phase_time(const PulseSequence& seq) {
  const auto& se = std::get<SpinEcho>(seq);
  return se.tau + se.t_pi;
}

cd sequence_response(const PulseSequence& seq, double mu, double omega) {
  if (const auto* se = std::get_if<SpinEcho>(&seq)) return echo_response(mu, omega, se->tau, se->t_pi);
  return arm_response(mu, omega, std::get<Ramsey>(seq).tau, 0.0);
}

}  // namespace

double ground_state_length(double omega, double mass) {
  if (!(omega > 0.0)) throw std::invalid_argument("mode frequency must be positive");
  return std::sqrt(constants::hbar / (2.0 * mass * omega));
}

cd arm_response(double mu, double omega, double t, double phi) {
  const double d = mu - omega;
  if (std::abs(d) < kResonanceSwitch * omega) return arm_response_series(mu, omega, t, phi);
  const double th = mu * t + phi;
  const cd start = omega * std::cos(phi) - I * (mu * std::sin(phi));
  const cd end = std::exp(I * (omega * t)) * (omega * std::cos(th) - I * (mu * std::sin(th)));
  return (start - end) / (d * (mu + omega));
}

cd echo_response(double mu, double omega, double tau, double t_pi) {
  const double phi = (tau + t_pi) * (mu - omega);
  return arm_response(mu, omega, tau, 0.0) - arm_response(mu, omega, tau, phi);
}

DisplacementField alpha_single_arm(const DriveConfig& drive, const ModeSpectrum& spectrum, double t,
                                   double phi) {
  require_stable(spectrum);
  if (!(t > 0.0)) throw std::invalid_argument("arm duration must be positive");
  const auto n = static_cast<Eigen::Index>(spectrum.size());
  const auto z0 = mode_lengths(spectrum);
  DisplacementField f;
  f.kind = FieldKind::single_arm;
  f.mu_r = drive.mu_r;
  f.alpha.resize(n, n);
  for (Eigen::Index m = 0; m < n; ++m) {
    const cd resp = z0[m] / constants::hbar * arm_response(drive.mu_r, spectrum.omega[m], t, phi);
    for (Eigen::Index j = 0; j < n; ++j)
      f.alpha(j, m) = drive.force_on(static_cast<std::size_t>(j)) * spectrum.b(j, m) * resp;
  }
  return f;
}

DisplacementField alpha_spin_echo(const DriveConfig& drive, const ModeSpectrum& spectrum) {
  require_stable(spectrum);
  const auto* se = std::get_if<SpinEcho>(&drive.sequence);
  if (!se) throw std::invalid_argument("alpha_spin_echo requires a spin-echo sequence");
  if (!(se->tau > 0.0)) throw std::invalid_argument("arm duration must be positive");
  const auto n = static_cast<Eigen::Index>(spectrum.size());
  const auto z0 = mode_lengths(spectrum);
  DisplacementField f;
  f.kind = FieldKind::spin_echo;
  f.mu_r = drive.mu_r;
  f.alpha.resize(n, n);
  for (Eigen::Index m = 0; m < n; ++m) {
    const cd resp = z0[m] / constants::hbar * echo_response(drive.mu_r, spectrum.omega[m], se->tau, se->t_pi);
    for (Eigen::Index j = 0; j < n; ++j)
      f.alpha(j, m) = drive.force_on(static_cast<std::size_t>(j)) * spectrum.b(j, m) * resp;
  }
  return f;
}

DisplacementField sequence_field(const DriveConfig& drive, const ModeSpectrum& spectrum) {
  if (std::holds_alternative<SpinEcho>(drive.sequence)) return alpha_spin_echo(drive, spectrum);
  return alpha_single_arm(drive, spectrum, std::get<Ramsey>(drive.sequence).tau, 0.0);
}

ThermalState ThermalState::from_temperatures(const std::vector<double>& kelvin, const ModeSpectrum& spectrum) {
  if (kelvin.size() != spectrum.size()) throw std::invalid_argument("one temperature per mode required");
  ThermalState t;
  for (std::size_t m = 0; m < kelvin.size(); ++m)
    t.nbar.push_back(temperature_to_occupation(kelvin[m], spectrum.omega[m]));
  return t;
}

ThermalState ThermalState::com_and_rest(double com_kelvin, double other_kelvin, const ModeSpectrum& spectrum) {
  std::vector<double> k(spectrum.size(), other_kelvin);
  if (!k.empty()) k[0] = com_kelvin;
  return from_temperatures(k, spectrum);
}

void ThermalState::validate(std::size_t n_modes) const {
  if (nbar.size() != n_modes)
    throw std::invalid_argument("thermal state has " + std::to_string(nbar.size()) + " occupations for " +
                                std::to_string(n_modes) + " modes");
  for (double v : nbar)
    if (!(v >= 0.0)) throw std::invalid_argument("mode occupations must be non-negative");
}

double background_probability(double gamma, double total_odf_time) {
  return 0.5 * (1.0 - std::exp(-gamma * total_odf_time));
}

BrightProbability bright_probability(const DisplacementField& field, const ThermalState& thermal, double gamma,
                                     double total_odf_time) {
  const auto n_ions = field.alpha.rows();
  thermal.validate(static_cast<std::size_t>(field.alpha.cols()));
  const double decay = std::exp(-gamma * total_odf_time);
  BrightProbability p;
  p.per_ion.resize(static_cast<std::size_t>(n_ions));
  double sum = 0.0;
  for (Eigen::Index j = 0; j < n_ions; ++j) {
    double exponent = 0.0;
    for (Eigen::Index m = 0; m < field.alpha.cols(); ++m)
      exponent += std::norm(field.alpha(j, m)) * (2.0 * thermal.nbar[static_cast<std::size_t>(m)] + 1.0);
    const double pj = 0.5 * (1.0 - decay * std::exp(-2.0 * exponent));
    p.per_ion[static_cast<std::size_t>(j)] = pj;
    sum += pj;
  }
  p.mean = n_ions > 0 ? sum / static_cast<double>(n_ions) : 0.0;
  return p;
}

std::vector<double> frequency_grid(double start_hz, double stop_hz, double step_hz) {
  if (!(step_hz > 0.0)) throw std::invalid_argument("grid step must be positive");
  if (!(stop_hz >= start_hz)) throw std::invalid_argument("grid stop must not precede start");
  const auto n = static_cast<std::size_t>(std::floor((stop_hz - start_hz) / step_hz + 1e-9)) + 1;
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = start_hz + static_cast<double>(i) * step_hz;
  return g;
}

namespace {

void check_sweep_inputs(const DriveConfig& drive, const ModeSpectrum& spectrum, const ThermalState& thermal,
                        const std::vector<double>& grid) {
  require_stable(spectrum);
  drive.validate(spectrum.size());
  thermal.validate(spectrum.size());
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] >= grid[i - 1])) throw std::invalid_argument("frequency grid must be sorted");
}

}  // namespace

SpectrumTrace sweep_spectrum(const DriveConfig& drive, const ModeSpectrum& spectrum, const ThermalState& thermal,
                             const std::vector<double>& grid, bool per_ion) {
  check_sweep_inputs(drive, spectrum, thermal, grid);
  const auto n = static_cast<Eigen::Index>(spectrum.size());
  const auto points = static_cast<std::ptrdiff_t>(grid.size());
  const auto z0 = mode_lengths(spectrum);
  const double decay = std::exp(-drive.gamma * odf_on_time(drive.sequence));

  // exponent_j = 2 F_j^2 sum_m b_jm^2 w_m, with w_m the per-mode weight at this beat note
  const Eigen::MatrixXd b2 = spectrum.b.cwiseAbs2();
  Eigen::VectorXd f2(n);
  for (Eigen::Index j = 0; j < n; ++j) f2(j) = std::pow(drive.force_on(static_cast<std::size_t>(j)), 2);

  SpectrumTrace trace;
  trace.mu_over_2pi = grid;
  trace.p_up_mean.assign(grid.size(), 0.0);
  if (per_ion) trace.p_up_ion = Eigen::MatrixXd(points, n);

#pragma omp parallel
  {
    Eigen::VectorXd w(n), exponent(n);
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < points; ++i) {
      const double mu = constants::two_pi * grid[static_cast<std::size_t>(i)];
      for (Eigen::Index m = 0; m < n; ++m) {
        const double amp = z0[m] / constants::hbar * std::abs(sequence_response(drive.sequence, mu, spectrum.omega[m]));
        w(m) = amp * amp * (2.0 * thermal.nbar[static_cast<std::size_t>(m)] + 1.0);
      }
      exponent.noalias() = b2 * w;
      double sum = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        const double pj = 0.5 * (1.0 - decay * std::exp(-2.0 * f2(j) * exponent(j)));
        if (per_ion) (*trace.p_up_ion)(i, j) = pj;
        sum += pj;
      }
      trace.p_up_mean[static_cast<std::size_t>(i)] = sum / static_cast<double>(n);
    }
  }
  return trace;
}

SpectrumTrace sweep_spectrum_reference(const DriveConfig& drive, const ModeSpectrum& spectrum,
                                       const ThermalState& thermal, const std::vector<double>& grid, bool per_ion) {
  check_sweep_inputs(drive, spectrum, thermal, grid);
  const auto n = static_cast<Eigen::Index>(spectrum.size());
  SpectrumTrace trace;
  trace.mu_over_2pi = grid;
  if (per_ion) trace.p_up_ion = Eigen::MatrixXd(static_cast<Eigen::Index>(grid.size()), n);
  DriveConfig d = drive;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    d.mu_r = constants::two_pi * grid[i];
    const auto p = bright_probability(sequence_field(d, spectrum), thermal, d.gamma, odf_on_time(d.sequence));
    trace.p_up_mean.push_back(p.mean);
    if (per_ion)
      for (Eigen::Index j = 0; j < n; ++j) (*trace.p_up_ion)(static_cast<Eigen::Index>(i), j) = p.per_ion[j];
  }
  return trace;
}

std::vector<TrajectoryPoint> phase_space_trajectory(const DriveConfig& drive, const ModeSpectrum& spectrum,
                                                    std::size_t mode_index, std::size_t n_samples) {
  require_stable(spectrum);
  if (mode_index >= spectrum.size()) throw std::out_of_range("mode index out of range");
  if (n_samples < 2) throw std::invalid_argument("need at least two samples per arm");
  const double omega = spectrum.omega[mode_index];
  const auto m = static_cast<Eigen::Index>(mode_index);
  double coupling = 0.0;
  for (Eigen::Index j = 0; j < spectrum.b.rows(); ++j)
    coupling += drive.force_on(static_cast<std::size_t>(j)) * spectrum.b(j, m);
  const double scale = coupling * ground_state_length(omega, spectrum.ion_mass) / constants::hbar;
  const double tau = arm_duration(drive.sequence);

  std::vector<TrajectoryPoint> out;
  for (std::size_t k = 0; k < n_samples; ++k) {
    const double t = tau * static_cast<double>(k) / static_cast<double>(n_samples - 1);
    out.push_back({t, scale * arm_response(drive.mu_r, omega, t, 0.0), 1});
  }
  if (const auto* se = std::get_if<SpinEcho>(&drive.sequence)) {
    const double phi = sequence_phase_time(drive.sequence) * (drive.mu_r - omega);
    const cd first = scale * arm_response(drive.mu_r, omega, tau, 0.0);
    for (std::size_t k = 0; k < n_samples; ++k) {
      const double t = tau * static_cast<double>(k) / static_cast<double>(n_samples - 1);
      out.push_back({tau + se->t_pi + t, first - scale * arm_response(drive.mu_r, omega, t, phi), 2});
    }
  }
  return out;
}

Excursion mean_excursion(const DisplacementField& field, const ModeSpectrum& spectrum, std::size_t mode_index) {
  if (mode_index >= spectrum.size()) throw std::out_of_range("mode index out of range");
  const auto col = field.alpha.col(static_cast<Eigen::Index>(mode_index));
  const double n = static_cast<double>(col.size());
  const double z0 = ground_state_length(spectrum.omega[mode_index], spectrum.ion_mass);
  Excursion e;
  e.rms_m = 2.0 * z0 * std::sqrt(col.squaredNorm() / n);
  e.aligned_m = 2.0 * z0 * std::abs(col.sum()) / std::sqrt(n);
  e.convention =
      "rms: 2 z0m sqrt(sum_j |alpha_jm|^2 / N), RMS ion displacement over the uniform spin superposition; "
      "aligned: 2 z0m |sum_j alpha_jm| / sqrt(N), all spins parallel";
  return e;
}

Eigen::MatrixXd spin_spin_coupling(const DriveConfig& drive, const ModeSpectrum& spectrum, double t) {
  require_stable(spectrum);
  if (!(t > 0.0)) throw std::invalid_argument("interaction time must be positive");
  if (!(drive.mu_r > 0.0)) throw std::invalid_argument("beat note must be positive");
  const auto n = static_cast<Eigen::Index>(spectrum.size());
  const auto z0 = mode_lengths(spectrum);
  Eigen::VectorXd weight(n);
  for (Eigen::Index m = 0; m < n; ++m)
    weight(m) = z0[m] * z0[m] * coupling_response(drive.mu_r, spectrum.omega[m], t);
  Eigen::VectorXd f(n);
  for (Eigen::Index j = 0; j < n; ++j) f(j) = drive.force_on(static_cast<std::size_t>(j));
  Eigen::MatrixXd j_mat = spectrum.b * weight.asDiagonal() * spectrum.b.transpose();
  j_mat = (f * f.transpose()).cwiseProduct(j_mat) / (2.0 * constants::hbar * constants::hbar);
  return 0.5 * (j_mat + j_mat.transpose());
}

double com_coupling_rate(double force, double z01, double omega_1, double mu, std::size_t n_ions) {
  return force * force / (2.0 * constants::hbar * constants::hbar) * z01 * z01 * omega_1 /
         (static_cast<double>(n_ions) * (mu - omega_1) * (mu + omega_1));
}

ValidityEstimate validity_ratio(double force, double z01, double nbar, double t) {
  if (force < 0.0 || z01 < 0.0 || nbar < 0.0 || t < 0.0)
    throw std::invalid_argument("validity_ratio inputs must be non-negative");
  ValidityEstimate v;
  v.ratio = force * force / (4.0 * constants::hbar * constants::hbar) * z01 * z01 * t * t / (2.0 * nbar + 1.0);
  v.warning = v.ratio > 0.1;
  return v;
}

}  // namespace drumhead
