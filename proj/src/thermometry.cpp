#include "drumhead/thermometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <boost/math/tools/minima.hpp>

#include "drumhead/constants.hpp"

namespace drumhead {

double occupation_to_temperature(double nbar, double omega) {
  if (!(nbar >= 0.0) || !(omega >= 0.0)) throw std::invalid_argument("occupation and frequency must be non-negative");
  return nbar * constants::hbar * omega / constants::k_boltzmann;
}

double temperature_to_occupation(double kelvin, double omega) {
  if (!(kelvin >= 0.0) || !(omega > 0.0)) throw std::invalid_argument("temperature must be non-negative and frequency positive");
  return constants::k_boltzmann * kelvin / (constants::hbar * omega);
}

void ObservedSpectrum::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!(p.p_up >= 0.0 && p.p_up <= 1.0))
      throw FitError(FitError::Kind::invalid_input, "point " + std::to_string(i) + ": p_up outside [0, 1]");
    if (!(p.sigma > 0.0))
      throw FitError(FitError::Kind::invalid_input, "point " + std::to_string(i) + ": sigma must be positive");
  }
}

namespace {

// P_up(nbar) at every data point, with everything but the target occupation
// folded into per-ion constants: exponent_j = fixed_j + (2 nbar + 1) target_j.
class LineshapeModel {
 public:
  LineshapeModel(const ObservedSpectrum& data, const ModeSpectrum& spectrum, const DriveConfig& drive,
                 std::size_t target, const ThermalState& others) {
    decay_ = std::exp(-drive.gamma * odf_on_time(drive.sequence));
    const auto n = spectrum.b.rows();
    const auto t = static_cast<Eigen::Index>(target);
    DriveConfig d = drive;
    for (const auto& p : data.points) {
      d.mu_r = constants::two_pi * p.mu_hz;
      const auto field = sequence_field(d, spectrum);
      Eigen::VectorXd fixed = Eigen::VectorXd::Zero(n);
      Eigen::VectorXd tgt(n);
      for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index m = 0; m < n; ++m) {
          if (m == t) continue;
          fixed(j) += 2.0 * std::norm(field.alpha(j, m)) * (2.0 * others.nbar[static_cast<std::size_t>(m)] + 1.0);
        }
        tgt(j) = 2.0 * std::norm(field.alpha(j, t));
      }
      fixed_.push_back(std::move(fixed));
      target_.push_back(std::move(tgt));
      observed_.push_back(p.p_up);
      weight_.push_back(1.0 / (p.sigma * p.sigma));
    }
  }

  double predict(std::size_t i, double nbar) const {
    const auto& f = fixed_[i];
    const auto& c = target_[i];
    double sum = 0.0;
    for (Eigen::Index j = 0; j < f.size(); ++j) sum += 0.5 * (1.0 - decay_ * std::exp(-f(j) - (2.0 * nbar + 1.0) * c(j)));
    return sum / static_cast<double>(f.size());
  }

  double chi2(double nbar) const {
    double s = 0.0;
    for (std::size_t i = 0; i < observed_.size(); ++i) {
      const double r = predict(i, nbar) - observed_[i];
      s += weight_[i] * r * r;
    }
    return s;
  }

  std::size_t size() const { return observed_.size(); }

 private:
  double decay_ = 1.0;
  std::vector<Eigen::VectorXd> fixed_;
  std::vector<Eigen::VectorXd> target_;
  std::vector<double> observed_;
  std::vector<double> weight_;
};

struct Minimum {
  double nbar = 0.0;
  double chi2 = 0.0;
  bool at_boundary = false;
};

Minimum minimize_chi2(const LineshapeModel& model, double nbar_max, int max_iterations) {
  // Coarse scan over 0 and a log grid, then Brent inside the bracket around the best node.
  std::vector<double> nodes{0.0};
  const int per_decade = 20;
  const double lo = 1e-3;
  const int count = static_cast<int>(std::ceil(std::log10(nbar_max / lo) * per_decade));
  for (int i = 0; i <= count; ++i) nodes.push_back(std::min(nbar_max, lo * std::pow(10.0, double(i) / per_decade)));
  std::vector<double> values;
  for (double x : nodes) values.push_back(model.chi2(x));
  const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());

  const double a = nodes[best == 0 ? 0 : best - 1];
  const double b = nodes[std::min(best + 1, nodes.size() - 1)];
  std::uintmax_t iterations = static_cast<std::uintmax_t>(max_iterations);
  const auto [x, fx] = boost::math::tools::brent_find_minima([&](double n) { return model.chi2(n); }, a, b,
                                                             std::numeric_limits<double>::digits, iterations);
  if (iterations >= static_cast<std::uintmax_t>(max_iterations))
    throw FitError(FitError::Kind::non_convergence, "occupation fit did not converge");

  Minimum m{x, fx, false};
  if (values[0] <= fx || x < 1e-9) m = {0.0, values[0], true};
  if (m.nbar >= nbar_max * (1.0 - 1e-9))
    throw FitError(FitError::Kind::non_convergence, "occupation fit ran into the upper bound");
  return m;
}

double curvature_error(const LineshapeModel& model, const Minimum& m) {
  const double h = std::max(1e-3 * m.nbar, 1e-4);
  double second;
  if (m.at_boundary) {
    second = (model.chi2(2.0 * h) - 2.0 * model.chi2(h) + model.chi2(0.0)) / (h * h);
  } else {
    const double lo = std::max(0.0, m.nbar - h);
    const double hs = m.nbar - lo;
    second = (model.chi2(m.nbar + hs) - 2.0 * model.chi2(m.nbar) + model.chi2(lo)) / (hs * hs);
  }
  return second > 0.0 ? std::sqrt(2.0 / second) : std::numeric_limits<double>::infinity();
}

void check_span(const ObservedSpectrum& data, double omega, double tau) {
  bool near = false;
  bool far = false;
  for (const auto& p : data.points) {
    const double loops = std::abs(constants::two_pi * p.mu_hz - omega) * tau / constants::two_pi;
    near = near || loops < 0.5;
    far = far || loops > 1.0;
  }
  if (!near || !far)
    throw FitError(FitError::Kind::insufficient_span,
                   "data must include points within half a loop of the mode and beyond one loop");
}

}  // namespace

FitResult fit_occupation(const ObservedSpectrum& data, const ModeSpectrum& spectrum, const DriveConfig& drive,
                         std::size_t target_mode, const FitOptions& options) {
  data.validate();
  if (target_mode >= spectrum.size()) throw FitError(FitError::Kind::invalid_input, "target mode out of range");
  if (data.points.size() < 2) throw FitError(FitError::Kind::insufficient_span, "need at least two data points");
  drive.validate(spectrum.size());
  const double omega = spectrum.omega[target_mode];
  check_span(data, omega, arm_duration(drive.sequence));

  const ThermalState others = options.background_modes.value_or(ThermalState{std::vector<double>(spectrum.size(), 0.0)});
  others.validate(spectrum.size());

  const LineshapeModel model(data, spectrum, drive, target_mode, others);
  const Minimum best = minimize_chi2(model, options.nbar_max, options.max_iterations);

  FitResult r;
  r.target_mode = target_mode;
  r.n_points = data.points.size();
  r.nbar = best.nbar;
  r.at_boundary = best.at_boundary;
  r.gamma_used = drive.gamma;
  r.chi2_reduced = data.points.size() > 1 ? best.chi2 / static_cast<double>(data.points.size() - 1) : 0.0;
  r.nbar_stat_err = curvature_error(model, best);

  // A feature smaller than the typical error bar cannot constrain the occupation.
  double depth = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i)
    depth = std::max(depth, std::abs(model.predict(i, best.nbar) - model.predict(i, 0.0)));
  std::vector<double> sig;
  for (const auto& p : data.points) sig.push_back(p.sigma);
  std::nth_element(sig.begin(), sig.begin() + static_cast<std::ptrdiff_t>(sig.size() / 2), sig.end());
  r.insufficient_signal = best.at_boundary || depth < sig[sig.size() / 2];

  if (data.meta.theta_r > 0.0 && data.meta.theta_r_rel_err > 0.0) {
    const double th = data.meta.theta_r;
    double shift = 0.0;
    for (double sgn : {-1.0, 1.0}) {
      DriveConfig perturbed = drive;
      const double ratio = std::sin(0.5 * th * (1.0 + sgn * data.meta.theta_r_rel_err)) / std::sin(0.5 * th);
      for (double& f : perturbed.forces) f *= ratio;
      const LineshapeModel pm(data, spectrum, perturbed, target_mode, others);
      const Minimum refit = minimize_chi2(pm, options.nbar_max, options.max_iterations);
      shift = std::max(shift, std::abs(refit.nbar - best.nbar));
    }
    r.nbar_sys_err = shift;
    r.systematic_note = "ODF force scaled with delta_k for theta_R +/- " +
                        std::to_string(100.0 * data.meta.theta_r_rel_err) +
                        "%; largest refit shift added in quadrature";
  } else {
    r.systematic_note = "no beam-angle uncertainty supplied; statistical error only";
  }
  r.nbar_err = std::hypot(r.nbar_stat_err, r.nbar_sys_err);
  r.temperature = occupation_to_temperature(r.nbar, omega);
  r.temperature_err = std::isfinite(r.nbar_err) ? occupation_to_temperature(r.nbar_err, omega) : r.nbar_err;
  return r;
}

double fit_background_gamma(const std::vector<SpectrumPoint>& points, const ModeSpectrum& spectrum,
                            const PulseSequence& sequence, double min_loops) {
  if (points.size() < 3) throw FitError(FitError::Kind::insufficient_span, "need at least three off-resonant points");
  const double tau = arm_duration(sequence);
  double wsum = 0.0;
  double psum = 0.0;
  for (const auto& p : points) {
    if (!(p.sigma > 0.0)) throw FitError(FitError::Kind::invalid_input, "sigma must be positive");
    for (double w : spectrum.omega) {
      const double loops = std::abs(constants::two_pi * p.mu_hz - w) * tau / constants::two_pi;
      if (loops < min_loops)
        throw FitError(FitError::Kind::insufficient_span,
                       "background point at " + std::to_string(p.mu_hz) + " Hz is too close to a mode");
    }
    const double w = 1.0 / (p.sigma * p.sigma);
    wsum += w;
    psum += w * p.p_up;
  }
  const double mean = psum / wsum;
  if (mean >= 0.5) throw FitError(FitError::Kind::unphysical_background, "background P_up >= 0.5: saturated decoherence");
  if (mean <= 0.0) return 0.0;
  return -std::log1p(-2.0 * mean) / odf_on_time(sequence);
}

ObservedSpectrum synthesize_spectrum(const DriveConfig& drive, const ModeSpectrum& spectrum,
                                     const ThermalState& thermal, const std::vector<double>& grid_hz, double sigma,
                                     std::uint64_t seed) {
  const auto trace = sweep_spectrum(drive, spectrum, thermal, grid_hz);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma > 0.0 ? sigma : 1.0);
  ObservedSpectrum out;
  // Noiseless data still needs a positive weight.
  const double reported = sigma > 0.0 ? sigma : 0.01;
  for (std::size_t i = 0; i < grid_hz.size(); ++i) {
    double p = trace.p_up_mean[i];
    if (sigma > 0.0) p = std::clamp(p + noise(rng), 0.0, 1.0);
    out.points.push_back({grid_hz[i], p, reported});
  }
  out.meta.n_ions = static_cast<double>(spectrum.size());
  out.meta.tau = arm_duration(drive.sequence);
  if (const auto* se = std::get_if<SpinEcho>(&drive.sequence)) out.meta.t_pi = se->t_pi;
  return out;
}

}  // namespace drumhead
