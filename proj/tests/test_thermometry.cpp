#include <doctest.h>

#include <algorithm>
#include <numbers>
#include <random>

#include "drumhead/thermometry.hpp"
#include "support.hpp"

using namespace drumhead;
using testing::rel;

namespace {

constexpr double kTwoPi = constants::two_pi;

const ModeSpectrum& crystal() { return testing::solved(44.7e3, 19).spectrum; }

DriveConfig drive(double force = 1e-23, double gamma = 150.0) {
  DriveConfig d;
  d.forces = {force};
  d.gamma = gamma;
  d.sequence = SpinEcho{500e-6, 65e-6};
  return d;
}

// COM at `nbar`, the rest at 0.43 mK.
ThermalState thermal(double nbar) {
  auto th = ThermalState::com_and_rest(4.3e-4, 4.3e-4, crystal());
  th.nbar[0] = nbar;
  return th;
}

// Four loops either side of the COM.
std::vector<double> com_grid(double step = 100.0) {
  const double f1 = crystal().omega[0] / kTwoPi;
  return frequency_grid(f1 - 8e3, f1 + 8e3, step);
}

FitOptions rest_fixed() {
  FitOptions o;
  o.background_modes = thermal(0.0);
  return o;
}

}  // namespace

TEST_CASE("occupation and temperature conversions") {
  const double w = kTwoPi * 795e3;
  CHECK(temperature_to_occupation(2.29e-3, w) == doctest::Approx(60.0).epsilon(2e-3));
  CHECK(temperature_to_occupation(4.3e-4, w) == doctest::Approx(11.27).epsilon(2e-3));
  CHECK(temperature_to_occupation(0.0, w) == 0.0);
  for (double n : {0.0, 0.5, 11.3, 60.0, 1e4}) CHECK(rel(temperature_to_occupation(occupation_to_temperature(n, w), w), n) <= 1e-15);
  CHECK_THROWS_AS(temperature_to_occupation(-1.0, w), std::invalid_argument);
  CHECK_THROWS_AS(temperature_to_occupation(1e-3, 0.0), std::invalid_argument);
}

TEST_CASE("noiseless data returns the occupation it was made with") {
  for (double nbar : {0.5, 10.0, 60.0, 300.0}) {
    const auto data = synthesize_spectrum(drive(), crystal(), thermal(nbar), com_grid(), 0.0, 1);
    const auto fit = fit_occupation(data, crystal(), drive(), 0, rest_fixed());
    CHECK_MESSAGE(rel(fit.nbar, nbar) < 1e-6, "nbar " << nbar << " fit " << fit.nbar);
    CHECK_FALSE(fit.at_boundary);
    CHECK(fit.chi2_reduced < 1e-12);
    CHECK(rel(fit.temperature, occupation_to_temperature(fit.nbar, crystal().omega[0])) < 1e-9);
    CHECK(fit.gamma_used == 150.0);
    CHECK(fit.n_points == data.points.size());
  }
}

TEST_CASE("noisy fits scatter around the true occupation") {
  std::vector<double> fits;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto data = synthesize_spectrum(drive(), crystal(), thermal(60.0), com_grid(200.0), 0.02, seed);
    fits.push_back(fit_occupation(data, crystal(), drive(), 0, rest_fixed()).nbar);
  }
  std::nth_element(fits.begin(), fits.begin() + 50, fits.end());
  CHECK(std::abs(fits[50] - 60.0) < 6.0);
}

TEST_CASE("statistical error follows the noise level") {
  const auto quiet = synthesize_spectrum(drive(), crystal(), thermal(60.0), com_grid(200.0), 0.01, 3);
  const auto loud = synthesize_spectrum(drive(), crystal(), thermal(60.0), com_grid(200.0), 0.04, 3);
  const auto a = fit_occupation(quiet, crystal(), drive(), 0, rest_fixed());
  const auto b = fit_occupation(loud, crystal(), drive(), 0, rest_fixed());
  CHECK(b.nbar_stat_err > 2.0 * a.nbar_stat_err);
  CHECK(a.nbar_sys_err == 0.0);
  CHECK(a.nbar_err == a.nbar_stat_err);
}

TEST_CASE("flat data is a boundary result with an insufficient-signal flag") {
  const double bg = background_probability(150.0, 1e-3);
  ObservedSpectrum flat;
  for (double f : com_grid(200.0)) flat.points.push_back({f, bg, 0.02});
  const auto fit = fit_occupation(flat, crystal(), drive(), 0);
  CHECK(fit.at_boundary);
  CHECK(fit.nbar == 0.0);
  CHECK(fit.insufficient_signal);
}

TEST_CASE("data that misses the feature or its wings is refused") {
  const double f1 = crystal().omega[0] / kTwoPi;
  auto only_near = synthesize_spectrum(drive(), crystal(), thermal(60), frequency_grid(f1 - 500, f1 + 500, 50), 0.0, 1);
  auto only_far = synthesize_spectrum(drive(), crystal(), thermal(60), frequency_grid(f1 + 3e3, f1 + 8e3, 100), 0.0, 1);
  for (const auto* d : {&only_near, &only_far}) {
    try {
      (void)fit_occupation(*d, crystal(), drive(), 0);
      FAIL("expected insufficient span");
    } catch (const FitError& e) {
      CHECK(e.kind() == FitError::Kind::insufficient_span);
    }
  }
}

TEST_CASE("point order does not change the fit") {
  auto data = synthesize_spectrum(drive(), crystal(), thermal(40.0), com_grid(200.0), 0.02, 11);
  const auto a = fit_occupation(data, crystal(), drive(), 0, rest_fixed());
  std::mt19937_64 rng(4);
  std::shuffle(data.points.begin(), data.points.end(), rng);
  const auto b = fit_occupation(data, crystal(), drive(), 0, rest_fixed());
  CHECK(rel(a.nbar, b.nbar) < 1e-8);
}

TEST_CASE("fitted occupation rises with the feature depth") {
  double last = -1.0;
  for (double nbar : {5.0, 20.0, 80.0}) {
    const auto data = synthesize_spectrum(drive(), crystal(), thermal(nbar), com_grid(200.0), 0.0, 1);
    const double fit = fit_occupation(data, crystal(), drive(), 0, rest_fixed()).nbar;
    CHECK(fit > last);
    last = fit;
  }
}

TEST_CASE("beam-angle uncertainty enters as a systematic") {
  auto data = synthesize_spectrum(drive(), crystal(), thermal(60.0), com_grid(200.0), 0.02, 5);
  data.meta.theta_r = 4.8 * std::numbers::pi / 180.0;
  data.meta.theta_r_rel_err = 0.05;
  const auto fit = fit_occupation(data, crystal(), drive(), 0, rest_fixed());
  CHECK(fit.nbar_sys_err > 0.0);
  CHECK(rel(fit.nbar_err, std::hypot(fit.nbar_stat_err, fit.nbar_sys_err)) < 1e-14);
  CHECK_FALSE(fit.systematic_note.empty());
}

TEST_CASE("invalid fit inputs") {
  auto data = synthesize_spectrum(drive(), crystal(), thermal(60.0), com_grid(400.0), 0.0, 1);
  CHECK_THROWS_AS(fit_occupation(data, crystal(), drive(), 19), FitError);
  data.points[3].sigma = 0.0;
  CHECK_THROWS_AS(fit_occupation(data, crystal(), drive(), 0), FitError);
  data.points[3].sigma = 0.01;
  data.points[4].p_up = 1.2;
  CHECK_THROWS_AS(fit_occupation(data, crystal(), drive(), 0), FitError);
}

TEST_CASE("background decoherence rate from far-detuned points") {
  const double f1 = crystal().omega[0] / kTwoPi;
  const PulseSequence seq = SpinEcho{500e-6, 65e-6};
  auto points_at = [&](double p) {
    std::vector<SpectrumPoint> pts;
    for (double f = f1 + 30e3; f <= f1 + 40e3; f += 1e3) pts.push_back({f, p, 0.01});
    return pts;
  };
  CHECK(fit_background_gamma(points_at(0.0), crystal(), seq) == 0.0);
  CHECK(fit_background_gamma(points_at(0.1), crystal(), seq) == doctest::Approx(223.1).epsilon(1e-3));
  CHECK(rel(fit_background_gamma(points_at(background_probability(80.0, 1e-3)), crystal(), seq), 80.0) < 1e-12);
  try {
    (void)fit_background_gamma(points_at(0.5), crystal(), seq);
    FAIL("expected unphysical background");
  } catch (const FitError& e) {
    CHECK(e.kind() == FitError::Kind::unphysical_background);
  }
  // A point within five loops of the COM is not background.
  auto close = points_at(0.1);
  close.push_back({f1 + 5e3, 0.1, 0.01});
  CHECK_THROWS_AS(fit_background_gamma(close, crystal(), seq), FitError);
  CHECK_THROWS_AS(fit_background_gamma({{f1 + 30e3, 0.1, 0.01}}, crystal(), seq), FitError);
}

TEST_CASE("fitted background feeds the occupation fit") {
  const auto d = drive(1e-23, 223.1);
  const double f1 = crystal().omega[0] / kTwoPi;
  const auto far = synthesize_spectrum(d, crystal(), thermal(60), frequency_grid(f1 + 30e3, f1 + 40e3, 500), 0.0, 1);
  const double gamma = fit_background_gamma(far.points, crystal(), d.sequence);
  // Far tails of every mode still add a little, so the estimate sits just above the true rate.
  CHECK(gamma >= 223.1);
  CHECK(rel(gamma, 223.1) < 0.02);
  auto refit = d;
  refit.gamma = gamma;
  const auto data = synthesize_spectrum(d, crystal(), thermal(60), com_grid(200.0), 0.0, 1);
  CHECK(rel(fit_occupation(data, crystal(), refit, 0, rest_fixed()).nbar, 60.0) < 0.05);
}

TEST_CASE("synthetic spectra are reproducible and clamped") {
  const auto a = synthesize_spectrum(drive(), crystal(), thermal(60), com_grid(400.0), 0.3, 9);
  const auto b = synthesize_spectrum(drive(), crystal(), thermal(60), com_grid(400.0), 0.3, 9);
  const auto c = synthesize_spectrum(drive(), crystal(), thermal(60), com_grid(400.0), 0.3, 10);
  bool differs = false;
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].p_up == b.points[i].p_up);
    CHECK(a.points[i].p_up >= 0.0);
    CHECK(a.points[i].p_up <= 1.0);
    differs = differs || a.points[i].p_up != c.points[i].p_up;
  }
  CHECK(differs);
  CHECK(a.meta.n_ions == 19.0);
  CHECK(a.meta.tau == 500e-6);
  CHECK(a.meta.t_pi == 65e-6);
}
