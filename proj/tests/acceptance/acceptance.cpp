// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "drumhead/dynamics.hpp"
#include "drumhead/odf.hpp"
#include "drumhead/thermometry.hpp"
#include "support.hpp"

using namespace drumhead;
using testing::rel;

namespace {

constexpr double kTwoPi = constants::two_pi;

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass) ++failures;
  std::printf("%s [%d] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// Operating point of the 190-ion echo lineshape: 44.7 kHz rotation, tau = 500 us,
// t_pi = 65 us, COM at nbar = 60 and every other mode at 0.43 mK.
struct EchoPoint {
  const ModeSpectrum& spectrum;
  ThermalState thermal;
  DriveConfig drive;
  double f1_hz;
};

EchoPoint echo_point(double force) {
  const auto& s = testing::solved(44.7e3, 190).spectrum;
  auto th = ThermalState::com_and_rest(4.3e-4, 4.3e-4, s);
  th.nbar[0] = 60.0;
  DriveConfig d;
  d.forces = {force};
  d.gamma = 223.1;
  d.sequence = SpinEcho{500e-6, 65e-6};
  return {s, th, d, s.omega[0] / kTwoPi};
}

// Mean Bloch-vector length from spin-motion entanglement alone, exp(-sum), averaged over ions.
double bloch_length(const EchoPoint& p, double detune_loops) {
  auto d = p.drive;
  d.mu_r = kTwoPi * (p.f1_hz + detune_loops / 500e-6);
  const auto prob = bright_probability(alpha_spin_echo(d, p.spectrum), p.thermal, 0.0, 1.0);
  return 1.0 - 2.0 * prob.mean;
}

// Force giving a 20% Bloch reduction at the lineshape maximum, 1.4 loops from the COM.
double force_for_twenty_percent() {
  double lo = 1e-25, hi = 1e-21;
  for (int k = 0; k < 200; ++k) {
    const double mid = std::sqrt(lo * hi);
    (bloch_length(echo_point(mid), 1.4) > 0.8 ? lo : hi) = mid;
  }
  return std::sqrt(lo * hi);
}

}  // namespace

int main() {
  criterion(1, "COM exactness", [] {
    double worst_vec = 0.0, worst_row = 0.0, worst_w = 0.0;
    for (std::size_t n : {7u, 50u, 190u, 331u}) {
      const auto& sv = testing::solved(43.2e3, n);
      if (!sv.lattice.converged || !sv.lattice.planar) return Outcome{false, "lattice not converged/planar"};
      const double w1 = sv.lattice.params.omega_1, w2 = w1 * w1;
      const auto& k = sv.stiffness.entries;
      const Eigen::VectorXd u = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0);
      worst_vec = std::max(worst_vec, (k * u - w2 * u).cwiseAbs().maxCoeff() / w2);
      worst_row = std::max(worst_row, (k.rowwise().sum().array() / w2 - 1.0).abs().maxCoeff());
      worst_w = std::max(worst_w, rel(sv.spectrum.omega[0], w1));
    }
    const bool ok = worst_vec < 1e-9 && worst_row < 1e-9 && worst_w < 1e-9;
    return Outcome{ok, fmt("N in {7,50,190,331}: |K u - w1^2 u| %.2e, row sums %.2e, COM frequency %.2e (tol 1e-9)",
                           worst_vec, worst_row, worst_w)};
  });

  criterion(2, "Two-ion analytic oracle", [] {
    double worst_d = 0.0, worst_w = 0.0;
    for (double fr : {43.2e3, 44.7e3}) {
      const auto& sv = testing::solved(fr, 2);
      const auto& p = sv.lattice.params;
      const double d = std::cbrt(2.0 * p.coulomb_strength() / (p.mass * p.omega_1 * p.omega_1 * beta(p)));
      worst_d = std::max(worst_d, rel(norm(sv.lattice.positions[0] - sv.lattice.positions[1]), d));
      worst_w = std::max(worst_w, rel(sv.spectrum.omega[1], p.omega_1 * std::sqrt(1.0 - beta(p))));
    }
    return Outcome{worst_d < 1e-8 && worst_w < 1e-9,
                   fmt("separation %.2e (tol 1e-8), tilt mode %.2e (tol 1e-9)", worst_d, worst_w)};
  });

  criterion(3, "Hessian oracle", [] {
    double worst = 0.0;
    struct Case {
      double fr;
      std::size_t n;
      double wall;
    };
    for (const auto& c : {Case{43.2e3, 3, 0.0}, Case{43.2e3, 7, 0.0}, Case{44.7e3, 12, 0.0}, Case{43.2e3, 20, 0.0},
                          Case{44.7e3, 20, 0.004}}) {
      const auto& sv = testing::solved(c.fr, c.n, c.wall);
      const auto fd = testing::finite_difference_stiffness(sv.lattice, sv.lattice.params);
      const auto& k = sv.stiffness.entries;
      for (Eigen::Index i = 0; i < k.rows(); ++i)
        for (Eigen::Index j = 0; j < k.cols(); ++j) worst = std::max(worst, rel(k(i, j), fd(i, j)));
    }
    return Outcome{worst < 1e-6, fmt("worst entrywise relative difference %.2e over N = 3..20 (tol 1e-6)", worst)};
  });

  criterion(4, "Spectral ordering and narrowing at N=345", [] {
    double spans[2];
    bool bounded = true;
    int i = 0;
    for (double fr : {43.2e3, 44.7e3}) {
      const auto& sv = testing::solved(fr, 345);
      const auto& w = sv.spectrum.omega;
      for (double x : w) bounded = bounded && x <= sv.lattice.params.omega_1 * (1 + 1e-12);
      spans[i++] = (w.front() - w.back()) / kTwoPi;
    }
    return Outcome{bounded && spans[0] < spans[1],
                   fmt("span %.1f kHz at 43.2 kHz < %.1f kHz at 44.7 kHz; all modes <= w1: ", spans[0] / 1e3,
                       spans[1] / 1e3) +
                       (bounded ? "yes" : "no")};
  });

  criterion(5, "Lineshape nulls", [] {
    const auto p = echo_point(force_for_twenty_percent());
    const double bg = 0.5 * (1.0 - std::exp(-2.0 * p.drive.gamma * 500e-6));
    double worst = 0.0;
    for (double l : {-2.0, -1.0, 1.0, 2.0}) {
      auto d = p.drive;
      d.mu_r = kTwoPi * (p.f1_hz + l / 500e-6);
      const auto prob = bright_probability(alpha_spin_echo(d, p.spectrum), p.thermal, d.gamma, odf_on_time(d.sequence));
      worst = std::max(worst, std::abs(prob.mean - bg));
    }
    return Outcome{worst < 0.01, fmt("N=190, nbar_1=60, F=%.3g N: max |P_up - background| at +/-1, +/-2 loops = %.2e "
                                     "(tol 0.01)",
                                     p.drive.forces[0], worst)};
  });

  criterion(6, "Thermometry cross-check", [] {
    const double w1 = kTwoPi * 795e3;
    const double t = occupation_to_temperature(60.0, w1);
    const bool conv = std::abs(t - 2.3e-3) / 2.3e-3 < 0.05;

    const auto p = echo_point(force_for_twenty_percent());
    auto d = p.drive;
    const auto grid = frequency_grid(p.f1_hz - 6e3, p.f1_hz + 6e3, 250);
    FitOptions opts;
    opts.background_modes = p.thermal;
    const auto clean = synthesize_spectrum(d, p.spectrum, p.thermal, grid, 0.0, 1);
    const double exact = fit_occupation(clean, p.spectrum, d, 0, opts).nbar;
    std::vector<double> fits;
    for (std::uint64_t seed = 1; seed <= 100; ++seed)
      fits.push_back(fit_occupation(synthesize_spectrum(d, p.spectrum, p.thermal, grid, 0.02, seed), p.spectrum, d, 0,
                                    opts)
                         .nbar);
    std::nth_element(fits.begin(), fits.begin() + 50, fits.end());
    const double median = fits[50];
    const bool ok = conv && rel(exact, 60.0) < 1e-6 && std::abs(median - 60.0) <= 6.0;
    return Outcome{ok, fmt("T(nbar=60) = %.3f mK; noiseless fit error %.1e; noisy median nbar %.2f over 100 seeds",
                           t * 1e3, rel(exact, 60.0), median)};
  });

  criterion(7, "Geometry anchor", [] {
    BeamGeometry g;
    g.theta_r = 4.8 * constants::two_pi / 360.0;
    const double lr = lattice_wavelength(g);
    return Outcome{std::abs(lr - 3.74e-6) / 3.74e-6 < 5e-3 && std::abs(lr - 3.7e-6) / 3.7e-6 < 0.02,
                   fmt("lambda_R = %.4f um at 4.8 degrees", lr * 1e6)};
  });

  criterion(8, "Validity ratio", [] {
    const auto v = validity_ratio(1e-23, 30e-9, 10.0, 1e-3);
    return Outcome{std::abs(v.ratio - 0.1) / 0.1 < 0.1 && std::abs(v.ratio - 0.097) < 1e-3,
                   fmt("P_SS / P_SM = %.4f", v.ratio)};
  });

  criterion(9, "Displacement amplitude oracle", [] {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t n = 2 + static_cast<std::size_t>(u(rng) * 4);
      const auto& s = testing::solved(u(rng) < 0.5 ? 43.2e3 : 44.7e3, n).spectrum;
      const double tau = 20e-6 + 280e-6 * u(rng);
      const double t_pi = 80e-6 * u(rng);
      const double phi = kTwoPi * u(rng);
      double loops = (0.1 + 3.8 * u(rng)) * (u(rng) < 0.5 ? -1 : 1);
      if (std::abs(loops - std::round(loops)) < 0.05) loops += 0.1;
      const std::size_t target = static_cast<std::size_t>(u(rng) * n);
      const double mu = s.omega[target] + kTwoPi * loops / tau;
      const bool echo = trial % 2 == 0;
      DriveConfig d;
      for (std::size_t j = 0; j < n; ++j) d.forces.push_back(1e-23 * (0.8 + 0.4 * u(rng)));
      d.mu_r = mu;
      d.sequence = echo ? PulseSequence{SpinEcho{tau, t_pi}} : PulseSequence{Ramsey{tau}};
      const auto field = echo ? alpha_spin_echo(d, s) : alpha_single_arm(d, s, tau, phi);
      for (std::size_t m = 0; m < n; ++m) {
        const double w = s.omega[m];
        const auto unit = echo ? testing::integrate_mode(1.0, s.ion_mass, w, mu, 0.0, tau) -
                                     testing::integrate_mode(1.0, s.ion_mass, w, mu, (tau + t_pi) * (mu - w), tau)
                               : testing::integrate_mode(1.0, s.ion_mass, w, mu, phi, tau);
        // Components with b_jm = 0 by symmetry are compared against the column scale.
        const auto mm = static_cast<Eigen::Index>(m);
        const double floor = 1e-12 * std::abs(unit) * 1e-23 * s.b.col(mm).cwiseAbs().maxCoeff();
        for (std::size_t j = 0; j < n; ++j) {
          const auto jj = static_cast<Eigen::Index>(j);
          const auto expect = d.forces[j] * s.b(jj, mm) * unit;
          const double r = std::abs(field.alpha(jj, mm) - expect) / std::max(std::abs(expect), floor);
          if (!std::isfinite(r)) return Outcome{false, "non-finite comparison"};
          worst = std::max(worst, r);
        }
      }
    }
    return Outcome{worst < 1e-6, fmt("worst relative difference %.2e over 20 randomized sets, N <= 5, both sequences "
                                     "(tol 1e-6)",
                                     worst)};
  });

  criterion(10, "Mean excursion", [] {
    const auto p = echo_point(force_for_twenty_percent());
    auto d = p.drive;
    d.mu_r = kTwoPi * (p.f1_hz + 1.4 / 500e-6);
    const auto ex = mean_excursion(alpha_single_arm(d, p.spectrum, 500e-6, 0.0), p.spectrum, 0);
    return Outcome{ex.rms_m >= 0.3e-9 && ex.rms_m <= 2.0e-9,
                   fmt("COM excursion per arm %.3f nm (RMS over the spin superposition; spin-aligned %.2f nm), "
                       "F = %.3g N",
                       ex.rms_m * 1e9, ex.aligned_m * 1e9, d.forces[0])};
  });

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
