#pragma once

// Shared fixtures and independent oracles for the test binaries.

#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>

#include "drumhead/constants.hpp"
#include "drumhead/crystal.hpp"
#include "drumhead/modes.hpp"

namespace testing {

using drumhead::CrystalLattice;
using drumhead::ModeSpectrum;
using drumhead::TrapParams;
using drumhead::Vec3;

inline TrapParams reference_trap(double rotation_hz, double delta_wall = 0.0) {
  return TrapParams::from_hz(795e3, 7.6e6, rotation_hz, delta_wall);
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

struct Solved {
  CrystalLattice lattice;
  ModeSpectrum spectrum;
  drumhead::StiffnessMatrix stiffness;
};

/// Converged lattice plus its modes, cached per (rotation, N, wall) within a test binary.
inline const Solved& solved(double rotation_hz, std::size_t n, double delta_wall = 0.0) {
  static std::map<std::tuple<double, std::size_t, double>, Solved> cache;
  static std::mutex lock;
  std::lock_guard<std::mutex> guard(lock);
  const auto key = std::make_tuple(rotation_hz, n, delta_wall);
  auto it = cache.find(key);
  if (it == cache.end()) {
    const auto p = reference_trap(rotation_hz, delta_wall);
    Solved s;
    s.lattice = drumhead::solve_equilibrium(p, n);
    s.stiffness = drumhead::transverse_stiffness(s.lattice, p);
    s.spectrum = drumhead::diagonalize(s.stiffness);
    it = cache.emplace(key, std::move(s)).first;
  }
  return it->second;
}

/// Energy of the terms that involve ion i or ion k, in long double SI units,
/// written out from the trap-plus-Coulomb expression. Terms independent of z_i
/// and z_k cancel exactly in the mixed stencil, so dropping them only removes
/// round-off.
inline long double partial_energy(const std::vector<Vec3>& r, const TrapParams& p, std::size_t i, std::size_t k,
                                  long double zi, long double zk) {
  const long double m = p.mass;
  const long double w2 = static_cast<long double>(p.omega_1) * p.omega_1;
  const long double b = drumhead::beta(p);
  const long double kq2 = static_cast<long double>(drumhead::constants::coulomb_k) * p.charge * p.charge;
  auto z_of = [&](std::size_t j) -> long double { return j == i ? zi : (j == k ? zk : r[j].z); };
  long double e = 0.0L;
  const std::vector<std::size_t> own = i == k ? std::vector<std::size_t>{i} : std::vector<std::size_t>{i, k};
  for (std::size_t j : own) {
    const long double x = r[j].x, y = r[j].y, z = z_of(j);
    e += 0.5L * m * w2 * (z * z + b * (x * x + y * y)) + 0.5L * m * w2 * p.delta_wall * (x * x - y * y);
  }
  for (std::size_t a = 0; a < r.size(); ++a)
    for (std::size_t c = a + 1; c < r.size(); ++c) {
      if (a != i && a != k && c != i && c != k) continue;
      const long double dx = static_cast<long double>(r[a].x) - r[c].x;
      const long double dy = static_cast<long double>(r[a].y) - r[c].y;
      const long double dz = z_of(a) - z_of(c);
      e += kq2 / std::sqrt(dx * dx + dy * dy + dz * dz);
    }
  return e;
}

/// Central-difference Hessian d^2 V / dz_i dz_k / M with one Richardson step, in (rad/s)^2.
inline Eigen::MatrixXd finite_difference_stiffness(const CrystalLattice& lattice, const TrapParams& p) {
  const auto& r = lattice.positions;
  const std::size_t n = r.size();
  const long double h0 = 1e-3L * p.length_scale();
  Eigen::MatrixXd out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = i; k < n; ++k) {
      auto stencil = [&](long double h) -> long double {
        const long double zi = r[i].z, zk = r[k].z;
        if (i == k) {
          return (partial_energy(r, p, i, i, zi + h, zk) - 2.0L * partial_energy(r, p, i, i, zi, zk) +
                  partial_energy(r, p, i, i, zi - h, zk)) /
                 (h * h);
        }
        return (partial_energy(r, p, i, k, zi + h, zk + h) - partial_energy(r, p, i, k, zi + h, zk - h) -
                partial_energy(r, p, i, k, zi - h, zk + h) + partial_energy(r, p, i, k, zi - h, zk - h)) /
               (4.0L * h * h);
      };
      const long double coarse = stencil(h0);
      const long double fine = stencil(0.5L * h0);
      const double v = static_cast<double>((4.0L * fine - coarse) / 3.0L / p.mass);
      out(i, k) = out(k, i) = v;
    }
  return out;
}

/// Classical driven mode z'' = -omega^2 z + (f / M) cos(mu t + phi) integrated
/// from rest with an adaptive Dormand-Prince stepper, mapped to the coherent
/// amplitude in the frame rotating at omega:
///   alpha = e^{i omega t} (z / (2 z0) + i p / (2 M omega z0)).
inline std::complex<double> integrate_mode(double f, double mass, double omega, double mu, double phi, double t) {
  namespace ode = boost::numeric::odeint;
  using State = std::array<double, 2>;
  // Scaled variables keep the state O(1): u = z / L, v = p / (M omega L) with L = f / (M omega^2).
  State s{0.0, 0.0};
  auto rhs = [&](const State& x, State& dx, double tt) {
    dx[0] = omega * x[1];
    dx[1] = -omega * x[0] + omega * std::cos(mu * tt + phi);
  };
  // The controlled stepper trims its last step to land exactly on t.
  auto stepper = ode::make_controlled(1e-13, 1e-13, ode::runge_kutta_dopri5<State>());
  ode::integrate_adaptive(stepper, rhs, s, 0.0, t, 0.01 / omega);
  const double length = f / (mass * omega * omega);
  const double z0 = std::sqrt(drumhead::constants::hbar / (2.0 * mass * omega));
  const double z = s[0] * length;
  const double p = s[1] * mass * omega * length;
  return std::exp(std::complex<double>(0.0, omega * t)) *
         std::complex<double>(z / (2.0 * z0), p / (2.0 * mass * omega * z0));
}

}  // namespace testing
