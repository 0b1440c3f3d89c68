#include "drumhead/kernels.hpp"

#include <limits>
#include <numeric>
#include <vector>

namespace drumhead::kernels {
namespace {

inline double trap_energy(const Vec3& p, const ReducedTrap& t) {
  return 0.5 * (p.z * p.z + t.beta * (p.x * p.x + p.y * p.y) + t.wall * (p.x * p.x - p.y * p.y));
}

inline Vec3 trap_gradient(const Vec3& p, const ReducedTrap& t) {
  return {(t.beta + t.wall) * p.x, (t.beta - t.wall) * p.y, p.z};
}

inline double trap_energy_difference(const Vec3& p, const Vec3& s, const ReducedTrap& t) {
  // 0.5 * ((p + s)^2 - p^2) = 0.5 * s (2p + s), per axis
  const double dx = s.x * (2.0 * p.x + s.x);
  const double dy = s.y * (2.0 * p.y + s.y);
  const double dz = s.z * (2.0 * p.z + s.z);
  return 0.5 * (dz + t.beta * (dx + dy) + t.wall * (dx - dy));
}

// 1/|r + delta| - 1/|r| without cancellation.
inline double coulomb_difference(const Vec3& r, const Vec3& delta) {
  const double d0 = norm(r);
  const Vec3 r1 = r + delta;
  const double d1 = norm(r1);
  const Vec3 twice_r_plus = 2.0 * r + delta;
  const double sq_diff = -dot(delta, twice_r_plus);  // |r|^2 - |r1|^2
  return sq_diff / (d0 * d1 * (d0 + d1));
}

inline double stiffness_offdiag(const Vec3& a, const Vec3& b) {
  const Vec3 r = a - b;
  const double d2 = dot(r, r);
  const double d = std::sqrt(d2);
  const double inv3 = 1.0 / (d2 * d);
  return inv3 - 3.0 * r.z * r.z * inv3 / d2;
}

}  // namespace

double energy(std::span<const Vec3> r, const ReducedTrap& trap) {
  const auto n = static_cast<std::ptrdiff_t>(r.size());
  std::vector<double> partial(r.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double pair = 0.0;
    for (std::ptrdiff_t k = 0; k < n; ++k) {
      if (k == i) continue;
      pair += 1.0 / norm(r[i] - r[k]);
    }
    partial[i] = trap_energy(r[i], trap) + 0.5 * pair;
  }
  return std::accumulate(partial.begin(), partial.end(), 0.0);
}

void gradient(std::span<const Vec3> r, const ReducedTrap& trap, std::span<Vec3> grad) {
  const auto n = static_cast<std::ptrdiff_t>(r.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    Vec3 g = trap_gradient(r[i], trap);
    for (std::ptrdiff_t k = 0; k < n; ++k) {
      if (k == i) continue;
      const Vec3 d = r[i] - r[k];
      const double d2 = dot(d, d);
      const double inv3 = 1.0 / (d2 * std::sqrt(d2));
      g.x -= d.x * inv3;
      g.y -= d.y * inv3;
      g.z -= d.z * inv3;
    }
    grad[i] = g;
  }
}

double energy_difference(std::span<const Vec3> r, std::span<const Vec3> step,
                         const ReducedTrap& trap) {
  const auto n = static_cast<std::ptrdiff_t>(r.size());
  std::vector<double> partial(r.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double pair = 0.0;
    for (std::ptrdiff_t k = 0; k < n; ++k) {
      if (k == i) continue;
      pair += coulomb_difference(r[i] - r[k], step[i] - step[k]);
    }
    partial[i] = trap_energy_difference(r[i], step[i], trap) + 0.5 * pair;
  }
  return std::accumulate(partial.begin(), partial.end(), 0.0);
}

Eigen::MatrixXd transverse_stiffness(std::span<const Vec3> r) {
  const auto n = static_cast<std::ptrdiff_t>(r.size());
  Eigen::MatrixXd k(n, n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < n; ++j) {
    double screening = 0.0;
    for (std::ptrdiff_t m = 0; m < n; ++m) {
      if (m == j) continue;
      const double c = stiffness_offdiag(r[j], r[m]);
      k(j, m) = c;
      screening += c;
    }
    k(j, j) = 1.0 - screening;
  }
  return k;
}

double min_pair_distance(std::span<const Vec3> r) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < r.size(); ++j)
    for (std::size_t k = j + 1; k < r.size(); ++k) best = std::min(best, norm(r[j] - r[k]));
  return best;
}

namespace serial {

double energy(std::span<const Vec3> r, const ReducedTrap& trap) {
  double e = 0.0;
  for (std::size_t j = 0; j < r.size(); ++j) {
    e += trap_energy(r[j], trap);
    for (std::size_t k = j + 1; k < r.size(); ++k) e += 1.0 / norm(r[j] - r[k]);
  }
  return e;
}

void gradient(std::span<const Vec3> r, const ReducedTrap& trap, std::span<Vec3> grad) {
  for (std::size_t j = 0; j < r.size(); ++j) grad[j] = trap_gradient(r[j], trap);
  for (std::size_t j = 0; j < r.size(); ++j) {
    for (std::size_t k = j + 1; k < r.size(); ++k) {
      const Vec3 d = r[j] - r[k];
      const double inv3 = std::pow(dot(d, d), -1.5);
      const Vec3 f = inv3 * d;
      grad[j] = grad[j] - f;
      grad[k] += f;
    }
  }
}

double energy_difference(std::span<const Vec3> r, std::span<const Vec3> step,
                         const ReducedTrap& trap) {
  double e = 0.0;
  for (std::size_t j = 0; j < r.size(); ++j) {
    e += trap_energy_difference(r[j], step[j], trap);
    for (std::size_t k = j + 1; k < r.size(); ++k)
      e += coulomb_difference(r[j] - r[k], step[j] - step[k]);
  }
  return e;
}

Eigen::MatrixXd transverse_stiffness(std::span<const Vec3> r) {
  const auto n = static_cast<Eigen::Index>(r.size());
  Eigen::MatrixXd k = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index m = j + 1; m < n; ++m) {
      const double c = stiffness_offdiag(r[j], r[m]);
      k(j, m) = c;
      k(m, j) = c;
      k(j, j) -= c;
      k(m, m) -= c;
    }
  }
  return k;
}

}  // namespace serial

}  // namespace drumhead::kernels
