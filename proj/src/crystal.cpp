#include "drumhead/crystal.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>

#include "drumhead/kernels.hpp"

namespace drumhead {
namespace {

using Config = std::vector<Vec3>;

double dot(const Config& a, const Config& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += drumhead::dot(a[i], b[i]);
  return s;
}

double max_component(const Config& g) {
  double m = 0.0;
  for (const auto& v : g) m = std::max({m, std::abs(v.x), std::abs(v.y), std::abs(v.z)});
  return m;
}

void axpy(double a, const Config& x, Config& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

Config scaled(const Config& c, double s) {
  Config out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) out[i] = s * c[i];
  return out;
}

double mean_nearest_neighbor(std::span<const Vec3> r) {
  if (r.size() < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t j = 0; j < r.size(); ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < r.size(); ++k)
      if (k != j) best = std::min(best, norm(r[j] - r[k]));
    sum += best;
  }
  return sum / static_cast<double>(r.size());
}

struct Pair {
  Config s;  // position change
  Config y;  // gradient change
  double rho;
};

// L-BFGS two-loop recursion on the gradient; returns the descent direction.
Config lbfgs_direction(const Config& grad, const std::deque<Pair>& memory) {
  Config q = grad;
  std::vector<double> alpha(memory.size());
  for (std::size_t i = memory.size(); i-- > 0;) {
    alpha[i] = memory[i].rho * dot(memory[i].s, q);
    axpy(-alpha[i], memory[i].y, q);
  }
  double gamma = 1.0;
  if (!memory.empty()) {
    const auto& last = memory.back();
    gamma = dot(last.s, last.y) / dot(last.y, last.y);
  }
  Config r = scaled(q, gamma);
  for (std::size_t i = 0; i < memory.size(); ++i) {
    const double b = memory[i].rho * dot(memory[i].y, r);
    axpy(alpha[i] - b, memory[i].s, r);
  }
  return scaled(r, -1.0);
}

}  // namespace

std::vector<Vec3> seed_configuration(const TrapParams& params, std::size_t n_ions,
                                     std::uint64_t seed, double jitter) {
  std::vector<Vec3> out;
  if (n_ions == 0) return out;
  const double l0 = params.length_scale();
  if (n_ions == 1) {
    out.push_back({0.0, 0.0, 0.0});
    return out;
  }
  // Two-ion separation d^3 = 2 / beta in reduced units sets the lattice constant.
  const double spacing = std::cbrt(2.0 / beta(params));

  const int extent = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_ions)))) + 2;
  std::vector<Vec3> sites;
  const double row = std::sqrt(3.0) / 2.0;
  for (int i = -extent; i <= extent; ++i) {
    for (int j = -extent; j <= extent; ++j) {
      // tiny offset keeps the radial ordering free of exact ties
      sites.push_back({spacing * (i + 0.5 * j) + 1e-3 * spacing, spacing * row * j + 2e-3 * spacing, 0.0});
    }
  }
  std::stable_sort(sites.begin(), sites.end(), [](const Vec3& a, const Vec3& b) {
    return a.x * a.x + a.y * a.y < b.x * b.x + b.y * b.y;
  });
  sites.resize(n_ions);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& s : sites) {
    s.x += jitter * spacing * u(rng);
    s.y += jitter * spacing * u(rng);
    s.z = 1e-2 * jitter * spacing * u(rng);
    out.push_back(l0 * s);
  }
  return out;
}

bool is_planar(std::span<const Vec3> positions, double reference_spacing, double tolerance) {
  double zmax = 0.0;
  for (const auto& p : positions) zmax = std::max(zmax, std::abs(p.z));
  return zmax <= tolerance * reference_spacing;
}

double max_residual_force(std::span<const Vec3> positions, const TrapParams& params) {
  const double l0 = params.length_scale();
  const kernels::ReducedTrap trap{beta(params), params.delta_wall};
  Config r = scaled(Config(positions.begin(), positions.end()), 1.0 / l0);
  Config g(r.size());
  kernels::gradient(r, trap, g);
  return max_component(g) * params.force_scale();
}

CrystalLattice solve_equilibrium(const TrapParams& params, std::size_t n_ions,
                                 const SolveOptions& options,
                                 std::optional<std::vector<Vec3>> seed_positions) {
  params.validate();
  if (n_ions == 0) throw std::invalid_argument("n_ions must be at least 1");
  if (seed_positions && seed_positions->size() != n_ions)
    throw std::invalid_argument("seed configuration size does not match n_ions");

  const double l0 = params.length_scale();
  const double e0 = params.energy_scale();
  const kernels::ReducedTrap trap{beta(params), params.delta_wall};

  Config x = seed_positions ? *seed_positions
                            : seed_configuration(params, n_ions, options.seed, options.jitter);
  x = scaled(x, 1.0 / l0);
  if (n_ions > 1 && kernels::min_pair_distance(x) == 0.0)
    throw std::domain_error("seed configuration has coincident ions");

  CrystalLattice result;
  result.params = params;
  result.seed = options.seed;

  Config g(n_ions), g_new(n_ions), step(n_ions), x_new(n_ions);
  kernels::gradient(x, trap, g);
  double energy = kernels::energy(x, trap);
  std::deque<Pair> memory;
  double last_rel_change = 0.0;
  int failures = 0;
  int it = 0;

  auto converged = [&] {
    return max_component(g) <= options.gradient_tolerance &&
           last_rel_change <= options.relative_energy_tolerance;
  };

  for (; it < options.max_iterations && !converged(); ++it) {
    Config dir = lbfgs_direction(g, memory);
    double slope = dot(g, dir);
    if (!(slope < 0.0)) {
      memory.clear();
      dir = scaled(g, -1.0);
      slope = dot(g, dir);
    }
    // Keep the first trial step from moving any ion by more than a fraction of
    // the lattice scale; Coulomb walls make long steps useless.
    double t = 1.0;
    const double longest = max_component(dir);
    if (longest * t > 0.2) t = 0.2 / longest;

    bool accepted = false;
    double de = 0.0;
    for (int ls = 0; ls < 60; ++ls) {
      step = scaled(dir, t);
      de = kernels::energy_difference(x, step, trap);
      if (std::isfinite(de) && de <= 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // Armijo cannot resolve any further decrease; retry once from steepest descent.
      if (++failures > 2 || memory.empty()) break;
      memory.clear();
      continue;
    }
    failures = 0;
    for (std::size_t i = 0; i < n_ions; ++i) x_new[i] = x[i] + step[i];
    kernels::gradient(x_new, trap, g_new);

    Pair p{step, Config(n_ions), 0.0};
    for (std::size_t i = 0; i < n_ions; ++i) p.y[i] = g_new[i] - g[i];
    const double sy = dot(p.s, p.y);
    if (sy > 1e-300) {
      p.rho = 1.0 / sy;
      memory.push_back(std::move(p));
      if (static_cast<int>(memory.size()) > options.lbfgs_memory) memory.pop_front();
    }

    if (options.record_descent) result.descent_log.push_back(de * e0);
    last_rel_change = std::abs(de) / std::max(std::abs(energy), 1e-300);
    energy += de;
    x.swap(x_new);
    g.swap(g_new);
  }

  // Re-evaluate from scratch so the reported energy carries no accumulated drift.
  energy = kernels::energy(x, trap);
  result.positions = scaled(x, l0);
  result.energy = energy * e0;
  result.iterations = it;
  result.residual_force_max = max_component(g) * params.force_scale();
  result.converged = converged();
  const double spacing = n_ions > 1 ? mean_nearest_neighbor(result.positions) : l0;
  result.planar = is_planar(result.positions, spacing, options.planarity_tolerance);

  if (!result.converged) {
    throw ConvergenceError("equilibrium solve did not converge after " + std::to_string(it) +
                               " iterations (max residual force " +
                               std::to_string(result.residual_force_max) + " N)",
                           std::move(result));
  }
  return result;
}

LatticeStats lattice_stats(const CrystalLattice& lattice) {
  LatticeStats s;
  const auto& r = lattice.positions;
  if (r.size() >= 2) s.mean_spacing = mean_nearest_neighbor(r);
  for (std::size_t j = 0; j < r.size(); ++j)
    for (std::size_t k = j + 1; k < r.size(); ++k) s.diameter = std::max(s.diameter, norm(r[j] - r[k]));
  return s;
}

}  // namespace drumhead
