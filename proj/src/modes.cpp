#include "drumhead/modes.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "drumhead/kernels.hpp"

namespace drumhead {
namespace {

constexpr double kDegenerateRelative = 1e-10;

std::vector<Vec3> reduced_positions(const CrystalLattice& lattice, const TrapParams& params) {
  if (!lattice.converged) throw std::invalid_argument("lattice is not converged");
  if (!lattice.planar) throw std::invalid_argument("lattice is not planar; transverse modes undefined");
  const double inv_l0 = 1.0 / params.length_scale();
  std::vector<Vec3> r;
  r.reserve(lattice.positions.size());
  for (const auto& p : lattice.positions) r.push_back(inv_l0 * p);
  return r;
}

std::size_t first_significant(const Eigen::VectorXd& v) {
  const double cut = 1e-6 * v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::abs(v(i)) > cut) return static_cast<std::size_t>(i);
  return 0;
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  const double top = v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) >= top * (1.0 - 1e-9)) {
      if (v(i) < 0.0) v = -v;
      return;
    }
  }
}

}  // namespace

std::uint64_t lattice_hash(const CrystalLattice& lattice) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& p : lattice.positions) {
    for (double c : {p.x, p.y, p.z}) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &c, sizeof(double));
      for (unsigned char byte : bytes) {
        h ^= byte;
        h *= 1099511628211ull;
      }
    }
  }
  return h;
}

StiffnessMatrix transverse_stiffness(const CrystalLattice& lattice, const TrapParams& params) {
  const auto r = reduced_positions(lattice, params);
  return {params.omega_1 * params.omega_1 * kernels::transverse_stiffness(r), lattice_hash(lattice), params.mass};
}

StiffnessMatrix transverse_stiffness_serial(const CrystalLattice& lattice, const TrapParams& params) {
  const auto r = reduced_positions(lattice, params);
  return {params.omega_1 * params.omega_1 * kernels::serial::transverse_stiffness(r),
          lattice_hash(lattice), params.mass};
}

ModeSpectrum diagonalize(const StiffnessMatrix& stiffness) {
  const Eigen::MatrixXd& k = stiffness.entries;
  if (k.rows() != k.cols() || k.rows() == 0) throw std::invalid_argument("stiffness matrix must be square and non-empty");
  const double scale = k.cwiseAbs().maxCoeff();
  if ((k - k.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("stiffness matrix is not symmetric");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(k);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");

  const auto n = static_cast<std::size_t>(k.rows());
  const Eigen::VectorXd& lambda = solver.eigenvalues();
  Eigen::MatrixXd vecs = solver.eigenvectors();
  for (Eigen::Index m = 0; m < vecs.cols(); ++m) fix_sign(vecs.col(m));

  auto signed_root = [](double l) { return l >= 0.0 ? std::sqrt(l) : -std::sqrt(-l); };

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lambda(a) > lambda(b); });

  // Cluster labels over the frequency-sorted list, then canonical order inside clusters.
  std::vector<int> cluster(n, 0);
  for (std::size_t i = 1; i < n; ++i) {
    const double wa = signed_root(lambda(order[i - 1]));
    const double wb = signed_root(lambda(order[i]));
    const bool tied = std::abs(wa - wb) <= kDegenerateRelative * std::max(std::abs(wa), std::abs(wb));
    cluster[i] = tied ? cluster[i - 1] : cluster[i - 1] + 1;
  }
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo;
    while (hi < n && cluster[hi] == cluster[lo]) ++hi;
    std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(lo),
                     order.begin() + static_cast<std::ptrdiff_t>(hi), [&](std::size_t a, std::size_t b) {
                       const auto ia = first_significant(vecs.col(a));
                       const auto ib = first_significant(vecs.col(b));
                       if (ia != ib) return ia < ib;
                       return vecs(ia, a) > vecs(ib, b);
                     });
    lo = hi;
  }

  ModeSpectrum s;
  s.source_lattice_hash = stiffness.source_lattice_hash;
  s.ion_mass = stiffness.ion_mass;
  s.b.resize(k.rows(), k.cols());
  s.cluster = std::move(cluster);
  for (std::size_t m = 0; m < n; ++m) {
    const double l = lambda(order[m]);
    s.eigenvalues.push_back(l);
    s.omega.push_back(signed_root(l));
    s.b.col(static_cast<Eigen::Index>(m)) = vecs.col(order[m]);
    if (!(l > 0.0)) {
      s.stable = false;
      s.unstable_modes.push_back(static_cast<int>(m));
    }
  }
  return s;
}

long ModeHistogram::index_of(double f_hz) const {
  const auto bin = static_cast<long>(std::floor(f_hz / bin_width_hz)) - first_bin;
  if (bin < 0 || bin >= static_cast<long>(counts.size())) return -1;
  return bin;
}

ModeHistogram mode_histogram(const ModeSpectrum& spectrum, double bin_width_hz) {
  if (!(bin_width_hz > 0.0)) throw std::invalid_argument("bin width must be positive");
  ModeHistogram h;
  h.bin_width_hz = bin_width_hz;
  if (spectrum.omega.empty()) return h;
  std::vector<long> bins;
  for (double w : spectrum.omega)
    bins.push_back(static_cast<long>(std::floor(w / constants::two_pi / bin_width_hz)));
  const auto [lo, hi] = std::minmax_element(bins.begin(), bins.end());
  h.first_bin = static_cast<int>(*lo);
  h.counts.assign(static_cast<std::size_t>(*hi - *lo + 1), 0);
  for (long b : bins) ++h.counts[static_cast<std::size_t>(b - *lo)];
  return h;
}

int neighbor_sign_flips(const CrystalLattice& lattice, const ModeSpectrum& spectrum, std::size_t m,
                        double shell) {
  const auto stats = lattice_stats(lattice);
  if (!stats.mean_spacing) return 0;
  const double cutoff = shell * *stats.mean_spacing;
  const auto& r = lattice.positions;
  const auto col = spectrum.b.col(static_cast<Eigen::Index>(m));
  int flips = 0;
  for (std::size_t j = 0; j < r.size(); ++j)
    for (std::size_t k = j + 1; k < r.size(); ++k)
      if (norm(r[j] - r[k]) <= cutoff && col(static_cast<Eigen::Index>(j)) * col(static_cast<Eigen::Index>(k)) < 0.0)
        ++flips;
  return flips;
}

}  // namespace drumhead
