// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <map>

#include "drumhead/crystal.hpp"
#include "drumhead/dynamics.hpp"
#include "drumhead/kernels.hpp"
#include "drumhead/modes.hpp"

namespace {

using namespace drumhead;

const CrystalLattice& lattice(std::size_t n) {
  static std::map<std::size_t, CrystalLattice> cache;
  auto it = cache.find(n);
  if (it == cache.end())
    it = cache.emplace(n, solve_equilibrium(TrapParams::from_hz(795e3, 7.6e6, 44.7e3), n)).first;
  return it->second;
}

std::vector<Vec3> reduced(std::size_t n) {
  const auto& l = lattice(n);
  std::vector<Vec3> r;
  for (const auto& p : l.positions) r.push_back((1.0 / l.params.length_scale()) * p);
  return r;
}

const kernels::ReducedTrap kTrap{0.0343, 0.0};

void BM_GradientSerial(benchmark::State& state) {
  const auto r = reduced(static_cast<std::size_t>(state.range(0)));
  std::vector<Vec3> g(r.size());
  for (auto _ : state) {
    kernels::serial::gradient(r, kTrap, g);
    benchmark::DoNotOptimize(g.data());
  }
}

void BM_GradientParallel(benchmark::State& state) {
  const auto r = reduced(static_cast<std::size_t>(state.range(0)));
  std::vector<Vec3> g(r.size());
  for (auto _ : state) {
    kernels::gradient(r, kTrap, g);
    benchmark::DoNotOptimize(g.data());
  }
}

void BM_StiffnessSerial(benchmark::State& state) {
  const auto r = reduced(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::transverse_stiffness(r));
}

void BM_StiffnessParallel(benchmark::State& state) {
  const auto r = reduced(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::transverse_stiffness(r));
}

struct SweepInputs {
  ModeSpectrum spectrum;
  DriveConfig drive;
  ThermalState thermal;
  std::vector<double> grid;
};

const SweepInputs& sweep_inputs() {
  static const SweepInputs in = [] {
    const auto& l = lattice(190);
    SweepInputs s;
    s.spectrum = diagonalize(transverse_stiffness(l, l.params));
    s.drive.forces = {1.58e-23};
    s.drive.gamma = 223.1;
    s.drive.sequence = SpinEcho{500e-6, 65e-6};
    s.thermal = ThermalState::com_and_rest(2.29e-3, 4.3e-4, s.spectrum);
    s.grid = frequency_grid(700e3, 800e3, 500);
    return s;
  }();
  return in;
}

void BM_SweepReference(benchmark::State& state) {
  const auto& in = sweep_inputs();
  for (auto _ : state) benchmark::DoNotOptimize(sweep_spectrum_reference(in.drive, in.spectrum, in.thermal, in.grid));
}

void BM_SweepParallel(benchmark::State& state) {
  const auto& in = sweep_inputs();
  for (auto _ : state) benchmark::DoNotOptimize(sweep_spectrum(in.drive, in.spectrum, in.thermal, in.grid));
}

}  // namespace

BENCHMARK(BM_GradientSerial)->Arg(190)->Arg(345);
BENCHMARK(BM_GradientParallel)->Arg(190)->Arg(345);
BENCHMARK(BM_StiffnessSerial)->Arg(190)->Arg(345);
BENCHMARK(BM_StiffnessParallel)->Arg(190)->Arg(345);
BENCHMARK(BM_SweepReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SweepParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
