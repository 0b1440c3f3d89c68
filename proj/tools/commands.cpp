#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>

#include <omp.h>

#include <CLI11.hpp>

#include "drumhead/io.hpp"

namespace drumhead::cli {
namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::string out;
  std::string lattice;
  std::string spectrum;
  std::string data;
  std::string meta;
  std::string background;
  std::string csv;
  std::string histogram;
  std::string trace;
  std::string trajectory;
  double bin_hz = 10e3;
  int threads = 0;
  std::optional<std::uint64_t> seed;
};

// Thrown by commands to leave with a specific exit code after a message.
struct Exit {
  int code;
  std::string message;
};

io::RunConfig config_of(const Options& o) {
  if (o.config.empty()) throw Exit{usage, "--config is required"};
  return io::load_config(o.config);
}

ModeSpectrum spectrum_of(const Options& o) {
  if (o.spectrum.empty()) throw Exit{usage, "--spectrum is required"};
  return io::spectrum_from_json(io::read_file(o.spectrum));
}

void require_out(const Options& o) {
  if (o.out.empty()) throw Exit{usage, "--out is required"};
}

// Spectrum produced by `modes compute` must match the configured ion count.
void check_match(const io::RunConfig& c, const ModeSpectrum& s) {
  if (s.size() != c.n_ions)
    throw Exit{usage, "spectrum has " + std::to_string(s.size()) + " modes but the configuration has n_ions = " +
                          std::to_string(c.n_ions)};
  if (!s.stable) throw Exit{usage, "spectrum has unstable modes; dynamics are undefined"};
}

int crystal_solve(const Options& o, std::ostream& out) {
  require_out(o);
  auto c = config_of(o);
  if (o.seed) c.seeds.lattice = *o.seed;
  CrystalLattice lattice;
  try {
    lattice = solve_equilibrium(c.trap_params(), c.n_ions, c.solve_options());
  } catch (const ConvergenceError& e) {
    io::write_atomic(o.out, io::lattice_to_json(e.best()));
    throw Exit{not_converged, std::string(e.what()) + " (best state written to " + o.out + ")"};
  }
  io::write_atomic(o.out, io::lattice_to_json(lattice));
  if (!o.csv.empty()) io::write_atomic(o.csv, io::lattice_to_csv(lattice));
  const auto stats = lattice_stats(lattice);
  out << "ions: " << lattice.n_ions() << "\n"
      << "beta: " << io::format_double(beta(lattice.params)) << "\n"
      << "iterations: " << lattice.iterations << "\n"
      << "max residual force (N): " << io::format_double(lattice.residual_force_max) << "\n"
      << "planar: " << (lattice.planar ? "yes" : "no") << "\n";
  if (stats.mean_spacing) out << "mean spacing (m): " << io::format_double(*stats.mean_spacing) << "\n";
  out << "diameter (m): " << io::format_double(stats.diameter) << "\n";
  if (!lattice.planar) throw Exit{not_planar, "equilibrium is not a single plane (lattice written to " + o.out + ")"};
  return ok;
}

int modes_compute(const Options& o, std::ostream& out) {
  require_out(o);
  if (o.lattice.empty()) throw Exit{usage, "--lattice is required"};
  if (!(o.bin_hz > 0.0)) throw Exit{usage, "--bin-hz must be positive"};
  const auto lattice = io::lattice_from_json(io::read_file(o.lattice));
  if (!lattice.converged) throw Exit{not_converged, "lattice is not converged"};
  if (!lattice.planar) throw Exit{not_planar, "lattice is not planar; transverse modes are undefined"};
  const auto k = transverse_stiffness(lattice, lattice.params);
  const auto s = diagonalize(k);
  io::write_atomic(o.out, io::spectrum_to_json(s));
  const auto hist = mode_histogram(s, o.bin_hz);
  if (!o.histogram.empty()) io::write_atomic(o.histogram, io::histogram_to_csv(hist));

  const double w1 = lattice.params.omega_1;
  const double row_dev = ((k.entries.rowwise().sum().array() - w1 * w1).abs().maxCoeff()) / (w1 * w1);
  const double com_dev = std::abs(s.omega.front() - w1) / w1;
  out << "modes: " << s.size() << "\n"
      << "highest (Hz): " << io::format_double(s.omega.front() / constants::two_pi) << "\n"
      << "lowest (Hz): " << io::format_double(s.omega.back() / constants::two_pi) << "\n"
      << "COM check: |omega_1 - omega_z| / omega_z = " << io::format_double(com_dev)
      << ", max row-sum deviation = " << io::format_double(row_dev) << "\n"
      << "stable: " << (s.stable ? "yes" : "no") << "\n"
      << "histogram bins: " << hist.counts.size() << " of " << io::format_double(o.bin_hz) << " Hz\n";
  return ok;
}

int spectrum_simulate(const Options& o, std::ostream& out) {
  require_out(o);
  const auto c = config_of(o);
  const auto s = spectrum_of(o);
  check_match(c, s);
  if (!c.sweep) throw Exit{usage, "configuration has no sweep section"};
  const auto drive = c.drive_config();
  const auto thermal = c.thermal_state(s);
  const auto trace = sweep_spectrum(drive, s, thermal, c.sweep_grid(), c.sweep->per_ion);
  io::write_atomic(o.out, io::trace_to_csv(trace));
  out << "grid points: " << trace.mu_over_2pi.size() << "\n"
      << "background P_up: " << io::format_double(background_probability(drive.gamma, odf_on_time(drive.sequence)))
      << "\n";
  if (drive.spread_flagged()) out << "warning: force spread across ions exceeds 20%\n";
  const double z01 = ground_state_length(s.omega.front(), s.ion_mass);
  const auto v = validity_ratio(drive.force_on(0), z01, thermal.nbar.front(), arm_duration(drive.sequence));
  if (v.warning)
    out << "warning: spin-spin terms may matter (P_SS / P_SM ~ " << io::format_double(v.ratio) << ")\n";
  return ok;
}

int spectrum_trajectory(const Options& o, std::ostream& out) {
  require_out(o);
  const auto c = config_of(o);
  const auto s = spectrum_of(o);
  check_match(c, s);
  if (!c.trajectory) throw Exit{usage, "configuration has no trajectory section"};
  auto drive = c.drive_config();
  drive.mu_r = constants::two_pi * c.trajectory->mu_hz;
  const auto path = phase_space_trajectory(drive, s, c.trajectory->mode_index, c.trajectory->n_samples);
  io::write_atomic(o.out, io::trajectory_to_csv(path));
  // Excursion at the end of the first arm, before any echo recombination.
  const auto field = alpha_single_arm(drive, s, arm_duration(drive.sequence), 0.0);
  const auto ex = mean_excursion(field, s, c.trajectory->mode_index);
  out << "samples: " << path.size() << "\n"
      << "excursion per arm (m): " << io::format_double(ex.rms_m) << " [" << ex.convention << "]\n"
      << "spin-aligned excursion (m): " << io::format_double(ex.aligned_m) << "\n";
  return ok;
}

int spectrum_synthesize(const Options& o, std::ostream& out) {
  require_out(o);
  auto c = config_of(o);
  if (o.seed) c.seeds.noise = *o.seed;
  const auto s = spectrum_of(o);
  check_match(c, s);
  if (!c.sweep) throw Exit{usage, "configuration has no sweep section"};
  auto data = synthesize_spectrum(c.drive_config(), s, c.thermal_state(s), c.sweep_grid(), c.fit.synthetic_sigma,
                                  c.seeds.noise);
  data.meta.theta_r = c.beam_geometry().theta_r;
  data.meta.theta_r_rel_err = c.beam.theta_r_rel_err;
  const fs::path meta = o.meta.empty() ? fs::path(o.out).replace_extension(".json") : fs::path(o.meta);
  io::write_atomic(o.out, io::observed_to_csv(data));
  io::write_atomic(meta, io::observed_meta_to_json(data.meta));
  out << "points: " << data.points.size() << "\nmetadata: " << meta.string() << "\n";
  return ok;
}

int fit_temperature(const Options& o, std::ostream& out) {
  require_out(o);
  if (o.data.empty()) throw Exit{usage, "--data is required"};
  const auto c = config_of(o);
  const auto s = spectrum_of(o);
  check_match(c, s);

  std::optional<std::string> sidecar;
  const fs::path meta = o.meta.empty() ? fs::path(o.data).replace_extension(".json") : fs::path(o.meta);
  if (!o.meta.empty() || fs::exists(meta)) sidecar = io::read_file(meta);
  const auto data = io::observed_from_text(io::read_file(o.data), sidecar);

  auto drive = c.drive_config();
  if (!o.background.empty()) {
    const auto bg = io::observed_from_text(io::read_file(o.background), std::nullopt);
    drive.gamma = fit_background_gamma(bg.points, s, drive.sequence);
    out << "gamma from background points (1/s): " << io::format_double(drive.gamma) << "\n";
  }
  FitOptions fo;
  fo.nbar_max = c.fit.nbar_max;
  if (c.thermal.nbar || c.thermal.temperature_k || c.thermal.com_temperature_k) fo.background_modes = c.thermal_state(s);

  const auto r = fit_occupation(data, s, drive, c.fit.target_mode, fo);
  io::write_atomic(o.out, io::fit_to_json(r));
  out << std::setprecision(4) << "mode " << r.target_mode << ": nbar = " << r.nbar << " +/- " << r.nbar_err
      << " (stat " << r.nbar_stat_err << ", sys " << r.nbar_sys_err << ")\n"
      << "temperature = " << r.temperature * 1e3 << " +/- " << r.temperature_err * 1e3 << " mK\n"
      << "reduced chi2 = " << r.chi2_reduced << " over " << r.n_points << " points, gamma = " << r.gamma_used
      << " 1/s\n";
  if (r.insufficient_signal) out << "warning: the data show no resolvable mode feature\n";
  if (r.at_boundary) throw Exit{fit_at_boundary, "best fit lies at nbar = 0 (result written to " + o.out + ")"};
  return ok;
}

int plot(const Options& o, std::ostream& out) {
  require_out(o);
  if (o.trace.empty() == o.trajectory.empty()) throw Exit{usage, "give exactly one of --trace or --trajectory"};
  std::string csv = "series,x,y\n";
  std::size_t rows = 0;
  auto row = [&](const char* series, double x, double y) {
    csv += series;
    csv += ',' + io::format_double(x) + ',' + io::format_double(y) + '\n';
    ++rows;
  };
  if (!o.trace.empty()) {
    // x is the beat note in Hz for both series, so histogram bars sit under the trace.
    const auto trace = io::trace_from_csv(io::read_file(o.trace));
    for (std::size_t i = 0; i < trace.mu_over_2pi.size(); ++i) row("trace", trace.mu_over_2pi[i], trace.p_up_mean[i]);
    if (!o.histogram.empty() && !trace.mu_over_2pi.empty())
      for (const auto& [center, count] : io::histogram_rows_from_csv(io::read_file(o.histogram)))
        row("histogram", center, count);
  } else {
    if (!o.histogram.empty()) throw Exit{usage, "--histogram only applies to --trace"};
    for (const auto& p : io::trajectory_from_csv(io::read_file(o.trajectory)))
      row(p.arm == 1 ? "arm1" : "arm2", p.alpha.real(), p.alpha.imag());
  }
  io::write_atomic(o.out, csv);
  out << "rows: " << rows << "\n";
  return ok;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Drumhead-mode crystal, spectrum and thermometry pipeline", "drumhead"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--threads", o.threads, "Thread cap for parallel kernels (0 keeps the default)")
      ->check(CLI::NonNegativeNumber);

  auto add_config = [&](CLI::App* cmd) { cmd->add_option("--config", o.config, "Run configuration (JSON)"); };
  auto add_out = [&](CLI::App* cmd) { cmd->add_option("--out", o.out, "Output file")->required(); };
  auto add_spectrum = [&](CLI::App* cmd) { cmd->add_option("--spectrum", o.spectrum, "Mode spectrum JSON")->required(); };
  auto add_seed = [&](CLI::App* cmd) { cmd->add_option("--seed", o.seed, "Override the configured seed"); };
  auto add_threads = [&](CLI::App* cmd) {
    cmd->add_option("--threads", o.threads, "Thread cap for parallel kernels")->check(CLI::NonNegativeNumber);
  };

  auto* crystal = app.add_subcommand("crystal", "Equilibrium crystals")->require_subcommand(1);
  auto* solve = crystal->add_subcommand("solve", "Solve for the equilibrium lattice");
  add_config(solve);
  add_out(solve);
  add_seed(solve);
  add_threads(solve);
  solve->add_option("--csv", o.csv, "Also write x,y,z positions as CSV");

  auto* modes = app.add_subcommand("modes", "Transverse normal modes")->require_subcommand(1);
  auto* compute = modes->add_subcommand("compute", "Diagonalize the transverse stiffness matrix");
  compute->add_option("--lattice", o.lattice, "Lattice JSON from crystal solve")->required();
  add_out(compute);
  compute->add_option("--histogram", o.histogram, "Write the mode-density histogram CSV here");
  compute->add_option("--bin-hz", o.bin_hz, "Histogram bin width in Hz")->capture_default_str();
  add_threads(compute);

  auto* spectrum = app.add_subcommand("spectrum", "Spin-motion spectra")->require_subcommand(1);
  auto* simulate = spectrum->add_subcommand("simulate", "P_up versus beat note over the configured sweep");
  auto* trajectory = spectrum->add_subcommand("trajectory", "Phase-space path of one mode");
  auto* synthesize = spectrum->add_subcommand("synthesize", "Noisy synthetic data for fitting");
  for (auto* cmd : {simulate, trajectory, synthesize}) {
    add_config(cmd);
    add_spectrum(cmd);
    add_out(cmd);
    add_threads(cmd);
  }
  add_seed(synthesize);
  synthesize->add_option("--meta", o.meta, "Metadata sidecar path (default: output with .json extension)");

  auto* fit = app.add_subcommand("fit", "Thermometry")->require_subcommand(1);
  auto* temperature = fit->add_subcommand("temperature", "Fit a mode occupation to P_up data");
  temperature->add_option("--data", o.data, "Observed spectrum CSV (mu_hz,p_up,sigma)")->required();
  temperature->add_option("--meta", o.meta, "Metadata sidecar (default: data path with .json extension)");
  temperature->add_option("--background", o.background, "Off-resonant points (CSV) used to fix Gamma");
  add_config(temperature);
  add_spectrum(temperature);
  add_out(temperature);

  auto* plotcmd = app.add_subcommand("plot", "Lay out a trace or trajectory as plot-ready CSV");
  plotcmd->add_option("--trace", o.trace, "Spectrum trace CSV");
  plotcmd->add_option("--trajectory", o.trajectory, "Trajectory CSV");
  plotcmd->add_option("--histogram", o.histogram, "Histogram CSV to overlay on a trace");
  add_out(plotcmd);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return usage;
  }

  if (o.threads > 0) omp_set_num_threads(o.threads);

  try {
    if (*solve) return crystal_solve(o, out);
    if (*compute) return modes_compute(o, out);
    if (*simulate) return spectrum_simulate(o, out);
    if (*trajectory) return spectrum_trajectory(o, out);
    if (*synthesize) return spectrum_synthesize(o, out);
    if (*temperature) return fit_temperature(o, out);
    if (*plotcmd) return plot(o, out);
  } catch (const Exit& e) {
    err << "error: " << e.message << "\n";
    return e.code;
  } catch (const io::IoError& e) {
    err << "error: " << e.what() << "\n";
    return io_failure;
  } catch (const io::ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return usage;
  } catch (const FitError& e) {
    err << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case FitError::Kind::non_convergence: return fit_not_converged;
      case FitError::Kind::insufficient_span: return insufficient_span;
      case FitError::Kind::unphysical_background: return unphysical_background;
      case FitError::Kind::invalid_input: return usage;
    }
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return io_failure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return usage;
  }
  return usage;
}

}  // namespace drumhead::cli
