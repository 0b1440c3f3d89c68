#include "drumhead/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

namespace drumhead::io {

using nlohmann::json;

namespace {

int line_at(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// Line of the last key in `path`, found by walking the raw text key by key.
// Good enough for hand-written configs; returns 0 when a key is not found.
int line_of(const std::string& text, std::initializer_list<std::string_view> path) {
  std::size_t pos = 0;
  for (auto key : path) {
    const std::string quoted = "\"" + std::string(key) + "\"";
    pos = text.find(quoted, pos);
    if (pos == std::string::npos) return 0;
    pos += quoted.size();
  }
  return line_at(text, pos);
}

class Reader {
 public:
  Reader(const std::string& text, const json& root) : text_(text), root_(root) {}

  [[noreturn]] void fail(const std::string& what, std::initializer_list<std::string_view> path) const {
    std::string dotted;
    for (auto k : path) dotted += (dotted.empty() ? "" : ".") + std::string(k);
    int line = line_of(text_, path);
    // A missing key is reported at its section.
    if (line == 0 && path.size() > 1 && !path.begin()->empty()) line = line_of(text_, {*path.begin()});
    throw ValidationError(dotted + ": " + what, line);
  }

  const json* find(std::string_view section, std::string_view key) const {
    const json& s = section.empty() ? root_ : root_.at(std::string(section));
    auto it = s.find(std::string(key));
    return it == s.end() ? nullptr : &*it;
  }

  double number(std::string_view section, std::string_view key, double fallback, bool required = false) const {
    const json* v = find(section, key);
    if (!v) {
      if (required) fail("missing required number", {section, key});
      return fallback;
    }
    if (!v->is_number()) fail("expected a number", {section, key});
    const double d = v->get<double>();
    if (!std::isfinite(d)) fail("must be finite", {section, key});
    return d;
  }

  std::optional<double> maybe_number(std::string_view section, std::string_view key) const {
    if (!find(section, key)) return std::nullopt;
    return number(section, key, 0.0);
  }

  std::uint64_t count(std::string_view section, std::string_view key, std::uint64_t fallback,
                      bool required = false) const {
    const json* v = find(section, key);
    if (!v) {
      if (required) fail("missing required integer", {section, key});
      return fallback;
    }
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0))
      fail("expected a non-negative integer", {section, key});
    return v->get<std::uint64_t>();
  }

  bool boolean(std::string_view section, std::string_view key, bool fallback) const {
    const json* v = find(section, key);
    if (!v) return fallback;
    if (!v->is_boolean()) fail("expected true or false", {section, key});
    return v->get<bool>();
  }

  std::string string(std::string_view section, std::string_view key, const std::string& fallback) const {
    const json* v = find(section, key);
    if (!v) return fallback;
    if (!v->is_string()) fail("expected a string", {section, key});
    return v->get<std::string>();
  }

  std::optional<std::vector<double>> numbers(std::string_view section, std::string_view key) const {
    const json* v = find(section, key);
    if (!v) return std::nullopt;
    if (!v->is_array()) fail("expected an array of numbers", {section, key});
    std::vector<double> out;
    for (const auto& e : *v) {
      if (!e.is_number()) fail("expected an array of numbers", {section, key});
      out.push_back(e.get<double>());
    }
    return out;
  }

  void only_keys(std::string_view section, std::initializer_list<std::string_view> allowed) const {
    const json& s = section.empty() ? root_ : root_.at(std::string(section));
    if (!s.is_object()) fail("expected an object", {section});
    for (const auto& [k, _] : s.items()) {
      bool ok = false;
      for (auto a : allowed) ok = ok || k == a;
      if (!ok) {
        if (section.empty())
          throw ValidationError("unknown key \"" + k + "\"", line_of(text_, {k}));
        fail("unknown key \"" + k + "\"", {section, k});
      }
    }
  }

  bool has(std::string_view section) const { return root_.contains(std::string(section)); }

 private:
  const std::string& text_;
  const json& root_;
};

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed JSON: ") + e.what(), line_at(text, e.byte > 0 ? e.byte - 1 : 0));
  }
}

void append_row(std::string& out, std::initializer_list<double> values) {
  bool first = true;
  for (double v : values) {
    if (!first) out += ',';
    out += format_double(v);
    first = false;
  }
  out += '\n';
}

// Splits non-empty CSV lines after the header into numeric fields.
std::vector<std::vector<double>> parse_csv(const std::string& text, const std::string& expected_header,
                                           std::size_t min_columns) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  std::vector<std::vector<double>> rows;
  bool header = false;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!header) {
      if (line.rfind(expected_header, 0) != 0)
        throw ValidationError("expected header starting with \"" + expected_header + "\"", number);
      header = true;
      continue;
    }
    std::vector<double> row;
    std::istringstream fields(line);
    std::string field;
    while (std::getline(fields, field, ',')) {
      const auto b = field.find_first_not_of(" \t");
      const auto e = field.find_last_not_of(" \t");
      if (b == std::string::npos) throw ValidationError("empty field", number);
      const std::string trimmed = field.substr(b, e - b + 1);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), v);
      if (ec != std::errc() || ptr != trimmed.data() + trimmed.size())
        throw ValidationError("not a number: \"" + trimmed + "\"", number);
      row.push_back(v);
    }
    if (row.size() < min_columns)
      throw ValidationError("expected at least " + std::to_string(min_columns) + " columns", number);
    rows.push_back(std::move(row));
  }
  if (!header) throw ValidationError("missing header \"" + expected_header + "\"");
  return rows;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << contents;
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot move output into " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---------------------------------------------------------------- config

TrapParams RunConfig::trap_params() const {
  return TrapParams::from_hz(trap.axial_hz, trap.cyclotron_hz, trap.rotation_hz, trap.delta_wall, trap.mass_kg,
                             trap.charge_c);
}

BeamGeometry RunConfig::beam_geometry() const {
  BeamGeometry g;
  g.wavelength = beam.wavelength_m;
  g.theta_r = beam.theta_r_deg * M_PI / 180.0;
  g.waist_z = beam.waist_z_m;
  g.waist_x = beam.waist_x_m;
  g.misalignment_err = beam.misalignment_deg * M_PI / 180.0;
  return g;
}

SolveOptions RunConfig::solve_options() const {
  SolveOptions o;
  o.gradient_tolerance = solver.gradient_tolerance;
  o.max_iterations = solver.max_iterations;
  o.jitter = solver.jitter;
  o.planarity_tolerance = solver.planarity_tolerance;
  o.seed = seeds.lattice;
  return o;
}

PulseSequence RunConfig::pulse_sequence() const {
  if (drive.sequence == "ramsey") return Ramsey{drive.tau_s};
  return SpinEcho{drive.tau_s, drive.t_pi_s};
}

DriveConfig RunConfig::drive_config() const {
  DriveConfig d;
  if (drive.forces_n) d.forces = *drive.forces_n;
  else if (drive.intensity_w_cm2) d.forces = {force_from_intensity(*drive.intensity_w_cm2)};
  else d.forces = {drive.force_n.value_or(0.0)};
  d.gamma = drive.gamma_per_s;
  d.sequence = pulse_sequence();
  return d;
}

ThermalState RunConfig::thermal_state(const ModeSpectrum& spectrum) const {
  if (thermal.nbar) {
    ThermalState t{*thermal.nbar};
    t.validate(spectrum.size());
    return t;
  }
  const double rest = thermal.temperature_k.value_or(0.0);
  if (thermal.com_temperature_k) return ThermalState::com_and_rest(*thermal.com_temperature_k, rest, spectrum);
  return ThermalState::from_temperatures(std::vector<double>(spectrum.size(), rest), spectrum);
}

std::vector<double> RunConfig::sweep_grid() const {
  if (!sweep) return {};
  return frequency_grid(sweep->start_hz, sweep->stop_hz, sweep->step_hz);
}

RunConfig parse_config(const std::string& text) {
  const json root = parse_json(text);
  if (!root.is_object()) throw ValidationError("configuration must be a JSON object", 1);
  const Reader r(text, root);
  r.only_keys("", {"trap", "n_ions", "beam", "drive", "thermal", "sweep", "solver", "trajectory", "fit", "seeds"});

  RunConfig c;
  if (!r.has("trap")) throw ValidationError("missing required section \"trap\"");
  r.only_keys("trap", {"axial_hz", "cyclotron_hz", "rotation_hz", "delta_wall", "mass_kg", "charge_c"});
  c.trap.axial_hz = r.number("trap", "axial_hz", 0.0, true);
  c.trap.cyclotron_hz = r.number("trap", "cyclotron_hz", 0.0, true);
  c.trap.rotation_hz = r.number("trap", "rotation_hz", 0.0, true);
  c.trap.delta_wall = r.number("trap", "delta_wall", c.trap.delta_wall);
  c.trap.mass_kg = r.number("trap", "mass_kg", c.trap.mass_kg);
  c.trap.charge_c = r.number("trap", "charge_c", c.trap.charge_c);
  if (!(c.trap.axial_hz > 0.0)) r.fail("must be positive", {"trap", "axial_hz"});
  if (!(c.trap.cyclotron_hz > 0.0)) r.fail("must be positive", {"trap", "cyclotron_hz"});
  if (!(c.trap.rotation_hz > 0.0 && c.trap.rotation_hz < c.trap.cyclotron_hz))
    r.fail("must lie between 0 and the cyclotron frequency", {"trap", "rotation_hz"});
  if (!(c.trap.mass_kg > 0.0)) r.fail("must be positive", {"trap", "mass_kg"});
  if (!(c.trap.charge_c > 0.0)) r.fail("must be positive", {"trap", "charge_c"});
  if (!(c.trap.delta_wall >= 0.0)) r.fail("must be non-negative", {"trap", "delta_wall"});
  try {
    c.trap_params().validate();
    (void)beta(c.trap_params());
  } catch (const std::exception& e) {
    r.fail(e.what(), {"trap", "rotation_hz"});
  }

  {
    const json* n = root.contains("n_ions") ? &root["n_ions"] : nullptr;
    if (!n) throw ValidationError("missing required key \"n_ions\"");
    if (!n->is_number_integer() || n->get<std::int64_t>() < 1)
      throw ValidationError("n_ions: expected a positive integer", line_of(text, {"n_ions"}));
    c.n_ions = n->get<std::size_t>();
  }

  if (r.has("beam")) {
    r.only_keys("beam", {"wavelength_m", "theta_r_deg", "theta_r_rel_err", "waist_z_m", "waist_x_m",
                         "misalignment_deg"});
    c.beam.wavelength_m = r.number("beam", "wavelength_m", c.beam.wavelength_m);
    c.beam.theta_r_deg = r.number("beam", "theta_r_deg", c.beam.theta_r_deg);
    c.beam.theta_r_rel_err = r.number("beam", "theta_r_rel_err", c.beam.theta_r_rel_err);
    c.beam.waist_z_m = r.number("beam", "waist_z_m", c.beam.waist_z_m);
    c.beam.waist_x_m = r.number("beam", "waist_x_m", c.beam.waist_x_m);
    c.beam.misalignment_deg = r.number("beam", "misalignment_deg", c.beam.misalignment_deg);
    if (!(c.beam.theta_r_deg > 0.0 && c.beam.theta_r_deg < 90.0))
      r.fail("must lie in (0, 90) degrees", {"beam", "theta_r_deg"});
    if (!(c.beam.theta_r_rel_err >= 0.0 && c.beam.theta_r_rel_err < 1.0))
      r.fail("must lie in [0, 1)", {"beam", "theta_r_rel_err"});
    try {
      c.beam_geometry().validate();
    } catch (const std::exception& e) {
      r.fail(e.what(), {"beam"});
    }
  }

  if (r.has("drive")) {
    r.only_keys("drive", {"force_n", "forces_n", "intensity_w_cm2", "gamma_per_s", "sequence", "tau_s", "t_pi_s"});
    c.drive.force_n = r.maybe_number("drive", "force_n");
    c.drive.forces_n = r.numbers("drive", "forces_n");
    c.drive.intensity_w_cm2 = r.maybe_number("drive", "intensity_w_cm2");
    const int given = int(c.drive.force_n.has_value()) + int(c.drive.forces_n.has_value()) +
                      int(c.drive.intensity_w_cm2.has_value());
    if (given > 1) r.fail("give only one of force_n, forces_n, intensity_w_cm2", {"drive"});
    if (c.drive.force_n && !(*c.drive.force_n >= 0.0)) r.fail("must be non-negative", {"drive", "force_n"});
    if (c.drive.intensity_w_cm2 && !(*c.drive.intensity_w_cm2 >= 0.0))
      r.fail("must be non-negative", {"drive", "intensity_w_cm2"});
    if (c.drive.forces_n) {
      if (c.drive.forces_n->size() != c.n_ions)
        r.fail("needs one entry per ion (" + std::to_string(c.n_ions) + ")", {"drive", "forces_n"});
      for (double f : *c.drive.forces_n)
        if (!(f >= 0.0) || !std::isfinite(f)) r.fail("entries must be non-negative", {"drive", "forces_n"});
    }
    c.drive.gamma_per_s = r.number("drive", "gamma_per_s", c.drive.gamma_per_s);
    if (!(c.drive.gamma_per_s >= 0.0)) r.fail("must be non-negative", {"drive", "gamma_per_s"});
    c.drive.sequence = r.string("drive", "sequence", c.drive.sequence);
    if (c.drive.sequence != "spin_echo" && c.drive.sequence != "ramsey")
      r.fail("must be \"spin_echo\" or \"ramsey\"", {"drive", "sequence"});
    c.drive.tau_s = r.number("drive", "tau_s", c.drive.tau_s);
    c.drive.t_pi_s = r.number("drive", "t_pi_s", c.drive.t_pi_s);
    if (!(c.drive.tau_s > 0.0)) r.fail("must be positive", {"drive", "tau_s"});
    if (!(c.drive.t_pi_s >= 0.0)) r.fail("must be non-negative", {"drive", "t_pi_s"});
  }

  if (r.has("thermal")) {
    r.only_keys("thermal", {"nbar", "temperature_k", "com_temperature_k"});
    c.thermal.nbar = r.numbers("thermal", "nbar");
    c.thermal.temperature_k = r.maybe_number("thermal", "temperature_k");
    c.thermal.com_temperature_k = r.maybe_number("thermal", "com_temperature_k");
    if (c.thermal.nbar && (c.thermal.temperature_k || c.thermal.com_temperature_k))
      r.fail("give either nbar or temperatures, not both", {"thermal"});
    if (c.thermal.nbar) {
      if (c.thermal.nbar->size() != c.n_ions)
        r.fail("needs one entry per mode (" + std::to_string(c.n_ions) + ")", {"thermal", "nbar"});
      for (double n : *c.thermal.nbar)
        if (!(n >= 0.0) || !std::isfinite(n)) r.fail("entries must be non-negative", {"thermal", "nbar"});
    }
    if (c.thermal.temperature_k && !(*c.thermal.temperature_k >= 0.0))
      r.fail("must be non-negative", {"thermal", "temperature_k"});
    if (c.thermal.com_temperature_k && !(*c.thermal.com_temperature_k >= 0.0))
      r.fail("must be non-negative", {"thermal", "com_temperature_k"});
  }

  if (r.has("sweep")) {
    r.only_keys("sweep", {"start_hz", "stop_hz", "step_hz", "per_ion"});
    SweepSpec s;
    s.start_hz = r.number("sweep", "start_hz", 0.0, true);
    s.stop_hz = r.number("sweep", "stop_hz", 0.0, true);
    s.step_hz = r.number("sweep", "step_hz", 0.0, true);
    s.per_ion = r.boolean("sweep", "per_ion", false);
    if (!(s.start_hz >= 0.0)) r.fail("must be non-negative", {"sweep", "start_hz"});
    if (!(s.stop_hz >= s.start_hz)) r.fail("grid must be sorted: stop_hz < start_hz", {"sweep", "stop_hz"});
    if (!(s.step_hz > 0.0)) r.fail("must be positive", {"sweep", "step_hz"});
    if ((s.stop_hz - s.start_hz) / s.step_hz > 1e8) r.fail("grid has more than 1e8 points", {"sweep", "step_hz"});
    c.sweep = s;
  }

  if (r.has("solver")) {
    r.only_keys("solver", {"gradient_tolerance", "max_iterations", "jitter", "planarity_tolerance"});
    c.solver.gradient_tolerance = r.number("solver", "gradient_tolerance", c.solver.gradient_tolerance);
    c.solver.max_iterations = static_cast<int>(r.count("solver", "max_iterations", c.solver.max_iterations));
    c.solver.jitter = r.number("solver", "jitter", c.solver.jitter);
    c.solver.planarity_tolerance = r.number("solver", "planarity_tolerance", c.solver.planarity_tolerance);
    if (!(c.solver.gradient_tolerance > 0.0)) r.fail("must be positive", {"solver", "gradient_tolerance"});
    if (c.solver.max_iterations < 1) r.fail("must be at least 1", {"solver", "max_iterations"});
    if (!(c.solver.jitter >= 0.0 && c.solver.jitter < 0.5)) r.fail("must lie in [0, 0.5)", {"solver", "jitter"});
    if (!(c.solver.planarity_tolerance > 0.0)) r.fail("must be positive", {"solver", "planarity_tolerance"});
  }

  if (r.has("trajectory")) {
    r.only_keys("trajectory", {"mode_index", "mu_hz", "n_samples"});
    TrajectorySpec t;
    t.mode_index = r.count("trajectory", "mode_index", 0);
    t.mu_hz = r.number("trajectory", "mu_hz", 0.0, true);
    t.n_samples = r.count("trajectory", "n_samples", t.n_samples);
    if (t.mode_index >= c.n_ions) r.fail("exceeds the number of modes", {"trajectory", "mode_index"});
    if (t.n_samples < 2) r.fail("must be at least 2", {"trajectory", "n_samples"});
    if (!(t.mu_hz > 0.0)) r.fail("must be positive", {"trajectory", "mu_hz"});
    c.trajectory = t;
  }

  if (r.has("fit")) {
    r.only_keys("fit", {"target_mode", "synthetic_sigma", "nbar_max"});
    c.fit.target_mode = r.count("fit", "target_mode", 0);
    c.fit.synthetic_sigma = r.number("fit", "synthetic_sigma", c.fit.synthetic_sigma);
    c.fit.nbar_max = r.number("fit", "nbar_max", c.fit.nbar_max);
    if (c.fit.target_mode >= c.n_ions) r.fail("exceeds the number of modes", {"fit", "target_mode"});
    if (!(c.fit.synthetic_sigma >= 0.0)) r.fail("must be non-negative", {"fit", "synthetic_sigma"});
    if (!(c.fit.nbar_max > 0.0)) r.fail("must be positive", {"fit", "nbar_max"});
  }

  if (r.has("seeds")) {
    r.only_keys("seeds", {"lattice", "noise"});
    c.seeds.lattice = r.count("seeds", "lattice", c.seeds.lattice);
    c.seeds.noise = r.count("seeds", "noise", c.seeds.noise);
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

std::string dump_config(const RunConfig& c) {
  json j;
  j["trap"] = {{"axial_hz", c.trap.axial_hz},       {"cyclotron_hz", c.trap.cyclotron_hz},
               {"rotation_hz", c.trap.rotation_hz}, {"delta_wall", c.trap.delta_wall},
               {"mass_kg", c.trap.mass_kg},         {"charge_c", c.trap.charge_c}};
  j["n_ions"] = c.n_ions;
  j["beam"] = {{"wavelength_m", c.beam.wavelength_m}, {"theta_r_deg", c.beam.theta_r_deg},
               {"theta_r_rel_err", c.beam.theta_r_rel_err}, {"waist_z_m", c.beam.waist_z_m},
               {"waist_x_m", c.beam.waist_x_m}, {"misalignment_deg", c.beam.misalignment_deg}};
  json d = {{"gamma_per_s", c.drive.gamma_per_s},
            {"sequence", c.drive.sequence},
            {"tau_s", c.drive.tau_s},
            {"t_pi_s", c.drive.t_pi_s}};
  if (c.drive.force_n) d["force_n"] = *c.drive.force_n;
  if (c.drive.forces_n) d["forces_n"] = *c.drive.forces_n;
  if (c.drive.intensity_w_cm2) d["intensity_w_cm2"] = *c.drive.intensity_w_cm2;
  j["drive"] = d;
  json t = json::object();
  if (c.thermal.nbar) t["nbar"] = *c.thermal.nbar;
  if (c.thermal.temperature_k) t["temperature_k"] = *c.thermal.temperature_k;
  if (c.thermal.com_temperature_k) t["com_temperature_k"] = *c.thermal.com_temperature_k;
  j["thermal"] = t;
  if (c.sweep)
    j["sweep"] = {{"start_hz", c.sweep->start_hz}, {"stop_hz", c.sweep->stop_hz}, {"step_hz", c.sweep->step_hz},
                  {"per_ion", c.sweep->per_ion}};
  j["solver"] = {{"gradient_tolerance", c.solver.gradient_tolerance}, {"max_iterations", c.solver.max_iterations},
                 {"jitter", c.solver.jitter}, {"planarity_tolerance", c.solver.planarity_tolerance}};
  if (c.trajectory)
    j["trajectory"] = {{"mode_index", c.trajectory->mode_index}, {"mu_hz", c.trajectory->mu_hz},
                       {"n_samples", c.trajectory->n_samples}};
  j["fit"] = {{"target_mode", c.fit.target_mode}, {"synthetic_sigma", c.fit.synthetic_sigma},
              {"nbar_max", c.fit.nbar_max}};
  j["seeds"] = {{"lattice", c.seeds.lattice}, {"noise", c.seeds.noise}};
  return j.dump(2) + "\n";
}

void save_config(const RunConfig& config, const std::filesystem::path& path) {
  write_atomic(path, dump_config(config));
}

// ---------------------------------------------------------------- lattice

namespace {

json trap_to_json(const TrapParams& p) {
  return {{"axial_hz", p.omega_1 / constants::two_pi},
          {"cyclotron_hz", p.cyclotron / constants::two_pi},
          {"rotation_hz", p.rotation / constants::two_pi},
          {"delta_wall", p.delta_wall},
          {"mass_kg", p.mass},
          {"charge_c", p.charge}};
}

TrapParams trap_from_json(const json& j) {
  return TrapParams::from_hz(j.at("axial_hz").get<double>(), j.at("cyclotron_hz").get<double>(),
                             j.at("rotation_hz").get<double>(), j.value("delta_wall", 0.0),
                             j.value("mass_kg", constants::mass_be9),
                             j.value("charge_c", constants::elementary_charge));
}

template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const ValidationError&) {
    throw;
  } catch (const json::exception& e) {
    throw ValidationError(std::string(what) + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ValidationError(std::string(what) + ": " + e.what());
  } catch (const std::domain_error& e) {
    throw ValidationError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string lattice_to_json(const CrystalLattice& lattice) {
  json pos = json::array();
  for (const auto& p : lattice.positions) pos.push_back({p.x, p.y, p.z});
  json j = {{"params", trap_to_json(lattice.params)},
            {"n_ions", lattice.n_ions()},
            {"positions_m", pos},
            {"converged", lattice.converged},
            {"residual_force_max_N", lattice.residual_force_max},
            {"planar", lattice.planar},
            {"energy_J", lattice.energy},
            {"seed", lattice.seed},
            {"iterations", lattice.iterations}};
  return j.dump(2) + "\n";
}

CrystalLattice lattice_from_json(const std::string& text) {
  const json j = parse_json(text);
  return guarded("lattice file", [&] {
    CrystalLattice l;
    l.params = trap_from_json(j.at("params"));
    for (const auto& p : j.at("positions_m")) {
      if (!p.is_array() || p.size() != 3) throw ValidationError("positions_m entries must be [x, y, z]");
      l.positions.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
    }
    if (l.positions.empty()) throw ValidationError("lattice file has no ions");
    l.converged = j.at("converged").get<bool>();
    l.residual_force_max = j.at("residual_force_max_N").get<double>();
    l.planar = j.value("planar", false);
    l.energy = j.value("energy_J", 0.0);
    l.seed = j.value("seed", std::uint64_t{0});
    l.iterations = j.value("iterations", 0);
    return l;
  });
}

std::string lattice_to_csv(const CrystalLattice& lattice) {
  std::string out = "x,y,z\n";
  for (const auto& p : lattice.positions) append_row(out, {p.x, p.y, p.z});
  return out;
}

// ---------------------------------------------------------------- spectrum

std::string spectrum_to_json(const ModeSpectrum& s) {
  json f = json::array();
  for (double w : s.omega) f.push_back(w / constants::two_pi);
  json rows = json::array();
  for (Eigen::Index j = 0; j < s.b.rows(); ++j) {
    json row = json::array();
    for (Eigen::Index m = 0; m < s.b.cols(); ++m) row.push_back(s.b(j, m));
    rows.push_back(std::move(row));
  }
  json j = {{"n_modes", s.size()},
            {"frequencies_hz", f},
            {"omega_rad_s", s.omega},
            {"eigenvalues_rad2_s2", s.eigenvalues},
            {"eigenvectors_row_major", rows},
            {"cluster", s.cluster},
            {"stable", s.stable},
            {"unstable_modes", s.unstable_modes},
            {"source_lattice_hash", s.source_lattice_hash},
            {"ion_mass_kg", s.ion_mass}};
  return j.dump(2) + "\n";
}

ModeSpectrum spectrum_from_json(const std::string& text) {
  const json j = parse_json(text);
  return guarded("spectrum file", [&] {
    ModeSpectrum s;
    if (j.contains("omega_rad_s")) {
      s.omega = j.at("omega_rad_s").get<std::vector<double>>();
    } else {
      for (double f : j.at("frequencies_hz").get<std::vector<double>>()) s.omega.push_back(constants::two_pi * f);
    }
    const std::size_t n = s.omega.size();
    if (n == 0) throw ValidationError("spectrum file has no modes");
    s.eigenvalues = j.value("eigenvalues_rad2_s2", std::vector<double>{});
    if (s.eigenvalues.empty())
      for (double w : s.omega) s.eigenvalues.push_back(w >= 0.0 ? w * w : -w * w);
    const auto& rows = j.at("eigenvectors_row_major");
    if (rows.size() != n) throw ValidationError("eigenvector matrix must be " + std::to_string(n) + " rows");
    s.b.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r) {
      if (rows[r].size() != n) throw ValidationError("eigenvector row " + std::to_string(r) + " has wrong length");
      for (std::size_t m = 0; m < n; ++m)
        s.b(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(m)) = rows[r][m].get<double>();
    }
    s.cluster = j.value("cluster", std::vector<int>(n, 0));
    s.stable = j.value("stable", true);
    s.unstable_modes = j.value("unstable_modes", std::vector<int>{});
    s.source_lattice_hash = j.value("source_lattice_hash", std::uint64_t{0});
    s.ion_mass = j.value("ion_mass_kg", constants::mass_be9);
    return s;
  });
}

std::string histogram_to_csv(const ModeHistogram& h) {
  std::string out = "bin_center_hz,count\n";
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    out += format_double(h.bin_center_hz(k));
    out += ',';
    out += std::to_string(h.counts[k]);
    out += '\n';
  }
  return out;
}

std::vector<std::pair<double, int>> histogram_rows_from_csv(const std::string& text) {
  std::vector<std::pair<double, int>> out;
  for (const auto& row : parse_csv(text, "bin_center_hz,count", 2)) out.emplace_back(row[0], static_cast<int>(row[1]));
  return out;
}

// ---------------------------------------------------------------- traces

std::string trace_to_csv(const SpectrumTrace& trace) {
  std::string out = "mu_over_2pi_hz,p_up_mean";
  const auto* ions = trace.p_up_ion ? &*trace.p_up_ion : nullptr;
  if (ions)
    for (Eigen::Index j = 0; j < ions->cols(); ++j) out += ",p_up_ion_" + std::to_string(j);
  out += '\n';
  for (std::size_t i = 0; i < trace.mu_over_2pi.size(); ++i) {
    out += format_double(trace.mu_over_2pi[i]);
    out += ',';
    out += format_double(trace.p_up_mean[i]);
    if (ions)
      for (Eigen::Index j = 0; j < ions->cols(); ++j) {
        out += ',';
        out += format_double((*ions)(static_cast<Eigen::Index>(i), j));
      }
    out += '\n';
  }
  return out;
}

SpectrumTrace trace_from_csv(const std::string& text) {
  SpectrumTrace t;
  for (const auto& row : parse_csv(text, "mu_over_2pi_hz,p_up_mean", 2)) {
    t.mu_over_2pi.push_back(row[0]);
    t.p_up_mean.push_back(row[1]);
  }
  return t;
}

std::string trajectory_to_csv(const std::vector<TrajectoryPoint>& points) {
  std::string out = "t_s,re_alpha,im_alpha,arm\n";
  for (const auto& p : points) append_row(out, {p.t, p.alpha.real(), p.alpha.imag(), double(p.arm)});
  return out;
}

std::vector<TrajectoryPoint> trajectory_from_csv(const std::string& text) {
  std::vector<TrajectoryPoint> out;
  for (const auto& row : parse_csv(text, "t_s,re_alpha,im_alpha", 3))
    out.push_back({row[0], {row[1], row[2]}, row.size() > 3 ? static_cast<int>(row[3]) : 1});
  return out;
}

// ---------------------------------------------------------------- thermometry

std::string observed_to_csv(const ObservedSpectrum& data) {
  std::string out = "mu_hz,p_up,sigma\n";
  for (const auto& p : data.points) append_row(out, {p.mu_hz, p.p_up, p.sigma});
  return out;
}

std::string observed_meta_to_json(const ObservedMetadata& m) {
  json j = {{"n_ions", m.n_ions},
            {"n_ions_err", m.n_ions_err},
            {"tau_s", m.tau},
            {"t_pi_s", m.t_pi},
            {"theta_r_deg", m.theta_r * 180.0 / M_PI},
            {"theta_r_rel_err", m.theta_r_rel_err}};
  return j.dump(2) + "\n";
}

ObservedSpectrum observed_from_text(const std::string& csv, const std::optional<std::string>& sidecar) {
  ObservedSpectrum data;
  for (const auto& row : parse_csv(csv, "mu_hz,p_up,sigma", 3)) {
    data.points.push_back({row[0], row[1], row[2]});
  }
  try {
    data.validate();
  } catch (const FitError& e) {
    throw ValidationError(std::string("data file: ") + e.what());
  }
  if (sidecar) {
    const json j = parse_json(*sidecar);
    guarded("metadata sidecar", [&] {
      data.meta.n_ions = j.value("n_ions", 0.0);
      data.meta.n_ions_err = j.value("n_ions_err", 0.0);
      data.meta.tau = j.value("tau_s", 0.0);
      data.meta.t_pi = j.value("t_pi_s", 0.0);
      data.meta.theta_r = j.value("theta_r_deg", 0.0) * M_PI / 180.0;
      data.meta.theta_r_rel_err = j.value("theta_r_rel_err", 0.0);
      return 0;
    });
  }
  return data;
}

std::string fit_to_json(const FitResult& f) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j = {{"nbar", num(f.nbar)},
            {"nbar_err", num(f.nbar_err)},
            {"nbar_stat_err", num(f.nbar_stat_err)},
            {"nbar_sys_err", num(f.nbar_sys_err)},
            {"temperature_k", num(f.temperature)},
            {"temperature_err_k", num(f.temperature_err)},
            {"gamma_used_per_s", f.gamma_used},
            {"chi2_reduced", num(f.chi2_reduced)},
            {"target_mode", f.target_mode},
            {"n_points", f.n_points},
            {"at_boundary", f.at_boundary},
            {"insufficient_signal", f.insufficient_signal},
            {"systematic_note", f.systematic_note}};
  return j.dump(2) + "\n";
}

}  // namespace drumhead::io
