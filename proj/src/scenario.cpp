#include "nvmw/scenario.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>

namespace nvmw::scenario {

namespace {

using nlohmann::json;
constexpr double kDeg = std::numbers::pi / 180.0;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

// Strict view over one JSON object: every key must be consumed or declared.
class Section {
 public:
  Section(const json& node, std::string path, std::set<std::string> allowed)
      : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail(path_, "expected an object");
    for (const auto& [key, _] : node_.items())
      if (!allowed.count(key)) fail(path_, "unknown key '" + key + "'");
  }

  bool has(const std::string& key) const { return node_.contains(key); }
  std::string path(const std::string& key) const { return path_ + "." + key; }
  const json& raw(const std::string& key) const { return node_.at(key); }

  Section child(const std::string& key, std::set<std::string> allowed) const {
    if (!has(key)) fail(path(key), "missing section");
    return Section(node_.at(key), path(key), std::move(allowed));
  }

  double number(const std::string& key) const {
    if (!has(key)) fail(path(key), "required number is missing");
    const json& v = node_.at(key);
    if (!v.is_number()) fail(path(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(path(key), "must be finite");
    return d;
  }

  double number_or(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }

  std::optional<double> maybe_number(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return number(key);
  }

  std::int64_t integer(const std::string& key) const {
    if (!has(key)) fail(path(key), "required integer is missing");
    const json& v = node_.at(key);
    if (!v.is_number_integer()) fail(path(key), "expected an integer");
    return v.get<std::int64_t>();
  }

  std::uint64_t seed(const std::string& key) const {
    if (!has(key)) fail(path(key), "required seed is missing");
    const json& v = node_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      fail(path(key), "seed must be a non-negative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean_or(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!node_.at(key).is_boolean()) fail(path(key), "expected a boolean");
    return node_.at(key).get<bool>();
  }

  std::string string(const std::string& key) const {
    if (!has(key)) fail(path(key), "required string is missing");
    if (!node_.at(key).is_string()) fail(path(key), "expected a string");
    return node_.at(key).get<std::string>();
  }

  std::vector<double> numbers(const std::string& key) const {
    if (!has(key)) fail(path(key), "required list is missing");
    const json& v = node_.at(key);
    if (!v.is_array()) fail(path(key), "expected a list of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) fail(path(key), "expected a list of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

 private:
  const json& node_;
  std::string path_;
};

geometry::LabVector vector3(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3) fail(path, "expected a 3-vector");
  geometry::LabVector out;
  for (int i = 0; i < 3; ++i) {
    if (!v[static_cast<std::size_t>(i)].is_number()) fail(path, "expected a 3-vector");
    out(i) = v[static_cast<std::size_t>(i)].get<double>();
  }
  return out;
}

void positive(double v, const std::string& path) {
  if (!(v > 0)) fail(path, "must be > 0");
}

spin::SpinConstants read_spin(const Section& root) {
  const Section s = root.child("spin", {"zero_field_splitting_mhz", "gamma_e_mhz_per_mt"});
  spin::SpinConstants c{s.number("zero_field_splitting_mhz"), s.number("gamma_e_mhz_per_mt")};
  positive(c.zero_field_splitting, s.path("zero_field_splitting_mhz"));
  positive(c.gamma_e, s.path("gamma_e_mhz_per_mt"));
  return c;
}

void read_grid_and_shape(const Section& root, ScenarioConfig& cfg) {
  if (root.has("frequency_grid")) {
    const Section g = root.child("frequency_grid", {"start_mhz", "stop_mhz", "step_mhz"});
    cfg.grid = {g.number_or("start_mhz", cfg.grid.start), g.number_or("stop_mhz", cfg.grid.stop),
                g.number_or("step_mhz", cfg.grid.step)};
    positive(cfg.grid.step, g.path("step_mhz"));
    if (!(cfg.grid.stop > cfg.grid.start)) fail(g.path("stop_mhz"), "must exceed start_mhz");
  }
  if (root.has("lineshape")) {
    const Section l =
        root.child("lineshape", {"fwhm_mhz", "contrast_ref", "omega_ref_mhz", "model"});
    cfg.shape.fwhm = l.number_or("fwhm_mhz", cfg.shape.fwhm);
    cfg.shape.contrast_ref = l.number_or("contrast_ref", cfg.shape.contrast_ref);
    cfg.shape.omega_ref = l.number_or("omega_ref_mhz", cfg.shape.omega_ref);
    if (l.has("model")) {
      const std::string m = l.string("model");
      if (m == "linear") cfg.shape.model = odmr::IntensityModel::Linear;
      else if (m == "saturating") cfg.shape.model = odmr::IntensityModel::Saturating;
      else fail(l.path("model"), "must be 'linear' or 'saturating'");
    }
    positive(cfg.shape.fwhm, l.path("fwhm_mhz"));
    if (!(cfg.shape.contrast_ref > 0 && cfg.shape.contrast_ref <= 1))
      fail(l.path("contrast_ref"), "must lie in (0, 1]");
    positive(cfg.shape.omega_ref, l.path("omega_ref_mhz"));
  }
}

void read_sweep(const Section& root, ScenarioConfig& cfg) {
  cfg.psis = reconstruct::uniform_psis(18);
  if (!root.has("sweep")) return;
  const Section s = root.child("sweep", {"psi_deg", "psi_count"});
  if (s.has("psi_deg") && s.has("psi_count")) fail(s.path("psi_deg"), "give psi_deg or psi_count");
  if (s.has("psi_deg")) {
    cfg.psis.clear();
    for (double d : s.numbers("psi_deg")) cfg.psis.push_back(d * kDeg);
    if (cfg.psis.empty()) fail(s.path("psi_deg"), "must not be empty");
  } else if (s.has("psi_count")) {
    const auto n = s.integer("psi_count");
    if (n < 4 || n > 100000) fail(s.path("psi_count"), "must lie in [4, 100000]");
    cfg.psis = reconstruct::uniform_psis(static_cast<int>(n));
  }
}

void read_noise(const Section& root, ScenarioConfig& cfg) {
  if (!root.has("noise")) return;
  const Section n = root.child("noise", {"rate_kcps", "dwell_s", "target_sigma_rel", "seed"});
  reconstruct::NoiseConfig noise;
  noise.rate_kcps = n.number("rate_kcps");
  positive(noise.rate_kcps, n.path("rate_kcps"));
  noise.dwell_s = n.maybe_number("dwell_s");
  noise.target_sigma_rel = n.maybe_number("target_sigma_rel");
  if (noise.dwell_s.has_value() == noise.target_sigma_rel.has_value())
    fail(n.path("dwell_s"), "give exactly one of dwell_s, target_sigma_rel");
  if (noise.dwell_s) positive(*noise.dwell_s, n.path("dwell_s"));
  if (noise.target_sigma_rel) positive(*noise.target_sigma_rel, n.path("target_sigma_rel"));
  noise.seed = n.seed("seed");
  cfg.noise = noise;
}

std::vector<int> read_nv_indices(const Section& root, std::size_t expected) {
  const std::string key = "nv_indices";
  if (!root.has(key)) fail(root.path(key), "required list is missing");
  const json& v = root.raw(key);
  if (!v.is_array() || v.size() != expected)
    fail(root.path(key), "expected " + std::to_string(expected) + " NV index(es)");
  std::vector<int> out;
  for (const auto& e : v) {
    if (!e.is_number_integer()) fail(root.path(key), "indices must be integers");
    const auto i = e.get<std::int64_t>();
    if (i < 0 || i > 3) fail(root.path(key), "indices must lie in 0..3");
    out.push_back(static_cast<int>(i));
  }
  return out;
}

void read_wire(const Section& root, ScenarioConfig& cfg, bool positions_required) {
  const Section w = root.child("wire", {"current_ma", "wire_diameter_um", "positions_um"});
  cfg.current_ma = w.number("current_ma");
  cfg.wire_diameter_um = w.number_or("wire_diameter_um", 25.0);
  if (cfg.wire_diameter_um < 0) fail(w.path("wire_diameter_um"), "must be >= 0");
  if (w.has("positions_um")) {
    if (!positions_required)
      fail(w.path("positions_um"), "positions are fixed for this mode");
    const json& p = w.raw("positions_um");
    if (!p.is_array() || p.empty()) fail(w.path("positions_um"), "expected a list of [x, z]");
    for (const auto& e : p) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
        fail(w.path("positions_um"), "expected a list of [x, z]");
      cfg.positions_um.push_back({e[0].get<double>(), e[1].get<double>()});
    }
  } else if (positions_required) {
    fail(w.path("positions_um"), "required list is missing");
  }
}

AxisRange read_range(const Section& parent, const std::string& key) {
  const Section r = parent.child(key, {"start", "stop", "step"});
  AxisRange out{r.number("start"), r.number("stop"), r.number("step")};
  positive(out.step, r.path("step"));
  if (!(out.stop >= out.start)) fail(r.path("stop"), "must be >= start");
  return out;
}

std::set<std::string> keys_for(Mode mode) {
  std::set<std::string> k{"mode"};
  auto add = [&](std::initializer_list<const char*> more) {
    for (const char* s : more) k.insert(s);
  };
  switch (mode) {
    case Mode::Simulate:
      add({"spin", "static_field", "microwave", "frequency_grid", "lineshape", "noise"});
      break;
    case Mode::Fit:
      add({"fit"});
      break;
    case Mode::ReconstructPlanar:
    case Mode::Table1:
      add({"spin", "static_field_mt", "nv_indices", "wire", "sweep", "frequency_grid",
           "lineshape", "noise"});
      break;
    case Mode::Reconstruct3d:
      add({"spin", "static_field_mt", "nv_indices", "wire", "sweep", "frequency_grid",
           "lineshape", "noise", "injected_nv_y"});
      break;
    case Mode::Fieldmap:
      add({"fieldmap"});
      break;
    case Mode::Sensitivity:
      add({"sensitivity"});
      break;
  }
  return k;
}

}  // namespace

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::Simulate: return "simulate";
    case Mode::Fit: return "fit";
    case Mode::ReconstructPlanar: return "reconstruct-planar";
    case Mode::Reconstruct3d: return "reconstruct-3d";
    case Mode::Table1: return "table1";
    case Mode::Fieldmap: return "fieldmap";
    case Mode::Sensitivity: return "sensitivity";
  }
  return "unknown";
}

std::optional<Mode> parse_mode(const std::string& name) {
  for (Mode m : {Mode::Simulate, Mode::Fit, Mode::ReconstructPlanar, Mode::Reconstruct3d,
                 Mode::Table1, Mode::Fieldmap, Mode::Sensitivity})
    if (name == to_string(m)) return m;
  return std::nullopt;
}

std::vector<double> AxisRange::values() const {
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  for (std::size_t i = 0; i < n; ++i) out.push_back(start + static_cast<double>(i) * step);
  return out;
}

const std::vector<std::array<double, 2>>& table1_positions() {
  static const std::vector<std::array<double, 2>> positions{
      {47.7, 16.5}, {47.0, 18.5}, {46.3, 20.0}, {45.5, 22.0}, {44.0, 25.0},
      {43.0, 26.6}, {38.6, 32.5}, {36.9, 34.5}, {38.5, 26.7}};
  return positions;
}

std::vector<geometry::WireScene> ScenarioConfig::scenes() const {
  std::vector<geometry::WireScene> out;
  for (const auto& p : positions_um) out.push_back({p[0], p[1], current_ma, wire_diameter_um});
  return out;
}

reconstruct::PipelineConfig ScenarioConfig::pipeline() const {
  reconstruct::PipelineConfig p;
  p.consts = spin;
  p.bias_mt = static_field_mt;
  p.shape = shape;
  p.grid = grid.points();
  p.psis = psis;
  p.noise = noise;
  return p;
}

ScenarioConfig parse_config(const json& doc, Mode mode, const std::string& base_dir) {
  const Section root(doc, "config", keys_for(mode));
  if (root.has("mode")) {
    const auto declared = parse_mode(root.string("mode"));
    if (!declared) fail(root.path("mode"), "unknown mode");
    if (*declared != mode)
      fail(root.path("mode"), std::string("config is for '") + to_string(*declared) +
                                  "' but the command is '" + to_string(mode) + "'");
  }

  ScenarioConfig cfg;
  cfg.mode = mode;
  switch (mode) {
    case Mode::Simulate: {
      cfg.spin = read_spin(root);
      const Section sf = root.child("static_field", {"magnitude_mt", "theta_deg", "phi_deg"});
      spin::StaticFieldNV field{sf.number("magnitude_mt"), sf.number("theta_deg") * kDeg,
                                sf.number("phi_deg") * kDeg};
      if (field.magnitude < 0) fail(sf.path("magnitude_mt"), "must be >= 0");
      if (field.theta < 0 || field.theta > std::numbers::pi + 1e-12)
        fail(sf.path("theta_deg"), "must lie in [0, 180]");
      field.theta = std::min(field.theta, std::numbers::pi);
      field.phi = std::fmod(field.phi, 2 * std::numbers::pi);
      if (field.phi < 0) field.phi += 2 * std::numbers::pi;
      if (field.phi >= 2 * std::numbers::pi) field.phi = 0.0;
      cfg.static_field = field;
      const Section mw =
          root.child("microwave", {"amplitude_mt", "zeta_deg", "transverse_azimuth_deg"});
      spin::MwFieldNV m{mw.number("amplitude_mt"), mw.number("zeta_deg") * kDeg,
                        mw.number_or("transverse_azimuth_deg", 0.0) * kDeg};
      if (m.amplitude < 0) fail(mw.path("amplitude_mt"), "must be >= 0");
      if (m.zeta < 0 || m.zeta > std::numbers::pi + 1e-12)
        fail(mw.path("zeta_deg"), "must lie in [0, 180]");
      m.zeta = std::min(m.zeta, std::numbers::pi);
      cfg.microwave = m;
      read_grid_and_shape(root, cfg);
      read_noise(root, cfg);
      if (cfg.noise && !cfg.noise->dwell_s)
        fail(root.path("noise"), "simulate needs an explicit dwell_s");
      break;
    }
    case Mode::Fit: {
      const Section f =
          root.child("fit", {"spectrum_csv", "init_centers_mhz", "shared_fwhm", "init_fwhm_mhz"});
      FitInput in;
      std::filesystem::path p(f.string("spectrum_csv"));
      if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
      in.spectrum_csv = p.string();
      in.init_centers_mhz = f.numbers("init_centers_mhz");
      if (in.init_centers_mhz.empty()) fail(f.path("init_centers_mhz"), "must not be empty");
      in.shared_fwhm = f.boolean_or("shared_fwhm", true);
      in.init_fwhm_mhz = f.number_or("init_fwhm_mhz", 8.0);
      positive(in.init_fwhm_mhz, f.path("init_fwhm_mhz"));
      cfg.fit = in;
      break;
    }
    case Mode::ReconstructPlanar:
    case Mode::Table1:
    case Mode::Reconstruct3d: {
      cfg.spin = read_spin(root);
      cfg.static_field_mt = root.number("static_field_mt");
      positive(cfg.static_field_mt, root.path("static_field_mt"));
      cfg.nv_indices = read_nv_indices(root, mode == Mode::Reconstruct3d ? 2 : 1);
      read_wire(root, cfg, mode != Mode::Table1);
      if (mode == Mode::Table1) cfg.positions_um = table1_positions();
      if (mode == Mode::Reconstruct3d && cfg.positions_um.size() != 1)
        fail(root.path("wire.positions_um"), "reconstruct-3d takes exactly one position");
      for (const auto& s : cfg.scenes()) {
        try {
          s.validate();
        } catch (const std::exception& e) {
          fail(root.path("wire.positions_um"), e.what());
        }
      }
      read_sweep(root, cfg);
      read_grid_and_shape(root, cfg);
      read_noise(root, cfg);
      if (root.has("injected_nv_y")) {
        const json& v = root.raw("injected_nv_y");
        if (!v.is_array() || v.size() != 2)
          fail(root.path("injected_nv_y"), "expected two 3-vectors");
        cfg.injected_nv_y = std::array<geometry::LabVector, 2>{
            vector3(v[0], root.path("injected_nv_y[0]")),
            vector3(v[1], root.path("injected_nv_y[1]"))};
        for (const auto& y : *cfg.injected_nv_y)
          if (!(y.norm() > 0)) fail(root.path("injected_nv_y"), "vectors must be nonzero");
      }
      break;
    }
    case Mode::Fieldmap: {
      const Section f = root.child("fieldmap", {"x_um", "z_um", "current_ma"});
      cfg.fieldmap_x = read_range(f, "x_um");
      cfg.fieldmap_z = read_range(f, "z_um");
      cfg.current_ma = f.number_or("current_ma", 1.0);
      break;
    }
    case Mode::Sensitivity: {
      const Section s =
          root.child("sensitivity", {"phi_deg", "sigma_rel", "n", "t_s", "shot_noise"});
      SensitivityConfig sc;
      sc.phi_deg = s.numbers("phi_deg");
      sc.sigma_rel = s.number("sigma_rel");
      positive(sc.sigma_rel, s.path("sigma_rel"));
      sc.n = s.number_or("n", 1.0);
      if (!(sc.n >= 1)) fail(s.path("n"), "must be >= 1");
      sc.t_s = s.number("t_s");
      positive(sc.t_s, s.path("t_s"));
      if (s.has("shot_noise")) {
        const Section sn = s.child("shot_noise", {"rate_kcps", "contrast", "t_s"});
        SensitivityConfig::ShotNoise n{sn.number("rate_kcps"), sn.number("contrast"),
                                       sn.number("t_s")};
        positive(n.rate_kcps, sn.path("rate_kcps"));
        if (!(n.contrast > 0 && n.contrast <= 1)) fail(sn.path("contrast"), "must lie in (0, 1]");
        positive(n.t_s, sn.path("t_s"));
        sc.shot_noise = n;
      }
      cfg.sensitivity = sc;
      break;
    }
  }
  return cfg;
}

}  // namespace nvmw::scenario
