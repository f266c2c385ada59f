#include "nvmw/runner.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>

#include "nvmw/error.hpp"
#include "nvmw/geometry.hpp"
#include "nvmw/rng.hpp"
#include "nvmw/sensitivity.hpp"

namespace nvmw::runner {

namespace {

using nlohmann::json;
using scenario::Mode;
constexpr double kDeg = std::numbers::pi / 180.0;

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

json vec_json(const geometry::LabVector& v) { return json::array({v.x(), v.y(), v.z()}); }

// Collects output files so the manifest lists exactly what was written.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& content) {
    std::ofstream os(dir_ / name, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorCode::Validation, "cannot write " + (dir_ / name).string());
    os << content;
    names_.push_back(name);
  }

  void write_json(const std::string& name, const json& doc) { write(name, doc.dump(2) + "\n"); }

  const std::vector<std::string>& names() const { return names_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> names_;
};

json lineshape_json(const odmr::LineshapeParams& s) {
  return {{"fwhm_mhz", s.fwhm},
          {"contrast_ref", s.contrast_ref},
          {"omega_ref_mhz", s.omega_ref},
          {"model", s.model == odmr::IntensityModel::Linear ? "linear" : "saturating"}};
}

std::string transitions_csv(const std::vector<spin::TransitionLine>& lines) {
  std::string out = "label,frequency_mhz,omega_mhz\n";
  for (const auto& l : lines) out += l.label + "," + fmt(l.frequency) + "," + fmt(l.rabi) + "\n";
  return out;
}

std::string dips_csv(const fit::DipFitResult& r) {
  std::string out = "center_mhz,fwhm_mhz,depth,depth_sigma\n";
  for (const auto& d : r.dips)
    out += fmt(d.center) + "," + fmt(d.fwhm) + "," + fmt(d.depth) + "," + fmt(d.depth_sigma) + "\n";
  return out;
}

json sweep_json(const reconstruct::SweepAnalysis& s) {
  json pts = json::array();
  for (const auto& p : s.depths.points)
    pts.push_back({{"psi_deg", p.psi / kDeg},
                   {"depth_lp", p.depth_lp},
                   {"depth_lm", p.depth_lm},
                   {"sigma_lp", p.sigma_lp},
                   {"sigma_lm", p.sigma_lm}});
  return {{"nv_index", s.nv_index},
          {"center_lm_mhz", s.depths.center_lm},
          {"center_lp_mhz", s.depths.center_lp},
          {"fwhm_mhz", s.depths.fwhm},
          {"dwell_s", s.dwell_s},
          {"cos2", {{"a", s.cos2.a}, {"b", s.cos2.b}, {"psi0_deg", s.cos2.psi0 / kDeg},
                    {"sigma_psi0_deg", s.cos2.sigma_psi0 / kDeg}, {"r_squared", s.cos2.r_squared}}},
          {"nv_y", vec_json(s.nv_y.axis)},
          {"points", pts}};
}

std::optional<std::uint64_t> effective_seed(const RunOptions& opts,
                                            scenario::ScenarioConfig& cfg) {
  if (opts.seed && cfg.noise) cfg.noise->seed = *opts.seed;
  if (cfg.noise) return cfg.noise->seed;
  return opts.seed;
}

void run_simulate(const scenario::ScenarioConfig& cfg, const RunOptions& opts, OutputSet& out) {
  const auto grid = cfg.grid.points();
  const auto lines = spin::transition_table(cfg.spin, *cfg.static_field, *cfg.microwave);
  odmr::OdmrSpectrum spec =
      odmr::simulate_spectrum(cfg.spin, *cfg.static_field, *cfg.microwave, cfg.shape, grid);
  if (cfg.noise) spec = odmr::add_shot_noise(spec, cfg.noise->rate_kcps, *cfg.noise->dwell_s,
                                             cfg.noise->seed);
  if (opts.format == Format::Csv) {
    out.write("spectrum.csv", spectrum_csv(spec));
    out.write("transitions.csv", transitions_csv(lines));
    return;
  }
  json params = {{"lineshape", lineshape_json(cfg.shape)},
                 {"static_field", {{"magnitude_mt", cfg.static_field->magnitude},
                                   {"theta_deg", cfg.static_field->theta / kDeg},
                                   {"phi_deg", cfg.static_field->phi / kDeg}}},
                 {"microwave", {{"amplitude_mt", cfg.microwave->amplitude},
                                {"zeta_deg", cfg.microwave->zeta / kDeg},
                                {"transverse_azimuth_deg",
                                 cfg.microwave->transverse_azimuth / kDeg}}}};
  json doc = spectrum_json(spec, params);
  doc["grid"] = {{"start_mhz", cfg.grid.start}, {"stop_mhz", cfg.grid.stop},
                 {"step_mhz", cfg.grid.step}};
  json tl = json::array();
  for (const auto& l : lines)
    tl.push_back({{"label", l.label}, {"frequency_mhz", l.frequency}, {"omega_mhz", l.rabi}});
  doc["transitions"] = tl;
  out.write_json("spectrum.json", doc);
}

void run_fit(const scenario::ScenarioConfig& cfg, const RunOptions& opts, OutputSet& out) {
  const odmr::OdmrSpectrum spec = read_spectrum_csv(cfg.fit->spectrum_csv);
  fit::DipFitOptions fo;
  fo.shared_fwhm = cfg.fit->shared_fwhm;
  fo.init_fwhm = cfg.fit->init_fwhm_mhz;
  const fit::DipFitResult r = fit::fit_dips(spec, cfg.fit->init_centers_mhz, fo);
  json doc = fit_result_json(r.fit);
  doc["baseline"] = r.baseline;
  doc["overlapping_dips"] = r.overlapping;
  json dips = json::array();
  for (const auto& d : r.dips)
    dips.push_back({{"center_mhz", d.center}, {"fwhm_mhz", d.fwhm}, {"depth", d.depth},
                    {"depth_sigma", d.depth_sigma}, {"center_sigma_mhz", d.center_sigma}});
  doc["dips"] = dips;
  if (opts.format == Format::Csv) out.write("dips.csv", dips_csv(r));
  out.write_json("fit.json", doc);
}

void run_planar(const scenario::ScenarioConfig& cfg, const RunOptions& opts, OutputSet& out,
                const std::string& stem) {
  const auto pipeline = cfg.pipeline();
  const std::uint64_t seed = cfg.noise ? cfg.noise->seed : 0;
  const auto rows =
      reconstruct::batch_planar(cfg.scenes(), cfg.nv_indices[0], pipeline, seed, opts.parallel);
  if (opts.format == Format::Csv) {
    out.write(stem + ".csv", planar_csv(rows));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::ostringstream name;
      name << "sweep_pos" << std::setw(2) << std::setfill('0') << i << ".csv";
      out.write(name.str(), sweep_csv(rows[i].sweep.depths));
    }
    return;
  }
  json arr = json::array();
  for (const auto& r : rows)
    arr.push_back({{"x_um", r.x_um},
                   {"z_um", r.z_um},
                   {"alpha_est_deg", r.alpha.nearest(r.alpha_truth_deg)},
                   {"alpha_deg", r.alpha.alpha_deg},
                   {"alpha_partner_deg", r.alpha.partner_deg},
                   {"alpha_theory_deg", r.alpha_truth_deg},
                   {"error_deg", r.error_deg},
                   {"residual_deg", r.alpha.residual_deg},
                   {"sweep", sweep_json(r.sweep)}});
  out.write_json(stem + ".json", {{"nv_index", cfg.nv_indices[0]}, {"rows", arr}});
}

void run_3d(const scenario::ScenarioConfig& cfg, const RunOptions& opts, OutputSet& out) {
  const geometry::WireScene scene = cfg.scenes().front();
  const geometry::LabVector truth = geometry::wire_field_direction(scene);
  json doc;
  if (cfg.injected_nv_y) {
    const auto& inj = *cfg.injected_nv_y;
    reconstruct::NvYEstimate y1{inj[0].normalized(), 0.0, cfg.nv_indices[0]};
    reconstruct::NvYEstimate y2{inj[1].normalized(), 0.0, cfg.nv_indices[1]};
    auto axis = reconstruct::mw_axis_from_two(y1, y2);
    axis.axis = reconstruct::representative_near(axis.axis, truth);
    axis.angular_error_deg = geometry::axis_angle_between(axis.axis, truth);
    doc = reconstruction_json(axis, {y1, y2}, truth);
    doc["source"] = "injected";
  } else {
    const std::uint64_t seed = cfg.noise ? cfg.noise->seed : 0;
    const auto result = reconstruct::end_to_end_3d(
        scene, {cfg.nv_indices[0], cfg.nv_indices[1]}, cfg.pipeline(), seed);
    doc = reconstruction_json(result.axis, {result.sweeps[0].nv_y, result.sweeps[1].nv_y}, truth);
    doc["source"] = "simulated";
    json sweeps = json::array();
    for (const auto& s : result.sweeps) {
      if (opts.format == Format::Csv)
        out.write("sweep_nv" + std::to_string(s.nv_index) + ".csv", sweep_csv(s.depths));
      sweeps.push_back(sweep_json(s));
    }
    if (opts.format == Format::Json) doc["sweeps"] = sweeps;
  }
  doc["position_um"] = {scene.sensor_x, scene.sensor_z};
  out.write_json("reconstruct3d.json", doc);
}

void run_fieldmap(const scenario::ScenarioConfig& cfg, const RunOptions& opts, OutputSet& out) {
  std::string csv = "x_um,z_um,mx,mz\n";
  json rows = json::array();
  for (double x : cfg.fieldmap_x.values()) {
    for (double z : cfg.fieldmap_z.values()) {
      if (x == 0.0 && z == 0.0) continue;
      geometry::LabVector m = geometry::wire_tangent(x, z);
      if (cfg.current_ma < 0) m = -m;
      csv += fmt(x) + "," + fmt(z) + "," + fmt(m.x()) + "," + fmt(m.z()) + "\n";
      rows.push_back({{"x_um", x}, {"z_um", z}, {"mx", m.x()}, {"mz", m.z()}});
    }
  }
  if (opts.format == Format::Csv) out.write("fieldmap.csv", csv);
  else out.write_json("fieldmap.json", {{"rows", rows}});
}

void run_sensitivity(const scenario::ScenarioConfig& cfg, const RunOptions& opts,
                     OutputSet& out) {
  const auto& s = *cfg.sensitivity;
  std::string csv = "phi_deg,ratio_s,sigma_s,eta_rad_per_sqrt_hz\n";
  json rows = json::array();
  for (double phi_deg : s.phi_deg) {
    const double phi = phi_deg * kDeg;
    const double e = sensitivity::eta({phi, s.sigma_rel, s.n, s.t_s});
    const double t = std::tan(phi);
    const double sig = sensitivity::ratio_sigma(phi, s.sigma_rel);
    csv += fmt(phi_deg) + "," + fmt(t * t) + "," + fmt(sig) + "," + fmt(e) + "\n";
    rows.push_back({{"phi_deg", phi_deg}, {"ratio_s", t * t}, {"sigma_s", sig},
                    {"eta_rad_per_sqrt_hz", e}});
  }
  json summary = {{"sigma_rel", s.sigma_rel},
                  {"n_t_s", s.n * s.t_s},
                  {"eta_max_rad_per_sqrt_hz", sensitivity::eta_max(s.sigma_rel, s.n * s.t_s)}};
  if (s.shot_noise) {
    const double sr = sensitivity::shot_noise_sigma_rel(s.shot_noise->rate_kcps,
                                                        s.shot_noise->contrast, s.shot_noise->t_s);
    summary["shot_noise"] = {{"rate_kcps", s.shot_noise->rate_kcps},
                             {"contrast", s.shot_noise->contrast},
                             {"t_s", s.shot_noise->t_s},
                             {"sigma_rel", sr},
                             {"eta_max_rad_per_sqrt_hz",
                              sensitivity::eta_max(sr, s.shot_noise->t_s)}};
  }
  if (opts.format == Format::Csv) {
    out.write("sensitivity.csv", csv);
    out.write_json("sensitivity_summary.json", summary);
  } else {
    summary["rows"] = rows;
    out.write_json("sensitivity.json", summary);
  }
}

}  // namespace

std::string fmt(double v) {
  if (v == 0.0) v = 0.0;  // drop the sign of negative zero
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::Validation, "SHA-256 digest failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i)
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return os.str();
}

std::string spectrum_csv(const odmr::OdmrSpectrum& spec) {
  std::string out = "frequency_mhz,signal\n";
  for (std::size_t i = 0; i < spec.frequencies.size(); ++i)
    out += fmt(spec.frequencies[i]) + "," + fmt(spec.signal[i]) + "\n";
  return out;
}

odmr::OdmrSpectrum read_spectrum_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw scenario::ConfigError("cannot open spectrum file " + path.string());
  std::string line;
  std::getline(is, line);
  if (line.rfind("frequency_mhz,signal", 0) != 0)
    throw scenario::ConfigError(path.string() + ": expected header 'frequency_mhz,signal'");
  odmr::OdmrSpectrum spec;
  int row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream ls(line);
    double f = 0;
    double s = 0;
    char comma = 0;
    if (!(ls >> f >> comma >> s) || comma != ',')
      throw scenario::ConfigError(path.string() + ": malformed row " + std::to_string(row));
    if (!spec.frequencies.empty() && !(f > spec.frequencies.back()))
      throw scenario::ConfigError(path.string() + ": frequencies must be strictly ascending");
    spec.frequencies.push_back(f);
    spec.signal.push_back(s);
  }
  if (spec.frequencies.empty()) throw scenario::ConfigError(path.string() + ": no data rows");
  return spec;
}

json spectrum_json(const odmr::OdmrSpectrum& spec, const json& params) {
  json doc = {{"frequency_mhz", spec.frequencies}, {"signal", spec.signal}, {"params", params}};
  if (spec.counts) {
    doc["seed"] = spec.counts->seed;
    doc["counts"] = {{"rate_kcps", spec.counts->rate_kcps}, {"dwell_s", spec.counts->dwell_s}};
  } else {
    doc["seed"] = nullptr;
  }
  return doc;
}

json fit_result_json(const fit::FitResult& fit) {
  const auto sig = fit.sigmas();
  return {{"params", std::vector<double>(fit.params.data(), fit.params.data() + fit.params.size())},
          {"sigmas", std::vector<double>(sig.data(), sig.data() + sig.size())},
          {"residual_norm", fit.residual_norm},
          {"converged", fit.converged},
          {"iterations", fit.iterations},
          {"rank_deficient", fit.rank_deficient}};
}

std::string sweep_csv(const fit::SweepDepths& depths) {
  std::string out = "psi_deg,depth_lp,depth_lm,sigma\n";
  for (const auto& p : depths.points)
    out += fmt(p.psi / kDeg) + "," + fmt(p.depth_lp) + "," + fmt(p.depth_lm) + "," +
           fmt(p.sigma_lp) + "\n";
  return out;
}

std::string planar_csv(const std::vector<reconstruct::PlanarResult>& rows) {
  std::string out = "x_um,z_um,alpha_est_deg,alpha_partner_deg,alpha_theory_deg,error_deg\n";
  for (const auto& r : rows) {
    const double est = r.alpha.nearest(r.alpha_truth_deg);
    const double partner = est == r.alpha.alpha_deg ? r.alpha.partner_deg : r.alpha.alpha_deg;
    out += fmt(r.x_um) + "," + fmt(r.z_um) + "," + fmt(est) + "," + fmt(partner) + "," +
           fmt(r.alpha_truth_deg) + "," + fmt(r.error_deg) + "\n";
  }
  return out;
}

json reconstruction_json(const reconstruct::MwAxisEstimate& axis,
                         const std::vector<reconstruct::NvYEstimate>& nv_y,
                         const std::optional<geometry::LabVector>& truth) {
  json ys = json::array();
  for (const auto& y : nv_y)
    ys.push_back({{"nv_index", y.source_nv},
                  {"axis", vec_json(y.axis)},
                  {"sigma_angle_deg", y.sigma_angle / kDeg}});
  json doc = {{"axis", vec_json(axis.axis)},
              {"sign_ambiguous", axis.sign_ambiguous},
              {"nv_y", ys}};
  if (truth) doc["truth_axis"] = vec_json(*truth);
  doc["angular_error_deg"] =
      axis.angular_error_deg ? json(*axis.angular_error_deg) : json(nullptr);
  return doc;
}

RunResult run(const RunOptions& opts) {
  const std::string started = utc_now();
  std::ifstream is(opts.config_path);
  if (!is) throw scenario::ConfigError("cannot open config " + opts.config_path.string());
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::parse_error& e) {
    throw scenario::ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (opts.parallel < 1) throw scenario::ConfigError("--parallel must be >= 1");
  scenario::ScenarioConfig cfg =
      scenario::parse_config(doc, opts.mode, opts.config_path.parent_path().string());
  const auto seed = effective_seed(opts, cfg);

  std::filesystem::create_directories(opts.out_dir);
  OutputSet out(opts.out_dir);
  switch (opts.mode) {
    case Mode::Simulate: run_simulate(cfg, opts, out); break;
    case Mode::Fit: run_fit(cfg, opts, out); break;
    case Mode::ReconstructPlanar: run_planar(cfg, opts, out, "planar"); break;
    case Mode::Table1: run_planar(cfg, opts, out, "table1"); break;
    case Mode::Reconstruct3d: run_3d(cfg, opts, out); break;
    case Mode::Fieldmap: run_fieldmap(cfg, opts, out); break;
    case Mode::Sensitivity: run_sensitivity(cfg, opts, out); break;
  }

  RunResult result;
  result.manifest = {{"tool", "nvmw"},
                     {"tool_version", kToolVersion},
                     {"csv_schema_version", kCsvSchemaVersion},
                     {"mode", scenario::to_string(opts.mode)},
                     {"config_sha256", sha256_hex(doc.dump())},
                     {"seed", seed ? json(*seed) : json(nullptr)},
                     {"parallel", opts.parallel},
                     {"format", opts.format == Format::Csv ? "csv" : "json"},
                     {"started_utc", started},
                     {"finished_utc", utc_now()},
                     {"outputs", out.names()}};
  result.outputs = out.names();
  out.write_json("manifest.json", result.manifest);
  result.outputs.push_back("manifest.json");
  return result;
}

int run_with_exit_code(const RunOptions& opts, std::ostream& err) {
  try {
    run(opts);
    return 0;
  } catch (const scenario::ConfigError& e) {
    err << "error: invalid configuration: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return e.code() == ErrorCode::Validation ? 2 : 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace nvmw::runner
