// nvmw: simulate CW-ODMR of NV centers and reconstruct microwave field axes.

#include <CLI11.hpp>

#include <iostream>
#include <map>

#include "nvmw/runner.hpp"

int main(int argc, char** argv) {
  using nvmw::scenario::Mode;

  CLI::App app{"CW-ODMR simulation and microwave-field orientation reconstruction"};
  app.require_subcommand(1);

  std::string config;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::string format = "csv";
  int parallel = 1;

  const std::map<std::string, std::string> help{
      {"simulate", "Synthesize one ODMR spectrum"},
      {"fit", "Fit Lorentzian dips to a spectrum CSV"},
      {"reconstruct-planar", "Recover the in-plane angle alpha at each sensor position"},
      {"reconstruct-3d", "Recover the microwave axis from two NV orientations"},
      {"table1", "Planar reconstruction over the nine reference sensor positions"},
      {"fieldmap", "Wire field directions over an x/z grid"},
      {"sensitivity", "Angle-sensitivity figures of merit"},
  };
  for (const auto& [name, text] : help) {
    CLI::App* sub = app.add_subcommand(name, text);
    sub->add_option("--config", config, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
    sub->add_option("--seed", seed, "Override the noise seed");
    sub->add_option("--format", format, "Data file format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    sub->add_option("--parallel", parallel, "Worker threads")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  nvmw::runner::RunOptions opts;
  opts.mode = *nvmw::scenario::parse_mode(app.get_subcommands().front()->get_name());
  opts.config_path = config;
  opts.out_dir = out_dir;
  opts.seed = seed;
  opts.format = format == "json" ? nvmw::runner::Format::Json : nvmw::runner::Format::Csv;
  opts.parallel = parallel;

  const int code = nvmw::runner::run_with_exit_code(opts, std::cerr);
  if (code == 0) std::cout << "wrote results to " << out_dir << "\n";
  return code;
}
