// meanclt command line: run, preset, check-appendix, diagnose, report.
// Exit status: 0 success, 1 failed appendix checks, 2 validation-type
// errors (including bad arguments), 3 resource/accuracy errors.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "meanclt/harness.hpp"

namespace {

using namespace meanclt;

int finish_run(const RunManifest& m) {
  const auto paths = write_outputs(m);
  for (const auto& p : paths) std::cout << "wrote " << p << "\n";
  for (const auto& w : m.warnings) std::cerr << "warning: " << w << "\n";
  if (!m.ok()) {
    std::cerr << "run failed (" << m.error_kind << "): " << m.error_message << "\n";
  } else if (m.fit) {
    std::cout << "rate-fit slope " << m.fit->slope << " (r2 " << m.fit->r2 << ")\n";
  }
  return m.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"meanclt: L1 central limit experiments for dependent sequences"};
  app.require_subcommand(1);

  std::string config_path, output;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment from a JSON config");
  run_cmd->add_option("--config", config_path, "ExperimentConfig JSON file")->required();
  run_cmd->add_option("--output", output, "Output prefix (overrides the config)");

  std::string preset_name;
  std::optional<std::size_t> n_max, reps;
  std::optional<std::uint64_t> seed;
  auto* preset_cmd = app.add_subcommand("preset", "Run a built-in experiment");
  preset_cmd->add_option("name", preset_name, "mds-doubling | circle-walk | iid-rademacher-exact | doubling-nonadapted")
      ->required();
  preset_cmd->add_option("--n-max", n_max, "Drop grid points above N");
  preset_cmd->add_option("--reps", reps, "Replicates per grid point");
  preset_cmd->add_option("--seed", seed, "Master seed");
  preset_cmd->add_option("--output", output, "Output prefix (default: preset name)");

  std::size_t count = 1000;
  std::uint64_t fuzz_seed = 1;
  auto* appendix_cmd = app.add_subcommand("check-appendix", "Fuzz the covariance, dispersion and corollary bounds");
  appendix_cmd->add_option("--count", count, "Random joint laws")->check(CLI::PositiveNumber);
  appendix_cmd->add_option("--seed", fuzz_seed, "Seed");

  auto* diagnose_cmd = app.add_subcommand("diagnose", "Tabulate dependence-condition series");
  diagnose_cmd->add_option("--config", config_path, "Diagnose config JSON file")->required();

  std::vector<std::string> files;
  auto* report_cmd = app.add_subcommand("report", "Merge run manifests into one table");
  report_cmd->add_option("files", files, "Manifest JSON files")->required();
  report_cmd->add_option("--output", output, "Write <prefix>.csv and <prefix>.json instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*run_cmd) {
      ExperimentConfig cfg = config_from_json(read_json_file(config_path));
      if (!output.empty()) cfg.output = output;
      return finish_run(run(cfg));
    }
    if (*preset_cmd) {
      PresetOptions opt{n_max, reps, seed, std::nullopt};
      if (!output.empty()) opt.output = output;
      return finish_run(run(preset(preset_name, opt)));
    }
    if (*appendix_cmd) {
      const AppendixReport r = check_appendix(count, fuzz_seed);
      std::cout << to_json(r).dump(2) << "\n";
      return r.all_pass() ? 0 : 1;
    }
    if (*diagnose_cmd) {
      const DiagnoseConfig cfg = diagnose_config_from_json(read_json_file(config_path));
      const std::string text = to_json(diagnose_conditions(cfg)).dump(2) + "\n";
      if (cfg.output.empty()) {
        std::cout << text;
      } else {
        write_text_file(cfg.output + ".diagnose.json", text);
        std::cout << "wrote " << cfg.output << ".diagnose.json\n";
      }
      return 0;
    }
    if (*report_cmd) {
      std::vector<Json> manifests;
      for (const auto& f : files) manifests.push_back(read_json_file(f));
      const MergedReport r = report(manifests, files);
      if (output.empty()) {
        std::cout << r.csv;
      } else {
        write_text_file(output + ".csv", r.csv);
        write_text_file(output + ".json", r.json.dump(2) + "\n");
        std::cout << "wrote " << output << ".csv\nwrote " << output << ".json\n";
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << error_kind(e) << "): " << e.what() << "\n";
    return e.exit_code();
  }
  return 0;
}
