#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "wbt_cli/commands.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_run(const fs::path& config, const wbt::cli::RunFlags& flags, fs::path out) {
  const auto cfg = wbt::cli::load_config(config);
  const auto report = wbt::cli::validate_config(cfg, flags);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  if (!report.ok()) {
    for (const auto& e : report.errors) std::cerr << "error: " << e << '\n';
    return 1;
  }
  if (out.empty()) out = fs::path("results") / (cfg.id + ".csv");
  const auto result = wbt::cli::run_experiment(cfg, flags);
  for (const auto& m : result.messages) std::cerr << "note: " << m << '\n';
  wbt::cli::write_run(result, out);
  std::cout << "wrote " << result.rows.size() << " rows to " << out.string() << '\n';
  return 0;
}

int cmd_validate(const fs::path& config, const wbt::cli::RunFlags& flags) {
  const auto report = wbt::cli::validate_file(config, flags);
  for (const auto& w : report.warnings) std::cout << "warning: " << w << '\n';
  for (const auto& e : report.errors) std::cout << "error: " << e << '\n';
  return report.ok() ? 0 : 1;
}

int cmd_summarize(const fs::path& results, const fs::path& out) {
  std::ifstream in(results);
  if (!in) throw std::runtime_error("cannot read " + results.string());
  const auto summary = wbt::cli::summarize(wbt::cli::read_rows(in));
  std::cout << summary.table;
  if (!out.empty() && !summary.series.empty()) {
    fs::create_directories(out);
    for (const auto& [name, body] : summary.series) std::ofstream(out / name, std::ios::binary) << body;
    std::cout << "wrote " << summary.series.size() << " series files to " << out.string() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted branching simulation and certification toolkit"};
  app.set_version_flag("--version", wbt::cli::toolkit_version());
  app.require_subcommand(1);

  std::string config, out, results;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  auto* run = app.add_subcommand("run", "Run an experiment and write result rows plus a manifest");
  run->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  auto* run_seed = run->add_option("--seed", seed, "Seed; overrides the config");
  auto* run_threads = run->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  run->add_option("--out", out, "Result file (default results/<id>.csv)");

  auto* validate = app.add_subcommand("validate", "Check a config; warns on violated premises");
  validate->add_option("--config", config, "Experiment config (JSON)")->required();
  auto* val_seed = validate->add_option("--seed", seed, "Seed; overrides the config");
  auto* val_threads = validate->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  auto* summarize = app.add_subcommand("summarize", "Aggregate a result file and emit plot series");
  summarize->add_option("results", results, "Result file")->required();
  summarize->add_option("--out", out, "Directory for series files");

  CLI11_PARSE(app, argc, argv);

  try {
    wbt::cli::RunFlags flags;
    if (run->parsed()) {
      if (run_seed->count()) flags.seed = seed;
      if (run_threads->count()) flags.threads = threads;
      return cmd_run(config, flags, out);
    }
    if (validate->parsed()) {
      if (val_seed->count()) flags.seed = seed;
      if (val_threads->count()) flags.threads = threads;
      return cmd_validate(config, flags);
    }
    return cmd_summarize(results, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
