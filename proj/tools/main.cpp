#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ldspin/parallel.hpp"
#include "ldspin/pipelines.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "ldspin: high-temperature large deviations for quantum lattice spin "
      "systems (exact finite-volume engine + certified cluster expansion)"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string pipeline;
  int threads = 0;
  bool uncertified = false;

  auto* certify = app.add_subcommand(
      "certify", "Search the convergence condition for the best (a, beta0)");
  certify->add_option("--config", config_path, "Config file")->required();
  certify->add_option("--out", out_dir, "Output directory");

  auto* run = app.add_subcommand("run", "Run a named pipeline");
  run->add_option("--config", config_path, "Config file")->required();
  run->add_option("--pipeline", pipeline,
                  "exact | expand | rate | level2 | gtgap | psinorm | clt")
      ->required();
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--threads", threads,
                  "Worker threads (affects speed only, never results)");
  run->add_flag("--uncertified", uncertified,
                "Allow beta above the certified beta0");

  CLI11_PARSE(app, argc, argv);

  ldspin::RunConfig config;
  try {
    config = ldspin::parse_config_file(config_path);
  } catch (const ldspin::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return ldspin::kExitConfig;
  }
  if (threads > 0) ldspin::set_thread_count(threads);
  const std::string dir = out_dir.empty() ? config.out_dir : out_dir;

  if (certify->parsed()) return ldspin::cmd_certify(config, dir);
  return ldspin::cmd_run(config, pipeline, dir, uncertified);
}
