// subkam command line driver.
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "subkam/config.hpp"
#include "subkam/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"subkam: weak KAM quantities for control-affine Lagrangians"};
  std::string config_path, task, out_dir;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "configuration file")->required();
  auto* task_opt = app.add_option("--task", task, "task to run (overrides the config)")
                       ->check(CLI::IsMember(subkam::known_tasks()));
  auto* out_opt = app.add_option("--out", out_dir, "output directory (overrides the config)");
  auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides the config)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : subkam::kExitError;
  }

  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "subkam: cannot read config file " << config_path << "\n";
    return subkam::kExitError;
  }
  std::stringstream text;
  text << in.rdbuf();

  subkam::RunConfig cfg;
  try {
    cfg = subkam::parse_config(text.str());
  } catch (const subkam::Error& e) {
    std::cerr << config_path << ": " << e.what() << "\n";
    return subkam::kExitError;
  }
  if (*task_opt) cfg.task = task;
  if (*out_opt) cfg.out_dir = out_dir;
  if (*seed_opt) cfg.seed = seed;
  return subkam::run(cfg);
}
