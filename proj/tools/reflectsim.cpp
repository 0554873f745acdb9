#include "reflectsim/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  namespace cli = reflectsim::cli;
  CLI::App app{"Reflected SDE experiments"};
  app.require_subcommand(1);

  auto* list = app.add_subcommand("list", "List the experiments");
  bool as_json = false;
  list->add_flag("--json", as_json, "Print the catalog as JSON");

  auto* run = app.add_subcommand("run", "Run an experiment from an INI file");
  std::string config;
  std::vector<std::string> overrides;
  cli::Options options;
  run->add_option("config", config, "Configuration file")->required();
  run->add_option("overrides", overrides, "section.key=value assignments");
  run->add_option("--set", overrides, "section.key=value assignment");
  run->add_option("--workers", options.workers, "Worker threads")->check(CLI::PositiveNumber);
  run->add_option("--seed", options.seed, "Master seed");
  run->add_option("--output", options.output, "Output directory");
  run->add_flag("--dry-run", options.dry_run, "Print the resolved configuration and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::exit_config;
  }

  if (*list) {
    cli::list_experiments(std::cout, as_json);
    return cli::exit_ok;
  }
  return cli::run(config, overrides, options, std::cout, std::cerr);
}
