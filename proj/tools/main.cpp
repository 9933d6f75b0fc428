#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "app.hpp"

int main(int argc, char** argv) {
  namespace app = linewalk::app;
  CLI::App cli{"linewalk: simulation and verification toolkit for line-model random walks"};
  cli.require_subcommand(1);

  app::Options opts;
  std::string config;
  std::uint64_t seed = 0;
  std::string out = "out";
  std::vector<std::string> formats;

  const std::map<std::string, std::string> about = {
      {"figure1", "100-jump VSRW trajectory rendered as SVG"},
      {"scaling", "exponent fit of median |X_i(T)| over a T grid"},
      {"limit-compare", "KS comparison of the rescaled walk with the limit sampler"},
      {"nonexplosion", "explosion-probe sweep over an alpha grid"},
      {"conjecture", "fitted exponents against the conjectured case-1 values"},
      {"oracles", "differential-system, heavy-tail, stable-law and local-time checks"},
      {"overscaling", "decay of the over-scaled supremum statistic"},
      {"dump-env", "CSV window of the line values H(k), V(k)"},
  };
  for (const auto& name : app::command_names()) {
    CLI::App* sub = cli.add_subcommand(name, about.at(name));
    sub->add_option("--config", config, "flat key=value configuration file");
    sub->add_option("--set", opts.overrides, "key=value override (repeatable)");
    sub->add_option("--seed", seed, "base seed (overrides LINEWALK_SEED and the config file)");
    sub->add_option("--workers", opts.workers, "worker threads; 0 uses every core")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--out", out, "output directory")->capture_default_str();
    sub->add_option("--format", formats, "artifact formats to write (default: all)")
        ->delimiter(',')
        ->check(CLI::IsMember({"csv", "json", "svg"}));
    sub->callback([&, name, sub] {
      opts.command = name;
      if (sub->count("--seed")) opts.seed = seed;
    });
  }

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? app::exit_ok : app::exit_usage;
  }

  if (!config.empty()) opts.config_path = config;
  opts.out_dir = out;
  opts.formats.insert(formats.begin(), formats.end());
  if (const char* env = std::getenv("LINEWALK_SEED")) opts.seed_env = std::string(env);
  return app::run(opts, std::cout, std::cerr);
}
