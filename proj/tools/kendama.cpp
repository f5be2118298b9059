#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "kendama/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Cup-and-ball swing-up planning and learned-noise tube MPC catching"};
  app.require_subcommand(1, 1);

  kendama::cli::Options opts;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "JSON run configuration");
    sub->add_option("--out", opts.out_dir, "Output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "Override the experiment seed");
    sub->add_flag("--no-timestamp", "Omit generated_at from written JSON");
  };

  const char* commands[][2] = {
      {"plan-swingup", "Plan the open-loop swing-up input sequence"},
      {"calibrate-noise", "Draw measurement-noise calibration samples"},
      {"learn-support", "Fit the confidence support of the noise and tighten the constraints"},
      {"rollout", "Run closed-loop catch roll-outs with traces"},
      {"sweep", "Run the sample-size sweep"},
      {"report", "Render SVG charts from a sweep summary"},
  };
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c[0], c[1]);
    add_common(sub);
    if (std::string(c[0]) == "report") {
      sub->add_option("summary", opts.summary_path, "summary.json (default: <out>/summary.json)");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kendama::cli::kExitConfig;
  }

  CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--seed") > 0) opts.seed = seed;
  opts.timestamp = sub->count("--no-timestamp") == 0;
  return kendama::cli::run(sub->get_name(), opts, std::cerr);
}
