// linecover: command-line front end for the sensor placement pipeline.
//
//   linecover ingest        --config run.conf [--input ais.csv]
//   linecover fit-intensity --config run.conf [--lines lines.csv]
//   linecover place         --config run.conf [--posterior posterior.bin]
//   linecover refine        --config run.conf [--method newton] ...
//   linecover evaluate      --config run.conf
//   linecover simulate      --config run.conf
//   linecover export-plots  --config run.conf
//
// Exit codes: 0 success, 1 usage error, 2 input error, 3 numerical failure.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "linecover/linecover.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config, "run configuration file")->required()->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", args.out, "output directory (overrides out_dir)");
  cmd->add_option("--seed", args.seed, "override every seed in the configuration");
  cmd->add_option("--threads", args.threads, "worker threads, 0 = all cores");
}

linecover::RunConfig load(const CommonArgs& args) {
  auto cfg = linecover::load_config(args.config);
  if (!args.out.empty()) cfg.out_dir = args.out;
  if (args.seed) {
    cfg.seed_sampling = *args.seed;
    cfg.seed_simulation = *args.seed;
  }
  linecover::set_max_threads(args.threads);
  return cfg;
}

std::string or_default(const std::string& given, const std::filesystem::path& fallback) {
  return given.empty() ? fallback.string() : given;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sensor placement for detecting straight-line transits"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string input, lines, posterior, placements;
  std::vector<std::string> methods;

  auto* ingest = app.add_subcommand("ingest", "AIS CSV -> lines.csv");
  add_common(ingest, common);
  ingest->add_option("-i,--input", input, "AIS CSV (overrides ais_csv)");

  auto* fit = app.add_subcommand("fit-intensity", "lines.csv -> posterior.bin, intensity.csv");
  add_common(fit, common);
  fit->add_option("--lines", lines, "lines CSV");

  auto* place = app.add_subcommand("place", "greedy placement -> placements.csv");
  add_common(place, common);
  place->add_option("--posterior", posterior, "posterior file");

  auto* refine = app.add_subcommand("refine", "continuous refinement -> placements_refined.csv");
  add_common(refine, common);
  refine->add_option("--posterior", posterior, "posterior file");
  refine->add_option("--placements", placements, "greedy placements CSV");
  refine->add_option("-m,--method", methods, "newton, bfgs or trust-region (repeatable)");

  auto* evaluate = app.add_subcommand("evaluate", "Monte Carlo void probability -> evaluation.csv");
  add_common(evaluate, common);
  evaluate->add_option("--posterior", posterior, "posterior file");
  evaluate->add_option("--placements", placements, "placements CSV");

  auto* simulate = app.add_subcommand("simulate", "detection simulation -> simulation.csv");
  add_common(simulate, common);
  simulate->add_option("--posterior", posterior, "posterior file");
  simulate->add_option("--placements", placements, "placements CSV");

  auto* plots = app.add_subcommand("export-plots", "plot data -> plots/");
  add_common(plots, common);
  plots->add_option("--posterior", posterior, "posterior file");
  plots->add_option("--placements", placements, "placements CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    const auto cfg = load(common);
    const linecover::OutputPaths out{cfg.out_dir};
    auto& log = std::cout;
    if (*ingest) {
      const std::string src = input.empty() ? cfg.ais_csv : input;
      if (src.empty()) throw linecover::InputError("no AIS input: set ais_csv or pass --input");
      linecover::cmd_ingest(cfg, src, out, log);
    } else if (*fit) {
      linecover::cmd_fit_intensity(cfg, or_default(lines, out.lines()), out, log);
    } else if (*place) {
      linecover::cmd_place(cfg, or_default(posterior, out.posterior()), out, log);
    } else if (*refine) {
      linecover::cmd_refine(cfg, or_default(placements, out.placements()), or_default(posterior, out.posterior()),
                            methods.empty() ? cfg.refine_methods : methods, out, log);
    } else if (*evaluate) {
      const std::string src =
          !placements.empty() ? placements
          : std::filesystem::exists(out.refined()) ? out.refined().string()
                                                   : out.placements().string();
      linecover::cmd_evaluate(cfg, src, or_default(posterior, out.posterior()), out, log);
    } else if (*simulate) {
      const std::string src =
          !placements.empty() ? placements
          : std::filesystem::exists(out.refined()) ? out.refined().string()
                                                   : out.placements().string();
      linecover::cmd_simulate(cfg, src, or_default(posterior, out.posterior()), out, log);
    } else if (*plots) {
      linecover::cmd_export_plots(cfg, or_default(posterior, out.posterior()),
                                  or_default(placements, out.placements()), out, log);
    }
  } catch (const linecover::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << " (residual " << e.residual() << ")\n";
    return 3;
  } catch (const linecover::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
