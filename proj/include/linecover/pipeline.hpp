#pragma once

// Pipeline commands behind the CLI. Each command reads its inputs from files,
// writes its artifacts into the output directory and reports to `log`; no state
// is carried between commands.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "linecover/config.hpp"
#include "linecover/evaluate.hpp"
#include "linecover/geometry.hpp"
#include "linecover/ingest.hpp"
#include "linecover/intensity.hpp"
#include "linecover/io.hpp"
#include "linecover/placement.hpp"
#include "linecover/sensing.hpp"

namespace linecover {

namespace fs = std::filesystem;

struct OutputPaths {
  fs::path dir;

  fs::path lines() const { return dir / "lines.csv"; }
  fs::path posterior() const { return dir / "posterior.bin"; }
  fs::path intensity() const { return dir / "intensity.csv"; }
  fs::path hyper_selection() const { return dir / "hyper_selection.csv"; }
  fs::path placements() const { return dir / "placements.csv"; }
  fs::path refined() const { return dir / "placements_refined.csv"; }
  fs::path refine_summary() const { return dir / "refine_summary.csv"; }
  fs::path evaluation() const { return dir / "evaluation.csv"; }
  fs::path simulation() const { return dir / "simulation.csv"; }
  fs::path plots() const { return dir / "plots"; }

  void ensure() const { fs::create_directories(dir); }
};

struct IngestSummary {
  std::size_t rows_read = 0;
  std::size_t rows_dropped = 0;
  std::size_t rows_duplicate = 0;
  std::size_t tracks = 0;
  std::size_t fitted = 0;
  std::size_t crossing = 0;
};

inline IngestSummary cmd_ingest(const RunConfig& cfg, const std::string& ais_csv, const OutputPaths& out,
                                std::ostream& log) {
  std::ifstream in(ais_csv, std::ios::binary);
  if (!in) throw InputError("cannot open AIS file '" + ais_csv + "'");
  ParseResult parsed;
  try {
    parsed = parse_ais_csv(in);
  } catch (const InputError& e) {
    throw InputError(ais_csv + ": " + e.what());
  }
  const auto max_gap = static_cast<std::int64_t>(std::llround(cfg.max_gap_min * 60.0));
  const auto tracks = segment_tracks(parsed.pings, cfg.origin(), max_gap,
                                     {cfg.region_center_x_km, cfg.region_center_y_km});
  const auto extracted = extract_crossing_lines(tracks, cfg.region(), cfg.min_extent_km);
  out.ensure();
  write_lines_csv(out.lines().string(), extracted.lines);

  IngestSummary s;
  s.rows_read = parsed.rows_read;
  s.rows_dropped = parsed.rows_dropped;
  s.rows_duplicate = parsed.rows_duplicate;
  s.tracks = extracted.tracks;
  s.fitted = extracted.fitted;
  s.crossing = extracted.lines.size();
  log << "ingest: rows " << s.rows_read << " (dropped " << s.rows_dropped << ", duplicate "
      << s.rows_duplicate << "), tracks read " << s.tracks << ", lines fitted " << s.fitted
      << ", lines crossing region " << s.crossing << '\n';
  return s;
}

struct FitSummary {
  std::size_t lines_in_window = 0;
  std::size_t lines_outside = 0;
  GpHyper hyper;
  int iterations = 0;
  double gradient_norm = 0.0;
  double expected_per_period = 0.0;
};

inline FitSummary cmd_fit_intensity(const RunConfig& cfg, const std::string& lines_csv, const OutputPaths& out,
                                    std::ostream& log) {
  const auto lines = read_lines_csv(lines_csv);
  const Grid grid = cfg.grid();
  std::vector<ReprPoint> points;
  FitSummary s;
  for (const auto& l : lines) {
    const ReprPoint c = canonicalize(l.line);
    if (grid.locate(c)) {
      points.push_back(c);
    } else {
      ++s.lines_outside;
    }
  }
  s.lines_in_window = points.size();
  if (points.empty()) throw InputError(lines_csv + ": no lines inside the representation window");
  const Eigen::VectorXd counts = bin_counts(points, grid);

  GpHyper hyper = cfg.hyper();
  const auto candidates = cfg.hyper_grid();
  LaplaceOptions opt;
  opt.max_iter = cfg.laplace_max_iter;
  out.ensure();
  if (!candidates.empty()) {
    const auto sel = empirical_bayes_select(grid, counts, candidates, opt);
    for (const auto& w : sel.warnings) log << "warning: " << w << '\n';
    CsvWriter w(out.hyper_selection().string());
    w.header({"signal_variance", "length_scale_alpha_rad", "length_scale_p_km", "log_evidence"});
    for (std::size_t h = 0; h < candidates.size(); ++h) {
      w.row(candidates[h].signal_variance, candidates[h].length_scale_alpha, candidates[h].length_scale_p,
            sel.log_evidence[h]);
    }
    w.close();
    hyper = sel.best;
  }
  const IntensityPosterior post = fit_intensity(grid, counts, hyper, cfg.collection_periods, opt);
  save_posterior(out.posterior().string(), post);
  write_intensity_csv(out.intensity().string(), post);

  s.hyper = post.hyper;
  s.iterations = post.iterations;
  s.gradient_norm = post.gradient_norm;
  const RatePerPeriod rate = posterior_mean_intensity(post);
  s.expected_per_period = rate.r.sum() * grid.cell_area();
  log << "fit-intensity: " << s.lines_in_window << " lines on a " << grid.n_alpha() << " x " << grid.n_p()
      << " grid (" << s.lines_outside << " outside), sigma_f^2=" << fmt9(hyper.signal_variance)
      << " l_alpha=" << fmt9(hyper.length_scale_alpha) << " rad l_p=" << fmt9(hyper.length_scale_p)
      << " km, Newton iterations " << s.iterations << ", gradient norm " << fmt9(s.gradient_norm)
      << ", expected crossings per period " << fmt9(s.expected_per_period) << '\n';
  return s;
}

struct PlaceSummary {
  PlacementResult result;
  double expected_per_period = 0.0;  // Lambda-bar, f with no sensors
};

inline PlaceSummary cmd_place(const RunConfig& cfg, const std::string& posterior_path, const OutputPaths& out,
                              std::ostream& log) {
  const IntensityPosterior post = load_posterior(posterior_path);
  const RatePerPeriod rate = posterior_mean_intensity(post);
  const SensorSpec spec = cfg.sensor();
  PlaceSummary s;
  s.expected_per_period = rate.r.sum() * post.grid.cell_area();
  s.result = greedy_place(cfg.num_sensors, cfg.candidates(), rate, post.grid, spec);
  out.ensure();
  write_placements_csv(out.placements().string(), placement_rows(s.result));

  log << "place: " << cfg.candidates().positions.size() << " candidates, expected crossings "
      << fmt9(s.expected_per_period) << ", nu(no sensors) = " << fmt9(std::exp(-s.expected_per_period))
      << '\n';
  log << "  # of sensors | void prob. approx. | easting_km | northing_km | solver\n";
  for (std::size_t j = 0; j < s.result.network.size(); ++j) {
    const auto& a = s.result.network.positions[j];
    log << "  " << std::setw(12) << j + 1 << " | " << std::setw(18) << fmt9(s.result.nu_per_stage[j]) << " | "
        << std::setw(10) << fmt9(a.x) << " | " << std::setw(11) << fmt9(a.y) << " | greedy\n";
  }
  return s;
}

inline PlacementResult greedy_from_rows(const std::vector<PlacementRow>& rows, const std::string& file) {
  PlacementResult res;
  res.solver = Solver::greedy;
  for (const auto& [solver, group] : group_by_solver(rows)) {
    if (solver != "greedy") continue;
    for (const auto& r : group) {
      res.network.positions.push_back(r.position);
      res.nu_per_stage.push_back(r.nu_approx);
    }
  }
  if (res.network.empty()) throw InputError(file + ": no greedy placements to refine");
  res.nu_final = res.nu_per_stage.back();
  return res;
}

inline std::vector<PlacementResult> cmd_refine(const RunConfig& cfg, const std::string& placements_csv,
                                               const std::string& posterior_path,
                                               const std::vector<std::string>& methods, const OutputPaths& out,
                                               std::ostream& log) {
  const auto rows = read_placements_csv(placements_csv);
  const PlacementResult initial = greedy_from_rows(rows, placements_csv);
  const IntensityPosterior post = load_posterior(posterior_path);
  const RatePerPeriod rate = posterior_mean_intensity(post);
  const SensorSpec spec = cfg.sensor();
  const double nu0 = void_approx(initial.network, rate, post.grid, spec);

  std::vector<PlacementResult> results;
  std::vector<PlacementRow> all = placement_rows(initial);
  out.ensure();
  CsvWriter summary(out.refine_summary().string());
  summary.header({"solver", "M", "iterations", "final_gradient_norm", "nu_initial", "nu_refined",
                  "improvement_pct", "status"});
  for (const auto& name : methods) {
    const Solver method = parse_method(name);
    PlacementResult r = refine(initial, method, rate, post.grid, spec, cfg.region(), cfg.refine_options());
    const double pct = 100.0 * (r.nu_final - nu0) / nu0;
    summary.row(std::string(solver_name(method)), r.network.size(), r.iterations, r.final_gradient_norm, nu0,
                r.nu_final, pct, std::string(status_name(r.status)));
    log << "refine: " << solver_name(method) << " nu " << fmt9(nu0) << " -> " << fmt9(r.nu_final) << " (+"
        << fmt9(pct) << "%), " << r.iterations << " iterations, gradient norm " << fmt9(r.final_gradient_norm)
        << ", " << status_name(r.status) << '\n';
    const auto extra = placement_rows(r);
    all.insert(all.end(), extra.begin(), extra.end());
    results.push_back(std::move(r));
  }
  summary.close();
  write_placements_csv(out.refined().string(), all);
  return results;
}

// One evaluation target: a solver's network, or for greedy every stage prefix.
struct EvalTarget {
  std::string solver;
  SensorNetwork network;
};

inline std::vector<EvalTarget> evaluation_targets(const std::vector<PlacementRow>& rows) {
  std::vector<EvalTarget> targets;
  for (const auto& [solver, group] : group_by_solver(rows)) {
    if (solver == "greedy") {
      SensorNetwork net;
      for (const auto& r : group) {
        net.positions.push_back(r.position);
        targets.push_back({solver, net});
      }
    } else {
      SensorNetwork net;
      for (const auto& r : group) net.positions.push_back(r.position);
      targets.push_back({solver, net});
    }
  }
  return targets;
}

struct EvalRow {
  std::string solver;
  std::size_t M = 0;
  GapReport report;
};

inline std::vector<EvalRow> cmd_evaluate(const RunConfig& cfg, const std::string& placements_csv,
                                         const std::string& posterior_path, const OutputPaths& out,
                                         std::ostream& log) {
  const auto targets = evaluation_targets(read_placements_csv(placements_csv));
  const IntensityPosterior post = load_posterior(posterior_path);
  std::vector<SensorNetwork> nets;
  for (const auto& t : targets) nets.push_back(t.network);
  const auto reports = jensens_gap_batch(nets, post, cfg.sensor(), cfg.mc_samples, cfg.seed_sampling);

  std::vector<EvalRow> rows;
  out.ensure();
  CsvWriter w(out.evaluation().string());
  w.header({"solver", "M", "nu_approx", "void_mc", "std_err", "gap", "Z", "seed"});
  double greedy_gap_sum = 0.0;
  std::size_t greedy_rows = 0;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const auto& r = reports[k];
    rows.push_back({targets[k].solver, targets[k].network.size(), r});
    w.row(targets[k].solver, targets[k].network.size(), r.void_approx, r.void_mc.mean, r.void_mc.std_err, r.gap,
          r.void_mc.Z, r.void_mc.seed);
    log << "evaluate: " << targets[k].solver << " M=" << targets[k].network.size() << " nu=" << fmt9(r.void_approx)
        << " void_mc=" << fmt9(r.void_mc.mean) << " +- " << fmt9(r.void_mc.std_err) << " gap=" << fmt9(r.gap)
        << '\n';
    if (targets[k].solver == "greedy") {
      greedy_gap_sum += r.gap;
      ++greedy_rows;
    }
  }
  w.close();
  if (greedy_rows > 0) {
    log << "evaluate: average greedy gap over M=1.." << greedy_rows << " = "
        << fmt9(greedy_gap_sum / static_cast<double>(greedy_rows)) << '\n';
  }
  return rows;
}

struct SimulationRow {
  std::string solver;
  std::size_t M = 0;
  double nu_approx = 0.0;
  DetectionEstimate estimate;
};

inline std::vector<SimulationRow> cmd_simulate(const RunConfig& cfg, const std::string& placements_csv,
                                               const std::string& posterior_path, const OutputPaths& out,
                                               std::ostream& log) {
  const auto targets = evaluation_targets(read_placements_csv(placements_csv));
  const IntensityPosterior post = load_posterior(posterior_path);
  const RatePerPeriod rate = posterior_mean_intensity(post);
  const SensorSpec spec = cfg.sensor();
  std::vector<SimulationRow> rows;
  out.ensure();
  CsvWriter w(out.simulation().string());
  w.header({"solver", "M", "nu_approx", "empirical_void", "std_err", "trials", "seed"});
  for (const auto& t : targets) {
    SimulationRow row;
    row.solver = t.solver;
    row.M = t.network.size();
    row.nu_approx = void_approx(t.network, rate, post.grid, spec);
    row.estimate = simulate_detection(t.network, rate, post.grid, spec, cfg.simulation_trials, cfg.seed_simulation);
    w.row(row.solver, row.M, row.nu_approx, row.estimate.void_prob, row.estimate.std_err, row.estimate.trials,
          cfg.seed_simulation);
    log << "simulate: " << row.solver << " M=" << row.M << " nu=" << fmt9(row.nu_approx)
        << " empirical=" << fmt9(row.estimate.void_prob) << " +- " << fmt9(row.estimate.std_err) << '\n';
    rows.push_back(std::move(row));
  }
  w.close();
  return rows;
}

struct ExportSummary {
  std::size_t stage_files = 0;
  std::size_t line_samples = 0;
};

// Plot data: mean rate heatmap, thinned rate after each greedy stage
// (thinned_stage_0 is the unthinned rate), a sample of lines drawn from the mean
// rate as inertial-space segments clipped to the region, and the candidate and
// selected sensor positions.
inline ExportSummary cmd_export_plots(const RunConfig& cfg, const std::string& posterior_path,
                                      const std::string& placements_csv, const OutputPaths& out,
                                      std::ostream& log) {
  const IntensityPosterior post = load_posterior(posterior_path);
  const RatePerPeriod rate = posterior_mean_intensity(post);
  const Grid& grid = post.grid;
  const SensorSpec spec = cfg.sensor();
  std::vector<PlacementRow> greedy;
  for (const auto& [solver, group] : group_by_solver(read_placements_csv(placements_csv))) {
    if (solver == "greedy") greedy = group;
  }
  const fs::path dir = out.plots();
  fs::create_directories(dir);
  ExportSummary s;

  {
    CsvWriter w((dir / "intensity_mean.csv").string());
    w.header({"alpha_rad", "p_km", "rate"});
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const ReprPoint c = grid.center(i);
      w.row(c.alpha, c.p, rate.r[static_cast<Eigen::Index>(i)]);
    }
    w.close();
  }

  const ThinningObjective obj(grid, rate, spec);
  std::vector<double> thinned(rate.r.data(), rate.r.data() + rate.r.size());
  for (std::size_t stage = 0; stage <= greedy.size(); ++stage) {
    if (stage > 0) {
      const Position a = greedy[stage - 1].position;
      for (std::size_t i = 0; i < grid.size(); ++i) thinned[i] *= 1.0 - obj.gamma(i, a);
    }
    CsvWriter w((dir / ("thinned_stage_" + std::to_string(stage) + ".csv")).string());
    w.header({"alpha_rad", "p_km", "rate"});
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const ReprPoint c = grid.center(i);
      w.row(c.alpha, c.p, thinned[i]);
    }
    w.close();
    ++s.stage_files;
  }

  {
    const Disc region = cfg.region();
    std::vector<double> cumulative(grid.size());
    double total = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      total += rate.r[static_cast<Eigen::Index>(i)];
      cumulative[i] = total;
    }
    std::mt19937_64 rng(mix_seed(cfg.seed_sampling, 0x6c696e6573ULL));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    CsvWriter w((dir / "lines_overlay.csv").string());
    w.header({"alpha_rad", "p_km", "x1_km", "y1_km", "x2_km", "y2_km"});
    for (std::size_t k = 0; k < cfg.export_line_samples && total > 0.0; ++k) {
      auto it = std::upper_bound(cumulative.begin(), cumulative.end(), unif(rng) * total);
      if (it == cumulative.end()) --it;
      const auto cell = static_cast<std::size_t>(it - cumulative.begin());
      const ReprPoint l{grid.alpha_edge(grid.alpha_index(cell)) + unif(rng) * grid.d_alpha(),
                        grid.p_edge(grid.p_index(cell)) + unif(rng) * grid.d_p()};
      const double half = std::sqrt(std::max(0.0, region.radius * region.radius - l.p * l.p));
      const Position foot{l.p * std::cos(l.alpha), l.p * std::sin(l.alpha)};
      const Position dir_along{-std::sin(l.alpha), std::cos(l.alpha)};
      w.row(l.alpha, l.p, foot.x - half * dir_along.x, foot.y - half * dir_along.y, foot.x + half * dir_along.x,
            foot.y + half * dir_along.y);
      ++s.line_samples;
    }
    w.close();
  }

  {
    CsvWriter w((dir / "positions.csv").string());
    w.header({"kind", "stage", "easting_km", "northing_km"});
    for (const auto& c : cfg.candidates().positions) w.row(std::string("candidate"), 0, c.x, c.y);
    for (const auto& r : greedy) w.row(std::string("selected"), r.stage, r.position.x, r.position.y);
    w.close();
  }
  log << "export-plots: " << s.stage_files << " thinned-stage files, " << s.line_samples
      << " sampled lines written to " << dir.string() << '\n';
  return s;
}

}  // namespace linecover
