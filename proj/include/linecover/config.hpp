#pragma once

// Run configuration: a flat `key = value` text file, `#` starts a comment.
// Every key has a default; the defaults reproduce the Hampton Roads setup
// (20 x 20 km box, 2.5 deg x 1 km intensity grid, 0.5 km candidate lattice,
// rho = 0.95, sigma_l = 0.15 km^2, Z = 10000).

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "linecover/error.hpp"
#include "linecover/geometry.hpp"
#include "linecover/ingest.hpp"
#include "linecover/intensity.hpp"
#include "linecover/placement.hpp"
#include "linecover/sensing.hpp"

namespace linecover {

struct RunConfig {
  // Projection and region.
  double lat0 = 37.009825;
  double lon0 = -76.099335;
  double earth_radius_km = 6371.0;
  double region_center_x_km = 0.0;
  double region_center_y_km = 0.0;
  double region_half_width_km = 10.0;
  double region_radius_km = 0.0;  // 0: circumscribe the half-width square

  // Ingest.
  double max_gap_min = 30.0;
  double min_extent_km = 1.0;

  // Intensity.
  double grid_alpha_step_deg = 2.5;
  double grid_p_step_km = 1.0;
  double collection_periods = 1.0;
  double gp_signal_variance = 1.0;
  double gp_length_scale_alpha_deg = 10.0;
  double gp_length_scale_p_km = 2.0;
  std::optional<double> gp_prior_mean;
  double gp_jitter = 1e-8;
  std::vector<double> gp_grid_signal_variance;
  std::vector<double> gp_grid_length_scale_alpha_deg;
  std::vector<double> gp_grid_length_scale_p_km;
  int laplace_max_iter = 100;

  // Sensors and placement.
  double rho = 0.95;
  double sigma_l = 0.15;
  double candidate_spacing_km = 0.5;
  std::size_t num_sensors = 5;
  std::vector<std::string> refine_methods = {"newton", "bfgs", "trust-region"};
  double refine_eps = 1e-6;
  int refine_max_iter = 200;

  // Evaluation.
  std::size_t mc_samples = 10000;
  std::size_t simulation_trials = 100000;
  std::uint64_t seed_sampling = 2;
  std::uint64_t seed_simulation = 3;
  std::size_t export_line_samples = 200;

  // Paths.
  std::string ais_csv;
  std::string out_dir = "out";

  ProjectionOrigin origin() const { return {lat0, lon0, earth_radius_km}; }

  double region_radius() const {
    return region_radius_km > 0.0 ? region_radius_km : region_half_width_km * std::sqrt(2.0);
  }

  // The region in the translated frame, where its center is the origin.
  Disc region() const { return {{0.0, 0.0}, region_radius()}; }

  Grid grid() const {
    return Grid::uniform(repr_window_for_disc(region()), grid_alpha_step_deg * kPi / 180.0, grid_p_step_km);
  }

  GpHyper hyper() const {
    GpHyper h;
    h.signal_variance = gp_signal_variance;
    h.length_scale_alpha = gp_length_scale_alpha_deg * kPi / 180.0;
    h.length_scale_p = gp_length_scale_p_km;
    h.prior_mean = gp_prior_mean;
    h.jitter = gp_jitter;
    return h;
  }

  // Cartesian product of the configured hyper grid; empty when unset.
  std::vector<GpHyper> hyper_grid() const {
    if (gp_grid_signal_variance.empty() && gp_grid_length_scale_alpha_deg.empty() &&
        gp_grid_length_scale_p_km.empty()) {
      return {};
    }
    auto or_default = [](const std::vector<double>& v, double d) {
      return v.empty() ? std::vector<double>{d} : v;
    };
    std::vector<GpHyper> out;
    for (double s : or_default(gp_grid_signal_variance, gp_signal_variance))
      for (double la : or_default(gp_grid_length_scale_alpha_deg, gp_length_scale_alpha_deg))
        for (double lp : or_default(gp_grid_length_scale_p_km, gp_length_scale_p_km)) {
          GpHyper h = hyper();
          h.signal_variance = s;
          h.length_scale_alpha = la * kPi / 180.0;
          h.length_scale_p = lp;
          out.push_back(h);
        }
    return out;
  }

  SensorSpec sensor() const { return {rho, sigma_l}; }

  CandidateSet candidates() const {
    return candidate_grid(region(), candidate_spacing_km, region_half_width_km);
  }

  RefineOptions refine_options() const {
    RefineOptions o;
    o.eps = refine_eps;
    o.max_iter = refine_max_iter;
    return o;
  }

  void validate() const {
    auto positive = [](double v, const char* key) {
      if (!(v > 0.0)) throw InputError(std::string("config: ") + key + " must be positive");
    };
    positive(earth_radius_km, "earth_radius_km");
    positive(region_half_width_km, "region_half_width_km");
    positive(max_gap_min, "max_gap_min");
    positive(min_extent_km, "min_extent_km");
    positive(grid_alpha_step_deg, "grid_alpha_step_deg");
    positive(grid_p_step_km, "grid_p_step_km");
    positive(collection_periods, "collection_periods");
    positive(gp_signal_variance, "gp_signal_variance");
    positive(gp_length_scale_alpha_deg, "gp_length_scale_alpha_deg");
    positive(gp_length_scale_p_km, "gp_length_scale_p_km");
    positive(gp_jitter, "gp_jitter");
    positive(sigma_l, "sigma_l");
    positive(candidate_spacing_km, "candidate_spacing_km");
    positive(refine_eps, "refine_eps");
    if (region_radius_km < 0.0) throw InputError("config: region_radius_km must be >= 0");
    if (!(rho >= 0.0 && rho <= 1.0)) throw InputError("config: rho must lie in [0, 1]");
    if (mc_samples == 0) throw InputError("config: mc_samples must be >= 1");
    if (simulation_trials == 0) throw InputError("config: simulation_trials must be >= 1");
    if (lat0 < -90.0 || lat0 > 90.0 || lon0 < -180.0 || lon0 > 180.0) {
      throw InputError("config: lat0/lon0 out of range");
    }
    for (const auto& m : refine_methods) parse_method(m);
  }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double config_number(const std::string& v, const std::string& where) {
  const auto d = parse_double(v);
  if (!d) throw InputError(where + ": not a number: '" + v + "'");
  return *d;
}

}  // namespace detail

inline RunConfig parse_config(std::istream& in, const std::string& source = "config") {
  RunConfig c;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto num = [](double& field) -> Setter {
    return [&field](const std::string& v, const std::string& where) { field = detail::config_number(v, where); };
  };
  auto count = [](std::size_t& field) -> Setter {
    return [&field](const std::string& v, const std::string& where) {
      const double d = detail::config_number(v, where);
      if (d < 0.0 || d != std::floor(d)) throw InputError(where + ": expected a non-negative integer");
      field = static_cast<std::size_t>(d);
    };
  };
  auto integer = [](int& field) -> Setter {
    return [&field](const std::string& v, const std::string& where) {
      const double d = detail::config_number(v, where);
      if (d != std::floor(d)) throw InputError(where + ": expected an integer");
      field = static_cast<int>(d);
    };
  };
  auto seed = [](std::uint64_t& field) -> Setter {
    return [&field](const std::string& v, const std::string& where) {
      try {
        std::size_t used = 0;
        field = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
      } catch (const std::exception&) {
        throw InputError(where + ": expected an unsigned integer seed");
      }
    };
  };
  auto list = [](std::vector<double>& field) -> Setter {
    return [&field](const std::string& v, const std::string& where) {
      field.clear();
      for (const auto& item : detail::split_list(v)) field.push_back(detail::config_number(item, where));
    };
  };
  auto text = [](std::string& field) -> Setter {
    return [&field](const std::string& v, const std::string&) { field = v; };
  };

  const std::map<std::string, Setter> keys = {
      {"lat0", num(c.lat0)},
      {"lon0", num(c.lon0)},
      {"earth_radius_km", num(c.earth_radius_km)},
      {"region_center_x_km", num(c.region_center_x_km)},
      {"region_center_y_km", num(c.region_center_y_km)},
      {"region_half_width_km", num(c.region_half_width_km)},
      {"region_radius_km", num(c.region_radius_km)},
      {"max_gap_min", num(c.max_gap_min)},
      {"min_extent_km", num(c.min_extent_km)},
      {"grid_alpha_step_deg", num(c.grid_alpha_step_deg)},
      {"grid_p_step_km", num(c.grid_p_step_km)},
      {"collection_periods", num(c.collection_periods)},
      {"gp_signal_variance", num(c.gp_signal_variance)},
      {"gp_length_scale_alpha_deg", num(c.gp_length_scale_alpha_deg)},
      {"gp_length_scale_p_km", num(c.gp_length_scale_p_km)},
      {"gp_prior_mean",
       [&c](const std::string& v, const std::string& where) {
         if (v == "auto") {
           c.gp_prior_mean.reset();
         } else {
           c.gp_prior_mean = detail::config_number(v, where);
         }
       }},
      {"gp_jitter", num(c.gp_jitter)},
      {"gp_grid_signal_variance", list(c.gp_grid_signal_variance)},
      {"gp_grid_length_scale_alpha_deg", list(c.gp_grid_length_scale_alpha_deg)},
      {"gp_grid_length_scale_p_km", list(c.gp_grid_length_scale_p_km)},
      {"laplace_max_iter", integer(c.laplace_max_iter)},
      {"rho", num(c.rho)},
      {"sigma_l", num(c.sigma_l)},
      {"candidate_spacing_km", num(c.candidate_spacing_km)},
      {"num_sensors", count(c.num_sensors)},
      {"refine_methods",
       [&c](const std::string& v, const std::string&) { c.refine_methods = detail::split_list(v); }},
      {"refine_eps", num(c.refine_eps)},
      {"refine_max_iter", integer(c.refine_max_iter)},
      {"mc_samples", count(c.mc_samples)},
      {"simulation_trials", count(c.simulation_trials)},
      {"seed_sampling", seed(c.seed_sampling)},
      {"seed_simulation", seed(c.seed_simulation)},
      {"export_line_samples", count(c.export_line_samples)},
      {"ais_csv", text(c.ais_csv)},
      {"out_dir", text(c.out_dir)},
  };

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InputError(where + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const auto it = keys.find(key);
    if (it == keys.end()) throw InputError(where + ": unknown key '" + key + "'");
    it->second(value, where);
  }
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config '" + path + "'");
  return parse_config(in, path);
}

}  // namespace linecover
