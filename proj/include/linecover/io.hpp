#pragma once

// File formats: CSV artifacts (9 significant digits, LF endings) and the
// versioned binary posterior container.

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "linecover/error.hpp"
#include "linecover/ingest.hpp"
#include "linecover/intensity.hpp"
#include "linecover/placement.hpp"

namespace linecover {

inline std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw InputError("cannot open '" + path + "' for writing");
  }

  CsvWriter& header(std::initializer_list<std::string_view> cols) {
    bool first = true;
    for (auto c : cols) {
      if (!first) out_ << ',';
      out_ << c;
      first = false;
    }
    out_ << '\n';
    return *this;
  }

  template <typename... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    ((emit(fields, first)), ...);
    out_ << '\n';
  }

  void close() {
    out_.close();
    if (!out_) throw InputError("failed writing '" + path_ + "'");
  }

 private:
  template <typename T>
  void emit(const T& v, bool& first) {
    if (!first) out_ << ',';
    first = false;
    if constexpr (std::is_floating_point_v<T>) {
      out_ << fmt9(v);
    } else {
      out_ << v;
    }
  }

  std::ofstream out_;
  std::string path_;
};

// Header-keyed CSV reader for our own artifacts.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name, const std::string& file) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    std::ostringstream msg;
    msg << file << ": missing column '" << name << "'; found headers:";
    for (const auto& h : header) msg << " [" << h << ']';
    throw InputError(msg.str());
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + ": empty file");
  for (auto& h : detail::split_csv_line(line)) t.header.push_back(detail::trim(h));
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != t.header.size()) {
      throw InputError(path + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(t.header.size()) + " fields, got " + std::to_string(fields.size()));
    }
    for (auto& f : fields) f = detail::trim(f);
    t.rows.push_back(std::move(fields));
  }
  return t;
}

inline double field_double(const std::string& s, const std::string& where) {
  const auto v = detail::parse_double(s);
  if (!v) throw InputError(where + ": not a number: '" + s + "'");
  return *v;
}

// lines.csv: vessel_id,alpha_rad,p_km,n_points,extent_km
inline void write_lines_csv(const std::string& path, const std::vector<CrossingLine>& lines) {
  CsvWriter w(path);
  w.header({"vessel_id", "alpha_rad", "p_km", "n_points", "extent_km"});
  for (const auto& l : lines) w.row(l.vessel_id, l.line.alpha, l.line.p, l.n_points, l.extent);
  w.close();
}

inline std::vector<CrossingLine> read_lines_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  const auto c_id = t.column("vessel_id", path), c_a = t.column("alpha_rad", path);
  const auto c_p = t.column("p_km", path), c_n = t.column("n_points", path);
  const auto c_e = t.column("extent_km", path);
  std::vector<CrossingLine> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path + ":" + std::to_string(r + 2);
    CrossingLine l;
    l.vessel_id = row[c_id];
    l.line = {field_double(row[c_a], where), field_double(row[c_p], where)};
    l.n_points = static_cast<std::size_t>(field_double(row[c_n], where));
    l.extent = field_double(row[c_e], where);
    out.push_back(std::move(l));
  }
  return out;
}

// intensity.csv: alpha_rad,p_km,mean_log,var_log,mean_lambda (alpha-major).
// mean_lambda is the lognormal mean of lambda, not divided by T_c.
inline void write_intensity_csv(const std::string& path, const IntensityPosterior& post) {
  const Eigen::VectorXd var = post.marginal_variance();
  CsvWriter w(path);
  w.header({"alpha_rad", "p_km", "mean_log", "var_log", "mean_lambda"});
  for (std::size_t i = 0; i < post.grid.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const ReprPoint c = post.grid.center(i);
    w.row(c.alpha, c.p, post.mode[k], var[k], std::exp(post.mode[k] + 0.5 * var[k]));
  }
  w.close();
}

struct PlacementRow {
  std::size_t stage = 0;
  Position position;
  double nu_approx = 0.0;
  std::string solver;
};

// placements.csv: stage,easting_km,northing_km,nu_approx,solver
inline void write_placements_csv(const std::string& path, const std::vector<PlacementRow>& rows) {
  CsvWriter w(path);
  w.header({"stage", "easting_km", "northing_km", "nu_approx", "solver"});
  for (const auto& r : rows) w.row(r.stage, r.position.x, r.position.y, r.nu_approx, r.solver);
  w.close();
}

inline std::vector<PlacementRow> read_placements_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  const auto c_s = t.column("stage", path), c_x = t.column("easting_km", path);
  const auto c_y = t.column("northing_km", path), c_nu = t.column("nu_approx", path);
  const auto c_solver = t.column("solver", path);
  std::vector<PlacementRow> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path + ":" + std::to_string(r + 2);
    PlacementRow p;
    p.stage = static_cast<std::size_t>(field_double(row[c_s], where));
    p.position = {field_double(row[c_x], where), field_double(row[c_y], where)};
    p.nu_approx = field_double(row[c_nu], where);
    p.solver = row[c_solver];
    out.push_back(std::move(p));
  }
  return out;
}

// Rows of a placement result: greedy rows carry the per-stage nu, refined rows
// carry the final nu.
inline std::vector<PlacementRow> placement_rows(const PlacementResult& res) {
  std::vector<PlacementRow> rows;
  const auto& pos = res.network.positions;
  for (std::size_t j = 0; j < pos.size(); ++j) {
    const double nu = res.solver == Solver::greedy && j < res.nu_per_stage.size() ? res.nu_per_stage[j]
                                                                                   : res.nu_final;
    rows.push_back({j + 1, pos[j], nu, std::string(solver_name(res.solver))});
  }
  return rows;
}

// Groups rows by solver, ordered by stage, keeping first appearance order.
inline std::vector<std::pair<std::string, std::vector<PlacementRow>>> group_by_solver(
    const std::vector<PlacementRow>& rows) {
  std::vector<std::pair<std::string, std::vector<PlacementRow>>> groups;
  for (const auto& r : rows) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == r.solver; });
    if (it == groups.end()) {
      groups.emplace_back(r.solver, std::vector<PlacementRow>{});
      it = std::prev(groups.end());
    }
    it->second.push_back(r);
  }
  for (auto& g : groups) {
    std::stable_sort(g.second.begin(), g.second.end(),
                     [](const PlacementRow& a, const PlacementRow& b) { return a.stage < b.stage; });
  }
  return groups;
}

// Binary posterior container:
//   "LINECOVER-POSTERIOR <version>\n" "<json length>\n" <json header>
//   followed by little-endian float64 arrays counts[n], exposure[n], mode[n]
//   and the lower triangle of the covariance factor, row by row.
inline constexpr int kPosteriorFormatVersion = 1;

namespace detail {
inline void write_doubles(std::ostream& out, const double* p, std::size_t n) {
  static_assert(std::endian::native == std::endian::little, "posterior files are little-endian");
  out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}
inline void read_doubles(std::istream& in, double* p, std::size_t n, const std::string& path) {
  in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw InputError(path + ": truncated posterior file");
}
}  // namespace detail

inline void save_posterior(const std::string& path, const IntensityPosterior& post) {
  const auto n = static_cast<std::size_t>(post.mode.size());
  nlohmann::json h;
  h["format"] = "linecover-posterior";
  h["version"] = kPosteriorFormatVersion;
  h["cells"] = n;
  h["grid"] = {{"alpha_min", post.grid.window().alpha_min},
               {"alpha_max", post.grid.window().alpha_max},
               {"p_max", post.grid.window().p_max},
               {"n_alpha", post.grid.n_alpha()},
               {"n_p", post.grid.n_p()}};
  h["hyper"] = {{"signal_variance", post.hyper.signal_variance},
                {"length_scale_alpha", post.hyper.length_scale_alpha},
                {"length_scale_p", post.hyper.length_scale_p},
                {"prior_mean", post.hyper.prior_mean.value_or(0.0)},
                {"jitter", post.hyper.jitter}};
  h["collection_periods"] = post.collection_periods;
  h["iterations"] = post.iterations;
  h["gradient_norm"] = post.gradient_norm;
  h["log_evidence"] = post.log_evidence;
  h["arrays"] = {"counts", "exposure", "mode", "cov_factor_lower_rows"};
  h["byte_order"] = "little";
  const std::string header = h.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  out << "LINECOVER-POSTERIOR " << kPosteriorFormatVersion << '\n' << header.size() << '\n' << header;
  detail::write_doubles(out, post.counts.data(), n);
  detail::write_doubles(out, post.exposure.data(), n);
  detail::write_doubles(out, post.mode.data(), n);
  std::vector<double> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.resize(i + 1);
    for (std::size_t j = 0; j <= i; ++j)
      row[j] = post.cov_factor(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    detail::write_doubles(out, row.data(), row.size());
  }
  out.close();
  if (!out) throw InputError("failed writing '" + path + "'");
}

inline IntensityPosterior load_posterior(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "LINECOVER-POSTERIOR") throw InputError(path + ": not a posterior file");
  if (version != kPosteriorFormatVersion) {
    throw InputError(path + ": unsupported posterior version " + std::to_string(version));
  }
  std::size_t len = 0;
  in >> len;
  in.get();  // newline
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (!in) throw InputError(path + ": truncated header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": bad header: " + e.what());
  }
  IntensityPosterior post;
  const auto& g = h.at("grid");
  post.grid = Grid(ReprWindow{g.at("alpha_min").get<double>(), g.at("alpha_max").get<double>(),
                              g.at("p_max").get<double>()},
                   g.at("n_alpha").get<std::size_t>(), g.at("n_p").get<std::size_t>());
  const auto& hy = h.at("hyper");
  post.hyper.signal_variance = hy.at("signal_variance");
  post.hyper.length_scale_alpha = hy.at("length_scale_alpha");
  post.hyper.length_scale_p = hy.at("length_scale_p");
  post.hyper.prior_mean = hy.at("prior_mean").get<double>();
  post.hyper.jitter = hy.at("jitter");
  post.collection_periods = h.at("collection_periods");
  post.iterations = h.at("iterations");
  post.gradient_norm = h.at("gradient_norm");
  post.log_evidence = h.at("log_evidence");
  const auto n = h.at("cells").get<std::size_t>();
  if (n != post.grid.size()) throw InputError(path + ": cell count does not match grid");
  const auto en = static_cast<Eigen::Index>(n);
  post.counts.resize(en);
  post.exposure.resize(en);
  post.mode.resize(en);
  detail::read_doubles(in, post.counts.data(), n, path);
  detail::read_doubles(in, post.exposure.data(), n, path);
  detail::read_doubles(in, post.mode.data(), n, path);
  post.cov_factor = Eigen::MatrixXd::Zero(en, en);
  std::vector<double> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.resize(i + 1);
    detail::read_doubles(in, row.data(), row.size(), path);
    for (std::size_t j = 0; j <= i; ++j)
      post.cov_factor(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
  }
  return post;
}

}  // namespace linecover
