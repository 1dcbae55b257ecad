#pragma once

// AIS-style track ingestion: CSV parsing, local projection, per-vessel
// segmentation and orthogonal line fitting.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "linecover/error.hpp"
#include "linecover/geometry.hpp"

namespace linecover {

// Seconds since 1970-01-01T00:00:00Z.
using TimePoint = std::int64_t;

struct Ping {
  std::string vessel_id;
  TimePoint time = 0;
  double lat = 0.0;
  double lon = 0.0;
};

struct Track {
  std::string vessel_id;
  std::vector<Position> points;
  std::vector<TimePoint> times;

  TimePoint time_span() const { return times.empty() ? 0 : times.back() - times.front(); }
};

struct ProjectionOrigin {
  double lat0 = 0.0;
  double lon0 = 0.0;
  double earth_radius = 6371.0;  // km
};

struct ParseResult {
  std::vector<Ping> pings;
  std::size_t rows_read = 0;
  std::size_t rows_dropped = 0;     // unparseable fields
  std::size_t rows_duplicate = 0;   // repeated (vessel, time)
};

namespace detail {

// Splits one CSV record; double quotes protect commas, "" is a literal quote.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(std::move(field));
  return out;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (used != s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

// Parses `YYYY-MM-DDTHH:MM:SS` (a space separator is accepted as well) as UTC.
inline std::optional<TimePoint> parse_iso8601(std::string_view s) {
  if (s.size() != 19) return std::nullopt;
  auto digits = [&](std::size_t pos, std::size_t n) -> std::optional<int> {
    int v = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
      if (s[i] < '0' || s[i] > '9') return std::nullopt;
      v = v * 10 + (s[i] - '0');
    }
    return v;
  };
  if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
      s[16] != ':') {
    return std::nullopt;
  }
  const auto y = digits(0, 4), mo = digits(5, 2), d = digits(8, 2);
  const auto h = digits(11, 2), mi = digits(14, 2), se = digits(17, 2);
  if (!y || !mo || !d || !h || !mi || !se) return std::nullopt;
  if (*h > 23 || *mi > 59 || *se > 60) return std::nullopt;
  using namespace std::chrono;
  const year_month_day ymd{year{*y}, month{static_cast<unsigned>(*mo)},
                           day{static_cast<unsigned>(*d)}};
  if (!ymd.ok()) return std::nullopt;
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<TimePoint>(days) * 86400 + *h * 3600 + *mi * 60 + *se;
}

// Reads marinecadastre-layout AIS records. Requires MMSI, BaseDateTime, LAT and
// LON columns; other columns are ignored. Output is sorted by (vessel, time)
// and deduplicated on (vessel, time), keeping the first occurrence in file
// order.
inline ParseResult parse_ais_csv(std::istream& in) {
  ParseResult result;
  std::string line;
  if (!std::getline(in, line)) {
    throw InputError("AIS CSV: missing header row");
  }
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
      static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF) {
    line.erase(0, 3);
  }
  const auto header = detail::split_csv_line(line);
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[detail::trim(header[i])] = i;

  std::vector<std::string> missing;
  for (const char* name : {"MMSI", "BaseDateTime", "LAT", "LON"}) {
    if (!column.count(name)) missing.emplace_back(name);
  }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "AIS CSV: missing required column(s)";
    for (const auto& m : missing) msg << ' ' << m;
    msg << "; found headers:";
    for (const auto& h : header) msg << " [" << detail::trim(h) << ']';
    throw InputError(msg.str());
  }
  const std::size_t c_id = column["MMSI"], c_time = column["BaseDateTime"];
  const std::size_t c_lat = column["LAT"], c_lon = column["LON"];
  const std::size_t needed = std::max({c_id, c_time, c_lat, c_lon}) + 1;

  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++result.rows_read;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() < needed) {
      ++result.rows_dropped;
      continue;
    }
    const std::string id = detail::trim(fields[c_id]);
    const auto t = parse_iso8601(detail::trim(fields[c_time]));
    const auto lat = detail::parse_double(detail::trim(fields[c_lat]));
    const auto lon = detail::parse_double(detail::trim(fields[c_lon]));
    if (id.empty() || !t || !lat || !lon || *lat < -90.0 || *lat > 90.0 || *lon < -180.0 ||
        *lon > 180.0) {
      ++result.rows_dropped;
      continue;
    }
    result.pings.push_back({id, *t, *lat, *lon});
  }

  auto& pings = result.pings;
  std::stable_sort(pings.begin(), pings.end(), [](const Ping& a, const Ping& b) {
    if (a.vessel_id != b.vessel_id) return a.vessel_id < b.vessel_id;
    return a.time < b.time;
  });
  const auto last = std::unique(pings.begin(), pings.end(), [](const Ping& a, const Ping& b) {
    return a.vessel_id == b.vessel_id && a.time == b.time;
  });
  result.rows_duplicate = static_cast<std::size_t>(std::distance(last, pings.end()));
  pings.erase(last, pings.end());
  return result;
}

// Equirectangular projection about the origin, km.
inline Position project_to_local(double lat, double lon, const ProjectionOrigin& o) {
  constexpr double deg = kPi / 180.0;
  return {o.earth_radius * std::cos(o.lat0 * deg) * (lon - o.lon0) * deg,
          o.earth_radius * (lat - o.lat0) * deg};
}

// One track per maximal same-vessel run with gaps <= max_gap seconds; runs with
// fewer than two pings are discarded. `shift` is subtracted from every projected
// position so that the region center becomes the origin.
inline std::vector<Track> segment_tracks(const std::vector<Ping>& pings, const ProjectionOrigin& origin,
                                         std::int64_t max_gap_seconds = 30 * 60,
                                         Position shift = {}) {
  std::vector<Track> tracks;
  Track current;
  auto flush = [&] {
    if (current.points.size() >= 2) tracks.push_back(std::move(current));
    current = Track{};
  };
  for (const Ping& ping : pings) {
    const bool continues = !current.points.empty() && current.vessel_id == ping.vessel_id &&
                           ping.time - current.times.back() <= max_gap_seconds &&
                           ping.time > current.times.back();
    if (!continues) flush();
    if (current.points.empty()) current.vessel_id = ping.vessel_id;
    Position pos = project_to_local(ping.lat, ping.lon, origin);
    pos.x -= shift.x;
    pos.y -= shift.y;
    current.points.push_back(pos);
    current.times.push_back(ping.time);
  }
  flush();
  return tracks;
}

struct LineFit {
  ReprPoint line;
  Position centroid;
  double extent = 0.0;           // span of the points along the fitted direction, km
  double max_radius = 0.0;       // largest distance of a point from the centroid, km
  double residual_sq_sum = 0.0;  // sum of squared perpendicular distances
};

// Total least squares: the line through the centroid along the principal axis
// of the 2x2 scatter matrix. Orientation-free, so north-south tracks are fine.
inline LineFit fit_line_tls(const std::vector<Position>& points, double min_extent = 1.0) {
  if (points.size() < 2) throw GeometryError("fit_line_tls: need at least two points");
  double cx = 0.0, cy = 0.0;
  for (const auto& q : points) {
    cx += q.x;
    cy += q.y;
  }
  cx /= static_cast<double>(points.size());
  cy /= static_cast<double>(points.size());
  double sxx = 0.0, sxy = 0.0, syy = 0.0, rmax = 0.0;
  for (const auto& q : points) {
    const double dx = q.x - cx, dy = q.y - cy;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
    rmax = std::max(rmax, std::hypot(dx, dy));
  }
  if (rmax < min_extent) {
    std::ostringstream msg;
    msg << "fit_line_tls: degenerate track, all points within " << min_extent
        << " km of the centroid";
    throw GeometryError(msg.str());
  }
  // Direction = principal axis of the scatter ellipse; axis-aligned scatter is
  // handled exactly.
  double ux = 1.0, uy = 0.0;
  if (sxy == 0.0) {
    if (syy > sxx) std::swap(ux, uy);
  } else {
    const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    ux = std::cos(theta);
    uy = std::sin(theta);
  }
  const double nx = -uy, ny = ux;
  LineFit fit;
  fit.line = canonicalize(std::atan2(ny, nx), cx * nx + cy * ny);
  fit.centroid = {cx, cy};
  fit.max_radius = rmax;
  double lo = 0.0, hi = 0.0, res = 0.0;
  for (const auto& q : points) {
    const double along = (q.x - cx) * ux + (q.y - cy) * uy;
    const double across = -(q.x - cx) * uy + (q.y - cy) * ux;
    lo = std::min(lo, along);
    hi = std::max(hi, along);
    res += across * across;
  }
  fit.extent = hi - lo;
  fit.residual_sq_sum = res;
  return fit;
}

struct CrossingLine {
  std::string vessel_id;
  ReprPoint line;
  std::size_t n_points = 0;
  double extent = 0.0;
};

struct ExtractSummary {
  std::vector<CrossingLine> lines;
  std::size_t tracks = 0;
  std::size_t fitted = 0;
  std::size_t degenerate = 0;
};

// Fits every track and keeps the lines that meet the (origin-centered) region.
inline ExtractSummary extract_crossing_lines(const std::vector<Track>& tracks, const Disc& region,
                                             double min_extent = 1.0) {
  ExtractSummary out;
  out.tracks = tracks.size();
  for (const auto& t : tracks) {
    LineFit fit;
    try {
      fit = fit_line_tls(t.points, min_extent);
    } catch (const GeometryError&) {
      ++out.degenerate;
      continue;
    }
    ++out.fitted;
    if (line_intersects_disc(fit.line, region)) {
      out.lines.push_back({t.vessel_id, fit.line, t.points.size(), fit.extent});
    }
  }
  return out;
}

}  // namespace linecover
