#pragma once

// Lines of the plane as points of the (alpha, p) representation space.
//
// A line is stored in normal form  x*cos(alpha) + y*sin(alpha) = p  with
// alpha in [0, pi). For a non-vertical line y = m*x + b this gives
// alpha = pi/2 + atan(m) and p = b / sqrt(1 + m^2); a vertical line x = x0 has
// alpha = 0 and p = x0. All distance and membership tests use the normal form,
// which stays finite at alpha = 0 and alpha = pi/2.

#include <cmath>
#include <numbers>
#include <sstream>

#include "linecover/error.hpp"

namespace linecover {

inline constexpr double kPi = std::numbers::pi;

// Planar position in km (easting, northing).
struct Position {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Position&, const Position&) = default;
};

// A line in representation space.
struct ReprPoint {
  double alpha = 0.0;  // rad, [0, pi) once canonical
  double p = 0.0;      // signed offset, km

  friend bool operator==(const ReprPoint&, const ReprPoint&) = default;
};

// Region of interest. Lines crossing it form the line process.
struct Disc {
  Position center;
  double radius = 1.0;
};

// Box in representation space holding every line that meets a region.
struct ReprWindow {
  double alpha_min = 0.0;
  double alpha_max = kPi;
  double p_max = 1.0;

  double p_min() const { return -p_max; }
  double area() const { return (alpha_max - alpha_min) * 2.0 * p_max; }
};

// Reduces alpha into [0, pi), flipping the sign of p once per half-turn.
inline ReprPoint canonicalize(double alpha, double p) {
  const double k = std::floor(alpha / kPi);
  double a = alpha - k * kPi;
  const bool odd = std::fmod(std::abs(k), 2.0) == 1.0;
  double q = odd ? -p : p;
  // Rounding can land exactly on pi.
  if (a >= kPi) {
    a -= kPi;
    q = -q;
  }
  if (a < 0.0) a = 0.0;
  return {a, q};
}

inline ReprPoint canonicalize(const ReprPoint& l) { return canonicalize(l.alpha, l.p); }

inline ReprPoint line_from_slope_intercept(double m, double b) {
  return {kPi / 2.0 + std::atan(m), b / std::sqrt(1.0 + m * m)};
}

inline ReprPoint vertical_line(double x0) { return {0.0, x0}; }

struct SlopeIntercept {
  double m = 0.0;
  double b = 0.0;
};

// Inverse transform. tan(alpha - pi/2) = -cot(alpha) and
// sqrt(1 + tan^2(alpha - pi/2)) = 1/sin(alpha) on (0, pi).
inline SlopeIntercept to_slope_intercept(const ReprPoint& l) {
  const double s = std::sin(l.alpha);
  if (l.alpha == 0.0 || s == 0.0) {
    throw GeometryError("to_slope_intercept: vertical line (alpha = 0) has no slope");
  }
  return {-std::cos(l.alpha) / s, l.p / s};
}

// Signed offset of `a` from the line along its normal (cos alpha, sin alpha).
inline double normal_offset(const Position& a, const ReprPoint& l) {
  return l.p - (a.x * std::cos(l.alpha) + a.y * std::sin(l.alpha));
}

inline double point_line_distance(const Position& a, const ReprPoint& l) {
  return std::abs(normal_offset(a, l));
}

inline Position foot_of_perpendicular(const Position& a, const ReprPoint& l) {
  const double d = normal_offset(a, l);
  return {a.x + d * std::cos(l.alpha), a.y + d * std::sin(l.alpha)};
}

inline ReprPoint line_from_two_points(const Position& p1, const Position& p2) {
  const double dx = p2.x - p1.x;
  const double dy = p2.y - p1.y;
  if (dx == 0.0 && dy == 0.0) {
    std::ostringstream msg;
    msg << "line_from_two_points: coincident points (" << p1.x << ", " << p1.y << ")";
    throw GeometryError(msg.str());
  }
  // Normal direction is the tangent rotated by +90 degrees.
  const double alpha = std::atan2(dx, -dy);
  const double p = p1.x * std::cos(alpha) + p1.y * std::sin(alpha);
  return canonicalize(alpha, p);
}

// Tangent lines count as crossing.
inline bool line_intersects_disc(const ReprPoint& l, const Disc& d) {
  return point_line_distance(d.center, l) <= d.radius;
}

inline ReprWindow repr_window_for_disc(const Disc& d) {
  if (d.center.x != 0.0 || d.center.y != 0.0) {
    throw GeometryError(
        "repr_window_for_disc: region must be centered at the origin; translate coordinates first");
  }
  if (!(d.radius > 0.0)) throw GeometryError("repr_window_for_disc: radius must be positive");
  return {0.0, kPi, d.radius};
}

inline double distance(const Position& a, const Position& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// Projects `a` onto the disc if it lies outside.
inline Position clip_to_disc(const Position& a, const Disc& d) {
  const double dx = a.x - d.center.x;
  const double dy = a.y - d.center.y;
  const double r = std::hypot(dx, dy);
  if (r <= d.radius) return a;
  const double s = d.radius / r;
  return {d.center.x + dx * s, d.center.y + dy * s};
}

}  // namespace linecover
