#pragma once

// Synthetic line-process data for tests: log-Gaussian fields drawn on a grid
// and Poisson counts from them. Field draws use their own Kronecker factorization
// so they do not share code with the fitting path under test.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "linecover/linecover.hpp"

namespace scenario {

using linecover::Grid;
using linecover::GpHyper;

inline Eigen::MatrixXd se_factor(std::size_t n, double step, double length) {
  Eigen::MatrixXd k(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < k.rows(); ++i)
    for (Eigen::Index j = 0; j < k.cols(); ++j) {
      const double d = static_cast<double>(i - j) * step / length;
      k(i, j) = std::exp(-0.5 * d * d);
    }
  k.diagonal().array() += 1e-6;
  return Eigen::LLT<Eigen::MatrixXd>(k).matrixL();
}

// Zero-mean GP draw with the separable squared-exponential kernel, alpha-major.
inline Eigen::VectorXd draw_gp(const Grid& grid, const GpHyper& h, std::uint64_t seed) {
  const Eigen::MatrixXd la = se_factor(grid.n_alpha(), grid.d_alpha(), h.length_scale_alpha);
  const Eigen::MatrixXd lp = se_factor(grid.n_p(), grid.d_p(), h.length_scale_p);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd z(lp.rows(), la.rows());
  for (Eigen::Index c = 0; c < z.cols(); ++c)
    for (Eigen::Index r = 0; r < z.rows(); ++r) z(r, c) = normal(rng);
  const Eigen::MatrixXd f = std::sqrt(h.signal_variance) * lp * z * la.transpose();
  return Eigen::Map<const Eigen::VectorXd>(f.data(), f.size());
}

inline Eigen::VectorXd draw_counts(const Grid& grid, const Eigen::VectorXd& eta, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Eigen::VectorXd y(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    std::poisson_distribution<long> pois(grid.cell_area() * std::exp(eta[i]));
    y[i] = static_cast<double>(pois(rng));
  }
  return y;
}

inline double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::ArrayXd da = a.array() - a.mean(), db = b.array() - b.mean();
  return (da * db).sum() / std::sqrt((da * da).sum() * (db * db).sum());
}

inline Grid default_grid() {
  return Grid::uniform(linecover::repr_window_for_disc({{0, 0}, 10.0 * std::sqrt(2.0)}), 2.5 * linecover::kPi / 180,
                       1.0);
}

struct Lanes {
  Grid grid;
  Eigen::VectorXd eta;
  Eigen::VectorXd counts;
};

// Traffic built from individual transits rather than a field: a dominant
// dredged channel, a secondary lane and diffuse crossings, binned the same way
// fitted AIS lines are. The truth here is the line set, not a log-intensity.
struct Lane {
  double alpha;       // normal angle of the lane axis, rad
  double p;           // offset of the lane axis, km
  double heading_sd;  // rad
  double lateral_sd;  // km
  double share;
};

inline Lanes transit_field(std::uint64_t seed, double mean_lines = 300.0) {
  Lanes s;
  s.grid = default_grid();
  const double p_max = s.grid.window().p_max;
  const Lane lanes[] = {{linecover::kPi / 2 + 0.15, 0.5, 0.05, 0.35, 0.6}, {0.8, -2.0, 0.08, 0.5, 0.25}};
  std::mt19937_64 rng(seed);
  std::poisson_distribution<int> count(mean_lines);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal;
  std::vector<linecover::ReprPoint> pts;
  for (int n = count(rng), k = 0; k < n; ++k) {
    const double u = unit(rng);
    linecover::ReprPoint l{linecover::kPi * unit(rng), p_max * (2.0 * unit(rng) - 1.0)};
    double acc = 0.0;
    for (const auto& lane : lanes) {
      acc += lane.share;
      if (u < acc) {
        l = {lane.alpha + lane.heading_sd * normal(rng), lane.p + lane.lateral_sd * normal(rng)};
        break;
      }
    }
    pts.push_back(linecover::canonicalize(l));
  }
  s.counts = linecover::bin_counts(pts, s.grid);
  s.eta = Eigen::VectorXd::Zero(s.counts.size());
  return s;
}

// Posterior on a traffic sample with T_c chosen so that the expected number of
// crossings per period gives exp(-Lambda) = exp(-target).
struct Calibrated {
  Lanes data;
  linecover::IntensityPosterior post;
  linecover::RatePerPeriod rate;
  double expected = 0.0;
};

inline Calibrated calibrate(Lanes data, double target = 2.6) {
  Calibrated c;
  c.data = std::move(data);
  c.post = linecover::fit_intensity(c.data.grid, c.data.counts, GpHyper{});
  const double total = linecover::posterior_mean_intensity(c.post).r.sum() * c.data.grid.cell_area();
  c.post.collection_periods = total / target;
  c.rate = linecover::posterior_mean_intensity(c.post);
  c.expected = c.rate.r.sum() * c.data.grid.cell_area();
  return c;
}

inline Calibrated calibrated_traffic(std::uint64_t seed, double target = 2.6) {
  return calibrate(transit_field(seed), target);
}

}  // namespace scenario
