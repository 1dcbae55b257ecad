#pragma once

// Sensor placement against the thinned-intensity objective.
//
//   f(a)  = sum_i cell_area * r_i * pi_C(l_i, a)      (expected undetected lines)
//   nu(a) = exp(-f(a))                                 (void probability bound)
//
// greedy_place picks sensors one at a time from a candidate lattice; refine
// polishes a greedy layout with Newton, BFGS or dogleg trust-region steps on f.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "linecover/error.hpp"
#include "linecover/geometry.hpp"
#include "linecover/intensity.hpp"
#include "linecover/parallel.hpp"
#include "linecover/sensing.hpp"

namespace linecover {

struct CandidateSet {
  std::vector<Position> positions;
};

// Lattice with the given spacing over the square of half-width `half_width`
// (the disc radius when unset) around the disc center, keeping points inside
// the disc. The center is always a lattice point.
inline CandidateSet candidate_grid(const Disc& region, double spacing, double half_width = 0.0) {
  if (!(spacing > 0.0)) throw InputError("candidate_grid: spacing must be positive");
  const double h = half_width > 0.0 ? half_width : region.radius;
  const auto k_max = static_cast<long>(std::floor(h / spacing + 1e-9));
  const double r_tol = region.radius * (1.0 + 1e-12);
  CandidateSet set;
  for (long i = -k_max; i <= k_max; ++i) {
    for (long j = -k_max; j <= k_max; ++j) {
      const Position q{region.center.x + static_cast<double>(i) * spacing,
                       region.center.y + static_cast<double>(j) * spacing};
      if (distance(q, region.center) <= r_tol) set.positions.push_back(q);
    }
  }
  return set;
}

// Cell geometry and quadrature weights of the objective, precomputed once.
class ThinningObjective {
 public:
  ThinningObjective(const Grid& grid, const RatePerPeriod& rate, const SensorSpec& spec)
      : spec_(spec) {
    spec.validate();
    if (static_cast<std::size_t>(rate.r.size()) != grid.size()) {
      throw InputError("ThinningObjective: rate does not match the grid");
    }
    const std::size_t n = grid.size();
    cells_.reserve(n);
    cos_.resize(n);
    sin_.resize(n);
    weight_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const ReprPoint c = grid.center(i);
      cells_.push_back(c);
      cos_[i] = std::cos(c.alpha);
      sin_[i] = std::sin(c.alpha);
      weight_[i] = grid.cell_area() * rate.r[static_cast<Eigen::Index>(i)];
    }
  }

  std::size_t cells() const { return cells_.size(); }
  const SensorSpec& spec() const { return spec_; }
  const std::vector<double>& weights() const { return weight_; }
  const ReprPoint& cell(std::size_t i) const { return cells_[i]; }

  double gamma(std::size_t i, const Position& a) const {
    const double d = cells_[i].p - (a.x * cos_[i] + a.y * sin_[i]);
    return spec_.rho * std::exp(-d * d / spec_.sigma_l);
  }

  // pi_C at every cell center.
  std::vector<double> failure(std::span<const Position> net) const {
    std::vector<double> pi(cells_.size(), 1.0);
    for (const auto& a : net)
      for (std::size_t i = 0; i < cells_.size(); ++i) pi[i] *= 1.0 - gamma(i, a);
    return pi;
  }

  double expected_count() const {
    double s = 0.0;
    for (double w : weight_) s += w;
    return s;
  }

  double value(std::span<const Position> net) const {
    const auto pi = failure(net);
    double s = 0.0;
    for (std::size_t i = 0; i < cells_.size(); ++i) s += weight_[i] * pi[i];
    return s;
  }

  // Gradient (2M) and, if requested, Hessian (2M x 2M) of f over the flattened
  // coordinates (a1.x, a1.y, a2.x, ...).
  double evaluate(std::span<const Position> net, Eigen::VectorXd* grad, Eigen::MatrixXd* hess) const {
    const std::size_t m = net.size();
    const auto dim = static_cast<Eigen::Index>(2 * m);
    if (grad) *grad = Eigen::VectorXd::Zero(dim);
    if (hess) *hess = Eigen::MatrixXd::Zero(dim, dim);
    double f = 0.0;
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      const double w = weight_[i];
      if (w == 0.0) continue;
      const KernelTerms t(cells_[i], net, spec_);
      f += w * t.product_excluding(static_cast<std::size_t>(-1));
      if (!grad && !hess) continue;
      const Eigen::Matrix2d nn = t.normal * t.normal.transpose();
      for (std::size_t j = 0; j < m; ++j) {
        const double pj = t.product_excluding(j);
        const auto jj = static_cast<Eigen::Index>(2 * j);
        if (grad) grad->segment<2>(jj) -= w * pj * t.dgamma[j] * t.normal;
        if (!hess) continue;
        hess->block<2, 2>(jj, jj) -= w * pj * t.d2gamma[j] * nn;
        for (std::size_t k = j + 1; k < m; ++k) {
          const auto kk = static_cast<Eigen::Index>(2 * k);
          const Eigen::Matrix2d blk = w * t.product_excluding(j, k) * t.dgamma[j] * t.dgamma[k] * nn;
          hess->block<2, 2>(jj, kk) += blk;
          hess->block<2, 2>(kk, jj) += blk.transpose();
        }
      }
    }
    return f;
  }

 private:
  SensorSpec spec_;
  std::vector<ReprPoint> cells_;
  std::vector<double> cos_, sin_, weight_;
};

// Midpoint quadrature of the thinned rate over the window.
inline double undetected_rate(const SensorNetwork& net, const RatePerPeriod& rate, const Grid& grid,
                              const SensorSpec& spec) {
  return ThinningObjective(grid, rate, spec).value(net.positions);
}

inline double void_approx(const SensorNetwork& net, const RatePerPeriod& rate, const Grid& grid,
                          const SensorSpec& spec) {
  return std::exp(-undetected_rate(net, rate, grid, spec));
}

enum class Solver { greedy, newton, bfgs, trust_region };

inline std::string_view solver_name(Solver s) {
  switch (s) {
    case Solver::greedy: return "greedy";
    case Solver::newton: return "greedy+newton";
    case Solver::bfgs: return "greedy+bfgs";
    case Solver::trust_region: return "greedy+trust-region";
  }
  return "unknown";
}

inline Solver parse_method(std::string_view name) {
  if (name == "newton" || name == "greedy+newton") return Solver::newton;
  if (name == "bfgs" || name == "quasi-newton" || name == "greedy+bfgs") return Solver::bfgs;
  if (name == "trust-region" || name == "greedy+trust-region") return Solver::trust_region;
  if (name == "greedy") return Solver::greedy;
  throw InputError("unknown solver '" + std::string(name) + "'");
}

enum class RefineStatus { none, converged, max_iter, line_search_failure, trust_region_collapse };

inline std::string_view status_name(RefineStatus s) {
  switch (s) {
    case RefineStatus::none: return "none";
    case RefineStatus::converged: return "converged";
    case RefineStatus::max_iter: return "max_iter";
    case RefineStatus::line_search_failure: return "line_search_failure";
    case RefineStatus::trust_region_collapse: return "trust_region_collapse";
  }
  return "unknown";
}

struct PlacementResult {
  SensorNetwork network;            // selection order
  std::vector<double> nu_per_stage; // nu after each greedy sensor
  double nu_final = 1.0;            // nu of `network`
  Solver solver = Solver::greedy;
  int iterations = 0;
  double final_gradient_norm = 0.0;
  RefineStatus status = RefineStatus::none;
  std::vector<double> objective_history;  // f per accepted refinement iterate
};

// Algorithm: for each stage scan every candidate, keep the one removing the most
// residual rate (strictly larger wins, so ties go to the lowest index), then
// thin the residual rate by the chosen sensor's miss probability.
inline PlacementResult greedy_place(std::size_t M, const CandidateSet& candidates, const RatePerPeriod& rate,
                                    const Grid& grid, const SensorSpec& spec) {
  if (candidates.positions.empty()) throw InputError("greedy_place: empty candidate set");
  if (M > candidates.positions.size()) {
    std::ostringstream msg;
    msg << "greedy_place: M = " << M << " exceeds the " << candidates.positions.size() << " candidates";
    throw InputError(msg.str());
  }
  const ThinningObjective obj(grid, rate, spec);
  std::vector<double> residual = obj.weights();
  const std::size_t W = candidates.positions.size();
  const std::size_t n = obj.cells();

  PlacementResult res;
  res.solver = Solver::greedy;
  std::vector<double> gain(W);
  for (std::size_t stage = 0; stage < M; ++stage) {
    constexpr std::size_t chunk = 64;
    parallel_for((W + chunk - 1) / chunk, [&](std::size_t c) {
      const std::size_t lo = c * chunk, hi = std::min(W, lo + chunk);
      for (std::size_t j = lo; j < hi; ++j) {
        double g = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (residual[i] != 0.0) g += residual[i] * obj.gamma(i, candidates.positions[j]);
        }
        gain[j] = g;
      }
    });
    std::size_t best = 0;
    for (std::size_t j = 1; j < W; ++j)
      if (gain[j] > gain[best]) best = j;
    const Position chosen = candidates.positions[best];
    res.network.positions.push_back(chosen);
    double remaining = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      residual[i] *= 1.0 - obj.gamma(i, chosen);
      remaining += residual[i];
    }
    res.nu_per_stage.push_back(std::exp(-remaining));
  }
  res.nu_final = res.nu_per_stage.empty() ? std::exp(-obj.expected_count()) : res.nu_per_stage.back();
  return res;
}

// Eigenvalue clamp: every eigenvalue below delta * max(1, lambda_max) is raised
// to that floor. Returns the symmetrized input unchanged when nothing clamps.
inline Eigen::MatrixXd make_positive_definite(const Eigen::MatrixXd& H, double delta = 1e-8) {
  const Eigen::MatrixXd S = 0.5 * (H + H.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
  if (eig.info() != Eigen::Success) throw NumericalError("make_positive_definite: eigensolver failed", 0.0);
  const Eigen::VectorXd lam = eig.eigenvalues();
  const double floor = delta * std::max(1.0, lam.maxCoeff());
  if ((lam.array() >= floor).all()) return S;
  const Eigen::VectorXd clamped = lam.cwiseMax(floor);
  Eigen::MatrixXd out = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

struct RefineOptions {
  double eps = 1e-6;
  int max_iter = 200;
  double hessian_delta = 1e-8;
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  double min_step = 1e-12;
  double initial_radius = 1.0;  // km
  double max_radius = 10.0;     // km
};

namespace detail {

inline Eigen::VectorXd flatten(const std::vector<Position>& net) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(2 * net.size()));
  for (std::size_t j = 0; j < net.size(); ++j) {
    x[static_cast<Eigen::Index>(2 * j)] = net[j].x;
    x[static_cast<Eigen::Index>(2 * j + 1)] = net[j].y;
  }
  return x;
}

inline std::vector<Position> unflatten(const Eigen::VectorXd& x, const Disc& region) {
  std::vector<Position> net(static_cast<std::size_t>(x.size() / 2));
  for (std::size_t j = 0; j < net.size(); ++j) {
    net[j] = clip_to_disc({x[static_cast<Eigen::Index>(2 * j)], x[static_cast<Eigen::Index>(2 * j + 1)]},
                          region);
  }
  return net;
}

// Dogleg step for the model g^T p + 1/2 p^T B p with B positive definite.
inline Eigen::VectorXd dogleg(const Eigen::VectorXd& g, const Eigen::MatrixXd& B, double radius) {
  const Eigen::VectorXd pb = -B.llt().solve(g);
  if (pb.norm() <= radius) return pb;
  const double gBg = g.dot(B * g);
  const Eigen::VectorXd pu = -(g.squaredNorm() / gBg) * g;
  const double nu = pu.norm();
  if (nu >= radius) return (radius / nu) * pu;
  // Solve |pu + tau (pb - pu)| = radius for tau in [0, 1].
  const Eigen::VectorXd d = pb - pu;
  const double a = d.squaredNorm(), b = 2.0 * pu.dot(d), c = pu.squaredNorm() - radius * radius;
  const double tau = (-b + std::sqrt(b * b - 4.0 * a * c)) / (2.0 * a);
  return pu + tau * d;
}

}  // namespace detail

// Minimizes f over the 2M sensor coordinates from a greedy start. Only
// non-increasing steps are accepted and iterates are clipped to the region, so
// nu never drops below the starting value.
inline PlacementResult refine(const PlacementResult& initial, Solver method, const RatePerPeriod& rate,
                              const Grid& grid, const SensorSpec& spec, const Disc& region,
                              const RefineOptions& opt = {}) {
  if (method == Solver::greedy) throw InputError("refine: method must be newton, bfgs or trust-region");
  if (!(opt.eps > 0.0)) throw InputError("refine: eps must be positive");
  const ThinningObjective obj(grid, rate, spec);

  PlacementResult res = initial;
  res.solver = method;
  res.iterations = 0;
  res.objective_history.clear();

  std::vector<Position> net = detail::unflatten(detail::flatten(initial.network.positions), region);
  Eigen::VectorXd x = detail::flatten(net);
  Eigen::VectorXd g;
  Eigen::MatrixXd H;
  const bool need_hessian = method != Solver::bfgs;
  double f = obj.evaluate(net, &g, need_hessian ? &H : nullptr);
  res.objective_history.push_back(f);

  const auto n = x.size();
  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(n, n);
  bool bfgs_scaled = false;
  double radius = opt.initial_radius;
  RefineStatus status = RefineStatus::max_iter;

  while (true) {
    if (n == 0 || g.norm() <= opt.eps) {
      status = RefineStatus::converged;
      break;
    }
    if (res.iterations >= opt.max_iter) {
      status = RefineStatus::max_iter;
      break;
    }

    Eigen::VectorXd x_new;
    std::vector<Position> net_new;
    double f_new = f;

    if (method == Solver::trust_region) {
      const Eigen::MatrixXd B = make_positive_definite(H, opt.hessian_delta);
      bool accepted = false;
      while (!accepted) {
        const Eigen::VectorXd step = detail::dogleg(g, B, radius);
        const double predicted = -(g.dot(step) + 0.5 * step.dot(B * step));
        net_new = detail::unflatten(x + step, region);
        f_new = obj.value(net_new);
        const double ratio = predicted > 0.0 ? (f - f_new) / predicted : -1.0;
        if (ratio < 0.25) {
          radius *= 0.25;
        } else if (ratio > 0.75 && step.norm() >= 0.99 * radius) {
          radius = std::min(2.0 * radius, opt.max_radius);
        }
        if (ratio > 1e-4 && f_new <= f) {
          accepted = true;
        } else if (radius < opt.min_step) {
          break;
        }
      }
      if (!accepted) {
        status = RefineStatus::trust_region_collapse;
        break;
      }
    } else {
      Eigen::VectorXd dir;
      if (method == Solver::newton) {
        dir = -make_positive_definite(H, opt.hessian_delta).llt().solve(g);
      } else {
        dir = -Hinv * g;
        if (g.dot(dir) >= 0.0) {
          Hinv.setIdentity();
          dir = -g;
        }
      }
      const double slope = g.dot(dir);
      double t = 1.0;
      bool accepted = false;
      while (t >= opt.min_step) {
        net_new = detail::unflatten(x + t * dir, region);
        f_new = obj.value(net_new);
        if (f_new <= f + opt.armijo_c * t * slope) {
          accepted = true;
          break;
        }
        t *= opt.backtrack;
      }
      if (!accepted) {
        status = RefineStatus::line_search_failure;
        break;
      }
    }

    x_new = detail::flatten(net_new);
    Eigen::VectorXd g_new;
    Eigen::MatrixXd H_new;
    f_new = obj.evaluate(net_new, &g_new, need_hessian ? &H_new : nullptr);

    if (method == Solver::bfgs) {
      const Eigen::VectorXd s = x_new - x;
      const Eigen::VectorXd y = g_new - g;
      const double sy = s.dot(y);
      if (sy > 1e-12 * s.norm() * y.norm()) {
        if (!bfgs_scaled) {
          Hinv = (sy / y.squaredNorm()) * Eigen::MatrixXd::Identity(n, n);
          bfgs_scaled = true;
        }
        const double rho = 1.0 / sy;
        const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
        Hinv = (I - rho * s * y.transpose()) * Hinv * (I - rho * y * s.transpose()) +
               rho * s * s.transpose();
      }
    }

    x = std::move(x_new);
    net = std::move(net_new);
    f = f_new;
    g = std::move(g_new);
    if (need_hessian) H = std::move(H_new);
    ++res.iterations;
    res.objective_history.push_back(f);
  }

  res.network.positions = net;
  res.final_gradient_norm = g.size() ? g.norm() : 0.0;
  res.status = status;
  res.nu_final = std::exp(-f);
  return res;
}

}  // namespace linecover
