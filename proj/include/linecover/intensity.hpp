#pragma once

// Log-Gaussian Cox process posterior on a regular grid over the
// representation-space window.
//
// Model: y_i ~ Poisson(e_i * exp(eta_i)),  eta ~ N(beta0, K), with K a separable
// squared-exponential kernel over (alpha, p). The posterior over eta is replaced
// by its Laplace approximation N(mu, Sigma), Sigma = (K^-1 + W)^-1,
// W = diag(e_i * exp(mu_i)).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "linecover/error.hpp"
#include "linecover/geometry.hpp"
#include "linecover/parallel.hpp"

namespace linecover {

// Uniform tensor grid over a ReprWindow, cells indexed alpha-major:
// index = ia * n_p + ip.
class Grid {
 public:
  Grid() = default;

  // Cell counts are the smallest that keep each step at or below the requested
  // one; steps are then shrunk so the edges span the window exactly.
  static Grid uniform(const ReprWindow& w, double alpha_step, double p_step) {
    if (!(alpha_step > 0.0) || !(p_step > 0.0)) throw InputError("Grid: steps must be positive");
    if (!(w.p_max > 0.0) || !(w.alpha_max > w.alpha_min)) throw InputError("Grid: empty window");
    const auto count = [](double width, double step) {
      return static_cast<std::size_t>(std::max(1.0, std::ceil(width / step - 1e-9)));
    };
    return Grid(w, count(w.alpha_max - w.alpha_min, alpha_step), count(2.0 * w.p_max, p_step));
  }

  Grid(const ReprWindow& w, std::size_t n_alpha, std::size_t n_p)
      : window_(w),
        n_alpha_(n_alpha),
        n_p_(n_p),
        d_alpha_((w.alpha_max - w.alpha_min) / static_cast<double>(n_alpha)),
        d_p_(2.0 * w.p_max / static_cast<double>(n_p)) {
    if (n_alpha == 0 || n_p == 0) throw InputError("Grid: need at least one cell per axis");
  }

  const ReprWindow& window() const { return window_; }
  std::size_t n_alpha() const { return n_alpha_; }
  std::size_t n_p() const { return n_p_; }
  std::size_t size() const { return n_alpha_ * n_p_; }
  double d_alpha() const { return d_alpha_; }
  double d_p() const { return d_p_; }
  double cell_area() const { return d_alpha_ * d_p_; }

  double alpha_edge(std::size_t i) const {
    return i == n_alpha_ ? window_.alpha_max : window_.alpha_min + static_cast<double>(i) * d_alpha_;
  }
  double p_edge(std::size_t j) const {
    return j == n_p_ ? window_.p_max : window_.p_min() + static_cast<double>(j) * d_p_;
  }

  std::size_t index(std::size_t ia, std::size_t ip) const { return ia * n_p_ + ip; }
  std::size_t alpha_index(std::size_t cell) const { return cell / n_p_; }
  std::size_t p_index(std::size_t cell) const { return cell % n_p_; }

  ReprPoint center(std::size_t cell) const {
    const std::size_t ia = alpha_index(cell), ip = p_index(cell);
    return {0.5 * (alpha_edge(ia) + alpha_edge(ia + 1)), 0.5 * (p_edge(ip) + p_edge(ip + 1))};
  }

  // Half-open [lo, hi) cells; the top p edge of the window is closed so that
  // tangent lines are kept. Returns nullopt outside the window.
  std::optional<std::size_t> locate(const ReprPoint& l) const {
    if (!(l.alpha >= window_.alpha_min && l.alpha < window_.alpha_max)) return std::nullopt;
    if (!(l.p >= window_.p_min() && l.p <= window_.p_max)) return std::nullopt;
    const std::size_t ia = bucket(l.alpha, n_alpha_, [&](std::size_t i) { return alpha_edge(i); });
    const std::size_t ip = bucket(l.p, n_p_, [&](std::size_t j) { return p_edge(j); });
    return index(ia, ip);
  }

 private:
  template <typename Edge>
  static std::size_t bucket(double v, std::size_t n, Edge edge) {
    const double lo = edge(0), hi = edge(n);
    auto k = static_cast<std::ptrdiff_t>(std::floor((v - lo) / (hi - lo) * static_cast<double>(n)));
    k = std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(n) - 1);
    while (k + 1 < static_cast<std::ptrdiff_t>(n) && v >= edge(static_cast<std::size_t>(k + 1))) ++k;
    while (k > 0 && v < edge(static_cast<std::size_t>(k))) --k;
    return static_cast<std::size_t>(k);
  }

  ReprWindow window_;
  std::size_t n_alpha_ = 1;
  std::size_t n_p_ = 1;
  double d_alpha_ = kPi;
  double d_p_ = 2.0;
};

struct GpHyper {
  double signal_variance = 1.0;                 // sigma_f^2
  double length_scale_alpha = 10.0 * kPi / 180;  // rad
  double length_scale_p = 2.0;                  // km
  std::optional<double> prior_mean;             // beta0; default log(count / |window|)
  double jitter = 1e-8;

  void validate() const {
    if (!(signal_variance > 0.0) || !(length_scale_alpha > 0.0) || !(length_scale_p > 0.0) ||
        !(jitter > 0.0)) {
      throw InputError("GpHyper: variance, length scales and jitter must be positive");
    }
  }
};

inline Eigen::VectorXd bin_counts(const std::vector<ReprPoint>& points, const Grid& grid) {
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto cell = grid.locate(points[k]);
    if (!cell) {
      std::ostringstream msg;
      msg << "bin_counts: point " << k << " (alpha=" << points[k].alpha << ", p=" << points[k].p
          << ") lies outside the window";
      throw InputError(msg.str());
    }
    counts[static_cast<Eigen::Index>(*cell)] += 1.0;
  }
  return counts;
}

inline Eigen::MatrixXd gp_prior_covariance(const Grid& grid, const GpHyper& hyper) {
  hyper.validate();
  const auto n = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd K(n, n);
  const double ia2 = 1.0 / (2.0 * hyper.length_scale_alpha * hyper.length_scale_alpha);
  const double ip2 = 1.0 / (2.0 * hyper.length_scale_p * hyper.length_scale_p);
  // Separable kernel: K = sigma^2 * (A (x) P).
  const auto na = static_cast<Eigen::Index>(grid.n_alpha());
  const auto np = static_cast<Eigen::Index>(grid.n_p());
  Eigen::MatrixXd ka(na, na), kp(np, np);
  for (Eigen::Index i = 0; i < na; ++i)
    for (Eigen::Index j = 0; j < na; ++j) {
      const double d = static_cast<double>(i - j) * grid.d_alpha();
      ka(i, j) = std::exp(-d * d * ia2);
    }
  for (Eigen::Index i = 0; i < np; ++i)
    for (Eigen::Index j = 0; j < np; ++j) {
      const double d = static_cast<double>(i - j) * grid.d_p();
      kp(i, j) = std::exp(-d * d * ip2);
    }
  for (Eigen::Index a = 0; a < na; ++a)
    for (Eigen::Index b = 0; b < na; ++b) {
      const double s = hyper.signal_variance * ka(a, b);
      K.block(a * np, b * np, np, np) = s * kp;
    }
  K.diagonal().array() += hyper.jitter;
  return K;
}

struct LaplaceOptions {
  int max_iter = 100;
  double gradient_tol = 1e-8;
  bool compute_covariance = true;
};

// Mode and covariance of the Laplace approximation for a generic Gaussian prior.
struct LaplaceFit {
  Eigen::VectorXd mode;        // mu
  Eigen::MatrixXd cov_factor;  // lower-triangular L, L L^T = Sigma
  int iterations = 0;
  double gradient_norm = 0.0;
  double log_evidence = 0.0;   // Laplace approximation of log p(y)
  std::vector<double> objective_history;
};

namespace detail {

inline double poisson_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& e,
                             const Eigen::VectorXd& eta) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    s += y[i] * eta[i] - e[i] * std::exp(eta[i]) - std::lgamma(y[i] + 1.0);
  }
  return s;
}

// Cholesky with escalating diagonal jitter for nearly singular input.
inline Eigen::MatrixXd robust_cholesky(Eigen::MatrixXd m) {
  const double scale = std::max(m.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  double extra = 0.0;
  for (int attempt = 0; attempt < 12; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd l = llt.matrixL();
      return l;
    }
    const double next = extra == 0.0 ? 1e-14 * scale : extra * 10.0;
    m.diagonal().array() += next - extra;
    extra = next;
  }
  throw NumericalError("robust_cholesky: matrix is not positive definite", extra);
}

}  // namespace detail

// Damped Newton on  Psi(eta) = sum[y eta - e exp(eta)] - 1/2 (eta-beta0)^T K^-1 (eta-beta0).
// Works in the K-weighted parameterization f = eta - beta0 = K a, so K is never
// inverted.
inline LaplaceFit laplace_fit(const Eigen::MatrixXd& K, double prior_mean, const Eigen::VectorXd& counts,
                              const Eigen::VectorXd& exposure, const LaplaceOptions& opt = {}) {
  const Eigen::Index n = K.rows();
  if (K.cols() != n || counts.size() != n || exposure.size() != n) {
    throw InputError("laplace_fit: dimension mismatch");
  }
  if ((counts.array() < 0.0).any()) throw InputError("laplace_fit: negative count");
  if ((exposure.array() <= 0.0).any()) throw InputError("laplace_fit: exposure must be positive");

  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
  auto eta_of = [&](const Eigen::VectorXd& ff) {
    return (ff.array() + prior_mean).matrix().eval();
  };
  auto objective = [&](const Eigen::VectorXd& ff, const Eigen::VectorXd& aa) {
    return detail::poisson_loglik(counts, exposure, eta_of(ff)) - 0.5 * aa.dot(ff);
  };
  auto gradient = [&](const Eigen::VectorXd& ff) {
    const Eigen::VectorXd eta = eta_of(ff);
    return (counts.array() - exposure.array() * eta.array().exp()).matrix().eval();
  };

  LaplaceFit fit;
  double psi = objective(f, a);
  fit.objective_history.push_back(psi);
  Eigen::VectorXd g = gradient(f);
  double gnorm = (g - a).norm();
  Eigen::LLT<Eigen::MatrixXd> chol_b;
  Eigen::VectorXd sw;

  auto factor_b = [&](const Eigen::VectorXd& ff) {
    const Eigen::VectorXd w = exposure.array() * eta_of(ff).array().exp();
    sw = w.array().sqrt();
    Eigen::MatrixXd B = sw.asDiagonal() * K * sw.asDiagonal();
    B.diagonal().array() += 1.0;
    chol_b.compute(B);
    if (chol_b.info() != Eigen::Success) {
      throw NumericalError("laplace_fit: I + W^1/2 K W^1/2 is not positive definite", gnorm);
    }
    return w;
  };

  int it = 0;
  while (gnorm > opt.gradient_tol) {
    if (it >= opt.max_iter) {
      std::ostringstream msg;
      msg << "laplace_fit: no convergence after " << opt.max_iter
          << " iterations, gradient norm " << gnorm;
      throw NumericalError(msg.str(), gnorm);
    }
    ++it;
    const Eigen::VectorXd w = factor_b(f);
    const Eigen::VectorXd b = w.cwiseProduct(f) + g;
    const Eigen::VectorXd kb = K * b;
    const Eigen::VectorXd c = chol_b.solve(sw.cwiseProduct(kb));
    // f_new = (K^-1 + W)^-1 b = W^-1/2 B^-1 W^1/2 K b, and K^-1 f_new = b - W f_new.
    // This avoids forming K a, which loses all precision when K is very large.
    Eigen::VectorXd f_new, a_new;
    if (sw.minCoeff() > 1e-100) {
      f_new = c.cwiseQuotient(sw);
      a_new = b - w.cwiseProduct(f_new);
    } else {
      a_new = b - sw.cwiseProduct(c);
      f_new = K * a_new;
    }

    // Backtrack until the objective does not decrease. Near the mode the gain of
    // a Newton step is far below the rounding noise of Psi, so decreases within
    // that noise count as no decrease.
    const double slack = 1e-12 * (1.0 + std::abs(psi));
    double t = 1.0;
    Eigen::VectorXd f_t = f_new, a_t = a_new;
    double psi_t = objective(f_t, a_t);
    while (!(psi_t >= psi - slack) && t > 1e-10) {
      t *= 0.5;
      f_t = f + t * (f_new - f);
      a_t = a + t * (a_new - a);
      psi_t = objective(f_t, a_t);
    }
    if (!(psi_t >= psi - slack)) {
      // Objective is flat to rounding; accept the current point.
      break;
    }
    const double prev_gnorm = gnorm;
    f = std::move(f_t);
    a = std::move(a_t);
    psi = psi_t;
    fit.objective_history.push_back(psi);
    g = gradient(f);
    gnorm = (g - a).norm();
    // Stalled at rounding level: the gradient is dominated by cancellation error.
    if (t < 1e-10 && gnorm >= prev_gnorm) break;
  }
  if (gnorm > opt.gradient_tol) {
    std::ostringstream msg;
    msg << "laplace_fit: stalled after " << it << " iterations, gradient norm " << gnorm;
    throw NumericalError(msg.str(), gnorm);
  }

  const Eigen::VectorXd w = factor_b(f);
  const Eigen::MatrixXd LB = chol_b.matrixL();
  fit.mode = eta_of(f);
  fit.iterations = it;
  fit.gradient_norm = gnorm;
  fit.log_evidence = psi - LB.diagonal().array().log().sum();

  if (opt.compute_covariance) {
    // Sigma = K - K W^1/2 B^-1 W^1/2 K = K - V^T V with V = L_B^-1 W^1/2 K.
    Eigen::MatrixXd V = sw.asDiagonal() * K;
    LB.triangularView<Eigen::Lower>().solveInPlace(V);
    Eigen::MatrixXd sigma = K;
    sigma.selfadjointView<Eigen::Lower>().rankUpdate(V.transpose(), -1.0);
    sigma.triangularView<Eigen::StrictlyUpper>() = sigma.transpose();
    fit.cov_factor = detail::robust_cholesky(std::move(sigma));
  }
  return fit;
}

struct IntensityPosterior {
  Grid grid;
  GpHyper hyper;                   // prior_mean always set
  double collection_periods = 1.0; // T_c
  Eigen::VectorXd counts;
  Eigen::VectorXd exposure;
  Eigen::VectorXd mode;            // posterior mean of eta = log lambda
  Eigen::MatrixXd cov_factor;      // lower-triangular, L L^T = Sigma
  int iterations = 0;
  double gradient_norm = 0.0;
  double log_evidence = 0.0;

  Eigen::VectorXd marginal_variance() const {
    return cov_factor.rowwise().squaredNorm();
  }
};

// lambda is a density per unit (alpha, p) area over the whole collection
// period, so the exposure of a cell is its area.
inline Eigen::VectorXd cell_exposure(const Grid& grid) {
  return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(grid.size()), grid.cell_area());
}

inline double default_prior_mean(const Grid& grid, double total_count) {
  return std::log(std::max(total_count, 1.0) / grid.window().area());
}

inline IntensityPosterior fit_intensity(const Grid& grid, const Eigen::VectorXd& counts, GpHyper hyper,
                                        double collection_periods = 1.0,
                                        const LaplaceOptions& opt = {}) {
  if (!(collection_periods > 0.0)) throw InputError("fit_intensity: T_c must be positive");
  if (!hyper.prior_mean) hyper.prior_mean = default_prior_mean(grid, counts.sum());
  const Eigen::VectorXd exposure = cell_exposure(grid);
  const Eigen::MatrixXd K = gp_prior_covariance(grid, hyper);
  LaplaceFit fit = laplace_fit(K, *hyper.prior_mean, counts, exposure, opt);
  IntensityPosterior post;
  post.grid = grid;
  post.hyper = hyper;
  post.collection_periods = collection_periods;
  post.counts = counts;
  post.exposure = exposure;
  post.mode = std::move(fit.mode);
  post.cov_factor = std::move(fit.cov_factor);
  post.iterations = fit.iterations;
  post.gradient_norm = fit.gradient_norm;
  post.log_evidence = fit.log_evidence;
  return post;
}

// Expected targets per unit (alpha, p) area per collection period.
struct RatePerPeriod {
  Eigen::VectorXd r;
  double collection_periods = 1.0;
};

// Lognormal mean exp(mu + Sigma_ii / 2), divided by T_c.
inline RatePerPeriod posterior_mean_intensity(const IntensityPosterior& post) {
  const Eigen::VectorXd var = post.marginal_variance();
  RatePerPeriod rate;
  rate.collection_periods = post.collection_periods;
  rate.r = ((post.mode + 0.5 * var).array().exp() / post.collection_periods).matrix();
  return rate;
}

// Fills `z` (cells x count) with standard normals for samples
// [first, first + count). Sample k draws from its own stream, so the result does
// not depend on how samples are batched.
inline void standard_normal_block(Eigen::MatrixXd& z, std::uint64_t seed, std::size_t first) {
  for (Eigen::Index k = 0; k < z.cols(); ++k) {
    std::mt19937_64 rng(mix_seed(seed, first + static_cast<std::size_t>(k)));
    std::normal_distribution<double> normal;
    for (Eigen::Index i = 0; i < z.rows(); ++i) z(i, k) = normal(rng);
  }
}

// log lambda~ = mu + L z for given normal draws (one column per sample).
inline Eigen::MatrixXd log_intensity_from_normals(const IntensityPosterior& post, const Eigen::MatrixXd& z) {
  Eigen::MatrixXd eta = post.cov_factor.triangularView<Eigen::Lower>() * z;
  eta.colwise() += post.mode;
  return eta;
}

// Z sampled intensity fields lambda~_k = exp(mu + L z_k), one column each.
inline Eigen::MatrixXd sample_intensity(const IntensityPosterior& post, std::size_t Z, std::uint64_t seed) {
  if (Z == 0) throw InputError("sample_intensity: Z must be at least 1");
  Eigen::MatrixXd z(post.mode.size(), static_cast<Eigen::Index>(Z));
  standard_normal_block(z, seed, 0);
  return log_intensity_from_normals(post, z).array().exp();
}

struct HyperSelection {
  GpHyper best;
  std::vector<double> log_evidence;  // per candidate, NaN where the fit failed
  std::vector<std::string> warnings;
};

// Picks the hyperparameters with the largest Laplace evidence; ties go to the
// smallest signal variance.
inline HyperSelection empirical_bayes_select(const Grid& grid, const Eigen::VectorXd& counts,
                                             const std::vector<GpHyper>& candidates,
                                             const LaplaceOptions& base = {}) {
  if (candidates.empty()) throw InputError("empirical_bayes_select: empty hyperparameter grid");
  LaplaceOptions opt = base;
  opt.compute_covariance = false;
  const Eigen::VectorXd exposure = cell_exposure(grid);
  HyperSelection sel;
  sel.log_evidence.assign(candidates.size(), std::numeric_limits<double>::quiet_NaN());
  std::optional<std::size_t> best;
  for (std::size_t h = 0; h < candidates.size(); ++h) {
    GpHyper hyper = candidates[h];
    if (!hyper.prior_mean) hyper.prior_mean = default_prior_mean(grid, counts.sum());
    try {
      const auto fit = laplace_fit(gp_prior_covariance(grid, hyper), *hyper.prior_mean, counts, exposure, opt);
      sel.log_evidence[h] = fit.log_evidence;
    } catch (const Error& e) {
      sel.warnings.push_back("hyper candidate " + std::to_string(h) + " skipped: " + e.what());
      continue;
    }
    const double ev = sel.log_evidence[h];
    if (!best || ev > sel.log_evidence[*best] ||
        (ev == sel.log_evidence[*best] &&
         hyper.signal_variance < candidates[*best].signal_variance)) {
      best = h;
    }
  }
  if (!best) throw NumericalError("empirical_bayes_select: every candidate failed", 0.0);
  sel.best = candidates[*best];
  return sel;
}

}  // namespace linecover
