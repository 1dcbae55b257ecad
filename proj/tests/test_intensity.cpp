#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "linecover/intensity.hpp"
#include "support/scenario.hpp"

using namespace linecover;

namespace {

Eigen::MatrixXd one(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }
Eigen::VectorXd vec1(double v) { return Eigen::VectorXd::Constant(1, v); }

Grid small_grid() { return Grid(ReprWindow{0.0, kPi, 3.0}, 6, 5); }

double bisect(double lo, double hi, double (*f)(double)) {
  for (int k = 0; k < 200 && hi - lo > 1e-13; ++k) {
    const double mid = 0.5 * (lo + hi);
    if ((f(lo) > 0) == (f(mid) > 0)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(Grid, DefaultResolutionCoversWindow) {
  const Grid g = scenario::default_grid();
  EXPECT_EQ(g.n_alpha(), 72u);
  EXPECT_EQ(g.n_p(), 29u);
  EXPECT_EQ(g.size(), 2088u);
  EXPECT_NEAR(g.d_alpha(), 2.5 * kPi / 180, 1e-15);
  EXPECT_LE(g.d_p(), 1.0);
  EXPECT_DOUBLE_EQ(g.p_edge(0), -g.window().p_max);
  EXPECT_DOUBLE_EQ(g.p_edge(g.n_p()), g.window().p_max);
  EXPECT_DOUBLE_EQ(g.alpha_edge(g.n_alpha()), kPi);
  for (std::size_t j = 0; j < g.n_p(); ++j) EXPECT_LT(g.p_edge(j), g.p_edge(j + 1));
  EXPECT_NEAR(g.cell_area() * static_cast<double>(g.size()), g.window().area(), 1e-9);
}

TEST(BinCounts, CenterPoint) {
  const Grid g = small_grid();
  const auto y = bin_counts({g.center(13)}, g);
  EXPECT_EQ(y.sum(), 1.0);
  EXPECT_EQ(y[13], 1.0);
}

TEST(BinCounts, InteriorEdgeGoesUp) {
  const Grid g = small_grid();
  const auto y = bin_counts({{g.alpha_edge(2), g.p_edge(3)}}, g);
  EXPECT_EQ(y[static_cast<Eigen::Index>(g.index(2, 3))], 1.0);
  const auto top = bin_counts({{0.1, g.window().p_max}}, g);
  EXPECT_EQ(top[static_cast<Eigen::Index>(g.index(0, g.n_p() - 1))], 1.0);
}

TEST(BinCounts, ConservesPointsAndRejectsOutside) {
  const Grid g = small_grid();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> a(0.0, kPi), p(-3.0, 3.0);
  std::vector<ReprPoint> pts;
  for (int k = 0; k < 100; ++k) pts.push_back({a(rng), p(rng)});
  EXPECT_EQ(bin_counts(pts, g).sum(), 100.0);
  pts.push_back({1.0, 3.5});
  try {
    bin_counts(pts, g);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("point 100"), std::string::npos);
  }
}

TEST(PriorCovariance, Entries) {
  const Grid g = small_grid();
  GpHyper h;
  h.signal_variance = 2.0;
  h.length_scale_alpha = 0.4;
  h.length_scale_p = 1.5;
  const auto K = gp_prior_covariance(g, h);
  EXPECT_DOUBLE_EQ(K(7, 7), 2.0 + h.jitter);
  for (std::size_t i = 0; i < g.size(); i += 7)
    for (std::size_t j = 0; j < g.size(); j += 5) {
      const auto ci = g.center(i), cj = g.center(j);
      const double da = ci.alpha - cj.alpha, dp = ci.p - cj.p;
      const double ref = 2.0 * std::exp(-da * da / (2 * 0.16) - dp * dp / (2 * 2.25)) + (i == j ? h.jitter : 0.0);
      ASSERT_NEAR(K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), ref, 1e-14);
    }
  EXPECT_TRUE(K.isApprox(K.transpose(), 0.0));
  EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(K).info(), Eigen::Success);
}

TEST(PriorCovariance, TwoCellsAndFarCells) {
  const Grid two(ReprWindow{0.0, kPi, 1.0}, 1, 2);
  GpHyper h;
  h.length_scale_p = 1.0;
  const auto K = gp_prior_covariance(two, h);
  EXPECT_NEAR(K(0, 1), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(K(0, 0), 1.0 + 1e-8, 1e-15);

  const Grid wide(ReprWindow{0.0, kPi, 30.0}, 1, 30);
  h.length_scale_p = 0.2;
  const auto Kw = gp_prior_covariance(wide, h);
  EXPECT_LE(Kw(0, 29), 1e-12);
}

TEST(Laplace, FlatPriorRecoversMle) {
  const auto fit = laplace_fit(one(1e12), 0.0, vec1(5.0), vec1(1.0));
  EXPECT_NEAR(fit.mode[0], std::log(5.0), 1e-3);
}

TEST(Laplace, DegeneratePriorPinsMean) {
  for (double y : {0.0, 3.0, 50.0}) {
    const auto fit = laplace_fit(one(1e-12), -0.7, vec1(y), vec1(2.0));
    EXPECT_NEAR(fit.mode[0], -0.7, 1e-6);
  }
}

TEST(Laplace, SingleCellMatchesBisection) {
  const double mu = bisect(-5.0, 5.0, [](double m) { return 3.0 - 2.0 * std::exp(m) - m; });
  const auto fit = laplace_fit(one(1.0), 0.0, vec1(3.0), vec1(2.0));
  EXPECT_NEAR(fit.mode[0], mu, 1e-8);
  EXPECT_LE(fit.gradient_norm, 1e-8);
  // Posterior variance (1 + e exp(mu))^-1.
  EXPECT_NEAR(fit.cov_factor(0, 0) * fit.cov_factor(0, 0), 1.0 / (1.0 + 2.0 * std::exp(mu)), 1e-10);
}

TEST(Laplace, MonotoneObjectiveAndCovarianceIdentity) {
  const Grid g = small_grid();
  GpHyper h;
  h.length_scale_alpha = 0.5;
  h.length_scale_p = 1.0;
  h.jitter = 1e-6;
  const Eigen::VectorXd eta = scenario::draw_gp(g, h, 9).array() + 1.0;
  const Eigen::VectorXd y = scenario::draw_counts(g, eta, 10);
  const auto K = gp_prior_covariance(g, h);
  const auto e = cell_exposure(g);
  const auto fit = laplace_fit(K, 1.0, y, e);
  EXPECT_LE(fit.gradient_norm, 1e-8);
  for (std::size_t k = 1; k < fit.objective_history.size(); ++k) {
    const double prev = fit.objective_history[k - 1];
    EXPECT_GE(fit.objective_history[k], prev - 1e-12 * (1.0 + std::abs(prev)));
  }
  // Sigma (K^-1 + W) = I, multiplied through by K.
  const Eigen::MatrixXd S = fit.cov_factor * fit.cov_factor.transpose();
  const Eigen::VectorXd w = e.array() * fit.mode.array().exp();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(K.rows(), K.cols());
  const Eigen::MatrixXd lhs = S * (I + w.asDiagonal() * K);
  EXPECT_LE((lhs - K).norm() / K.norm(), 1e-6);
  // Stationarity: y - e exp(mu) = K^-1 (mu - beta0).
  const Eigen::VectorXd grad = y.array() - w.array();
  const Eigen::VectorXd prior = K.llt().solve((fit.mode.array() - 1.0).matrix());
  EXPECT_LE((grad - prior).norm(), 1e-4 * std::max(1.0, grad.norm()));
}

TEST(Laplace, NonConvergenceReportsGradient) {
  LaplaceOptions opt;
  opt.max_iter = 1;
  try {
    laplace_fit(one(1.0), 0.0, vec1(40.0), vec1(0.01), opt);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_GT(e.residual(), 1e-8);
  }
}

TEST(Laplace, RejectsBadInput) {
  EXPECT_THROW(laplace_fit(one(1.0), 0.0, vec1(-1.0), vec1(1.0)), InputError);
  EXPECT_THROW(laplace_fit(one(1.0), 0.0, vec1(1.0), vec1(0.0)), InputError);
}

TEST(MeanIntensity, LognormalFormula) {
  IntensityPosterior post;
  post.grid = Grid(ReprWindow{0.0, kPi, 1.0}, 1, 2);
  post.mode = Eigen::Vector2d(0.0, 0.3);
  post.cov_factor = Eigen::Matrix2d::Zero();
  post.cov_factor(0, 0) = std::sqrt(2.0);
  auto rate = posterior_mean_intensity(post);
  EXPECT_NEAR(rate.r[0], std::exp(1.0), 1e-12);
  EXPECT_NEAR(rate.r[1], std::exp(0.3), 1e-12);
  post.collection_periods = 4.0;
  rate = posterior_mean_intensity(post);
  EXPECT_NEAR(rate.r[0], std::exp(1.0) / 4.0, 1e-12);
}

TEST(MeanIntensity, MatchesMonteCarlo) {
  const Grid g(ReprWindow{0.0, kPi, 2.0}, 2, 2);
  GpHyper h;
  h.signal_variance = 0.6;
  h.length_scale_alpha = 1.0;
  h.length_scale_p = 1.0;
  const auto post = fit_intensity(g, Eigen::Vector4d(3, 0, 1, 6), h);
  const Eigen::MatrixXd lam = sample_intensity(post, 1000000, 77);
  const Eigen::VectorXd mc = lam.rowwise().mean();
  const auto rate = posterior_mean_intensity(post);
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(mc[i] / rate.r[i], 1.0, 0.005);
}

TEST(Sampling, ZeroDrawGivesMode) {
  const Grid g = small_grid();
  const auto post = fit_intensity(g, Eigen::VectorXd::Ones(30), GpHyper{});
  const Eigen::MatrixXd z = Eigen::MatrixXd::Zero(30, 1);
  const Eigen::MatrixXd lam = log_intensity_from_normals(post, z).array().exp();
  EXPECT_TRUE(lam.col(0).isApprox(post.mode.array().exp().matrix(), 1e-15));
}

TEST(Sampling, CltBoundAndDeterminism) {
  const Grid g = small_grid();
  const Eigen::VectorXd y = scenario::draw_counts(g, Eigen::VectorXd::Constant(30, 0.5), 4);
  const auto post = fit_intensity(g, y, GpHyper{});
  const std::size_t Z = 100000;
  const Eigen::MatrixXd lam = sample_intensity(post, Z, 5);
  const Eigen::VectorXd mean_log = lam.array().log().matrix().rowwise().mean();
  const Eigen::VectorXd var = post.marginal_variance();
  for (Eigen::Index i = 0; i < 30; ++i) {
    EXPECT_LE(std::abs(mean_log[i] - post.mode[i]), 4.0 * std::sqrt(var[i] / static_cast<double>(Z)));
  }
  const Eigen::MatrixXd again = sample_intensity(post, 50, 5);
  EXPECT_EQ(again, lam.leftCols(50));
  EXPECT_NE(sample_intensity(post, 1, 6)(0, 0), lam(0, 0));
}

TEST(EmpiricalBayes, SingleCandidate) {
  const Grid g = small_grid();
  GpHyper h;
  h.signal_variance = 0.3;
  const auto sel = empirical_bayes_select(g, Eigen::VectorXd::Ones(30), {h});
  EXPECT_EQ(sel.best.signal_variance, 0.3);
  EXPECT_EQ(sel.log_evidence.size(), 1u);
}

TEST(EmpiricalBayes, PicksLargerEvidence) {
  const Grid g = Grid::uniform(ReprWindow{0.0, kPi, 8.0}, 5.0 * kPi / 180, 1.0);
  GpHyper truth;
  truth.signal_variance = 1.5;
  truth.length_scale_alpha = 0.3;
  truth.length_scale_p = 3.0;
  const Eigen::VectorXd eta = scenario::draw_gp(g, truth, 31).array() + 1.0;
  const Eigen::VectorXd y = scenario::draw_counts(g, eta, 32);
  GpHyper wrong = truth;
  wrong.length_scale_alpha = 0.03;
  wrong.length_scale_p = 0.3;
  const auto sel = empirical_bayes_select(g, y, {wrong, truth});
  EXPECT_GT(sel.log_evidence[1], sel.log_evidence[0]);
  EXPECT_EQ(sel.best.length_scale_p, truth.length_scale_p);
}

TEST(EmpiricalBayes, RecoversLengthScalesWithinNeighbours) {
  const Grid g = Grid::uniform(ReprWindow{0.0, kPi, 8.0}, 5.0 * kPi / 180, 1.0);
  GpHyper truth;
  truth.signal_variance = 1.0;
  truth.length_scale_alpha = 0.35;
  truth.length_scale_p = 2.0;
  const Eigen::VectorXd eta = scenario::draw_gp(g, truth, 41).array() + 1.5;
  const Eigen::VectorXd y = scenario::draw_counts(g, eta, 42);
  const std::vector<double> la = {0.0875, 0.175, 0.35, 0.7, 1.4};
  const std::vector<double> lp = {0.5, 1.0, 2.0, 4.0, 8.0};
  std::vector<GpHyper> grid;
  for (double a : la)
    for (double p : lp) {
      GpHyper h = truth;
      h.length_scale_alpha = a;
      h.length_scale_p = p;
      grid.push_back(h);
    }
  const auto sel = empirical_bayes_select(g, y, grid);
  EXPECT_GE(sel.best.length_scale_alpha, 0.175 - 1e-12);
  EXPECT_LE(sel.best.length_scale_alpha, 0.7 + 1e-12);
  EXPECT_GE(sel.best.length_scale_p, 1.0 - 1e-12);
  EXPECT_LE(sel.best.length_scale_p, 4.0 + 1e-12);
}

TEST(EmpiricalBayes, TieKeepsFirst) {
  const Grid g = small_grid();
  GpHyper a, b;
  a.signal_variance = 2.0;
  b.signal_variance = 2.0;
  a.length_scale_p = b.length_scale_p = 1.0;
  // Identical candidates tie and the first one is kept.
  const auto sel = empirical_bayes_select(g, Eigen::VectorXd::Zero(30), {a, b});
  EXPECT_EQ(sel.best.signal_variance, 2.0);
  EXPECT_EQ(sel.log_evidence[0], sel.log_evidence[1]);
}
