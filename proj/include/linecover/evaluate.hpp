#pragma once

// Evaluation of placements: Monte Carlo void probability under the posterior,
// the Jensen gap against the closed-form bound, a trajectory-level detection
// simulator and an exhaustive optimum for small instances.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "linecover/error.hpp"
#include "linecover/intensity.hpp"
#include "linecover/parallel.hpp"
#include "linecover/placement.hpp"
#include "linecover/sensing.hpp"

namespace linecover {

struct VoidEstimate {
  double mean = 0.0;
  double std_err = 0.0;
  std::size_t Z = 0;
  std::uint64_t seed = 0;
};

struct GapReport {
  VoidEstimate void_mc;
  double void_approx = 0.0;
  double gap = 0.0;  // void_mc.mean - void_approx
};

namespace detail {

inline VoidEstimate summarize(const Eigen::VectorXd& values, std::uint64_t seed) {
  VoidEstimate est;
  est.Z = static_cast<std::size_t>(values.size());
  est.seed = seed;
  double sum = 0.0;
  for (Eigen::Index k = 0; k < values.size(); ++k) sum += values[k];
  est.mean = sum / static_cast<double>(values.size());
  // Identical samples (a degenerate posterior) give an exact zero rather than rounding noise.
  if (values.size() > 1 && values.maxCoeff() > values.minCoeff()) {
    double ss = 0.0;
    for (Eigen::Index k = 0; k < values.size(); ++k) {
      const double d = values[k] - est.mean;
      ss += d * d;
    }
    const double var = ss / static_cast<double>(values.size() - 1);
    est.std_err = std::sqrt(var / static_cast<double>(values.size()));
  }
  return est;
}

}  // namespace detail

// Per-sample void probabilities exp(-sum_i area * lambda~_k,i * pi_i / T_c),
// one column per network, using common posterior samples for every network.
inline Eigen::MatrixXd void_samples(const std::vector<SensorNetwork>& nets, const IntensityPosterior& post,
                                    const SensorSpec& spec, std::size_t Z, std::uint64_t seed,
                                    std::size_t block = 256) {
  if (Z == 0) throw InputError("void_mc: Z must be at least 1");
  const Grid& grid = post.grid;
  RatePerPeriod unit;
  unit.r = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(grid.size()));
  const ThinningObjective obj(grid, unit, spec);
  const auto n = static_cast<Eigen::Index>(grid.size());
  const auto nn = static_cast<Eigen::Index>(nets.size());
  Eigen::MatrixXd weights(n, nn);
  for (Eigen::Index c = 0; c < nn; ++c) {
    const auto pi = obj.failure(nets[static_cast<std::size_t>(c)].positions);
    for (Eigen::Index i = 0; i < n; ++i) {
      weights(i, c) = grid.cell_area() * pi[static_cast<std::size_t>(i)] / post.collection_periods;
    }
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(Z), nn);
  const std::size_t blocks = (Z + block - 1) / block;
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t first = b * block;
    const std::size_t count = std::min(block, Z - first);
    Eigen::MatrixXd z(n, static_cast<Eigen::Index>(count));
    standard_normal_block(z, seed, first);
    const Eigen::MatrixXd lam = log_intensity_from_normals(post, z).array().exp();
    const Eigen::MatrixXd x = lam.transpose() * weights;  // count x nets
    out.middleRows(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count)) =
        (-x.array()).exp().matrix();
  });
  return out;
}

inline std::vector<VoidEstimate> void_mc_batch(const std::vector<SensorNetwork>& nets,
                                               const IntensityPosterior& post, const SensorSpec& spec,
                                               std::size_t Z, std::uint64_t seed) {
  const Eigen::MatrixXd v = void_samples(nets, post, spec, Z, seed);
  std::vector<VoidEstimate> out;
  for (Eigen::Index c = 0; c < v.cols(); ++c) out.push_back(detail::summarize(v.col(c), seed));
  return out;
}

inline VoidEstimate void_mc(const SensorNetwork& net, const IntensityPosterior& post, const SensorSpec& spec,
                            std::size_t Z = 10000, std::uint64_t seed = 0) {
  return void_mc_batch({net}, post, spec, Z, seed).front();
}

inline std::vector<GapReport> jensens_gap_batch(const std::vector<SensorNetwork>& nets,
                                                const IntensityPosterior& post, const SensorSpec& spec,
                                                std::size_t Z, std::uint64_t seed) {
  const RatePerPeriod rate = posterior_mean_intensity(post);
  const auto mc = void_mc_batch(nets, post, spec, Z, seed);
  std::vector<GapReport> out;
  for (std::size_t c = 0; c < nets.size(); ++c) {
    GapReport r;
    r.void_mc = mc[c];
    r.void_approx = void_approx(nets[c], rate, post.grid, spec);
    r.gap = r.void_mc.mean - r.void_approx;
    out.push_back(r);
  }
  return out;
}

inline GapReport jensens_gap(const SensorNetwork& net, const IntensityPosterior& post, const SensorSpec& spec,
                             std::size_t Z = 10000, std::uint64_t seed = 0) {
  return jensens_gap_batch({net}, post, spec, Z, seed).front();
}

struct DetectionEstimate {
  double void_prob = 1.0;
  double std_err = 0.0;
  std::size_t trials = 0;
  std::size_t successes = 0;
};

// Realizes the line process trial by trial: Poisson(sum_i area * r_i) lines,
// each placed in cell i with probability proportional to r_i and uniformly
// inside it (equivalent in law to independent Poisson counts per cell), then
// one Bernoulli(gamma_C) detection draw per sensor. A trial succeeds iff every
// line is detected by at least one sensor.
inline DetectionEstimate simulate_detection(const SensorNetwork& net, const RatePerPeriod& rate,
                                            const Grid& grid, const SensorSpec& spec, std::size_t trials,
                                            std::uint64_t seed) {
  if (trials == 0) throw InputError("simulate_detection: trials must be at least 1");
  spec.validate();
  const std::size_t n = grid.size();
  if (static_cast<std::size_t>(rate.r.size()) != n) throw InputError("simulate_detection: rate/grid mismatch");
  std::vector<double> cumulative(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = rate.r[static_cast<Eigen::Index>(i)];
    if (r < 0.0) throw InputError("simulate_detection: negative rate");
    total += grid.cell_area() * r;
    cumulative[i] = total;
  }

  constexpr std::size_t chunk = 4096;
  const std::size_t chunks = (trials + chunk - 1) / chunk;
  std::vector<std::size_t> successes(chunks, 0);
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t lo = c * chunk, hi = std::min(trials, lo + chunk);
    std::size_t ok = 0;
    for (std::size_t t = lo; t < hi; ++t) {
      std::mt19937_64 rng(mix_seed(seed, t));
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      bool all_detected = true;
      if (total > 0.0) {
        const auto lines = std::poisson_distribution<long>(total)(rng);
        for (long k = 0; k < lines && all_detected; ++k) {
          const double u = unif(rng) * total;
          auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
          if (it == cumulative.end()) --it;
          const auto cell = static_cast<std::size_t>(it - cumulative.begin());
          const std::size_t ia = grid.alpha_index(cell), ip = grid.p_index(cell);
          const ReprPoint l{grid.alpha_edge(ia) + unif(rng) * grid.d_alpha(),
                            grid.p_edge(ip) + unif(rng) * grid.d_p()};
          bool detected = false;
          for (const auto& a : net.positions) {
            if (unif(rng) < gamma_repr(l, a, spec)) detected = true;
          }
          all_detected = detected;
        }
      }
      if (all_detected) ++ok;
    }
    successes[c] = ok;
  });

  DetectionEstimate est;
  est.trials = trials;
  for (auto s : successes) est.successes += s;
  est.void_prob = static_cast<double>(est.successes) / static_cast<double>(trials);
  est.std_err = std::sqrt(est.void_prob * (1.0 - est.void_prob) / static_cast<double>(trials));
  return est;
}

struct OptimalPlacement {
  SensorNetwork network;
  double nu = 0.0;
  double undetected = 0.0;
  std::size_t evaluated = 0;
};

// Exhaustive search over multisets of M candidates (greedy may reuse a
// location, so the optimum is taken over the same feasible set).
inline OptimalPlacement brute_force_optimal(std::size_t M, const CandidateSet& candidates,
                                            const RatePerPeriod& rate, const Grid& grid,
                                            const SensorSpec& spec, double budget = 1e6) {
  const std::size_t W = candidates.positions.size();
  if (W == 0) throw InputError("brute_force_optimal: empty candidate set");
  // C(W + M - 1, M)
  double combos = 1.0;
  for (std::size_t k = 1; k <= M; ++k) combos = combos * static_cast<double>(W + M - k) / static_cast<double>(k);
  if (combos > budget) {
    std::ostringstream msg;
    msg << "brute_force_optimal: " << combos << " combinations exceed the budget of " << budget;
    throw InputError(msg.str());
  }
  const ThinningObjective obj(grid, rate, spec);
  const std::size_t n = obj.cells();
  std::vector<double> miss(W * n);
  for (std::size_t j = 0; j < W; ++j)
    for (std::size_t i = 0; i < n; ++i) miss[j * n + i] = 1.0 - obj.gamma(i, candidates.positions[j]);

  OptimalPlacement best;
  best.undetected = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> idx(M, 0);
  while (true) {
    double u = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double pi = 1.0;
      for (std::size_t s = 0; s < M; ++s) pi *= miss[idx[s] * n + i];
      u += obj.weights()[i] * pi;
    }
    ++best.evaluated;
    if (u < best.undetected) {
      best.undetected = u;
      best.network.positions.clear();
      for (auto j : idx) best.network.positions.push_back(candidates.positions[j]);
    }
    // Next non-decreasing index tuple.
    std::size_t s = M;
    while (s > 0 && idx[s - 1] == W - 1) --s;
    if (s == 0) break;
    ++idx[s - 1];
    for (std::size_t t = s; t < M; ++t) idx[t] = idx[s - 1];
  }
  best.nu = std::exp(-best.undetected);
  return best;
}

}  // namespace linecover
