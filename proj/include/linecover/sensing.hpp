#pragma once

// Isotropic sensor detection model and the network failure probability,
// together with analytic derivatives with respect to sensor positions.
//
//   gamma(zeta, a) = rho * exp(-|zeta - a|^2 / sigma_l)
//
// For a line l, zeta is the foot of the perpendicular from a, so in
// representation space gamma_C(l, a) = rho * exp(-(p - n.a)^2 / sigma_l) with
// n = (cos alpha, sin alpha). sigma_l has units of km^2.

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "linecover/error.hpp"
#include "linecover/geometry.hpp"

namespace linecover {

struct SensorSpec {
  double rho = 0.95;
  double sigma_l = 0.15;  // km^2

  void validate() const {
    if (!(rho >= 0.0 && rho <= 1.0)) throw InputError("SensorSpec: rho must lie in [0, 1]");
    if (!(sigma_l > 0.0)) throw InputError("SensorSpec: sigma_l must be positive");
  }
};

struct SensorNetwork {
  std::vector<Position> positions;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
};

inline double gamma_inertial(const Position& zeta, const Position& a, const SensorSpec& spec) {
  const double dx = zeta.x - a.x, dy = zeta.y - a.y;
  return spec.rho * std::exp(-(dx * dx + dy * dy) / spec.sigma_l);
}

inline double gamma_repr(const ReprPoint& l, const Position& a, const SensorSpec& spec) {
  const double d = normal_offset(a, l);
  return spec.rho * std::exp(-d * d / spec.sigma_l);
}

inline double failure_prob(const ReprPoint& l, std::span<const Position> net, const SensorSpec& spec) {
  double pi = 1.0;
  for (const auto& a : net) pi *= 1.0 - gamma_repr(l, a, spec);
  return pi;
}

inline double failure_prob(const ReprPoint& l, const SensorNetwork& net, const SensorSpec& spec) {
  return failure_prob(l, std::span<const Position>(net.positions), spec);
}

// Per-sensor kernel values and their position derivatives for one line.
struct KernelTerms {
  Eigen::Vector2d normal;        // (cos alpha, sin alpha)
  std::vector<double> gamma;     // gamma_j
  std::vector<double> dgamma;    // scalar s.t. grad gamma_j = dgamma_j * normal
  std::vector<double> d2gamma;   // scalar s.t. hess gamma_j = d2gamma_j * n n^T

  KernelTerms(const ReprPoint& l, std::span<const Position> net, const SensorSpec& spec)
      : normal(std::cos(l.alpha), std::sin(l.alpha)) {
    gamma.reserve(net.size());
    dgamma.reserve(net.size());
    d2gamma.reserve(net.size());
    for (const auto& a : net) {
      const double d = l.p - (a.x * normal.x() + a.y * normal.y());
      const double g = spec.rho * std::exp(-d * d / spec.sigma_l);
      const double u = 2.0 * d / spec.sigma_l;
      gamma.push_back(g);
      dgamma.push_back(g * u);
      d2gamma.push_back(g * (u * u - 2.0 / spec.sigma_l));
    }
  }

  // prod over k not in {skip1, skip2} of (1 - gamma_k). Evaluated directly, so
  // it stays exact when some gamma_k equals 1.
  double product_excluding(std::size_t skip1, std::size_t skip2 = static_cast<std::size_t>(-1)) const {
    double prod = 1.0;
    for (std::size_t k = 0; k < gamma.size(); ++k) {
      if (k != skip1 && k != skip2) prod *= 1.0 - gamma[k];
    }
    return prod;
  }
};

// d pi / d a_j = -prod_{k != j}(1 - gamma_k) * grad gamma_j.
inline Eigen::Vector2d grad_failure(const ReprPoint& l, const SensorNetwork& net, const SensorSpec& spec,
                                    std::size_t j) {
  if (j >= net.size()) throw InputError("grad_failure: sensor index out of range");
  const KernelTerms t(l, net.positions, spec);
  return -t.product_excluding(j) * t.dgamma[j] * t.normal;
}

// Second derivative block d^2 pi / (d a_j d a_k^T).
inline Eigen::Matrix2d hessian_failure(const ReprPoint& l, const SensorNetwork& net, const SensorSpec& spec,
                                       std::size_t j, std::size_t k) {
  if (j >= net.size() || k >= net.size()) throw InputError("hessian_failure: sensor index out of range");
  const KernelTerms t(l, net.positions, spec);
  const Eigen::Matrix2d nn = t.normal * t.normal.transpose();
  if (j == k) return -t.product_excluding(j) * t.d2gamma[j] * nn;
  return t.product_excluding(j, k) * t.dgamma[j] * t.dgamma[k] * nn;
}

}  // namespace linecover
