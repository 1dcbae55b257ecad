#pragma once

// Reference computations written independently of the library's quadrature.

#include <cmath>
#include <functional>

#include "linecover/linecover.hpp"

namespace oracle {

// Expected number of undetected lines when each cell's rate is spread
// uniformly over the cell: sum_i r_i * integral over the cell of
// prod_j (1 - rho exp(-d_j^2 / sigma)), with a k x k midpoint rule per cell.
inline double subcell_undetected(const linecover::SensorNetwork& net, const linecover::RatePerPeriod& rate,
                                 const linecover::Grid& grid, const linecover::SensorSpec& spec, int k = 16) {
  double total = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double r = rate.r[static_cast<Eigen::Index>(i)];
    if (r == 0.0) continue;
    const double a0 = grid.alpha_edge(grid.alpha_index(i)), p0 = grid.p_edge(grid.p_index(i));
    const double ha = grid.d_alpha() / k, hp = grid.d_p() / k;
    double s = 0.0;
    for (int u = 0; u < k; ++u) {
      const double al = a0 + (u + 0.5) * ha;
      const double c = std::cos(al), sn = std::sin(al);
      for (int v = 0; v < k; ++v) {
        const double p = p0 + (v + 0.5) * hp;
        double miss = 1.0;
        for (const auto& a : net.positions) {
          const double d = p - (a.x * c + a.y * sn);
          miss *= 1.0 - spec.rho * std::exp(-d * d / spec.sigma_l);
        }
        s += miss;
      }
    }
    total += r * s * ha * hp;
  }
  return total;
}

// Composite Simpson rule on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
  return s * h / 3.0;
}

}  // namespace oracle
