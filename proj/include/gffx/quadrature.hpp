#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace gffx {

/// Gauss-Legendre rule on [-1, 1], nodes by Newton iteration on P_n.
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendre(std::size_t n) : nodes(n), weights(n) {
    if (n == 0) throw std::invalid_argument("Gauss-Legendre order must be positive");
    const std::size_t half = (n + 1) / 2;
    for (std::size_t i = 0; i < half; ++i) {
      double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (std::size_t k = 2; k <= n; ++k) {
          const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
          p0 = p1;
          p1 = pk;
        }
        if (n == 1) {
          p1 = x;
          p0 = 1.0;
        }
        dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      // recompute derivative at the converged node
      double p0 = 1.0, p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) {
        p1 = x;
        p0 = 1.0;
      }
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      const double w = 2.0 / ((1.0 - x * x) * dp * dp);
      nodes[i] = -x;
      nodes[n - 1 - i] = x;
      weights[i] = w;
      weights[n - 1 - i] = w;
    }
    if (n == 1) {
      nodes[0] = 0.0;
      weights[0] = 2.0;
    }
  }

  std::size_t size() const { return nodes.size(); }

  /// Nodes and weights mapped to [a, b].
  GaussLegendre mapped(double a, double b) const {
    GaussLegendre r(*this);
    const double h = 0.5 * (b - a), c = 0.5 * (b + a);
    for (std::size_t i = 0; i < size(); ++i) {
      r.nodes[i] = c + h * nodes[i];
      r.weights[i] = h * weights[i];
    }
    return r;
  }
};

}  // namespace gffx
