#pragma once

// Green's function of simple random walk killed on leaving a finite set,
// by dense linear solve and, for boxes, by the sine eigenbasis.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gffx/lattice.hpp"

namespace gffx {

inline constexpr std::size_t kDenseSiteBudget = 8000;

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// g_Lambda(alpha, beta) for alpha, beta in Lambda; matrix rows follow domain order.
struct DirichletGreen {
  SiteSet domain;
  Eigen::MatrixXd matrix;

  std::size_t size() const { return domain.size(); }

  /// max |((I - P_Lambda) G - I)_{ij}|
  double identity_residual() const {
    const auto m = transition_complement(domain);
    return (m * matrix - Eigen::MatrixXd::Identity(size(), size())).cwiseAbs().maxCoeff();
  }

  /// I - P restricted to `sites`.
  static Eigen::MatrixXd transition_complement(const SiteSet& sites) {
    const std::size_t n = sites.size();
    if (n == 0) return {};
    const double step = 1.0 / (2.0 * static_cast<double>(sites.front().dim()));
    SiteMap<std::size_t> index;
    for (std::size_t i = 0; i < n; ++i) index.emplace(sites[i], i);
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& q : neighbors(sites[i])) {
        auto it = index.find(q);
        if (it != index.end()) m(i, it->second) -= step;
      }
    }
    return m;
  }
};

/// Dense solve of (I - P_Lambda) G = I. Lambda must be nonempty with at most
/// kDenseSiteBudget distinct sites.
inline DirichletGreen green_dirichlet(const SiteSet& domain) {
  if (domain.empty()) throw std::invalid_argument("Dirichlet domain must be nonempty");
  if (domain.size() > kDenseSiteBudget)
    throw std::invalid_argument("Dirichlet domain has " + std::to_string(domain.size()) + " sites; dense budget is " +
                                std::to_string(kDenseSiteBudget));
  if (SiteLookup(domain.begin(), domain.end()).size() != domain.size())
    throw std::invalid_argument("Dirichlet domain contains repeated sites");
  const auto m = DirichletGreen::transition_complement(domain);
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw SolverError("Cholesky of I - P_Lambda failed");
  DirichletGreen out{domain, llt.solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(domain.size()),
                                                                  static_cast<Eigen::Index>(domain.size())))};
  out.matrix = 0.5 * (out.matrix + out.matrix.transpose()).eval();
  return out;
}

/// Sine eigenbasis of I - P on the box [0, n-1]^d with zero boundary values:
/// modes prod_j sqrt(2/(n+1)) sin(pi k_j (alpha_j + 1)/(n+1)), k_j in 1..n, with
/// covariance eigenvalues 1 / (1 - (1/d) sum_j cos(pi k_j/(n+1))).
class BoxSpectrum {
 public:
  explicit BoxSpectrum(BoxDomain box) : box_(box) {
    const auto n = static_cast<std::size_t>(box.side());
    const double h = std::numbers::pi / static_cast<double>(n + 1);
    const double norm = std::sqrt(2.0 / static_cast<double>(n + 1));
    basis_ = Eigen::MatrixXd(n, n);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t k = 0; k < n; ++k)
        basis_(a, k) = norm * std::sin(h * static_cast<double>((k + 1) * (a + 1)));
    cosines_.resize(n);
    for (std::size_t k = 0; k < n; ++k) cosines_[k] = std::cos(h * static_cast<double>(k + 1));

    const std::size_t total = box.size();
    const double d = static_cast<double>(box.dim());
    eigen_.resize(total);
    for (std::size_t idx = 0; idx < total; ++idx) {
      const auto k = box.point(idx);
      double s = 0.0;
      for (std::size_t j = 0; j < box.dim(); ++j) s += cosines_[static_cast<std::size_t>(k[j])];
      eigen_[idx] = 1.0 / (1.0 - s / d);
    }
  }

  const BoxDomain& box() const { return box_; }
  const Eigen::MatrixXd& basis() const { return basis_; }
  /// Covariance eigenvalue for mode index (row-major over k - 1).
  double covariance_eigenvalue(std::size_t mode) const { return eigen_[mode]; }

  /// In-place transform values <- (S x S x ... x S) values along every axis.
  void synthesize(std::vector<double>& values) const {
    const auto n = static_cast<std::size_t>(box_.side());
    const std::size_t d = box_.dim();
    std::vector<double> line(n), out(n);
    std::size_t stride = 1;
    for (std::size_t axis = d; axis-- > 0;) {
      const std::size_t block = stride * n;
      for (std::size_t base = 0; base < values.size(); base += block) {
        for (std::size_t off = 0; off < stride; ++off) {
          for (std::size_t i = 0; i < n; ++i) line[i] = values[base + off + i * stride];
          for (std::size_t a = 0; a < n; ++a) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k) acc += basis_(a, k) * line[k];
            out[a] = acc;
          }
          for (std::size_t i = 0; i < n; ++i) values[base + off + i * stride] = out[i];
        }
      }
      stride *= n;
    }
  }

  /// Map i.i.d. standard normals (one per mode) to a zero-boundary field sample.
  void field_from_normals(std::vector<double>& xi) const {
    for (std::size_t i = 0; i < xi.size(); ++i) xi[i] *= std::sqrt(eigen_[i]);
    synthesize(xi);
  }

  /// Covariance g_box(alpha, beta) from the eigen expansion.
  double covariance(const LatticePoint& a, const LatticePoint& b) const {
    double acc = 0.0;
    const std::size_t d = box_.dim();
    for (std::size_t mode = 0; mode < eigen_.size(); ++mode) {
      const auto k = box_.point(mode);
      double prod = eigen_[mode];
      for (std::size_t j = 0; j < d; ++j) {
        const auto kj = static_cast<Eigen::Index>(k[j]);
        prod *= basis_(a[j], kj) * basis_(b[j], kj);
      }
      acc += prod;
    }
    return acc;
  }

  /// Full covariance matrix in box index order.
  Eigen::MatrixXd covariance_matrix() const {
    const std::size_t total = box_.size();
    // columns of the synthesis operator scaled by sqrt(eigenvalue)
    Eigen::MatrixXd f(total, total);
    std::vector<double> col(total);
    for (std::size_t mode = 0; mode < total; ++mode) {
      std::fill(col.begin(), col.end(), 0.0);
      col[mode] = std::sqrt(eigen_[mode]);
      synthesize(col);
      for (std::size_t i = 0; i < total; ++i) f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(mode)) = col[i];
    }
    return f * f.transpose();
  }

 private:
  BoxDomain box_;
  Eigen::MatrixXd basis_;
  std::vector<double> cosines_;
  std::vector<double> eigen_;
};

}  // namespace gffx
