#pragma once

// Exact samplers for the three laws of the field:
//  * infinite-volume law restricted to a finite window (dense Cholesky of g),
//  * zero boundary values outside a box (sine eigenbasis),
//  * conditional law given values on K (harmonic drift + killed fluctuation).
// Every draw is a pure function of (inputs, seed, stream index).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "gffx/dirichlet.hpp"
#include "gffx/green.hpp"
#include "gffx/hitting.hpp"
#include "gffx/lattice.hpp"
#include "gffx/rng.hpp"

namespace gffx {

enum class Law { InfiniteWindow, DirichletBox, Conditional, IidControl };

inline std::string_view law_name(Law law) {
  switch (law) {
    case Law::InfiniteWindow: return "infinite-window";
    case Law::DirichletBox: return "dirichlet-box";
    case Law::Conditional: return "conditional";
    case Law::IidControl: return "iid-control";
  }
  return "unknown";
}

inline Law parse_law(std::string_view name) {
  for (Law l : {Law::InfiniteWindow, Law::DirichletBox, Law::Conditional, Law::IidControl})
    if (law_name(l) == name) return l;
  throw std::invalid_argument("unknown law '" + std::string(name) + "'");
}

struct FieldSample {
  SiteSet sites;
  std::vector<double> values;
  Law law = Law::InfiniteWindow;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

class NotPositiveDefinite : public std::runtime_error {
 public:
  NotPositiveDefinite(const std::string& what, double min_pivot) : std::runtime_error(what), min_pivot_(min_pivot) {}
  double min_pivot() const { return min_pivot_; }

 private:
  double min_pivot_;
};

inline constexpr double kMinPivot = 1e-10;

namespace detail {

/// Lower Cholesky factor; fails (no regularisation) if a pivot falls below min_pivot.
inline Eigen::MatrixXd cholesky_or_throw(const Eigen::MatrixXd& cov, double min_pivot, std::string_view what) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite(std::string(what) + " covariance is not positive definite", 0.0);
  Eigen::MatrixXd l = llt.matrixL();
  const double pivot = l.diagonal().array().square().minCoeff();
  if (pivot < min_pivot)
    throw NotPositiveDefinite(std::string(what) + " covariance has minimum Cholesky pivot " + std::to_string(pivot) +
                                  " below " + std::to_string(min_pivot) + "; tighten quad_tol",
                              pivot);
  return l;
}

inline void check_distinct(const SiteSet& sites, std::string_view what) {
  if (SiteLookup(sites.begin(), sites.end()).size() != sites.size())
    throw std::invalid_argument(std::string(what) + " contains repeated sites");
}

}  // namespace detail

/// Centered Gaussian on a finite window with covariance g(alpha - beta).
class InfiniteWindowSampler {
 public:
  InfiniteWindowSampler(SiteSet sites, const GreenTable& green, double min_pivot = kMinPivot)
      : sites_(std::move(sites)) {
    if (sites_.empty()) throw std::invalid_argument("window must be nonempty");
    if (sites_.size() > kDenseSiteBudget)
      throw std::invalid_argument("window of " + std::to_string(sites_.size()) + " sites exceeds dense budget");
    detail::check_distinct(sites_, "window");
    const auto n = static_cast<Eigen::Index>(sites_.size());
    Eigen::MatrixXd cov(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j <= i; ++j) cov(i, j) = cov(j, i) = green.between(sites_[i], sites_[j]);
    factor_ = detail::cholesky_or_throw(cov, min_pivot, "infinite-window");
  }

  const SiteSet& sites() const { return sites_; }
  std::size_t size() const { return sites_.size(); }
  const Eigen::MatrixXd& factor() const { return factor_; }

  void draw(RandomStream& rng, Eigen::VectorXd& out) const {
    Eigen::VectorXd xi(factor_.rows());
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = rng.normal();
    out.noalias() = factor_.triangularView<Eigen::Lower>() * xi;
  }

  FieldSample sample(std::uint64_t seed, std::uint64_t stream = 0) const {
    RandomStream rng(seed, stream);
    Eigen::VectorXd v;
    draw(rng, v);
    return {sites_, std::vector<double>(v.data(), v.data() + v.size()), Law::InfiniteWindow, seed, stream};
  }

 private:
  SiteSet sites_;
  Eigen::MatrixXd factor_;
};

inline FieldSample sample_infinite_window(const SiteSet& window, const GreenTable& green, std::uint64_t seed,
                                          std::uint64_t stream = 0) {
  return InfiniteWindowSampler(window, green).sample(seed, stream);
}

/// Zero-boundary field on [0, n-1]^d via the sine eigenbasis. Values are in
/// BoxDomain index order.
class DirichletBoxSampler {
 public:
  explicit DirichletBoxSampler(BoxDomain box) : spectrum_(box) {}

  const BoxDomain& box() const { return spectrum_.box(); }
  const BoxSpectrum& spectrum() const { return spectrum_; }

  void draw(RandomStream& rng, std::vector<double>& out) const {
    out.resize(box().size());
    rng.fill_normal(out);
    spectrum_.field_from_normals(out);
  }

  FieldSample sample(std::uint64_t seed, std::uint64_t stream = 0) const {
    RandomStream rng(seed, stream);
    FieldSample s{box().sites(), {}, Law::DirichletBox, seed, stream};
    draw(rng, s.values);
    return s;
  }

 private:
  BoxSpectrum spectrum_;
};

inline FieldSample sample_box_dirichlet(const BoxDomain& box, std::uint64_t seed, std::uint64_t stream = 0) {
  return DirichletBoxSampler(box).sample(seed, stream);
}

/// phi = psi + mu on a window of U = Z^d \ K, given phi on K.
struct ConditionalDecomposition {
  SiteSet conditioning_set;
  std::vector<double> conditioning_values;
  std::vector<double> drift;
  FieldSample fluctuation;
  std::vector<double> field;
};

/// Conditional sampler for a fixed (K, window). The drift map
///   mu_alpha = sum_beta P_alpha(H_K < inf, S_{H_K} = beta) phi_beta
/// and the killed covariance
///   g_U(alpha, beta) = g(alpha - beta) - sum_gamma P_alpha(S_{H_K} = gamma) g(gamma - beta)
/// are computed once; each draw is then a matrix-vector product plus a
/// Cholesky draw.
class ConditionalSampler {
 public:
  ConditionalSampler(SiteSet k, SiteSet window, const GreenTable& green, const HittingOptions& opt = {},
                     double min_pivot = kMinPivot)
      : k_(std::move(k)), window_(std::move(window)) {
    if (k_.empty()) throw std::invalid_argument("conditioning set K must be nonempty");
    if (window_.empty()) throw std::invalid_argument("window must be nonempty");
    if (window_.size() > kDenseSiteBudget) throw std::invalid_argument("window exceeds dense budget");
    detail::check_distinct(k_, "K");
    detail::check_distinct(window_, "window");
    const SiteLookup klook(k_.begin(), k_.end());
    for (const auto& a : window_)
      if (klook.contains(a)) throw std::invalid_argument("window site " + a.to_string() + " lies in K");

    hitting_ = hitting_distributions(window_, k_, opt);
    const auto nw = static_cast<Eigen::Index>(window_.size());
    const auto nk = static_cast<Eigen::Index>(k_.size());
    harmonic_ = Eigen::MatrixXd(nw, nk);
    for (Eigen::Index i = 0; i < nw; ++i)
      for (Eigen::Index t = 0; t < nk; ++t) harmonic_(i, t) = hitting_[static_cast<std::size_t>(i)].weights[t];

    Eigen::MatrixXd gkw(nk, nw);
    for (Eigen::Index t = 0; t < nk; ++t)
      for (Eigen::Index j = 0; j < nw; ++j) gkw(t, j) = green.between(k_[t], window_[j]);
    Eigen::MatrixXd cov(nw, nw);
    for (Eigen::Index i = 0; i < nw; ++i)
      for (Eigen::Index j = 0; j < nw; ++j) cov(i, j) = green.between(window_[i], window_[j]);
    cov -= harmonic_ * gkw;
    killed_cov_ = 0.5 * (cov + cov.transpose());
    factor_ = detail::cholesky_or_throw(killed_cov_, min_pivot, "killed");
  }

  const SiteSet& conditioning_set() const { return k_; }
  const SiteSet& window() const { return window_; }
  const std::vector<HittingDistribution>& hitting() const { return hitting_; }
  /// Rows: window sites; columns: K sites.
  const Eigen::MatrixXd& harmonic_measure() const { return harmonic_; }
  /// Covariance of the fluctuation on the window, g_U restricted to it.
  const Eigen::MatrixXd& killed_covariance() const { return killed_cov_; }

  Eigen::VectorXd drift(const Eigen::VectorXd& k_values) const {
    if (k_values.size() != harmonic_.cols()) throw std::invalid_argument("K values size mismatch");
    return harmonic_ * k_values;
  }

  void draw_fluctuation(RandomStream& rng, Eigen::VectorXd& out) const {
    Eigen::VectorXd xi(factor_.rows());
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = rng.normal();
    out.noalias() = factor_.triangularView<Eigen::Lower>() * xi;
  }

  ConditionalDecomposition sample(const std::vector<double>& k_values, std::uint64_t seed,
                                  std::uint64_t stream = 0) const {
    if (k_values.size() != k_.size()) throw std::invalid_argument("K values size mismatch");
    for (double v : k_values)
      if (!std::isfinite(v)) throw std::invalid_argument("K values must be finite");
    const Eigen::Map<const Eigen::VectorXd> kv(k_values.data(), static_cast<Eigen::Index>(k_values.size()));
    const Eigen::VectorXd mu = drift(kv);
    RandomStream rng(seed, stream);
    Eigen::VectorXd psi;
    draw_fluctuation(rng, psi);
    ConditionalDecomposition out;
    out.conditioning_set = k_;
    out.conditioning_values = k_values;
    out.drift.assign(mu.data(), mu.data() + mu.size());
    out.fluctuation = {window_, std::vector<double>(psi.data(), psi.data() + psi.size()), Law::DirichletBox, seed,
                       stream};
    out.field.resize(window_.size());
    for (std::size_t i = 0; i < window_.size(); ++i) out.field[i] = out.fluctuation.values[i] + out.drift[i];
    return out;
  }

 private:
  SiteSet k_;
  SiteSet window_;
  std::vector<HittingDistribution> hitting_;
  Eigen::MatrixXd harmonic_;
  Eigen::MatrixXd killed_cov_;
  Eigen::MatrixXd factor_;
};

inline ConditionalDecomposition sample_conditional(const SiteSet& k, const std::vector<double>& k_values,
                                                   const SiteSet& window, const GreenTable& green, std::uint64_t seed,
                                                   std::uint64_t stream = 0) {
  return ConditionalSampler(k, window, green).sample(k_values, seed, stream);
}

/// i.i.d. N(0, variance) control field of a given size.
inline void draw_iid(RandomStream& rng, double variance, std::vector<double>& out) {
  const double sd = std::sqrt(variance);
  for (auto& v : out) v = sd * rng.normal();
}

}  // namespace gffx
