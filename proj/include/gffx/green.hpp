#pragma once

// Infinite-volume Green's function of simple random walk on Z^d, d >= 3,
// in counting units: g(x) = expected number of visits to x from the origin.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gffx/lattice.hpp"
#include "gffx/quadrature.hpp"

namespace gffx {

class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double achieved) : std::runtime_error(what), achieved_(achieved) {}
  double achieved_error() const { return achieved_; }

 private:
  double achieved_;
};

struct GreenValue {
  double value;
  double error_estimate;
  std::size_t order;
};

namespace detail {

inline double sinc(double x) {
  if (std::abs(x) < 1e-4) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

// One tensor Gauss-Legendre evaluation of the Fourier integral after the axis
// carrying the largest |x_k| has been integrated in closed form:
//   (1/2pi) int cos(p t) / (s - cos t) dt = z^p / sqrt(s^2 - 1),  z = s - sqrt(s^2 - 1).
// The remaining m = d-1 angles are folded onto [0, pi]^m and split into m
// pyramids by which angle is largest; in each, theta_lead = r and the others
// are r*v_k. The Jacobian r^{m-1} cancels the 1/r singularity at theta = 0,
// so the integrand is smooth and the rule converges exponentially.
inline double green_integral(std::int64_t lead, const std::vector<std::int64_t>& rest, const GaussLegendre& rule_r,
                             const GaussLegendre& rule_v) {
  const std::size_t m = rest.size();
  const std::size_t nv = rule_v.size();
  const double p = static_cast<double>(lead);
  std::vector<std::size_t> idx(m > 0 ? m - 1 : 0, 0);
  std::vector<double> theta(m);
  double total = 0.0;

  for (std::size_t pyr = 0; pyr < m; ++pyr) {
    for (std::size_t ir = 0; ir < rule_r.size(); ++ir) {
      const double r = rule_r.nodes[ir];
      const double wr = rule_r.weights[ir];
      const double rpow = std::pow(r, static_cast<double>(m) - 2.0);
      const double s_lead = sinc(0.5 * r);
      const double tau_lead = s_lead * s_lead;
      std::fill(idx.begin(), idx.end(), 0);
      while (true) {
        double tau = tau_lead;
        double w = wr;
        std::size_t k = 0;
        for (std::size_t j = 0; j < m; ++j) {
          if (j == pyr) {
            theta[j] = r;
            continue;
          }
          const double v = rule_v.nodes[idx[k]];
          w *= rule_v.weights[idx[k]];
          ++k;
          theta[j] = r * v;
          const double sc = sinc(0.5 * theta[j]);
          tau += v * v * sc * sc;
        }
        tau *= 0.5;
        const double sigma = r * r * tau;
        const double root_scaled = std::sqrt(tau * (sigma + 2.0));
        double f = rpow / root_scaled;
        if (lead != 0) f *= std::exp(-p * std::log1p(sigma + r * root_scaled));
        for (std::size_t j = 0; j < m; ++j) {
          if (rest[j] != 0) f *= std::cos(static_cast<double>(rest[j]) * theta[j]);
        }
        total += w * f;

        // odometer over the m-1 inner coordinates
        std::size_t pos = 0;
        while (pos < idx.size() && ++idx[pos] == nv) idx[pos++] = 0;
        if (pos == idx.size()) break;
      }
    }
  }
  const double d = static_cast<double>(m + 1);
  return d * total / std::pow(std::numbers::pi, static_cast<double>(m));
}

}  // namespace detail

/// g(x) to absolute tolerance `tol`. The rule order is doubled until two
/// successive estimates agree to tol/4; QuadratureError carries the last
/// difference if that never happens below `max_order`.
inline GreenValue green_infinite_detailed(const LatticePoint& x, double tol = 1e-10, std::size_t max_order = 1024) {
  require_dimension(x.dim());
  if (!(tol > 0)) throw std::invalid_argument("quadrature tolerance must be positive");
  auto c = x.canonical();
  const std::int64_t lead = c[c.dim() - 1];
  std::vector<std::int64_t> rest(c.coords().begin(), c.coords().end() - 1);

  const std::size_t start = 16 + 2 * static_cast<std::size_t>(lead);
  std::size_t n = 8;
  while (n < start) n *= 2;
  double prev = std::nan("");
  double diff = std::numeric_limits<double>::infinity();
  for (; n <= max_order; n *= 2) {
    // the inner coordinates see oscillations only from `rest`; they need
    // fewer nodes than r, which also resolves the z^p boundary layer
    std::int64_t qmax = 0;
    for (auto q : rest) qmax = std::max(qmax, q);
    std::size_t nv = std::min<std::size_t>(n, 8 + 2 * static_cast<std::size_t>(qmax) + n / 4);
    GaussLegendre base_r(n), base_v(nv);
    const double val = detail::green_integral(lead, rest, base_r.mapped(0.0, std::numbers::pi), base_v.mapped(0.0, 1.0));
    if (!std::isnan(prev)) {
      diff = std::abs(val - prev);
      if (diff <= 0.25 * tol) return {val, diff, n};
    }
    prev = val;
  }
  throw QuadratureError("Green's function quadrature for x=" + x.to_string() + " did not reach tolerance " +
                            std::to_string(tol) + "; achieved " + std::to_string(diff),
                        diff);
}

inline double green_infinite(const LatticePoint& x, double tol = 1e-10) { return green_infinite_detailed(x, tol).value; }

inline double green_origin(std::size_t d, double tol = 1e-10) { return green_infinite(LatticePoint(d), tol); }

/// kappa = P_0(no return to 0) = 1 / g(0).
inline double escape_probability(std::size_t d, double tol = 1e-10) { return 1.0 / green_origin(d, tol); }

/// Leading far-field constant: g(x) ~ c_d |x|_2^{2-d}, c_d = d Gamma(d/2 - 1) / (2 pi^{d/2}).
inline double green_far_field_constant(std::size_t d) {
  require_dimension(d);
  const double dd = static_cast<double>(d);
  return dd * std::tgamma(0.5 * dd - 1.0) / (2.0 * std::pow(std::numbers::pi, 0.5 * dd));
}

inline double green_far_field(const LatticePoint& x) {
  return green_far_field_constant(x.dim()) * std::pow(x.norm_2(), 2.0 - static_cast<double>(x.dim()));
}

/// Cached g-values on the l-infinity window of radius R, stored by canonical
/// representative (sorted absolute coordinates). Immutable after construction.
class GreenTable {
 public:
  GreenTable(std::size_t dim, std::int64_t radius, double quad_tol) : dim_(dim), radius_(radius), quad_tol_(quad_tol) {
    require_dimension(dim);
    if (radius < 1) throw std::invalid_argument("Green table radius must be >= 1");
    if (!(quad_tol > 0)) throw std::invalid_argument("quadrature tolerance must be positive");
    std::vector<std::int64_t> c(dim, 0);
    while (true) {
      LatticePoint p(c);
      values_.emplace(p, green_infinite(p, quad_tol));
      // next non-decreasing tuple in [0, R]^d
      std::size_t pos = dim;
      while (pos > 0 && c[pos - 1] == radius) --pos;
      if (pos == 0) break;
      ++c[pos - 1];
      for (std::size_t j = pos; j < dim; ++j) c[j] = c[pos - 1];
    }
    build_dense();
  }

  std::size_t dim() const { return dim_; }
  std::int64_t radius() const { return radius_; }
  double quad_tol() const { return quad_tol_; }
  const std::map<LatticePoint, double>& canonical_values() const { return values_; }

  bool covers(const LatticePoint& x) const { return x.norm_inf() <= radius_; }

  /// g(x); x must lie in the window.
  double operator()(const LatticePoint& x) const {
    if (x.dim() != dim_) throw std::invalid_argument("Green table dimension mismatch");
    if (!covers(x)) throw std::out_of_range("point " + x.to_string() + " outside Green table window");
    std::size_t idx = 0;
    for (std::size_t j = 0; j < dim_; ++j) idx = idx * stride_ + static_cast<std::size_t>(std::llabs(x[j]));
    return dense_[idx];
  }

  /// g(a - b) without forming the difference point.
  double between(const LatticePoint& a, const LatticePoint& b) const {
    std::size_t idx = 0;
    for (std::size_t j = 0; j < dim_; ++j) {
      const std::int64_t diff = std::llabs(a[j] - b[j]);
      if (diff > radius_) throw std::out_of_range("offset " + (a - b).to_string() + " outside Green table window");
      idx = idx * stride_ + static_cast<std::size_t>(diff);
    }
    return dense_[idx];
  }

  double origin() const { return dense_[0]; }

  /// Max over stored x of |g(x) - (1/2d) sum_e g(x+e) - 1{x=0}|, for x with |x| < R.
  double max_harmonicity_residual() const {
    double worst = 0.0;
    for (const auto& [p, g] : values_) {
      if (p.norm_inf() >= radius_) continue;
      worst = std::max(worst, std::abs(harmonicity_residual(p)));
    }
    return worst;
  }

  double harmonicity_residual(const LatticePoint& x) const {
    double avg = 0.0;
    for (auto& q : neighbors(x)) avg += (*this)(q);
    avg /= static_cast<double>(2 * dim_);
    const bool at_origin = x.norm_inf() == 0;
    return (*this)(x) - avg - (at_origin ? 1.0 : 0.0);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = "gffx-green-table";
    j["version"] = 1;
    j["dim"] = dim_;
    j["radius"] = radius_;
    j["quad_tol"] = quad_tol_;
    auto& arr = j["values"] = nlohmann::json::array();
    for (const auto& [p, g] : values_) {
      nlohmann::json row = p.coords();
      row.push_back(g);
      arr.push_back(std::move(row));
    }
    return j;
  }

  static GreenTable from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "gffx-green-table") throw std::runtime_error("not a gffx Green table");
    GreenTable t;
    t.dim_ = j.at("dim").get<std::size_t>();
    t.radius_ = j.at("radius").get<std::int64_t>();
    t.quad_tol_ = j.at("quad_tol").get<double>();
    for (const auto& row : j.at("values")) {
      std::vector<std::int64_t> c;
      for (std::size_t k = 0; k < t.dim_; ++k) c.push_back(row.at(k).get<std::int64_t>());
      t.values_.emplace(LatticePoint(std::move(c)), row.at(t.dim_).get<double>());
    }
    t.build_dense();
    return t;
  }

  static std::string cache_key(std::size_t dim, std::int64_t radius, double quad_tol) {
    std::ostringstream os;
    os << "green_d" << dim << "_R" << radius << "_tol" << quad_tol << ".json";
    return os.str();
  }

  /// Load from `dir` when a table with the same (d, R, quad_tol) exists there,
  /// otherwise build it and write it back. An empty dir disables caching.
  static GreenTable load_or_build(std::size_t dim, std::int64_t radius, double quad_tol, const std::string& dir) {
    if (dir.empty()) return GreenTable(dim, radius, quad_tol);
    const auto path = std::filesystem::path(dir) / cache_key(dim, radius, quad_tol);
    if (std::filesystem::exists(path)) {
      std::ifstream in(path);
      auto t = from_json(nlohmann::json::parse(in));
      if (t.dim_ == dim && t.radius_ == radius && t.quad_tol_ == quad_tol) return t;
    }
    GreenTable t(dim, radius, quad_tol);
    std::filesystem::create_directories(dir);
    const auto tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp);
      out << t.to_json().dump();
    }
    std::filesystem::rename(tmp, path);
    return t;
  }

  /// Cache directory from GFFX_CACHE, empty when unset.
  static std::string cache_dir_from_env() {
    const char* v = std::getenv("GFFX_CACHE");
    return v ? std::string(v) : std::string();
  }

 private:
  GreenTable() = default;

  void build_dense() {
    stride_ = static_cast<std::size_t>(radius_) + 1;
    std::size_t total = 1;
    for (std::size_t j = 0; j < dim_; ++j) total *= stride_;
    dense_.assign(total, 0.0);
    std::vector<std::int64_t> c(dim_, 0);
    for (std::size_t idx = 0; idx < total; ++idx) {
      std::size_t rem = idx;
      for (std::size_t j = dim_; j-- > 0;) {
        c[j] = static_cast<std::int64_t>(rem % stride_);
        rem /= stride_;
      }
      auto it = values_.find(LatticePoint(c).canonical());
      if (it == values_.end()) throw std::runtime_error("Green table incomplete at " + LatticePoint(c).to_string());
      dense_[idx] = it->second;
    }
  }

  std::size_t dim_ = 0;
  std::int64_t radius_ = 0;
  double quad_tol_ = 0;
  std::map<LatticePoint, double> values_;
  std::size_t stride_ = 0;
  std::vector<double> dense_;
};

}  // namespace gffx
