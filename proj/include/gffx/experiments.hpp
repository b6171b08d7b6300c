#pragma once

// Reproducible experiments: configuration, the replicate loops behind the
// CLI subcommands, and CSV/JSON/SVG output.
//
// Replicate r of section s draws from RandomStream(seed, (s << 40) | r), so
// results depend on (config, seed) only and never on the worker count.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gffx/dirichlet.hpp"
#include "gffx/extremes.hpp"
#include "gffx/green.hpp"
#include "gffx/hitting.hpp"
#include "gffx/lattice.hpp"
#include "gffx/parallel.hpp"
#include "gffx/report.hpp"
#include "gffx/rng.hpp"
#include "gffx/sampler.hpp"
#include "gffx/stats.hpp"
#include "gffx/stein_chen.hpp"

namespace gffx {

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"green", "sample", "gumbel", "lln", "bounds", "markov-check", "oracle"};
  return names;
}

struct ExperimentConfig {
  std::string experiment = "gumbel";
  std::size_t d = 3;
  Law law = Law::DirichletBox;
  std::vector<std::int64_t> box_sides{8, 12, 16};
  std::vector<double> z_grid{-2, -1, 0, 1, 2, 3};
  double delta = 0.1;
  double eps = 0.05;
  std::size_t replicates = 10'000;
  std::uint64_t seed = 20250101;
  /// 0 selects the hardware concurrency.
  std::size_t workers = 0;
  std::string out_dir = "out";
  double quad_tol = 1e-10;

  // gumbel / lln
  double gumbel_tol = 0.06;
  std::vector<double> gumbel_check_z{-1, 0, 1, 2};
  double lln_low = 0.85;
  double lln_high = 1.0;

  // bounds
  std::vector<double> n_grid{1e3, 1e4, 1e5, 1e6};
  /// 0 selects kappa = 1/g(0).
  double kappa = 0.0;
  std::size_t control_sites = 1000;
  std::vector<double> control_lambdas{0.5, 1.0, 2.0};
  std::size_t control_replicates = 100'000;
  std::int64_t instance_side = 12;

  // markov-check
  double drift_eps = 0.5;
  std::vector<std::int64_t> barza_radii{1, 2, 3};
  double weight_tol = 1e-6;
  std::size_t site_budget = 3'000'000;

  // green / sample / oracle
  std::int64_t green_radius = 4;
  std::string sample_format = "csv";
  std::vector<std::vector<std::int64_t>> oracle_sites;
  double oracle_z = 0.0;
  std::size_t oracle_budget = 100'000;

  std::size_t resolved_workers() const { return workers == 0 ? default_workers() : workers; }

  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
    if (std::find(experiment_names().begin(), experiment_names().end(), experiment) == experiment_names().end())
      fail("unknown experiment '" + experiment + "'");
    if (d < 3) fail("d must be >= 3");
    if (!(delta > 0.0 && delta < 0.5)) fail("delta must lie in (0, 1/2)");
    if (!(eps > 0.0)) fail("eps must be > 0");
    if (replicates < 1) fail("replicates must be >= 1");
    if (!(quad_tol > 0.0)) fail("quad_tol must be > 0");
    if (box_sides.empty()) fail("box_sides must be nonempty");
    for (auto n : box_sides)
      if (n < 1) fail("box sides must be >= 1");
    if (z_grid.empty()) fail("z_grid must be nonempty");
    if (n_grid.empty()) fail("n_grid must be nonempty");
    for (double n : n_grid)
      if (!(n >= 16.0)) fail("n_grid entries must be >= 16");
    if (!(kappa >= 0.0 && kappa < 1.0)) fail("kappa must lie in (0, 1), or 0 for 1/g(0)");
    if (!(gumbel_tol > 0.0)) fail("gumbel_tol must be > 0");
    if (!(drift_eps > 0.0)) fail("drift_eps must be > 0");
    if (control_sites < 1) fail("control_sites must be >= 1");
    for (double l : control_lambdas)
      if (!(l > 0.0 && l < static_cast<double>(control_sites))) fail("control lambdas must lie in (0, control_sites)");
    if (instance_side < 2) fail("instance_side must be >= 2");
    if (green_radius < 1) fail("green_radius must be >= 1");
    if (sample_format != "csv" && sample_format != "binary") fail("sample_format must be csv or binary");
    for (const auto& s : oracle_sites)
      if (s.size() != d) fail("oracle sites must have d coordinates");
    if (oracle_sites.size() > kSmallOracleMaxSites) fail("at most 12 oracle sites");
    if (oracle_budget < kSmallOracleMinBudget) fail("oracle_budget must be >= 10^4");
  }

  nlohmann::json to_json() const {
    return {{"experiment", experiment},
            {"d", d},
            {"law", std::string(law_name(law))},
            {"box_sides", box_sides},
            {"z_grid", z_grid},
            {"delta", delta},
            {"eps", eps},
            {"replicates", replicates},
            {"seed", seed},
            {"workers", workers},
            {"out_dir", out_dir},
            {"quad_tol", quad_tol},
            {"gumbel_tol", gumbel_tol},
            {"gumbel_check_z", gumbel_check_z},
            {"lln_low", lln_low},
            {"lln_high", lln_high},
            {"n_grid", n_grid},
            {"kappa", kappa},
            {"control_sites", control_sites},
            {"control_lambdas", control_lambdas},
            {"control_replicates", control_replicates},
            {"instance_side", instance_side},
            {"drift_eps", drift_eps},
            {"barza_radii", barza_radii},
            {"weight_tol", weight_tol},
            {"site_budget", site_budget},
            {"green_radius", green_radius},
            {"sample_format", sample_format},
            {"oracle_sites", oracle_sites},
            {"oracle_z", oracle_z},
            {"oracle_budget", oracle_budget}};
  }

  /// Missing keys keep their defaults; unknown keys are rejected.
  static ExperimentConfig from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
    ExperimentConfig c;
    const auto known = c.to_json();
    for (const auto& [key, _] : j.items())
      if (!known.contains(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("experiment", c.experiment);
    get("d", c.d);
    if (j.contains("law")) c.law = parse_law(j.at("law").get<std::string>());
    get("box_sides", c.box_sides);
    get("z_grid", c.z_grid);
    get("delta", c.delta);
    get("eps", c.eps);
    get("replicates", c.replicates);
    get("seed", c.seed);
    get("workers", c.workers);
    get("out_dir", c.out_dir);
    get("quad_tol", c.quad_tol);
    get("gumbel_tol", c.gumbel_tol);
    get("gumbel_check_z", c.gumbel_check_z);
    get("lln_low", c.lln_low);
    get("lln_high", c.lln_high);
    get("n_grid", c.n_grid);
    get("kappa", c.kappa);
    get("control_sites", c.control_sites);
    get("control_lambdas", c.control_lambdas);
    get("control_replicates", c.control_replicates);
    get("instance_side", c.instance_side);
    get("drift_eps", c.drift_eps);
    get("barza_radii", c.barza_radii);
    get("weight_tol", c.weight_tol);
    get("site_budget", c.site_budget);
    get("green_radius", c.green_radius);
    get("sample_format", c.sample_format);
    get("oracle_sites", c.oracle_sites);
    get("oracle_z", c.oracle_z);
    get("oracle_budget", c.oracle_budget);
    c.validate();
    return c;
  }

  static ExperimentConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    return from_json(nlohmann::json::parse(in));
  }
};

struct Check {
  std::string name;
  bool pass;
  std::string detail;
};

struct ExperimentResult {
  ExperimentResult() = default;
  ExperimentResult(ExperimentConfig c, Table t) : config(std::move(c)), table(std::move(t)) {}

  ExperimentConfig config;
  Table table;
  std::optional<PlotSpec> plot;
  std::map<std::string, double> summary;
  std::vector<Check> checks;
  std::vector<std::string> notes;
  /// Extra files written next to the CSV, name -> bytes.
  std::map<std::string, std::string> attachments;
  double wall_seconds = 0.0;
  /// Set when the run stopped early; rows gathered so far are kept.
  std::string error;

  bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }

  void check(std::string name, bool pass, std::string detail) {
    checks.push_back({std::move(name), pass, std::move(detail)});
  }
};

inline std::uint64_t stream_id(std::uint64_t section, std::uint64_t replicate) { return section << 40 | replicate; }

/// Green table wide enough for every pairwise offset an experiment needs,
/// through the GFFX_CACHE directory when set.
inline GreenTable experiment_green(const ExperimentConfig& c, std::int64_t radius) {
  return GreenTable::load_or_build(c.d, std::max<std::int64_t>(radius, 1), c.quad_tol, GreenTable::cache_dir_from_env());
}

/// Field on the sites of an n-box under one of the four laws, in box index order.
class BoxFieldSampler {
 public:
  BoxFieldSampler(Law law, const BoxDomain& box, const GreenTable& green, const HittingOptions& opt = {})
      : law_(law), box_(box), g0_(green.origin()) {
    switch (law) {
      case Law::InfiniteWindow:
        window_.emplace(box.sites(), green);
        break;
      case Law::DirichletBox:
        dirichlet_.emplace(box);
        break;
      case Law::Conditional:
        shell_.emplace(box.outer_boundary(), green);
        conditional_.emplace(box.outer_boundary(), box.sites(), green, opt);
        break;
      case Law::IidControl:
        break;
    }
  }

  /// Radius of the Green table a law needs on an n-box.
  static std::int64_t green_radius(Law law, std::int64_t side) {
    switch (law) {
      case Law::InfiniteWindow: return side - 1;
      case Law::Conditional: return side + 1;
      default: return 1;
    }
  }

  Law law() const { return law_; }
  const BoxDomain& box() const { return box_; }

  void draw(RandomStream& rng, std::vector<double>& out) const {
    out.resize(box_.size());
    switch (law_) {
      case Law::InfiniteWindow: {
        Eigen::VectorXd v;
        window_->draw(rng, v);
        std::copy(v.data(), v.data() + v.size(), out.begin());
        break;
      }
      case Law::DirichletBox:
        dirichlet_->draw(rng, out);
        break;
      case Law::Conditional: {
        Eigen::VectorXd kv, psi;
        shell_->draw(rng, kv);
        conditional_->draw_fluctuation(rng, psi);
        const Eigen::VectorXd phi = conditional_->drift(kv) + psi;
        std::copy(phi.data(), phi.data() + phi.size(), out.begin());
        break;
      }
      case Law::IidControl:
        draw_iid(rng, g0_, out);
        break;
    }
  }

  double max(std::uint64_t seed, std::uint64_t stream) const {
    RandomStream rng(seed, stream);
    std::vector<double> v;
    draw(rng, v);
    return *std::max_element(v.begin(), v.end());
  }

 private:
  Law law_;
  BoxDomain box_;
  double g0_;
  std::optional<InfiniteWindowSampler> window_;
  std::optional<DirichletBoxSampler> dirichlet_;
  std::optional<InfiniteWindowSampler> shell_;
  std::optional<ConditionalSampler> conditional_;
};

namespace detail {

inline double box_sites(std::size_t d, std::int64_t side) { return std::pow(static_cast<double>(side), static_cast<double>(d)); }

inline std::int64_t max_side(const std::vector<std::int64_t>& sides) { return *std::max_element(sides.begin(), sides.end()); }

inline HittingOptions hitting_options(const ExperimentConfig& c) {
  HittingOptions o;
  o.weight_tol = c.weight_tol;
  o.site_budget = c.site_budget;
  return o;
}

template <typename Fn>
void guarded(ExperimentResult& r, Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    r.error = e.what();
  }
}

inline bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

inline std::string fmt(double v) { return format_number(v); }

}  // namespace detail

/// Empirical P((max - b_N)/a_N < z) against exp(-e^{-z}) for each box side.
inline ExperimentResult run_gumbel(const ExperimentConfig& c) {
  c.validate();
  ExperimentResult r{c, Table({"N", "z", "empirical_P", "gumbel_P", "ks", "ci_low", "ci_high", "side", "law"})};
  r.plot = PlotSpec{"Rescaled maximum CDF against the Gumbel limit", "z", {"empirical_P", "gumbel_P"}, "side"};
  const std::size_t workers = c.resolved_workers();
  detail::guarded(r, [&] {
    std::int64_t radius = 1;
    for (auto n : c.box_sides) radius = std::max(radius, BoxFieldSampler::green_radius(c.law, n));
    const auto green = experiment_green(c, radius);
    const double g0 = green.origin();
    std::vector<double> ks_by_side;
    for (std::size_t s = 0; s < c.box_sides.size(); ++s) {
      const auto n = c.box_sides[s];
      const double big_n = detail::box_sites(c.d, n);
      if (big_n < 3) {
        r.notes.push_back("side " + std::to_string(n) + ": fewer than 3 sites, scaling constants undefined");
        continue;
      }
      const auto sc = scaling_constants(big_n, g0);
      const BoxFieldSampler sampler(c.law, BoxDomain(c.d, n), green, detail::hitting_options(c));
      const auto maxima = parallel_map<double>(c.replicates, workers, [&](std::size_t rep) {
        return (sampler.max(c.seed, stream_id(s + 1, rep)) - sc.b) / sc.a;
      });
      const double ks = maxima.size() >= 2 ? ks_distance(maxima, gumbel_cdf) : std::numeric_limits<double>::quiet_NaN();
      if (maxima.size() < 2) r.notes.push_back("side " + std::to_string(n) + ": one replicate, KS undefined");
      ks_by_side.push_back(ks);
      auto below = [&](double z) {
        return static_cast<std::size_t>(std::count_if(maxima.begin(), maxima.end(), [z](double m) { return m < z; }));
      };
      for (double z : c.z_grid) {
        const auto k = below(z);
        const auto ci = wilson_interval(k, maxima.size());
        r.table.add_row({detail::fmt(big_n), detail::fmt(z),
                         detail::fmt(static_cast<double>(k) / static_cast<double>(maxima.size())),
                         detail::fmt(gumbel_cdf(z)), detail::fmt(ks), detail::fmt(ci.low), detail::fmt(ci.high),
                         format_number(n), std::string(law_name(c.law))});
      }
      r.summary["ks_side_" + std::to_string(n)] = ks;
      if (s + 1 == c.box_sides.size()) {
        for (double z : c.gumbel_check_z) {
          const double p = static_cast<double>(below(z)) / static_cast<double>(maxima.size());
          const double err = std::abs(p - gumbel_cdf(z));
          r.check("gumbel_side" + std::to_string(n) + "_z" + detail::fmt(z), err <= c.gumbel_tol,
                  "|P - G(z)| = " + detail::fmt(err) + " vs tolerance " + detail::fmt(c.gumbel_tol));
        }
      }
    }
    if (ks_by_side.size() >= 2)
      r.check("ks_decreases", ks_by_side.back() < ks_by_side.front(),
              "KS " + detail::fmt(ks_by_side.front()) + " -> " + detail::fmt(ks_by_side.back()));
  });
  return r;
}

/// E[max]/sqrt(2 g0 log N) per box side, with an i.i.d. control of the same size.
inline ExperimentResult run_lln(const ExperimentConfig& c) {
  c.validate();
  ExperimentResult r{c, Table({"N", "side", "law", "ratio", "se", "iid_ratio", "iid_se"})};
  r.plot = PlotSpec{"Normalised expected maximum", "N", {"ratio", "iid_ratio"}, "", true, false};
  const std::size_t workers = c.resolved_workers();
  detail::guarded(r, [&] {
    std::int64_t radius = 1;
    for (auto n : c.box_sides) radius = std::max(radius, BoxFieldSampler::green_radius(c.law, n));
    const auto green = experiment_green(c, radius);
    const double g0 = green.origin();
    std::vector<double> ratios;
    double last_iid = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t s = 0; s < c.box_sides.size(); ++s) {
      const auto n = c.box_sides[s];
      const double big_n = detail::box_sites(c.d, n);
      if (big_n < 2 || c.replicates < 100) {
        r.notes.push_back("side " + std::to_string(n) +
                          (big_n < 2 ? ": single site, ratio undefined" : ": fewer than 100 replicates, ratio not estimated"));
        r.table.add_row({detail::fmt(big_n), format_number(n), std::string(law_name(c.law)), "nan", "nan", "nan", "nan"});
        continue;
      }
      const BoxDomain box(c.d, n);
      const BoxFieldSampler field(c.law, box, green, detail::hitting_options(c));
      const BoxFieldSampler iid(Law::IidControl, box, green);
      const auto m = parallel_map<double>(c.replicates, workers,
                                          [&](std::size_t rep) { return field.max(c.seed, stream_id(s + 1, rep)); });
      const auto mi = parallel_map<double>(c.replicates, workers,
                                           [&](std::size_t rep) { return iid.max(c.seed, stream_id(1000 + s, rep)); });
      const auto e = lln_ratio(m, big_n, g0);
      const auto ei = lln_ratio(mi, big_n, g0);
      ratios.push_back(e.ratio);
      last_iid = ei.ratio;
      r.table.add_row({detail::fmt(big_n), format_number(n), std::string(law_name(c.law)), detail::fmt(e.ratio),
                       detail::fmt(e.standard_error), detail::fmt(ei.ratio), detail::fmt(ei.standard_error)});
      r.summary["ratio_side_" + std::to_string(n)] = e.ratio;
    }
    if (ratios.size() >= 2) {
      bool inc = true;
      for (std::size_t i = 1; i < ratios.size(); ++i) inc = inc && ratios[i] > ratios[i - 1];
      r.check("ratio_increases", inc, "ratios over the listed sides must increase");
    }
    if (!ratios.empty()) {
      const double last = ratios.back();
      r.check("ratio_in_band", last >= c.lln_low && last <= c.lln_high,
              "largest side ratio " + detail::fmt(last) + " in [" + detail::fmt(c.lln_low) + ", " +
                  detail::fmt(c.lln_high) + "]");
      r.check("iid_ratio_in_band", last_iid >= c.lln_low && last_iid <= c.lln_high,
              "i.i.d. ratio " + detail::fmt(last_iid));
    }
  });
  return r;
}

struct InstanceBounds {
  double n_sites;
  double u;
  double p;
  double lambda;
  SteinChenBounds bounds;
  bool neighborhoods_cover;
};

/// b1, b2 (pairwise Savage) and b3 for a concrete site set at threshold u.
/// b3 vanishes when every neighbourhood is all of A; otherwise the surrogate
/// is evaluated at the largest exact drift variance over A.
inline InstanceBounds instance_bounds(const SiteSet& a, double u, const GreenTable& green, double eps,
                                      const HittingOptions& opt = {}) {
  const double g0 = green.origin();
  const double n = static_cast<double>(a.size());
  const double p = normal_tail(u / std::sqrt(g0));
  std::vector<DependenceNeighborhood> nbs;
  nbs.reserve(a.size());
  bool cover = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    nbs.push_back(neighborhood(i, a, eps));
    cover = cover && nbs.back().members.size() == a.size();
  }
  const double b1 = b1_exact(nbs, p);
  const double b2 = b2_pairwise_savage(a, nbs, green, u);
  double b3 = 0.0;
  if (!cover) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (nbs[i].members.size() < a.size()) worst = std::max(worst, drift_variance_bound(a, i, nbs[i], green, opt).exact);
    b3 = b3_surrogate(n, a.front().dim(), eps, (u - scaling_constants(n, g0).b) / scaling_constants(n, g0).a, g0, worst)
             .value;
  }
  return {n, u, p, n * p,
          SteinChenBounds::make(n * p, b1, b2, b3, cover ? BoundProvenance::ExactSmallInstance : BoundProvenance::Analytic),
          cover};
}

/// b1/b2/b3 surrogate over an N grid, plus Poisson-gap checks on i.i.d.
/// controls and on an infinite-volume instance.
inline ExperimentResult run_bounds(const ExperimentConfig& c) {
  c.validate();
  ExperimentResult r{c, Table({"N", "z", "eps", "lambda", "b1", "b2", "b3_surrogate", "tv_bound", "empirical_gap",
                               "source"})};
  r.plot = PlotSpec{"Stein-Chen terms at z = 0", "N", {"b1", "b2", "b3_surrogate"}, "", true, true};
  const std::size_t workers = c.resolved_workers();
  detail::guarded(r, [&] {
    const auto green = experiment_green(c, std::max<std::int64_t>(c.instance_side - 1, 1));
    const double g0 = green.origin();
    const double kappa = c.kappa > 0 ? c.kappa : 1.0 / g0;
    auto grid = c.n_grid;
    std::sort(grid.begin(), grid.end());
    const bool has_zero = std::find(c.z_grid.begin(), c.z_grid.end(), 0.0) != c.z_grid.end();
    const double z_check = has_zero ? 0.0 : c.z_grid.front();
    std::vector<double> b1s, b2s, b3s, b2_scaled;
    for (double z : c.z_grid) {
      for (double n : grid) {
        const double u = threshold(scaling_constants(n, g0), z);
        const double lambda = n * normal_tail(u / std::sqrt(g0));
        const double b1 = b1_bound(n, c.d, c.eps, z, g0);
        const double b2 = b2_bound(n, c.d, c.eps, z, g0, kappa);
        const double b3 = b3_surrogate(n, c.d, c.eps, z, g0, drift_variance_asymptotic(n, c.d, c.eps)).value;
        const auto sb = SteinChenBounds::make(lambda, b1, b2, b3, BoundProvenance::Analytic);
        r.table.add_row({detail::fmt(n), detail::fmt(z), detail::fmt(c.eps), detail::fmt(lambda), detail::fmt(b1),
                         detail::fmt(b2), detail::fmt(b3), detail::fmt(sb.tv_bound), "nan", "analytic"});
        if (z == z_check) {
          b1s.push_back(b1);
          b2s.push_back(b2);
          b3s.push_back(b3);
          b2_scaled.push_back(b2 / neighborhood_volume_bound(n, c.d, c.eps));
        }
      }
    }
    const std::string zs = detail::fmt(z_check);
    r.check("b1_decreasing_z" + zs, detail::strictly_decreasing(b1s), "b1 bound over the N grid");
    r.check("b2_decreasing_z" + zs, detail::strictly_decreasing(b2s), "b2 bound over the N grid");
    r.check("b3_decreasing_z" + zs, detail::strictly_decreasing(b3s), "b3 surrogate over the N grid");
    double slope_err = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
      const double slope = std::log(b2_scaled[i] / b2_scaled[i - 1]) / std::log(grid[i] / grid[i - 1]);
      slope_err = std::max(slope_err, std::abs(slope - b2_exponent(kappa)));
    }
    r.summary["kappa"] = kappa;
    r.summary["b2_exponent"] = b2_exponent(kappa);
    r.summary["b2_exponent_fit_error"] = slope_err;
    r.check("b2_exponent", grid.size() < 2 || slope_err <= 1e-6,
            "fitted N-exponent of b2 off by " + detail::fmt(slope_err) + " from -kappa/(2-kappa)");

    // i.i.d. Bernoulli(lambda/N) controls: b2 = b3 = 0 and b1 = N p^2.
    for (std::size_t li = 0; li < c.control_lambdas.size(); ++li) {
      const double lambda = c.control_lambdas[li];
      const std::size_t n = c.control_sites;
      const double p = lambda / static_cast<double>(n);
      const auto zero = parallel_map<std::uint8_t>(c.control_replicates, workers, [&](std::size_t rep) {
        RandomStream rng(c.seed, stream_id(2000 + li, rep));
        for (std::size_t i = 0; i < n; ++i)
          if (rng.uniform() < p) return std::uint8_t{0};
        return std::uint8_t{1};
      });
      const std::size_t zeros = static_cast<std::size_t>(std::count(zero.begin(), zero.end(), std::uint8_t{1}));
      const double reps = static_cast<double>(c.control_replicates);
      const double pw0 = static_cast<double>(zeros) / reps;
      const double se = std::sqrt(pw0 * (1 - pw0) / reps);
      const double b1 = static_cast<double>(n) * p * p;
      const auto sb = SteinChenBounds::make(lambda, b1, 0.0, 0.0, BoundProvenance::Independent);
      const double gap = std::abs(pw0 - std::exp(-lambda));
      r.table.add_row({format_number(n), "nan", detail::fmt(c.eps), detail::fmt(lambda), detail::fmt(b1), "0", "0",
                       detail::fmt(sb.tv_bound), detail::fmt(gap), "iid-control"});
      r.check("iid_gap_lambda" + detail::fmt(lambda), gap <= b1 + 3 * se,
              "gap " + detail::fmt(gap) + " vs b1 + 3 SE = " + detail::fmt(b1 + 3 * se));
    }

    // Infinite-volume field on the instance box at z = 0.
    const BoxDomain box(c.d, c.instance_side);
    const auto sites = box.sites();
    const double n = static_cast<double>(sites.size());
    const double u = threshold(scaling_constants(n, g0), 0.0);
    const auto ib = instance_bounds(sites, u, green, c.eps, detail::hitting_options(c));
    const InfiniteWindowSampler sampler(sites, green);
    const auto below = parallel_map<std::uint8_t>(c.replicates, workers, [&](std::size_t rep) {
      RandomStream rng(c.seed, stream_id(3000, rep));
      Eigen::VectorXd v;
      sampler.draw(rng, v);
      return static_cast<std::uint8_t>(v.maxCoeff() <= u ? 1 : 0);
    });
    const std::size_t w0 = static_cast<std::size_t>(std::count(below.begin(), below.end(), std::uint8_t{1}));
    const double pw0 = static_cast<double>(w0) / static_cast<double>(c.replicates);
    const auto ci = wilson_interval(w0, c.replicates);
    const auto gap = poisson_gap(ib.bounds, pw0, std::max(pw0 - ci.low, ci.high - pw0));
    r.table.add_row({detail::fmt(n), "0", detail::fmt(c.eps), detail::fmt(ib.lambda), detail::fmt(ib.bounds.b1),
                     detail::fmt(ib.bounds.b2), detail::fmt(ib.bounds.b3), detail::fmt(ib.bounds.tv_bound),
                     detail::fmt(gap.gap), "infinite-window-instance"});
    r.summary["instance_p_w0"] = pw0;
    r.summary["instance_gap_bound"] = gap.bound;
    r.check("instance_gap_side" + std::to_string(c.instance_side), gap.pass,
            "gap " + detail::fmt(gap.gap) + " minus CI radius " + detail::fmt(gap.ci_radius) + " vs bound " +
                detail::fmt(gap.bound));
  });
  return r;
}

/// Markov decomposition on boxes: identity residual of the harmonic measure,
/// drift variance against its sup-Green bound, and the probability that the
/// bulk drift exceeds drift_eps * a_{m_N}.
inline ExperimentResult run_markov_check(const ExperimentConfig& c) {
  c.validate();
  ExperimentResult r{c, Table({"N", "side", "bulk_sites", "delta", "drift_eps", "threshold", "p_exceed", "ci_low",
                               "ci_high", "identity_residual", "combined_tol"})};
  r.plot = PlotSpec{"Probability that the bulk drift exceeds its threshold", "side", {"p_exceed"}, ""};
  const std::size_t workers = c.resolved_workers();
  detail::guarded(r, [&] {
    const auto green = experiment_green(c, detail::max_side(c.box_sides) + 1);
    const double g0 = green.origin();
    const auto opt = detail::hitting_options(c);
    std::vector<Interval> p_by_side;
    for (std::size_t s = 0; s < c.box_sides.size(); ++s) {
      const auto n = c.box_sides[s];
      const BoxDomain box(c.d, n);
      const auto shell = box.outer_boundary();
      const auto all = box.sites();
      // Markov identity g(a - b) = sum_c H(a, c) g(c - b) for a in the box, b on the shell.
      const auto hit_all = hitting_distributions(all, shell, opt);
      double residual = 0.0, worst_change = 0.0;
      for (std::size_t i = 0; i < all.size(); ++i) {
        worst_change = std::max(worst_change, hit_all[i].truncation_change);
        for (const auto& b : shell) {
          double acc = 0.0;
          for (std::size_t t = 0; t < shell.size(); ++t) acc += hit_all[i].weights[t] * green.between(shell[t], b);
          residual = std::max(residual, std::abs(green.between(all[i], b) - acc));
        }
      }
      const double tol = 20.0 * c.quad_tol + g0 * worst_change;
      r.check("markov_identity_side" + std::to_string(n), residual <= tol,
              "residual " + detail::fmt(residual) + " vs " + detail::fmt(tol));

      const auto bulk_sites = bulk(box, c.delta);
      const double m = static_cast<double>(bulk_sites.size());
      double thr = std::numeric_limits<double>::quiet_NaN();
      double pe = thr;
      Interval ci{thr, thr};
      if (m >= 3) {
        thr = c.drift_eps * scaling_constants(m, g0).a;
        const SiteLookup in_bulk(bulk_sites.begin(), bulk_sites.end());
        Eigen::MatrixXd h(static_cast<Eigen::Index>(bulk_sites.size()), static_cast<Eigen::Index>(shell.size()));
        Eigen::Index row = 0;
        for (std::size_t i = 0; i < all.size(); ++i) {
          if (!in_bulk.contains(all[i])) continue;
          for (std::size_t t = 0; t < shell.size(); ++t) h(row, static_cast<Eigen::Index>(t)) = hit_all[i].weights[t];
          ++row;
        }
        const InfiniteWindowSampler shell_sampler(shell, green);
        const auto hits = parallel_map<std::uint8_t>(c.replicates, workers, [&](std::size_t rep) {
          RandomStream rng(c.seed, stream_id(s + 1, rep));
          Eigen::VectorXd kv;
          shell_sampler.draw(rng, kv);
          const Eigen::VectorXd mu = h * kv;
          return static_cast<std::uint8_t>(mu.cwiseAbs().maxCoeff() > thr ? 1 : 0);
        });
        const auto k = static_cast<std::size_t>(std::count(hits.begin(), hits.end(), std::uint8_t{1}));
        pe = static_cast<double>(k) / static_cast<double>(c.replicates);
        ci = wilson_interval(k, c.replicates);
        p_by_side.push_back(ci);
      } else {
        r.notes.push_back("side " + std::to_string(n) + ": bulk has fewer than 3 sites");
      }
      r.table.add_row({detail::fmt(detail::box_sites(c.d, n)), format_number(n), format_number(bulk_sites.size()),
                       detail::fmt(c.delta), detail::fmt(c.drift_eps), detail::fmt(thr), detail::fmt(pe),
                       detail::fmt(ci.low), detail::fmt(ci.high), detail::fmt(residual), detail::fmt(tol)});

      // Var(mu_a) <= sup over A \ B_a of g, and 0 <= g0/g_U(a) - 1 <= the same sup, at the box centre.
      LatticePoint centre(std::vector<std::int64_t>(c.d, (n - 1) / 2));
      const auto centre_idx = box.index(centre);
      for (auto rad : c.barza_radii) {
        const auto nb = neighborhood_with_radius(centre_idx, all, rad);
        if (nb.members.size() == all.size()) continue;
        const auto dv = drift_variance_bound(all, centre_idx, nb, green, opt);
        const double ratio = g0 / dv.killed_variance - 1.0;
        r.check("drift_variance_side" + std::to_string(n) + "_r" + std::to_string(rad), dv.exact <= dv.bound,
                "Var(mu) " + detail::fmt(dv.exact) + " vs sup g " + detail::fmt(dv.bound));
        r.check("variance_ratio_side" + std::to_string(n) + "_r" + std::to_string(rad),
                ratio >= -1e-12 && ratio <= dv.bound + 1e-12,
                "g0/g_U - 1 = " + detail::fmt(ratio) + " vs sup g " + detail::fmt(dv.bound));
      }
    }
    // a decrease counts only when the 99% intervals separate
    if (p_by_side.size() >= 2)
      r.check("drift_exceedance_decreases", p_by_side.back().high < p_by_side.front().low,
              "99% intervals [" + detail::fmt(p_by_side.front().low) + ", " + detail::fmt(p_by_side.front().high) +
                  "] -> [" + detail::fmt(p_by_side.back().low) + ", " + detail::fmt(p_by_side.back().high) + "]");
  });
  return r;
}

/// Canonical Green values on the window of radius green_radius.
inline ExperimentResult run_green(const ExperimentConfig& c) {
  c.validate();
  std::vector<std::string> cols;
  for (std::size_t j = 0; j < c.d; ++j) cols.push_back("x" + std::to_string(j + 1));
  cols.push_back("g");
  ExperimentResult r{c, Table(cols)};
  detail::guarded(r, [&] {
    const auto green = experiment_green(c, c.green_radius);
    for (const auto& [p, g] : green.canonical_values()) {
      std::vector<std::string> row;
      for (std::size_t j = 0; j < c.d; ++j) row.push_back(format_number(p[j]));
      row.push_back(detail::fmt(g));
      r.table.add_row(std::move(row));
    }
    const double harm = green.max_harmonicity_residual();
    const double e1 = std::abs(green(LatticePoint::unit(c.d, 0)) - (green.origin() - 1.0));
    r.summary["g0"] = green.origin();
    r.summary["kappa"] = 1.0 / green.origin();
    r.check("harmonicity", harm <= 10 * c.quad_tol, "max residual " + detail::fmt(harm));
    r.check("unit_neighbour", e1 <= 10 * c.quad_tol, "|g(e1) - g(0) + 1| = " + detail::fmt(e1));
  });
  return r;
}

/// One realisation (stream 0) on the first box side, as CSV rows or a binary frame.
///
/// Binary frame, little endian: "GFFXFLD1", u32 d, i64 side, u32 law, u64 count,
/// then count doubles in box index order (last coordinate fastest).
inline ExperimentResult run_sample(const ExperimentConfig& c) {
  c.validate();
  std::vector<std::string> cols;
  for (std::size_t j = 0; j < c.d; ++j) cols.push_back("x" + std::to_string(j + 1));
  cols.push_back("value");
  ExperimentResult r{c, Table(cols)};
  detail::guarded(r, [&] {
    const auto n = c.box_sides.front();
    const BoxDomain box(c.d, n);
    const auto green = experiment_green(c, BoxFieldSampler::green_radius(c.law, n));
    const BoxFieldSampler sampler(c.law, box, green, detail::hitting_options(c));
    RandomStream rng(c.seed, stream_id(1, 0));
    std::vector<double> v;
    sampler.draw(rng, v);
    if (c.sample_format == "binary") {
      std::string bytes = "GFFXFLD1";
      auto put = [&](const auto& x) { bytes.append(reinterpret_cast<const char*>(&x), sizeof x); };
      put(static_cast<std::uint32_t>(c.d));
      put(static_cast<std::int64_t>(n));
      put(static_cast<std::uint32_t>(c.law));
      put(static_cast<std::uint64_t>(v.size()));
      for (double x : v) put(x);
      r.attachments["sample.bin"] = std::move(bytes);
    } else {
      for (std::size_t i = 0; i < v.size(); ++i) {
        const auto p = box.point(i);
        std::vector<std::string> row;
        for (std::size_t j = 0; j < c.d; ++j) row.push_back(format_number(p[j]));
        row.push_back(detail::fmt(v[i]));
        r.table.add_row(std::move(row));
      }
    }
    r.summary["sites"] = static_cast<double>(v.size());
    r.summary["max"] = *std::max_element(v.begin(), v.end());
  });
  return r;
}

/// Monte Carlo ground truth on at most 12 sites: joint exceedances against
/// the Savage bound and P(W = 0) against the Poisson gap bound.
inline ExperimentResult run_oracle(const ExperimentConfig& c) {
  c.validate();
  ExperimentResult r{c, Table({"alpha", "beta", "joint", "ci_radius", "savage_bound"})};
  detail::guarded(r, [&] {
    SiteSet a;
    if (c.oracle_sites.empty()) {
      const BoxDomain box(c.d, 2);
      for (std::size_t i = 0; i < box.size() && a.size() < kSmallOracleMaxSites; ++i) a.push_back(box.point(i));
      if (c.d == 3) {
        for (std::int64_t x = 0; x < 2; ++x)
          for (std::int64_t y = 0; y < 2; ++y) a.push_back(LatticePoint(std::vector<std::int64_t>{x, y, 2}));
      }
    } else {
      for (const auto& s : c.oracle_sites) a.emplace_back(s);
    }
    std::int64_t reach = 1;
    for (const auto& x : a)
      for (const auto& y : a) reach = std::max(reach, (x - y).norm_inf());
    const auto green = experiment_green(c, reach);
    const double g0 = green.origin();
    const double big_n = std::max(3.0, static_cast<double>(a.size()));
    const double u = threshold(scaling_constants(big_n, g0), c.oracle_z);
    const auto res = exact_small_oracle(a, u, green, c.oracle_budget, c.seed, c.resolved_workers());
    bool savage_ok = true;
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < a.size(); ++j) {
        const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
        double sb = std::numeric_limits<double>::quiet_NaN();
        if (i != j && u > 0) {
          sb = savage_tail_bound({g0, green.between(a[i], a[j])}, u);
          savage_ok = savage_ok && res.joint(ii, jj) - res.joint_ci_radius(ii, jj) <= sb;
        }
        r.table.add_row({format_number(i), format_number(j), detail::fmt(res.joint(ii, jj)),
                         detail::fmt(res.joint_ci_radius(ii, jj)), detail::fmt(sb)});
      }
    r.summary["threshold"] = u;
    r.summary["p_w0"] = res.p_w0;
    r.summary["p_w0_ci_low"] = res.p_w0_ci.low;
    r.summary["p_w0_ci_high"] = res.p_w0_ci.high;
    r.summary["mean_w"] = res.mean_w;
    if (u > 0) {
      r.check("savage_upper_bounds_joint", savage_ok, "Savage bound against every off-diagonal joint exceedance");
      const auto ib = instance_bounds(a, u, green, c.eps);
      const auto gap = poisson_gap(ib.bounds, res.p_w0, std::max(res.p_w0 - res.p_w0_ci.low, res.p_w0_ci.high - res.p_w0));
      r.summary["lambda"] = ib.lambda;
      r.summary["gap_bound"] = gap.bound;
      r.check("poisson_gap", gap.pass, "gap " + detail::fmt(gap.gap) + " vs bound " + detail::fmt(gap.bound));
    } else {
      r.notes.push_back("threshold is not positive; Savage and Poisson checks skipped");
    }
  });
  return r;
}

inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult r;
  if (c.experiment == "green") r = run_green(c);
  else if (c.experiment == "sample") r = run_sample(c);
  else if (c.experiment == "gumbel") r = run_gumbel(c);
  else if (c.experiment == "lln") r = run_lln(c);
  else if (c.experiment == "bounds") r = run_bounds(c);
  else if (c.experiment == "markov-check") r = run_markov_check(c);
  else if (c.experiment == "oracle") r = run_oracle(c);
  else throw std::invalid_argument("unknown experiment '" + c.experiment + "'");
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

/// JSON sidecar: config echo, seed provenance, summary, checks and timing.
inline nlohmann::json result_sidecar(const ExperimentResult& r) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& ch : r.checks) checks.push_back({{"name", ch.name}, {"pass", ch.pass}, {"detail", ch.detail}});
  nlohmann::json summary = nlohmann::json::object();
  for (const auto& [k, v] : r.summary) summary[k] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(format_number(v));
  return {{"experiment", r.config.experiment},
          {"config", r.config.to_json()},
          {"provenance",
           {{"master_seed", r.config.seed},
            {"rng", "philox4x32-10"},
            {"stream_rule", "stream = (section << 40) | replicate"},
            {"workers", r.config.resolved_workers()}}},
          {"columns", r.table.columns()},
          {"rows", r.table.size()},
          {"summary", summary},
          {"checks", checks},
          {"all_pass", r.all_pass()},
          {"notes", r.notes},
          {"error", r.error},
          {"wall_clock_seconds", r.wall_seconds}};
}

enum class EmitFormat { Csv, Json, Svg };

inline std::filesystem::path emit(const ExperimentResult& r, const std::filesystem::path& dir, EmitFormat fmt) {
  std::filesystem::create_directories(dir);
  const std::string stem = r.config.experiment;
  std::filesystem::path path;
  std::string bytes;
  switch (fmt) {
    case EmitFormat::Csv:
      path = dir / (stem + ".csv");
      bytes = r.table.to_csv();
      break;
    case EmitFormat::Json:
      path = dir / (stem + ".json");
      bytes = result_sidecar(r).dump(2) + "\n";
      break;
    case EmitFormat::Svg:
      if (!r.plot) return {};
      path = dir / (stem + ".svg");
      bytes = svg_plot(r.table, *r.plot);
      break;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << bytes;
  return path;
}

/// CSV, JSON sidecar, SVG when the experiment has a plot, and any attachments.
inline std::vector<std::filesystem::path> emit_all(const ExperimentResult& r, const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  for (auto f : {EmitFormat::Csv, EmitFormat::Json, EmitFormat::Svg}) {
    auto p = emit(r, dir, f);
    if (!p.empty()) out.push_back(std::move(p));
  }
  for (const auto& [name, bytes] : r.attachments) {
    const auto p = dir / (r.config.experiment + "_" + name);
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << bytes;
    out.push_back(p);
  }
  return out;
}

}  // namespace gffx
