#pragma once

// Resource-model fitting: bivariate polynomial least squares over the data
// and coefficient widths, significance pruning, the R^2-threshold selection
// loop, piecewise-constant segmented regression, and prediction.

#include <algorithm>
#include <cmath>
#include <compare>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "convcast/analysis.hpp"
#include "convcast/detail/least_squares.hpp"
#include "convcast/error.hpp"
#include "convcast/model_core.hpp"
#include "convcast/synth_data.hpp"

namespace convcast {

inline constexpr int max_polynomial_degree = 4;

/// d^i * c^j.
struct MonomialTerm {
  int i = 0;
  int j = 0;

  int degree() const { return i + j; }
  friend auto operator<=>(const MonomialTerm&, const MonomialTerm&) = default;
};

inline std::string term_name(MonomialTerm t) {
  if (t.i == 0 && t.j == 0) return "1";
  auto power = [](const char* var, int e) -> std::string {
    if (e == 0) return "";
    return e == 1 ? std::string(var) : std::string(var) + "^" + std::to_string(e);
  };
  const auto d = power("d", t.i);
  const auto c = power("c", t.j);
  if (d.empty()) return c;
  if (c.empty()) return d;
  return d + "*" + c;
}

inline double term_value(MonomialTerm t, double d, double c) {
  return std::pow(d, t.i) * std::pow(c, t.j);
}

/// Every monomial of total degree <= `degree`, grouped by total degree with
/// higher powers of d first: 1, d, c, d^2, d*c, c^2, ...
inline std::vector<MonomialTerm> full_basis(int degree) {
  std::vector<MonomialTerm> terms;
  for (int total = 0; total <= degree; ++total)
    for (int i = total; i >= 0; --i) terms.push_back({i, total - i});
  return terms;
}

struct FittedDomain {
  BitRange data_bits{};
  BitRange coeff_bits{};

  bool contains(ConfigPoint cfg) const {
    return cfg.data_bits >= data_bits.min && cfg.data_bits <= data_bits.max &&
           cfg.coeff_bits >= coeff_bits.min && cfg.coeff_bits <= coeff_bits.max;
  }
};

struct PolynomialModel {
  BlockKind block = BlockKind::conv1;
  Resource resource = Resource::llut;
  int degree = 1;
  std::vector<MonomialTerm> terms;
  std::vector<double> coefficients;
  double training_r2 = 0.0;
  FittedDomain domain{};

  std::optional<double> coefficient(MonomialTerm t) const {
    for (std::size_t k = 0; k < terms.size(); ++k)
      if (terms[k] == t) return coefficients[k];
    return std::nullopt;
  }
};

/// Piecewise-constant function of the coefficient width. Segment k covers
/// breakpoints[k-1] <= c < breakpoints[k].
struct SegmentedModel {
  BlockKind block = BlockKind::conv3;
  Resource resource = Resource::llut;
  std::vector<int> breakpoints;
  std::vector<double> segment_values;
  double training_r2 = 0.0;
  FittedDomain domain{};

  std::size_t segment_of(int coeff_bits) const {
    return static_cast<std::size_t>(
        std::upper_bound(breakpoints.begin(), breakpoints.end(), coeff_bits) - breakpoints.begin());
  }
};

using Model = std::variant<PolynomialModel, SegmentedModel>;

inline BlockKind model_block(const Model& m) {
  return std::visit([](const auto& x) { return x.block; }, m);
}
inline Resource model_resource(const Model& m) {
  return std::visit([](const auto& x) { return x.resource; }, m);
}
inline double model_r2(const Model& m) {
  return std::visit([](const auto& x) { return x.training_r2; }, m);
}

namespace detail {

/// Records of one block (and platform, when several are present).
inline std::vector<SynthesisRecord> block_records(const Dataset& dataset, BlockKind block,
                                                  const std::string& platform = {}) {
  std::vector<SynthesisRecord> out;
  std::set<std::string> platforms;
  for (const auto& r : dataset.records) {
    if (r.block != block) continue;
    if (!platform.empty() && r.platform != platform) continue;
    platforms.insert(r.platform);
    out.push_back(r);
  }
  if (out.empty()) {
    throw Error(ErrorKind::insufficient_data,
                "no records for block " + std::string(to_string(block)) +
                    (platform.empty() ? std::string() : " on platform " + platform));
  }
  if (platforms.size() > 1) {
    throw Error(ErrorKind::insufficient_data,
                "records for " + std::string(to_string(block)) +
                    " span several platforms; select one");
  }
  return out;
}

inline FittedDomain domain_of(std::span<const SynthesisRecord> records) {
  FittedDomain dom{{max_sweep_bits, min_sweep_bits}, {max_sweep_bits, min_sweep_bits}};
  for (const auto& r : records) {
    dom.data_bits.min = std::min(dom.data_bits.min, r.cfg.data_bits);
    dom.data_bits.max = std::max(dom.data_bits.max, r.cfg.data_bits);
    dom.coeff_bits.min = std::min(dom.coeff_bits.min, r.cfg.coeff_bits);
    dom.coeff_bits.max = std::max(dom.coeff_bits.max, r.cfg.coeff_bits);
  }
  return dom;
}

inline double r_squared(double sse, std::span<const double> y) {
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double sst = 0.0;
  for (double v : y) sst += (v - mean) * (v - mean);
  auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  if (*lo == *hi || sst == 0.0) return sse <= 1e-24 * (1.0 + *hi * *hi) ? 1.0 : 0.0;
  return 1.0 - sse / sst;
}

inline Matrix design_matrix(std::span<const SynthesisRecord> records,
                            std::span<const MonomialTerm> terms) {
  Matrix x(records.size(), terms.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    for (std::size_t k = 0; k < terms.size(); ++k)
      x(i, k) = term_value(terms[k], records[i].cfg.data_bits, records[i].cfg.coeff_bits);
  return x;
}

struct TermFit {
  PolynomialModel model;
  LeastSquaresSolution solution;
};

inline TermFit fit_terms(std::span<const SynthesisRecord> records, BlockKind block,
                         Resource resource, std::vector<MonomialTerm> terms, int degree) {
  std::set<ConfigPoint> configs;
  for (const auto& r : records) configs.insert(r.cfg);
  if (configs.size() < 2 * terms.size()) {
    throw Error(ErrorKind::insufficient_data,
                "degree-" + std::to_string(degree) + " fit of " + std::string(to_string(block)) +
                    " needs " + std::to_string(2 * terms.size()) +
                    " distinct configurations, found " + std::to_string(configs.size()));
  }
  const auto y = resource_values(records, resource);
  auto solution = solve_least_squares(design_matrix(records, terms), y);
  if (!solution.deficient_columns.empty()) {
    std::string names;
    for (auto k : solution.deficient_columns) {
      if (!names.empty()) names += ", ";
      names += term_name(terms[k]);
    }
    throw Error(ErrorKind::rank_deficient,
                "rank-deficient design for " + std::string(to_string(block)) +
                    ": basis terms {" + names + "} are collinear with earlier terms");
  }

  PolynomialModel model;
  model.block = block;
  model.resource = resource;
  model.degree = degree;
  model.terms = std::move(terms);
  model.coefficients = solution.beta;
  model.training_r2 = r_squared(solution.sse, y);
  model.domain = domain_of(records);
  return {std::move(model), std::move(solution)};
}

}  // namespace detail

/// Ordinary least squares over the full bivariate basis of `degree`.
inline PolynomialModel fit_polynomial(const Dataset& dataset, BlockKind block, Resource resource,
                                      int degree, const std::string& platform = {}) {
  if (degree < 1 || degree > max_polynomial_degree) {
    throw Error(ErrorKind::invalid_config, "polynomial degree must be in 1..4");
  }
  const auto records = detail::block_records(dataset, block, platform);
  return detail::fit_terms(records, block, resource, full_basis(degree), degree).model;
}

struct TermTest {
  MonomialTerm term;
  double coefficient = 0.0;
  double p_value = 0.0;  // NaN when untestable
  bool removed = false;
};

struct PruneOutcome {
  PolynomialModel model;
  std::vector<TermTest> tests;
  bool perfect_fit = false;
};

namespace detail {

inline PruneOutcome prune_records(const PolynomialModel& model,
                                  std::span<const SynthesisRecord> records, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw Error(ErrorKind::invalid_config, "prune alpha must lie in (0, 1]");
  }
  const auto fitted = fit_terms(records, model.block, model.resource, model.terms, model.degree);
  const auto& sol = fitted.solution;
  const auto y = resource_values(records, model.resource);
  double ysq = 0.0;
  for (double v : y) ysq += v * v;

  const auto n = records.size();
  const auto p = model.terms.size();
  PruneOutcome out;
  out.perfect_fit = sol.sse <= 1e-18 * ysq;

  std::vector<MonomialTerm> kept;
  for (std::size_t k = 0; k < p; ++k) {
    TermTest test{model.terms[k], sol.beta[k], std::numeric_limits<double>::quiet_NaN(), false};
    const bool intercept = model.terms[k] == MonomialTerm{0, 0};
    if (out.perfect_fit) {
      // No residual variance: keep exactly the terms that contribute.
      double col = 0.0;
      for (const auto& r : records) {
        const double v = term_value(model.terms[k], r.cfg.data_bits, r.cfg.coeff_bits);
        col += v * v;
      }
      const bool negligible = std::abs(sol.beta[k]) * std::sqrt(col) <= 1e-9 * std::sqrt(ysq);
      test.p_value = negligible ? 1.0 : 0.0;
      test.removed = !intercept && negligible;
    } else if (n > p) {
      const double dof = static_cast<double>(n - p);
      const double sigma2 = sol.sse / dof;
      const double se = std::sqrt(sigma2 * sol.inverse_gram_diagonal[k]);
      const double t = se > 0.0 ? std::abs(sol.beta[k]) / se : std::numeric_limits<double>::infinity();
      const boost::math::students_t_distribution<double> dist(dof);
      test.p_value = std::isinf(t) ? 0.0 : 2.0 * boost::math::cdf(boost::math::complement(dist, t));
      test.removed = !intercept && test.p_value > alpha;
    }
    if (!test.removed) kept.push_back(model.terms[k]);
    out.tests.push_back(test);
  }

  if (kept.size() == p) {
    out.model = fitted.model;
  } else {
    out.model = fit_terms(records, model.block, model.resource, kept, model.degree).model;
  }
  return out;
}

}  // namespace detail

/// Drops every non-intercept term whose two-sided t-test p-value exceeds
/// `alpha` in one pass, then refits on the surviving basis.
inline PruneOutcome prune_detailed(const PolynomialModel& model, const Dataset& dataset,
                                   double alpha = 0.05, const std::string& platform = {}) {
  return detail::prune_records(model, detail::block_records(dataset, model.block, platform), alpha);
}

inline PolynomialModel prune_insignificant(const PolynomialModel& model, const Dataset& dataset,
                                           double alpha = 0.05, const std::string& platform = {}) {
  return prune_detailed(model, dataset, alpha, platform).model;
}

inline constexpr double r2_tie_tolerance = 1e-12;

/// Parsimony rule over a per-degree R^2 ladder (index 0 = degree 1): the
/// smallest R^2 that still reaches the threshold wins, ties go to the lower
/// degree. Returns the 1-based degree.
inline std::optional<int> choose_degree(std::span<const std::optional<double>> r2_by_degree,
                                        double threshold) {
  std::optional<int> best;
  double best_r2 = 0.0;
  for (std::size_t k = 0; k < r2_by_degree.size(); ++k) {
    const auto& r2 = r2_by_degree[k];
    if (!r2 || *r2 < threshold) continue;
    if (!best || *r2 < best_r2 - r2_tie_tolerance) {
      best = static_cast<int>(k) + 1;
      best_r2 = *r2;
    }
  }
  return best;
}

struct SegmentedOptions {
  int max_segments = 4;
  double r2_threshold = 0.9;
  double max_data_correlation = 0.05;
};

namespace detail {

struct SegmentStats {
  double value = 0.0;
  double sse = 0.0;
};

// Mean and SSE of a group; constant groups reproduce their value exactly.
inline SegmentStats segment_stats(std::span<const double> ys) {
  auto [lo, hi] = std::minmax_element(ys.begin(), ys.end());
  if (*lo == *hi) return {*lo, 0.0};
  double mean = 0.0;
  for (double v : ys) mean += v;
  mean /= static_cast<double>(ys.size());
  double corr = 0.0;
  for (double v : ys) corr += v - mean;
  mean += corr / static_cast<double>(ys.size());
  double sse = 0.0;
  for (double v : ys) sse += (v - mean) * (v - mean);
  return {mean, sse};
}

inline SegmentedModel fit_segmented_records(std::span<const SynthesisRecord> records,
                                            BlockKind block, Resource resource,
                                            const SegmentedOptions& options) {
  if (options.max_segments < 1) {
    throw Error(ErrorKind::invalid_config, "max_segments must be at least 1");
  }
  const auto y = resource_values(records, resource);
  const auto d = column_values(records, Column::data_bits);
  const double r_data = pearson(d, y);
  if (std::abs(r_data) > options.max_data_correlation) {
    throw Error(ErrorKind::guard_violation,
                std::string(to_string(block)) + " " + std::string(to_string(resource)) +
                    " depends on data_bits (r = " + format_fixed(r_data, 3) +
                    "); a single-variable segmented model is not justified");
  }

  std::vector<int> cs;
  for (const auto& r : records) cs.push_back(r.cfg.coeff_bits);
  std::sort(cs.begin(), cs.end());
  cs.erase(std::unique(cs.begin(), cs.end()), cs.end());
  if (cs.size() < 2) {
    throw Error(ErrorKind::insufficient_data,
                "segmented fit needs at least 2 distinct coeff_bits values");
  }
  std::vector<std::vector<double>> groups(cs.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto pos = std::lower_bound(cs.begin(), cs.end(), records[i].cfg.coeff_bits) - cs.begin();
    groups[static_cast<std::size_t>(pos)].push_back(y[i]);
  }

  const double sst = [&] {
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double s = 0.0;
    for (double v : y) s += (v - mean) * (v - mean);
    return s;
  }();
  const double tie = 1e-12 * std::max(sst, 1e-300);

  // Evaluates one cut set: cuts[k] is the index into `cs` where segment k+1 starts.
  auto evaluate_cuts = [&](const std::vector<std::size_t>& cuts) {
    SegmentedModel m;
    m.block = block;
    m.resource = resource;
    double sse = 0.0;
    std::size_t begin = 0;
    for (std::size_t s = 0; s <= cuts.size(); ++s) {
      const std::size_t end = s < cuts.size() ? cuts[s] : cs.size();
      std::vector<double> ys;
      for (std::size_t g = begin; g < end; ++g) ys.insert(ys.end(), groups[g].begin(), groups[g].end());
      const auto stats = segment_stats(ys);
      m.segment_values.push_back(stats.value);
      sse += stats.sse;
      if (s < cuts.size()) m.breakpoints.push_back(cs[cuts[s]]);
      begin = end;
    }
    return std::make_pair(std::move(m), sse);
  };

  std::optional<SegmentedModel> best;
  double best_sse = 0.0;
  const auto max_segments = std::min<std::size_t>(static_cast<std::size_t>(options.max_segments), cs.size());
  for (std::size_t segments = 1; segments <= max_segments; ++segments) {
    std::optional<SegmentedModel> level_best;
    double level_sse = 0.0;
    // Lexicographic enumeration of increasing cut indices in [1, |cs|-1].
    std::vector<std::size_t> cuts(segments - 1);
    for (std::size_t k = 0; k < cuts.size(); ++k) cuts[k] = k + 1;
    while (true) {
      auto [model, sse] = evaluate_cuts(cuts);
      if (!level_best || sse < level_sse - tie) {
        level_best = std::move(model);
        level_sse = sse;
      }
      // advance
      std::size_t k = cuts.size();
      while (k > 0 && cuts[k - 1] == cs.size() - 1 - (cuts.size() - k)) --k;
      if (k == 0) break;
      ++cuts[k - 1];
      for (std::size_t j = k; j < cuts.size(); ++j) cuts[j] = cuts[j - 1] + 1;
    }
    level_best->training_r2 = r_squared(level_sse, y);
    best = std::move(level_best);
    best_sse = level_sse;
    if (best->training_r2 >= options.r2_threshold) break;
  }
  (void)best_sse;
  best->domain = domain_of(records);
  return *best;
}

}  // namespace detail

/// Piecewise-constant regression of the resource on coeff_bits: the fewest
/// segments reaching the R^2 threshold, minimal SSE within that count, ties
/// resolved toward the leftmost breakpoints. If no count up to
/// `max_segments` reaches the threshold, the best max-count model is returned.
inline SegmentedModel fit_segmented(const Dataset& dataset, BlockKind block, Resource resource,
                                    const SegmentedOptions& options = {},
                                    const std::string& platform = {}) {
  return detail::fit_segmented_records(detail::block_records(dataset, block, platform), block,
                                       resource, options);
}

struct SelectOptions {
  double r2_threshold = 0.9;
  double alpha = 0.05;
  int max_degree = max_polynomial_degree;
  int max_segments = 4;
  std::string platform;
};

enum class Route { polynomial, segmented, none };

constexpr std::string_view to_string(Route route) {
  switch (route) {
    case Route::polynomial: return "polynomial";
    case Route::segmented: return "segmented";
    case Route::none: return "none";
  }
  return "?";
}

struct ModelSelectionReport {
  std::vector<std::optional<double>> r2_by_degree;  // index 0 = degree 1
  std::vector<std::string> degree_notes;            // why a degree was not fitted
  std::optional<int> chosen_degree;
  bool accepted = false;  // a polynomial degree reached the threshold
  std::vector<TermTest> prune_tests;
  std::optional<double> pruned_r2;
  bool pruned_kept = false;
  std::optional<double> segmented_r2;
  std::string segmented_note;
  Route route = Route::none;
};

struct Selection {
  std::optional<Model> model;
  ModelSelectionReport report;
};

namespace detail {

inline std::size_t parameter_count(const PolynomialModel& m) { return m.terms.size(); }
inline std::size_t parameter_count(const SegmentedModel& m) {
  return m.segment_values.size() + m.breakpoints.size();
}

}  // namespace detail

/// Fit degrees 1..max_degree, keep the least-R^2 model that still reaches the
/// threshold, prune insignificant terms (keeping the pruned model only if it
/// still reaches the threshold). When the target does not depend on the
/// data width, a segmented model on coeff_bits is also fitted; it replaces
/// the polynomial when it reaches the threshold with a strictly higher R^2
/// and no more parameters, or when no polynomial qualifies.
inline Selection select_model(const Dataset& dataset, BlockKind block, Resource resource,
                              const SelectOptions& options = {}) {
  const auto records = detail::block_records(dataset, block, options.platform);
  Selection sel;
  auto& rep = sel.report;

  std::vector<std::optional<PolynomialModel>> fits;
  for (int degree = 1; degree <= options.max_degree; ++degree) {
    try {
      auto fit = detail::fit_terms(records, block, resource, full_basis(degree), degree).model;
      rep.r2_by_degree.push_back(fit.training_r2);
      rep.degree_notes.emplace_back();
      fits.push_back(std::move(fit));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::insufficient_data && e.kind() != ErrorKind::rank_deficient) throw;
      rep.r2_by_degree.push_back(std::nullopt);
      rep.degree_notes.emplace_back(e.what());
      fits.emplace_back();
    }
  }
  if (!fits.empty() && !fits.front()) {
    throw Error(ErrorKind::insufficient_data, rep.degree_notes.front());
  }

  std::optional<PolynomialModel> poly;
  rep.chosen_degree = choose_degree(rep.r2_by_degree, options.r2_threshold);
  rep.accepted = rep.chosen_degree.has_value();
  if (rep.chosen_degree) {
    poly = *fits[static_cast<std::size_t>(*rep.chosen_degree - 1)];
    auto pruned = detail::prune_records(*poly, records, options.alpha);
    rep.prune_tests = pruned.tests;
    rep.pruned_r2 = pruned.model.training_r2;
    if (pruned.model.training_r2 >= options.r2_threshold) {
      poly = std::move(pruned.model);
      rep.pruned_kept = true;
    }
  }

  std::optional<SegmentedModel> seg;
  try {
    seg = detail::fit_segmented_records(
        records, block, resource,
        {options.max_segments, options.r2_threshold, SegmentedOptions{}.max_data_correlation});
    rep.segmented_r2 = seg->training_r2;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::guard_violation && e.kind() != ErrorKind::insufficient_data) throw;
    rep.segmented_note = e.what();
  }

  const bool seg_ok = seg && seg->training_r2 >= options.r2_threshold;
  if (seg_ok && (!poly || (seg->training_r2 > poly->training_r2 + r2_tie_tolerance &&
                           detail::parameter_count(*seg) <= detail::parameter_count(*poly)))) {
    rep.route = Route::segmented;
    sel.model = std::move(*seg);
  } else if (poly) {
    rep.route = Route::polynomial;
    sel.model = std::move(*poly);
  }
  return sel;
}

struct Prediction {
  double value = 0.0;
  bool extrapolated = false;
  bool clamped = false;
};

inline Prediction predict_checked(const Model& model, ConfigPoint cfg) {
  Prediction out;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        out.extrapolated = !m.domain.contains(cfg);
        if constexpr (std::is_same_v<T, PolynomialModel>) {
          for (std::size_t k = 0; k < m.terms.size(); ++k)
            out.value += m.coefficients[k] * term_value(m.terms[k], cfg.data_bits, cfg.coeff_bits);
        } else {
          out.value = m.segment_values[m.segment_of(cfg.coeff_bits)];
        }
      },
      model);
  if (out.value < 0.0) {
    out.value = 0.0;
    out.clamped = true;
  }
  return out;
}

inline double predict(const Model& model, ConfigPoint cfg) { return predict_checked(model, cfg).value; }

}  // namespace convcast
