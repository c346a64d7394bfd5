// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "convcast/convcast.hpp"

using namespace convcast;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s [%d] %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fixed(double v, int digits = 4) { return detail::format_fixed(v, digits); }

Dataset exact_sweep(std::uint64_t seed = 42, double sigma = 0.0) {
  GenerateRequest req;
  req.rounding = Rounding::none;
  req.noise = {sigma, seed};
  return generate_dataset(req);
}

ModelSet fitted_models(const Dataset& ds) {
  ModelSet models;
  for (BlockKind b : all_blocks) {
    for (Resource r : {Resource::llut, Resource::mlut, Resource::ff, Resource::cchain}) {
      if (r == Resource::cchain && !descriptor(b).uses_cchain) continue;
      auto sel = select_model(ds, b, r);
      if (!sel.model) throw Error(ErrorKind::no_model, "no model for " + std::string(to_string(b)));
      models.add(std::move(*sel.model));
    }
  }
  return models;
}

void criterion_conv4_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto m = fit_polynomial(exact_sweep(), BlockKind::conv4, Resource::llut, 1);
  const double secs = seconds_since(t0);
  const double e0 = std::abs(*m.coefficient({0, 0}) - 20.886);
  const double e1 = std::abs(*m.coefficient({1, 0}) - 1.004);
  const double e2 = std::abs(*m.coefficient({0, 1}) - 1.037);
  const double er = std::abs(m.training_r2 - 1.0);
  const bool ok = e0 <= 1e-6 && e1 <= 1e-6 && e2 <= 1e-6 && er <= 1e-12 && secs < 1.0;
  std::ostringstream s;
  s << "coef errors " << e0 << ", " << e1 << ", " << e2 << "; |R2-1| = " << er << "; " << fixed(secs, 3)
    << " s";
  report(1, "conv4 LLUT model recovery", ok, s.str());
}

void criterion_table_reproduction() {
  struct Row {
    BlockCounts counts;
    double llut, ff, dsp, cchain;
    long long convs;
    double tol;
  };
  const Row rows[] = {
      {{1380, 284, 800, 150}, 80.4, 23.3, 80.0, 44.5, 3564, 0.5},
      {{1770, 0, 0, 0}, 80.0, 20.5, 0.0, 57.1, 1770, 0.15},
      {{0, 1382, 0, 0}, 14.9, 6.4, 79.9, 0.0, 1382, 0.15},
      {{0, 0, 1382, 0}, 21.5, 9.2, 79.9, 0.0, 2764, 0.15},
      {{0, 0, 0, 691}, 11.1, 3.3, 79.9, 0.0, 1382, 0.15},
  };
  const auto t0 = std::chrono::steady_clock::now();
  const auto models = fitted_models(exact_sweep());
  const auto costs = build_cost_table(models, {8, 8}, all_blocks);
  bool ok = true;
  double worst = 0.0;
  std::ostringstream s;
  for (const auto& row : rows) {
    const auto u = predict_usage(row.counts, costs, zcu104_capacity());
    const double dev[] = {std::abs(u.usage_percent.llut - row.llut), std::abs(u.usage_percent.ff - row.ff),
                          std::abs(u.usage_percent.dsp - row.dsp),
                          std::abs(u.usage_percent.cchain - row.cchain)};
    for (double d : dev) {
      worst = std::max(worst, d / row.tol);
      ok = ok && d <= row.tol;
    }
    ok = ok && u.total_convs == row.convs;
    s << "(" << fixed(u.usage_percent.llut, 2) << "," << fixed(u.usage_percent.ff, 2) << ","
      << fixed(u.usage_percent.dsp, 2) << "," << fixed(u.usage_percent.cchain, 2) << ";" << u.total_convs
      << ") ";
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 1.0;
  s << "worst deviation " << fixed(100.0 * worst, 1) << "% of tolerance; " << fixed(secs, 3) << " s";
  report(2, "utilization table reproduction", ok, s.str());
}

void criterion_allocation() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto models = fitted_models(exact_sweep());
  AllocationRequest base;
  base.cfg = {8, 8};
  base.costs = build_cost_table(models, base.cfg, all_blocks);

  const auto all = allocate_optimal(base);
  bool feasible = true;
  for (Resource r : all_resources)
    if (r != Resource::mlut) feasible = feasible && all.usage_percent[r] <= 80.0 + 1e-9;

  auto only1 = base;
  only1.allowed = {BlockKind::conv1};
  const auto plan1 = allocate_optimal(only1);

  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> jitter(0.5, 1.5);
  std::uniform_real_distribution<double> budget(0.3, 1.0);
  int mismatches = 0;
  int instances = 0;
  while (instances < 1000) {
    AllocationRequest req = base;
    double scale = std::uniform_real_distribution<double>(0.005, 0.06)(rng);
    for (BlockKind k : all_blocks) {
      auto row = base.costs.at(k);
      for (Resource r : {Resource::llut, Resource::mlut, Resource::ff, Resource::cchain}) row[r] *= jitter(rng);
      req.costs.set(k, row);
    }
    for (Resource r : all_resources) req.budget[r] = budget(rng);
    req.constrain_mlut = rng() % 4 == 0;
    req.allowed.clear();
    for (BlockKind k : all_blocks)
      if (rng() % 5 != 0) req.allowed.push_back(k);
    for (int attempt = 0;; ++attempt) {
      auto scaled = req;
      scaled.platform.platform_id = "scaled";
      for (Resource r : all_resources) scaled.platform.totals[r] = base.platform.totals[r] * scale;
      try {
        const auto slow = allocate_bruteforce(scaled, 1e6);
        const auto fast = allocate_optimal(scaled);
        if (fast.total_convs != slow.total_convs) ++mismatches;
        ++instances;
        break;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::search_too_large) throw;
        scale *= 0.7;
      }
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = all.total_convs >= 3564 && feasible && plan1.counts == BlockCounts{1770, 0, 0, 0} &&
                  mismatches == 0 && secs < 60.0;
  std::ostringstream s;
  s << "all blocks " << all.total_convs << " convs (" << all.counts[0] << "," << all.counts[1] << ","
    << all.counts[2] << "," << all.counts[3] << "), feasible=" << (feasible ? "yes" : "no")
    << "; conv1 only " << plan1.counts[0] << "; " << mismatches << " mismatches over " << instances
    << " brute-force instances; " << fixed(secs, 2) << " s";
  report(3, "budgeted allocation", ok, s.str());
}

void criterion_conv3_segmented() {
  const auto ds = exact_sweep();
  const auto sel = select_model(ds, BlockKind::conv3, Resource::llut);
  bool ok = sel.report.route == Route::segmented && sel.model.has_value();
  MetricsReport exact{};
  if (ok) {
    std::vector<double> preds, truths;
    for (const auto& r : ds.for_block(BlockKind::conv3)) {
      preds.push_back(predict(*sel.model, r.cfg));
      truths.push_back(r.measured.llut);
    }
    exact = evaluate(preds, truths);
    ok = exact.mse == 0.0 && exact.mae == 0.0 && exact.r2 == 1.0 && exact.mape_percent == 0.0;
  }

  // MAPE and R^2 of each seed's fit against that seed's noisy observations.
  double worst_mape = 0.0, worst_r2 = 1.0;
  std::string over_limit;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto noisy = exact_sweep(seed, 0.03);
    const auto fit = select_model(noisy, BlockKind::conv1, Resource::llut);
    if (!fit.model) {
      worst_r2 = 0.0;
      worst_mape = 100.0;
      over_limit += " seed " + std::to_string(seed) + " (no model)";
      continue;
    }
    std::vector<double> preds, truths;
    for (const auto& r : noisy.for_block(BlockKind::conv1)) {
      preds.push_back(predict(*fit.model, r.cfg));
      truths.push_back(r.measured.llut);
    }
    const auto m = evaluate(preds, truths);
    worst_mape = std::max(worst_mape, m.mape_percent);
    worst_r2 = std::min(worst_r2, m.r2);
    if (m.mape_percent > 5.0 || m.r2 < 0.99) {
      std::string removed;
      for (const auto& t : fit.report.prune_tests)
        if (t.removed) removed += (removed.empty() ? "" : ",") + term_name(t.term);
      over_limit += " seed " + std::to_string(seed) + " (MAPE " + fixed(m.mape_percent, 3) +
                    "%, pruned {" + removed + "})";
    }
  }
  ok = ok && worst_mape <= 5.0 && worst_r2 >= 0.99;
  std::ostringstream s;
  s << "conv3 route " << to_string(sel.report.route) << ", MSE " << exact.mse << ", MAE " << exact.mae
    << ", R2 " << exact.r2 << ", MAPE " << exact.mape_percent << "; conv1 at sigma 0.03 over 20 seeds: "
    << "worst MAPE " << fixed(worst_mape, 3) << "%, worst R2 " << fixed(worst_r2, 5);
  if (!over_limit.empty()) s << "; over limit:" << over_limit;
  report(4, "conv3 exact segmented fit", ok, s.str());
}

void criterion_correlation() {
  const auto ds = exact_sweep();
  double worst = 0.0;
  for (BlockKind b : all_blocks) {
    const auto m = correlation_matrix(ds, b);
    worst = std::max(worst, std::abs(m.at(Column::llut, Column::mlut) - 1.0));
    if (b != BlockKind::conv1) worst = std::max(worst, std::abs(m.at(Column::ff, Column::data_bits)));
  }
  worst = std::max(worst, std::abs(correlation_matrix(ds, BlockKind::conv3).at(Column::llut, Column::data_bits)));
  std::ostringstream s;
  s << "largest deviation from the exact entries " << worst;
  report(5, "correlation structure", worst <= 1e-12, s.str());
}

void criterion_packing() {
  const auto t0 = std::chrono::steady_clock::now();
  std::uint64_t mismatches = 0, count = 0;
  for (std::int64_t d1 = -128; d1 <= 127; ++d1)
    for (std::int64_t d2 = -128; d2 <= 127; ++d2)
      for (std::int64_t w = -128; w <= 127; ++w) {
        const auto p = pack_mul(d1, d2, w, 8, 8);
        mismatches += (p.p1 != d1 * w || p.p2 != d2 * w) ? 1 : 0;
        ++count;
      }
  const double secs = seconds_since(t0);
  std::ostringstream s;
  s << mismatches << " mismatches over " << count << " triples; " << fixed(secs, 2) << " s";
  report(6, "packing equivalence", mismatches == 0 && count == (1ull << 24) && secs < 120.0, s.str());
}

void criterion_simulator() {
  std::mt19937_64 rng(77);
  std::uint64_t mismatches = 0, cycle_errors = 0, frames = 0;
  for (BlockKind kind : all_blocks) {
    const int bits = descriptor(kind).max_operand_bits;
    const std::int64_t lo = -(std::int64_t{1} << (bits - 1)), hi = (std::int64_t{1} << (bits - 1)) - 1;
    std::uniform_int_distribution<std::int64_t> value(lo, hi);
    for (int trial = 0; trial < 100; ++trial) {
      Frame frame{64, 64, bits, {}};
      for (int i = 0; i < 64 * 64; ++i) frame.pixels.push_back(value(rng));
      std::array<std::int64_t, 9> k{};
      for (auto& w : k) w = value(rng);
      const auto result = convolve_frame(kind, {bits, bits}, frame, make_kernel(k, bits));
      for (int r = 0; r < 62; ++r)
        for (int c = 0; c < 62; ++c) {
          std::int64_t acc = 0;
          for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) acc += frame.at(r + i, c + j) * k[static_cast<std::size_t>(i * 3 + j)];
          mismatches += result.at(r, c).value != acc ? 1 : 0;
        }
      const std::uint64_t n = 62 * 62;
      const auto lanes = static_cast<std::uint64_t>(descriptor(kind).convs_per_cycle);
      cycle_errors += result.cycles != 9 + (n + lanes - 1) / lanes ? 1 : 0;
      ++frames;
    }
  }
  std::ostringstream s;
  s << frames << " frames, " << mismatches << " output mismatches, " << cycle_errors << " cycle-count errors";
  report(7, "simulator equivalence", mismatches == 0 && cycle_errors == 0 && frames == 400, s.str());
}

void criterion_regression_engine() {
  std::mt19937_64 rng(5);
  bool recovery = true;
  double worst_coef = 0.0;
  for (int degree = 1; degree <= max_polynomial_degree; ++degree) {
    for (int trial = 0; trial < 10; ++trial) {
      const auto basis = full_basis(degree);
      std::vector<double> truth;
      for (std::size_t k = 0; k < basis.size(); ++k)
        truth.push_back(static_cast<double>(std::uniform_int_distribution<int>(-5, 5)(rng)));
      Dataset ds;
      for (int d = 3; d <= 16; ++d)
        for (int c = 3; c <= 16; ++c) {
          ResourceVector v;
          for (std::size_t k = 0; k < basis.size(); ++k) v.llut += truth[k] * term_value(basis[k], d, c);
          ds.records.push_back({BlockKind::conv2, "zcu104", {d, c}, v});
        }
      const auto m = fit_polynomial(ds, BlockKind::conv2, Resource::llut, degree);
      for (std::size_t k = 0; k < basis.size(); ++k) {
        const double err = std::abs(m.coefficients[k] - truth[k]);
        worst_coef = std::max(worst_coef, err);
        recovery = recovery && err <= 1e-6;
      }
      recovery = recovery && std::abs(m.training_r2 - 1.0) <= 1e-9;
    }
  }

  double worst_orth = 0.0;
  bool monotone = true;
  std::normal_distribution<double> noise(0.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    Dataset ds;
    for (int d = 3; d <= 16; ++d)
      for (int c = 3; c <= 16; ++c) {
        ResourceVector v;
        v.llut = 40.0 + 0.5 * d * c + 3.0 * std::cos(d * 0.7 + c) + noise(rng);
        ds.records.push_back({BlockKind::conv2, "zcu104", {d, c}, v});
      }
    double ynorm = 0.0;
    for (const auto& r : ds.records) ynorm += r.measured.llut * r.measured.llut;
    ynorm = std::sqrt(ynorm);
    double prev = -1.0;
    for (int degree = 1; degree <= max_polynomial_degree; ++degree) {
      const auto m = fit_polynomial(ds, BlockKind::conv2, Resource::llut, degree);
      monotone = monotone && m.training_r2 >= prev - 1e-12;
      prev = m.training_r2;
      for (const auto& t : m.terms) {
        double dot = 0.0, xnorm = 0.0;
        for (const auto& r : ds.records) {
          const double x = term_value(t, r.cfg.data_bits, r.cfg.coeff_bits);
          double fit = 0.0;
          for (std::size_t k = 0; k < m.terms.size(); ++k)
            fit += m.coefficients[k] * term_value(m.terms[k], r.cfg.data_bits, r.cfg.coeff_bits);
          dot += x * (r.measured.llut - fit);
          xnorm += x * x;
        }
        worst_orth = std::max(worst_orth, std::abs(dot) / (std::sqrt(xnorm) * ynorm));
      }
    }
  }

  using Ladder = std::vector<std::optional<double>>;
  const bool parsimony = choose_degree(Ladder{0.95, 0.97, 0.98, 0.99}, 0.9) == 1 &&
                         choose_degree(Ladder{0.85, 1.0, 1.0, 1.0}, 0.9) == 2 &&
                         choose_degree(Ladder{0.5, 0.93, 0.91, 0.99}, 0.9) == 3 &&
                         choose_degree(Ladder{0.5, 0.6, 0.7, 0.8}, 0.9) == std::nullopt;

  const bool ok = recovery && worst_orth <= 1e-8 && monotone && parsimony;
  std::ostringstream s;
  s << "recovery worst coef error " << worst_coef << "; orthogonality " << worst_orth
    << "; monotone=" << (monotone ? "yes" : "no") << "; parsimony=" << (parsimony ? "yes" : "no");
  report(8, "regression engine properties", ok, s.str());
}

void guarded(const std::function<void()>& f, int id, const char* name) {
  try {
    f();
  } catch (const std::exception& e) {
    report(id, name, false, std::string("exception: ") + e.what());
  }
}

}  // namespace

int main() {
  guarded(criterion_conv4_recovery, 1, "conv4 LLUT model recovery");
  guarded(criterion_table_reproduction, 2, "utilization table reproduction");
  guarded(criterion_allocation, 3, "budgeted allocation");
  guarded(criterion_conv3_segmented, 4, "conv3 exact segmented fit");
  guarded(criterion_correlation, 5, "correlation structure");
  guarded(criterion_packing, 6, "packing equivalence");
  guarded(criterion_simulator, 7, "simulator equivalence");
  guarded(criterion_regression_engine, 8, "regression engine properties");
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
