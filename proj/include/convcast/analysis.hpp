#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "convcast/error.hpp"
#include "convcast/model_core.hpp"
#include "convcast/synth_data.hpp"

namespace convcast {

/// Sample Pearson correlation. A constant series yields 0 rather than NaN.
inline double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw Error(ErrorKind::insufficient_data, "pearson: length mismatch (" +
                                                  std::to_string(xs.size()) + " vs " +
                                                  std::to_string(ys.size()) + ")");
  }
  if (xs.size() < 2) throw Error(ErrorKind::insufficient_data, "pearson: need at least 2 points");

  auto constant = [](std::span<const double> v) {
    auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *lo == *hi;
  };
  if (constant(xs) || constant(ys)) return 0.0;

  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

enum class Column { data_bits, coeff_bits, llut, mlut, ff, cchain };

constexpr std::string_view to_string(Column column) {
  switch (column) {
    case Column::data_bits: return "data_bits";
    case Column::coeff_bits: return "coeff_bits";
    case Column::llut: return "llut";
    case Column::mlut: return "mlut";
    case Column::ff: return "ff";
    case Column::cchain: return "cchain";
  }
  return "?";
}

inline std::vector<double> column_values(std::span<const SynthesisRecord> records, Column column) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    switch (column) {
      case Column::data_bits: out.push_back(r.cfg.data_bits); break;
      case Column::coeff_bits: out.push_back(r.cfg.coeff_bits); break;
      case Column::llut: out.push_back(r.measured.llut); break;
      case Column::mlut: out.push_back(r.measured.mlut); break;
      case Column::ff: out.push_back(r.measured.ff); break;
      case Column::cchain: out.push_back(r.measured.cchain); break;
    }
  }
  return out;
}

inline std::vector<double> resource_values(std::span<const SynthesisRecord> records, Resource r) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& rec : records) out.push_back(rec.measured[r]);
  return out;
}

struct CorrelationMatrix {
  std::vector<Column> labels;
  std::vector<std::vector<double>> r;
  std::vector<Column> excluded;  // resource columns identically zero for the block

  double at(Column a, Column b) const {
    auto pos = [this](Column c) -> std::size_t {
      auto it = std::find(labels.begin(), labels.end(), c);
      if (it == labels.end()) {
        throw Error(ErrorKind::insufficient_data,
                    "column '" + std::string(to_string(c)) + "' not in matrix");
      }
      return static_cast<std::size_t>(it - labels.begin());
    };
    return r[pos(a)][pos(b)];
  }
};

/// Correlations among the widths and every resource column that is not
/// identically zero for `block`.
inline CorrelationMatrix correlation_matrix(const Dataset& dataset, BlockKind block) {
  const auto records = dataset.for_block(block);
  if (records.size() < 2) {
    throw Error(ErrorKind::insufficient_data, "correlation needs at least 2 records for " +
                                                  std::string(to_string(block)) + ", found " +
                                                  std::to_string(records.size()));
  }
  CorrelationMatrix m;
  m.labels = {Column::data_bits, Column::coeff_bits};
  for (Column c : {Column::llut, Column::mlut, Column::ff, Column::cchain}) {
    const auto values = column_values(records, c);
    const bool all_zero = std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
    (all_zero ? m.excluded : m.labels).push_back(c);
  }

  std::vector<std::vector<double>> columns;
  for (Column c : m.labels) columns.push_back(column_values(records, c));
  const auto n = m.labels.size();
  m.r.assign(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      m.r[i][j] = m.r[j][i] = pearson(columns[i], columns[j]);
    }
  }
  return m;
}

struct MetricsReport {
  double mse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
  double mape_percent = 0.0;
  std::size_t count = 0;
  std::size_t excluded_zero_truth = 0;  // points left out of MAPE
};

/// MSE, MAE, R^2 (around the truth mean) and MAPE of predictions vs truths.
inline MetricsReport evaluate(std::span<const double> predictions, std::span<const double> truths) {
  if (predictions.size() != truths.size()) {
    throw Error(ErrorKind::insufficient_data, "evaluate: length mismatch");
  }
  if (truths.size() < 2) throw Error(ErrorKind::insufficient_data, "evaluate: need at least 2 points");

  const auto n = static_cast<double>(truths.size());
  double mean = 0.0;
  for (double t : truths) mean += t;
  mean /= n;

  MetricsReport report;
  report.count = truths.size();
  double sse = 0.0, sst = 0.0, abs_sum = 0.0, pct_sum = 0.0;
  std::size_t pct_count = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const double err = truths[i] - predictions[i];
    sse += err * err;
    abs_sum += std::abs(err);
    sst += (truths[i] - mean) * (truths[i] - mean);
    if (truths[i] != 0.0) {
      pct_sum += std::abs(err) / std::abs(truths[i]);
      ++pct_count;
    } else {
      ++report.excluded_zero_truth;
    }
  }
  if (pct_count == 0) {
    throw Error(ErrorKind::insufficient_data, "evaluate: all truths are zero, MAPE undefined");
  }
  report.mse = sse / n;
  report.mae = abs_sum / n;
  if (sst == 0.0) {
    report.r2 = sse == 0.0 ? 1.0 : 0.0;
  } else {
    report.r2 = 1.0 - sse / sst;
  }
  report.mape_percent = 100.0 * pct_sum / static_cast<double>(pct_count);
  return report;
}

}  // namespace convcast
