#pragma once

// Utilization prediction for a mix of block instances, and the instance mix
// that maximizes convolutions per cycle under per-resource budgets.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "convcast/error.hpp"
#include "convcast/model_core.hpp"
#include "convcast/model_io.hpp"
#include "convcast/regression.hpp"

namespace convcast {

using BlockCounts = std::array<long long, 4>;

inline long long total_convs(const BlockCounts& counts) {
  long long total = 0;
  for (BlockKind k : all_blocks) total += counts[index_of(k)] * descriptor(k).convs_per_cycle;
  return total;
}

/// Per-block resource cost at one configuration point.
struct CostTable {
  ConfigPoint cfg{};
  std::array<std::optional<ResourceVector>, 4> rows{};

  bool has(BlockKind k) const { return rows[index_of(k)].has_value(); }

  const ResourceVector& at(BlockKind k) const {
    if (!rows[index_of(k)]) {
      throw Error(ErrorKind::missing_model, "no cost row for " + std::string(to_string(k)));
    }
    return *rows[index_of(k)];
  }

  void set(BlockKind k, ResourceVector v) { rows[index_of(k)] = v; }
};

/// LLUT/MLUT/FF come from the models (CChain too, when a model exists;
/// otherwise 0); DSP comes from the block descriptor.
inline CostTable build_cost_table(const ModelSet& models, ConfigPoint cfg,
                                  std::span<const BlockKind> allowed) {
  CostTable table;
  table.cfg = cfg;
  for (BlockKind k : allowed) {
    ResourceVector row;
    for (Resource r : {Resource::llut, Resource::mlut, Resource::ff}) {
      const auto* model = models.find(k, r);
      if (!model) {
        throw Error(ErrorKind::missing_model, "no " + std::string(to_string(r)) + " model for " +
                                                  std::string(to_string(k)));
      }
      row[r] = predict(*model, cfg);
    }
    if (const auto* model = models.find(k, Resource::cchain)) row.cchain = predict(*model, cfg);
    row.dsp = descriptor(k).dsp_per_block;
    table.set(k, row);
  }
  return table;
}

struct UsageReport {
  ResourceVector usage_percent{};
  long long total_convs = 0;
};

inline UsageReport predict_usage(const BlockCounts& counts, const CostTable& costs,
                                 const PlatformCapacity& platform) {
  ResourceVector demand;
  for (BlockKind k : all_blocks) {
    const auto n = counts[index_of(k)];
    if (n < 0) throw Error(ErrorKind::malformed_request, "block counts must be non-negative");
    if (n == 0) continue;
    const auto& row = costs.at(k);
    for (Resource r : all_resources) demand[r] += static_cast<double>(n) * row[r];
  }
  UsageReport report;
  for (Resource r : all_resources) {
    if (demand[r] == 0.0) continue;
    if (platform.totals[r] <= 0.0) {
      throw Error(ErrorKind::malformed_request, platform.platform_id + " has zero " +
                                                    std::string(to_string(r)) +
                                                    " capacity but the mix needs some");
    }
    report.usage_percent[r] = 100.0 * demand[r] / platform.totals[r];
  }
  report.total_convs = total_convs(counts);
  return report;
}

struct AllocationRequest {
  PlatformCapacity platform = zcu104_capacity();
  ConfigPoint cfg{};
  ResourceVector budget{0.8, 0.8, 0.8, 0.8, 0.8};
  std::vector<BlockKind> allowed{all_blocks.begin(), all_blocks.end()};
  CostTable costs{};
  bool constrain_mlut = false;
};

struct AllocationPlan {
  BlockCounts counts{};
  ResourceVector usage_percent{};
  long long total_convs = 0;
};

namespace detail {

struct Constraint {
  Resource resource;
  double capacity;   // budget * total
  double tolerance;  // absolute slack for rounding in the sums
};

inline bool fits(double used, const Constraint& c) { return used <= c.capacity + c.tolerance; }

struct Problem {
  std::vector<BlockKind> blocks;        // allowed, ascending kind order
  std::vector<Constraint> constraints;  // constrained resources
  std::vector<std::vector<double>> cost;  // cost[block_pos][constraint]
  std::vector<double> value;            // convolutions per block
};

inline Problem make_problem(const AllocationRequest& req) {
  Problem p;
  std::vector<BlockKind> allowed(req.allowed.begin(), req.allowed.end());
  std::sort(allowed.begin(), allowed.end());
  allowed.erase(std::unique(allowed.begin(), allowed.end()), allowed.end());
  p.blocks = allowed;

  for (Resource r : all_resources) {
    if (r == Resource::mlut && !req.constrain_mlut) continue;
    const double b = req.budget[r];
    if (!(b > 0.0 && b <= 1.0)) {
      throw Error(ErrorKind::malformed_request, "budget for " + std::string(to_string(r)) +
                                                    " must lie in (0, 1]");
    }
    const double total = req.platform.totals[r];
    if (total < 0.0) throw Error(ErrorKind::malformed_request, "negative capacity");
    p.constraints.push_back({r, b * total, 1e-12 * std::max(1.0, total)});
  }

  for (BlockKind k : p.blocks) {
    const auto& row = req.costs.at(k);
    std::vector<double> c;
    bool limited = false;
    for (const auto& con : p.constraints) {
      const double v = row[con.resource];
      if (v < 0.0 || !std::isfinite(v)) {
        throw Error(ErrorKind::malformed_request, "cost of " + std::string(to_string(k)) +
                                                      " must be finite and non-negative");
      }
      limited = limited || v > 0.0;
      c.push_back(v);
    }
    if (!limited) {
      throw Error(ErrorKind::malformed_request,
                  std::string(to_string(k)) + " consumes no constrained resource; unbounded");
    }
    p.cost.push_back(std::move(c));
    p.value.push_back(descriptor(k).convs_per_cycle);
  }
  return p;
}

/// max c^T x subject to A x <= b, x >= 0, with b >= 0 (so the origin is a
/// feasible basis) and A >= 0 with every column non-zero (so it is bounded).
/// Dense tableau simplex with Bland's rule.
inline double lp_maximize(const std::vector<std::vector<double>>& a, std::vector<double> b,
                          const std::vector<double>& c) {
  const std::size_t m = a.size();
  const std::size_t n = c.size();
  if (n == 0) return 0.0;
  const std::size_t width = n + m + 1;
  std::vector<double> t((m + 1) * width, 0.0);
  auto at = [&](std::size_t r, std::size_t col) -> double& { return t[r * width + col]; };
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) at(i, j) = a[i][j];
    at(i, n + i) = 1.0;
    at(i, width - 1) = std::max(0.0, b[i]);
  }
  for (std::size_t j = 0; j < n; ++j) at(m, j) = -c[j];
  std::vector<std::size_t> basis(m);
  for (std::size_t i = 0; i < m; ++i) basis[i] = n + i;

  constexpr double eps = 1e-12;
  for (int iter = 0; iter < 1000; ++iter) {
    std::size_t enter = width;
    for (std::size_t j = 0; j + 1 < width; ++j) {
      if (at(m, j) < -eps) {
        enter = j;
        break;
      }
    }
    if (enter == width) break;
    std::size_t leave = m;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      if (at(i, enter) > eps) {
        const double ratio = at(i, width - 1) / at(i, enter);
        if (ratio < best_ratio - eps || (std::abs(ratio - best_ratio) <= eps && leave < m &&
                                         basis[i] < basis[leave])) {
          best_ratio = ratio;
          leave = i;
        }
      }
    }
    if (leave == m) return std::numeric_limits<double>::infinity();
    const double pivot = at(leave, enter);
    for (std::size_t j = 0; j < width; ++j) at(leave, j) /= pivot;
    for (std::size_t i = 0; i <= m; ++i) {
      if (i == leave) continue;
      const double f = at(i, enter);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < width; ++j) at(i, j) -= f * at(leave, j);
    }
    basis[leave] = enter;
  }
  return at(m, width - 1);
}

// LP relaxation over blocks [from, end) on top of `used`; optionally the
// first of those blocks is capped at `first_cap` instances.
inline double relaxation(const Problem& p, std::size_t from, const std::vector<double>& used,
                         std::optional<long long> first_cap = std::nullopt) {
  const std::size_t n = p.blocks.size() - from;
  if (n == 0) return 0.0;
  const std::size_t rows = p.constraints.size() + (first_cap ? 1 : 0);
  std::vector<std::vector<double>> a(rows, std::vector<double>(n, 0.0));
  std::vector<double> b(rows);
  std::vector<double> c(n);
  for (std::size_t i = 0; i < p.constraints.size(); ++i) {
    b[i] = p.constraints[i].capacity + p.constraints[i].tolerance - used[i];
    for (std::size_t j = 0; j < n; ++j) a[i][j] = p.cost[from + j][i];
  }
  if (first_cap) {
    a[rows - 1][0] = 1.0;
    b[rows - 1] = static_cast<double>(*first_cap);
  }
  for (std::size_t j = 0; j < n; ++j) c[j] = p.value[from + j];
  return lp_maximize(a, b, c);
}

// Largest count of block `pos` that still fits on top of `used`.
inline long long max_count(const Problem& p, std::size_t pos, const std::vector<double>& used) {
  double bound = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.constraints.size(); ++i) {
    const double cost = p.cost[pos][i];
    if (cost > 0.0) {
      const double room = p.constraints[i].capacity + p.constraints[i].tolerance - used[i];
      bound = std::min(bound, std::max(0.0, room) / cost);
    }
  }
  auto n = static_cast<long long>(std::floor(bound));
  auto feasible = [&](long long count) {
    for (std::size_t i = 0; i < p.constraints.size(); ++i)
      if (!fits(used[i] + static_cast<double>(count) * p.cost[pos][i], p.constraints[i]))
        return false;
    return true;
  };
  while (n > 0 && !feasible(n)) --n;
  while (feasible(n + 1)) ++n;
  return n;
}

inline AllocationPlan finish_plan(const AllocationRequest& req, const BlockCounts& counts) {
  AllocationPlan plan;
  plan.counts = counts;
  const auto usage = predict_usage(counts, req.costs, req.platform);
  plan.usage_percent = usage.usage_percent;
  plan.total_convs = usage.total_convs;
  return plan;
}

}  // namespace detail

/// Optimum of the rational relaxation (an upper bound on total_convs).
inline double relaxation_bound(const AllocationRequest& request) {
  const auto p = detail::make_problem(request);
  return detail::relaxation(p, 0, std::vector<double>(p.constraints.size(), 0.0));
}

/// Integer mix maximizing total convolutions within the budgets.
///
/// Depth-first branch and bound: blocks are fixed in kind order, each from its
/// largest feasible count down to zero, and a subtree is cut when the floor
/// of its LP relaxation cannot beat the incumbent. That visiting order makes
/// the first optimum found the lexicographically largest (n1, n2, n3, n4).
inline AllocationPlan allocate_optimal(const AllocationRequest& request) {
  const auto p = detail::make_problem(request);
  BlockCounts best_counts{};
  long long best = -1;
  BlockCounts counts{};
  std::vector<double> used(p.constraints.size(), 0.0);

  auto dfs = [&](auto&& self, std::size_t level, long long value) -> void {
    if (level == p.blocks.size()) {
      if (value > best) {
        best = value;
        best_counts = counts;
      }
      return;
    }
    const double bound = static_cast<double>(value) + detail::relaxation(p, level, used);
    if (best >= 0 && static_cast<long long>(std::floor(bound + 1e-7)) <= best) return;

    const auto k = index_of(p.blocks[level]);
    const auto step = static_cast<long long>(p.value[level]);
    const long long top = detail::max_count(p, level, used);
    for (long long n = top; n >= 0; --n) {
      if (n < top && best >= 0) {
        // Relaxation with this block capped at n bounds every remaining count.
        const double capped = static_cast<double>(value) + detail::relaxation(p, level, used, n);
        if (static_cast<long long>(std::floor(capped + 1e-7)) <= best) break;
      }
      counts[k] = n;
      for (std::size_t i = 0; i < used.size(); ++i) used[i] += static_cast<double>(n) * p.cost[level][i];
      self(self, level + 1, value + n * step);
      for (std::size_t i = 0; i < used.size(); ++i) used[i] -= static_cast<double>(n) * p.cost[level][i];
    }
    counts[k] = 0;
  };
  dfs(dfs, 0, 0);
  return detail::finish_plan(request, best_counts);
}

/// Exhaustive enumeration of every feasible mix (test oracle). Ties go to the
/// lexicographically largest counts.
inline AllocationPlan allocate_bruteforce(const AllocationRequest& request,
                                          double max_states = 1e8) {
  const auto p = detail::make_problem(request);
  double states = 1.0;
  const std::vector<double> zero(p.constraints.size(), 0.0);
  for (std::size_t pos = 0; pos < p.blocks.size(); ++pos)
    states *= static_cast<double>(detail::max_count(p, pos, zero) + 1);
  if (states > max_states) {
    throw Error(ErrorKind::search_too_large,
                "brute-force search space of " + std::to_string(states) + " states exceeds " +
                    std::to_string(max_states));
  }

  BlockCounts best_counts{};
  long long best = -1;
  BlockCounts counts{};
  std::vector<double> used(p.constraints.size(), 0.0);
  auto enumerate = [&](auto&& self, std::size_t level) -> void {
    if (level == p.blocks.size()) {
      const long long value = total_convs(counts);
      if (value > best || (value == best && counts > best_counts)) {
        best = value;
        best_counts = counts;
      }
      return;
    }
    const auto k = index_of(p.blocks[level]);
    for (long long n = 0;; ++n) {
      bool ok = true;
      for (std::size_t i = 0; i < used.size(); ++i)
        ok = ok && detail::fits(used[i] + static_cast<double>(n) * p.cost[level][i], p.constraints[i]);
      if (!ok) break;
      counts[k] = n;
      for (std::size_t i = 0; i < used.size(); ++i) used[i] += static_cast<double>(n) * p.cost[level][i];
      self(self, level + 1);
      for (std::size_t i = 0; i < used.size(); ++i) used[i] -= static_cast<double>(n) * p.cost[level][i];
    }
    counts[k] = 0;
  };
  enumerate(enumerate, 0);
  return detail::finish_plan(request, best_counts);
}

}  // namespace convcast
