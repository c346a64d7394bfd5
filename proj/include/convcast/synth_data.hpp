#pragma once

// Synthesis-sweep datasets: a closed-form "virtual synthesis" cost oracle,
// deterministic sweep generation with optional multiplicative noise, and the
// dataset CSV interchange format.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "convcast/detail/text.hpp"
#include "convcast/error.hpp"
#include "convcast/model_core.hpp"

namespace convcast {

/// Real-valued resource cost of one block configuration.
///
/// Calibrated at d = c = 8 against ZCU104 utilization. FF does not depend on
/// d for conv2..conv4, conv3 LLUT does not depend on d, and MLUT is a fixed
/// fraction of LLUT.
inline ResourceVector oracle_cost(BlockKind block, ConfigPoint cfg) {
  require_valid(block, cfg);
  const double d = cfg.data_bits;
  const double c = cfg.coeff_bits;
  ResourceVector v;
  switch (block) {
    case BlockKind::conv1:
      // LUT multipliers grow with d*c; linear-only fits stay below R^2 = 0.9.
      v.llut = 8.90 - 2.1 * d - 2.0 * c + 2.0 * d * c;
      v.cchain = 0.29 + 0.5625 * (d + c);
      v.ff = 5.37 + 3.0 * d + 3.0 * c;
      v.dsp = 0;
      break;
    case BlockKind::conv2:
      v.llut = 8.04 + 1.0 * d + 1.1 * c;
      v.ff = 2.10 + 2.405 * c;
      v.dsp = 1;
      break;
    case BlockKind::conv3:
      v.llut = cfg.coeff_bits <= 5 ? 30.0 : 35.84;
      v.ff = 2.0 + 3.585 * c;
      v.dsp = 1;
      break;
    case BlockKind::conv4:
      v.llut = 20.886 + 1.004 * d + 1.037 * c;
      v.ff = 2.01 + 2.5 * c;
      v.dsp = 2;
      break;
  }
  v.mlut = 0.2 * v.llut;
  return v;
}

struct NoiseSpec {
  double sigma = 0.0;  // relative standard deviation
  std::uint64_t seed = 42;
};

enum class Rounding { nearest_integer, none };

struct BitRange {
  int min = min_sweep_bits;
  int max = max_sweep_bits;
};

struct GenerateRequest {
  std::vector<BlockKind> blocks{all_blocks.begin(), all_blocks.end()};
  BitRange data_bits{};
  BitRange coeff_bits{};
  NoiseSpec noise{};
  std::string platform = "zcu104";
  Rounding rounding = Rounding::nearest_integer;
};

struct SynthesisRecord {
  BlockKind block = BlockKind::conv1;
  std::string platform;
  ConfigPoint cfg{};
  ResourceVector measured{};

  auto key() const { return std::tie(block, platform, cfg.data_bits, cfg.coeff_bits); }

  friend bool operator==(const SynthesisRecord&, const SynthesisRecord&) = default;
};

struct Dataset {
  std::vector<SynthesisRecord> records;

  void sort() {
    std::stable_sort(records.begin(), records.end(),
                     [](const auto& a, const auto& b) { return a.key() < b.key(); });
  }

  std::vector<SynthesisRecord> for_block(BlockKind block) const {
    std::vector<SynthesisRecord> out;
    for (const auto& r : records)
      if (r.block == block) out.push_back(r);
    return out;
  }

  std::size_t count(BlockKind block) const {
    return static_cast<std::size_t>(std::count_if(
        records.begin(), records.end(), [block](const auto& r) { return r.block == block; }));
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Standard normal deviate keyed by (seed, block, d, c, component); Box-Muller
// over two splitmix64 draws so regeneration is bit-identical.
inline double keyed_normal(std::uint64_t seed, BlockKind block, ConfigPoint cfg,
                           Resource component) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t part :
       {static_cast<std::uint64_t>(index_of(block)), static_cast<std::uint64_t>(cfg.data_bits),
        static_cast<std::uint64_t>(cfg.coeff_bits), static_cast<std::uint64_t>(component)}) {
    h = splitmix64(h ^ (part + 0x632BE59BD9B4E019ULL));
  }
  const std::uint64_t a = splitmix64(h);
  const std::uint64_t b = splitmix64(a);
  const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;          // [0, 1)
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline void check_range(const BitRange& range, const char* name) {
  if (range.min > range.max) {
    throw Error(ErrorKind::invalid_config, std::string(name) + " range is inverted (" +
                                               std::to_string(range.min) + " > " +
                                               std::to_string(range.max) + ")");
  }
  if (range.min < min_sweep_bits || range.max > max_sweep_bits) {
    throw Error(ErrorKind::invalid_config, std::string(name) + " range must lie within [" +
                                               std::to_string(min_sweep_bits) + ", " +
                                               std::to_string(max_sweep_bits) + "]");
  }
}

}  // namespace detail

/// One record per valid (block, d, c). Blocks with a narrower operand limit
/// (Conv3) have their ranges clipped to it.
inline Dataset generate_dataset(const GenerateRequest& request) {
  if (request.blocks.empty()) throw Error(ErrorKind::invalid_config, "empty block set");
  detail::check_range(request.data_bits, "data_bits");
  detail::check_range(request.coeff_bits, "coeff_bits");
  if (request.noise.sigma < 0.0 || !std::isfinite(request.noise.sigma)) {
    throw Error(ErrorKind::invalid_config, "noise sigma must be a finite value >= 0");
  }
  if (request.platform.empty()) throw Error(ErrorKind::invalid_config, "empty platform id");

  const std::set<BlockKind> blocks(request.blocks.begin(), request.blocks.end());
  Dataset dataset;
  for (BlockKind block : blocks) {
    const int limit = descriptor(block).max_operand_bits;
    for (int d = request.data_bits.min; d <= std::min(request.data_bits.max, limit); ++d) {
      for (int c = request.coeff_bits.min; c <= std::min(request.coeff_bits.max, limit); ++c) {
        const ConfigPoint cfg{d, c};
        ResourceVector value = oracle_cost(block, cfg);
        for (Resource r : all_resources) {
          if (r != Resource::dsp && request.noise.sigma > 0.0) {
            const double eps =
                request.noise.sigma * detail::keyed_normal(request.noise.seed, block, cfg, r);
            value[r] = std::max(0.0, value[r] * (1.0 + eps));
          }
          if (request.rounding == Rounding::nearest_integer) value[r] = std::round(value[r]);
        }
        dataset.records.push_back({block, request.platform, cfg, value});
      }
    }
  }
  dataset.sort();
  return dataset;
}

inline constexpr std::string_view dataset_csv_header =
    "block,platform,data_bits,coeff_bits,llut,mlut,ff,cchain,dsp";

inline void write_csv(const Dataset& dataset, std::ostream& out) {
  out << dataset_csv_header << '\n';
  for (const auto& r : dataset.records) {
    out << to_string(r.block) << ',' << r.platform << ',' << r.cfg.data_bits << ','
        << r.cfg.coeff_bits;
    for (Resource res : all_resources) out << ',' << detail::format_shortest(r.measured[res]);
    out << '\n';
  }
}

inline void write_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::parse_error, "cannot write '" + path + "'");
  write_csv(dataset, out);
  if (!out) throw Error(ErrorKind::parse_error, "write failed for '" + path + "'");
}

struct ReadOptions {
  /// Reject resource cells that are not whole numbers (measurement reports).
  bool integral_only = false;
};

/// Parses and validates a dataset; returns records in canonical order.
inline Dataset read_csv(std::istream& in, const ReadOptions& options = {}) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::parse_error, "line 1: empty dataset file");
  if (detail::chomp(line) != dataset_csv_header) {
    throw Error(ErrorKind::parse_error,
                "line 1: malformed header, expected '" + std::string(dataset_csv_header) + "'");
  }

  Dataset dataset;
  std::map<std::tuple<BlockKind, std::string, int, int>, std::size_t> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::chomp(line);
    if (text.empty()) continue;
    const auto where = "line " + std::to_string(line_no) + ": ";
    const auto cells = detail::split_csv_line(text);
    if (cells.size() != 9) {
      throw Error(ErrorKind::parse_error,
                  where + "expected 9 cells, found " + std::to_string(cells.size()));
    }

    SynthesisRecord record;
    const auto block = parse_block(cells[0]);
    if (!block) throw Error(ErrorKind::parse_error, where + "unknown block '" + cells[0] + "'");
    record.block = *block;
    if (cells[1].empty()) throw Error(ErrorKind::parse_error, where + "empty platform");
    record.platform = cells[1];

    const auto d = detail::parse_int(cells[2]);
    const auto c = detail::parse_int(cells[3]);
    if (!d || !c) throw Error(ErrorKind::parse_error, where + "non-integer bit width");
    if (*d < -1000 || *d > 1000 || *c < -1000 || *c > 1000) {
      throw Error(ErrorKind::invalid_config, where + "bit width out of range");
    }
    record.cfg = {static_cast<int>(*d), static_cast<int>(*c)};
    if (auto violation = validate_config(record.block, record.cfg)) {
      throw Error(ErrorKind::invalid_config, where + violation->message);
    }

    for (std::size_t i = 0; i < all_resources.size(); ++i) {
      const auto& cell = cells[4 + i];
      const auto name = std::string(to_string(all_resources[i]));
      const auto value = detail::parse_double(cell);
      if (!value || !std::isfinite(*value)) {
        throw Error(ErrorKind::parse_error, where + "non-numeric " + name + " cell '" + cell + "'");
      }
      if (*value < 0.0) {
        throw Error(ErrorKind::parse_error, where + "negative " + name + " cell '" + cell + "'");
      }
      if (options.integral_only && std::floor(*value) != *value) {
        throw Error(ErrorKind::parse_error, where + "non-integer " + name + " cell '" + cell + "'");
      }
      record.measured[all_resources[i]] = *value;
    }

    auto [it, inserted] = seen.emplace(
        std::make_tuple(record.block, record.platform, record.cfg.data_bits, record.cfg.coeff_bits),
        line_no);
    if (!inserted) {
      throw Error(ErrorKind::parse_error, where + "duplicate configuration (" + cells[0] + ", " +
                                              cells[1] + ", " + cells[2] + ", " + cells[3] +
                                              ") first seen on line " +
                                              std::to_string(it->second));
    }
    dataset.records.push_back(std::move(record));
  }
  dataset.sort();
  return dataset;
}

inline Dataset read_csv(const std::string& path, const ReadOptions& options = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::parse_error, "cannot open dataset '" + path + "'");
  return read_csv(in, options);
}

}  // namespace convcast
