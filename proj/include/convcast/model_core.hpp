#pragma once

// Shared domain types: block kinds and their fixed attributes, sweep
// configuration points, resource vectors and platform capacities.

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "convcast/detail/text.hpp"
#include "convcast/error.hpp"

namespace convcast {

inline constexpr std::string_view toolkit_version = "0.1.0";

enum class BlockKind : std::uint8_t { conv1 = 0, conv2 = 1, conv3 = 2, conv4 = 3 };

inline constexpr std::array<BlockKind, 4> all_blocks{BlockKind::conv1, BlockKind::conv2,
                                                     BlockKind::conv3, BlockKind::conv4};

constexpr std::size_t index_of(BlockKind kind) { return static_cast<std::size_t>(kind); }

constexpr std::string_view to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::conv1: return "conv1";
    case BlockKind::conv2: return "conv2";
    case BlockKind::conv3: return "conv3";
    case BlockKind::conv4: return "conv4";
  }
  return "?";
}

inline std::optional<BlockKind> parse_block(std::string_view text) {
  for (BlockKind kind : all_blocks) {
    if (text == to_string(kind)) return kind;
  }
  return std::nullopt;
}

inline BlockKind require_block(std::string_view text) {
  if (auto kind = parse_block(text)) return *kind;
  throw Error(ErrorKind::parse_error, "unknown block '" + std::string(text) + "'");
}

struct BlockDescriptor {
  BlockKind kind;
  int dsp_per_block;
  int convs_per_cycle;
  int max_operand_bits;
  bool uses_cchain;

  friend bool operator==(const BlockDescriptor&, const BlockDescriptor&) = default;
};

constexpr BlockDescriptor descriptor(BlockKind kind) {
  switch (kind) {
    case BlockKind::conv1: return {kind, 0, 1, 16, true};
    case BlockKind::conv2: return {kind, 1, 1, 16, false};
    case BlockKind::conv3: return {kind, 1, 2, 8, false};
    case BlockKind::conv4: return {kind, 2, 2, 16, false};
  }
  return {kind, 0, 0, 0, false};
}

inline constexpr int min_sweep_bits = 3;
inline constexpr int max_sweep_bits = 16;

/// Operand widths of one block configuration (data bits d, coefficient bits c).
struct ConfigPoint {
  int data_bits = 8;
  int coeff_bits = 8;

  friend auto operator<=>(const ConfigPoint&, const ConfigPoint&) = default;
};

struct ConfigViolation {
  std::string bound;  // "data_bits_min", "coeff_bits_max", "operand_limit", ...
  int value;
  int limit;
  std::string message;
};

inline std::optional<ConfigViolation> validate_config(BlockKind kind, ConfigPoint cfg) {
  auto check_range = [](std::string_view name, int value) -> std::optional<ConfigViolation> {
    if (value < min_sweep_bits) {
      return ConfigViolation{std::string(name) + "_min", value, min_sweep_bits,
                             std::string(name) + " = " + std::to_string(value) +
                                 " is below the sweep minimum " + std::to_string(min_sweep_bits)};
    }
    if (value > max_sweep_bits) {
      return ConfigViolation{std::string(name) + "_max", value, max_sweep_bits,
                             std::string(name) + " = " + std::to_string(value) +
                                 " exceeds the sweep maximum " + std::to_string(max_sweep_bits)};
    }
    return std::nullopt;
  };
  if (auto v = check_range("data_bits", cfg.data_bits)) return v;
  if (auto v = check_range("coeff_bits", cfg.coeff_bits)) return v;

  const int limit = descriptor(kind).max_operand_bits;
  const int widest = std::max(cfg.data_bits, cfg.coeff_bits);
  if (widest > limit) {
    return ConfigViolation{"operand_limit", widest, limit,
                           std::string(to_string(kind)) + " accepts operands up to " +
                               std::to_string(limit) + " bits, got " + std::to_string(widest)};
  }
  return std::nullopt;
}

inline void require_valid(BlockKind kind, ConfigPoint cfg) {
  if (auto violation = validate_config(kind, cfg)) {
    throw Error(ErrorKind::invalid_config, violation->message);
  }
}

enum class Resource : std::uint8_t { llut = 0, mlut = 1, ff = 2, cchain = 3, dsp = 4 };

inline constexpr std::array<Resource, 5> all_resources{Resource::llut, Resource::mlut, Resource::ff,
                                                       Resource::cchain, Resource::dsp};

constexpr std::string_view to_string(Resource r) {
  switch (r) {
    case Resource::llut: return "llut";
    case Resource::mlut: return "mlut";
    case Resource::ff: return "ff";
    case Resource::cchain: return "cchain";
    case Resource::dsp: return "dsp";
  }
  return "?";
}

inline std::optional<Resource> parse_resource(std::string_view text) {
  for (Resource r : all_resources) {
    if (text == to_string(r)) return r;
  }
  return std::nullopt;
}

inline Resource require_resource(std::string_view text) {
  if (auto r = parse_resource(text)) return *r;
  throw Error(ErrorKind::parse_error, "unknown resource '" + std::string(text) + "'");
}

/// Per-resource quantities. Measurements hold integral values, predictions
/// and percentages hold reals.
struct ResourceVector {
  double llut = 0.0;
  double mlut = 0.0;
  double ff = 0.0;
  double cchain = 0.0;
  double dsp = 0.0;

  constexpr double& operator[](Resource r) {
    switch (r) {
      case Resource::llut: return llut;
      case Resource::mlut: return mlut;
      case Resource::ff: return ff;
      case Resource::cchain: return cchain;
      case Resource::dsp: return dsp;
    }
    return llut;
  }
  constexpr double operator[](Resource r) const {
    return const_cast<ResourceVector&>(*this)[r];
  }

  friend bool operator==(const ResourceVector&, const ResourceVector&) = default;
};

struct PlatformCapacity {
  std::string platform_id;
  ResourceVector totals;
};

/// XCZU7EV on the ZCU104 board.
inline PlatformCapacity zcu104_capacity() {
  return {"zcu104", ResourceVector{230400, 101760, 460800, 28800, 1728}};
}

/// Known device capacities: the built-in zcu104 profile plus anything loaded
/// from a capacity file (`platform,llut,mlut,ff,cchain,dsp`).
class CapacityRegistry {
 public:
  CapacityRegistry() { add(zcu104_capacity()); }

  void add(PlatformCapacity capacity) {
    const auto id = capacity.platform_id;
    platforms_.insert_or_assign(id, std::move(capacity));
  }

  const PlatformCapacity& get(const std::string& platform_id) const {
    auto it = platforms_.find(platform_id);
    if (it == platforms_.end()) {
      throw Error(ErrorKind::unknown_platform, "unknown platform '" + platform_id + "'");
    }
    return it->second;
  }

  bool contains(const std::string& platform_id) const { return platforms_.count(platform_id) > 0; }

  void load_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) ||
        detail::chomp(line) != "platform,llut,mlut,ff,cchain,dsp") {
      throw Error(ErrorKind::parse_error,
                  "capacity file line 1: expected header platform,llut,mlut,ff,cchain,dsp");
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      const auto text = detail::chomp(line);
      if (text.empty()) continue;
      const auto cells = detail::split_csv_line(text);
      const auto where = "capacity file line " + std::to_string(line_no) + ": ";
      if (cells.size() != 6 || cells[0].empty()) {
        throw Error(ErrorKind::parse_error, where + "expected 6 cells");
      }
      PlatformCapacity capacity{cells[0], {}};
      for (std::size_t i = 0; i < 5; ++i) {
        auto value = detail::parse_double(cells[i + 1]);
        if (!value || *value < 0.0) {
          throw Error(ErrorKind::parse_error, where + "invalid capacity '" + cells[i + 1] + "'");
        }
        capacity.totals[all_resources[i]] = *value;
      }
      for (Resource r : {Resource::llut, Resource::ff, Resource::cchain, Resource::dsp}) {
        if (capacity.totals[r] <= 0.0) {
          throw Error(ErrorKind::parse_error,
                      where + std::string(to_string(r)) + " capacity must be positive");
        }
      }
      add(std::move(capacity));
    }
  }

  void load_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::parse_error, "cannot open capacity file '" + path + "'");
    load_csv(in);
  }

 private:
  std::map<std::string, PlatformCapacity> platforms_;
};

inline PlatformCapacity capacity(const std::string& platform_id) {
  return CapacityRegistry{}.get(platform_id);
}

}  // namespace convcast
