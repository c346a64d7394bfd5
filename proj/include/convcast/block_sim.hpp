#pragma once

// Behavioral fixed-point model of the four 3x3 convolution blocks.
//
// Coefficients are loaded serially (one per cycle) into local storage; data
// windows arrive in parallel and each processing step consumes one window per
// lane. Conv1 multiplies with shift-and-add logic, Conv2 and Conv4 with one
// direct multiplier per lane, and Conv3 computes both lanes with a single
// 27x18 multiplier by packing two data samples into the wide operand.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "convcast/error.hpp"
#include "convcast/model_core.hpp"

namespace convcast {

using Window3x3 = std::array<std::int64_t, 9>;

constexpr bool fits_signed(std::int64_t value, int bits) {
  const std::int64_t lo = -(std::int64_t{1} << (bits - 1));
  const std::int64_t hi = (std::int64_t{1} << (bits - 1)) - 1;
  return value >= lo && value <= hi;
}

struct Kernel3x3 {
  std::array<std::int64_t, 9> coeffs{};
  int width = 8;
};

inline Kernel3x3 make_kernel(const std::array<std::int64_t, 9>& coeffs, int width) {
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    if (!fits_signed(coeffs[i], width)) {
      throw Error(ErrorKind::width_violation, "kernel coefficient " + std::to_string(coeffs[i]) +
                                                  " does not fit in " + std::to_string(width) +
                                                  " bits");
    }
  }
  return {coeffs, width};
}

struct Frame {
  int height = 0;
  int width = 0;
  int data_bits = 8;
  std::vector<std::int64_t> pixels;  // row-major

  std::int64_t at(int row, int col) const {
    return pixels[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(col)];
  }

  Window3x3 window(int row, int col) const {
    Window3x3 w{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) w[static_cast<std::size_t>(i * 3 + j)] = at(row + i, col + j);
    return w;
  }
};

inline void validate_frame(const Frame& frame) {
  if (frame.height < 3 || frame.width < 3) {
    throw Error(ErrorKind::width_violation, "frame must be at least 3x3, got " +
                                                std::to_string(frame.height) + "x" +
                                                std::to_string(frame.width));
  }
  if (frame.pixels.size() !=
      static_cast<std::size_t>(frame.height) * static_cast<std::size_t>(frame.width)) {
    throw Error(ErrorKind::width_violation, "frame pixel count does not match its dimensions");
  }
  for (auto p : frame.pixels) {
    if (!fits_signed(p, frame.data_bits)) {
      throw Error(ErrorKind::width_violation, "pixel " + std::to_string(p) + " does not fit in " +
                                                  std::to_string(frame.data_bits) + " bits");
    }
  }
}

/// Full-precision convolution result; `width` is the accumulator width d+c+4.
struct ConvOutput {
  std::int64_t value = 0;
  int width = 0;

  friend bool operator==(const ConvOutput&, const ConvOutput&) = default;
};

constexpr int accumulator_bits(ConfigPoint cfg) { return cfg.data_bits + cfg.coeff_bits + 4; }

namespace detail {

inline void check_window(const Window3x3& window, int data_bits) {
  for (auto x : window) {
    if (!fits_signed(x, data_bits)) {
      throw Error(ErrorKind::width_violation, "pixel " + std::to_string(x) + " does not fit in " +
                                                  std::to_string(data_bits) + " bits");
    }
  }
}

inline void check_accumulator(std::int64_t acc, int bits) {
  if (!fits_signed(acc, bits)) {
    throw Error(ErrorKind::width_violation,
                "accumulator value " + std::to_string(acc) + " overflows " + std::to_string(bits) +
                    " bits");
  }
}

}  // namespace detail

/// Reference dot product of one window with the kernel: exact, no rounding.
inline ConvOutput golden_convolve(const Window3x3& window, const Kernel3x3& kernel, int data_bits) {
  detail::check_window(window, data_bits);
  for (auto w : kernel.coeffs) {
    if (!fits_signed(w, kernel.width)) {
      throw Error(ErrorKind::width_violation, "kernel coefficient " + std::to_string(w) +
                                                  " does not fit in " +
                                                  std::to_string(kernel.width) + " bits");
    }
  }
  std::int64_t acc = 0;
  for (std::size_t k = 0; k < 9; ++k) acc += window[k] * kernel.coeffs[k];
  return {acc, data_bits + kernel.width + 4};
}

struct BlockState {
  BlockKind kind = BlockKind::conv1;
  ConfigPoint cfg{};
  int loaded_coeffs = 0;
  Kernel3x3 kernel{};
  std::uint64_t cycle_counter = 0;

  bool ready() const { return loaded_coeffs == 9; }
};

inline BlockState make_block_state(BlockKind kind, ConfigPoint cfg) {
  require_valid(kind, cfg);
  BlockState state;
  state.kind = kind;
  state.cfg = cfg;
  state.kernel.width = cfg.coeff_bits;
  return state;
}

/// One serial coefficient-load step.
inline BlockState load_coefficient(BlockState state, std::int64_t w) {
  if (state.loaded_coeffs >= 9) {
    throw Error(ErrorKind::state_violation, "kernel already holds 9 coefficients");
  }
  if (!fits_signed(w, state.cfg.coeff_bits)) {
    throw Error(ErrorKind::width_violation, "coefficient " + std::to_string(w) +
                                                " does not fit in " +
                                                std::to_string(state.cfg.coeff_bits) + " bits");
  }
  state.kernel.coeffs[static_cast<std::size_t>(state.loaded_coeffs)] = w;
  ++state.loaded_coeffs;
  ++state.cycle_counter;
  return state;
}

struct PackedProducts {
  std::int64_t p1 = 0;
  std::int64_t p2 = 0;

  friend bool operator==(const PackedProducts&, const PackedProducts&) = default;
};

inline constexpr int dsp_wide_operand_bits = 27;
inline constexpr int dsp_narrow_operand_bits = 18;
inline constexpr int max_packed_operand_bits = 8;

/// Two products d1*w and d2*w from one wide multiplication.
///
/// The wide operand is d1 * 2^s + d2 with s = d_bits + c_bits + 1. The low s
/// bits of the product hold d2*w in two's complement; when that lane is
/// negative it has borrowed one from the high lane, which is added back.
inline PackedProducts pack_mul(std::int64_t d1, std::int64_t d2, std::int64_t w, int d_bits,
                               int c_bits) {
  if (d_bits < 1 || c_bits < 1 || d_bits > max_packed_operand_bits ||
      c_bits > max_packed_operand_bits) {
    throw Error(ErrorKind::width_violation,
                "packed multiply supports operands up to " +
                    std::to_string(max_packed_operand_bits) + " bits, got " +
                    std::to_string(d_bits) + "x" + std::to_string(c_bits));
  }
  if (!fits_signed(d1, d_bits) || !fits_signed(d2, d_bits) || !fits_signed(w, c_bits)) {
    throw Error(ErrorKind::width_violation, "packed multiply operand out of declared width");
  }
  const int shift = d_bits + c_bits + 1;
  const std::int64_t wide = d1 * (std::int64_t{1} << shift) + d2;
  if (!fits_signed(wide, dsp_wide_operand_bits) || !fits_signed(w, dsp_narrow_operand_bits)) {
    throw Error(ErrorKind::width_violation, "packed operands exceed the 27x18 multiplier");
  }

  const std::int64_t product = wide * w;
  const std::uint64_t mask = (std::uint64_t{1} << shift) - 1;
  auto low = static_cast<std::int64_t>(static_cast<std::uint64_t>(product) & mask);
  if (low >= (std::int64_t{1} << (shift - 1))) low -= std::int64_t{1} << shift;
  // Arithmetic right shift is floor division for negative products (C++20).
  const std::int64_t high = (product >> shift) + (low < 0 ? 1 : 0);
  return {high, low};
}

namespace detail {

// Conv1 has no DSP: partial products of the coefficient bits, the sign bit
// weighted negatively.
inline std::int64_t shift_add_multiply(std::int64_t x, std::int64_t w, int c_bits) {
  const auto bits = static_cast<std::uint64_t>(w) & ((std::uint64_t{1} << c_bits) - 1);
  std::int64_t acc = 0;
  for (int i = 0; i < c_bits; ++i) {
    if ((bits >> i) & 1U) {
      const std::int64_t partial = x * (std::int64_t{1} << i);
      acc += (i == c_bits - 1) ? -partial : partial;
    }
  }
  return acc;
}

}  // namespace detail

struct ProcessResult {
  std::vector<ConvOutput> outputs;
  BlockState state;
};

/// One processing cycle: consumes `convs_per_cycle` windows.
inline ProcessResult process(BlockState state, std::span<const Window3x3> windows) {
  if (!state.ready()) {
    throw Error(ErrorKind::state_violation,
                "kernel not loaded (" + std::to_string(state.loaded_coeffs) + "/9 coefficients)");
  }
  const auto desc = descriptor(state.kind);
  if (windows.size() != static_cast<std::size_t>(desc.convs_per_cycle)) {
    throw Error(ErrorKind::state_violation,
                std::string(to_string(state.kind)) + " expects " +
                    std::to_string(desc.convs_per_cycle) + " window(s) per cycle, got " +
                    std::to_string(windows.size()));
  }
  for (const auto& window : windows) detail::check_window(window, state.cfg.data_bits);

  const int acc_bits = accumulator_bits(state.cfg);
  const auto& coeffs = state.kernel.coeffs;
  std::vector<ConvOutput> outputs;

  switch (state.kind) {
    case BlockKind::conv1: {
      std::int64_t acc = 0;
      for (std::size_t k = 0; k < 9; ++k)
        acc += detail::shift_add_multiply(windows[0][k], coeffs[k], state.cfg.coeff_bits);
      detail::check_accumulator(acc, acc_bits);
      outputs.push_back({acc, acc_bits});
      break;
    }
    case BlockKind::conv2:
    case BlockKind::conv4: {
      for (const auto& window : windows) {
        std::int64_t acc = 0;
        for (std::size_t k = 0; k < 9; ++k) acc += window[k] * coeffs[k];
        detail::check_accumulator(acc, acc_bits);
        outputs.push_back({acc, acc_bits});
      }
      break;
    }
    case BlockKind::conv3: {
      std::int64_t acc1 = 0;
      std::int64_t acc2 = 0;
      for (std::size_t k = 0; k < 9; ++k) {
        const auto products = pack_mul(windows[0][k], windows[1][k], coeffs[k],
                                       state.cfg.data_bits, state.cfg.coeff_bits);
        acc1 += products.p1;
        acc2 += products.p2;
      }
      detail::check_accumulator(acc1, acc_bits);
      detail::check_accumulator(acc2, acc_bits);
      outputs.push_back({acc1, acc_bits});
      outputs.push_back({acc2, acc_bits});
      break;
    }
  }
  ++state.cycle_counter;
  return {std::move(outputs), state};
}

struct FrameResult {
  int rows = 0;
  int cols = 0;
  std::vector<ConvOutput> outputs;  // row-major rows x cols
  std::uint64_t cycles = 0;

  const ConvOutput& at(int row, int col) const {
    return outputs[static_cast<std::size_t>(row) * static_cast<std::size_t>(cols) +
                   static_cast<std::size_t>(col)];
  }
};

/// Stride-1, valid-padding sweep of the kernel over the frame.
inline FrameResult convolve_frame(BlockKind kind, ConfigPoint cfg, const Frame& frame,
                                  const Kernel3x3& kernel) {
  require_valid(kind, cfg);
  if (frame.data_bits != cfg.data_bits) {
    throw Error(ErrorKind::width_violation, "frame data width " +
                                                std::to_string(frame.data_bits) +
                                                " differs from configured " +
                                                std::to_string(cfg.data_bits));
  }
  validate_frame(frame);

  auto state = make_block_state(kind, cfg);
  for (auto w : kernel.coeffs) state = load_coefficient(std::move(state), w);

  FrameResult result;
  result.rows = frame.height - 2;
  result.cols = frame.width - 2;
  const auto total = static_cast<std::size_t>(result.rows) * static_cast<std::size_t>(result.cols);
  result.outputs.reserve(total);

  const auto lanes = static_cast<std::size_t>(descriptor(kind).convs_per_cycle);
  std::vector<Window3x3> batch(lanes);
  for (std::size_t first = 0; first < total; first += lanes) {
    const std::size_t used = std::min(lanes, total - first);
    for (std::size_t lane = 0; lane < lanes; ++lane) {
      if (lane < used) {
        const auto index = first + lane;
        batch[lane] = frame.window(static_cast<int>(index / static_cast<std::size_t>(result.cols)),
                                   static_cast<int>(index % static_cast<std::size_t>(result.cols)));
      } else {
        batch[lane].fill(0);  // idle lane on the last cycle
      }
    }
    auto step = process(std::move(state), batch);
    state = std::move(step.state);
    for (std::size_t lane = 0; lane < used; ++lane) result.outputs.push_back(step.outputs[lane]);
  }
  result.cycles = state.cycle_counter;
  return result;
}

}  // namespace convcast
