// Streams a random 16x16 frame through each block type and checks the
// outputs against the plain dot product.

#include <iostream>
#include <random>

#include "convcast/convcast.hpp"

using namespace convcast;

int main() {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::int64_t> pixel(-128, 127);

  Frame frame{16, 16, 8, {}};
  for (int i = 0; i < 16 * 16; ++i) frame.pixels.push_back(pixel(rng));
  std::array<std::int64_t, 9> k{};
  for (auto& w : k) w = pixel(rng);
  const auto kernel = make_kernel(k, 8);

  for (BlockKind b : all_blocks) {
    const auto result = convolve_frame(b, {8, 8}, frame, kernel);
    std::size_t mismatches = 0;
    for (int r = 0; r < result.rows; ++r)
      for (int c = 0; c < result.cols; ++c)
        if (result.at(r, c) != golden_convolve(frame.window(r, c), kernel, 8)) ++mismatches;
    std::cout << to_string(b) << ": " << result.outputs.size() << " outputs in " << result.cycles
              << " cycles, " << mismatches << " mismatches\n";
  }

  const auto p = pack_mul(-77, 93, -101, 8, 8);
  std::cout << "\none multiply, two products: " << p.p1 << " " << p.p2 << " (expected "
            << -77 * -101 << " " << 93 * -101 << ")\n";
}
