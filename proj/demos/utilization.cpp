// Fits LLUT/MLUT/FF/CChain models on a noise-free sweep, predicts the usage of
// a few block mixes at 8x8 bits on the ZCU104, then searches for the best mix.

#include <iostream>

#include "convcast/convcast.hpp"

using namespace convcast;

int main() {
  GenerateRequest req;
  req.rounding = Rounding::none;
  const auto dataset = generate_dataset(req);

  ModelSet models;
  for (BlockKind b : all_blocks) {
    for (Resource r : {Resource::llut, Resource::mlut, Resource::ff, Resource::cchain}) {
      if (r == Resource::cchain && !descriptor(b).uses_cchain) continue;
      auto sel = select_model(dataset, b, r);
      std::cout << to_string(b) << ' ' << to_string(r) << ": " << to_string(sel.report.route)
                << ", R^2 " << detail::format_fixed(model_r2(*sel.model), 6) << '\n';
      models.add(std::move(*sel.model));
    }
  }

  const ConfigPoint cfg{8, 8};
  const auto costs = build_cost_table(models, cfg, all_blocks);
  const auto zcu104 = zcu104_capacity();
  const BlockCounts mixes[] = {
      {1380, 284, 800, 150}, {1770, 0, 0, 0}, {0, 1382, 0, 0}, {0, 0, 1382, 0}, {0, 0, 0, 691}};

  std::cout << "\nn1,n2,n3,n4,llut%,ff%,cchain%,dsp%,convs\n";
  for (const auto& mix : mixes) {
    const auto u = predict_usage(mix, costs, zcu104);
    for (auto n : mix) std::cout << n << ',';
    std::cout << detail::format_fixed(u.usage_percent.llut, 2) << ','
              << detail::format_fixed(u.usage_percent.ff, 2) << ','
              << detail::format_fixed(u.usage_percent.cchain, 2) << ','
              << detail::format_fixed(u.usage_percent.dsp, 2) << ',' << u.total_convs << '\n';
  }

  AllocationRequest alloc;
  alloc.cfg = cfg;
  alloc.costs = costs;
  const auto plan = allocate_optimal(alloc);
  std::cout << "\nbest mix at 80% budget: ";
  for (auto n : plan.counts) std::cout << n << ' ';
  std::cout << "-> " << plan.total_convs << " convolutions/cycle\n";
}
