#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <functional>
#include <random>

#include <boost/math/distributions/students_t.hpp>

#include "convcast/model_io.hpp"
#include "convcast/regression.hpp"

using namespace convcast;

namespace {

Dataset exact_sweep() {
  GenerateRequest req;
  req.rounding = Rounding::none;
  return generate_dataset(req);
}

// conv2 records over a grid with a caller-supplied LLUT surface.
Dataset surface(const std::function<double(int, int)>& f, int dlo = 3, int dhi = 12, int clo = 3,
                int chi = 12) {
  Dataset ds;
  for (int d = dlo; d <= dhi; ++d)
    for (int c = clo; c <= chi; ++c) {
      ResourceVector v;
      v.llut = f(d, c);
      ds.records.push_back({BlockKind::conv2, "zcu104", {d, c}, v});
    }
  return ds;
}

// Solves a small dense system by Gauss-Jordan with partial pivoting; returns the inverse.
std::vector<std::vector<double>> invert(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  std::vector<std::vector<double>> inv(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    std::swap(inv[col], inv[piv]);
    const double p = a[col][col];
    for (std::size_t j = 0; j < n; ++j) {
      a[col][j] /= p;
      inv[col][j] /= p;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col];
      for (std::size_t j = 0; j < n; ++j) {
        a[r][j] -= f * a[col][j];
        inv[r][j] -= f * inv[col][j];
      }
    }
  }
  return inv;
}

// Normal-equation OLS with classic t-test p-values, used as an oracle.
struct NormalFit {
  std::vector<double> beta;
  std::vector<double> p_values;
};

NormalFit normal_equation_fit(const Dataset& ds, const std::vector<MonomialTerm>& terms) {
  const std::size_t p = terms.size();
  std::vector<std::vector<double>> xtx(p, std::vector<double>(p, 0.0));
  std::vector<double> xty(p, 0.0);
  for (const auto& r : ds.records) {
    for (std::size_t a = 0; a < p; ++a) {
      const double xa = term_value(terms[a], r.cfg.data_bits, r.cfg.coeff_bits);
      xty[a] += xa * r.measured.llut;
      for (std::size_t b = 0; b < p; ++b)
        xtx[a][b] += xa * term_value(terms[b], r.cfg.data_bits, r.cfg.coeff_bits);
    }
  }
  const auto inv = invert(xtx);
  NormalFit out;
  out.beta.assign(p, 0.0);
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b = 0; b < p; ++b) out.beta[a] += inv[a][b] * xty[b];
  double sse = 0.0;
  for (const auto& r : ds.records) {
    double fit = 0.0;
    for (std::size_t a = 0; a < p; ++a)
      fit += out.beta[a] * term_value(terms[a], r.cfg.data_bits, r.cfg.coeff_bits);
    sse += (r.measured.llut - fit) * (r.measured.llut - fit);
  }
  const double dof = static_cast<double>(ds.records.size() - p);
  const boost::math::students_t_distribution<double> dist(dof);
  for (std::size_t a = 0; a < p; ++a) {
    const double t = std::abs(out.beta[a]) / std::sqrt(sse / dof * inv[a][a]);
    out.p_values.push_back(2.0 * boost::math::cdf(boost::math::complement(dist, t)));
  }
  return out;
}

// Exhaustive recursive search for the fewest-segment partition reaching the threshold.
struct SegSearch {
  std::vector<int> breaks;
  double sse = 0.0;
};

SegSearch brute_segments(const std::vector<int>& cs, const std::vector<std::vector<double>>& groups,
                         double sst, double threshold, int max_segments) {
  auto group_sse = [&](std::size_t lo, std::size_t hi) {
    double sum = 0.0, n = 0.0;
    for (std::size_t g = lo; g < hi; ++g)
      for (double v : groups[g]) {
        sum += v;
        n += 1.0;
      }
    const double mean = sum / n;
    double s = 0.0;
    for (std::size_t g = lo; g < hi; ++g)
      for (double v : groups[g]) s += (v - mean) * (v - mean);
    return s;
  };
  SegSearch best;
  for (int k = 1; k <= max_segments; ++k) {
    bool found = false;
    std::vector<std::size_t> cuts;
    std::function<void(std::size_t, int)> rec = [&](std::size_t start, int left) {
      if (left == 0) {
        double s = 0.0;
        std::size_t lo = 0;
        for (auto cut : cuts) {
          s += group_sse(lo, cut);
          lo = cut;
        }
        s += group_sse(lo, cs.size());
        if (!found || s < best.sse - 1e-9) {
          found = true;
          best.sse = s;
          best.breaks.clear();
          for (auto cut : cuts) best.breaks.push_back(cs[cut]);
        }
        return;
      }
      for (std::size_t cut = start; cut < cs.size(); ++cut) {
        cuts.push_back(cut);
        rec(cut + 1, left - 1);
        cuts.pop_back();
      }
    };
    rec(1, k - 1);
    if (found && 1.0 - best.sse / sst >= threshold) break;
  }
  return best;
}

}  // namespace

TEST_CASE("basis ordering and naming", "[regression]") {
  const auto b2 = full_basis(2);
  REQUIRE(b2.size() == 6);
  CHECK(b2[0] == MonomialTerm{0, 0});
  CHECK(b2[1] == MonomialTerm{1, 0});
  CHECK(b2[2] == MonomialTerm{0, 1});
  CHECK(b2[4] == MonomialTerm{1, 1});
  CHECK(full_basis(4).size() == 15);
  CHECK(term_name({0, 0}) == "1");
  CHECK(term_name({1, 1}) == "d*c");
  CHECK(term_name({2, 0}) == "d^2");
  CHECK(term_name({0, 3}) == "c^3");
}

TEST_CASE("linear fit recovers the conv4 LLUT form", "[regression]") {
  const auto m = fit_polynomial(exact_sweep(), BlockKind::conv4, Resource::llut, 1);
  REQUIRE(m.terms.size() == 3);
  CHECK(m.coefficient({0, 0}).value() == Catch::Approx(20.886).margin(1e-6));
  CHECK(m.coefficient({1, 0}).value() == Catch::Approx(1.004).margin(1e-6));
  CHECK(m.coefficient({0, 1}).value() == Catch::Approx(1.037).margin(1e-6));
  CHECK(m.training_r2 == Catch::Approx(1.0).margin(1e-12));
  CHECK(m.domain.data_bits.min == 3);
  CHECK(m.domain.coeff_bits.max == 16);
  CHECK(predict(m, {8, 8}) == Catch::Approx(37.214).margin(1e-6));
  CHECK(predict(m, {3, 3}) == Catch::Approx(27.009).margin(1e-6));
}

TEST_CASE("quadratic fit recovers a known surface", "[regression]") {
  const auto ds = surface([](int d, int c) { return 2.0 + d * d + 3.0 * d * c; });
  const auto m = fit_polynomial(ds, BlockKind::conv2, Resource::llut, 2);
  CHECK(m.coefficient({0, 0}).value() == Catch::Approx(2.0).margin(1e-7));
  CHECK(m.coefficient({2, 0}).value() == Catch::Approx(1.0).margin(1e-9));
  CHECK(m.coefficient({1, 1}).value() == Catch::Approx(3.0).margin(1e-9));
  CHECK(m.coefficient({1, 0}).value() == Catch::Approx(0.0).margin(1e-7));
  CHECK(m.coefficient({0, 2}).value() == Catch::Approx(0.0).margin(1e-8));

  const auto pruned = prune_detailed(m, ds);
  CHECK(pruned.perfect_fit);
  std::vector<MonomialTerm> kept = pruned.model.terms;
  CHECK(kept == std::vector<MonomialTerm>{{0, 0}, {2, 0}, {1, 1}});
}

TEST_CASE("constant target", "[regression]") {
  const auto ds = surface([](int, int) { return 7.5; });
  const auto m = fit_polynomial(ds, BlockKind::conv2, Resource::llut, 1);
  CHECK(m.coefficient({0, 0}).value() == Catch::Approx(7.5).margin(1e-9));
  CHECK(m.training_r2 == 1.0);
  const auto sel = select_model(ds, BlockKind::conv2, Resource::llut);
  REQUIRE(sel.model);
  CHECK(predict(*sel.model, {5, 5}) == Catch::Approx(7.5).margin(1e-9));
}

TEST_CASE("fit agrees with a normal-equation oracle on noisy data", "[regression][property]") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    std::normal_distribution<double> noise(0.0, 0.5);
    const auto ds = surface([&](int d, int c) { return 4.0 + 1.5 * d + 0.2 * c + noise(rng); });
    const auto m = fit_polynomial(ds, BlockKind::conv2, Resource::llut, 2);
    const auto oracle = normal_equation_fit(ds, m.terms);
    const auto tested = prune_detailed(m, ds, 0.05);
    REQUIRE(tested.tests.size() == m.terms.size());
    for (std::size_t k = 0; k < m.terms.size(); ++k) {
      CHECK(m.coefficients[k] == Catch::Approx(oracle.beta[k]).epsilon(1e-7).margin(1e-8));
      CHECK(tested.tests[k].p_value == Catch::Approx(oracle.p_values[k]).epsilon(1e-6).margin(1e-10));
      const bool should_drop = k != 0 && oracle.p_values[k] > 0.05;
      CHECK(tested.tests[k].removed == should_drop);
    }
    // d is overwhelmingly significant and always survives.
    CHECK(tested.model.coefficient({1, 0}).has_value());
  }
}

TEST_CASE("residuals are orthogonal and R^2 grows with degree", "[regression][property]") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> noise(0.0, 1.0);
  const auto ds = surface([&](int d, int c) { return 10.0 + d * c * 0.3 + std::sin(d + 2.0 * c) + noise(rng); });
  double prev = -1.0;
  for (int degree = 1; degree <= 4; ++degree) {
    const auto m = fit_polynomial(ds, BlockKind::conv2, Resource::llut, degree);
    CHECK(m.training_r2 >= prev - 1e-12);
    prev = m.training_r2;
    for (const auto& t : m.terms) {
      double dot = 0.0, norm = 0.0;
      for (const auto& r : ds.records) {
        const double x = term_value(t, r.cfg.data_bits, r.cfg.coeff_bits);
        dot += x * (r.measured.llut - predict_checked(m, r.cfg).value);
        norm += x * x;
      }
      CHECK(std::abs(dot) / std::sqrt(norm) < 1e-7);
    }
  }
}

TEST_CASE("fit errors are classified", "[regression]") {
  const auto ds = exact_sweep();
  try {
    fit_polynomial(ds, BlockKind::conv1, Resource::llut, 1, "nowhere");
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::insufficient_data);
  }
  Dataset only2;
  only2.records = ds.for_block(BlockKind::conv2);
  try {
    fit_polynomial(only2, BlockKind::conv4, Resource::llut, 1);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("no records for block conv4") != std::string::npos);
  }
  const auto fixed_d = surface([](int d, int c) { return d + c; }, 8, 8, 3, 12);
  try {
    fit_polynomial(fixed_d, BlockKind::conv2, Resource::llut, 1);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::rank_deficient);
    CHECK(std::string(e.what()).find('d') != std::string::npos);
  }
  const auto few = surface([](int d, int c) { return d + c; }, 3, 3, 3, 5);
  try {
    fit_polynomial(few, BlockKind::conv2, Resource::llut, 1);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::insufficient_data);
  }
  CHECK_THROWS_AS(fit_polynomial(ds, BlockKind::conv2, Resource::llut, 5), Error);
}

TEST_CASE("degree selection ladders", "[regression]") {
  using L = std::vector<std::optional<double>>;
  CHECK(choose_degree(L{0.95, 0.97, 0.98, 0.99}, 0.9) == 1);
  CHECK(choose_degree(L{0.85, 1.0, 1.0, 1.0}, 0.9) == 2);
  CHECK(choose_degree(L{0.85, 0.88, 0.89, 0.895}, 0.9) == std::nullopt);
  CHECK(choose_degree(L{0.5, 0.93, 0.91, std::nullopt}, 0.9) == 3);
  CHECK(choose_degree(L{std::nullopt, 0.95}, 0.9) == 2);
  CHECK(choose_degree(L{0.9, 0.95}, 0.9) == 1);
}

TEST_CASE("selection loop on the noise-free sweep", "[regression]") {
  const auto ds = exact_sweep();

  SECTION("conv1 LLUT needs the interaction term") {
    const auto sel = select_model(ds, BlockKind::conv1, Resource::llut);
    CHECK(sel.report.r2_by_degree[0].value() == Catch::Approx(0.898375572614562).margin(1e-9));
    CHECK(sel.report.chosen_degree == 2);
    CHECK(sel.report.route == Route::polynomial);
    CHECK_FALSE(sel.report.segmented_note.empty());
    const auto& m = std::get<PolynomialModel>(*sel.model);
    CHECK(m.terms == std::vector<MonomialTerm>{{0, 0}, {1, 0}, {0, 1}, {1, 1}});
    CHECK(predict(*sel.model, {8, 8}) == Catch::Approx(104.10).margin(1e-6));
  }
  SECTION("conv4 LLUT stays linear") {
    const auto sel = select_model(ds, BlockKind::conv4, Resource::llut);
    CHECK(sel.report.chosen_degree == 1);
    CHECK(predict(*sel.model, {8, 8}) == Catch::Approx(37.214).margin(1e-6));
  }
  SECTION("conv3 LLUT is a step in coeff_bits") {
    const auto sel = select_model(ds, BlockKind::conv3, Resource::llut);
    CHECK(sel.report.route == Route::segmented);
    const auto& m = std::get<SegmentedModel>(*sel.model);
    CHECK(m.breakpoints == std::vector<int>{6});
    CHECK(m.segment_values[0] == 30.0);
    CHECK(m.segment_values[1] == 35.84);
    CHECK(predict(*sel.model, {4, 5}) == 30.0);
    CHECK(predict(*sel.model, {4, 6}) == 35.84);
  }
  SECTION("every target of every block gets a model") {
    for (BlockKind b : all_blocks)
      for (Resource r : {Resource::llut, Resource::mlut, Resource::ff}) {
        const auto sel = select_model(ds, b, r);
        REQUIRE(sel.model);
        CHECK(model_r2(*sel.model) >= 0.9);
      }
  }
}

TEST_CASE("segmented regression", "[regression]") {
  const auto ds = exact_sweep();
  const auto m = fit_segmented(ds, BlockKind::conv3, Resource::llut);
  CHECK(m.breakpoints == std::vector<int>{6});
  CHECK(m.training_r2 == 1.0);
  CHECK(m.segment_of(3) == 0);
  CHECK(m.segment_of(6) == 1);

  try {
    fit_segmented(ds, BlockKind::conv1, Resource::llut);
    FAIL("guard did not fire");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::guard_violation);
  }
  const auto one_c = surface([](int, int) { return 1.0; }, 3, 8, 5, 5);
  CHECK_THROWS_AS(fit_segmented(one_c, BlockKind::conv2, Resource::llut), Error);
}

TEST_CASE("segmented search matches exhaustive enumeration", "[regression][property]") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<double> level(10);
    for (auto& v : level) v = std::uniform_int_distribution<int>(0, 3)(rng) * 5.0;
    std::normal_distribution<double> noise(0.0, 0.7);
    const auto ds = surface([&](int, int c) { return level[static_cast<std::size_t>(c - 3)] + noise(rng); },
                            3, 6, 3, 12);
    std::vector<int> cs;
    std::vector<std::vector<double>> groups(10);
    double mean = 0.0;
    for (int c = 3; c <= 12; ++c) cs.push_back(c);
    for (const auto& r : ds.records) {
      groups[static_cast<std::size_t>(r.cfg.coeff_bits - 3)].push_back(r.measured.llut);
      mean += r.measured.llut;
    }
    mean /= static_cast<double>(ds.records.size());
    double sst = 0.0;
    for (const auto& r : ds.records) sst += (r.measured.llut - mean) * (r.measured.llut - mean);

    SegmentedOptions opts;
    opts.max_data_correlation = 1.0;  // noise may correlate weakly with d
    const auto m = fit_segmented(ds, BlockKind::conv2, Resource::llut, opts);
    const auto oracle = brute_segments(cs, groups, sst, opts.r2_threshold, opts.max_segments);
    CHECK(m.breakpoints.size() == oracle.breaks.size());
    CHECK(1.0 - m.training_r2 == Catch::Approx(oracle.sse / sst).epsilon(1e-9).margin(1e-12));
  }
}

TEST_CASE("prediction flags extrapolation and clamps negatives", "[regression]") {
  PolynomialModel m;
  m.block = BlockKind::conv2;
  m.terms = {{0, 0}, {1, 0}};
  m.coefficients = {-10.0, 2.0};
  m.domain = {{4, 8}, {4, 8}};
  auto p = predict_checked(m, {6, 6});
  CHECK(p.value == 2.0);
  CHECK_FALSE(p.extrapolated);
  p = predict_checked(m, {3, 6});
  CHECK(p.value == 0.0);
  CHECK(p.clamped);
  CHECK(p.extrapolated);
}

TEST_CASE("model JSON round trip", "[regression][io]") {
  const auto ds = exact_sweep();
  const auto dir = std::filesystem::temp_directory_path() / "convcast_model_io";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);

  for (BlockKind b : all_blocks) {
    auto sel = select_model(ds, b, Resource::llut);
    const auto path = (dir / (std::string(to_string(b)) + "_llut.json")).string();
    write_model(*sel.model, path);
    const auto back = read_model(path);
    CHECK(model_to_json(back) == model_to_json(*sel.model));
    for (int d = 3; d <= 8; ++d)
      for (int c = 3; c <= 8; ++c) CHECK(predict(back, {d, c}) == predict(*sel.model, {d, c}));
  }
  {
    std::ofstream(dir / "run.manifest.json") << "{\"not\": \"a model\"}";
  }
  const auto set = ModelSet::load_dir(dir.string());
  CHECK(set.size() == 4);
  CHECK(set.find(BlockKind::conv3, Resource::llut) != nullptr);
  CHECK(set.find(BlockKind::conv3, Resource::ff) == nullptr);

  auto j = model_to_json(*select_model(ds, BlockKind::conv4, Resource::llut).model);
  CHECK(j["kind"] == "polynomial");
  CHECK(j["toolkit_version"] == std::string(toolkit_version));
  j["coefficients"].push_back(1.0);
  CHECK_THROWS_AS(model_from_json(j), Error);
  CHECK_THROWS_AS(model_from_json(nlohmann::json{{"block", "conv2"}}), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("pruning examples", "[regression]") {
  const auto ds = exact_sweep();
  const auto quad = fit_polynomial(ds, BlockKind::conv4, Resource::llut, 2);
  const auto pruned = prune_insignificant(quad, ds);
  CHECK(pruned.terms == std::vector<MonomialTerm>{{0, 0}, {1, 0}, {0, 1}});
  CHECK(pruned.coefficient({1, 0}).value() == Catch::Approx(1.004).margin(1e-9));

  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 0.3);
  const auto noisy = surface([&](int d, int c) { return 3.0 + 2.0 * d + 1.5 * c + noise(rng); });
  const auto lin = fit_polynomial(noisy, BlockKind::conv2, Resource::llut, 1);
  const auto kept = prune_detailed(lin, noisy);
  CHECK_FALSE(kept.perfect_fit);
  CHECK(kept.model.terms == lin.terms);
  CHECK(kept.model.coefficients == lin.coefficients);

  const auto cubic = fit_polynomial(noisy, BlockKind::conv2, Resource::llut, 3);
  CHECK(prune_insignificant(cubic, noisy, 1.0).terms == cubic.terms);
  CHECK_THROWS_AS(prune_insignificant(cubic, noisy, 0.0), Error);
}
