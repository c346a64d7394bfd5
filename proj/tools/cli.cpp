#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "convcast/convcast.hpp"

namespace convcast::cli {

namespace {

namespace fs = std::filesystem;
using detail::format_fixed;
using detail::format_shortest;

const std::vector<std::string> block_names{"conv1", "conv2", "conv3", "conv4"};
const std::vector<std::string> resource_names{"llut", "mlut", "ff", "cchain", "dsp"};

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::parse_error, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::parse_error, "cannot write '" + path + "'");
  out << content;
  if (!out) throw Error(ErrorKind::parse_error, "write failed for '" + path + "'");
}

// Reproducibility record written next to outputs.
class RunManifest {
 public:
  explicit RunManifest(std::string subcommand) : subcommand_(std::move(subcommand)) {}

  void record_flags(const CLI::App& sub) {
    for (const CLI::Option* opt : sub.get_options()) {
      if (opt->count() == 0 || opt->get_name() == "--help" || opt->get_name() == "--manifest") {
        continue;
      }
      const auto& results = opt->results();
      if (results.size() == 1) {
        flags_[opt->get_name()] = results.front();
      } else {
        flags_[opt->get_name()] = results;
      }
    }
  }

  void add_input(const std::string& path) {
    inputs_.push_back({{"path", path}, {"sha256", sha256_hex(read_file(path))}});
  }

  void add_output(const std::string& path, const std::string& content) {
    outputs_.push_back({{"path", path}, {"sha256", sha256_hex(content)}});
  }

  void set_seed(std::uint64_t seed) { seed_ = seed; }

  std::string dump() const {
    nlohmann::ordered_json j;
    j["subcommand"] = subcommand_;
    j["flags"] = flags_;
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    j["toolkit_version"] = std::string(toolkit_version);
    j["seed"] = seed_ ? nlohmann::ordered_json(*seed_) : nlohmann::ordered_json(nullptr);
    return j.dump(2) + "\n";
  }

 private:
  std::string subcommand_;
  nlohmann::ordered_json flags_ = nlohmann::ordered_json::object();
  nlohmann::ordered_json inputs_ = nlohmann::ordered_json::array();
  nlohmann::ordered_json outputs_ = nlohmann::ordered_json::array();
  std::optional<std::uint64_t> seed_;
};

struct Context {
  std::ostream& out;
  std::ostream& err;
  CLI::App* sub = nullptr;
  std::string manifest_path;
};

// Writes `content` to `path` (or the standard stream when empty) and the
// manifest to its sidecar or explicit location.
void emit(Context& ctx, RunManifest& manifest, const std::string& path, const std::string& content) {
  manifest.record_flags(*ctx.sub);
  if (path.empty() || path == "-") {
    ctx.out << content;
  } else {
    write_file(path, content);
    manifest.add_output(path, content);
  }
  std::string target = ctx.manifest_path;
  if (target.empty() && !path.empty() && path != "-") target = path + ".manifest.json";
  if (!target.empty()) write_file(target, manifest.dump());
}

std::vector<BlockKind> parse_blocks(const std::vector<std::string>& names) {
  std::vector<BlockKind> out;
  for (const auto& n : names) out.push_back(require_block(n));
  return out;
}

PlatformCapacity platform_capacity(const std::string& platform, const std::string& capacities,
                                   RunManifest& manifest) {
  CapacityRegistry registry;
  if (!capacities.empty()) {
    registry.load_csv_file(capacities);
    manifest.add_input(capacities);
  }
  return registry.get(platform);
}

// ---- gen ------------------------------------------------------------------

struct GenArgs {
  std::vector<std::string> blocks = block_names;
  int dmin = min_sweep_bits, dmax = max_sweep_bits;
  int cmin = min_sweep_bits, cmax = max_sweep_bits;
  double noise = 0.0;
  std::uint64_t seed = 42;
  std::string platform = "zcu104";
  std::string rounding = "none";
  std::string output;
};

void setup_gen(CLI::App& app, GenArgs& a) {
  app.add_option("--blocks", a.blocks, "Blocks to sweep")
      ->delimiter(',')
      ->check(CLI::IsMember(block_names))
      ->capture_default_str();
  app.add_option("--dmin", a.dmin, "Smallest data width")->capture_default_str();
  app.add_option("--dmax", a.dmax, "Largest data width")->capture_default_str();
  app.add_option("--cmin", a.cmin, "Smallest coefficient width")->capture_default_str();
  app.add_option("--cmax", a.cmax, "Largest coefficient width")->capture_default_str();
  app.add_option("--noise", a.noise, "Relative noise sigma")->capture_default_str();
  app.add_option("--seed", a.seed, "Noise seed")->capture_default_str();
  app.add_option("--platform", a.platform, "Platform id written to each record")
      ->capture_default_str();
  app.add_option("--rounding", a.rounding, "Cell rounding: none or integer")
      ->check(CLI::IsMember({"none", "integer"}))
      ->capture_default_str();
  app.add_option("-o,--output", a.output, "Output CSV (stdout if omitted)");
}

int do_gen(Context& ctx, const GenArgs& a) {
  GenerateRequest req;
  req.blocks = parse_blocks(a.blocks);
  req.data_bits = {a.dmin, a.dmax};
  req.coeff_bits = {a.cmin, a.cmax};
  req.noise = {a.noise, a.seed};
  req.platform = a.platform;
  req.rounding = a.rounding == "integer" ? Rounding::nearest_integer : Rounding::none;
  std::ostringstream csv;
  write_csv(generate_dataset(req), csv);
  RunManifest manifest("gen");
  manifest.set_seed(a.seed);
  emit(ctx, manifest, a.output, csv.str());
  return 0;
}

// ---- ingest ---------------------------------------------------------------

struct IngestArgs {
  std::string dataset;
  bool validate = false;
  bool integral = false;
  std::string output;
};

void setup_ingest(CLI::App& app, IngestArgs& a) {
  app.add_option("dataset", a.dataset, "Dataset CSV")->required();
  app.add_flag("--validate", a.validate, "Check the file and report a summary (always done)");
  app.add_flag("--integral", a.integral, "Reject non-integer resource cells");
  app.add_option("-o,--output", a.output, "Write the dataset in canonical order");
}

int do_ingest(Context& ctx, const IngestArgs& a) {
  const auto ds = read_csv(a.dataset, ReadOptions{a.integral});
  RunManifest manifest("ingest");
  manifest.add_input(a.dataset);
  std::ostringstream summary;
  summary << "block,records,data_bits_min,data_bits_max,coeff_bits_min,coeff_bits_max\n";
  for (BlockKind b : all_blocks) {
    const auto records = ds.for_block(b);
    if (records.empty()) continue;
    const auto dom = detail::domain_of(records);
    summary << to_string(b) << ',' << records.size() << ',' << dom.data_bits.min << ','
            << dom.data_bits.max << ',' << dom.coeff_bits.min << ',' << dom.coeff_bits.max << '\n';
  }
  summary << "total," << ds.records.size() << '\n';
  if (a.output.empty()) {
    ctx.out << summary.str();
    if (!ctx.manifest_path.empty()) {
      manifest.record_flags(*ctx.sub);
      write_file(ctx.manifest_path, manifest.dump());
    }
  } else {
    ctx.out << summary.str();
    std::ostringstream csv;
    write_csv(ds, csv);
    emit(ctx, manifest, a.output, csv.str());
  }
  return 0;
}

// ---- correlate ------------------------------------------------------------

struct CorrelateArgs {
  std::string dataset;
  std::string block;
  std::string output;
};

void setup_correlate(CLI::App& app, CorrelateArgs& a) {
  app.add_option("dataset", a.dataset, "Dataset CSV")->required();
  app.add_option("--block", a.block, "Block to analyze")
      ->required()
      ->check(CLI::IsMember(block_names));
  app.add_option("-o,--output", a.output, "Output CSV (stdout if omitted)");
}

int do_correlate(Context& ctx, const CorrelateArgs& a) {
  const auto ds = read_csv(a.dataset);
  const auto m = correlation_matrix(ds, require_block(a.block));
  std::ostringstream csv;
  csv << "column";
  for (Column c : m.labels) csv << ',' << to_string(c);
  csv << '\n';
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    csv << to_string(m.labels[i]);
    for (std::size_t j = 0; j < m.labels.size(); ++j) csv << ',' << format_fixed(m.r[i][j], 6);
    csv << '\n';
  }
  for (Column c : m.excluded) {
    ctx.err << "note: " << to_string(c) << " is identically zero for " << a.block
            << " and was left out\n";
  }
  RunManifest manifest("correlate");
  manifest.add_input(a.dataset);
  emit(ctx, manifest, a.output, csv.str());
  return 0;
}

// ---- fit ------------------------------------------------------------------

struct FitArgs {
  std::string dataset;
  std::string block;
  std::string resource = "llut";
  int max_degree = max_polynomial_degree;
  double r2_threshold = 0.9;
  double prune_alpha = 0.05;
  int max_segments = 4;
  std::string platform;
  bool all = false;
  std::string output;
};

void setup_fit(CLI::App& app, FitArgs& a) {
  app.add_option("dataset", a.dataset, "Dataset CSV")->required();
  auto* block = app.add_option("--block", a.block, "Block to model")
                    ->check(CLI::IsMember(block_names));
  app.add_option("--resource", a.resource, "Target resource column")
      ->check(CLI::IsMember(resource_names))
      ->capture_default_str();
  app.add_option("--max-degree", a.max_degree, "Highest polynomial degree tried")
      ->check(CLI::Range(1, max_polynomial_degree))
      ->capture_default_str();
  app.add_option("--r2-threshold", a.r2_threshold, "Acceptance threshold on training R^2")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app.add_option("--prune-alpha", a.prune_alpha, "Significance level for term pruning")
      ->capture_default_str();
  app.add_option("--max-segments", a.max_segments, "Segment limit for step models")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--platform", a.platform, "Restrict to one platform's records");
  auto* all = app.add_flag("--all", a.all,
                           "Fit every (block, resource) present, concurrently; -o names a directory");
  block->excludes(all);
  app.add_option("-o,--output", a.output, "Model JSON (or directory with --all)");
}

struct FitOutcome {
  BlockKind block;
  Resource resource;
  Selection selection;
  std::string error;
};

FitOutcome run_fit(const Dataset& ds, BlockKind block, Resource resource, const SelectOptions& opts) {
  FitOutcome o{block, resource, {}, {}};
  try {
    o.selection = select_model(ds, block, resource, opts);
    if (!o.selection.model) o.error = "no model reached the R^2 threshold";
  } catch (const Error& e) {
    o.error = std::string(to_string(e.kind())) + ": " + e.what();
  }
  return o;
}

std::string r2_text(double r2) { return format_fixed(r2, 9); }

std::string fit_report(const FitOutcome& o) {
  const auto& rep = o.selection.report;
  std::ostringstream s;
  s << "key,value\n";
  s << "block," << to_string(o.block) << '\n';
  s << "resource," << to_string(o.resource) << '\n';
  for (std::size_t k = 0; k < rep.r2_by_degree.size(); ++k) {
    s << "r2_degree_" << k + 1 << ',';
    if (rep.r2_by_degree[k]) s << r2_text(*rep.r2_by_degree[k]);
    else s << "n/a";
    s << '\n';
  }
  s << "chosen_degree," << (rep.chosen_degree ? std::to_string(*rep.chosen_degree) : "none") << '\n';
  std::string removed;
  for (const auto& t : rep.prune_tests) {
    if (!t.removed) continue;
    if (!removed.empty()) removed += ';';
    removed += term_name(t.term);
  }
  s << "pruned_terms," << removed << '\n';
  s << "segmented_r2," << (rep.segmented_r2 ? r2_text(*rep.segmented_r2) : "n/a") << '\n';
  s << "route," << to_string(rep.route) << '\n';
  if (o.selection.model) s << "training_r2," << r2_text(model_r2(*o.selection.model)) << '\n';
  return s.str();
}

int do_fit(Context& ctx, const FitArgs& a) {
  if (!a.all && a.block.empty()) throw CLI::RequiredError("--block (or --all)");
  const auto ds = read_csv(a.dataset);
  SelectOptions opts;
  opts.r2_threshold = a.r2_threshold;
  opts.alpha = a.prune_alpha;
  opts.max_degree = a.max_degree;
  opts.max_segments = a.max_segments;
  opts.platform = a.platform;
  RunManifest manifest("fit");
  manifest.add_input(a.dataset);

  if (!a.all) {
    FitOutcome outcome{require_block(a.block), require_resource(a.resource), {}, {}};
    outcome.selection = select_model(ds, outcome.block, outcome.resource, opts);
    if (!outcome.selection.model) {
      ctx.err << fit_report(outcome);
      throw Error(ErrorKind::no_model, "no model for " + a.block + " " + a.resource +
                                           " reached R^2 >= " + format_shortest(a.r2_threshold));
    }
    const auto json = model_to_json(*outcome.selection.model).dump(2) + "\n";
    if (a.output.empty() || a.output == "-") {
      ctx.err << fit_report(outcome);
    } else {
      ctx.out << fit_report(outcome);
    }
    emit(ctx, manifest, a.output, json);
    return 0;
  }

  if (a.output.empty()) throw CLI::RequiredError("-o (output directory for --all)");
  fs::create_directories(a.output);
  std::vector<std::future<FitOutcome>> jobs;
  for (BlockKind b : all_blocks) {
    const auto records = ds.for_block(b);
    if (records.empty()) continue;
    for (Resource r : {Resource::llut, Resource::mlut, Resource::ff, Resource::cchain}) {
      const auto ys = resource_values(records, r);
      if (std::all_of(ys.begin(), ys.end(), [](double v) { return v == 0.0; })) continue;
      jobs.push_back(std::async(std::launch::async, run_fit, std::cref(ds), b, r, opts));
    }
  }
  std::ostringstream table;
  table << "block,resource,route,degree,training_r2,file\n";
  std::size_t failures = 0;
  manifest.record_flags(*ctx.sub);
  for (auto& job : jobs) {
    const auto o = job.get();
    table << to_string(o.block) << ',' << to_string(o.resource) << ',';
    if (!o.selection.model) {
      ++failures;
      table << "none,,,\n";
      ctx.err << "error: " << to_string(o.block) << ' ' << to_string(o.resource) << ": " << o.error
              << '\n';
      continue;
    }
    const auto name = std::string(to_string(o.block)) + "_" + std::string(to_string(o.resource)) + ".json";
    const auto path = (fs::path(a.output) / name).string();
    const auto json = model_to_json(*o.selection.model).dump(2) + "\n";
    write_file(path, json);
    manifest.add_output(path, json);
    const auto& rep = o.selection.report;
    table << to_string(rep.route) << ','
          << (rep.route == Route::polynomial && rep.chosen_degree ? std::to_string(*rep.chosen_degree) : "")
          << ',' << r2_text(model_r2(*o.selection.model)) << ',' << name << '\n';
  }
  ctx.out << table.str();
  const auto target = ctx.manifest_path.empty() ? (fs::path(a.output) / "fit.manifest.json").string()
                                                : ctx.manifest_path;
  write_file(target, manifest.dump());
  if (failures > 0) {
    throw Error(ErrorKind::no_model, std::to_string(failures) + " of " + std::to_string(jobs.size()) +
                                         " fits produced no model");
  }
  return 0;
}

// ---- validate -------------------------------------------------------------

struct ValidateArgs {
  std::string model;
  std::string dataset;
  std::string platform;
  std::string output;
};

void setup_validate(CLI::App& app, ValidateArgs& a) {
  app.add_option("model", a.model, "Model JSON")->required();
  app.add_option("dataset", a.dataset, "Dataset CSV")->required();
  app.add_option("--platform", a.platform, "Restrict to one platform's records");
  app.add_option("-o,--output", a.output, "Output CSV (stdout if omitted)");
}

int do_validate(Context& ctx, const ValidateArgs& a) {
  const auto model = read_model(a.model);
  const auto ds = read_csv(a.dataset);
  const auto records = detail::block_records(ds, model_block(model), a.platform);
  std::vector<double> preds, truths;
  std::size_t outside = 0;
  for (const auto& r : records) {
    const auto p = predict_checked(model, r.cfg);
    outside += p.extrapolated ? 1 : 0;
    preds.push_back(p.value);
    truths.push_back(r.measured[model_resource(model)]);
  }
  const auto m = evaluate(preds, truths);
  std::ostringstream csv;
  csv << "metric,value\n";
  csv << "mse," << format_shortest(m.mse) << '\n';
  csv << "mae," << format_shortest(m.mae) << '\n';
  csv << "r2," << format_shortest(m.r2) << '\n';
  csv << "mape_percent," << format_shortest(m.mape_percent) << '\n';
  csv << "count," << m.count << '\n';
  csv << "excluded_zero_truth," << m.excluded_zero_truth << '\n';
  csv << "extrapolated," << outside << '\n';
  RunManifest manifest("validate");
  manifest.add_input(a.model);
  manifest.add_input(a.dataset);
  emit(ctx, manifest, a.output, csv.str());
  return 0;
}

// ---- predict --------------------------------------------------------------

struct PredictArgs {
  std::string model;
  std::string models_dir;
  int d = 8;
  int c = 8;
  std::vector<long long> counts;
  std::string platform = "zcu104";
  std::string capacities;
  std::string output;
};

void setup_predict(CLI::App& app, PredictArgs& a) {
  auto* model = app.add_option("model", a.model, "Single model JSON");
  auto* dir = app.add_option("--models", a.models_dir, "Directory of fitted models");
  model->excludes(dir);
  app.add_option("--d", a.d, "Data width")->capture_default_str();
  app.add_option("--c", a.c, "Coefficient width")->capture_default_str();
  app.add_option("--counts", a.counts, "Instances of conv1,conv2,conv3,conv4")
      ->delimiter(',')
      ->expected(4);
  app.add_option("--platform", a.platform, "Platform id")->capture_default_str();
  app.add_option("--capacities", a.capacities, "Extra platform capacity CSV");
  app.add_option("-o,--output", a.output, "Output file (stdout if omitted)");
}

std::string usage_csv(const ResourceVector& usage, long long convs) {
  std::ostringstream s;
  s << "resource,usage_percent\n";
  for (Resource r : all_resources) s << to_string(r) << ',' << format_fixed(usage[r], 3) << '\n';
  s << "total_convs," << convs << '\n';
  return s.str();
}

int do_predict(Context& ctx, const PredictArgs& a) {
  const ConfigPoint cfg{a.d, a.c};
  RunManifest manifest("predict");
  if (!a.model.empty()) {
    const auto model = read_model(a.model);
    manifest.add_input(a.model);
    require_valid(model_block(model), cfg);
    const auto p = predict_checked(model, cfg);
    if (p.extrapolated) {
      ctx.err << "warning: (" << a.d << ", " << a.c << ") lies outside the fitted domain\n";
    }
    if (p.clamped) ctx.err << "warning: negative prediction clamped to 0\n";
    emit(ctx, manifest, a.output, format_fixed(p.value, 3) + "\n");
    return 0;
  }
  if (a.models_dir.empty()) throw CLI::RequiredError("model or --models");
  if (a.counts.size() != 4) throw CLI::RequiredError("--counts (with --models)");
  const auto models = ModelSet::load_dir(a.models_dir);
  std::vector<BlockKind> used;
  BlockCounts counts{};
  for (BlockKind b : all_blocks) {
    counts[index_of(b)] = a.counts[index_of(b)];
    if (counts[index_of(b)] != 0) used.push_back(b);
  }
  for (BlockKind b : used) require_valid(b, cfg);
  const auto costs = build_cost_table(models, cfg, used);
  const auto platform = platform_capacity(a.platform, a.capacities, manifest);
  const auto usage = predict_usage(counts, costs, platform);
  emit(ctx, manifest, a.output, usage_csv(usage.usage_percent, usage.total_convs));
  return 0;
}

// ---- allocate -------------------------------------------------------------

struct AllocateArgs {
  std::string models_dir;
  int d = 8;
  int c = 8;
  double budget = 0.8;
  std::array<std::optional<double>, 5> overrides;
  bool constrain_mlut = false;
  std::vector<std::string> only;
  std::string platform = "zcu104";
  std::string capacities;
  std::string output;
};

void setup_allocate(CLI::App& app, AllocateArgs& a) {
  app.add_option("--models", a.models_dir, "Directory of fitted models")->required();
  app.add_option("--d", a.d, "Data width")->capture_default_str();
  app.add_option("--c", a.c, "Coefficient width")->capture_default_str();
  app.add_option("--budget", a.budget, "Fraction of each resource available")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  for (Resource r : all_resources) {
    const auto name = std::string(to_string(r));
    app.add_option("--budget-" + name, a.overrides[static_cast<std::size_t>(r)],
                   "Budget override for " + name)
        ->check(CLI::Range(0.0, 1.0));
  }
  app.add_flag("--constrain-mlut", a.constrain_mlut, "Also enforce the MLUT budget");
  app.add_option("--only", a.only, "Restrict to these blocks")
      ->delimiter(',')
      ->check(CLI::IsMember(block_names));
  app.add_option("--platform", a.platform, "Platform id")->capture_default_str();
  app.add_option("--capacities", a.capacities, "Extra platform capacity CSV");
  app.add_option("-o,--output", a.output, "Output CSV (stdout if omitted)");
}

int do_allocate(Context& ctx, const AllocateArgs& a) {
  RunManifest manifest("allocate");
  AllocationRequest req;
  req.cfg = {a.d, a.c};
  req.platform = platform_capacity(a.platform, a.capacities, manifest);
  for (Resource r : all_resources) {
    const auto& o = a.overrides[static_cast<std::size_t>(r)];
    req.budget[r] = o ? *o : a.budget;
  }
  req.constrain_mlut = a.constrain_mlut;
  if (!a.only.empty()) req.allowed = parse_blocks(a.only);
  // Blocks that cannot run at this configuration simply take no part.
  std::vector<BlockKind> allowed;
  for (BlockKind b : req.allowed) {
    if (!validate_config(b, req.cfg)) {
      allowed.push_back(b);
    } else if (!a.only.empty()) {
      require_valid(b, req.cfg);
    }
  }
  req.allowed = allowed;
  req.costs = build_cost_table(ModelSet::load_dir(a.models_dir), req.cfg, req.allowed);
  const auto plan = allocate_optimal(req);
  std::ostringstream csv;
  csv << "block,count\n";
  for (BlockKind b : all_blocks) csv << to_string(b) << ',' << plan.counts[index_of(b)] << '\n';
  csv << usage_csv(plan.usage_percent, plan.total_convs);
  emit(ctx, manifest, a.output, csv.str());
  return 0;
}

// ---- surface --------------------------------------------------------------

struct SurfaceArgs {
  std::string model;
  std::optional<int> dmin, dmax, cmin, cmax;
  std::string output;
};

void setup_surface(CLI::App& app, SurfaceArgs& a) {
  app.add_option("model", a.model, "Model JSON")->required();
  app.add_option("--dmin", a.dmin, "Grid start in data width (default: fitted domain)");
  app.add_option("--dmax", a.dmax, "Grid end in data width");
  app.add_option("--cmin", a.cmin, "Grid start in coefficient width");
  app.add_option("--cmax", a.cmax, "Grid end in coefficient width");
  app.add_option("-o,--output", a.output, "Output CSV (stdout if omitted)");
}

int do_surface(Context& ctx, const SurfaceArgs& a) {
  const auto model = read_model(a.model);
  const auto dom = std::visit([](const auto& m) { return m.domain; }, model);
  const int dlo = a.dmin.value_or(dom.data_bits.min), dhi = a.dmax.value_or(dom.data_bits.max);
  const int clo = a.cmin.value_or(dom.coeff_bits.min), chi = a.cmax.value_or(dom.coeff_bits.max);
  if (dlo > dhi || clo > chi) throw Error(ErrorKind::invalid_config, "empty surface grid");
  std::ostringstream csv;
  csv << "data_bits,coeff_bits,predicted\n";
  for (int d = dlo; d <= dhi; ++d)
    for (int c = clo; c <= chi; ++c)
      csv << d << ',' << c << ',' << format_fixed(predict(model, {d, c}), 6) << '\n';
  RunManifest manifest("surface");
  manifest.add_input(a.model);
  emit(ctx, manifest, a.output, csv.str());
  return 0;
}

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
  std::string block;
  int d = 8;
  int c = 8;
  std::string frame;
  std::string kernel;
  std::string output;
};

void setup_simulate(CLI::App& app, SimulateArgs& a) {
  app.add_option("--block", a.block, "Block to simulate")
      ->required()
      ->check(CLI::IsMember(block_names));
  app.add_option("--d", a.d, "Data width")->capture_default_str();
  app.add_option("--c", a.c, "Coefficient width")->capture_default_str();
  app.add_option("--frame", a.frame, "Frame as a CSV integer grid")->required();
  app.add_option("--kernel", a.kernel, "3x3 kernel as a CSV integer grid")->required();
  app.add_option("-o,--output", a.output, "Output grid CSV (stdout if omitted)");
}

std::vector<std::vector<std::int64_t>> read_grid(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<std::vector<std::int64_t>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::chomp(line);
    if (text.empty()) continue;
    std::vector<std::int64_t> row;
    for (const auto& cell : detail::split_csv_line(text)) {
      const auto v = detail::parse_int(cell);
      if (!v) {
        throw Error(ErrorKind::parse_error,
                    path + " line " + std::to_string(line_no) + ": non-integer cell '" + cell + "'");
      }
      row.push_back(*v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorKind::parse_error, path + " line " + std::to_string(line_no) + ": expected " +
                                              std::to_string(rows.front().size()) + " cells");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::parse_error, path + ": empty grid");
  return rows;
}

int do_simulate(Context& ctx, const SimulateArgs& a) {
  const auto kind = require_block(a.block);
  const ConfigPoint cfg{a.d, a.c};
  require_valid(kind, cfg);
  const auto grid = read_grid(a.frame);
  Frame frame{static_cast<int>(grid.size()), static_cast<int>(grid.front().size()), a.d, {}};
  for (const auto& row : grid) frame.pixels.insert(frame.pixels.end(), row.begin(), row.end());
  const auto kgrid = read_grid(a.kernel);
  if (kgrid.size() != 3 || kgrid.front().size() != 3) {
    throw Error(ErrorKind::parse_error, a.kernel + ": kernel must be a 3x3 grid");
  }
  std::array<std::int64_t, 9> coeffs{};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) coeffs[i * 3 + j] = kgrid[i][j];
  const auto result = convolve_frame(kind, cfg, frame, make_kernel(coeffs, a.c));

  std::ostringstream csv;
  for (int r = 0; r < result.rows; ++r) {
    for (int col = 0; col < result.cols; ++col) {
      if (col > 0) csv << ',';
      csv << result.at(r, col).value;
    }
    csv << '\n';
  }
  RunManifest manifest("simulate");
  manifest.add_input(a.frame);
  manifest.add_input(a.kernel);
  emit(ctx, manifest, a.output, csv.str());
  (a.output.empty() || a.output == "-" ? ctx.err : ctx.out) << "cycles," << result.cycles << '\n';
  return 0;
}

}  // namespace

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Resource modeling toolkit for 3x3 convolution blocks", "convcast"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.set_version_flag("--version", std::string(toolkit_version));
  const char* config_env = std::getenv("CONVCAST_CONFIG");
  app.set_config("--config", config_env ? config_env : "", "Defaults file (TOML/INI, same keys as flags)");

  std::string manifest_path;
  auto add = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--manifest", manifest_path, "Where to write the run manifest");
    return sub;
  };

  GenArgs gen;
  IngestArgs ingest;
  CorrelateArgs correlate;
  FitArgs fit;
  ValidateArgs validate;
  PredictArgs predict_args;
  AllocateArgs allocate;
  SurfaceArgs surface;
  SimulateArgs simulate;

  auto* gen_cmd = add("gen", "Generate a synthetic synthesis-sweep dataset");
  setup_gen(*gen_cmd, gen);
  auto* ingest_cmd = add("ingest", "Validate a dataset CSV and summarize it");
  setup_ingest(*ingest_cmd, ingest);
  auto* correlate_cmd = add("correlate", "Pearson correlation matrix for one block");
  setup_correlate(*correlate_cmd, correlate);
  auto* fit_cmd = add("fit", "Select and fit a resource model");
  setup_fit(*fit_cmd, fit);
  auto* validate_cmd = add("validate", "Error metrics of a model against a dataset");
  setup_validate(*validate_cmd, validate);
  auto* predict_cmd = add("predict", "Predict one resource, or platform usage of a block mix");
  setup_predict(*predict_cmd, predict_args);
  auto* allocate_cmd = add("allocate", "Block mix maximizing convolutions per cycle under a budget");
  setup_allocate(*allocate_cmd, allocate);
  auto* surface_cmd = add("surface", "Prediction grid over (data_bits, coeff_bits)");
  setup_surface(*surface_cmd, surface);
  auto* simulate_cmd = add("simulate", "Run a frame through a block simulator");
  setup_simulate(*simulate_cmd, simulate);

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  Context ctx{out, err, nullptr, manifest_path};
  try {
    if (gen_cmd->parsed()) return ctx.sub = gen_cmd, do_gen(ctx, gen);
    if (ingest_cmd->parsed()) return ctx.sub = ingest_cmd, do_ingest(ctx, ingest);
    if (correlate_cmd->parsed()) return ctx.sub = correlate_cmd, do_correlate(ctx, correlate);
    if (fit_cmd->parsed()) return ctx.sub = fit_cmd, do_fit(ctx, fit);
    if (validate_cmd->parsed()) return ctx.sub = validate_cmd, do_validate(ctx, validate);
    if (predict_cmd->parsed()) return ctx.sub = predict_cmd, do_predict(ctx, predict_args);
    if (allocate_cmd->parsed()) return ctx.sub = allocate_cmd, do_allocate(ctx, allocate);
    if (surface_cmd->parsed()) return ctx.sub = surface_cmd, do_surface(ctx, surface);
    if (simulate_cmd->parsed()) return ctx.sub = simulate_cmd, do_simulate(ctx, simulate);
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << ctx.sub->help();
    return 2;
  } catch (const Error& e) {
    err << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: io: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(std::move(args), std::cout, std::cerr);
}

}  // namespace convcast::cli
