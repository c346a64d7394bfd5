#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>

#include <json.hpp>

#include "convcast/error.hpp"
#include "convcast/model_core.hpp"
#include "convcast/regression.hpp"

namespace convcast {

namespace detail {

inline nlohmann::json range_json(BitRange r) { return nlohmann::json::array({r.min, r.max}); }

inline BitRange range_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorKind::parse_error, "range must be [min, max]");
  return {j.at(0).get<int>(), j.at(1).get<int>()};
}

}  // namespace detail

inline nlohmann::json model_to_json(const Model& model) {
  nlohmann::json j;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        j["block"] = std::string(to_string(m.block));
        j["resource"] = std::string(to_string(m.resource));
        if constexpr (std::is_same_v<T, PolynomialModel>) {
          j["kind"] = "polynomial";
          j["degree"] = m.degree;
          auto terms = nlohmann::json::array();
          for (const auto& t : m.terms) terms.push_back({t.i, t.j});
          j["terms"] = terms;
          j["coefficients"] = m.coefficients;
        } else {
          j["kind"] = "segmented";
          j["variable"] = "coeff_bits";
          j["breakpoints"] = m.breakpoints;
          j["segment_values"] = m.segment_values;
        }
        j["training_r2"] = m.training_r2;
        j["fitted_domain"] = {{"data_bits", detail::range_json(m.domain.data_bits)},
                              {"coeff_bits", detail::range_json(m.domain.coeff_bits)}};
        j["toolkit_version"] = std::string(toolkit_version);
      },
      model);
  return j;
}

inline Model model_from_json(const nlohmann::json& j) {
  try {
    const auto block = require_block(j.at("block").get<std::string>());
    const auto resource = require_resource(j.at("resource").get<std::string>());
    const auto kind = j.at("kind").get<std::string>();
    FittedDomain domain{detail::range_from_json(j.at("fitted_domain").at("data_bits")),
                        detail::range_from_json(j.at("fitted_domain").at("coeff_bits"))};
    const double r2 = j.at("training_r2").get<double>();

    if (kind == "polynomial") {
      PolynomialModel m;
      m.block = block;
      m.resource = resource;
      m.degree = j.value("degree", 1);
      for (const auto& t : j.at("terms")) m.terms.push_back({t.at(0).get<int>(), t.at(1).get<int>()});
      m.coefficients = j.at("coefficients").get<std::vector<double>>();
      m.training_r2 = r2;
      m.domain = domain;
      if (m.terms.size() != m.coefficients.size()) {
        throw Error(ErrorKind::parse_error, "model has " + std::to_string(m.terms.size()) +
                                                " terms but " +
                                                std::to_string(m.coefficients.size()) +
                                                " coefficients");
      }
      for (const auto& t : m.terms) {
        if (t.i < 0 || t.j < 0 || t.degree() > max_polynomial_degree) {
          throw Error(ErrorKind::parse_error, "invalid monomial exponent in model");
        }
      }
      return m;
    }
    if (kind == "segmented") {
      SegmentedModel m;
      m.block = block;
      m.resource = resource;
      m.breakpoints = j.at("breakpoints").get<std::vector<int>>();
      m.segment_values = j.at("segment_values").get<std::vector<double>>();
      m.training_r2 = r2;
      m.domain = domain;
      if (m.segment_values.size() != m.breakpoints.size() + 1 ||
          !std::is_sorted(m.breakpoints.begin(), m.breakpoints.end()) ||
          std::adjacent_find(m.breakpoints.begin(), m.breakpoints.end()) != m.breakpoints.end()) {
        throw Error(ErrorKind::parse_error, "segmented model breakpoints/values are inconsistent");
      }
      return m;
    }
    throw Error(ErrorKind::parse_error, "unknown model kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse_error, std::string("malformed model JSON: ") + e.what());
  }
}

inline void write_model(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::parse_error, "cannot write '" + path + "'");
  out << model_to_json(model).dump(2) << '\n';
}

inline Model read_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::parse_error, "cannot open model '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse_error, "'" + path + "': " + e.what());
  }
  return model_from_json(j);
}

/// Fitted models indexed by (block, resource).
class ModelSet {
 public:
  void add(Model model) {
    const auto key = std::make_pair(model_block(model), model_resource(model));
    models_.insert_or_assign(key, std::move(model));
  }

  const Model* find(BlockKind block, Resource resource) const {
    auto it = models_.find({block, resource});
    return it == models_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return models_.size(); }

  /// Loads every `*.json` model in `dir` (sorted by file name), skipping
  /// `*.manifest.json` run manifests.
  static ModelSet load_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw Error(ErrorKind::parse_error, "'" + dir + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto name = entry.path().filename().string();
      const bool manifest = name.size() > 14 && name.ends_with(".manifest.json");
      if (entry.is_regular_file() && entry.path().extension() == ".json" && !manifest) {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    ModelSet set;
    for (const auto& f : files) set.add(read_model(f.string()));
    return set;
  }

 private:
  std::map<std::pair<BlockKind, Resource>, Model> models_;
};

}  // namespace convcast
