#pragma once
// Internal JSON plumbing shared by config parsing, checkpoints, and run
// manifests. Not installed: public headers stay free of the JSON dependency.

#include <json.hpp>

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "vollab/common.hpp"
#include "vollab/config.hpp"
#include "vollab/model.hpp"
#include "vollab/optim.hpp"

namespace vollab {

using Json = nlohmann::json;

// ============================================================================
// Strict object reader
// ============================================================================

// Wraps one JSON object; `take` marks keys as consumed and `finish` rejects
// anything left over, naming the full dotted path.
class StrictObj {
 public:
  StrictObj(const Json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object())
      throw ConfigError("config: '" + path_ + "' must be an object");
  }

  bool has(const char* key) const { return j_->contains(key); }

  template <typename T>
  void take(const char* key, T& out) {
    seen_.insert(key);
    if (!j_->contains(key)) return;
    read(j_->at(key), dotted(key), out);
  }

  // Nested section; absent keys act as an empty object.
  Json section(const char* key) {
    seen_.insert(key);
    if (!j_->contains(key)) return Json::object();
    return j_->at(key);
  }

  void finish() const {
    for (auto it = j_->begin(); it != j_->end(); ++it)
      if (!seen_.count(it.key()))
        throw ConfigError("config: unknown key '" + dotted(it.key().c_str()) +
                          "'");
  }

 private:
  std::string dotted(const char* key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  static void read(const Json& v, const std::string& at, double& out) {
    if (!v.is_number())
      throw ConfigError("config: '" + at + "' expects a number");
    out = v.get<double>();
  }
  static void read(const Json& v, const std::string& at, bool& out) {
    if (!v.is_boolean())
      throw ConfigError("config: '" + at + "' expects a boolean");
    out = v.get<bool>();
  }
  static void read(const Json& v, const std::string& at, std::string& out) {
    if (!v.is_string())
      throw ConfigError("config: '" + at + "' expects a string");
    out = v.get<std::string>();
  }
  static void read(const Json& v, const std::string& at, std::int64_t& out) {
    if (!v.is_number_integer())
      throw ConfigError("config: '" + at + "' expects an integer");
    out = v.get<std::int64_t>();
  }
  static void read(const Json& v, const std::string& at, int& out) {
    if (!v.is_number_integer())
      throw ConfigError("config: '" + at + "' expects an integer");
    out = v.get<int>();
  }
  // Covers std::size_t and std::uint64_t (one type on this platform).
  static void read(const Json& v, const std::string& at, std::uint64_t& out) {
    if (!v.is_number_integer() ||
        (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      throw ConfigError("config: '" + at + "' expects a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  template <typename T>
  static void read(const Json& v, const std::string& at, std::vector<T>& out) {
    if (!v.is_array())
      throw ConfigError("config: '" + at + "' expects an array");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      T item{};
      read(v.at(i), at + "[" + std::to_string(i) + "]", item);
      out.push_back(item);
    }
  }

  const Json* j_;
  std::string path_;
  std::set<std::string> seen_;
};

// ============================================================================
// Struct <-> JSON converters (effective form: every field present)
// ============================================================================

Json model_to_json(const ModelConfig& m);
ModelConfig model_from_json(const Json& j, const std::string& path);

Json optim_to_json(const OptimizerConfig& o);
OptimizerConfig optim_from_json(const Json& j, const std::string& path);

Json run_config_to_json(const RunConfig& cfg);

}  // namespace vollab
