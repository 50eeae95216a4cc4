#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cotlsa/errors.hpp"
#include "cotlsa/training.hpp"

namespace cotlsa::cli {

using nlohmann::json;

// Reads fields from one JSON object and remembers which keys were consumed, so
// that finish() can reject anything left over.
class FieldReader {
 public:
  explicit FieldReader(const json& obj, std::string context);

  bool has(const std::string& key) const { return obj_.contains(key); }

  template <class T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!obj_.contains(key)) return fallback;
    return convert<T>(key);
  }

  template <class T>
  T require(const std::string& key) {
    seen_.insert(key);
    if (!obj_.contains(key)) throw ConfigError(context_ + ": missing required field \"" + key + "\"");
    return convert<T>(key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  void ignore(const std::string& key) { seen_.insert(key); }
  void finish() const;

 private:
  template <class T>
  T convert(const std::string& key) const {
    const json& v = obj_.at(key);
    try {
      if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint32_t>) {
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
          throw ConfigError(context_ + ": field \"" + key + "\" must be a non-negative integer");
      } else if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError(context_ + ": field \"" + key + "\" must be a number");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(context_ + ": field \"" + key + "\" must be a boolean");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(context_ + ": field \"" + key + "\" must be a string");
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(context_ + ": field \"" + key + "\": " + e.what());
    }
  }

  const json& obj_;
  std::string context_;
  std::set<std::string> seen_;
};

// Parses a strict JSON file (no comments, no trailing commas).
json load_json_file(const std::string& path);

// One run of a possibly swept config. A config object may carry a top-level
// "sweep": [ {override}, ... ]; each override is merged key-by-key into the
// base and yields one run. Without "sweep" the base itself is the only run.
// Runs inherit the base run_id suffixed with "-<index>" unless the override
// sets its own.
struct RunSpec {
  std::string run_id;
  json config;  // merged object without "sweep"
};

std::vector<RunSpec> expand_sweep(const json& root, const std::string& default_run_id);

// Keys allowed in every config besides the command-specific ones.
void consume_meta(FieldReader& r, const std::string& command);

struct TrainRun {
  std::string run_id;
  TrainConfig cfg;
  bool timing = false;
  bool checkpoints = true;  // write a checkpoint at every logged step
};

TrainRun parse_train(const RunSpec& spec);

struct SigmaSpec {
  enum class Kind { identity, scaled, ood } kind = Kind::identity;
  double scale = 1.0;       // scaled: scale·I
  std::size_t count = 10;   // ood: number of random covariances
  double delta = 0.5;       // ood: window parameter
};

struct EvalRun {
  std::string run_id;
  std::vector<std::string> checkpoints;
  std::vector<std::size_t> k_primes;
  std::vector<SigmaSpec> sigmas;
  std::size_t tasks = 10000;
  std::optional<std::size_t> n;      // defaults to the checkpoint sidecar
  std::optional<double> eta;         // defaults to the checkpoint sidecar
  std::uint64_t seed = 0;
  bool timing = false;
  double max_loss = -1.0;            // when ≥ 0, exit 1 if any row exceeds it
  std::string output = "eval";       // table file stem under --out
};

EvalRun parse_eval(const RunSpec& spec);

struct ConstructRun {
  std::string run_id;
  std::size_t d = 10;
  std::size_t n = 20;
  std::size_t k = 20;
  double eta = 0.4;
  bool optimal_eta = false;  // use n/(n+d+1) instead of eta
};

ConstructRun parse_construct(const RunSpec& spec);

struct VerifyRun {
  std::string run_id;
  std::vector<std::string> checks;
  json params = json::object();  // per-check overrides keyed by check name
  std::uint64_t seed = 0;
};

VerifyRun parse_verify(const RunSpec& spec);

struct LoopRun {
  std::string run_id;
  std::size_t d = 8;
  std::size_t n = 1024;
  std::size_t loops = 4;
  double h = 0.05;
  std::size_t steps = 300;
  std::size_t batch = 256;
  std::size_t eval_tasks = 2000;
  std::size_t direct_tasks = 0;
  std::size_t log_every = 10;
  double a0_scale = 0.2;  // A(0) = a0_scale·I
  std::uint64_t seed = 0;
  bool separation = false;  // also run L = 1 on matched seeds and compare
};

LoopRun parse_loop(const RunSpec& spec);

struct RecipeEntry {
  std::string file;
  std::string command;
  std::string claim;
};

// Reads every *.json in dir (sorted by name) and returns its command and claim.
std::vector<RecipeEntry> list_recipes(const std::string& dir);

}  // namespace cotlsa::cli
