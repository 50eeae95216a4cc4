#include "run_config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace cotlsa::cli {

FieldReader::FieldReader(const json& obj, std::string context) : obj_(obj), context_(std::move(context)) {
  if (!obj_.is_object()) throw ConfigError(context_ + ": expected a JSON object");
}

void FieldReader::finish() const {
  std::vector<std::string> unknown;
  for (const auto& [key, _] : obj_.items())
    if (!seen_.count(key)) unknown.push_back(key);
  if (unknown.empty()) return;
  std::string msg = context_ + ": unknown field";
  msg += unknown.size() > 1 ? "s" : "";
  for (std::size_t i = 0; i < unknown.size(); ++i) msg += (i ? ", \"" : " \"") + unknown[i] + "\"";
  throw ConfigError(msg);
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str(), nullptr, true, false);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::vector<RunSpec> expand_sweep(const json& root, const std::string& default_run_id) {
  if (!root.is_object()) throw ConfigError("config must be a JSON object");
  json base = root;
  base.erase("sweep");
  const std::string base_id = base.value("run_id", default_run_id);
  if (!root.contains("sweep")) return {RunSpec{base_id, base}};

  const json& sweep = root.at("sweep");
  if (!sweep.is_array() || sweep.empty()) throw ConfigError("\"sweep\" must be a non-empty list of override objects");
  std::vector<RunSpec> runs;
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    const json& o = sweep[i];
    if (!o.is_object()) throw ConfigError("sweep entry " + std::to_string(i) + " is not an object");
    if (o.contains("sweep") || o.contains("claim") || o.contains("command"))
      throw ConfigError("sweep entry " + std::to_string(i) + " may not override sweep, claim or command");
    json merged = base;
    for (const auto& [key, value] : o.items()) merged[key] = value;
    std::string id = o.contains("run_id") ? o.at("run_id").get<std::string>() : base_id + "-" + std::to_string(i);
    runs.push_back(RunSpec{id, merged});
  }
  return runs;
}

void consume_meta(FieldReader& r, const std::string& command) {
  r.get<std::string>("claim", "");
  r.ignore("run_id");
  const std::string declared = r.get<std::string>("command", command);
  if (declared != command)
    throw ConfigError("config is for command \"" + declared + "\", not \"" + command + "\"");
}

namespace {

template <class Enum>
Enum parse_enum(const std::string& field, const std::string& value,
                std::initializer_list<std::pair<const char*, Enum>> options) {
  std::string names;
  for (const auto& [name, e] : options) {
    if (value == name) return e;
    names += names.empty() ? name : std::string(", ") + name;
  }
  throw ConfigError("field \"" + field + "\" must be one of " + names + " (got \"" + value + "\")");
}

std::vector<std::size_t> size_list(const json& v, const std::string& field) {
  std::vector<std::size_t> out;
  auto one = [&](const json& x) {
    if (!x.is_number_integer() || x.get<long long>() < 0)
      throw ConfigError("field \"" + field + "\" must hold non-negative integers");
    out.push_back(x.get<std::size_t>());
  };
  if (v.is_array()) {
    for (const auto& x : v) one(x);
  } else {
    one(v);
  }
  if (out.empty()) throw ConfigError("field \"" + field + "\" is empty");
  return out;
}

SigmaSpec parse_sigma(const json& v) {
  SigmaSpec s;
  if (v.is_string()) {
    if (v.get<std::string>() != "identity") throw ConfigError("sigma string must be \"identity\"");
    return s;
  }
  FieldReader r(v, "sigma");
  const std::string kind = r.require<std::string>("kind");
  if (kind == "identity") {
    s.kind = SigmaSpec::Kind::identity;
  } else if (kind == "scaled") {
    s.kind = SigmaSpec::Kind::scaled;
    s.scale = r.require<double>("scale");
    if (!(s.scale > 0.0)) throw ConfigError("sigma scale must be positive");
  } else if (kind == "ood") {
    s.kind = SigmaSpec::Kind::ood;
    s.count = r.get<std::size_t>("count", s.count);
    s.delta = r.get<double>("delta", s.delta);
    if (s.count == 0) throw ConfigError("sigma count must be positive");
  } else {
    throw ConfigError("sigma kind must be identity, scaled or ood");
  }
  r.finish();
  return s;
}

}  // namespace

TrainRun parse_train(const RunSpec& spec) {
  FieldReader r(spec.config, "train config");
  consume_meta(r, "train");
  TrainRun run;
  run.run_id = spec.run_id;
  TrainConfig& c = run.cfg;
  c.d = r.get("d", c.d);
  c.n = r.get("n", c.n);
  c.k = r.get("k", c.k);
  c.eta = r.get("eta", c.eta);
  c.mode = parse_enum<TrainMode>("mode", r.get<std::string>("mode", "experiment"),
                                 {{"experiment", TrainMode::experiment}, {"theory", TrainMode::theory}});
  c.optimizer = parse_enum<OptimizerKind>(
      "optimizer", r.get<std::string>("optimizer", c.mode == TrainMode::theory ? "gradient_flow" : "adam"),
      {{"adam", OptimizerKind::adam}, {"gradient_flow", OptimizerKind::gradient_flow}});
  c.h = r.get("h", c.h);
  c.lr = r.get("lr", c.lr);
  c.beta1 = r.get("beta1", c.beta1);
  c.beta2 = r.get("beta2", c.beta2);
  c.eps = r.get("eps", c.eps);
  c.batch = r.get("batch", c.batch);
  c.antithetic = r.get("antithetic", c.mode == TrainMode::theory);
  c.iterations = r.get("iterations", c.iterations);
  c.seed = r.get<std::uint64_t>("seed", c.seed);
  c.log_every = r.get("log_every", c.log_every);
  c.init_scale = r.get("init_scale", c.init_scale);
  c.sigma = r.get("sigma", c.sigma);
  c.basis = parse_enum<InitBasis>("basis", r.get<std::string>("basis", "standard"),
                                  {{"standard", InitBasis::standard},
                                   {"random_orthogonal", InitBasis::random_orthogonal}});
  c.eval_every = r.get("eval_every", c.eval_every);
  c.eval_tasks = r.get("eval_tasks", c.eval_tasks);
  c.eval_k_prime = r.get("eval_k_prime", c.eval_k_prime);
  run.timing = r.get("timing", run.timing);
  run.checkpoints = r.get("checkpoints", run.checkpoints);
  r.finish();
  validate(c);
  return run;
}

EvalRun parse_eval(const RunSpec& spec) {
  FieldReader r(spec.config, "eval config");
  consume_meta(r, "eval");
  EvalRun run;
  run.run_id = spec.run_id;
  const json& ck = r.raw("checkpoint");
  if (ck.is_string()) {
    run.checkpoints.push_back(ck.get<std::string>());
  } else if (ck.is_array() && !ck.empty()) {
    for (const auto& p : ck) {
      if (!p.is_string()) throw ConfigError("checkpoint list must hold strings");
      run.checkpoints.push_back(p.get<std::string>());
    }
  } else {
    throw ConfigError("field \"checkpoint\" must be a path or a list of paths");
  }
  run.k_primes = r.has("k_prime") ? size_list(r.raw("k_prime"), "k_prime") : std::vector<std::size_t>{20};
  if (r.has("sigma")) {
    const json& s = r.raw("sigma");
    if (s.is_array()) {
      for (const auto& x : s) run.sigmas.push_back(parse_sigma(x));
    } else {
      run.sigmas.push_back(parse_sigma(s));
    }
  } else {
    run.sigmas.push_back(SigmaSpec{});
  }
  run.tasks = r.get("tasks", run.tasks);
  if (r.has("n")) run.n = r.get<std::size_t>("n", 0);
  if (r.has("eta")) run.eta = r.get<double>("eta", 0.0);
  run.seed = r.get<std::uint64_t>("seed", run.seed);
  run.timing = r.get("timing", run.timing);
  run.max_loss = r.get("max_loss", run.max_loss);
  run.output = r.get("output", run.output);
  r.finish();
  if (run.tasks < 2) throw ConfigError("tasks must be at least 2");
  return run;
}

ConstructRun parse_construct(const RunSpec& spec) {
  FieldReader r(spec.config, "construct config");
  consume_meta(r, "construct");
  ConstructRun run;
  run.run_id = spec.run_id;
  run.d = r.get("d", run.d);
  run.n = r.get("n", run.n);
  run.k = r.get("k", run.k);
  run.eta = r.get("eta", run.eta);
  run.optimal_eta = r.get("optimal_eta", run.optimal_eta);
  r.finish();
  if (run.d == 0 || run.n == 0) throw ConfigError("d and n must be positive");
  if (!(run.eta > 0.0)) throw ConfigError("eta must be positive");
  return run;
}

VerifyRun parse_verify(const RunSpec& spec) {
  FieldReader r(spec.config, "verify config");
  consume_meta(r, "verify");
  VerifyRun run;
  run.run_id = spec.run_id;
  const json& checks = r.raw("checks");
  if (!checks.is_array() || checks.empty()) throw ConfigError("field \"checks\" must be a non-empty list");
  for (const auto& c : checks) {
    if (!c.is_string()) throw ConfigError("check names must be strings");
    run.checks.push_back(c.get<std::string>());
  }
  if (r.has("params")) {
    run.params = r.raw("params");
    if (!run.params.is_object()) throw ConfigError("field \"params\" must be an object keyed by check name");
  }
  run.seed = r.get<std::uint64_t>("seed", run.seed);
  r.finish();
  return run;
}

LoopRun parse_loop(const RunSpec& spec) {
  FieldReader r(spec.config, "loop config");
  consume_meta(r, "loop");
  LoopRun run;
  run.run_id = spec.run_id;
  run.d = r.get("d", run.d);
  run.n = r.get("n", run.n);
  run.loops = r.get("loops", run.loops);
  run.h = r.get("h", run.h);
  run.steps = r.get("steps", run.steps);
  run.batch = r.get("batch", run.batch);
  run.eval_tasks = r.get("eval_tasks", run.eval_tasks);
  run.direct_tasks = r.get("direct_tasks", run.direct_tasks);
  run.log_every = r.get("log_every", run.log_every);
  run.a0_scale = r.get("a0_scale", run.a0_scale);
  run.seed = r.get<std::uint64_t>("seed", run.seed);
  run.separation = r.get("separation", run.separation);
  r.finish();
  if (run.d == 0 || run.n == 0) throw ConfigError("d and n must be positive");
  if (run.loops == 0) throw ConfigError("loops must be at least 1");
  if (!(run.h > 0.0)) throw ConfigError("h must be positive");
  if (run.batch < 2 || run.eval_tasks < 2) throw ConfigError("batch and eval_tasks must be at least 2");
  if (run.direct_tasks == 1) throw ConfigError("direct_tasks must be 0 or at least 2");
  if (run.log_every == 0) throw ConfigError("log_every must be positive");
  return run;
}

std::vector<RecipeEntry> list_recipes(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ConfigError("recipe directory " + dir + " not found");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<RecipeEntry> out;
  for (const auto& f : files) {
    const json j = load_json_file(f.string());
    if (!j.is_object() || !j.contains("claim") || !j.at("claim").is_string())
      throw ConfigError(f.string() + ": recipe has no \"claim\" string");
    out.push_back(RecipeEntry{f.filename().string(), j.value("command", std::string("?")),
                              j.at("claim").get<std::string>()});
  }
  return out;
}

}  // namespace cotlsa::cli
