#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "checks.hpp"
#include "cotlsa/checkpoint.hpp"
#include "cotlsa/csv.hpp"
#include "cotlsa/inference.hpp"
#include "cotlsa/looped_tf.hpp"
#include "cotlsa/task_data.hpp"
#include "cotlsa/theory_checks.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace cotlsa;
using namespace cotlsa::cli;

namespace {

enum ExitCode { kPass = 0, kCheckFailure = 1, kUsage = 2, kDiverged = 3 };

struct CommonFlags {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string format = "csv";
};

void add_common(CLI::App* cmd, CommonFlags& f, bool needs_config) {
  auto* c = cmd->add_option("--config", f.config, "JSON config file");
  if (needs_config) c->required();
  cmd->add_option("--out", f.out, "output directory")->capture_default_str();
  cmd->add_option("--seed", f.seed, "overrides the config seed");
  cmd->add_option("--threads", f.threads, "cap on worker threads (0 = runtime default)");
  cmd->add_option("--format", f.format, "table format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
}

void print_error(const std::string& kind, const std::string& message, int code, std::optional<long> step = {}) {
  nlohmann::json j{{"error", kind}, {"message", message}, {"exit_code", code}};
  if (step) j["last_good_step"] = *step;
  std::cerr << j.dump() << '\n';
}

// A table written as "# schema=1" CSV (streamed) or as one JSON document
// {schema, columns, rows} written on close. Numeric fields become JSON numbers
// and empty fields become null.
class TableSink {
 public:
  TableSink(const fs::path& stem, std::vector<std::string> columns, const std::string& format, bool append = false)
      : columns_(std::move(columns)), json_(format == "json") {
    path_ = stem;
    path_ += json_ ? ".json" : ".csv";
    if (json_) return;
    bool header = true;
    if (append && fs::exists(path_)) {
      std::ifstream in(path_);
      const CsvTable existing = read_csv(in);
      if (existing.header != columns_) throw ConfigError(path_.string() + " has a different column set");
      header = false;
    }
    file_.open(path_, append ? std::ios::app : std::ios::trunc);
    if (!file_) throw ConfigError("cannot write " + path_.string());
    csv_ = std::make_unique<CsvWriter>(file_, columns_, header);
  }

  ~TableSink() { close(); }

  void row(const std::vector<std::string>& fields) {
    if (csv_) {
      csv_->row(fields);
      file_.flush();
    } else {
      rows_.push_back(fields);
    }
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    if (!json_) return;
    nlohmann::json doc{{"schema", kCsvSchema}, {"columns", columns_}, {"rows", nlohmann::json::array()}};
    for (const auto& r : rows_) {
      nlohmann::json obj = nlohmann::json::object();
      for (std::size_t i = 0; i < r.size(); ++i) obj[columns_[i]] = typed(r[i]);
      doc["rows"].push_back(obj);
    }
    std::ofstream out(path_);
    out << doc.dump(1) << '\n';
  }

  const fs::path& path() const { return path_; }

 private:
  static nlohmann::json typed(const std::string& s) {
    if (s.empty()) return nullptr;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && ptr == s.data() + s.size()) return v;
    return s;
  }

  fs::path path_;
  std::vector<std::string> columns_;
  bool json_;
  std::ofstream file_;
  std::unique_ptr<CsvWriter> csv_;
  std::vector<std::vector<std::string>> rows_;
  bool closed_ = false;
};

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json pattern_json(const PatternResidual& p) {
  return {{"off_pattern_mass", p.off_pattern_mass}, {"product_error", p.product_error}, {"scale_error", p.scale_error}};
}

std::vector<RunSpec> load_runs(const CommonFlags& f, const std::string& default_id) {
  return expand_sweep(load_json_file(f.config), default_id);
}

CheckpointMeta meta_for(const TrainConfig& c, long step) {
  return CheckpointMeta{c.d, c.n, c.eta, c.k, c.seed, step};
}

int cmd_train(const CommonFlags& f) {
  const fs::path out(f.out);
  fs::create_directories(out);
  for (const RunSpec& spec : load_runs(f, fs::path(f.config).stem().string())) {
    TrainRun run = parse_train(spec);
    if (f.seed) run.cfg.seed = *f.seed;
    TrainConfig& cfg = run.cfg;
    check_eta(cfg.eta);

    TableSink table(out / (run.run_id + ".trajectory"), trajectory_csv_columns(), f.format);
    TrainHooks hooks;
    hooks.on_log = [&](const TrajectoryRecord& rec, const LsaParams& params) {
      table.row(trajectory_csv_fields(rec, run.timing));
      if (run.checkpoints)
        write_checkpoint((out / (run.run_id + ".step" + std::to_string(rec.step) + ".lsa")).string(), params,
                         meta_for(cfg, static_cast<long>(rec.step)));
    };
    hooks.on_diverged = [&](const LsaParams& params, std::size_t step) {
      write_checkpoint((out / (run.run_id + ".last_good.lsa")).string(), params,
                       meta_for(cfg, static_cast<long>(step)));
    };
    const TrainResult res = train(cfg, make_init(cfg), hooks);
    table.close();

    const TrajectoryRecord& last = res.records.back();
    write_checkpoint((out / (run.run_id + ".final.lsa")).string(), res.params,
                     meta_for(cfg, static_cast<long>(cfg.iterations)));
    nlohmann::json summary{{"run_id", run.run_id},
                           {"iterations", cfg.iterations},
                           {"final_cot_loss", last.cot_loss},
                           {"final_cot_loss_stderr", last.cot_loss_stderr},
                           {"final_eval_loss", nullptr},
                           {"final_eval_loss_stderr", nullptr},
                           {"pattern_residual", pattern_json(last.pattern)},
                           {"max_zero_block_ratio", res.max_zero_block_ratio}};
    if (last.eval_loss >= 0.0) {
      summary["final_eval_loss"] = last.eval_loss;
      summary["final_eval_loss_stderr"] = last.eval_loss_stderr;
      summary["eval_k_prime"] = cfg.eval_k_prime > 0 ? cfg.eval_k_prime : cfg.k;
    }
    write_json(out / (run.run_id + ".summary.json"), summary);
    std::cout << run.run_id << ": cot_loss " << last.cot_loss;
    if (last.eval_loss >= 0.0) std::cout << ", eval_loss " << last.eval_loss;
    std::cout << ", off_pattern_mass " << last.pattern.off_pattern_mass << ", product_error "
              << last.pattern.product_error << ", scale_error " << last.pattern.scale_error << '\n';
  }
  return kPass;
}

struct EvalFlags {
  std::vector<std::string> checkpoints;
  std::vector<std::size_t> k_primes;
  std::string sigma = "identity";
  std::size_t tasks = 10000;
};

SigmaSpec parse_sigma_flag(const std::string& s) {
  SigmaSpec spec;
  if (s == "identity") return spec;
  std::vector<std::string> parts;
  std::stringstream ss(s);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  try {
    if (parts.size() == 2 && parts[0] == "scaled") {
      spec.kind = SigmaSpec::Kind::scaled;
      spec.scale = std::stod(parts[1]);
      if (spec.scale > 0.0) return spec;
    } else if (parts.size() == 3 && parts[0] == "ood") {
      spec.kind = SigmaSpec::Kind::ood;
      spec.count = std::stoul(parts[1]);
      spec.delta = std::stod(parts[2]);
      if (spec.count > 0) return spec;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("--sigma must be identity, scaled:<c> or ood:<count>:<delta>");
}

int run_eval(const EvalRun& run, const CommonFlags& f) {
  for (const std::string& ck : run.checkpoints) read_checkpoint(ck);
  const fs::path out(f.out);
  fs::create_directories(out);
  TableSink table(out / run.output, eval_csv_columns(), f.format, true);
  bool ok = true;
  bool diverged = false;
  for (const std::string& ck : run.checkpoints) {
    CheckpointMeta meta;
    const LsaParams params = read_checkpoint(ck, &meta);
    const std::size_t n = run.n.value_or(meta.n);
    const double eta = run.eta.value_or(meta.eta);
    if (n == 0) throw ConfigError(ck + ": n is unknown (no sidecar); set \"n\" in the config");
    const std::string row_id = run.run_id + "/" + fs::path(ck).stem().string();

    struct Sigma {
      std::string id;
      std::optional<Matrix> cov;
      double delta;
    };
    std::vector<Sigma> sigmas;
    for (const SigmaSpec& s : run.sigmas) {
      if (s.kind == SigmaSpec::Kind::identity) {
        sigmas.push_back({"identity", std::nullopt, 0.0});
      } else if (s.kind == SigmaSpec::Kind::scaled) {
        sigmas.push_back({"scaled-" + format_number(s.scale), scale(Matrix::identity(params.d), s.scale), 0.0});
      } else {
        if (!(eta > 0.0)) throw ConfigError(ck + ": eta is unknown (no sidecar); set \"eta\" in the config");
        const RngStream cov_rng(derive_seed(run.seed, 1));
        for (std::size_t i = 0; i < s.count; ++i) {
          RngStream local = cov_rng.split(i);
          sigmas.push_back({"ood-" + format_number(s.delta) + "-" + std::to_string(i),
                            sample_ood_covariance(local, params.d, eta, s.delta), s.delta});
        }
      }
    }

    const RngStream task_rng(derive_seed(run.seed, 2));
    for (const Sigma& sg : sigmas)
      for (std::size_t kp : run.k_primes) {
        const auto t0 = std::chrono::steady_clock::now();
        const McEstimate est =
            sg.cov ? eval_loss_ood_mc(params, *sg.cov, n, kp, run.tasks, task_rng, eta, sg.delta)
                   : eval_loss_mc(params, n, kp, run.tasks, task_rng);
        EvalRow row;
        row.run_id = row_id;
        row.d = params.d;
        row.n = n;
        row.k_train = meta.k;
        row.k_prime = kp;
        row.eta = eta;
        row.sigma_id = sg.id;
        row.n_tasks = run.tasks;
        row.loss_mean = est.mean;
        row.loss_stderr = est.std_error;
        if (run.timing)
          row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        table.row(eval_csv_fields(row));
        std::cout << row_id << " k'=" << kp << " sigma=" << sg.id << ": " << est.mean << " ± " << est.std_error;
        if (!std::isfinite(est.mean)) {
          diverged = true;
          std::cout << "  (diverged)";
        } else if (run.max_loss >= 0.0 && est.mean > run.max_loss) {
          ok = false;
          std::cout << "  (above " << run.max_loss << ")";
        }
        std::cout << '\n';
      }
  }
  if (diverged) return kDiverged;
  return ok ? kPass : kCheckFailure;
}

int cmd_eval(const CommonFlags& f, const EvalFlags& ef) {
  std::vector<EvalRun> runs;
  if (!f.config.empty()) {
    if (!ef.checkpoints.empty()) throw ConfigError("use either --config or --checkpoint, not both");
    for (const RunSpec& spec : load_runs(f, fs::path(f.config).stem().string())) runs.push_back(parse_eval(spec));
  } else {
    if (ef.checkpoints.empty()) throw ConfigError("eval needs --config or --checkpoint");
    EvalRun run;
    run.run_id = "eval";
    run.checkpoints = ef.checkpoints;
    run.k_primes = ef.k_primes.empty() ? std::vector<std::size_t>{20} : ef.k_primes;
    run.sigmas = {parse_sigma_flag(ef.sigma)};
    run.tasks = ef.tasks;
    if (run.tasks < 2) throw ConfigError("--tasks must be at least 2");
    runs.push_back(run);
  }
  int code = kPass;
  for (EvalRun& run : runs) {
    if (f.seed) run.seed = *f.seed;
    code = std::max(code, run_eval(run, f));
  }
  return code;
}

struct ConstructFlags {
  std::optional<std::size_t> d, n, k;
  std::optional<double> eta;
  bool optimal_eta = false;
};

int cmd_construct(const CommonFlags& f, const ConstructFlags& cf) {
  std::vector<ConstructRun> runs;
  if (!f.config.empty()) {
    for (const RunSpec& spec : load_runs(f, fs::path(f.config).stem().string())) runs.push_back(parse_construct(spec));
  } else {
    runs.push_back(parse_construct(RunSpec{"construct", nlohmann::json::object()}));
  }
  const fs::path out(f.out);
  fs::create_directories(out);
  for (ConstructRun& run : runs) {
    if (cf.d) run.d = *cf.d;
    if (cf.n) run.n = *cf.n;
    if (cf.k) run.k = *cf.k;
    if (cf.eta) run.eta = *cf.eta;
    if (cf.optimal_eta) run.optimal_eta = true;
    const double eta = run.optimal_eta ? one_step_optimum_eta(run.n, run.d) : run.eta;
    check_eta(eta);
    const fs::path path = out / (run.run_id + ".lsa");
    write_checkpoint(path.string(), construct_multistep(run.d, eta),
                     CheckpointMeta{run.d, run.n, eta, run.k, f.seed.value_or(0), 0});
    std::cout << path.string() << '\n';
  }
  return kPass;
}

int cmd_verify(const CommonFlags& f, const std::string& checks_flag, bool list_only) {
  if (list_only) {
    for (const auto& c : check_registry()) std::cout << std::left << std::setw(20) << c.name << c.summary << '\n';
    return kPass;
  }
  VerifyRun run;
  if (!f.config.empty()) {
    const auto specs = load_runs(f, fs::path(f.config).stem().string());
    if (specs.size() != 1) throw ConfigError("verify configs cannot be swept");
    run = parse_verify(specs.front());
  } else {
    if (checks_flag.empty()) throw ConfigError("verify needs --config or --checks");
    run.run_id = "verify";
    std::stringstream ss(checks_flag);
    for (std::string c; std::getline(ss, c, ',');)
      if (!c.empty()) run.checks.push_back(c);
  }
  if (f.seed) run.seed = *f.seed;
  for (const auto& name : run.checks) find_check(name);

  nlohmann::json verdicts = nlohmann::json::array();
  bool all = true;
  for (std::size_t i = 0; i < run.checks.size(); ++i) {
    const CheckInfo& c = find_check(run.checks[i]);
    const nlohmann::json params = run.params.value(c.name, nlohmann::json::object());
    const Verdict v = c.run(params, derive_seed(run.seed, i));
    all = all && v.pass;
    verdicts.push_back(v.to_json());
    if (f.format == "csv") {
      std::cout << std::left << std::setw(20) << v.check << (v.pass ? "pass" : "FAIL") << "  bound "
                << v.bound << "  stderr " << v.stderr_value << "  " << v.estimate_summary.dump() << '\n';
    }
  }
  if (f.format == "json") std::cout << verdicts.dump(2) << '\n';
  if (f.out != ".") {
    fs::create_directories(f.out);
    write_json(fs::path(f.out) / (run.run_id + ".verify.json"), verdicts);
  }
  return all ? kPass : kCheckFailure;
}

int cmd_loop(const CommonFlags& f) {
  const fs::path out(f.out);
  fs::create_directories(out);
  for (const RunSpec& spec : load_runs(f, fs::path(f.config).stem().string())) {
    LoopRun run = parse_loop(spec);
    if (f.seed) run.seed = *f.seed;
    LoopFlowConfig cfg;
    cfg.d = run.d;
    cfg.n = run.n;
    cfg.loops = run.loops;
    cfg.h = run.h;
    cfg.steps = run.steps;
    cfg.batch = run.batch;
    cfg.eval_tasks = run.eval_tasks;
    cfg.direct_tasks = run.direct_tasks;
    cfg.log_every = run.log_every;
    const Matrix a0 = scale(Matrix::identity(run.d), run.a0_scale);
    const RngStream rng(derive_seed(run.seed, 3));

    const LoopTrajectory tr = loop_gradient_flow(a0, cfg, rng);
    TableSink table(out / (run.run_id + ".loop"), loop_csv_columns(), f.format);
    std::size_t bound_violations = 0;
    const double dd = static_cast<double>(run.d);
    for (const LoopRecord& r : tr.records) {
      table.row(loop_csv_fields(r));
      if (r.loss_closed > 4.0 * dd * std::pow(r.op_norm_i_minus_a, 2.0 * static_cast<double>(run.loops)))
        ++bound_violations;
    }
    table.close();
    const LoopRecord& last = tr.records.back();
    nlohmann::json summary{{"run_id", run.run_id},
                           {"loops", run.loops},
                           {"final_loss_closed", last.loss_closed},
                           {"final_loss_stderr", last.stderr_closed},
                           {"final_op_norm_I_minus_A", last.op_norm_i_minus_a},
                           {"norm_bound_violations", bound_violations}};
    if (run.separation) {
      LoopFlowConfig one = cfg;
      one.loops = 1;
      one.direct_tasks = 0;
      const LoopTrajectory t1 = loop_gradient_flow(a0, one, rng);
      summary["one_loop_final_loss"] = t1.records.back().loss_closed;
      summary["one_loop_final_stderr"] = t1.records.back().stderr_closed;
    }
    write_json(out / (run.run_id + ".loop_summary.json"), summary);
    std::cout << run.run_id << ": loss_closed " << last.loss_closed << ", ‖I−A‖_op " << last.op_norm_i_minus_a;
    if (run.separation) std::cout << ", one-loop loss " << summary["one_loop_final_loss"].get<double>();
    std::cout << '\n';
  }
  return kPass;
}

int cmd_list(bool recipes, bool checks, const std::string& dir) {
  if (!recipes && !checks) throw ConfigError("list needs --recipes or --checks");
  if (recipes) {
    const auto entries = list_recipes(dir);
    std::size_t width = 0;
    for (const RecipeEntry& e : entries) width = std::max(width, e.file.size());
    for (const RecipeEntry& e : entries)
      std::cout << std::left << std::setw(static_cast<int>(width + 2)) << e.file << std::setw(11) << e.command
                << e.claim << '\n';
  }
  if (checks)
    for (const auto& c : check_registry()) std::cout << std::left << std::setw(20) << c.name << c.summary << '\n';
  return kPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chain-of-thought linear self-attention laboratory"};
  app.require_subcommand(1);

  CommonFlags train_f, eval_f, construct_f, verify_f, loop_f;
  auto* train_cmd = app.add_subcommand("train", "train an LSA model from a config");
  add_common(train_cmd, train_f, true);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate checkpoints with CoT rollouts");
  add_common(eval_cmd, eval_f, false);
  EvalFlags ef;
  eval_cmd->add_option("--checkpoint", ef.checkpoints, "checkpoint file(s)");
  eval_cmd->add_option("--k-prime", ef.k_primes, "rollout length(s)");
  eval_cmd->add_option("--sigma", ef.sigma, "identity | scaled:<c> | ood:<count>:<delta>")->capture_default_str();
  eval_cmd->add_option("--tasks", ef.tasks, "Monte-Carlo tasks per row")->capture_default_str();

  auto* construct_cmd = app.add_subcommand("construct", "write the multi-step GD construction checkpoint");
  add_common(construct_cmd, construct_f, false);
  ConstructFlags cf;
  construct_cmd->add_option("--d", cf.d, "data dimension");
  construct_cmd->add_option("--n", cf.n, "examples per prompt (metadata)");
  construct_cmd->add_option("--k", cf.k, "CoT steps (metadata)");
  construct_cmd->add_option("--eta", cf.eta, "learning rate");
  construct_cmd->add_flag("--optimal-eta", cf.optimal_eta, "use n/(n+d+1)");

  auto* verify_cmd = app.add_subcommand("verify", "run numerical checks and print verdicts");
  add_common(verify_cmd, verify_f, false);
  std::string checks_flag;
  bool verify_list = false;
  verify_cmd->add_option("--checks", checks_flag, "comma-separated check names");
  verify_cmd->add_flag("--list", verify_list, "list available checks");

  auto* loop_cmd = app.add_subcommand("loop", "looped-transformer gradient flow");
  add_common(loop_cmd, loop_f, true);

  auto* list_cmd = app.add_subcommand("list", "list recipes or checks");
  bool list_recipes_flag = false, list_checks_flag = false;
  std::string recipe_dir = "recipes";
  list_cmd->add_flag("--recipes", list_recipes_flag, "print recipe file, command and claim");
  list_cmd->add_flag("--checks", list_checks_flag, "print check names");
  list_cmd->add_option("--dir", recipe_dir, "recipe directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("UsageError", e.what(), kUsage);
    return kUsage;
  }

  try {
    const CommonFlags* active = nullptr;
    for (const auto& [cmd, flags] : std::initializer_list<std::pair<CLI::App*, CommonFlags*>>{
             {train_cmd, &train_f}, {eval_cmd, &eval_f}, {construct_cmd, &construct_f},
             {verify_cmd, &verify_f}, {loop_cmd, &loop_f}})
      if (cmd->parsed()) active = flags;
    if (active) set_thread_count(active->threads);

    if (train_cmd->parsed()) return cmd_train(train_f);
    if (eval_cmd->parsed()) return cmd_eval(eval_f, ef);
    if (construct_cmd->parsed()) return cmd_construct(construct_f, cf);
    if (verify_cmd->parsed()) return cmd_verify(verify_f, checks_flag, verify_list);
    if (loop_cmd->parsed()) return cmd_loop(loop_f);
    if (list_cmd->parsed()) return cmd_list(list_recipes_flag, list_checks_flag, recipe_dir);
  } catch (const Diverged& e) {
    print_error("Diverged", e.what(), kDiverged, e.last_good_step());
    return kDiverged;
  } catch (const ConfigError& e) {
    print_error("ConfigError", e.what(), kUsage);
    return kUsage;
  } catch (const BadCheckpoint& e) {
    print_error("BadCheckpoint", e.what(), kUsage);
    return kUsage;
  } catch (const BadSigma& e) {
    print_error("BadSigma", e.what(), kUsage);
    return kUsage;
  } catch (const NotSPD& e) {
    print_error("NotSPD", e.what(), kUsage);
    return kUsage;
  } catch (const Error& e) {
    print_error("Error", e.what(), kCheckFailure);
    return kCheckFailure;
  } catch (const std::exception& e) {
    print_error("InternalError", e.what(), kCheckFailure);
    return kCheckFailure;
  }
  return kUsage;
}
