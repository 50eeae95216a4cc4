#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

// The structured error report is the last line on stderr; warnings may precede it.
nlohmann::json error_report(const std::string& err) {
  const auto end = err.find_last_not_of('\n');
  const auto nl = err.rfind('\n', end);
  const auto start = nl == std::string::npos ? 0 : nl + 1;
  return nlohmann::json::parse(err.substr(start, end - start + 1));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("cotlsa_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Outcome run(const std::string& args) const {
    const fs::path o = dir_ / "stdout.txt", e = dir_ / "stderr.txt";
    const std::string cmd = std::string(COTLSA_BIN) + " " + args + " > " + o.string() + " 2> " + e.string();
    const int status = std::system(cmd.c_str());
    Outcome r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(o);
    r.err = slurp(e);
    return r;
  }

  fs::path write(const std::string& name, const std::string& text) const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  fs::path dir_;
};

const char* kTinyTrain = R"({"d": 2, "n": 5, "k": 2, "batch": 64, "iterations": 10, "log_every": 5, "seed": 1})";

}  // namespace

TEST_F(Cli, UnknownConfigFieldIsUsageError) {
  const fs::path cfg = write("bad.json", R"({"d": 2, "n": 5, "k": 2, "learning_rate": 0.1})");
  const Outcome r = run("train --config " + cfg.string() + " --out " + dir_.string());
  EXPECT_EQ(r.code, 2);
  const auto j = error_report(r.err);
  EXPECT_EQ(j.at("exit_code"), 2);
  EXPECT_NE(j.at("message").get<std::string>().find("learning_rate"), std::string::npos);
}

TEST_F(Cli, MalformedJsonIsUsageError) {
  const fs::path cfg = write("broken.json", "{\"d\": 2,, }");
  EXPECT_EQ(run("train --config " + cfg.string()).code, 2);
  const fs::path commented = write("comment.json", "{\"d\": 2 // no comments\n}");
  EXPECT_EQ(run("train --config " + commented.string()).code, 2);
}

TEST_F(Cli, MissingSubcommandOrFlagIsUsageError) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("train").code, 2);
  EXPECT_EQ(run("train --config x.json --format xml").code, 2);
}

TEST_F(Cli, ListsRecipesWithClaims) {
  const Outcome r = run(std::string("list --recipes --dir ") + COTLSA_RECIPES);
  ASSERT_EQ(r.code, 0) << r.err;
  for (const auto& e : fs::directory_iterator(COTLSA_RECIPES)) {
    if (e.path().extension() != ".json") continue;
    EXPECT_NE(r.out.find(e.path().filename().string()), std::string::npos) << e.path();
    const auto j = nlohmann::json::parse(slurp(e.path()));
    EXPECT_TRUE(j.at("claim").is_string());
    EXPECT_NE(r.out.find(j.at("claim").get<std::string>()), std::string::npos);
  }
}

TEST_F(Cli, RecipeWithoutClaimIsRejected) {
  fs::create_directories(dir_ / "recipes");
  std::ofstream(dir_ / "recipes" / "x.json") << R"({"command": "train"})";
  EXPECT_EQ(run("list --recipes --dir " + (dir_ / "recipes").string()).code, 2);
}

TEST_F(Cli, TrainOutputIsIndependentOfThreadCount) {
  const fs::path cfg = write("tiny.json", kTinyTrain);
  const Outcome a = run("train --config " + cfg.string() + " --threads 1 --out " + (dir_ / "a").string());
  const Outcome b = run("train --config " + cfg.string() + " --threads 3 --out " + (dir_ / "b").string());
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  const std::string ta = slurp(dir_ / "a" / "tiny.trajectory.csv");
  EXPECT_EQ(ta.rfind("# schema=1\nstep,", 0), 0u);
  EXPECT_EQ(ta, slurp(dir_ / "b" / "tiny.trajectory.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "a" / "tiny.final.lsa"));
  EXPECT_TRUE(fs::exists(dir_ / "a" / "tiny.step5.lsa"));
  const auto summary = nlohmann::json::parse(slurp(dir_ / "a" / "tiny.summary.json"));
  EXPECT_EQ(summary.at("iterations"), 10);
}

TEST_F(Cli, SeedFlagOverridesConfig) {
  const fs::path cfg = write("tiny.json", kTinyTrain);
  ASSERT_EQ(run("train --config " + cfg.string() + " --out " + (dir_ / "a").string()).code, 0);
  ASSERT_EQ(run("train --config " + cfg.string() + " --seed 2 --out " + (dir_ / "b").string()).code, 0);
  EXPECT_NE(slurp(dir_ / "a" / "tiny.trajectory.csv"), slurp(dir_ / "b" / "tiny.trajectory.csv"));
}

TEST_F(Cli, SweepExpandsIntoRuns) {
  const fs::path cfg = write("sw.json", R"({"d": 2, "n": 5, "k": 2, "batch": 16, "iterations": 2, "log_every": 1,
                                            "sweep": [{"k": 1}, {"k": 3, "run_id": "three"}]})");
  const Outcome r = run("train --config " + cfg.string() + " --out " + dir_.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "sw-0.trajectory.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "three.trajectory.csv"));
  const fs::path bad = write("bad.json", R"({"d": 2, "sweep": [{"command": "eval"}]})");
  EXPECT_EQ(run("train --config " + bad.string() + " --out " + dir_.string()).code, 2);
}

TEST_F(Cli, JsonFormatWritesTypedRows) {
  const fs::path cfg = write("tiny.json", kTinyTrain);
  ASSERT_EQ(run("train --config " + cfg.string() + " --format json --out " + dir_.string()).code, 0);
  const auto j = nlohmann::json::parse(slurp(dir_ / "tiny.trajectory.json"));
  EXPECT_EQ(j.at("schema"), 1);
  EXPECT_EQ(j.at("rows").size(), 3u);
  EXPECT_TRUE(j.at("rows")[0].at("cot_loss").is_number());
}

TEST_F(Cli, ConstructThenEvalAppends) {
  const Outcome c = run("construct --d 3 --n 20 --k 5 --eta 0.4 --out " + dir_.string());
  ASSERT_EQ(c.code, 0) << c.err;
  const fs::path ck = dir_ / "construct.lsa";
  ASSERT_TRUE(fs::exists(ck)) << c.out;
  const std::string args = "eval --checkpoint " + ck.string() + " --k-prime 0 3 --tasks 500 --out " + dir_.string();
  ASSERT_EQ(run(args).code, 0);
  ASSERT_EQ(run(args).code, 0);
  const std::string csv = slurp(dir_ / "eval.csv");
  EXPECT_EQ(csv.rfind("# schema=1\nrun_id,", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2 + 4);
}

TEST_F(Cli, EvalLossGateFailsRun) {
  ASSERT_EQ(run("construct --d 3 --n 20 --eta 0.4 --out " + dir_.string()).code, 0);
  const fs::path cfg = write("gate.json", R"({"checkpoint": ")" + (dir_ / "construct.lsa").string() +
                                               R"(", "k_prime": 0, "tasks": 200, "max_loss": 0.01})");
  EXPECT_EQ(run("eval --config " + cfg.string() + " --out " + dir_.string()).code, 1);
}

TEST_F(Cli, OverflowingRolloutIsDivergence) {
  ASSERT_EQ(run("construct --d 3 --n 20 --eta 0.4 --out " + dir_.string()).code, 0);
  const Outcome r = run("eval --checkpoint " + (dir_ / "construct.lsa").string() +
                        " --sigma scaled:50 --k-prime 400 --tasks 20 --out " + dir_.string());
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_NE(slurp(dir_ / "eval.csv").find(",inf,"), std::string::npos);
}

TEST_F(Cli, BadCheckpointIsUsageError) {
  const fs::path ck = write("junk.lsa", "not a checkpoint");
  EXPECT_EQ(run("eval --checkpoint " + ck.string() + " --out " + dir_.string()).code, 2);
  EXPECT_EQ(run("eval --checkpoint " + (dir_ / "missing.lsa").string() + " --out " + dir_.string()).code, 2);
  EXPECT_EQ(run("eval --checkpoint " + ck.string() + " --sigma ood:x --out " + dir_.string()).code, 2);
  EXPECT_FALSE(fs::exists(dir_ / "eval.csv"));
}

TEST_F(Cli, VerifyReportsVerdicts) {
  const Outcome ok = run("verify --checks star-entries,moments-control --format json");
  ASSERT_EQ(ok.code, 0) << ok.err;
  const auto j = nlohmann::json::parse(ok.out);
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[0].at("check"), "star-entries");
  EXPECT_EQ(j[0].at("pass"), true);
  EXPECT_EQ(run("verify --checks no-such-check").code, 2);
  const Outcome listed = run("verify --list");
  EXPECT_EQ(listed.code, 0);
  EXPECT_NE(listed.out.find("loop-equivalence"), std::string::npos);
}

TEST_F(Cli, FailingCheckExitsOne) {
  const fs::path cfg = write("v.json", R"({"checks": ["construction"], "params": {"construction": {"tol": -1}}})");
  EXPECT_EQ(run("verify --config " + cfg.string() + " --out " + dir_.string()).code, 1);
  EXPECT_TRUE(fs::exists(dir_ / "v.verify.json"));
}

TEST_F(Cli, DivergenceExitsThreeWithLastGood) {
  const fs::path cfg = write("boom.json", R"({"d": 2, "n": 5, "k": 2, "mode": "theory", "h": 1e8, "batch": 16,
                                              "iterations": 50, "log_every": 100})");
  const Outcome r = run("train --config " + cfg.string() + " --out " + dir_.string());
  EXPECT_EQ(r.code, 3) << r.err;
  const auto j = error_report(r.err);
  EXPECT_TRUE(j.contains("last_good_step"));
  EXPECT_TRUE(fs::exists(dir_ / "boom.last_good.lsa"));
}

TEST_F(Cli, LoopWritesTrajectory) {
  const fs::path cfg = write("lp.json", R"({"d": 2, "n": 32, "loops": 2, "steps": 20, "batch": 16, "eval_tasks": 64,
                                            "log_every": 10, "separation": true})");
  const Outcome r = run("loop --config " + cfg.string() + " --out " + dir_.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = slurp(dir_ / "lp.loop.csv");
  EXPECT_EQ(csv.rfind("# schema=1\nstep,loss_closed,loss_direct,stderr,op_norm_I_minus_A\n", 0), 0u);
  const auto s = nlohmann::json::parse(slurp(dir_ / "lp.loop_summary.json"));
  EXPECT_TRUE(s.contains("one_loop_final_loss"));
}
