#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mtd/checkpoint.hpp"
#include "mtd/cli/commands.hpp"
#include "mtd/cli/run_config.hpp"
#include "mtd/synth.hpp"

using namespace mtd;
using namespace mtd::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

// A scratch directory holding a small generated dataset.
struct Workspace {
  fs::path root;
  fs::path dataset;

  explicit Workspace(const std::string& name, std::size_t n = 10) {
    root = fs::temp_directory_path() / ("mtd_cli_test_" + name);
    fs::remove_all(root);
    fs::create_directories(root);
    dataset = root / "data";
    spit(root / "gen.json", R"({"n_sequences": )" + std::to_string(n) + "}");
    std::ostringstream out, log;
    GenerateArgs g;
    g.config = (root / "gen.json").string();
    g.seed = 3;
    g.out = dataset.string();
    REQUIRE(cmd_generate(g, out, log) == kExitOk);
  }
  ~Workspace() { fs::remove_all(root); }

  fs::path run_config(const std::string& name, const std::string& extra = "") const {
    const auto p = root / (name + ".json");
    spit(p, R"({"dataset": ")" + dataset.string() + R"(", "hidden_dim": 8, "heads": 2, "epochs": 1)" + extra + "}");
    return p;
  }
};

int train(const Workspace& w, const fs::path& config, const fs::path& out) {
  std::ostringstream o, l;
  TrainArgs t;
  t.config = config.string();
  t.out = out.string();
  return cmd_train(t, o, l);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("generate") {
  Workspace w("generate", 6);
  CHECK(fs::exists(w.dataset / "manifest.json"));
  const auto manifest = read_manifest(w.dataset);
  CHECK(manifest.config.n_sequences == 6);

  SUBCASE("same seed gives the same manifest") {
    std::ostringstream out, log;
    GenerateArgs g;
    g.config = (w.root / "gen.json").string();
    g.seed = 3;
    g.out = (w.root / "again").string();
    REQUIRE(cmd_generate(g, out, log) == kExitOk);
    CHECK(slurp(w.root / "again" / "manifest.json") == slurp(w.dataset / "manifest.json"));
  }
  SUBCASE("missing required field") {
    spit(w.root / "bad.json", R"({"feature_dim": 16})");
    std::ostringstream out, log;
    GenerateArgs g;
    g.config = (w.root / "bad.json").string();
    g.out = (w.root / "bad").string();
    CHECK(cmd_generate(g, out, log) == kExitUsage);
    CHECK(log.str().find("n_sequences") != std::string::npos);
  }
  SUBCASE("unreadable config") {
    std::ostringstream out, log;
    GenerateArgs g;
    g.config = (w.root / "nope.json").string();
    g.out = (w.root / "x").string();
    CHECK(cmd_generate(g, out, log) == kExitUsage);
  }
}

TEST_CASE("train writes its outputs and is reproducible") {
  Workspace w("train");
  REQUIRE(train(w, w.run_config("run"), w.root / "a") == kExitOk);
  REQUIRE(train(w, w.run_config("run"), w.root / "b") == kExitOk);
  for (const char* f : {"config.json", "checkpoint.json", "checkpoint.bin", "metrics.csv"}) CHECK(fs::exists(w.root / "a" / f));
  const std::string csv = slurp(w.root / "a" / "metrics.csv");
  CHECK(csv.rfind("epoch,split,relation,f1,ap,auc,loss\n", 0) == 0);
  std::size_t rows = 0;
  for (char ch : csv) rows += ch == '\n';
  CHECK(rows == 1 + 2 * 3);  // header, train and val rows for 2 relations plus __all__
  CHECK(csv == slurp(w.root / "b" / "metrics.csv"));
  CHECK(slurp(w.root / "a" / "checkpoint.bin") == slurp(w.root / "b" / "checkpoint.bin"));
  const auto cfg = run_config_from_json(slurp(w.root / "a" / "config.json"));
  CHECK(cfg.hidden_dim == 8);
  CHECK(cfg.out == (w.root / "a").string());
}

TEST_CASE("train rejects relations missing from the dataset") {
  Workspace w("train_bad");
  const auto cfg = w.run_config("bad", R"(, "method": "single-task:contacting")");
  CHECK(train(w, cfg, w.root / "x") == kExitUsage);
  spit(w.root / "bad2.json", R"({"dataset": ")" + w.dataset.string() +
                                 R"(", "relations": [{"name": "spatial"}], "method": "multi-task"})");
  CHECK(train(w, w.root / "bad2.json", w.root / "y") == kExitUsage);
}

TEST_CASE("eval") {
  Workspace w("eval");
  REQUIRE(train(w, w.run_config("run"), w.root / "run") == kExitOk);
  std::ostringstream out, log;
  EvalArgs e;
  e.checkpoint = (w.root / "run" / "checkpoint.json").string();
  e.dataset = w.dataset.string();
  e.split = "test";
  REQUIRE(cmd_eval(e, out, log) == kExitOk);
  CHECK(out.str().rfind("relation,f1,ap,auc,loss,n_pairs,n_masked\n", 0) == 0);

  SUBCASE("a run directory works as the checkpoint") {
    std::ostringstream o2, l2;
    e.checkpoint = (w.root / "run").string();
    CHECK(cmd_eval(e, o2, l2) == kExitOk);
    CHECK(o2.str() == out.str());
  }
  SUBCASE("threshold out of range") {
    std::ostringstream o2, l2;
    e.threshold = 1.0;
    CHECK(cmd_eval(e, o2, l2) == kExitUsage);
  }
  SUBCASE("unknown split") {
    std::ostringstream o2, l2;
    e.split = "holdout";
    CHECK(cmd_eval(e, o2, l2) == kExitUsage);
  }
  SUBCASE("empty split") {
    Workspace tiny("eval_tiny", 2);
    REQUIRE(read_manifest(tiny.dataset).splits.at("val").empty());
    std::ostringstream o2, l2;
    e.dataset = tiny.dataset.string();
    e.split = "val";
    CHECK(cmd_eval(e, o2, l2) == kExitUsage);
  }
  SUBCASE("feature width mismatch") {
    spit(w.root / "wide.json", R"({"n_sequences": 4, "feature_dim": 16})");
    std::ostringstream o2, l2;
    GenerateArgs g;
    g.config = (w.root / "wide.json").string();
    g.out = (w.root / "wide").string();
    REQUIRE(cmd_generate(g, o2, l2) == kExitOk);
    e.dataset = (w.root / "wide").string();
    CHECK(cmd_eval(e, o2, l2) == kExitUsage);
  }
  SUBCASE("missing checkpoint") {
    std::ostringstream o2, l2;
    e.checkpoint = (w.root / "none.json").string();
    CHECK(cmd_eval(e, o2, l2) == kExitUsage);
  }
}

TEST_CASE("ablate with one-value axes equals train plus eval") {
  Workspace w("ablate");
  const std::string base = R"({"dataset": ")" + w.dataset.string() + R"(", "epochs": 1, "seed": 4, "heads": 2})";
  spit(w.root / "sweep.json", R"({"base": )" + base + R"(, "axes": {"hidden_dim": [8]}})");
  std::ostringstream out, log;
  AblateArgs a;
  a.config = (w.root / "sweep.json").string();
  a.out = (w.root / "sweep").string();
  REQUIRE(cmd_ablate(a, out, log) == kExitOk);
  const std::string csv = slurp(w.root / "sweep" / "ablation.csv");
  std::size_t rows = 0;
  for (char ch : csv) rows += ch == '\n';

  spit(w.root / "single.json", R"({"dataset": ")" + w.dataset.string() + R"(", "epochs": 1, "seed": 4, "hidden_dim": 8, "heads": 2})");
  REQUIRE(train(w, w.root / "single.json", w.root / "single") == kExitOk);
  std::ostringstream ev, l2;
  EvalArgs e;
  e.checkpoint = (w.root / "single").string();
  e.dataset = w.dataset.string();
  REQUIRE(cmd_eval(e, ev, l2) == kExitOk);
  // the collision row of eval carries the same f1,ap,auc,loss as the sweep
  std::istringstream lines(ev.str());
  std::string line, collision;
  std::size_t relations = 0;
  while (std::getline(lines, line)) {
    if (line.rfind("collision,", 0) == 0) collision = line.substr(10);
    relations += line.rfind("relation,", 0) != 0 && line.rfind("__all__,", 0) != 0;
  }
  CHECK(rows == 1 + 2 * relations);  // base cell plus the hidden_dim cell
  collision = collision.substr(0, collision.rfind(',', collision.rfind(',') - 1));
  CHECK(csv.find("\n1,hidden_dim,mtd-gnn,8,2,") != std::string::npos);
  CHECK(csv.find(",collision," + collision + ",ok,") != std::string::npos);
}

TEST_CASE("ablate records failing cells and continues") {
  Workspace w("ablate_fail");
  // two padding slots are too few for the baseline on this data
  const std::string base = R"({"dataset": ")" + w.dataset.string() + R"(", "epochs": 1, "hidden_dim": 4, "heads": 1, "max_nodes": 2})";
  spit(w.root / "sweep.json", R"({"base": )" + base + R"(, "axes": {"model": ["mtd-gnn", "baseline-rnn"]}})");
  REQUIRE(expand_sweep(sweep_spec_from_json(slurp(w.root / "sweep.json"))).size() == 2);
  std::ostringstream out, log;
  AblateArgs a;
  a.config = (w.root / "sweep.json").string();
  a.out = (w.root / "sweep").string();
  CHECK(cmd_ablate(a, out, log) == kExitFailure);
  const std::string csv = slurp(w.root / "sweep" / "ablation.csv");
  CHECK(csv.find(",baseline-rnn,") != std::string::npos);
  CHECK(csv.find(",failed,") != std::string::npos);
  std::size_t rows = 0, ok = 0;
  for (std::size_t pos = 0; (pos = csv.find('\n', pos)) != std::string::npos; ++pos) ++rows;
  for (std::size_t pos = 0; (pos = csv.find(",ok,", pos)) != std::string::npos; ++pos) ++ok;
  CHECK(rows == 1 + 2 + 1);
  CHECK(ok == 2);
}

TEST_CASE("verify") {
  std::ostringstream a, la, b, lb;
  CHECK(cmd_verify(VerifyArgs{}, a, la) == kExitOk);
  CHECK(cmd_verify(VerifyArgs{}, b, lb) == kExitOk);
  CHECK(a.str() == b.str());
  std::ostringstream m, lm;
  VerifyArgs v;
  v.mutate = "matmul";
  CHECK(cmd_verify(v, m, lm) == kExitFailure);
  CHECK(lm.str().find("first failure") != std::string::npos);
  std::ostringstream u, lu;
  v.mutate = "frobnicate";
  CHECK(cmd_verify(v, u, lu) == kExitUsage);
  CHECK_FALSE(debug::injected_sign_fault().has_value());
}

TEST_CASE("run config json") {
  RunConfig c;
  c.dataset = "d";
  c.method = "single-task:collision";
  c.hidden_dim = 512;
  c.lr_schedule = LrSchedule::constant;
  CHECK(run_config_from_json(run_config_to_json(c)) == c);
  CHECK_THROWS_WITH_AS(run_config_from_json(R"({"hiden_dim": 3})"), doctest::Contains("hiden_dim"), ConfigError);
  CHECK_THROWS_WITH_AS(run_config_from_json(R"({"heads": 0})"), doctest::Contains("heads"), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(R"({"method": "both"})"), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(R"({"model": "lstm"})"), ConfigError);
}

TEST_CASE("profiles") {
  RunConfig c;
  GeneratorConfig g;
  apply_profile(find_profile("ci"), c);
  CHECK(c.epochs == 5);
  apply_profile(find_profile("smoke"), g);
  CHECK(g.n_sequences == 20);
  apply_profile(find_profile("benchmark"), c);
  CHECK(c.epochs == 100);
  CHECK_THROWS_AS(find_profile("turbo"), ConfigError);
}

TEST_CASE("sweep expansion") {
  SweepSpec s;
  s.hidden_dim = {256, 512, 1024};
  s.heads = {3, 5, 7, 9};
  s.layers = {1, 2, 3};
  s.method = {"single-task:collision", "multi-task"};
  // per-axis: base cell plus the non-base values of each axis
  CHECK(expand_sweep(s).size() == 1 + 2 + 3 + 2 + 1);
  s.mode = SweepSpec::Mode::cross;
  CHECK(expand_sweep(s).size() == 3 * 4 * 3 * 2);
  SweepSpec one;
  one.hidden_dim = {256};
  CHECK(expand_sweep(one).size() == 1);
}

TEST_CASE("default benchmark: training loss at epoch 10 is below epoch 1") {
  const fs::path root = fs::temp_directory_path() / "mtd_cli_benchmark_loss";
  fs::remove_all(root);
  generate_dataset(GeneratorConfig{}, 0, root / "data");
  RunConfig c;
  c.dataset = (root / "data").string();
  c.method = std::string("single-task:") + kCollision;
  c.epochs = 10;
  c.out = (root / "run").string();
  std::ostringstream log;
  const auto o = run_training(c, log);
  REQUIRE(o.result.history.size() == 10);
  CHECK(o.result.history[9].train.loss < o.result.history[0].train.loss);
  fs::remove_all(root);
}

}  // TEST_SUITE
