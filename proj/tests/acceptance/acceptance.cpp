// Acceptance run: one PASS/FAIL line per criterion, exit 0 iff all pass.
//
//   mtd_acceptance [--work DIR] [--seed N]
//
// Criteria 1-5 run the property suite. Criteria 6-8 generate the default
// 500-sequence benchmark, train single-task, multi-task and the padded
// recurrent baseline with the ci profile, and compare test-split collision
// metrics. Criterion 9 checks byte-identical generation and training and
// bit-exact checkpoint round trips.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mtd/checkpoint.hpp"
#include "mtd/cli/commands.hpp"
#include "mtd/cli/run_config.hpp"
#include "mtd/synth.hpp"
#include "mtd/verify/suite.hpp"

using namespace mtd;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Line {
  int criterion;
  std::string name;
  bool passed;
  std::string detail;
};

std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
  std::map<std::string, std::string> fa, fb;
  for (const auto& e : fs::directory_iterator(a))
    if (e.is_regular_file()) fa[e.path().filename().string()] = slurp(e.path());
  for (const auto& e : fs::directory_iterator(b))
    if (e.is_regular_file()) fb[e.path().filename().string()] = slurp(e.path());
  if (fa.size() != fb.size()) {
    why = "file counts differ";
    return false;
  }
  for (const auto& [name, body] : fa) {
    auto it = fb.find(name);
    if (it == fb.end() || it->second != body) {
      why = name + " differs";
      return false;
    }
  }
  return true;
}

struct RunMetrics {
  double f1 = 0, ap = 0, auc = 0;
  double seconds = 0;
  std::size_t epochs = 0;
};

RunMetrics train_and_test(const fs::path& dataset, const fs::path& out, const std::string& method, ModelKind model,
                          std::uint64_t seed, std::ostream& log) {
  cli::RunConfig c;
  c.dataset = dataset.string();
  c.method = method;
  c.model = model;
  c.seed = seed;
  c.out = out.string();
  cli::apply_profile(cli::find_profile("ci"), c);
  const auto t0 = Clock::now();
  const auto o = cli::run_training(c, log);
  const auto ev = cli::evaluate_split(o.result.best, c.dataset, "test", c.threshold);
  RunMetrics m;
  m.seconds = since(t0);
  m.epochs = c.epochs;
  const auto* r = ev.report.find(kCollision);
  m.f1 = r->f1.value_or(0.0);
  m.ap = r->ap.value_or(0.0);
  m.auc = r->auc.value_or(0.0);
  return m;
}

// F1 of predicting the majority class of the test collision labels for
// every pair: 0 when negatives are the majority.
double majority_f1(const fs::path& dataset) {
  const auto m = read_manifest(dataset);
  std::size_t pos = 0, total = 0;
  for (const auto& s : load_split(dataset, m, "test")) {
    const auto* t = s.find_target(kCollision);
    for (std::size_t k = 0; k < t->pairs.size(); ++k) {
      if (!t->mask[k]) continue;
      ++total;
      pos += t->labels[k][0] != 0.0;
    }
  }
  if (2 * pos <= total) return 0.0;
  const double precision = static_cast<double>(pos) / static_cast<double>(total);
  return 2.0 * precision / (precision + 1.0);
}

std::vector<Line> property_criteria(std::uint64_t seed) {
  struct Limit {
    const char* name;
    double seconds;
  };
  const std::map<int, Limit> limits = {{1, {"gradient correctness", 60}},
                                       {2, {"structural invariants", 60}},
                                       {3, {"hungarian oracle", 30}},
                                       {4, {"loss identities", 1e9}},
                                       {5, {"metric oracles", 1e9}}};
  std::map<int, std::vector<verify::CheckResult>> by;
  for (auto& r : verify::property_suite(seed)) by[r.criterion].push_back(std::move(r));
  std::vector<Line> out;
  for (const auto& [c, lim] : limits) {
    double secs = 0.0;
    std::string first_failure;
    for (const auto& r : by[c]) {
      secs += r.seconds;
      if (!r.passed && first_failure.empty()) first_failure = r.name + ": " + r.detail;
    }
    const bool in_time = secs <= lim.seconds;
    std::string detail = std::to_string(by[c].size()) + " checks in " + num(secs, 2) + " s";
    if (!first_failure.empty()) detail += "; first failure " + first_failure;
    if (!in_time) detail += "; over the " + num(lim.seconds, 0) + " s budget";
    out.push_back({c, lim.name, !by[c].empty() && first_failure.empty() && in_time, detail});
  }
  return out;
}

Line determinism(const fs::path& work, std::ostream& log) {
  GeneratorConfig g;
  g.n_sequences = 40;
  const fs::path a = work / "det_a", b = work / "det_b";
  generate_dataset(g, 11, a);
  generate_dataset(g, 11, b);
  std::string why;
  if (!same_tree(a, b, why)) return {9, "determinism and round trips", false, "dataset " + why};

  cli::RunConfig c;
  c.dataset = a.string();
  c.hidden_dim = 16;
  c.heads = 2;
  c.epochs = 2;
  c.seed = 5;
  c.out = (work / "det_run_a").string();
  cli::run_training(c, log);
  c.out = (work / "det_run_b").string();
  c.dataset = b.string();
  cli::run_training(c, log);
  for (const char* f : {"checkpoint.bin", "metrics.csv"}) {
    if (slurp(work / "det_run_a" / f) != slurp(work / "det_run_b" / f))
      return {9, "determinism and round trips", false, std::string("training output ") + f + " differs"};
  }

  const Model m = load_checkpoint(work / "det_run_a" / "checkpoint.json");
  save_checkpoint(work / "det_copy.json", m);
  const Model back = load_checkpoint(work / "det_copy.json");
  const auto e1 = cli::evaluate_split(m, a.string(), "test", 0.5);
  const auto e2 = cli::evaluate_split(back, a.string(), "test", 0.5);
  bool exact = e1.loss == e2.loss && back.params == m.params;
  for (std::size_t k = 0; k < e1.report.relations.size(); ++k) {
    const auto &x = e1.report.relations[k], &y = e2.report.relations[k];
    exact = exact && x.f1 == y.f1 && x.ap == y.ap && x.auc == y.auc && x.loss == y.loss;
  }
  if (!exact) return {9, "determinism and round trips", false, "checkpoint round trip changed metrics"};
  return {9, "determinism and round trips", true, "datasets, checkpoints and metrics.csv byte-identical; reloaded metrics bit-exact"};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "mtd_acceptance";
  std::uint64_t seed = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work" && i + 1 < argc) work = argv[++i];
    else if (a == "--seed" && i + 1 < argc) seed = std::stoull(argv[++i]);
    else {
      std::cerr << "usage: mtd_acceptance [--work DIR] [--seed N]\n";
      return 2;
    }
  }
  fs::remove_all(work);
  fs::create_directories(work);
  std::ofstream log(work / "acceptance.log");

  std::vector<Line> lines = property_criteria(1);

  // benchmark: default generator, 500 sequences
  const auto t_gen = Clock::now();
  GeneratorConfig g;
  const fs::path dataset = work / "benchmark";
  const auto manifest = generate_dataset(g, seed, dataset);
  const double gen_seconds = since(t_gen);
  const std::string single = std::string("single-task:") + kCollision;
  const auto st = train_and_test(dataset, work / "single", single, ModelKind::mtd_gnn, seed, log);
  const auto mt = train_and_test(dataset, work / "multi", "multi-task", ModelKind::mtd_gnn, seed, log);
  const auto rnn = train_and_test(dataset, work / "baseline", single, ModelKind::baseline_rnn, seed, log);

  {
    const double base_f1 = majority_f1(dataset);
    const double seconds = gen_seconds + st.seconds;
    const bool ok = st.auc >= 0.70 && st.f1 - base_f1 >= 0.10 && seconds <= 600.0;
    lines.push_back({6, "learnability", ok,
                     "single-task collision AUC " + num(st.auc) + " (>= 0.70), F1 " + num(st.f1) + " vs majority F1 " +
                         num(base_f1) + " (margin >= 0.10), " + std::to_string(st.epochs) + " epochs, " +
                         num(seconds, 1) + " s (<= 600), positive rate " + num(manifest.collision_positive_rate, 3)});
  }
  {
    const bool band = mt.auc >= st.auc - 0.02;
    const bool improves = mt.f1 > st.f1 || mt.ap > st.ap || mt.auc > st.auc;
    lines.push_back({7, "multi-task vs single-task", band && improves,
                     "multi-task F1/AP/AUC " + num(mt.f1) + "/" + num(mt.ap) + "/" + num(mt.auc) + ", single-task " +
                         num(st.f1) + "/" + num(st.ap) + "/" + num(st.auc) + "; AUC band " + (band ? "met" : "missed") +
                         ", improves a metric: " + (improves ? "yes" : "no")});
  }
  {
    const bool ok = st.auc - rnn.auc >= 0.02;
    lines.push_back({8, "baseline gap", ok,
                     "MTD-GNN AUC " + num(st.auc) + " vs padded RNN " + num(rnn.auc) + " (margin " +
                         num(st.auc - rnn.auc) + ", need >= 0.02), same " + std::to_string(rnn.epochs) + "-epoch budget"});
  }

  lines.push_back(determinism(work, log));

  bool all = true;
  for (const auto& l : lines) {
    std::cout << "criterion " << l.criterion << ": " << (l.passed ? "PASS" : "FAIL") << "  " << l.name << "  " << l.detail
              << '\n';
    all = all && l.passed;
  }
  std::cout << (all ? "all criteria passed" : "some criteria failed") << '\n';
  return all ? 0 : 1;
}
