#include <cmath>
#include <filesystem>
#include <limits>

#include "doctest.h"
#include "mtd/checkpoint.hpp"
#include "mtd/synth.hpp"
#include "mtd/train.hpp"

using namespace mtd;
namespace fs = std::filesystem;

namespace {

std::vector<RelationSpec> collision_only() {
  return {RelationSpec{kCollision, 1, LabelKind::binary, LossMode::prioritized_bce, 1.0}};
}

ModelConfig config_for(const GeneratorConfig& g, ModelKind kind = ModelKind::mtd_gnn) {
  ModelConfig c;
  c.kind = kind;
  c.input_dim = g.feature_dim;
  c.max_nodes = 6;
  c.relations = collision_only();
  return c;
}

// First `n` generated sequences whose collision target has both classes.
std::vector<Sequence> mixed_sequences(const GeneratorConfig& g, std::size_t n) {
  const Tensor proj = feature_projection(g, 0);
  std::vector<Sequence> out;
  const auto rels = collision_only();
  for (std::size_t i = 0; out.size() < n && i < 1000; ++i) {
    auto seq = generate_sequence(g, 0, i, proj).sequence;
    const auto* t = seq.find_target(kCollision);
    bool pos = false, neg = false;
    for (std::size_t k = 0; k < t->pairs.size(); ++k) {
      if (!t->mask[k]) continue;
      (t->labels[k][0] != 0.0 ? pos : neg) = true;
    }
    if (pos && neg) out.push_back(select_relations(seq, rels));
  }
  return out;
}

std::vector<Sequence> first_sequences(const GeneratorConfig& g, std::size_t n) {
  const Tensor proj = feature_projection(g, 0);
  std::vector<Sequence> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(generate_sequence(g, 0, i, proj).sequence);
  return out;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("two sequences are memorised") {
  GeneratorConfig g;
  const auto data = mixed_sequences(g, 2);
  REQUIRE(data.size() == 2);
  TrainOptions o;
  o.epochs = 200;
  o.schedule = LrSchedule::constant;
  const auto result = train(Model::init(config_for(g), 1), data, {}, o);
  const auto ev = evaluate(result.last, data, 1);
  CHECK(*ev.report.find(kCollision)->f1 >= 0.95);
}

TEST_CASE("training is deterministic and independent of worker count") {
  GeneratorConfig g;
  const auto data = first_sequences(g, 12);
  TrainOptions o;
  o.epochs = 2;
  o.batch_size = 3;
  auto cfg = config_for(g);
  cfg.hidden_dim = 16;
  cfg.relations = generated_relations();
  for (auto& r : cfg.relations) r.loss = LossMode::prioritized_bce;
  const auto a = train(Model::init(cfg, 2), std::span(data).first(9), std::span(data).last(3), o);
  o.workers = 3;
  const auto b = train(Model::init(cfg, 2), std::span(data).first(9), std::span(data).last(3), o);
  CHECK(a.last.params == b.last.params);
  CHECK(a.best_epoch == b.best_epoch);
  CHECK(a.history.back().val->loss == b.history.back().val->loss);
}

TEST_CASE("best checkpoint follows the validation loss") {
  GeneratorConfig g;
  const auto data = first_sequences(g, 10);
  TrainOptions o;
  o.epochs = 4;
  auto cfg = config_for(g);
  cfg.hidden_dim = 8;
  const auto r = train(Model::init(cfg, 3), std::span(data).first(7), std::span(data).last(3), o);
  double best = std::numeric_limits<double>::infinity();
  std::size_t at = 0;
  for (const auto& rec : r.history)
    if (rec.val->loss < best) {
      best = rec.val->loss;
      at = rec.epoch;
    }
  CHECK(r.best_epoch == at);
  CHECK(r.best_val_loss == best);
  CHECK(r.history.size() == 4);
  CHECK(r.history[1].learning_rate == doctest::Approx(0.001 / 1.9).epsilon(1e-15));
}

TEST_CASE("non-finite losses abort with diagnostics") {
  GeneratorConfig g;
  auto data = first_sequences(g, 2);
  data[1].graph.frames[0].nodes[0].features[0] = std::numeric_limits<double>::quiet_NaN();
  TrainOptions o;
  o.epochs = 1;
  auto cfg = config_for(g);
  cfg.hidden_dim = 4;
  try {
    train(Model::init(cfg, 4), data, {}, o);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch 1") != std::string::npos);
    CHECK(msg.find("batch") != std::string::npos);
    CHECK(msg.find("norm") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip preserves metrics bit for bit") {
  GeneratorConfig g;
  const auto data = first_sequences(g, 8);
  for (ModelKind kind : {ModelKind::mtd_gnn, ModelKind::baseline_rnn}) {
    auto cfg = config_for(g, kind);
    cfg.hidden_dim = 6;
    cfg.heads = 3;
    cfg.relations = generated_relations();
    TrainOptions o;
    o.epochs = 1;
    const auto r = train(Model::init(cfg, 5), data, {}, o);
    const auto dir = fs::temp_directory_path() / "mtd_ckpt_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    save_checkpoint(dir / "checkpoint.json", r.last, R"({"note": 1})");
    const Model back = load_checkpoint(dir / "checkpoint.json");
    CHECK(back.config == r.last.config);
    CHECK(back.params == r.last.params);
    const auto e1 = evaluate(r.last, data, 1), e2 = evaluate(back, data, 1);
    CHECK(e1.loss == e2.loss);
    for (std::size_t k = 0; k < e1.report.relations.size(); ++k) {
      CHECK(e1.report.relations[k].auc == e2.report.relations[k].auc);
      CHECK(e1.report.relations[k].ap == e2.report.relations[k].ap);
      CHECK(e1.report.relations[k].f1 == e2.report.relations[k].f1);
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.json"), IoError);
    CHECK_THROWS_AS(load_checkpoint(dir), IoError);
    fs::remove_all(dir);
  }
}

TEST_CASE("select relations") {
  GeneratorConfig g;
  const auto seq = first_sequences(g, 1).front();
  const auto one = select_relations(seq, collision_only());
  REQUIRE(one.targets.size() == 1);
  CHECK(one.targets[0].relation == kCollision);
  CHECK_THROWS_AS(select_relations(seq, std::vector<RelationSpec>{{"nope", 1, LabelKind::binary, LossMode::bce, 1}}),
                  ConfigError);
}

TEST_CASE("empty splits are rejected") {
  const Model m = Model::init(config_for(GeneratorConfig{}), 0);
  CHECK_THROWS_AS(evaluate(m, {}, 1), ConfigError);
  CHECK_THROWS_AS(train(m, {}, {}, TrainOptions{}), ConfigError);
}

}  // TEST_SUITE
