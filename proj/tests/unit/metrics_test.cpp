#include <sstream>

#include "doctest.h"
#include "mtd/metrics.hpp"
#include "mtd/rng.hpp"
#include "mtd/verify/oracles.hpp"

using namespace mtd;

TEST_SUITE("metrics") {

TEST_CASE("threshold sweep agreement on random instances") {
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const auto n = static_cast<std::size_t>(rng.integer(4, 60));
    std::vector<double> s(n), y(n);
    for (std::size_t k = 0; k < n; ++k) {
      // coarse scores so ties occur
      s[k] = std::round(rng.uniform() * 10.0) / 10.0;
      y[k] = rng.bernoulli(0.35) ? 1.0 : 0.0;
    }
    y[0] = 1.0;
    y[1] = 0.0;
    CHECK(std::abs(*roc_auc(s, y) - *verify::sweep_auc(s, y)) <= 1e-9);
    CHECK(std::abs(*average_precision(s, y) - *verify::sweep_ap(s, y)) <= 1e-9);
  }
}

TEST_CASE("perfect separation and constant scores") {
  const std::vector<double> s = {0.9, 0.8, 0.2, 0.1}, y = {1, 1, 0, 0};
  CHECK(*roc_auc(s, y) == 1.0);
  CHECK(*average_precision(s, y) == 1.0);
  const std::vector<double> c = {0.3, 0.3, 0.3, 0.3};
  CHECK(*roc_auc(c, y) == 0.5);
  CHECK(*average_precision(c, y) == 0.5);
}

TEST_CASE("single-class inputs have no AP or AUC") {
  const std::vector<double> s = {0.1, 0.7}, y = {0, 0};
  CHECK_FALSE(roc_auc(s, y).has_value());
  CHECK_FALSE(average_precision(s, y).has_value());
  CHECK(f1_score(s, y) == 0.0);
}

TEST_CASE("f1 by hand") {
  const std::vector<double> s = {0.9, 0.6, 0.4, 0.7, 0.2}, y = {1, 0, 1, 1, 0};
  // predictions 1 1 0 1 0: tp 2, fp 1, fn 1
  CHECK(f1_score(s, y) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(f1_score(s, y, 0.3) == doctest::Approx(2.0 * 3 / (2.0 * 3 + 1)).epsilon(1e-15));
  CHECK(f1_score(std::vector<double>{0.5}, std::vector<double>{1.0}) == 1.0);
}

TEST_CASE("recall at k") {
  const std::vector<double> s = {0.9, 0.1, 0.8, 0.3}, y = {0, 1, 1, 1};
  CHECK(*recall_at_k(s, y, 2) == doctest::Approx(1.0 / 3.0));
  CHECK(*recall_at_k(s, y, 4) == 1.0);
  CHECK_FALSE(recall_at_k(s, std::vector<double>{0, 0, 0, 0}, 2).has_value());
}

TEST_CASE("accumulator pools binary, multi-label and categorical relations") {
  const std::vector<RelationSpec> rels = {{"c", 1, LabelKind::binary, LossMode::bce, 1},
                                          {"m", 2, LabelKind::multi_label, LossMode::bce, 1},
                                          {"k", 3, LabelKind::categorical, LossMode::cross_entropy, 1}};
  auto target = [](std::string name, std::size_t classes, LabelKind kind, std::vector<std::vector<double>> labels) {
    EdgeTargets t;
    t.relation = std::move(name);
    t.class_count = classes;
    t.kind = kind;
    t.pairs = canonical_pairs(3);
    t.mask = {1, 1, 0};
    labels[2].clear();
    t.labels = std::move(labels);
    return t;
  };
  const std::vector<EdgeTargets> targets = {target("c", 1, LabelKind::binary, {{1}, {0}, {1}}),
                                            target("m", 2, LabelKind::multi_label, {{1, 0}, {0, 1}, {1, 1}}),
                                            target("k", 3, LabelKind::categorical, {{2}, {0}, {1}})};
  const std::vector<Tensor> logits = {Tensor(Shape{3, 1}, {2.0, -1.0, 5.0}),
                                      Tensor(Shape{3, 2}, {1.0, -1.0, -2.0, 0.5, 0, 0}),
                                      Tensor(Shape{3, 3}, {0.0, 0.0, 3.0, 1.0, 0.0, 0.0, 0, 0, 0})};
  MetricAccumulator acc(rels);
  const std::vector<double> losses = {0.1, 0.2, 0.3};
  acc.add(logits, targets, losses);
  const auto rep = acc.report();
  const auto* c = rep.find("c");
  REQUIRE(c != nullptr);
  CHECK(c->n_pairs == 2);
  CHECK(c->n_masked == 1);
  CHECK(*c->auc == 1.0);
  CHECK(*c->f1 == 1.0);
  CHECK(*rep.find("m")->auc == 1.0);
  CHECK(*rep.find("k")->auc == 1.0);
  CHECK(rep.all.relation == "__all__");
  CHECK(rep.all.n_pairs == 6);

  std::ostringstream os;
  write_metrics_csv(os, rep);
  CHECK(os.str().rfind("relation,f1,ap,auc,loss,n_pairs,n_masked\n", 0) == 0);
  CHECK(os.str().find("\n__all__,") != std::string::npos);
}

TEST_CASE("an accumulator with nothing evaluated cannot report") {
  MetricAccumulator acc({{"c", 1, LabelKind::binary, LossMode::bce, 1}});
  CHECK_THROWS(acc.report());
}

TEST_CASE("number formatting round-trips") {
  CHECK(format_number(std::nullopt).empty());
  const double v = 0.1 + 0.2;
  CHECK(std::stod(format_number(v)) == v);
  CHECK(format_number(0.5) == "0.5");
}

}  // TEST_SUITE
