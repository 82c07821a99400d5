#include "mtd/loss.hpp"

#include <algorithm>
#include <cmath>

namespace mtd {

double bce(double p, double y) {
  const double q = std::clamp(p, kLogClamp, 1.0 - kLogClamp);
  return -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
}

double prioritized_loss(double p, double y, double o, int majority_class) {
  if (!(o >= 1.0)) throw Error("prioritized_loss: majority count o must be >= 1, got " + std::to_string(o));
  const bool is_majority = (y != 0.0 ? 1 : 0) == majority_class;
  return (is_majority ? 1.0 / o : 1.0) * bce(p, y);
}

ClassBalance class_balance(const EdgeTargets& target) {
  std::size_t pos = 0, neg = 0;
  for (std::size_t k = 0; k < target.pairs.size(); ++k) {
    if (!target.mask[k]) continue;
    (target.labels[k].at(0) != 0.0 ? pos : neg) += 1;
  }
  if (pos > neg) return {1, static_cast<double>(pos)};
  return {0, static_cast<double>(neg)};
}

Var relation_loss(Var logits, const EdgeTargets& target, const RelationSpec& spec) {
  std::vector<std::uint32_t> rows;
  for (std::size_t k = 0; k < target.pairs.size(); ++k)
    if (target.mask[k]) rows.push_back(static_cast<std::uint32_t>(k));
  if (rows.empty()) return {};
  if (!logits.valid()) throw Error("relation_loss: relation '" + spec.name + "' has targets but no predictions");
  const std::size_t c = logits.value().cols();
  if (c != spec.class_count)
    throw ShapeError("relation_loss: relation '" + spec.name + "' predicts " + std::to_string(c) + " classes, expected " +
                     std::to_string(spec.class_count));
  Var sel = gather_rows(logits, rows);
  switch (spec.loss) {
    case LossMode::cross_entropy: {
      std::vector<std::uint32_t> cls;
      for (auto r : rows) cls.push_back(static_cast<std::uint32_t>(target.labels[r].at(0)));
      const std::vector<double> w(rows.size(), spec.weight);
      return softmax_cross_entropy(sel, cls, w);
    }
    case LossMode::bce:
    case LossMode::prioritized_bce: {
      std::vector<double> y, w;
      const ClassBalance bal = spec.loss == LossMode::prioritized_bce ? class_balance(target) : ClassBalance{};
      for (auto r : rows) {
        const auto& lab = target.labels[r];
        if (lab.size() != c) throw ShapeError("relation_loss: relation '" + spec.name + "' label width mismatch");
        for (double v : lab) {
          double weight = spec.weight;
          if (spec.loss == LossMode::prioritized_bce && (v != 0.0 ? 1 : 0) == bal.majority_class) weight /= bal.count;
          y.push_back(v);
          w.push_back(weight);
        }
      }
      return bce_with_logits(sel, y, w);
    }
  }
  return {};
}

Var total_loss(Tape& tape, const EdgePredictions& preds, const std::vector<EdgeTargets>& targets,
               std::span<const RelationSpec> relations) {
  Var total;
  for (const auto& spec : relations) {
    const auto it = std::find(preds.names.begin(), preds.names.end(), spec.name);
    if (it == preds.names.end()) throw Error("total_loss: no prediction for relation '" + spec.name + "'");
    const auto tt = std::find_if(targets.begin(), targets.end(), [&](const EdgeTargets& t) { return t.relation == spec.name; });
    if (tt == targets.end()) throw Error("total_loss: no targets for relation '" + spec.name + "'");
    if (tt->pairs != preds.pairs)
      throw Error("total_loss: relation '" + spec.name + "' predicts " + std::to_string(preds.pairs.size()) +
                  " pairs but targets cover " + std::to_string(tt->pairs.size()));
    Var l = relation_loss(preds.logits[static_cast<std::size_t>(it - preds.names.begin())], *tt, spec);
    if (!l.valid()) continue;
    total = total.valid() ? add(total, l) : l;
  }
  if (!total.valid()) return tape.constant(Tensor::scalar(0.0));
  return total;
}

}  // namespace mtd
