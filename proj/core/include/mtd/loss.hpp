#pragma once

#include <span>

#include "mtd/graph.hpp"
#include "mtd/model.hpp"
#include "mtd/relation.hpp"

namespace mtd {

/// Binary cross-entropy of probability p against label y, with p clamped to
/// [1e-12, 1 - 1e-12].
double bce(double p, double y);

/// Class-prioritized BCE: the loss of a `majority_class` label is divided by
/// o, the majority-class count of the inferred frame.
double prioritized_loss(double p, double y, double o, int majority_class = 0);

struct ClassBalance {
  int majority_class = 0;  ///< ties resolve to 0
  double count = 0.0;      ///< o
};

/// Majority class and its size among the evaluated labels of a binary target.
ClassBalance class_balance(const EdgeTargets& target);

/// Loss of one relation over the evaluated pairs. Returns an empty Var when
/// the relation has no evaluated pair.
Var relation_loss(Var logits, const EdgeTargets& target, const RelationSpec& spec);

/// Task-weighted sum of relation losses, each unordered pair counted once.
/// Throws when a prediction's pair set differs from its target's. Returns a
/// constant zero when nothing is evaluated.
Var total_loss(Tape& tape, const EdgePredictions& preds, const std::vector<EdgeTargets>& targets,
               std::span<const RelationSpec> relations);

}  // namespace mtd
