#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtd/graph.hpp"
#include "mtd/relation.hpp"

namespace mtd {

/// F1 of `score >= threshold` against binary labels. 0 when there are neither
/// positive labels nor positive predictions.
double f1_score(std::span<const double> scores, std::span<const double> labels, double threshold = 0.5);

/// Area under the precision-recall step curve, ranking by descending score
/// with tied scores forming one threshold. nullopt unless both classes occur.
std::optional<double> average_precision(std::span<const double> scores, std::span<const double> labels);

/// ROC AUC as the Mann-Whitney statistic with midranks for ties. nullopt
/// unless both classes occur.
std::optional<double> roc_auc(std::span<const double> scores, std::span<const double> labels);

/// Fraction of positive labels among the top-k scores of one sample. nullopt
/// when the sample has no positive label.
std::optional<double> recall_at_k(std::span<const double> scores, std::span<const double> labels, std::size_t k);

struct RelationMetrics {
  std::string relation;
  std::optional<double> f1, ap, auc;
  double loss = 0.0;
  std::size_t n_pairs = 0;   ///< evaluated pairs
  std::size_t n_masked = 0;  ///< masked pairs
};

struct MetricReport {
  std::vector<RelationMetrics> relations;
  RelationMetrics all;  ///< pooled over relations, relation name "__all__"

  const RelationMetrics* find(std::string_view relation) const;
};

/// Pools per-pair scores over many samples. Binary and multi-label logits are
/// scored with a sigmoid per class and micro-averaged; categorical logits are
/// scored with a softmax against a one-hot label.
class MetricAccumulator {
 public:
  explicit MetricAccumulator(std::vector<RelationSpec> relations, double threshold = 0.5);

  /// `logits[r]` is the pairs x C_r prediction for relations[r] (ignored when
  /// the target has no pair); `losses[r]` the sample's loss for that relation.
  void add(std::span<const Tensor> logits, const std::vector<EdgeTargets>& targets, std::span<const double> losses);

  /// Throws when no pair of any relation was evaluated.
  MetricReport report() const;

 private:
  struct Pool {
    std::vector<double> scores, labels;
    double loss_sum = 0.0;
    std::size_t samples = 0, pairs = 0, masked = 0;
  };
  std::vector<RelationSpec> relations_;
  double threshold_;
  std::vector<Pool> pools_;
};

/// Metrics of a single sample.
MetricReport compute_metrics(const std::vector<RelationSpec>& relations, std::span<const Tensor> logits,
                             const std::vector<EdgeTargets>& targets, double threshold = 0.5);

/// Shortest decimal that round-trips, or "" for an absent value.
std::string format_number(std::optional<double> v);

/// CSV with header relation,f1,ap,auc,loss,n_pairs,n_masked and an __all__ row.
void write_metrics_csv(std::ostream& os, const MetricReport& report);

}  // namespace mtd
