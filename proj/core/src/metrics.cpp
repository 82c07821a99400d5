#include "mtd/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>

namespace mtd {

namespace {

void check_lengths(std::span<const double> scores, std::span<const double> labels, const char* what) {
  if (scores.size() != labels.size())
    throw Error(std::string(what) + ": " + std::to_string(scores.size()) + " scores vs " + std::to_string(labels.size()) + " labels");
}

std::vector<std::size_t> by_descending_score(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double f1_score(std::span<const double> scores, std::span<const double> labels, double threshold) {
  check_lengths(scores, labels, "f1_score");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    const bool pos = labels[i] != 0.0;
    tp += pred && pos;
    fp += pred && !pos;
    fn += !pred && pos;
  }
  const double denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2 * tp / denom;
}

std::optional<double> average_precision(std::span<const double> scores, std::span<const double> labels) {
  check_lengths(scores, labels, "average_precision");
  const double positives = static_cast<double>(std::count_if(labels.begin(), labels.end(), [](double y) { return y != 0.0; }));
  if (positives == 0 || positives == static_cast<double>(labels.size())) return std::nullopt;
  const auto order = by_descending_score(scores);
  double ap = 0.0, tp = 0.0, seen = 0.0, prev_recall = 0.0;
  for (std::size_t k = 0; k < order.size();) {
    std::size_t end = k;
    while (end < order.size() && scores[order[end]] == scores[order[k]]) {
      tp += labels[order[end]] != 0.0;
      seen += 1;
      ++end;
    }
    const double recall = tp / positives;
    ap += (recall - prev_recall) * (tp / seen);
    prev_recall = recall;
    k = end;
  }
  return ap;
}

std::optional<double> roc_auc(std::span<const double> scores, std::span<const double> labels) {
  check_lengths(scores, labels, "roc_auc");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0, n_pos = 0.0;
  for (std::size_t k = 0; k < n;) {
    std::size_t end = k;
    while (end < n && scores[order[end]] == scores[order[k]]) ++end;
    const double midrank = (static_cast<double>(k + 1) + static_cast<double>(end)) / 2.0;
    for (std::size_t q = k; q < end; ++q) {
      if (labels[order[q]] != 0.0) {
        pos_rank_sum += midrank;
        n_pos += 1;
      }
    }
    k = end;
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg);
}

std::optional<double> recall_at_k(std::span<const double> scores, std::span<const double> labels, std::size_t k) {
  check_lengths(scores, labels, "recall_at_k");
  const double positives = static_cast<double>(std::count_if(labels.begin(), labels.end(), [](double y) { return y != 0.0; }));
  if (positives == 0) return std::nullopt;
  const auto order = by_descending_score(scores);
  double hit = 0;
  for (std::size_t q = 0; q < std::min(k, order.size()); ++q) hit += labels[order[q]] != 0.0;
  return hit / positives;
}

const RelationMetrics* MetricReport::find(std::string_view relation) const {
  for (const auto& r : relations)
    if (r.relation == relation) return &r;
  if (relation == all.relation) return &all;
  return nullptr;
}

MetricAccumulator::MetricAccumulator(std::vector<RelationSpec> relations, double threshold)
    : relations_(std::move(relations)), threshold_(threshold), pools_(relations_.size()) {}

void MetricAccumulator::add(std::span<const Tensor> logits, const std::vector<EdgeTargets>& targets,
                            std::span<const double> losses) {
  if (logits.size() != relations_.size() || losses.size() != relations_.size())
    throw Error("MetricAccumulator::add: expected one prediction and loss per relation");
  for (std::size_t r = 0; r < relations_.size(); ++r) {
    const auto& spec = relations_[r];
    const auto t = std::find_if(targets.begin(), targets.end(), [&](const EdgeTargets& e) { return e.relation == spec.name; });
    if (t == targets.end()) throw Error("MetricAccumulator::add: no targets for relation '" + spec.name + "'");
    Pool& pool = pools_[r];
    const std::size_t evaluated = t->evaluated_count();
    pool.pairs += evaluated;
    pool.masked += t->pairs.size() - evaluated;
    if (evaluated == 0) continue;
    pool.loss_sum += losses[r];
    pool.samples += 1;
    const Tensor& lg = logits[r];
    const std::size_t c = spec.class_count;
    if (lg.size() != t->pairs.size() * c)
      throw ShapeError("MetricAccumulator::add: relation '" + spec.name + "' logits " + to_string(lg.shape()) +
                       " do not cover " + std::to_string(t->pairs.size()) + " pairs");
    for (std::size_t k = 0; k < t->pairs.size(); ++k) {
      if (!t->mask[k]) continue;
      const auto& y = t->labels[k];
      if (spec.kind == LabelKind::categorical) {
        double mx = lg[k * c];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, lg[k * c + j]);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += std::exp(lg[k * c + j] - mx);
        for (std::size_t j = 0; j < c; ++j) {
          pool.scores.push_back(std::exp(lg[k * c + j] - mx) / z);
          pool.labels.push_back(static_cast<std::size_t>(y.at(0)) == j ? 1.0 : 0.0);
        }
      } else {
        for (std::size_t j = 0; j < c; ++j) {
          pool.scores.push_back(sigmoid_value(lg[k * c + j]));
          pool.labels.push_back(y.at(j));
        }
      }
    }
  }
}

MetricReport MetricAccumulator::report() const {
  MetricReport rep;
  rep.all.relation = "__all__";
  std::vector<double> all_scores, all_labels;
  for (std::size_t r = 0; r < relations_.size(); ++r) {
    const Pool& p = pools_[r];
    RelationMetrics m;
    m.relation = relations_[r].name;
    m.n_pairs = p.pairs;
    m.n_masked = p.masked;
    m.loss = p.samples ? p.loss_sum / static_cast<double>(p.samples) : 0.0;
    if (!p.scores.empty()) {
      m.f1 = f1_score(p.scores, p.labels, threshold_);
      m.ap = average_precision(p.scores, p.labels);
      m.auc = roc_auc(p.scores, p.labels);
    }
    all_scores.insert(all_scores.end(), p.scores.begin(), p.scores.end());
    all_labels.insert(all_labels.end(), p.labels.begin(), p.labels.end());
    rep.all.n_pairs += m.n_pairs;
    rep.all.n_masked += m.n_masked;
    rep.all.loss += m.loss;
    rep.relations.push_back(std::move(m));
  }
  if (all_scores.empty()) throw Error("compute_metrics: no evaluated pair");
  rep.all.f1 = f1_score(all_scores, all_labels, threshold_);
  rep.all.ap = average_precision(all_scores, all_labels);
  rep.all.auc = roc_auc(all_scores, all_labels);
  return rep;
}

MetricReport compute_metrics(const std::vector<RelationSpec>& relations, std::span<const Tensor> logits,
                             const std::vector<EdgeTargets>& targets, double threshold) {
  MetricAccumulator acc(relations, threshold);
  const std::vector<double> zero(relations.size(), 0.0);
  acc.add(logits, targets, zero);
  return acc.report();
}

std::string format_number(std::optional<double> v) {
  if (!v) return "";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, *v);
  return std::string(buf, res.ptr);
}

void write_metrics_csv(std::ostream& os, const MetricReport& report) {
  os << "relation,f1,ap,auc,loss,n_pairs,n_masked\n";
  auto row = [&](const RelationMetrics& m) {
    os << m.relation << ',' << format_number(m.f1) << ',' << format_number(m.ap) << ',' << format_number(m.auc) << ','
       << format_number(m.loss) << ',' << m.n_pairs << ',' << m.n_masked << '\n';
  };
  for (const auto& m : report.relations) row(m);
  row(report.all);
}

}  // namespace mtd
