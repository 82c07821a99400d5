#include "mtd/verify/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace mtd::verify {

std::vector<double> naive_matmul(std::span<const double> a, std::span<const double> b, std::size_t m, std::size_t k,
                                 std::size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += a[i * k + t] * b[t * n + j];
      c[i * n + j] = s;
    }
  return c;
}

namespace {

void search(const CostMatrix& cost, double penalty, std::size_t row, std::vector<char>& used, double acc,
            double& best) {
  if (row == cost.rows) {
    const auto free_cols = static_cast<double>(std::count(used.begin(), used.end(), 0));
    best = std::min(best, acc + penalty * free_cols);
    return;
  }
  search(cost, penalty, row + 1, used, acc + penalty, best);
  for (std::size_t c = 0; c < cost.cols; ++c) {
    if (used[c]) continue;
    used[c] = 1;
    search(cost, penalty, row + 1, used, acc + cost(row, c), best);
    used[c] = 0;
  }
}

}  // namespace

double brute_force_matching(const CostMatrix& cost, double unmatched_penalty) {
  std::vector<char> used(cost.cols, 0);
  double best = std::numeric_limits<double>::infinity();
  search(cost, unmatched_penalty, 0, used, 0.0, best);
  return best;
}

double brute_force_permutation(const CostMatrix& cost) {
  std::vector<std::size_t> p(cost.rows);
  std::iota(p.begin(), p.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += cost(i, p[i]);
    best = std::min(best, s);
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

namespace {

struct SweepPoint {
  double tp, fp;
};

// Cumulative (tp, fp) after admitting every score >= each distinct threshold,
// thresholds taken in descending order.
std::vector<SweepPoint> sweep(std::span<const double> scores, std::span<const double> labels) {
  std::set<double, std::greater<>> thresholds(scores.begin(), scores.end());
  std::vector<SweepPoint> out;
  for (double t : thresholds) {
    SweepPoint p{0, 0};
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] < t) continue;
      if (labels[i] != 0.0) p.tp += 1;
      else p.fp += 1;
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace

std::optional<double> sweep_auc(std::span<const double> scores, std::span<const double> labels) {
  const double pos = static_cast<double>(std::count_if(labels.begin(), labels.end(), [](double y) { return y != 0.0; }));
  const double neg = static_cast<double>(labels.size()) - pos;
  if (pos == 0 || neg == 0) return std::nullopt;
  double area = 0.0, px = 0.0, py = 0.0;
  for (const auto& p : sweep(scores, labels)) {
    const double x = p.fp / neg, y = p.tp / pos;
    area += (x - px) * (y + py) / 2.0;
    px = x;
    py = y;
  }
  return area;
}

std::optional<double> sweep_ap(std::span<const double> scores, std::span<const double> labels) {
  const double pos = static_cast<double>(std::count_if(labels.begin(), labels.end(), [](double y) { return y != 0.0; }));
  if (pos == 0 || pos == static_cast<double>(labels.size())) return std::nullopt;
  double ap = 0.0, prev_recall = 0.0;
  for (const auto& p : sweep(scores, labels)) {
    const double recall = p.tp / pos;
    ap += (recall - prev_recall) * p.tp / (p.tp + p.fp);
    prev_recall = recall;
  }
  return ap;
}

namespace {

std::vector<double> row_times(std::span<const double> x, const Tensor& w) {
  std::vector<double> out(w.cols(), 0.0);
  for (std::size_t c = 0; c < w.cols(); ++c)
    for (std::size_t r = 0; r < w.rows(); ++r) out[c] += x[r] * w.at(r, c);
  return out;
}

double leaky(double x) { return x > 0 ? x : 0.2 * x; }

std::vector<std::pair<std::uint32_t, double>> softmax_over(const std::vector<std::vector<double>>& z,
                                                           std::uint32_t center,
                                                           const std::vector<std::uint32_t>& neighbours,
                                                           const Tensor& a) {
  const std::size_t d = z[center].size();
  std::vector<double> score;
  for (auto j : neighbours) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += a[c] * z[center][c] + a[d + c] * z[j][c];
    score.push_back(leaky(s));
  }
  std::vector<std::pair<std::uint32_t, double>> out;
  if (score.empty()) return out;
  const double mx = *std::max_element(score.begin(), score.end());
  double total = 0.0;
  for (double& s : score) total += (s = std::exp(s - mx));
  for (std::size_t e = 0; e < neighbours.size(); ++e) out.emplace_back(neighbours[e], score[e] / total);
  return out;
}

std::vector<std::vector<double>> transform(const std::vector<std::vector<double>>& h, const Tensor& w) {
  std::vector<std::vector<double>> z;
  for (const auto& row : h) z.push_back(row_times(row, w));
  return z;
}

}  // namespace

NaiveCoefficients naive_coefficients(const std::vector<std::vector<double>>& h, const Adjacency& adj,
                                     const ParameterSet& params, std::size_t layer, std::size_t head,
                                     std::uint32_t center) {
  const auto z = transform(h, params.at(param_names::gat_weight(layer, head)));
  return {softmax_over(z, center, adj.spatial(center), params.at(param_names::gat_spatial(layer, head))),
          softmax_over(z, center, adj.temporal(center), params.at(param_names::gat_temporal(layer, head)))};
}

std::vector<std::vector<double>> naive_gat_layer(const std::vector<std::vector<double>>& h, const Adjacency& adj,
                                                 const ParameterSet& params, const ModelConfig& config,
                                                 std::size_t layer) {
  const std::size_t n = h.size(), d = config.hidden_dim;
  std::vector<std::vector<double>> acc(n, std::vector<double>(d, 0.0));
  for (std::size_t k = 0; k < config.heads; ++k) {
    const auto z = transform(h, params.at(param_names::gat_weight(layer, k)));
    const Tensor& as = params.at(param_names::gat_spatial(layer, k));
    const Tensor& at = params.at(param_names::gat_temporal(layer, k));
    for (std::uint32_t i = 0; i < n; ++i) {
      for (const auto& [j, w] : softmax_over(z, i, adj.spatial(i), as))
        for (std::size_t c = 0; c < d; ++c) acc[i][c] += w * z[j][c];
      for (const auto& [j, w] : softmax_over(z, i, adj.temporal(i), at))
        for (std::size_t c = 0; c < d; ++c) acc[i][c] += w * z[j][c];
    }
  }
  for (auto& row : acc)
    for (auto& x : row) x = 1.0 / (1.0 + std::exp(-x / static_cast<double>(config.heads)));
  return acc;
}

std::vector<double> naive_edge_logits(std::span<const double> hi, std::span<const double> hj,
                                      const ParameterSet& params, const RelationSpec& relation) {
  const Tensor& b = params.at(param_names::edge_bias(relation.name));
  std::vector<double> x(hi.size());
  for (std::size_t c = 0; c < x.size(); ++c) x[c] = (hi[c] + hj[c]) / 2.0 + b[c];
  auto hidden = row_times(x, params.at(param_names::head_hidden_weight(relation.name)));
  const Tensor& c1 = params.at(param_names::head_hidden_bias(relation.name));
  for (std::size_t c = 0; c < hidden.size(); ++c) hidden[c] = leaky(hidden[c] + c1[c]);
  auto out = row_times(hidden, params.at(param_names::head_out_weight(relation.name)));
  const Tensor& c2 = params.at(param_names::head_out_bias(relation.name));
  for (std::size_t c = 0; c < out.size(); ++c) out[c] += c2[c];
  return out;
}

Sequence permute_nodes(const Sequence& seq, const std::vector<std::vector<std::uint32_t>>& perm) {
  const auto& g = seq.graph;
  if (perm.size() != g.frame_count()) throw Error("permute_nodes: one permutation per frame is required");
  Sequence out;
  out.graph.feature_dim = g.feature_dim;
  for (std::size_t f = 0; f < g.frame_count(); ++f) {
    const auto& nodes = g.frames[f].nodes;
    if (perm[f].size() != nodes.size()) throw Error("permute_nodes: permutation size mismatch");
    FrameNodes fr;
    fr.nodes.resize(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) fr.nodes[perm[f][k]] = nodes[k];
    out.graph.frames.push_back(std::move(fr));
    out.graph.spatial_edges.push_back(canonical_pairs(nodes.size()));
  }
  for (const auto& e : g.temporal_edges)
    out.graph.temporal_edges.push_back({e.frame, perm[e.frame][e.prev], perm[e.frame + 1][e.next]});
  std::sort(out.graph.temporal_edges.begin(), out.graph.temporal_edges.end());
  const auto& last = perm.back();
  std::vector<std::uint32_t> inverse(last.size());
  for (std::uint32_t k = 0; k < last.size(); ++k) inverse[last[k]] = k;
  for (const auto& t : seq.targets) {
    EdgeTargets nt;
    nt.relation = t.relation;
    nt.class_count = t.class_count;
    nt.kind = t.kind;
    nt.pairs = canonical_pairs(last.size());
    for (const auto& p : nt.pairs) {
      const auto lab = t.label(inverse[p.i], inverse[p.j]);
      nt.mask.push_back(lab ? 1 : 0);
      nt.labels.push_back(lab ? std::vector<double>(lab->begin(), lab->end()) : std::vector<double>{});
    }
    out.targets.push_back(std::move(nt));
  }
  return out;
}

}  // namespace mtd::verify
