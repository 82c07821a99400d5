#pragma once

// Slow, direct reference implementations used to cross-check the library.
// None of them share code with the routines they check.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mtd/graph.hpp"
#include "mtd/hungarian.hpp"
#include "mtd/model.hpp"

namespace mtd::verify {

/// Triple-loop product of row-major a[m, k] and b[k, n].
std::vector<double> naive_matmul(std::span<const double> a, std::span<const double> b, std::size_t m, std::size_t k,
                                 std::size_t n);

/// Minimum over every partial one-to-one matching, by exhaustive search.
double brute_force_matching(const CostMatrix& cost, double unmatched_penalty);

/// Minimum of sum_i cost(i, perm(i)) over all permutations of a square matrix.
double brute_force_permutation(const CostMatrix& cost);

/// ROC AUC by sweeping every distinct score as a threshold and integrating
/// the ROC polyline with the trapezoid rule.
std::optional<double> sweep_auc(std::span<const double> scores, std::span<const double> labels);

/// AP by sweeping every distinct score as a threshold: sum of recall
/// increments times precision at that threshold.
std::optional<double> sweep_ap(std::span<const double> scores, std::span<const double> labels);

/// One attention layer evaluated with scalar loops straight from the
/// parameter tensors and neighbour lists.
std::vector<std::vector<double>> naive_gat_layer(const std::vector<std::vector<double>>& h, const Adjacency& adj,
                                                 const ParameterSet& params, const ModelConfig& config,
                                                 std::size_t layer);

/// Attention coefficients of one head for `center`, as (neighbour, weight)
/// for spatial then temporal neighbours.
struct NaiveCoefficients {
  std::vector<std::pair<std::uint32_t, double>> spatial, temporal;
};
NaiveCoefficients naive_coefficients(const std::vector<std::vector<double>>& h, const Adjacency& adj,
                                     const ParameterSet& params, std::size_t layer, std::size_t head,
                                     std::uint32_t center);

/// Edge-head logits of a relation for node states hi, hj (in that order).
std::vector<double> naive_edge_logits(std::span<const double> hi, std::span<const double> hj,
                                      const ParameterSet& params, const RelationSpec& relation);

/// Relabels the nodes of every frame: node `k` of frame `f` moves to position
/// perm[f][k]. Edges and targets are remapped consistently.
Sequence permute_nodes(const Sequence& seq, const std::vector<std::vector<std::uint32_t>>& perm);

}  // namespace mtd::verify
