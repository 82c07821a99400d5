#pragma once

// Factorized spatio-temporal graph attention with multi-relational edge heads,
// plus a padded recurrent baseline sharing the same edge heads.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mtd/graph.hpp"
#include "mtd/optim.hpp"
#include "mtd/relation.hpp"
#include "mtd/tensor.hpp"

namespace mtd {

enum class ModelKind : std::uint8_t { mtd_gnn, baseline_rnn };

const char* to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view s);

struct ModelConfig {
  ModelKind kind = ModelKind::mtd_gnn;
  std::size_t input_dim = 0;     ///< D, node feature width
  std::size_t hidden_dim = 256;  ///< D'
  std::size_t heads = 5;         ///< K
  std::size_t layers = 1;        ///< L
  std::size_t max_nodes = 6;     ///< padding width of the baseline
  std::vector<RelationSpec> relations;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Parameter names, shared by initialisation, checkpoints and tests.
namespace param_names {
std::string gat_weight(std::size_t layer, std::size_t head);
std::string gat_spatial(std::size_t layer, std::size_t head);
std::string gat_temporal(std::size_t layer, std::size_t head);
std::string edge_bias(std::string_view relation);
std::string head_hidden_weight(std::string_view relation);
std::string head_hidden_bias(std::string_view relation);
std::string head_out_weight(std::string_view relation);
std::string head_out_bias(std::string_view relation);
inline constexpr const char* kRnnInput = "rnn.W_x";
inline constexpr const char* kRnnRecurrent = "rnn.W_h";
inline constexpr const char* kRnnBias = "rnn.b_h";
}  // namespace param_names

struct Model {
  ModelConfig config;
  ParameterSet params;

  /// Glorot-uniform weights, zero biases, drawn from a seeded generator.
  static Model init(const ModelConfig& config, std::uint64_t seed);
};

/// Parameters registered as leaves of one tape, index-aligned with the set.
class BoundParams {
 public:
  BoundParams(Tape& tape, const ParameterSet& params, bool requires_grad = true);
  /// Uses existing variables, one per parameter in set order.
  BoundParams(Tape& tape, const ParameterSet& params, std::vector<Var> vars);

  Var operator[](const std::string& name) const { return vars_[params_->index_of(name)]; }
  Var at(std::size_t i) const { return vars_[i]; }
  std::size_t size() const { return vars_.size(); }

  /// Gradients of every parameter after tape.backward().
  Gradients gradients() const;

 private:
  Tape* tape_;
  const ParameterSet* params_;
  std::vector<Var> vars_;
};

/// Attention coefficients of one head over the directed edge lists. Edge e of
/// a kind connects `center[e]` (the node being updated) to `neighbor[e]`.
struct HeadAttention {
  Var transformed;  ///< h W^k, node_count x D'
  std::vector<std::uint32_t> spatial_center, spatial_neighbor;
  std::vector<std::uint32_t> temporal_center, temporal_neighbor;
  Var alpha;  ///< spatial coefficients, one per spatial edge
  Var gamma;  ///< temporal coefficients, one per temporal edge
};

HeadAttention attention_coefficients(Var h, const Adjacency& adj, const BoundParams& params, std::size_t layer,
                                     std::size_t head);

/// One factorized attention layer: per head, the alpha-weighted sum of
/// spatial neighbours plus the gamma-weighted sum of temporal neighbours, then
/// sigmoid of the head average.
Var fst_gat_layer(Var h, const Adjacency& adj, const BoundParams& params, const ModelConfig& config,
                  std::size_t layer);

struct EdgePredictions {
  std::vector<NodePair> pairs;     ///< canonical pairs of the last frame
  std::vector<Var> logits;         ///< per relation, pairs.size() x C_r
  std::vector<std::string> names;  ///< relation names, aligned with logits
};

/// Edge heads over every unordered pair of `count` consecutive node rows of
/// `h` starting at `offset`: psi_r(0.5 (h_i + h_j) + b_r).
EdgePredictions predict_edges(Var h, std::size_t offset, std::size_t count, const BoundParams& params,
                              const ModelConfig& config);

/// Full model: L attention layers then edge heads over the last frame.
EdgePredictions forward(Tape& tape, const DynamicGraph& graph, const Adjacency& adj, const BoundParams& params,
                        const ModelConfig& config);

/// Padded recurrent baseline: each frame's index-ordered node features are
/// zero-padded to max_nodes slots and fed through a tanh recurrent cell; the
/// final state is split into per-slot vectors for the shared edge heads.
EdgePredictions baseline_padded_rnn(Tape& tape, const DynamicGraph& graph, const BoundParams& params,
                                    const ModelConfig& config);

/// Dispatches on config.kind.
EdgePredictions run_model(Tape& tape, const DynamicGraph& graph, const Adjacency& adj, const BoundParams& params,
                          const ModelConfig& config);

}  // namespace mtd
