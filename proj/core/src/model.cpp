#include "mtd/model.hpp"

#include <cmath>
#include <set>

#include "mtd/rng.hpp"

namespace mtd {

const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::mtd_gnn: return "mtd-gnn";
    case ModelKind::baseline_rnn: return "baseline-rnn";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "mtd-gnn") return ModelKind::mtd_gnn;
  if (s == "baseline-rnn") return ModelKind::baseline_rnn;
  throw ConfigError("unknown model kind '" + std::string(s) + "' (expected mtd-gnn or baseline-rnn)");
}

void ModelConfig::validate() const {
  if (input_dim == 0) throw ConfigError("model: input_dim must be positive");
  if (hidden_dim == 0) throw ConfigError("model: hidden_dim must be positive");
  if (heads == 0) throw ConfigError("model: heads must be positive");
  if (layers == 0) throw ConfigError("model: layers must be positive");
  if (kind == ModelKind::baseline_rnn && max_nodes < 2) throw ConfigError("model: max_nodes must be >= 2");
  if (relations.empty()) throw ConfigError("model: at least one relation is required");
  std::set<std::string> seen;
  for (const auto& r : relations) {
    r.validate();
    if (!seen.insert(r.name).second) throw ConfigError("model: relation '" + r.name + "' listed twice");
  }
}

namespace param_names {
namespace {
std::string gat(std::size_t l, std::size_t k, const char* leaf) {
  return "gat.l" + std::to_string(l) + ".h" + std::to_string(k) + "." + leaf;
}
std::string rel(std::string_view r, const char* leaf) { return "rel." + std::string(r) + "." + leaf; }
}  // namespace
std::string gat_weight(std::size_t l, std::size_t k) { return gat(l, k, "W"); }
std::string gat_spatial(std::size_t l, std::size_t k) { return gat(l, k, "a_s"); }
std::string gat_temporal(std::size_t l, std::size_t k) { return gat(l, k, "a_t"); }
std::string edge_bias(std::string_view r) { return rel(r, "b"); }
std::string head_hidden_weight(std::string_view r) { return rel(r, "W1"); }
std::string head_hidden_bias(std::string_view r) { return rel(r, "c1"); }
std::string head_out_weight(std::string_view r) { return rel(r, "W2"); }
std::string head_out_bias(std::string_view r) { return rel(r, "c2"); }
}  // namespace param_names

namespace {

Tensor glorot(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(Shape{fan_in, fan_out});
  for (auto& x : t.data()) x = rng.uniform(-limit, limit);
  return t;
}

}  // namespace

Model Model::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model m;
  m.config = config;
  Rng rng(seed);
  const std::size_t hd = config.hidden_dim;
  if (config.kind == ModelKind::mtd_gnn) {
    for (std::size_t l = 0; l < config.layers; ++l) {
      const std::size_t in = l == 0 ? config.input_dim : hd;
      for (std::size_t k = 0; k < config.heads; ++k) {
        m.params.add(param_names::gat_weight(l, k), glorot(rng, in, hd));
        m.params.add(param_names::gat_spatial(l, k), glorot(rng, 2 * hd, 1));
        m.params.add(param_names::gat_temporal(l, k), glorot(rng, 2 * hd, 1));
      }
    }
  } else {
    const std::size_t slots = config.max_nodes;
    m.params.add(param_names::kRnnInput, glorot(rng, slots * config.input_dim, slots * hd));
    m.params.add(param_names::kRnnRecurrent, glorot(rng, slots * hd, slots * hd));
    m.params.add(param_names::kRnnBias, Tensor(Shape{slots * hd}, 0.0));
  }
  for (const auto& r : config.relations) {
    m.params.add(param_names::edge_bias(r.name), Tensor(Shape{hd}, 0.0));
    m.params.add(param_names::head_hidden_weight(r.name), glorot(rng, hd, hd));
    m.params.add(param_names::head_hidden_bias(r.name), Tensor(Shape{hd}, 0.0));
    m.params.add(param_names::head_out_weight(r.name), glorot(rng, hd, r.class_count));
    m.params.add(param_names::head_out_bias(r.name), Tensor(Shape{r.class_count}, 0.0));
  }
  return m;
}

BoundParams::BoundParams(Tape& tape, const ParameterSet& params, bool requires_grad) : tape_(&tape), params_(&params) {
  vars_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) vars_.push_back(tape.leaf(params.value(i), requires_grad));
}

BoundParams::BoundParams(Tape& tape, const ParameterSet& params, std::vector<Var> vars)
    : tape_(&tape), params_(&params), vars_(std::move(vars)) {
  if (vars_.size() != params.size())
    throw Error("BoundParams: " + std::to_string(vars_.size()) + " variables for " + std::to_string(params.size()) +
                " parameters");
}

Gradients BoundParams::gradients() const {
  Gradients g;
  for (std::size_t i = 0; i < vars_.size(); ++i) g.emplace(params_->name(i), tape_->grad(vars_[i]));
  return g;
}

namespace {

struct EdgeLists {
  std::vector<std::uint32_t> center, neighbor;
  std::vector<std::vector<std::uint32_t>> segments;
};

EdgeLists directed_edges(const Adjacency& adj, EdgeKind kind) {
  EdgeLists e;
  for (std::uint32_t i = 0; i < adj.node_count(); ++i) {
    const auto& nb = kind == EdgeKind::spatial ? adj.spatial(i) : adj.temporal(i);
    if (nb.empty()) continue;
    std::vector<std::uint32_t> seg;
    for (auto j : nb) {
      seg.push_back(static_cast<std::uint32_t>(e.center.size()));
      e.center.push_back(i);
      e.neighbor.push_back(j);
    }
    e.segments.push_back(std::move(seg));
  }
  return e;
}

// leaky_relu(a . [z_center || z_neighbor]) normalised per center node.
Var edge_coefficients(Var z, const EdgeLists& edges, Var attn) {
  Var zc = gather_rows(z, edges.center);
  Var zn = gather_rows(z, edges.neighbor);
  const Var parts[] = {zc, zn};
  Var logits = leaky_relu(matmul(concat(parts), attn));
  return segment_softmax(logits, edges.segments);
}

// sum over edges of coeff[e] * z[neighbor[e]], scattered to center[e].
Var aggregate(Var z, const EdgeLists& edges, Var coeff, std::size_t nodes) {
  return scatter_add_rows(scale_rows(gather_rows(z, edges.neighbor), coeff), edges.center, nodes);
}

}  // namespace

HeadAttention attention_coefficients(Var h, const Adjacency& adj, const BoundParams& params, std::size_t layer,
                                     std::size_t head) {
  HeadAttention out;
  out.transformed = matmul(h, params[param_names::gat_weight(layer, head)]);
  auto s = directed_edges(adj, EdgeKind::spatial);
  auto t = directed_edges(adj, EdgeKind::temporal);
  out.alpha = edge_coefficients(out.transformed, s, params[param_names::gat_spatial(layer, head)]);
  out.gamma = edge_coefficients(out.transformed, t, params[param_names::gat_temporal(layer, head)]);
  out.spatial_center = std::move(s.center);
  out.spatial_neighbor = std::move(s.neighbor);
  out.temporal_center = std::move(t.center);
  out.temporal_neighbor = std::move(t.neighbor);
  return out;
}

Var fst_gat_layer(Var h, const Adjacency& adj, const BoundParams& params, const ModelConfig& config,
                  std::size_t layer) {
  const std::size_t n = adj.node_count();
  if (h.value().rows() != n || h.value().rank() != 2)
    throw ShapeError("fst_gat_layer: node states " + to_string(h.shape()) + " do not match " + std::to_string(n) + " nodes");
  const auto spatial = directed_edges(adj, EdgeKind::spatial);
  const auto temporal = directed_edges(adj, EdgeKind::temporal);
  Var total;
  for (std::size_t k = 0; k < config.heads; ++k) {
    Var z = matmul(h, params[param_names::gat_weight(layer, k)]);
    Var alpha = edge_coefficients(z, spatial, params[param_names::gat_spatial(layer, k)]);
    Var gamma = edge_coefficients(z, temporal, params[param_names::gat_temporal(layer, k)]);
    Var hk = add(aggregate(z, spatial, alpha, n), aggregate(z, temporal, gamma, n));
    total = total.valid() ? add(total, hk) : hk;
  }
  return sigmoid(scale(total, 1.0 / static_cast<double>(config.heads)));
}

EdgePredictions predict_edges(Var h, std::size_t offset, std::size_t count, const BoundParams& params,
                              const ModelConfig& config) {
  EdgePredictions out;
  out.pairs = canonical_pairs(count);
  for (const auto& r : config.relations) out.names.push_back(r.name);
  if (out.pairs.empty()) {
    out.logits.assign(config.relations.size(), Var{});
    return out;
  }
  std::vector<std::uint32_t> gi, gj;
  for (const auto& p : out.pairs) {
    gi.push_back(static_cast<std::uint32_t>(offset + p.i));
    gj.push_back(static_cast<std::uint32_t>(offset + p.j));
  }
  Var pair = scale(add(gather_rows(h, gi), gather_rows(h, gj)), 0.5);
  for (const auto& r : config.relations) {
    Var x = add_row(pair, params[param_names::edge_bias(r.name)]);
    x = leaky_relu(add_row(matmul(x, params[param_names::head_hidden_weight(r.name)]),
                           params[param_names::head_hidden_bias(r.name)]));
    x = add_row(matmul(x, params[param_names::head_out_weight(r.name)]), params[param_names::head_out_bias(r.name)]);
    out.logits.push_back(x);
  }
  return out;
}

EdgePredictions forward(Tape& tape, const DynamicGraph& graph, const Adjacency& adj, const BoundParams& params,
                        const ModelConfig& config) {
  if (graph.frames.empty()) throw Error("forward: graph has no frames");
  if (graph.feature_dim != config.input_dim)
    throw ShapeError("forward: graph feature_dim " + std::to_string(graph.feature_dim) + " does not match model input_dim " +
                     std::to_string(config.input_dim));
  Var h = tape.constant(graph.feature_matrix());
  for (std::size_t l = 0; l < config.layers; ++l) h = fst_gat_layer(h, adj, params, config, l);
  const std::size_t last = graph.frame_count() - 1;
  return predict_edges(h, graph.frame_offset(last), graph.frames[last].size(), params, config);
}

EdgePredictions baseline_padded_rnn(Tape& tape, const DynamicGraph& graph, const BoundParams& params,
                                    const ModelConfig& config) {
  if (graph.frames.empty()) throw Error("baseline_padded_rnn: graph has no frames");
  if (graph.feature_dim != config.input_dim)
    throw ShapeError("baseline_padded_rnn: graph feature_dim " + std::to_string(graph.feature_dim) +
                     " does not match model input_dim " + std::to_string(config.input_dim));
  const std::size_t slots = config.max_nodes, d = config.input_dim, hd = config.hidden_dim;
  Var wx = params[param_names::kRnnInput];
  Var wh = params[param_names::kRnnRecurrent];
  Var bh = params[param_names::kRnnBias];
  Var state;
  for (std::size_t f = 0; f < graph.frame_count(); ++f) {
    const auto& frame = graph.frames[f];
    if (frame.size() > slots)
      throw Error("baseline_padded_rnn: frame " + std::to_string(f) + " has " + std::to_string(frame.size()) +
                  " nodes, max_nodes is " + std::to_string(slots));
    Tensor x(Shape{1, slots * d}, 0.0);
    for (std::size_t s = 0; s < frame.size(); ++s)
      std::copy(frame.nodes[s].features.begin(), frame.nodes[s].features.end(),
                x.data().begin() + static_cast<std::ptrdiff_t>(s * d));
    Var pre = matmul(tape.constant(std::move(x)), wx);
    if (state.valid()) pre = add(pre, matmul(state, wh));
    state = tanh(add_row(pre, bh));
  }
  Var per_slot = reshape(state, Shape{slots, hd});
  return predict_edges(per_slot, 0, graph.last_frame().size(), params, config);
}

EdgePredictions run_model(Tape& tape, const DynamicGraph& graph, const Adjacency& adj, const BoundParams& params,
                          const ModelConfig& config) {
  if (config.kind == ModelKind::baseline_rnn) return baseline_padded_rnn(tape, graph, params, config);
  return forward(tape, graph, adj, params, config);
}

}  // namespace mtd
