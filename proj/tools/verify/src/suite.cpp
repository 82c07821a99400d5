#include "mtd/verify/suite.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>
#include <utility>

#include "mtd/hungarian.hpp"
#include "mtd/loss.hpp"
#include "mtd/metrics.hpp"
#include "mtd/rng.hpp"
#include "mtd/synth.hpp"
#include "mtd/verify/oracles.hpp"

namespace mtd::verify {

namespace {

using Outcome = std::pair<bool, std::string>;

template <typename F>
CheckResult timed(std::string name, int criterion, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult r;
  r.name = std::move(name);
  r.criterion = criterion;
  try {
    auto [ok, detail] = body();
    r.passed = ok;
    r.detail = std::move(detail);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& x : t.data()) x = rng.uniform(lo, hi);
  return t;
}

// Values bounded away from zero, for rules with a kink at the origin.
Tensor off_zero_tensor(Rng& rng, Shape shape) {
  Tensor t(std::move(shape));
  for (auto& x : t.data()) x = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.1, 1.0);
  return t;
}

// sum(out * R) for a fixed random R, so every output element matters.
LossBuilder projected(std::function<Var(std::span<const Var>)> op, Shape out_shape, Rng& rng) {
  Tensor r = random_tensor(rng, std::move(out_shape));
  return [op = std::move(op), r](Tape& tape, std::span<const Var> in) { return sum(mul(op(in), tape.constant(r))); };
}

// Same contraction through matmul, for the mul case itself: a sign fault in
// mul would otherwise flip both factors of the chain rule and cancel.
LossBuilder projected_by_matmul(std::function<Var(std::span<const Var>)> op, Shape out_shape, Rng& rng) {
  const std::size_t n = element_count(out_shape);
  Tensor r = random_tensor(rng, {n, 1});
  return [op = std::move(op), r, n](Tape& tape, std::span<const Var> in) {
    return sum(matmul(reshape(op(in), {1, n}), tape.constant(r)));
  };
}

}  // namespace

std::vector<Primitive> differentiable_primitives() {
  std::vector<Primitive> out;
  for (int p = static_cast<int>(Primitive::matmul); p <= static_cast<int>(Primitive::reshape); ++p)
    out.push_back(static_cast<Primitive>(p));
  return out;
}

std::optional<Primitive> parse_primitive(std::string_view name) {
  for (auto p : differentiable_primitives())
    if (name == primitive_name(p)) return p;
  return std::nullopt;
}

std::vector<PrimitiveCase> primitive_cases(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PrimitiveCase> cases;
  auto add_case = [&](std::string name, Primitive p, std::vector<Tensor> inputs, LossBuilder build) {
    cases.push_back({std::move(name), p, std::move(inputs), std::move(build)});
  };
  auto unary = [&](std::string name, Primitive p, Tensor x, Var (*f)(Var)) {
    const Shape s = x.shape();
    add_case(std::move(name), p, {std::move(x)}, projected([f](std::span<const Var> v) { return f(v[0]); }, s, rng));
  };

  add_case("matmul", Primitive::matmul, {random_tensor(rng, {3, 4}), random_tensor(rng, {4, 2})},
           projected([](std::span<const Var> v) { return matmul(v[0], v[1]); }, {3, 2}, rng));
  add_case("add", Primitive::add, {random_tensor(rng, {3, 4}), random_tensor(rng, {3, 4})},
           projected([](std::span<const Var> v) { return add(v[0], v[1]); }, {3, 4}, rng));
  add_case("add_row", Primitive::add_row, {random_tensor(rng, {3, 4}), random_tensor(rng, {4})},
           projected([](std::span<const Var> v) { return add_row(v[0], v[1]); }, {3, 4}, rng));
  add_case("sub", Primitive::sub, {random_tensor(rng, {3, 4}), random_tensor(rng, {3, 4})},
           projected([](std::span<const Var> v) { return sub(v[0], v[1]); }, {3, 4}, rng));
  add_case("mul", Primitive::mul, {random_tensor(rng, {3, 4}), random_tensor(rng, {3, 4})},
           projected_by_matmul([](std::span<const Var> v) { return mul(v[0], v[1]); }, {3, 4}, rng));
  add_case("scale_rows", Primitive::scale_rows, {random_tensor(rng, {3, 4}), random_tensor(rng, {3})},
           projected([](std::span<const Var> v) { return scale_rows(v[0], v[1]); }, {3, 4}, rng));
  add_case("scale", Primitive::scale, {random_tensor(rng, {3, 4})},
           projected([](std::span<const Var> v) { return scale(v[0], -1.7); }, {3, 4}, rng));
  add_case("concat", Primitive::concat, {random_tensor(rng, {3, 2}), random_tensor(rng, {3, 3})},
           projected([](std::span<const Var> v) { return concat(v); }, {3, 5}, rng));
  unary("sigmoid", Primitive::sigmoid, random_tensor(rng, {3, 4}, -3, 3), [](Var a) { return sigmoid(a); });
  unary("leaky_relu", Primitive::leaky_relu, off_zero_tensor(rng, {3, 4}), [](Var a) { return leaky_relu(a); });
  unary("tanh", Primitive::tanh, random_tensor(rng, {3, 4}, -2, 2), [](Var a) { return tanh(a); });
  unary("exp", Primitive::exp, random_tensor(rng, {3, 4}), [](Var a) { return exp(a); });
  unary("log", Primitive::log, random_tensor(rng, {3, 4}, 0.5, 2.0), [](Var a) { return log(a); });
  add_case("mean(axis 0)", Primitive::mean, {random_tensor(rng, {3, 4})},
           projected([](std::span<const Var> v) { return mean(v[0], 0); }, {4}, rng));
  add_case("mean(axis 1)", Primitive::mean, {random_tensor(rng, {3, 4})},
           projected([](std::span<const Var> v) { return mean(v[0], 1); }, {3}, rng));
  add_case("sum", Primitive::sum, {random_tensor(rng, {3, 4})},
           [](Tape&, std::span<const Var> v) { return scale(sum(v[0]), 0.8); });
  add_case("segment_softmax", Primitive::segment_softmax, {random_tensor(rng, {7}, -2, 2)},
           projected([](std::span<const Var> v) { return segment_softmax(v[0], {{0, 1, 2}, {3, 4}, {6}}); }, {7}, rng));
  add_case("gather_rows", Primitive::gather_rows, {random_tensor(rng, {4, 3})},
           projected([](std::span<const Var> v) {
             const std::uint32_t idx[] = {2, 0, 2, 3};
             return gather_rows(v[0], idx);
           }, {4, 3}, rng));
  add_case("scatter_add_rows", Primitive::scatter_add_rows, {random_tensor(rng, {4, 3})},
           projected([](std::span<const Var> v) {
             const std::uint32_t idx[] = {1, 0, 1, 3};
             return scatter_add_rows(v[0], idx, 5);
           }, {5, 3}, rng));
  {
    std::vector<double> y, w;
    for (int i = 0; i < 8; ++i) {
      y.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
      w.push_back(rng.uniform(0.2, 1.5));
    }
    add_case("bce_with_logits", Primitive::bce_with_logits, {random_tensor(rng, {4, 2}, -3, 3)},
             [y, w](Tape&, std::span<const Var> v) { return bce_with_logits(v[0], y, w); });
  }
  {
    std::vector<std::uint32_t> cls;
    std::vector<double> w;
    for (int i = 0; i < 4; ++i) {
      cls.push_back(static_cast<std::uint32_t>(rng.integer(0, 2)));
      w.push_back(rng.uniform(0.2, 1.5));
    }
    add_case("softmax_cross_entropy", Primitive::softmax_cross_entropy, {random_tensor(rng, {4, 3}, -2, 2)},
             [cls, w](Tape&, std::span<const Var> v) { return softmax_cross_entropy(v[0], cls, w); });
  }
  add_case("reshape", Primitive::reshape, {random_tensor(rng, {3, 4})},
           projected([](std::span<const Var> v) { return reshape(v[0], {2, 6}); }, {2, 6}, rng));
  return cases;
}

Sequence tiny_sequence(std::size_t feature_dim, std::uint64_t seed) {
  Rng rng(seed);
  Sequence s;
  s.graph.feature_dim = feature_dim;
  std::int64_t id = 0;
  for (int f = 0; f < 2; ++f) {
    FrameNodes fr;
    for (int k = 0; k < 3; ++k) {
      Node n;
      n.node_id = id++;
      for (std::size_t c = 0; c < feature_dim; ++c) n.features.push_back(rng.normal());
      fr.nodes.push_back(std::move(n));
    }
    s.graph.frames.push_back(std::move(fr));
    s.graph.spatial_edges.push_back(canonical_pairs(3));
  }
  s.graph.temporal_edges = {{0, 0, 1}, {0, 1, 2}, {0, 2, 0}};
  const auto pairs = canonical_pairs(3);
  auto target = [&](std::string name, std::size_t classes, LabelKind kind, std::vector<std::vector<double>> labels,
                    std::vector<char> mask) {
    EdgeTargets t;
    t.relation = std::move(name);
    t.class_count = classes;
    t.kind = kind;
    t.pairs = pairs;
    t.mask = std::move(mask);
    for (std::size_t k = 0; k < labels.size(); ++k)
      if (!t.mask[k]) labels[k].clear();
    t.labels = std::move(labels);
    s.targets.push_back(std::move(t));
  };
  target(kCollision, 1, LabelKind::binary, {{1}, {0}, {0}}, {1, 1, 1});
  target(kRelativeMotion, 1, LabelKind::binary, {{0}, {1}, {1}}, {1, 1, 0});
  target("attributes", 2, LabelKind::multi_label, {{1, 0}, {0, 1}, {1, 1}}, {1, 1, 1});
  target("category", 3, LabelKind::categorical, {{0}, {2}, {1}}, {1, 1, 1});
  return s;
}

std::vector<RelationSpec> tiny_relations() {
  return {RelationSpec{kCollision, 1, LabelKind::binary, LossMode::prioritized_bce, 1.0},
          RelationSpec{kRelativeMotion, 1, LabelKind::binary, LossMode::bce, 0.7},
          RelationSpec{"attributes", 2, LabelKind::multi_label, LossMode::bce, 1.0},
          RelationSpec{"category", 3, LabelKind::categorical, LossMode::cross_entropy, 1.3}};
}

GradCheck model_gradient_check(ModelKind kind, std::uint64_t seed) {
  const Sequence s = tiny_sequence(4, seed);
  ModelConfig mc;
  mc.kind = kind;
  mc.input_dim = 4;
  mc.hidden_dim = 3;
  mc.heads = 2;
  mc.layers = 2;
  mc.max_nodes = 3;
  mc.relations = tiny_relations();
  const Model m = Model::init(mc, seed);
  const Adjacency adj = Adjacency::from_graph(s.graph);
  std::vector<Tensor> inputs;
  for (std::size_t i = 0; i < m.params.size(); ++i) inputs.push_back(m.params.value(i));
  return check_gradients(
      [&](Tape& tape, std::span<const Var> v) {
        const BoundParams bp(tape, m.params, std::vector<Var>(v.begin(), v.end()));
        return total_loss(tape, run_model(tape, s.graph, adj, bp, mc), s.targets, mc.relations);
      },
      inputs, kGradStep);
}

std::vector<CheckResult> gradient_suite(std::uint64_t seed) {
  std::vector<CheckResult> out;
  for (auto& c : primitive_cases(seed)) {
    out.push_back(timed("gradient." + c.name, 1, [&]() -> Outcome {
      const auto r = check_gradients(c.build, c.inputs, kGradStep);
      return {r.max_error <= kGradTolerance, fmt("max relative error %.2e", r.max_error)};
    }));
  }
  for (auto kind : {ModelKind::mtd_gnn, ModelKind::baseline_rnn}) {
    out.push_back(timed(std::string("gradient.model.") + to_string(kind), 1, [&]() -> Outcome {
      const auto r = model_gradient_check(kind, seed);
      return {r.max_error <= kGradTolerance,
              fmt("max relative error %.2e over ", r.max_error) + std::to_string(r.relative_error.size()) +
                  " parameter tensors"};
    }));
  }
  return out;
}

namespace {

GeneratorConfig structural_generator() {
  GeneratorConfig g;
  g.feature_dim = 8;
  g.appearance_dim = 4;
  g.min_objects = 2;
  g.max_objects = 6;
  g.miss_probability = 0.1;
  g.false_positive_rate = 0.3;
  return g;
}

ModelConfig structural_model(std::size_t input_dim) {
  ModelConfig mc;
  mc.input_dim = input_dim;
  mc.hidden_dim = 6;
  mc.heads = 3;
  mc.layers = 2;
  mc.relations = {RelationSpec{kCollision, 1, LabelKind::binary, LossMode::prioritized_bce, 1.0},
                  RelationSpec{"attributes", 2, LabelKind::multi_label, LossMode::bce, 1.0}};
  return mc;
}

std::vector<std::vector<double>> rows_of(const Tensor& t) {
  std::vector<std::vector<double>> out(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) out[r].assign(t.data().begin() + static_cast<std::ptrdiff_t>(r * t.cols()),
                                                         t.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * t.cols()));
  return out;
}

std::string edge_error(const DynamicGraph& g, std::size_t index) {
  const Adjacency adj = Adjacency::from_graph(g);
  for (std::uint32_t u = 0; u < adj.node_count(); ++u) {
    for (auto v : adj.spatial(u))
      if (std::binary_search(adj.temporal(u).begin(), adj.temporal(u).end(), v))
        return "graph " + std::to_string(index) + ": nodes " + std::to_string(u) + "," + std::to_string(v) +
               " are joined by both edge kinds";
  }
  for (std::size_t f = 0; f < g.frame_count(); ++f) {
    const auto& e = g.spatial_edges[f];
    if (e != canonical_pairs(g.frames[f].size()))
      return "graph " + std::to_string(index) + ": frame " + std::to_string(f) + " spatial edges are not all pairs";
  }
  std::set<std::pair<std::size_t, std::uint32_t>> prev_used, next_used;
  for (const auto& e : g.temporal_edges) {
    if (e.frame + 1 >= g.frame_count() || e.prev >= g.frames[e.frame].size() || e.next >= g.frames[e.frame + 1].size())
      return "graph " + std::to_string(index) + ": temporal edge out of range";
    if (!prev_used.insert({e.frame, e.prev}).second || !next_used.insert({e.frame + 1, e.next}).second)
      return "graph " + std::to_string(index) + ": a node has two temporal links to one neighbouring frame";
  }
  return {};
}

}  // namespace

std::vector<CheckResult> structural_suite(std::uint64_t seed) {
  std::vector<CheckResult> out;
  const GeneratorConfig g = structural_generator();
  const Tensor projection = feature_projection(g, seed);
  std::vector<Sequence> sample;
  out.push_back(timed("structure.edge_kinds_disjoint", 2, [&]() -> Outcome {
    for (std::size_t i = 0; i < 1000; ++i) {
      auto gen = generate_sequence(g, seed, i, projection);
      if (auto err = edge_error(gen.sequence.graph, i); !err.empty()) return {false, err};
      if (sample.size() < 40) sample.push_back(std::move(gen.sequence));
    }
    return {true, "1000 generated graphs"};
  }));
  const ModelConfig mc = structural_model(g.feature_dim);
  const Model model = Model::init(mc, seed);

  out.push_back(timed("structure.attention_rows_sum_to_one", 2, [&]() -> Outcome {
    double worst = 0.0, worst_naive = 0.0;
    for (const auto& s : sample) {
      const Adjacency adj = Adjacency::from_graph(s.graph);
      Tape tape;
      const BoundParams bp(tape, model.params, false);
      Var h = tape.constant(s.graph.feature_matrix());
      for (std::size_t l = 0; l < mc.layers; ++l) {
        const auto rows = rows_of(h.value());
        for (std::size_t k = 0; k < mc.heads; ++k) {
          const auto att = attention_coefficients(h, adj, bp, l, k);
          std::vector<double> srow(adj.node_count(), 0.0), trow(adj.node_count(), 0.0);
          for (std::size_t e = 0; e < att.spatial_center.size(); ++e) srow[att.spatial_center[e]] += att.alpha.value()[e];
          for (std::size_t e = 0; e < att.temporal_center.size(); ++e) trow[att.temporal_center[e]] += att.gamma.value()[e];
          for (std::uint32_t i = 0; i < adj.node_count(); ++i) {
            if (!adj.spatial(i).empty()) worst = std::max(worst, std::abs(srow[i] - 1.0));
            if (!adj.temporal(i).empty()) worst = std::max(worst, std::abs(trow[i] - 1.0));
          }
          for (std::size_t e = 0; e < att.spatial_center.size(); ++e) {
            const auto naive = naive_coefficients(rows, adj, model.params, l, k, att.spatial_center[e]);
            for (const auto& [j, w] : naive.spatial)
              if (j == att.spatial_neighbor[e]) worst_naive = std::max(worst_naive, std::abs(w - att.alpha.value()[e]));
          }
          for (std::size_t e = 0; e < att.temporal_center.size(); ++e) {
            const auto naive = naive_coefficients(rows, adj, model.params, l, k, att.temporal_center[e]);
            for (const auto& [j, w] : naive.temporal)
              if (j == att.temporal_neighbor[e]) worst_naive = std::max(worst_naive, std::abs(w - att.gamma.value()[e]));
          }
        }
        h = fst_gat_layer(h, adj, bp, mc, l);
      }
    }
    return {worst <= kStructTolerance && worst_naive <= kStructTolerance,
            fmt("max |row sum - 1| %.2e", worst) + fmt(", max |coefficient - naive| %.2e", worst_naive)};
  }));

  out.push_back(timed("structure.layer_matches_naive", 2, [&]() -> Outcome {
    double worst = 0.0;
    for (const auto& s : sample) {
      const Adjacency adj = Adjacency::from_graph(s.graph);
      Tape tape;
      const BoundParams bp(tape, model.params, false);
      Var h = tape.constant(s.graph.feature_matrix());
      auto naive = rows_of(h.value());
      for (std::size_t l = 0; l < mc.layers; ++l) {
        h = fst_gat_layer(h, adj, bp, mc, l);
        naive = naive_gat_layer(naive, adj, model.params, mc, l);
        for (std::size_t i = 0; i < naive.size(); ++i)
          for (std::size_t c = 0; c < naive[i].size(); ++c) worst = std::max(worst, std::abs(naive[i][c] - h.value().at(i, c)));
      }
    }
    return {worst <= kStructTolerance, fmt("max |layer - naive| %.2e", worst)};
  }));

  out.push_back(timed("structure.edge_symmetry", 2, [&]() -> Outcome {
    double worst = 0.0;
    for (const auto& s : sample) {
      const Adjacency adj = Adjacency::from_graph(s.graph);
      Tape tape;
      const BoundParams bp(tape, model.params, false);
      Var h = tape.constant(s.graph.feature_matrix());
      for (std::size_t l = 0; l < mc.layers; ++l) h = fst_gat_layer(h, adj, bp, mc, l);
      const std::size_t last = s.graph.frame_count() - 1, off = s.graph.frame_offset(last);
      const auto preds = predict_edges(h, off, s.graph.frames[last].size(), bp, mc);
      const auto rows = rows_of(h.value());
      for (std::size_t r = 0; r < mc.relations.size(); ++r) {
        for (std::size_t p = 0; p < preds.pairs.size(); ++p) {
          const auto swapped = naive_edge_logits(rows[off + preds.pairs[p].j], rows[off + preds.pairs[p].i], model.params,
                                                 mc.relations[r]);
          for (std::size_t c = 0; c < swapped.size(); ++c)
            worst = std::max(worst, std::abs(swapped[c] - preds.logits[r].value().at(p, c)));
        }
      }
    }
    return {worst <= kStructTolerance, fmt("max |E(i,j) - E(j,i)| %.2e", worst)};
  }));

  out.push_back(timed("structure.permutation_equivariance", 2, [&]() -> Outcome {
    Rng rng(hash_seed(seed, 0x7065726dULL));
    double worst = 0.0;
    for (const auto& s : sample) {
      std::vector<std::vector<std::uint32_t>> perm;
      for (const auto& fr : s.graph.frames) {
        std::vector<std::uint32_t> p(fr.size());
        for (std::uint32_t k = 0; k < p.size(); ++k) p[k] = k;
        rng.shuffle(p);
        perm.push_back(std::move(p));
      }
      const Sequence t = permute_nodes(s, perm);
      auto run = [&](const Sequence& q) {
        Tape tape;
        const BoundParams bp(tape, model.params, false);
        const auto preds = forward(tape, q.graph, Adjacency::from_graph(q.graph), bp, mc);
        std::vector<Tensor> logits;
        for (const auto& v : preds.logits) logits.push_back(v.valid() ? v.value() : Tensor{});
        return std::make_pair(preds.pairs, logits);
      };
      const auto [pa, la] = run(s);
      const auto [pb, lb] = run(t);
      const auto& last = perm.back();
      for (std::size_t p = 0; p < pa.size(); ++p) {
        std::uint32_t i = last[pa[p].i], j = last[pa[p].j];
        if (i > j) std::swap(i, j);
        const auto q = static_cast<std::size_t>(std::find(pb.begin(), pb.end(), NodePair{i, j}) - pb.begin());
        for (std::size_t r = 0; r < la.size(); ++r)
          for (std::size_t c = 0; c < la[r].cols(); ++c) worst = std::max(worst, std::abs(la[r].at(p, c) - lb[r].at(q, c)));
      }
    }
    return {worst <= kStructTolerance, fmt("max |f(Px) - Pf(x)| %.2e", worst)};
  }));
  return out;
}

std::vector<CheckResult> hungarian_suite(std::uint64_t seed) {
  std::vector<CheckResult> out;
  out.push_back(timed("hungarian.square_vs_permutations", 3, [&]() -> Outcome {
    Rng rng(seed);
    double worst = 0.0;
    for (std::size_t n = 2; n <= 6; ++n) {
      for (int rep = 0; rep < 100; ++rep) {
        CostMatrix c(n, n);
        for (auto& x : c.values) x = rng.uniform(0.0, 10.0);
        const auto a = hungarian_match(c, 1e3);
        if (a.pairs.size() != n) return {false, "size " + std::to_string(n) + ": assignment is not a permutation"};
        double s = 0.0;
        for (const auto& [r, col] : a.pairs) s += c(r, col);
        const double ref = brute_force_permutation(c);
        worst = std::max({worst, std::abs(a.total_cost - ref), std::abs(s - ref)});
        if (worst > 1e-9)
          return {false, "size " + std::to_string(n) + fmt(": cost differs from brute force by %.3e", worst)};
      }
    }
    return {true, fmt("500 matrices, max |cost - brute force| %.2e", worst)};
  }));
  out.push_back(timed("hungarian.partial_vs_exhaustive", 3, [&]() -> Outcome {
    Rng rng(hash_seed(seed, 1));
    double worst = 0.0;
    for (std::size_t n = 2; n <= 6; ++n) {
      for (std::size_t cols : {n - 1, n, n + 1}) {
        for (int rep = 0; rep < 30; ++rep) {
          CostMatrix c(n, cols);
          for (auto& x : c.values) x = rng.uniform(0.0, 1.0);
          const auto a = hungarian_match(c, 0.35);
          worst = std::max(worst, std::abs(a.total_cost - brute_force_matching(c, 0.35)));
        }
      }
    }
    return {worst <= 1e-9, fmt("450 rectangular matrices, max |cost - exhaustive| %.2e", worst)};
  }));
  return out;
}

std::vector<CheckResult> loss_suite(std::uint64_t seed) {
  std::vector<CheckResult> out;
  out.push_back(timed("loss.prioritized_o1_equals_bce", 4, [&]() -> Outcome {
    Rng rng(seed);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const double p = rng.uniform(), y = rng.bernoulli(0.5) ? 1.0 : 0.0;
      for (int maj : {0, 1}) worst = std::max(worst, std::abs(prioritized_loss(p, y, 1.0, maj) - bce(p, y)));
    }
    return {worst <= kLossTolerance, fmt("max |L_prio(o=1) - BCE| %.2e", worst)};
  }));
  out.push_back(timed("loss.prioritized_direct_value", 4, [&]() -> Outcome {
    const double expect = std::numbers::ln2 / 4.0;
    const double direct = prioritized_loss(0.5, 0.0, 4.0);
    // Same case through the graph path: four negatives and one positive at
    // logit 0 give 4 * ln2/4 + ln2.
    EdgeTargets t;
    t.relation = kCollision;
    t.pairs = canonical_pairs(4);
    t.mask = {1, 1, 1, 1, 1, 0};
    t.labels = {{0}, {0}, {1}, {0}, {0}, {}};
    Tape tape;
    const Var logits = tape.constant(Tensor(Shape{6, 1}, 0.0));
    const double via_graph =
        relation_loss(logits, t, RelationSpec{kCollision, 1, LabelKind::binary, LossMode::prioritized_bce, 1.0}).value().item();
    const double err = std::max(std::abs(direct - expect), std::abs(via_graph - 2.0 * std::numbers::ln2));
    return {err <= kLossTolerance, fmt("L_prio(p=0.5, y=0, o=4) = %.15f", direct) + fmt(", error %.2e", err)};
  }));
  out.push_back(timed("loss.total_is_sum_over_relations", 4, [&]() -> Outcome {
    const Sequence s = tiny_sequence(4, seed);
    ModelConfig mc;
    mc.input_dim = 4;
    mc.hidden_dim = 5;
    mc.heads = 2;
    mc.relations = tiny_relations();
    const Model m = Model::init(mc, seed);
    Tape tape;
    const BoundParams bp(tape, m.params, false);
    const auto preds = forward(tape, s.graph, Adjacency::from_graph(s.graph), bp, mc);
    const double total = total_loss(tape, preds, s.targets, mc.relations).value().item();
    double parts = 0.0;
    for (const auto& r : mc.relations) parts += total_loss(tape, preds, s.targets, std::span(&r, 1)).value().item();
    const double err = std::abs(total - parts);
    return {err <= kLossTolerance * std::max(1.0, std::abs(total)), fmt("|L - sum_r L_r| = %.2e", err)};
  }));
  return out;
}

std::vector<CheckResult> metric_suite(std::uint64_t seed) {
  std::vector<CheckResult> out;
  out.push_back(timed("metrics.threshold_sweep_oracle", 5, [&]() -> Outcome {
    Rng rng(seed);
    double worst = 0.0;
    int done = 0;
    while (done < 20) {
      const auto n = static_cast<std::size_t>(rng.integer(5, 80));
      std::vector<double> scores(n), labels(n);
      for (std::size_t i = 0; i < n; ++i) {
        labels[i] = rng.bernoulli(0.3) ? 1.0 : 0.0;
        // Coarse scores so that ties occur.
        scores[i] = std::round(rng.uniform() * 12.0) / 12.0 + 0.2 * labels[i] * rng.uniform();
      }
      const auto auc = roc_auc(scores, labels), ref_auc = sweep_auc(scores, labels);
      const auto ap = average_precision(scores, labels), ref_ap = sweep_ap(scores, labels);
      if (auc.has_value() != ref_auc.has_value() || ap.has_value() != ref_ap.has_value())
        return {false, "instance " + std::to_string(done) + ": defined-ness differs from the oracle"};
      if (!auc) continue;
      worst = std::max({worst, std::abs(*auc - *ref_auc), std::abs(*ap - *ref_ap)});
      ++done;
    }
    return {worst <= kMetricTolerance, fmt("20 instances, max |metric - sweep| %.2e", worst)};
  }));
  out.push_back(timed("metrics.perfect_separation", 5, [&]() -> Outcome {
    const std::vector<double> scores = {0.9, 0.8, 0.75, 0.3, 0.2, 0.1}, labels = {1, 1, 1, 0, 0, 0};
    const double auc = roc_auc(scores, labels).value(), ap = average_precision(scores, labels).value();
    return {auc == 1.0 && ap == 1.0, fmt("AUC %.17g", auc) + fmt(", AP %.17g", ap)};
  }));
  out.push_back(timed("metrics.constant_scores", 5, [&]() -> Outcome {
    const std::vector<double> scores(10, 0.4), labels = {1, 0, 1, 0, 1, 0, 1, 0, 1, 0};
    const double auc = roc_auc(scores, labels).value();
    return {auc == 0.5, fmt("AUC %.17g", auc)};
  }));
  return out;
}

std::vector<CheckResult> property_suite(std::uint64_t seed) {
  std::vector<CheckResult> all;
  for (auto&& part : {gradient_suite(seed), structural_suite(seed), hungarian_suite(seed), loss_suite(seed),
                      metric_suite(seed)})
    all.insert(all.end(), part.begin(), part.end());
  return all;
}

}  // namespace mtd::verify
