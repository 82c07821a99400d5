#include "mtd/graph.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mtd/hungarian.hpp"

namespace mtd {

using nlohmann::json;

const char* to_string(LabelKind k) {
  switch (k) {
    case LabelKind::binary: return "binary";
    case LabelKind::multi_label: return "multi-label";
    case LabelKind::categorical: return "categorical";
  }
  return "?";
}

LabelKind parse_label_kind(std::string_view s) {
  if (s == "binary") return LabelKind::binary;
  if (s == "multi-label") return LabelKind::multi_label;
  if (s == "categorical") return LabelKind::categorical;
  throw ConfigError("unknown label kind '" + std::string(s) + "' (expected binary, multi-label or categorical)");
}

std::vector<NodePair> canonical_pairs(std::size_t n) {
  std::vector<NodePair> out;
  if (n < 2) return out;
  out.reserve(n * (n - 1) / 2);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = i + 1; j < n; ++j) out.push_back({i, j});
  return out;
}

std::size_t DynamicGraph::node_count() const {
  std::size_t n = 0;
  for (const auto& f : frames) n += f.size();
  return n;
}

std::size_t DynamicGraph::frame_offset(std::size_t frame) const {
  std::size_t off = 0;
  for (std::size_t f = 0; f < frame; ++f) off += frames[f].size();
  return off;
}

std::uint32_t DynamicGraph::global_index(std::size_t frame, std::uint32_t local) const {
  return static_cast<std::uint32_t>(frame_offset(frame) + local);
}

Tensor DynamicGraph::feature_matrix() const {
  Tensor x(Shape{node_count(), feature_dim});
  std::size_t r = 0;
  for (const auto& f : frames) {
    for (const auto& n : f.nodes) {
      std::copy(n.features.begin(), n.features.end(), x.data().begin() + static_cast<std::ptrdiff_t>(r * feature_dim));
      ++r;
    }
  }
  return x;
}

Adjacency Adjacency::from_graph(const DynamicGraph& g) {
  Adjacency a;
  const std::size_t n = g.node_count();
  a.spatial_.assign(n, {});
  a.temporal_.assign(n, {});
  std::vector<std::size_t> offsets(g.frame_count(), 0);
  for (std::size_t f = 1; f < g.frame_count(); ++f) offsets[f] = offsets[f - 1] + g.frames[f - 1].size();
  for (std::size_t f = 0; f < g.spatial_edges.size(); ++f) {
    for (const auto& e : g.spatial_edges[f]) {
      const auto u = static_cast<std::uint32_t>(offsets[f] + e.i);
      const auto v = static_cast<std::uint32_t>(offsets[f] + e.j);
      a.spatial_[u].push_back(v);
      a.spatial_[v].push_back(u);
    }
  }
  for (const auto& e : g.temporal_edges) {
    const auto u = static_cast<std::uint32_t>(offsets[e.frame] + e.prev);
    const auto v = static_cast<std::uint32_t>(offsets[e.frame + 1] + e.next);
    a.temporal_[u].push_back(v);
    a.temporal_[v].push_back(u);
  }
  for (auto& l : a.spatial_) std::sort(l.begin(), l.end());
  for (auto& l : a.temporal_) std::sort(l.begin(), l.end());
  return a;
}

std::optional<EdgeKind> Adjacency::kind(std::uint32_t a, std::uint32_t b) const {
  if (std::binary_search(spatial_[a].begin(), spatial_[a].end(), b)) return EdgeKind::spatial;
  if (std::binary_search(temporal_[a].begin(), temporal_[a].end(), b)) return EdgeKind::temporal;
  return std::nullopt;
}

std::size_t EdgeTargets::evaluated_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

std::optional<std::span<const double>> EdgeTargets::label(std::uint32_t a, std::uint32_t b) const {
  const NodePair key{std::min(a, b), std::max(a, b)};
  auto it = std::lower_bound(pairs.begin(), pairs.end(), key);
  if (it == pairs.end() || *it != key) return std::nullopt;
  const auto k = static_cast<std::size_t>(it - pairs.begin());
  if (!mask[k]) return std::nullopt;
  return std::span<const double>(labels[k]);
}

const EdgeTargets* Sequence::find_target(std::string_view relation) const {
  for (const auto& t : targets)
    if (t.relation == relation) return &t;
  return nullptr;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ShapeError("squared_distance: feature length " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> link_temporal(const FrameNodes& prev, const FrameNodes& next,
                                                                   double max_cost) {
  CostMatrix cost(prev.size(), next.size());
  for (std::size_t i = 0; i < prev.size(); ++i)
    for (std::size_t j = 0; j < next.size(); ++j) cost(i, j) = squared_distance(prev.nodes[i].features, next.nodes[j].features);
  const auto a = hungarian_match(cost, max_cost);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  out.reserve(a.pairs.size());
  for (auto [r, c] : a.pairs) out.emplace_back(static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c));
  return out;
}

DynamicGraph build_graph(std::vector<FrameNodes> frames, double max_cost) {
  if (frames.empty()) throw Error("build_graph: at least one frame is required");
  DynamicGraph g;
  std::optional<std::size_t> dim;
  std::set<std::int64_t> ids;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    for (const auto& n : frames[f].nodes) {
      if (!dim) dim = n.features.size();
      if (n.features.size() != *dim)
        throw ShapeError("build_graph: node " + std::to_string(n.node_id) + " in frame " + std::to_string(f) + " has " +
                         std::to_string(n.features.size()) + " features, expected " + std::to_string(*dim));
      if (!ids.insert(n.node_id).second) throw Error("build_graph: duplicate node id " + std::to_string(n.node_id));
    }
  }
  g.feature_dim = dim.value_or(0);
  g.frames = std::move(frames);
  for (const auto& f : g.frames) g.spatial_edges.push_back(canonical_pairs(f.size()));
  for (std::size_t f = 0; f + 1 < g.frames.size(); ++f) {
    for (auto [p, n] : link_temporal(g.frames[f], g.frames[f + 1], max_cost))
      g.temporal_edges.push_back({static_cast<std::uint32_t>(f), p, n});
  }
  return g;
}

std::vector<std::optional<std::size_t>> align_nodes(const FrameNodes& proposed, std::span<const GroundTruthObject> truth,
                                                    double max_cost) {
  CostMatrix cost(proposed.size(), truth.size());
  for (std::size_t i = 0; i < proposed.size(); ++i)
    for (std::size_t j = 0; j < truth.size(); ++j) cost(i, j) = squared_distance(proposed.nodes[i].features, truth[j].features);
  std::vector<std::optional<std::size_t>> out(proposed.size());
  for (auto [r, c] : hungarian_match(cost, max_cost).pairs) out[r] = c;
  return out;
}

std::vector<EdgeTargets> align_eval_mask(const FrameNodes& proposed, std::span<const GroundTruthObject> truth,
                                         std::span<const TrackPairTargets> targets, double max_cost) {
  const auto match = align_nodes(proposed, truth, max_cost);
  const auto pairs = canonical_pairs(proposed.size());
  std::vector<EdgeTargets> out;
  for (const auto& t : targets) {
    EdgeTargets et;
    et.relation = t.relation;
    et.class_count = t.class_count;
    et.kind = t.kind;
    et.pairs = pairs;
    et.mask.assign(pairs.size(), 0);
    et.labels.assign(pairs.size(), {});
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const auto& mi = match[pairs[k].i];
      const auto& mj = match[pairs[k].j];
      if (!mi || !mj) continue;
      const auto a = truth[*mi].track_id, b = truth[*mj].track_id;
      auto it = t.labels.find({std::min(a, b), std::max(a, b)});
      if (it == t.labels.end() || !it->second) continue;
      et.mask[k] = 1;
      et.labels[k] = *it->second;
    }
    out.push_back(std::move(et));
  }
  return out;
}

// --- serialization --------------------------------------------------------

namespace {

json label_to_json(const EdgeTargets& t, const std::vector<double>& y) {
  switch (t.kind) {
    case LabelKind::binary: return y.at(0);
    case LabelKind::categorical: return static_cast<std::int64_t>(y.at(0));
    case LabelKind::multi_label: return y;
  }
  return nullptr;
}

template <typename T>
T field(const json& j, const char* name, const std::string& where) {
  if (!j.contains(name)) throw ConfigError(where + ": missing field '" + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": field '" + name + "': " + e.what());
  }
}

}  // namespace

std::string sequence_to_json(const Sequence& seq) {
  const auto& g = seq.graph;
  json doc;
  doc["feature_dim"] = g.feature_dim;
  json frames = json::array();
  for (const auto& f : g.frames) {
    json nodes = json::array();
    for (const auto& n : f.nodes) {
      json jn;
      jn["node_id"] = n.node_id;
      if (n.track_id) jn["track_id"] = *n.track_id;
      jn["features"] = n.features;
      nodes.push_back(std::move(jn));
    }
    frames.push_back({{"nodes", std::move(nodes)}});
  }
  doc["frames"] = std::move(frames);
  json te = json::array();
  for (const auto& e : g.temporal_edges) te.push_back({e.frame, e.prev, e.next});
  doc["temporal_edges"] = std::move(te);
  json targets = json::array();
  for (const auto& t : seq.targets) {
    json jt;
    jt["relation"] = t.relation;
    jt["class_count"] = t.class_count;
    jt["kind"] = to_string(t.kind);
    json labels = json::array();
    json mask = json::array();
    for (std::size_t k = 0; k < t.pairs.size(); ++k) {
      mask.push_back(t.mask[k] != 0);
      if (t.mask[k]) labels.push_back({{"i", t.pairs[k].i}, {"j", t.pairs[k].j}, {"y", label_to_json(t, t.labels[k])}});
    }
    jt["labels"] = std::move(labels);
    jt["mask"] = std::move(mask);
    targets.push_back(std::move(jt));
  }
  doc["targets"] = std::move(targets);
  return doc.dump();
}

Sequence sequence_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sequence: invalid JSON: ") + e.what());
  }
  Sequence seq;
  auto& g = seq.graph;
  g.feature_dim = field<std::size_t>(doc, "feature_dim", "sequence");
  for (const auto& jf : field<json>(doc, "frames", "sequence")) {
    FrameNodes fn;
    for (const auto& jn : field<json>(jf, "nodes", "frame")) {
      Node n;
      n.node_id = field<std::int64_t>(jn, "node_id", "node");
      if (jn.contains("track_id") && !jn["track_id"].is_null()) n.track_id = jn["track_id"].get<std::int64_t>();
      n.features = field<std::vector<double>>(jn, "features", "node");
      if (n.features.size() != g.feature_dim)
        throw ConfigError("node " + std::to_string(n.node_id) + ": expected " + std::to_string(g.feature_dim) + " features");
      fn.nodes.push_back(std::move(n));
    }
    g.frames.push_back(std::move(fn));
  }
  if (g.frames.empty()) throw ConfigError("sequence: no frames");
  for (const auto& f : g.frames) g.spatial_edges.push_back(canonical_pairs(f.size()));
  for (const auto& je : field<json>(doc, "temporal_edges", "sequence")) {
    if (!je.is_array() || je.size() != 3) throw ConfigError("temporal edge must be [frame, i, j]");
    TemporalEdge e{je[0].get<std::uint32_t>(), je[1].get<std::uint32_t>(), je[2].get<std::uint32_t>()};
    if (e.frame + 1 >= g.frames.size() || e.prev >= g.frames[e.frame].size() || e.next >= g.frames[e.frame + 1].size())
      throw ConfigError("temporal edge [" + std::to_string(e.frame) + ", " + std::to_string(e.prev) + ", " +
                        std::to_string(e.next) + "] out of range");
    g.temporal_edges.push_back(e);
  }
  const auto pairs = canonical_pairs(g.frames.back().size());
  for (const auto& jt : field<json>(doc, "targets", "sequence")) {
    EdgeTargets t;
    t.relation = field<std::string>(jt, "relation", "target");
    t.class_count = field<std::size_t>(jt, "class_count", "target " + t.relation);
    if (t.class_count < 1) throw ConfigError("target " + t.relation + ": class_count must be >= 1");
    t.kind = parse_label_kind(field<std::string>(jt, "kind", "target " + t.relation));
    t.pairs = pairs;
    const auto mask = field<std::vector<bool>>(jt, "mask", "target " + t.relation);
    if (mask.size() != pairs.size())
      throw ConfigError("target " + t.relation + ": mask has " + std::to_string(mask.size()) + " entries, expected " +
                        std::to_string(pairs.size()));
    t.mask.assign(pairs.size(), 0);
    t.labels.assign(pairs.size(), {});
    for (const auto& jl : field<json>(jt, "labels", "target " + t.relation)) {
      const auto i = field<std::uint32_t>(jl, "i", "label"), j = field<std::uint32_t>(jl, "j", "label");
      const NodePair key{std::min(i, j), std::max(i, j)};
      auto it = std::lower_bound(t.pairs.begin(), t.pairs.end(), key);
      if (it == t.pairs.end() || *it != key) throw ConfigError("target " + t.relation + ": label pair out of range");
      const auto k = static_cast<std::size_t>(it - t.pairs.begin());
      if (!mask[k]) throw ConfigError("target " + t.relation + ": masked pair carries a label");
      const auto& y = jl.at("y");
      if (t.kind == LabelKind::multi_label) {
        t.labels[k] = y.get<std::vector<double>>();
        if (t.labels[k].size() != t.class_count) throw ConfigError("target " + t.relation + ": label width mismatch");
      } else {
        t.labels[k] = {y.get<double>()};
      }
      t.mask[k] = 1;
    }
    for (std::size_t k = 0; k < pairs.size(); ++k)
      if (mask[k] && !t.mask[k]) throw ConfigError("target " + t.relation + ": unmasked pair without a label");
    seq.targets.push_back(std::move(t));
  }
  return seq;
}

void write_sequence(const std::filesystem::path& path, const Sequence& seq) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << sequence_to_json(seq) << '\n';
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

Sequence read_sequence(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is || std::filesystem::is_directory(path)) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  try {
    return sequence_from_json(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace mtd
