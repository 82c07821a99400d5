#pragma once

// Temporally-dynamic spatio-temporal graphs.
//
// Nodes are per-frame detections; the node set may change from frame to
// frame. Spatial edges connect every pair of distinct nodes inside a frame,
// temporal edges link a detection to its appearance match in the next frame.
// Node indices are either frame-local (`NodePair`, `TemporalEdge`) or global
// (row of the feature matrix, `Adjacency`), with global = frame_offset + local.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mtd/tensor.hpp"

namespace mtd {

enum class EdgeKind : std::uint8_t { spatial, temporal };
enum class LabelKind : std::uint8_t { binary, multi_label, categorical };

const char* to_string(LabelKind k);
LabelKind parse_label_kind(std::string_view s);

struct Node {
  std::int64_t node_id = 0;
  std::optional<std::int64_t> track_id;  ///< generator metadata; never fed to a model
  std::vector<double> features;
};

struct FrameNodes {
  std::vector<Node> nodes;
  std::size_t size() const { return nodes.size(); }
};

/// Unordered pair of frame-local node indices, stored with i < j.
struct NodePair {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  friend auto operator<=>(const NodePair&, const NodePair&) = default;
};

/// All unordered pairs of n nodes in canonical (row-major, i < j) order.
std::vector<NodePair> canonical_pairs(std::size_t n);

/// Links local node `prev` of `frame` to local node `next` of `frame + 1`.
struct TemporalEdge {
  std::uint32_t frame = 0;
  std::uint32_t prev = 0;
  std::uint32_t next = 0;
  friend auto operator<=>(const TemporalEdge&, const TemporalEdge&) = default;
};

class DynamicGraph {
 public:
  std::size_t feature_dim = 0;
  std::vector<FrameNodes> frames;
  std::vector<std::vector<NodePair>> spatial_edges;  ///< per frame
  std::vector<TemporalEdge> temporal_edges;

  std::size_t frame_count() const { return frames.size(); }
  std::size_t node_count() const;
  std::size_t frame_offset(std::size_t frame) const;
  std::uint32_t global_index(std::size_t frame, std::uint32_t local) const;
  const FrameNodes& last_frame() const { return frames.back(); }

  /// Node features stacked into a node_count x feature_dim matrix.
  Tensor feature_matrix() const;
};

/// Joint adjacency A stored as per-node neighbour lists split by edge kind.
class Adjacency {
 public:
  static Adjacency from_graph(const DynamicGraph& g);

  std::size_t node_count() const { return spatial_.size(); }
  const std::vector<std::uint32_t>& spatial(std::size_t node) const { return spatial_[node]; }
  const std::vector<std::uint32_t>& temporal(std::size_t node) const { return temporal_[node]; }
  std::optional<EdgeKind> kind(std::uint32_t a, std::uint32_t b) const;

 private:
  std::vector<std::vector<std::uint32_t>> spatial_;
  std::vector<std::vector<std::uint32_t>> temporal_;
};

/// Ground-truth labels over the unordered node pairs of the last input frame.
struct EdgeTargets {
  std::string relation;
  std::size_t class_count = 1;
  LabelKind kind = LabelKind::binary;
  std::vector<NodePair> pairs;               ///< canonical_pairs(last frame size)
  std::vector<char> mask;                    ///< 1 = pair is evaluated
  std::vector<std::vector<double>> labels;   ///< per pair; empty when masked

  std::size_t evaluated_count() const;
  /// Label of the unordered pair {a, b}; nullopt when masked.
  std::optional<std::span<const double>> label(std::uint32_t a, std::uint32_t b) const;
};

struct Sequence {
  DynamicGraph graph;
  std::vector<EdgeTargets> targets;

  const EdgeTargets* find_target(std::string_view relation) const;
};

// --- construction ---------------------------------------------------------

double squared_distance(std::span<const double> a, std::span<const double> b);

/// Appearance matching between consecutive frames: cost is squared Euclidean
/// feature distance, leaving a node unmatched costs `max_cost`. Returns
/// matched (prev, next) local index pairs.
std::vector<std::pair<std::uint32_t, std::uint32_t>> link_temporal(const FrameNodes& prev, const FrameNodes& next,
                                                                   double max_cost);

/// Builds spatial edges (all within-frame pairs) and temporal edges (appearance
/// links between consecutive frames). Throws on zero frames, inconsistent
/// feature dimensions or duplicate node ids.
DynamicGraph build_graph(std::vector<FrameNodes> frames, double max_cost);

// --- evaluation alignment -------------------------------------------------

struct GroundTruthObject {
  std::int64_t track_id = 0;
  std::vector<double> features;  ///< noise-free appearance of the object
};

/// Labels of one relation keyed by unordered track pair (smaller id first).
/// A nullopt value marks a pair excluded from evaluation.
struct TrackPairTargets {
  std::string relation;
  std::size_t class_count = 1;
  LabelKind kind = LabelKind::binary;
  std::map<std::pair<std::int64_t, std::int64_t>, std::optional<std::vector<double>>> labels;
};

/// Matches each proposed node to at most one ground-truth object.
std::vector<std::optional<std::size_t>> align_nodes(const FrameNodes& proposed,
                                                    std::span<const GroundTruthObject> truth, double max_cost);

/// Projects track-pair targets onto the proposed nodes. Pairs touching an
/// unmatched (false positive) node, or whose track pair is masked or unknown,
/// are masked.
std::vector<EdgeTargets> align_eval_mask(const FrameNodes& proposed, std::span<const GroundTruthObject> truth,
                                         std::span<const TrackPairTargets> targets, double max_cost);

// --- serialization --------------------------------------------------------

std::string sequence_to_json(const Sequence& seq);
/// Parses a sequence document and rebuilds spatial edges. Throws ConfigError
/// on malformed input.
Sequence sequence_from_json(std::string_view text);

void write_sequence(const std::filesystem::path& path, const Sequence& seq);
Sequence read_sequence(const std::filesystem::path& path);

}  // namespace mtd
