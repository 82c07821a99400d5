#pragma once

// Synthetic kinetic scenes: circles moving in the unit square with reflective
// walls and elastic collisions, entering and leaving over time. A scene is
// observed through noisy, detector-like node features for F input frames and
// labelled at a later target frame T.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mtd/graph.hpp"
#include "mtd/relation.hpp"
#include "mtd/tensor.hpp"

namespace mtd {

inline constexpr const char* kGeneratorVersion = "1";
inline constexpr const char* kCollision = "collision";
inline constexpr const char* kRelativeMotion = "relative_motion";

struct GeneratorConfig {
  std::size_t n_sequences = 500;
  std::size_t min_objects = 2;
  std::size_t max_objects = 3;
  std::size_t feature_dim = 32;     ///< d
  std::size_t appearance_dim = 8;
  double feature_noise = 0.05;      ///< sigma_feat
  double miss_probability = 0.05;
  double false_positive_rate = 0.05;
  std::size_t input_frames = 6;     ///< F
  std::size_t min_gap = 5;          ///< frames left out, sampled uniformly
  std::size_t max_gap = 20;
  double motion_threshold = 0.05;   ///< tau_v, units per frame
  double min_radius = 0.08;
  double max_radius = 0.12;
  double min_speed = 0.005;
  double max_speed = 0.035;
  double late_entry_probability = 0.2;
  double early_exit_probability = 0.1;
  double position_scale = 4.0;
  double velocity_scale = 40.0;
  double radius_scale = 20.0;
  double link_max_cost = 0.5;       ///< unmatched cost for appearance matching
  /// Local context seen by the detector around each box: Gaussian-weighted
  /// occupancy of other objects within context_radius, and the same weights
  /// applied to their closing speed.
  double context_radius = 0.25;
  double context_scale = 10.0;
  double closing_scale = 200.0;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

/// JSON form of the config. Parsing requires `n_sequences` and rejects
/// unknown keys; every other field falls back to its default.
std::string generator_config_to_json(const GeneratorConfig& c);
GeneratorConfig generator_config_from_json(std::string_view text);
std::string config_hash(const GeneratorConfig& c);

struct BodyState {
  double x = 0, y = 0, vx = 0, vy = 0;
};

struct Track {
  std::int64_t id = 0;
  std::size_t entry = 0;  ///< first frame present
  std::size_t exit = 0;   ///< last frame present (inclusive)
  double radius = 0.05;
  std::vector<double> appearance;  ///< unit norm
  std::vector<BodyState> states;   ///< states[f - entry]

  bool present(std::size_t frame) const { return frame >= entry && frame <= exit; }
  const BodyState& at(std::size_t frame) const { return states.at(frame - entry); }
};

struct Scene {
  std::size_t input_frames = 0;  ///< F
  std::size_t target_frame = 0;  ///< T, with F - 1 < T
  std::vector<Track> tracks;
  std::uint64_t seed = 0;
};

/// Entry conditions of one body for `run_physics`.
struct TrackSpec {
  std::int64_t id = 0;
  std::size_t entry = 0;
  std::size_t exit = 0;
  double radius = 0.05;
  std::vector<double> appearance;
  BodyState initial;
};

/// Deterministic integration from explicit entry states: per frame, bodies
/// advance by their velocity, reflect off walls, then overlapping approaching
/// pairs exchange momentum elastically (mass proportional to radius squared).
Scene run_physics(std::vector<TrackSpec> specs, std::size_t input_frames, std::size_t target_frame);

/// Samples a scene: object count, radii, appearances, entry/exit frames and
/// non-overlapping entry positions, then integrates it.
Scene simulate(const GeneratorConfig& config, std::uint64_t seed);

/// Track-pair labels over tracks present at frame F - 1. Collision: the pair
/// overlaps at some frame in (F - 1, T]. Relative motion: |v_a - v_b| at T
/// exceeds tau_v. Pairs with a track leaving before T are masked.
std::vector<TrackPairTargets> derive_labels(const Scene& scene, const GeneratorConfig& config);

/// Fixed random projection, feature_dim x (appearance_dim + 7), shared by all
/// sequences of a dataset.
Tensor feature_projection(const GeneratorConfig& config, std::uint64_t dataset_seed);

inline constexpr std::int64_t kNoTrack = -1;

/// {occupancy, closing} around state `s` at `frame`, over the tracks present
/// other than `self` (kNoTrack for a false positive).
std::array<double, 2> local_context(const Scene& scene, std::size_t frame, const BodyState& s, std::int64_t self,
                                    const GeneratorConfig& config);

/// Noise-free feature of a body state:
/// projection * [appearance | scaled x, y, vx, vy, radius | context].
std::vector<double> state_feature(const Tensor& projection, const GeneratorConfig& config,
                                  std::span<const double> appearance, const BodyState& s, double radius,
                                  const std::array<double, 2>& context);

/// Detections of one frame: projected state features plus Gaussian noise,
/// dropped with the miss probability, plus an optional false positive; node
/// order is shuffled. Node ids start at `first_node_id`.
FrameNodes render_features(const Scene& scene, std::size_t frame, const GeneratorConfig& config,
                           const Tensor& projection, std::uint64_t seed, std::int64_t first_node_id);

struct GeneratedSequence {
  Sequence sequence;
  Scene scene;
};

/// Simulates, renders F frames, builds the graph and aligns labels.
GeneratedSequence generate_sequence(const GeneratorConfig& config, std::uint64_t dataset_seed, std::size_t index,
                                    const Tensor& projection);

/// The relations every generated sequence is labelled with.
std::vector<RelationSpec> generated_relations();

struct DatasetManifest {
  GeneratorConfig config;
  std::uint64_t seed = 0;
  std::map<std::string, std::vector<std::size_t>> splits;  ///< train / val / test
  std::vector<RelationSpec> relations;                     ///< labelled relations, loss mode unset
  std::size_t max_nodes_per_frame = 0;
  double collision_positive_rate = 0.0;
  std::string hash;
};

/// 70/15/15 split of sequence indices, shuffled by `seed`.
std::map<std::string, std::vector<std::size_t>> split_indices(std::size_t n, std::uint64_t seed);

/// Writes seq_<idx>.json for every sequence plus manifest.json.
DatasetManifest generate_dataset(const GeneratorConfig& config, std::uint64_t seed, const std::filesystem::path& dir);

DatasetManifest read_manifest(const std::filesystem::path& dir);
std::filesystem::path sequence_path(const std::filesystem::path& dir, std::size_t index);
std::vector<Sequence> load_split(const std::filesystem::path& dir, const DatasetManifest& manifest,
                                 const std::string& split);

}  // namespace mtd
