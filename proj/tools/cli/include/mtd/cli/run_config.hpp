#pragma once

// Run and sweep configuration files of the `mtd` tool.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtd/model.hpp"
#include "mtd/synth.hpp"
#include "mtd/train.hpp"

namespace mtd::cli {

/// Relation as named in a run config; class count and label kind come from
/// the dataset manifest.
struct RelationChoice {
  std::string name;
  LossMode loss = LossMode::prioritized_bce;
  double weight = 1.0;
  friend bool operator==(const RelationChoice&, const RelationChoice&) = default;
};

struct RunConfig {
  std::string dataset;
  std::vector<RelationChoice> relations = {{kCollision, LossMode::prioritized_bce, 1.0},
                                           {kRelativeMotion, LossMode::prioritized_bce, 1.0}};
  std::string method = "multi-task";  ///< or "single-task:<relation>"
  ModelKind model = ModelKind::mtd_gnn;
  std::size_t hidden_dim = 256;
  std::size_t heads = 5;
  std::size_t layers = 1;
  std::size_t max_nodes = 0;  ///< baseline padding; 0 takes the dataset maximum
  double learning_rate = 0.001;
  LrSchedule lr_schedule = LrSchedule::inverse_epoch;
  std::size_t epochs = 100;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  std::string out;
  double threshold = 0.5;

  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

std::string run_config_to_json(const RunConfig& c);
/// Unknown keys and malformed values raise ConfigError naming the field.
RunConfig run_config_from_json(std::string_view text);

/// Relations trained by the config's method, resolved against a dataset.
/// Throws ConfigError when a relation is missing from the dataset.
std::vector<RelationSpec> resolve_relations(const RunConfig& c, const DatasetManifest& manifest);

/// Named presets. `benchmark`: 100 epochs. `ci`: 5 epochs. `smoke`: 1 epoch
/// and a 20-sequence dataset.
struct Profile {
  std::string name;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> n_sequences;
};
Profile find_profile(std::string_view name);
void apply_profile(const Profile& p, RunConfig& c);
void apply_profile(const Profile& p, GeneratorConfig& c);

/// Ablation sweep: a base run plus value lists per axis.
struct SweepSpec {
  enum class Mode : std::uint8_t { per_axis, cross };
  RunConfig base;
  std::vector<std::size_t> hidden_dim, heads, layers;
  std::vector<std::string> method;
  std::vector<ModelKind> model;
  Mode mode = Mode::per_axis;
  std::string split = "test";
};

SweepSpec sweep_spec_from_json(std::string_view text);

struct SweepCell {
  std::string axis;  ///< varied axis, "base" or "cross"
  RunConfig config;
};

/// Cells of a sweep in a stable order. Per-axis mode varies one axis at a time
/// around the base and drops duplicate cells; cross mode takes the product.
std::vector<SweepCell> expand_sweep(const SweepSpec& spec);

std::string read_text_file(const std::string& path);

}  // namespace mtd::cli
