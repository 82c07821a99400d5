#pragma once

// The `mtd` subcommands. Each returns a process exit code: 0 success,
// 1 verification or run failure, 2 usage or configuration error.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mtd/checkpoint.hpp"
#include "mtd/cli/run_config.hpp"
#include "mtd/metrics.hpp"
#include "mtd/train.hpp"

namespace mtd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct GenerateArgs {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::string> profile;
};

struct TrainArgs {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> profile;
  std::optional<std::string> dataset;
};

struct EvalArgs {
  std::string checkpoint;
  std::string dataset;
  std::string split = "test";
  double threshold = 0.5;          ///< F1 decision threshold
  std::optional<std::string> out;  ///< CSV path; stdout when absent
};

struct AblateArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> profile;
};

struct VerifyArgs {
  std::uint64_t seed = 1;
  std::optional<std::string> mutate;  ///< primitive whose backward rule gets a sign fault
};

int cmd_generate(const GenerateArgs& args, std::ostream& out, std::ostream& log);
int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& log);
int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& log);
int cmd_ablate(const AblateArgs& args, std::ostream& out, std::ostream& log);
int cmd_verify(const VerifyArgs& args, std::ostream& out, std::ostream& log);

// --- library entry points shared with the acceptance harness ---------------

/// Writes `msg` to `log` prefixed by a wall-clock timestamp.
void log_line(std::ostream& log, const std::string& msg);

struct TrainOutcome {
  RunConfig config;
  DatasetManifest manifest;
  ModelConfig model;
  TrainResult result;
};

/// Loads the dataset, trains, and when config.out is set writes config.json,
/// checkpoint.json/.bin (best validation loss) and metrics.csv there.
TrainOutcome run_training(const RunConfig& config, std::ostream& log);

/// Metrics of `model` on one split of a dataset directory.
Evaluation evaluate_split(const Model& model, const std::string& dataset, const std::string& split, double threshold);

/// metrics.csv body: epoch,split,relation,f1,ap,auc,loss with train and val
/// rows per relation and an __all__ row.
void write_epoch_metrics(std::ostream& os, const std::vector<EpochRecord>& history);

}  // namespace mtd::cli
