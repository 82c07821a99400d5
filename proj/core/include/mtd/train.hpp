#pragma once

// Sequence-level forward/backward, evaluation and the epoch loop.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mtd/graph.hpp"
#include "mtd/metrics.hpp"
#include "mtd/model.hpp"
#include "mtd/optim.hpp"

namespace mtd {

enum class LrSchedule : std::uint8_t { inverse_epoch, constant };

const char* to_string(LrSchedule s);
LrSchedule parse_lr_schedule(std::string_view s);

struct TrainOptions {
  std::size_t epochs = 100;
  std::size_t batch_size = 1;
  double learning_rate = 0.001;  ///< eta_0
  LrSchedule schedule = LrSchedule::inverse_epoch;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  double threshold = 0.5;
};

struct SampleOutput {
  double loss = 0.0;
  std::vector<double> relation_losses;  ///< aligned with config.relations
  std::vector<Tensor> logits;           ///< aligned with config.relations
  Gradients grads;                      ///< empty unless requested
};

/// Forward pass of one sequence on a fresh tape, optionally with backward.
SampleOutput run_sample(const Model& model, const Sequence& seq, bool with_gradients);

struct Evaluation {
  MetricReport report;
  double loss = 0.0;  ///< mean total loss per sequence
};

/// Deterministic single pass over `data`, parallel across sequences.
Evaluation evaluate(const Model& model, std::span<const Sequence> data, std::size_t workers, double threshold = 0.5);

struct EpochRecord {
  std::size_t epoch = 0;        ///< 1-based
  double learning_rate = 0.0;   ///< rate used during the epoch
  Evaluation train;             ///< pooled over the epoch's forward passes
  std::optional<Evaluation> val;
};

/// Raised when a batch produces a non-finite loss or gradient; the message
/// carries the epoch, batch and per-parameter norms.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

struct TrainResult {
  Model best;                ///< lowest validation loss, or the last epoch without validation data
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  Model last;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Epoch loop: seeded shuffle, per-sequence gradients summed in sequence
/// order over each batch, one Adam step per batch, schedule per epoch.
TrainResult train(Model model, std::span<const Sequence> train_set, std::span<const Sequence> val_set,
                  const TrainOptions& options, const EpochCallback& on_epoch = {});

/// Copy of `seq` holding only the targets named by `relations`, in order.
Sequence select_relations(const Sequence& seq, std::span<const RelationSpec> relations);

}  // namespace mtd
