#include "mtd/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mtd/loss.hpp"
#include "mtd/parallel.hpp"
#include "mtd/rng.hpp"

namespace mtd {

const char* to_string(LrSchedule s) { return s == LrSchedule::constant ? "constant" : "inverse-epoch"; }

LrSchedule parse_lr_schedule(std::string_view s) {
  if (s == "inverse-epoch") return LrSchedule::inverse_epoch;
  if (s == "constant") return LrSchedule::constant;
  throw ConfigError("unknown lr schedule '" + std::string(s) + "' (expected inverse-epoch or constant)");
}

SampleOutput run_sample(const Model& model, const Sequence& seq, bool with_gradients) {
  Tape tape;
  BoundParams params(tape, model.params, with_gradients);
  const Adjacency adj = model.config.kind == ModelKind::mtd_gnn ? Adjacency::from_graph(seq.graph) : Adjacency{};
  const EdgePredictions preds = run_model(tape, seq.graph, adj, params, model.config);
  const auto& relations = model.config.relations;

  SampleOutput out;
  Var total;
  for (std::size_t r = 0; r < relations.size(); ++r) {
    const auto& spec = relations[r];
    const EdgeTargets* t = seq.find_target(spec.name);
    if (!t) throw ConfigError("sequence has no targets for relation '" + spec.name + "'");
    if (t->pairs != preds.pairs)
      throw Error("relation '" + spec.name + "': target pairs do not match the last frame");
    Var lg = preds.logits[r];
    out.logits.push_back(lg.valid() ? lg.value() : Tensor(Shape{0, spec.class_count}));
    Var l = relation_loss(lg, *t, spec);
    out.relation_losses.push_back(l.valid() ? l.value().item() : 0.0);
    if (l.valid()) total = total.valid() ? add(total, l) : l;
  }
  out.loss = total.valid() ? total.value().item() : 0.0;
  if (with_gradients) {
    if (total.valid()) {
      tape.backward(total);
      out.grads = params.gradients();
    } else {
      for (std::size_t i = 0; i < model.params.size(); ++i)
        out.grads.emplace(model.params.name(i), Tensor(model.params.value(i).shape()));
    }
  }
  return out;
}

namespace {

Evaluation summarize(const Model& model, std::span<const Sequence* const> data, std::span<const SampleOutput> outs,
                     double threshold) {
  MetricAccumulator acc(model.config.relations, threshold);
  double loss = 0.0;
  for (std::size_t i = 0; i < outs.size(); ++i) {
    acc.add(outs[i].logits, data[i]->targets, outs[i].relation_losses);
    loss += outs[i].loss;
  }
  return {acc.report(), outs.empty() ? 0.0 : loss / static_cast<double>(outs.size())};
}

std::string parameter_norms(const ParameterSet& params) {
  std::ostringstream os;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double n2 = 0.0;
    for (double v : params.value(i).data()) n2 += v * v;
    os << "\n  " << params.name(i) << " norm " << std::sqrt(n2);
  }
  return os.str();
}

bool finite(const Gradients& g) {
  for (const auto& [_, t] : g)
    for (double v : t.data())
      if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace

Evaluation evaluate(const Model& model, std::span<const Sequence> data, std::size_t workers, double threshold) {
  if (data.empty()) throw ConfigError("evaluate: empty data split");
  std::vector<SampleOutput> outs(data.size());
  parallel_for(data.size(), workers, [&](std::size_t i) { outs[i] = run_sample(model, data[i], false); });
  std::vector<const Sequence*> ptrs;
  for (const auto& s : data) ptrs.push_back(&s);
  return summarize(model, ptrs, outs, threshold);
}

TrainResult train(Model model, std::span<const Sequence> train_set, std::span<const Sequence> val_set,
                  const TrainOptions& options, const EpochCallback& on_epoch) {
  if (train_set.empty()) throw ConfigError("train: empty training split");
  if (options.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(options.learning_rate >= 0.0)) throw ConfigError("train: learning rate must be >= 0");
  AdamConfig adam;
  adam.learning_rate = options.learning_rate;
  AdamState state = AdamState::init(model.params, adam);

  TrainResult result;
  bool have_best = false;
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(hash_seed(options.seed, epoch));
    rng.shuffle(order);

    std::vector<const Sequence*> seen;
    std::vector<SampleOutput> seen_out;
    seen.reserve(order.size());
    seen_out.reserve(order.size());
    for (std::size_t start = 0, batch = 0; start < order.size(); start += options.batch_size, ++batch) {
      const std::size_t n = std::min(options.batch_size, order.size() - start);
      std::vector<SampleOutput> outs(n);
      parallel_for(n, options.workers,
                   [&](std::size_t k) { outs[k] = run_sample(model, train_set[order[start + k]], true); });
      Gradients sum;
      double batch_loss = 0.0;
      for (auto& o : outs) {
        accumulate(sum, o.grads);
        batch_loss += o.loss;
        o.grads.clear();
      }
      if (!std::isfinite(batch_loss) || !finite(sum))
        throw DivergenceError("non-finite " + std::string(std::isfinite(batch_loss) ? "gradient" : "loss") +
                              " at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
                              " (loss " + std::to_string(batch_loss) + "); parameter norms:" +
                              parameter_norms(model.params));
      adam_step(model.params, sum, state);
      for (std::size_t k = 0; k < n; ++k) {
        seen.push_back(&train_set[order[start + k]]);
        seen_out.push_back(std::move(outs[k]));
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = state.learning_rate;
    rec.train = summarize(model, seen, seen_out, options.threshold);
    if (!val_set.empty()) rec.val = evaluate(model, val_set, options.workers, options.threshold);
    const double score = rec.val ? rec.val->loss : rec.train.loss;
    if (!have_best || score < result.best_val_loss || !rec.val) {
      result.best = model;
      result.best_epoch = epoch;
      result.best_val_loss = score;
      have_best = true;
    }
    if (options.schedule == LrSchedule::inverse_epoch)
      state.learning_rate = lr_schedule(static_cast<int>(epoch), state.learning_rate);
    if (on_epoch) on_epoch(rec);
    result.history.push_back(std::move(rec));
  }
  if (!have_best) result.best = model;
  result.last = std::move(model);
  return result;
}

Sequence select_relations(const Sequence& seq, std::span<const RelationSpec> relations) {
  Sequence out;
  out.graph = seq.graph;
  for (const auto& r : relations) {
    const EdgeTargets* t = seq.find_target(r.name);
    if (!t) throw ConfigError("sequence has no targets for relation '" + r.name + "'");
    out.targets.push_back(*t);
  }
  return out;
}

}  // namespace mtd
