#include "mtd/cli/commands.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "mtd/parallel.hpp"
#include "mtd/synth.hpp"
#include "mtd/verify/suite.hpp"

namespace mtd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

void log_line(std::ostream& log, const std::string& msg) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  log << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << ' ' << msg << '\n';
  log.flush();
}

namespace {

template <typename F>
int guarded(std::ostream& log, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ShapeError& e) {
    log << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    log << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DivergenceError& e) {
    log << "error: training diverged: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << text;
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

std::vector<Sequence> load_relations(const std::string& dataset, const DatasetManifest& m, const std::string& split,
                                     std::span<const RelationSpec> relations) {
  auto data = load_split(dataset, m, split);
  for (auto& s : data) s = select_relations(s, relations);
  return data;
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

std::string metric(const std::optional<double>& v) { return v ? fixed(*v) : std::string("-"); }

}  // namespace

void write_epoch_metrics(std::ostream& os, const std::vector<EpochRecord>& history) {
  os << "epoch,split,relation,f1,ap,auc,loss\n";
  auto rows = [&](std::size_t epoch, const char* split, const Evaluation& ev) {
    for (const auto* r : [&] {
           std::vector<const RelationMetrics*> v;
           for (const auto& m : ev.report.relations) v.push_back(&m);
           v.push_back(&ev.report.all);
           return v;
         }()) {
      os << epoch << ',' << split << ',' << r->relation << ',' << format_number(r->f1) << ',' << format_number(r->ap) << ','
         << format_number(r->auc) << ',' << format_number(r->loss) << '\n';
    }
  };
  for (const auto& rec : history) {
    rows(rec.epoch, "train", rec.train);
    if (rec.val) rows(rec.epoch, "val", *rec.val);
  }
}

TrainOutcome run_training(const RunConfig& config, std::ostream& log) {
  config.validate();
  if (config.dataset.empty()) throw ConfigError("run config: field 'dataset' is required");
  TrainOutcome o;
  o.config = config;
  o.manifest = read_manifest(config.dataset);
  const auto relations = resolve_relations(config, o.manifest);
  o.model.kind = config.model;
  o.model.input_dim = o.manifest.config.feature_dim;
  o.model.hidden_dim = config.hidden_dim;
  o.model.heads = config.heads;
  o.model.layers = config.layers;
  o.model.max_nodes = config.max_nodes ? config.max_nodes : std::max<std::size_t>(2, o.manifest.max_nodes_per_frame);
  o.model.relations = relations;
  o.model.validate();
  const auto train_set = load_relations(config.dataset, o.manifest, "train", relations);
  const auto val_set = load_relations(config.dataset, o.manifest, "val", relations);
  if (train_set.empty()) throw ConfigError("dataset '" + config.dataset + "' has an empty train split");

  TrainOptions opt;
  opt.epochs = config.epochs;
  opt.batch_size = config.batch_size;
  opt.learning_rate = config.learning_rate;
  opt.schedule = config.lr_schedule;
  opt.seed = config.seed;
  opt.workers = worker_count();
  opt.threshold = config.threshold;

  log_line(log, std::string("train ") + to_string(config.model) + " " + config.method + " on " + config.dataset + ": " +
                    std::to_string(train_set.size()) + " train / " + std::to_string(val_set.size()) + " val sequences, " +
                    std::to_string(config.epochs) + " epochs");
  const std::string first = relations.front().name;
  o.result = train(Model::init(o.model, config.seed), train_set, val_set, opt, [&](const EpochRecord& r) {
    std::string msg = "epoch " + std::to_string(r.epoch) + " lr " + format_number(r.learning_rate) + " train loss " +
                      fixed(r.train.loss);
    if (r.val) {
      const auto* m = r.val->report.find(first);
      msg += " val loss " + fixed(r.val->loss) + " " + first + " f1 " + metric(m->f1) + " ap " + metric(m->ap) + " auc " +
             metric(m->auc);
    }
    log_line(log, msg);
  });

  if (!config.out.empty()) {
    const fs::path dir(config.out);
    make_dirs(dir);
    write_file(dir / "config.json", run_config_to_json(config) + "\n");
    const json meta{{"best_epoch", o.result.best_epoch},
                    {"best_val_loss", o.result.best_val_loss},
                    {"dataset_hash", o.manifest.hash},
                    {"method", config.method}};
    save_checkpoint(dir / "checkpoint.json", o.result.best, meta.dump());
    std::ostringstream csv;
    write_epoch_metrics(csv, o.result.history);
    write_file(dir / "metrics.csv", csv.str());
  }
  return o;
}

Evaluation evaluate_split(const Model& model, const std::string& dataset, const std::string& split, double threshold) {
  const DatasetManifest m = read_manifest(dataset);
  if (model.config.input_dim != m.config.feature_dim)
    throw ShapeError("checkpoint expects " + std::to_string(model.config.input_dim) + " input features, dataset has " +
                     std::to_string(m.config.feature_dim));
  for (const auto& r : model.config.relations) {
    const bool found = std::any_of(m.relations.begin(), m.relations.end(), [&](const RelationSpec& d) {
      return d.name == r.name && d.class_count == r.class_count && d.kind == r.kind;
    });
    if (!found) throw ConfigError("checkpoint relation '" + r.name + "' does not match the dataset");
  }
  const auto data = load_relations(dataset, m, split, model.config.relations);
  if (data.empty()) throw ConfigError("split '" + split + "' of '" + dataset + "' is empty");
  return evaluate(model, data, worker_count(), threshold);
}

int cmd_generate(const GenerateArgs& args, std::ostream& out, std::ostream& log) {
  return guarded(log, [&] {
    GeneratorConfig c;
    if (args.config) c = generator_config_from_json(read_text_file(*args.config));
    if (args.profile) apply_profile(find_profile(*args.profile), c);
    c.validate();
    if (args.out.empty()) throw ConfigError("generate: --out is required");
    const std::uint64_t seed = args.seed.value_or(0);
    log_line(log, "generating " + std::to_string(c.n_sequences) + " sequences into " + args.out);
    const auto m = generate_dataset(c, seed, args.out);
    out << "dataset " << args.out << '\n'
        << "  sequences " << c.n_sequences << " (train " << m.splits.at("train").size() << ", val "
        << m.splits.at("val").size() << ", test " << m.splits.at("test").size() << ")\n"
        << "  seed " << seed << ", config hash " << m.hash << '\n'
        << "  max nodes per frame " << m.max_nodes_per_frame << '\n'
        << "  collision positive rate " << fixed(m.collision_positive_rate) << '\n';
    return kExitOk;
  });
}

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& log) {
  return guarded(log, [&] {
    RunConfig c;
    if (args.config) c = run_config_from_json(read_text_file(*args.config));
    if (args.profile) apply_profile(find_profile(*args.profile), c);
    if (args.seed) c.seed = *args.seed;
    if (args.out) c.out = *args.out;
    if (args.dataset) c.dataset = *args.dataset;
    if (c.out.empty()) throw ConfigError("train: an output directory is required (--out or 'out')");
    try {
      const auto o = run_training(c, log);
      out << "best epoch " << o.result.best_epoch << ", validation loss " << fixed(o.result.best_val_loss) << '\n'
          << "outputs in " << c.out << '\n';
    } catch (const DivergenceError& e) {
      make_dirs(c.out);
      write_file(fs::path(c.out) / "divergence.txt", std::string(e.what()) + "\n");
      throw;
    }
    return kExitOk;
  });
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& log) {
  return guarded(log, [&] {
    if (args.checkpoint.empty() || args.dataset.empty()) throw ConfigError("eval: --checkpoint and --dataset are required");
    fs::path ckpt = args.checkpoint;
    if (fs::is_directory(ckpt)) ckpt /= "checkpoint.json";
    if (!(args.threshold > 0.0 && args.threshold < 1.0)) throw ConfigError("eval: --threshold must be in (0, 1)");
    const Model model = load_checkpoint(ckpt);
    const auto ev = evaluate_split(model, args.dataset, args.split, args.threshold);
    if (args.out) {
      std::ostringstream csv;
      write_metrics_csv(csv, ev.report);
      write_file(*args.out, csv.str());
      log_line(log, "wrote " + *args.out);
    } else {
      write_metrics_csv(out, ev.report);
    }
    return kExitOk;
  });
}

int cmd_ablate(const AblateArgs& args, std::ostream& out, std::ostream& log) {
  return guarded(log, [&] {
    SweepSpec spec = sweep_spec_from_json(read_text_file(args.config));
    if (args.profile) apply_profile(find_profile(*args.profile), spec.base);
    if (args.seed) spec.base.seed = *args.seed;
    if (args.out) spec.base.out = *args.out;
    if (spec.base.out.empty()) throw ConfigError("ablate: an output directory is required (--out or base 'out')");
    const fs::path root(spec.base.out);
    make_dirs(root);
    const auto cells = expand_sweep(spec);
    std::ostringstream csv;
    csv << "cell,axis,model,hidden_dim,heads,layers,method,relation,f1,ap,auc,loss,status,message\n";
    std::size_t failures = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      RunConfig c = cells[i].config;
      char name[32];
      std::snprintf(name, sizeof name, "cell_%03zu", i);
      c.out = (root / name).string();
      const std::string prefix = std::to_string(i) + ',' + cells[i].axis + ',' + to_string(c.model) + ',' +
                                 std::to_string(c.hidden_dim) + ',' + std::to_string(c.heads) + ',' +
                                 std::to_string(c.layers) + ',' + c.method + ',';
      try {
        const auto o = run_training(c, log);
        const auto ev = evaluate_split(o.result.best, c.dataset, spec.split, c.threshold);
        for (const auto& r : ev.report.relations)
          csv << prefix << r.relation << ',' << format_number(r.f1) << ',' << format_number(r.ap) << ','
              << format_number(r.auc) << ',' << format_number(r.loss) << ",ok,\n";
      } catch (const std::exception& e) {
        ++failures;
        std::string msg = e.what();
        for (auto& ch : msg)
          if (ch == ',' || ch == '\n') ch = ';';
        csv << prefix << ",,,,,failed," << msg << '\n';
        log_line(log, "cell " + std::to_string(i) + " failed: " + e.what());
      }
    }
    write_file(root / "ablation.csv", csv.str());
    out << csv.str();
    return failures ? kExitFailure : kExitOk;
  });
}

int cmd_verify(const VerifyArgs& args, std::ostream& out, std::ostream& log) {
  return guarded(log, [&] {
    if (args.mutate) {
      const auto p = verify::parse_primitive(*args.mutate);
      if (!p) throw ConfigError("verify: unknown primitive '" + *args.mutate + "'");
      debug::inject_sign_fault(*p);
      out << "mutation: sign fault in the backward rule of " << primitive_name(*p) << '\n';
    }
    std::vector<verify::CheckResult> results;
    try {
      results = verify::property_suite(args.seed);
    } catch (...) {
      debug::inject_sign_fault(std::nullopt);
      throw;
    }
    debug::inject_sign_fault(std::nullopt);
    const verify::CheckResult* first_failure = nullptr;
    std::size_t passed = 0;
    for (const auto& r : results) {
      out << (r.passed ? "PASS " : "FAIL ") << r.name << "  " << r.detail << '\n';
      if (r.passed) ++passed;
      else if (!first_failure) first_failure = &r;
    }
    out << passed << "/" << results.size() << " checks passed\n";
    if (first_failure) {
      log << "first failure: " << first_failure->name << ": " << first_failure->detail << '\n';
      return kExitFailure;
    }
    return kExitOk;
  });
}

}  // namespace mtd::cli
