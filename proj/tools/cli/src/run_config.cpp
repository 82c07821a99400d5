#include "mtd/cli/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace mtd::cli {

using nlohmann::json;

namespace {

constexpr const char* kSingle = "single-task:";

[[noreturn]] void fail(const std::string& field, const std::string& why) {
  throw ConfigError("run config: field '" + field + "' " + why);
}

template <typename T>
void read(const json& j, const char* name, T& out) {
  if (!j.contains(name)) return;
  try {
    out = j.at(name).get<T>();
  } catch (const json::exception&) {
    fail(name, "has the wrong type");
  }
}

void check_keys(const json& j, std::initializer_list<const char*> known, const std::string& what) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(what + ": unknown field '" + key + "'");
  }
}

json parse_object(std::string_view text, const std::string& what) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(what + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError(what + ": expected a JSON object");
  return j;
}

std::optional<std::string> single_relation(const std::string& method) {
  if (method.rfind(kSingle, 0) == 0) return method.substr(std::string(kSingle).size());
  return std::nullopt;
}

json to_json(const RunConfig& c) {
  json rel = json::array();
  for (const auto& r : c.relations) rel.push_back(json{{"name", r.name}, {"loss", to_string(r.loss)}, {"weight", r.weight}});
  return json{{"dataset", c.dataset},
              {"relations", rel},
              {"method", c.method},
              {"model", to_string(c.model)},
              {"hidden_dim", c.hidden_dim},
              {"heads", c.heads},
              {"layers", c.layers},
              {"max_nodes", c.max_nodes},
              {"learning_rate", c.learning_rate},
              {"lr_schedule", to_string(c.lr_schedule)},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"seed", c.seed},
              {"out", c.out},
              {"threshold", c.threshold}};
}

RunConfig from_json(const json& j) {
  check_keys(j,
             {"dataset", "relations", "method", "model", "hidden_dim", "heads", "layers", "max_nodes", "learning_rate",
              "lr_schedule", "epochs", "batch_size", "seed", "out", "threshold"},
             "run config");
  RunConfig c;
  read(j, "dataset", c.dataset);
  read(j, "method", c.method);
  read(j, "hidden_dim", c.hidden_dim);
  read(j, "heads", c.heads);
  read(j, "layers", c.layers);
  read(j, "max_nodes", c.max_nodes);
  read(j, "learning_rate", c.learning_rate);
  read(j, "epochs", c.epochs);
  read(j, "batch_size", c.batch_size);
  read(j, "seed", c.seed);
  read(j, "out", c.out);
  read(j, "threshold", c.threshold);
  if (j.contains("model")) {
    std::string s;
    read(j, "model", s);
    c.model = parse_model_kind(s);
  }
  if (j.contains("lr_schedule")) {
    std::string s;
    read(j, "lr_schedule", s);
    c.lr_schedule = parse_lr_schedule(s);
  }
  if (j.contains("relations")) {
    if (!j.at("relations").is_array()) fail("relations", "must be an array");
    c.relations.clear();
    for (const auto& r : j.at("relations")) {
      if (!r.is_object() || !r.contains("name")) fail("relations", "entries need a 'name'");
      check_keys(r, {"name", "loss", "weight"}, "run config relation");
      RelationChoice rc;
      read(r, "name", rc.name);
      if (r.contains("loss")) {
        std::string s;
        read(r, "loss", s);
        rc.loss = parse_loss_mode(s);
      }
      read(r, "weight", rc.weight);
      c.relations.push_back(std::move(rc));
    }
  }
  return c;
}

}  // namespace

void RunConfig::validate() const {
  if (relations.empty()) fail("relations", "must list at least one relation");
  std::set<std::string> names;
  for (const auto& r : relations) {
    if (r.name.empty()) fail("relations", "has an entry with an empty name");
    if (!names.insert(r.name).second) fail("relations", "lists '" + r.name + "' twice");
    if (!(r.weight >= 0.0)) fail("relations", "weight of '" + r.name + "' must be >= 0");
  }
  if (method != "multi-task") {
    const auto one = single_relation(method);
    if (!one) fail("method", "must be 'multi-task' or 'single-task:<relation>', got '" + method + "'");
    if (!names.count(*one)) fail("method", "names relation '" + *one + "' which is not in 'relations'");
  }
  if (hidden_dim == 0) fail("hidden_dim", "must be positive");
  if (heads == 0) fail("heads", "must be positive");
  if (layers == 0) fail("layers", "must be positive");
  if (!(learning_rate > 0.0)) fail("learning_rate", "must be positive");
  if (epochs == 0) fail("epochs", "must be positive");
  if (batch_size == 0) fail("batch_size", "must be positive");
  if (!(threshold > 0.0 && threshold < 1.0)) fail("threshold", "must be in (0, 1)");
}

std::string run_config_to_json(const RunConfig& c) { return to_json(c).dump(2); }

RunConfig run_config_from_json(std::string_view text) {
  RunConfig c = from_json(parse_object(text, "run config"));
  c.validate();
  return c;
}

std::vector<RelationSpec> resolve_relations(const RunConfig& c, const DatasetManifest& manifest) {
  const auto one = single_relation(c.method);
  std::vector<RelationSpec> out;
  for (const auto& r : c.relations) {
    if (one && r.name != *one) continue;
    auto it = std::find_if(manifest.relations.begin(), manifest.relations.end(),
                           [&](const RelationSpec& m) { return m.name == r.name; });
    if (it == manifest.relations.end()) throw ConfigError("relation '" + r.name + "' is not labelled in the dataset");
    RelationSpec spec = *it;
    spec.loss = r.loss;
    spec.weight = r.weight;
    spec.validate();
    out.push_back(std::move(spec));
  }
  return out;
}

Profile find_profile(std::string_view name) {
  if (name == "benchmark") return {"benchmark", 100, 500};
  if (name == "ci") return {"ci", 5, 500};
  if (name == "smoke") return {"smoke", 1, 20};
  throw ConfigError("unknown profile '" + std::string(name) + "' (expected benchmark, ci or smoke)");
}

void apply_profile(const Profile& p, RunConfig& c) {
  if (p.epochs) c.epochs = *p.epochs;
}

void apply_profile(const Profile& p, GeneratorConfig& c) {
  if (p.n_sequences) c.n_sequences = *p.n_sequences;
}

SweepSpec sweep_spec_from_json(std::string_view text) {
  const json j = parse_object(text, "sweep spec");
  check_keys(j, {"base", "axes", "mode", "split"}, "sweep spec");
  SweepSpec s;
  if (j.contains("base")) {
    if (!j.at("base").is_object()) throw ConfigError("sweep spec: field 'base' must be an object");
    s.base = from_json(j.at("base"));
  }
  s.base.validate();
  if (j.contains("mode")) {
    const std::string m = j.at("mode").is_string() ? j.at("mode").get<std::string>() : "";
    if (m == "per-axis") s.mode = SweepSpec::Mode::per_axis;
    else if (m == "cross") s.mode = SweepSpec::Mode::cross;
    else throw ConfigError("sweep spec: field 'mode' must be 'per-axis' or 'cross'");
  }
  if (j.contains("split")) {
    if (!j.at("split").is_string()) throw ConfigError("sweep spec: field 'split' must be a string");
    s.split = j.at("split").get<std::string>();
  }
  if (j.contains("axes")) {
    const json& a = j.at("axes");
    if (!a.is_object()) throw ConfigError("sweep spec: field 'axes' must be an object");
    check_keys(a, {"hidden_dim", "heads", "layers", "method", "model"}, "sweep spec axes");
    auto list = [&](const char* name, auto& out) {
      if (!a.contains(name)) return;
      try {
        out = a.at(name).get<std::decay_t<decltype(out)>>();
      } catch (const json::exception&) {
        throw ConfigError(std::string("sweep spec: axis '") + name + "' has the wrong type");
      }
      if (out.empty()) throw ConfigError(std::string("sweep spec: axis '") + name + "' is empty");
    };
    list("hidden_dim", s.hidden_dim);
    list("heads", s.heads);
    list("layers", s.layers);
    list("method", s.method);
    std::vector<std::string> models;
    list("model", models);
    for (const auto& m : models) s.model.push_back(parse_model_kind(m));
  }
  return s;
}

std::vector<SweepCell> expand_sweep(const SweepSpec& spec) {
  std::vector<SweepCell> cells;
  auto push = [&](std::string axis, RunConfig c) {
    c.validate();
    for (const auto& existing : cells)
      if (existing.config == c) return;
    cells.push_back({std::move(axis), std::move(c)});
  };
  if (spec.mode == SweepSpec::Mode::per_axis) {
    push("base", spec.base);
    for (auto v : spec.hidden_dim) {
      RunConfig c = spec.base;
      c.hidden_dim = v;
      push("hidden_dim", c);
    }
    for (auto v : spec.heads) {
      RunConfig c = spec.base;
      c.heads = v;
      push("heads", c);
    }
    for (auto v : spec.layers) {
      RunConfig c = spec.base;
      c.layers = v;
      push("layers", c);
    }
    for (const auto& v : spec.method) {
      RunConfig c = spec.base;
      c.method = v;
      push("method", c);
    }
    for (auto v : spec.model) {
      RunConfig c = spec.base;
      c.model = v;
      push("model", c);
    }
    return cells;
  }
  auto or_base = [](const auto& axis, auto base) { return axis.empty() ? std::vector{base} : axis; };
  for (auto m : or_base(spec.model, spec.base.model))
    for (auto d : or_base(spec.hidden_dim, spec.base.hidden_dim))
      for (auto k : or_base(spec.heads, spec.base.heads))
        for (auto l : or_base(spec.layers, spec.base.layers))
          for (const auto& meth : or_base(spec.method, spec.base.method)) {
            RunConfig c = spec.base;
            c.model = m;
            c.hidden_dim = d;
            c.heads = k;
            c.layers = l;
            c.method = meth;
            push("cross", c);
          }
  return cells;
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace mtd::cli
