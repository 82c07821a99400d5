#include "mtd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace mtd {

using nlohmann::json;

namespace {

json relation_json(const RelationSpec& r) {
  return json{{"name", r.name}, {"class_count", r.class_count}, {"kind", to_string(r.kind)},
              {"loss", to_string(r.loss)}, {"weight", r.weight}};
}

json config_json(const ModelConfig& c) {
  json rel = json::array();
  for (const auto& r : c.relations) rel.push_back(relation_json(r));
  return json{{"model", to_string(c.kind)}, {"input_dim", c.input_dim}, {"hidden_dim", c.hidden_dim},
              {"heads", c.heads}, {"layers", c.layers}, {"max_nodes", c.max_nodes}, {"relations", rel}};
}

ModelConfig config_from(const json& j) {
  ModelConfig c;
  c.kind = parse_model_kind(j.at("model").get<std::string>());
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.max_nodes = j.at("max_nodes").get<std::size_t>();
  for (const auto& r : j.at("relations")) {
    RelationSpec s;
    s.name = r.at("name").get<std::string>();
    s.class_count = r.at("class_count").get<std::size_t>();
    s.kind = parse_label_kind(r.at("kind").get<std::string>());
    s.loss = parse_loss_mode(r.at("loss").get<std::string>());
    s.weight = r.at("weight").get<double>();
    c.relations.push_back(std::move(s));
  }
  c.validate();
  return c;
}

void put_le(std::ostream& os, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

double get_le(const unsigned char* b) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

std::filesystem::path data_path(const std::filesystem::path& manifest) {
  auto p = manifest;
  p.replace_extension(".bin");
  return p;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& c) { return config_json(c).dump(2); }

ModelConfig model_config_from_json(std::string_view text) {
  try {
    return config_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& manifest, const Model& model, const std::string& extra) {
  const auto bin = data_path(manifest);
  json tensors = json::array();
  std::size_t offset = 0;
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    const auto& t = model.params.value(i);
    tensors.push_back(json{{"name", model.params.name(i)}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size();
  }
  json doc{{"format", "mtd-checkpoint"},
           {"version", 1},
           {"config", config_json(model.config)},
           {"tensors", tensors},
           {"scalar_count", offset},
           {"data_file", bin.filename().string()},
           {"byte_order", "little-endian float64"}};
  try {
    doc["metadata"] = json::parse(extra);
  } catch (const json::exception& e) {
    throw Error(std::string("save_checkpoint: metadata is not JSON: ") + e.what());
  }
  {
    std::ofstream os(bin, std::ios::binary);
    if (!os) throw IoError("cannot open '" + bin.string() + "' for writing");
    for (std::size_t i = 0; i < model.params.size(); ++i)
      for (double v : model.params.value(i).data()) put_le(os, v);
    if (!os) throw IoError("write failed for '" + bin.string() + "'");
  }
  std::ofstream os(manifest, std::ios::binary);
  if (!os) throw IoError("cannot open '" + manifest.string() + "' for writing");
  os << doc.dump(2) << '\n';
  if (!os) throw IoError("write failed for '" + manifest.string() + "'");
}

Model load_checkpoint(const std::filesystem::path& manifest) {
  std::ifstream is(manifest, std::ios::binary);
  if (!is || std::filesystem::is_directory(manifest)) throw IoError("cannot open checkpoint '" + manifest.string() + "'");
  Model m;
  json doc;
  try {
    doc = json::parse(is);
    m.config = config_from(doc.at("config"));
  } catch (const json::exception& e) {
    throw ConfigError(manifest.string() + ": " + e.what());
  }
  const auto bin = manifest.parent_path() / doc.at("data_file").get<std::string>();
  std::ifstream bs(bin, std::ios::binary);
  if (!bs) throw IoError("cannot open checkpoint data '" + bin.string() + "'");
  std::vector<unsigned char> raw((std::istreambuf_iterator<char>(bs)), std::istreambuf_iterator<char>());
  const auto total = doc.at("scalar_count").get<std::size_t>();
  if (raw.size() != total * 8)
    throw ConfigError(bin.string() + ": expected " + std::to_string(total * 8) + " bytes, found " + std::to_string(raw.size()));
  const Model reference = Model::init(m.config, 0);
  for (const auto& jt : doc.at("tensors")) {
    const auto name = jt.at("name").get<std::string>();
    const Shape shape = jt.at("shape").get<Shape>();
    const auto offset = jt.at("offset").get<std::size_t>();
    if (!reference.params.contains(name)) throw ConfigError(manifest.string() + ": unexpected tensor '" + name + "'");
    if (reference.params.at(name).shape() != shape)
      throw ConfigError(manifest.string() + ": tensor '" + name + "' has shape " + to_string(shape) + ", model expects " +
                        to_string(reference.params.at(name).shape()));
    const std::size_t n = element_count(shape);
    if (offset + n > total) throw ConfigError(manifest.string() + ": tensor '" + name + "' runs past the data file");
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = get_le(raw.data() + 8 * (offset + i));
    m.params.add(name, Tensor(shape, std::move(data)));
  }
  if (m.params.names() != reference.params.names()) throw ConfigError(manifest.string() + ": tensor list does not match the model");
  return m;
}

}  // namespace mtd
