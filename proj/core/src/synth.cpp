#include "mtd/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mtd/parallel.hpp"
#include "mtd/rng.hpp"

namespace mtd {

using nlohmann::json;

// --- config ---------------------------------------------------------------

void GeneratorConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) { throw ConfigError("generator config: field '" + field + "' " + why); };
  auto prob = [&](const char* name, double v) {
    if (!(v >= 0.0 && v <= 1.0)) fail(name, "must be a probability in [0, 1]");
  };
  if (n_sequences < 1) fail("n_sequences", "must be >= 1");
  if (min_objects < 1) fail("min_objects", "must be >= 1");
  if (max_objects < min_objects) fail("max_objects", "must be >= min_objects");
  if (feature_dim < 4) fail("feature_dim", "must be >= 4");
  if (appearance_dim < 1) fail("appearance_dim", "must be >= 1");
  if (!(feature_noise >= 0.0)) fail("feature_noise", "must be >= 0");
  prob("miss_probability", miss_probability);
  prob("false_positive_rate", false_positive_rate);
  prob("late_entry_probability", late_entry_probability);
  prob("early_exit_probability", early_exit_probability);
  if (input_frames < 2) fail("input_frames", "must be >= 2");
  if (min_gap < 1) fail("min_gap", "must be >= 1");
  if (max_gap < min_gap) fail("max_gap", "must be >= min_gap");
  if (!(motion_threshold >= 0.0)) fail("motion_threshold", "must be >= 0");
  if (!(min_radius > 0.0)) fail("min_radius", "must be > 0");
  if (!(max_radius >= min_radius && max_radius < 0.25)) fail("max_radius", "must be in [min_radius, 0.25)");
  if (!(min_speed >= 0.0)) fail("min_speed", "must be >= 0");
  if (!(max_speed >= min_speed && max_speed < 0.5)) fail("max_speed", "must be in [min_speed, 0.5)");
  if (!(link_max_cost > 0.0)) fail("link_max_cost", "must be > 0");
  if (!(context_radius > 0.0)) fail("context_radius", "must be > 0");
}

namespace {

json config_json(const GeneratorConfig& c) {
  return json{{"n_sequences", c.n_sequences},
              {"min_objects", c.min_objects},
              {"max_objects", c.max_objects},
              {"feature_dim", c.feature_dim},
              {"appearance_dim", c.appearance_dim},
              {"feature_noise", c.feature_noise},
              {"miss_probability", c.miss_probability},
              {"false_positive_rate", c.false_positive_rate},
              {"input_frames", c.input_frames},
              {"min_gap", c.min_gap},
              {"max_gap", c.max_gap},
              {"motion_threshold", c.motion_threshold},
              {"min_radius", c.min_radius},
              {"max_radius", c.max_radius},
              {"min_speed", c.min_speed},
              {"max_speed", c.max_speed},
              {"late_entry_probability", c.late_entry_probability},
              {"early_exit_probability", c.early_exit_probability},
              {"position_scale", c.position_scale},
              {"velocity_scale", c.velocity_scale},
              {"radius_scale", c.radius_scale},
              {"link_max_cost", c.link_max_cost},
              {"context_radius", c.context_radius},
              {"context_scale", c.context_scale},
              {"closing_scale", c.closing_scale}};
}

template <typename T>
void read_field(const json& j, const char* name, T& out) {
  if (!j.contains(name)) return;
  try {
    out = j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("generator config: field '" + std::string(name) + "' has the wrong type");
  }
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::string generator_config_to_json(const GeneratorConfig& c) { return config_json(c).dump(2); }

GeneratorConfig generator_config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("generator config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("generator config: expected a JSON object");
  if (!j.contains("n_sequences")) throw ConfigError("generator config: missing required field 'n_sequences'");
  const json known = config_json(GeneratorConfig{});
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw ConfigError("generator config: unknown field '" + key + "'");
  GeneratorConfig c;
  read_field(j, "n_sequences", c.n_sequences);
  read_field(j, "min_objects", c.min_objects);
  read_field(j, "max_objects", c.max_objects);
  read_field(j, "feature_dim", c.feature_dim);
  read_field(j, "appearance_dim", c.appearance_dim);
  read_field(j, "feature_noise", c.feature_noise);
  read_field(j, "miss_probability", c.miss_probability);
  read_field(j, "false_positive_rate", c.false_positive_rate);
  read_field(j, "input_frames", c.input_frames);
  read_field(j, "min_gap", c.min_gap);
  read_field(j, "max_gap", c.max_gap);
  read_field(j, "motion_threshold", c.motion_threshold);
  read_field(j, "min_radius", c.min_radius);
  read_field(j, "max_radius", c.max_radius);
  read_field(j, "min_speed", c.min_speed);
  read_field(j, "max_speed", c.max_speed);
  read_field(j, "late_entry_probability", c.late_entry_probability);
  read_field(j, "early_exit_probability", c.early_exit_probability);
  read_field(j, "position_scale", c.position_scale);
  read_field(j, "velocity_scale", c.velocity_scale);
  read_field(j, "radius_scale", c.radius_scale);
  read_field(j, "link_max_cost", c.link_max_cost);
  read_field(j, "context_radius", c.context_radius);
  read_field(j, "context_scale", c.context_scale);
  read_field(j, "closing_scale", c.closing_scale);
  c.validate();
  return c;
}

std::string config_hash(const GeneratorConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(config_json(c).dump())));
  return buf;
}

// --- physics --------------------------------------------------------------

namespace {

struct Body {
  BodyState s;
  double radius;
};

void reflect_axis(double& p, double& v, double r) {
  if (p + r > 1.0) {
    p = 2.0 * (1.0 - r) - p;
    v = -std::abs(v);
  } else if (p - r < 0.0) {
    p = 2.0 * r - p;
    v = std::abs(v);
  }
}

void collide(Body& a, Body& b) {
  const double dx = b.s.x - a.s.x, dy = b.s.y - a.s.y;
  const double dist2 = dx * dx + dy * dy;
  const double reach = a.radius + b.radius;
  if (dist2 >= reach * reach || dist2 == 0.0) return;
  const double approach = (b.s.vx - a.s.vx) * dx + (b.s.vy - a.s.vy) * dy;
  if (approach >= 0.0) return;
  const double dist = std::sqrt(dist2);
  const double nx = dx / dist, ny = dy / dist;
  const double ma = a.radius * a.radius, mb = b.radius * b.radius;
  const double vrel = (a.s.vx - b.s.vx) * nx + (a.s.vy - b.s.vy) * ny;
  const double impulse = 2.0 * ma * mb / (ma + mb) * vrel;
  a.s.vx -= impulse / ma * nx;
  a.s.vy -= impulse / ma * ny;
  b.s.vx += impulse / mb * nx;
  b.s.vy += impulse / mb * ny;
}

// Advances every body one frame. `bodies` must be in a fixed (id) order.
void step(std::vector<Body*>& bodies) {
  for (Body* b : bodies) {
    b->s.x += b->s.vx;
    b->s.y += b->s.vy;
    reflect_axis(b->s.x, b->s.vx, b->radius);
    reflect_axis(b->s.y, b->s.vy, b->radius);
  }
  for (std::size_t i = 0; i < bodies.size(); ++i)
    for (std::size_t j = i + 1; j < bodies.size(); ++j) collide(*bodies[i], *bodies[j]);
}

std::vector<double> random_unit(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      n2 += x * x;
    }
  } while (n2 == 0.0);
  const double inv = 1.0 / std::sqrt(n2);
  for (auto& x : v) x *= inv;
  return v;
}

BodyState random_state(Rng& rng, const GeneratorConfig& c, double radius) {
  BodyState s;
  s.x = rng.uniform(radius, 1.0 - radius);
  s.y = rng.uniform(radius, 1.0 - radius);
  const double speed = rng.uniform(c.min_speed, c.max_speed);
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  s.vx = speed * std::cos(angle);
  s.vy = speed * std::sin(angle);
  return s;
}

// Integrates tracks frame by frame. `place` supplies the entry state of a
// track given the bodies present at that frame.
template <typename Place>
void integrate(std::vector<Track>& tracks, std::size_t last_frame, Place place) {
  std::vector<Body> bodies(tracks.size());
  for (std::size_t f = 0; f <= last_frame; ++f) {
    if (f > 0) {
      std::vector<Body*> moving;
      for (std::size_t t = 0; t < tracks.size(); ++t)
        if (tracks[t].present(f - 1) && tracks[t].present(f)) moving.push_back(&bodies[t]);
      step(moving);
    }
    for (std::size_t t = 0; t < tracks.size(); ++t) {
      if (tracks[t].entry == f) {
        std::vector<const Body*> others;
        for (std::size_t u = 0; u < tracks.size(); ++u)
          if (u != t && tracks[u].present(f) && tracks[u].entry < f) others.push_back(&bodies[u]);
        for (std::size_t u = 0; u < t; ++u)
          if (tracks[u].entry == f) others.push_back(&bodies[u]);
        bodies[t] = Body{place(t, others), tracks[t].radius};
      }
      if (tracks[t].present(f)) tracks[t].states.push_back(bodies[t].s);
    }
  }
}

}  // namespace

Scene run_physics(std::vector<TrackSpec> specs, std::size_t input_frames, std::size_t target_frame) {
  if (input_frames < 1 || input_frames - 1 >= target_frame) throw Error("run_physics: need F - 1 < T");
  Scene scene;
  scene.input_frames = input_frames;
  scene.target_frame = target_frame;
  std::sort(specs.begin(), specs.end(), [](const TrackSpec& a, const TrackSpec& b) { return a.id < b.id; });
  for (const auto& s : specs) {
    if (s.exit < s.entry || s.exit > target_frame) throw Error("run_physics: track " + std::to_string(s.id) + " has invalid entry/exit");
    Track t;
    t.id = s.id;
    t.entry = s.entry;
    t.exit = s.exit;
    t.radius = s.radius;
    t.appearance = s.appearance;
    scene.tracks.push_back(std::move(t));
  }
  integrate(scene.tracks, target_frame, [&](std::size_t t, const std::vector<const Body*>&) { return specs[t].initial; });
  return scene;
}

Scene simulate(const GeneratorConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  Scene scene;
  scene.seed = seed;
  scene.input_frames = c.input_frames;
  const auto gap = static_cast<std::size_t>(rng.integer(static_cast<std::int64_t>(c.min_gap), static_cast<std::int64_t>(c.max_gap)));
  scene.target_frame = c.input_frames - 1 + gap;
  const std::size_t T = scene.target_frame, F = c.input_frames;
  const auto count = static_cast<std::size_t>(rng.integer(static_cast<std::int64_t>(c.min_objects), static_cast<std::int64_t>(c.max_objects)));
  for (std::size_t i = 0; i < count; ++i) {
    Track t;
    t.id = static_cast<std::int64_t>(i);
    t.radius = rng.uniform(c.min_radius, c.max_radius);
    t.appearance = random_unit(rng, c.appearance_dim);
    t.entry = 0;
    if (F >= 3 && rng.bernoulli(c.late_entry_probability))
      t.entry = static_cast<std::size_t>(rng.integer(1, static_cast<std::int64_t>(F - 2)));
    t.exit = T;
    if (rng.bernoulli(c.early_exit_probability))
      t.exit = static_cast<std::size_t>(rng.integer(static_cast<std::int64_t>(t.entry + 1), static_cast<std::int64_t>(T - 1)));
    scene.tracks.push_back(std::move(t));
  }
  integrate(scene.tracks, T, [&](std::size_t t, const std::vector<const Body*>& others) {
    const double r = scene.tracks[t].radius;
    BodyState s = random_state(rng, c, r);
    for (int attempt = 0; attempt < 100; ++attempt) {
      bool clear = true;
      for (const Body* o : others) {
        const double dx = o->s.x - s.x, dy = o->s.y - s.y, reach = o->radius + r;
        if (dx * dx + dy * dy < reach * reach) clear = false;
      }
      if (clear) break;
      s = random_state(rng, c, r);
    }
    return s;
  });
  return scene;
}

std::vector<TrackPairTargets> derive_labels(const Scene& scene, const GeneratorConfig& config) {
  TrackPairTargets collision{kCollision, 1, LabelKind::binary, {}};
  TrackPairTargets motion{kRelativeMotion, 1, LabelKind::binary, {}};
  const std::size_t last_input = scene.input_frames - 1, T = scene.target_frame;
  std::vector<const Track*> present;
  for (const auto& t : scene.tracks)
    if (t.present(last_input)) present.push_back(&t);
  for (std::size_t a = 0; a < present.size(); ++a) {
    for (std::size_t b = a + 1; b < present.size(); ++b) {
      const Track& ta = *present[a];
      const Track& tb = *present[b];
      const std::pair key{std::min(ta.id, tb.id), std::max(ta.id, tb.id)};
      if (ta.exit < T || tb.exit < T) {
        collision.labels[key] = std::nullopt;
        motion.labels[key] = std::nullopt;
        continue;
      }
      double hit = 0.0;
      const double reach = ta.radius + tb.radius;
      for (std::size_t f = last_input + 1; f <= T; ++f) {
        const auto& sa = ta.at(f);
        const auto& sb = tb.at(f);
        const double dx = sa.x - sb.x, dy = sa.y - sb.y;
        if (dx * dx + dy * dy < reach * reach) {
          hit = 1.0;
          break;
        }
      }
      const auto& va = ta.at(T);
      const auto& vb = tb.at(T);
      const double rel = std::hypot(va.vx - vb.vx, va.vy - vb.vy);
      collision.labels[key] = std::vector<double>{hit};
      motion.labels[key] = std::vector<double>{rel > config.motion_threshold ? 1.0 : 0.0};
    }
  }
  return {std::move(collision), std::move(motion)};
}

// --- rendering ------------------------------------------------------------

Tensor feature_projection(const GeneratorConfig& c, std::uint64_t dataset_seed) {
  Rng rng(hash_seed(dataset_seed, 0x70726f6aULL));
  const std::size_t in = c.appearance_dim + 7;
  Tensor p(Shape{c.feature_dim, in});
  const double scale = 1.0 / std::sqrt(static_cast<double>(c.feature_dim));
  for (auto& x : p.data()) x = rng.normal() * scale;
  return p;
}

std::vector<double> state_feature(const Tensor& projection, const GeneratorConfig& c, std::span<const double> appearance,
                                  const BodyState& s, double radius, const std::array<double, 2>& context) {
  std::vector<double> raw(appearance.begin(), appearance.end());
  raw.push_back(c.position_scale * s.x);
  raw.push_back(c.position_scale * s.y);
  raw.push_back(c.velocity_scale * s.vx);
  raw.push_back(c.velocity_scale * s.vy);
  raw.push_back(c.radius_scale * radius);
  raw.push_back(context[0]);
  raw.push_back(context[1]);
  const std::size_t d = projection.rows(), in = projection.cols();
  if (raw.size() != in) throw ShapeError("state_feature: projection expects " + std::to_string(in) + " inputs");
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k < in; ++k) out[i] += projection.at(i, k) * raw[k];
  return out;
}

std::array<double, 2> local_context(const Scene& scene, std::size_t frame, const BodyState& s, std::int64_t self,
                                    const GeneratorConfig& c) {
  double occupancy = 0.0, closing = 0.0;
  const double rho2 = c.context_radius * c.context_radius;
  for (const auto& o : scene.tracks) {
    if (o.id == self || !o.present(frame)) continue;
    const auto& q = o.at(frame);
    const double dx = q.x - s.x, dy = q.y - s.y, d2 = dx * dx + dy * dy;
    const double w = std::exp(-d2 / (2 * rho2));
    occupancy += w;
    if (d2 > 0.0) closing -= w * ((q.vx - s.vx) * dx + (q.vy - s.vy) * dy) / std::sqrt(d2);
  }
  return {c.context_scale * occupancy, c.closing_scale * closing};
}

FrameNodes render_features(const Scene& scene, std::size_t frame, const GeneratorConfig& c, const Tensor& projection,
                           std::uint64_t seed, std::int64_t first_node_id) {
  if (frame >= scene.input_frames) throw Error("render_features: frame " + std::to_string(frame) + " is not an input frame");
  Rng rng(hash_seed(seed, frame));
  FrameNodes out;
  auto noisy = [&](std::vector<double> f) {
    for (auto& x : f) x += c.feature_noise * rng.normal();
    return f;
  };
  for (const auto& t : scene.tracks) {
    if (!t.present(frame)) continue;
    const bool missed = rng.bernoulli(c.miss_probability);
    auto f = noisy(state_feature(projection, c, t.appearance, t.at(frame), t.radius, local_context(scene, frame, t.at(frame), t.id, c)));
    if (missed) continue;
    out.nodes.push_back(Node{0, t.id, std::move(f)});
  }
  if (rng.bernoulli(c.false_positive_rate)) {
    const double r = rng.uniform(c.min_radius, c.max_radius);
    const auto app = random_unit(rng, c.appearance_dim);
    const auto s = random_state(rng, c, r);
    out.nodes.push_back(Node{0, std::nullopt, noisy(state_feature(projection, c, app, s, r, local_context(scene, frame, s, kNoTrack, c)))});
  }
  rng.shuffle(out.nodes);
  for (std::size_t i = 0; i < out.nodes.size(); ++i) out.nodes[i].node_id = first_node_id + static_cast<std::int64_t>(i);
  return out;
}

GeneratedSequence generate_sequence(const GeneratorConfig& c, std::uint64_t dataset_seed, std::size_t index,
                                    const Tensor& projection) {
  const std::uint64_t seed = hash_seed(dataset_seed, index);
  GeneratedSequence out;
  out.scene = simulate(c, seed);
  std::vector<FrameNodes> frames;
  std::int64_t next_id = 0;
  for (std::size_t f = 0; f < c.input_frames; ++f) {
    frames.push_back(render_features(out.scene, f, c, projection, hash_seed(seed, 0x72656e64ULL), next_id));
    next_id += static_cast<std::int64_t>(frames.back().size());
  }
  out.sequence.graph = build_graph(std::move(frames), c.link_max_cost);
  std::vector<GroundTruthObject> truth;
  const std::size_t last = c.input_frames - 1;
  for (const auto& t : out.scene.tracks)
    if (t.present(last)) truth.push_back({t.id, state_feature(projection, c, t.appearance, t.at(last), t.radius, local_context(out.scene, last, t.at(last), t.id, c))});
  const auto track_targets = derive_labels(out.scene, c);
  out.sequence.targets = align_eval_mask(out.sequence.graph.last_frame(), truth, track_targets, c.link_max_cost);
  return out;
}

// --- datasets -------------------------------------------------------------

std::map<std::string, std::vector<std::size_t>> split_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(hash_seed(seed, 0x73706c6974ULL));
  rng.shuffle(idx);
  const auto n_train = static_cast<std::size_t>(std::llround(0.70 * static_cast<double>(n)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(0.15 * static_cast<double>(n))));
  std::map<std::string, std::vector<std::size_t>> out;
  out["train"].assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  out["val"].assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  out["test"].assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
  for (auto& [_, v] : out) std::sort(v.begin(), v.end());
  return out;
}

std::vector<RelationSpec> generated_relations() {
  return {RelationSpec{kCollision, 1, LabelKind::binary, LossMode::bce, 1.0},
          RelationSpec{kRelativeMotion, 1, LabelKind::binary, LossMode::bce, 1.0}};
}

std::filesystem::path sequence_path(const std::filesystem::path& dir, std::size_t index) {
  char name[32];
  std::snprintf(name, sizeof name, "seq_%05zu.json", index);
  return dir / name;
}

namespace {

json manifest_json(const DatasetManifest& m) {
  json relations = json::array();
  for (const auto& r : m.relations)
    relations.push_back(json{{"name", r.name}, {"class_count", r.class_count}, {"kind", to_string(r.kind)}});
  json counts;
  for (const auto& [k, v] : m.splits) counts[k] = v.size();
  return json{{"generator_version", kGeneratorVersion},
              {"prng", Rng::kSpec},
              {"seed", m.seed},
              {"config", config_json(m.config)},
              {"config_hash", m.hash},
              {"splits", m.splits},
              {"counts", counts},
              {"relations", relations},
              {"stats", json{{"max_nodes_per_frame", m.max_nodes_per_frame},
                             {"collision_positive_rate", m.collision_positive_rate}}}};
}

}  // namespace

DatasetManifest generate_dataset(const GeneratorConfig& c, std::uint64_t seed, const std::filesystem::path& dir) {
  c.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create dataset directory '" + dir.string() + "': " + ec.message());
  const Tensor projection = feature_projection(c, seed);
  std::vector<std::size_t> max_nodes(c.n_sequences, 0), positives(c.n_sequences, 0), evaluated(c.n_sequences, 0);
  parallel_for(c.n_sequences, worker_count(), [&](std::size_t i) {
    const auto gen = generate_sequence(c, seed, i, projection);
    for (const auto& f : gen.sequence.graph.frames) max_nodes[i] = std::max(max_nodes[i], f.size());
    if (const auto* t = gen.sequence.find_target(kCollision)) {
      for (std::size_t k = 0; k < t->pairs.size(); ++k) {
        if (!t->mask[k]) continue;
        evaluated[i] += 1;
        positives[i] += t->labels[k][0] != 0.0;
      }
    }
    write_sequence(sequence_path(dir, i), gen.sequence);
  });
  DatasetManifest m;
  m.config = c;
  m.seed = seed;
  m.splits = split_indices(c.n_sequences, seed);
  m.relations = generated_relations();
  m.hash = config_hash(c);
  std::size_t pos = 0, ev = 0;
  for (std::size_t i = 0; i < c.n_sequences; ++i) {
    m.max_nodes_per_frame = std::max(m.max_nodes_per_frame, max_nodes[i]);
    pos += positives[i];
    ev += evaluated[i];
  }
  m.collision_positive_rate = ev ? static_cast<double>(pos) / static_cast<double>(ev) : 0.0;
  const auto path = dir / "manifest.json";
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << manifest_json(m).dump(2) << '\n';
  if (!os) throw IoError("write failed for '" + path.string() + "'");
  return m;
}

DatasetManifest read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open dataset manifest '" + path.string() + "'");
  json j;
  try {
    j = json::parse(is);
    DatasetManifest m;
    m.config = generator_config_from_json(j.at("config").dump());
    m.seed = j.at("seed").get<std::uint64_t>();
    m.splits = j.at("splits").get<std::map<std::string, std::vector<std::size_t>>>();
    m.hash = j.at("config_hash").get<std::string>();
    for (const auto& r : j.at("relations")) {
      RelationSpec spec;
      spec.name = r.at("name").get<std::string>();
      spec.class_count = r.at("class_count").get<std::size_t>();
      spec.kind = parse_label_kind(r.at("kind").get<std::string>());
      m.relations.push_back(std::move(spec));
    }
    m.max_nodes_per_frame = j.at("stats").at("max_nodes_per_frame").get<std::size_t>();
    m.collision_positive_rate = j.at("stats").at("collision_positive_rate").get<double>();
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::vector<Sequence> load_split(const std::filesystem::path& dir, const DatasetManifest& manifest, const std::string& split) {
  auto it = manifest.splits.find(split);
  if (it == manifest.splits.end()) throw ConfigError("dataset has no split named '" + split + "'");
  std::vector<Sequence> out(it->second.size());
  parallel_for(out.size(), worker_count(), [&](std::size_t k) { out[k] = read_sequence(sequence_path(dir, it->second[k])); });
  return out;
}

}  // namespace mtd
