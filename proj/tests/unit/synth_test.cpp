#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "mtd/synth.hpp"

using namespace mtd;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

TrackSpec body(std::int64_t id, double x, double y, double vx, double vy, double r, std::size_t exit) {
  return TrackSpec{id, 0, exit, r, {1.0}, BodyState{x, y, vx, vy}};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("mtd_synth_test_" + name);
  fs::remove_all(p);
  return p;
}

// First continuous time, in frames, at which two bodies on straight lines
// overlap, stepping 1/100 of a frame. No walls; the course must stay inside.
std::optional<double> fine_overlap(BodyState a, BodyState b, double reach, double horizon) {
  const double dt = 0.01;
  for (double t = 0.0; t <= horizon; t += dt) {
    const double dx = (a.x + a.vx * t) - (b.x + b.vx * t), dy = (a.y + a.vy * t) - (b.y + b.vy * t);
    if (std::hypot(dx, dy) < reach) return t;
  }
  return std::nullopt;
}

// Straight re-implementation of the frame rules: entering bodies appear at
// their entry state, others move, bounce off walls, then approaching
// overlapping pairs (in id order) exchange momentum along the centre line.
std::map<std::int64_t, std::vector<BodyState>> resimulate(const Scene& scene) {
  struct B {
    std::int64_t id;
    std::size_t entry, exit;
    double r;
    BodyState s;
  };
  std::vector<B> all;
  for (const auto& t : scene.tracks) all.push_back({t.id, t.entry, t.exit, t.radius, t.states.front()});
  std::sort(all.begin(), all.end(), [](const B& a, const B& b) { return a.id < b.id; });
  std::map<std::int64_t, std::vector<BodyState>> out;
  for (std::size_t f = 0; f <= scene.target_frame; ++f) {
    std::vector<B*> live;
    for (auto& b : all)
      if (b.entry < f && f <= b.exit) live.push_back(&b);
    for (B* b : live) {
      b->s.x += b->s.vx;
      b->s.y += b->s.vy;
      for (int axis = 0; axis < 2; ++axis) {
        double& p = axis == 0 ? b->s.x : b->s.y;
        double& v = axis == 0 ? b->s.vx : b->s.vy;
        if (p > 1.0 - b->r) {
          p = 2.0 - 2.0 * b->r - p;
          v = -std::fabs(v);
        } else if (p < b->r) {
          p = 2.0 * b->r - p;
          v = std::fabs(v);
        }
      }
    }
    for (std::size_t i = 0; i < live.size(); ++i) {
      for (std::size_t j = i + 1; j < live.size(); ++j) {
        B& a = *live[i];
        B& b = *live[j];
        const double dx = b.s.x - a.s.x, dy = b.s.y - a.s.y, d = std::sqrt(dx * dx + dy * dy);
        if (d == 0.0 || d >= a.r + b.r) continue;
        const double nx = dx / d, ny = dy / d;
        const double un = (a.s.vx - b.s.vx) * nx + (a.s.vy - b.s.vy) * ny;
        if (un <= 0.0) continue;
        const double ma = a.r * a.r, mb = b.r * b.r;
        const double ja = 2.0 * mb / (ma + mb) * un, jb = 2.0 * ma / (ma + mb) * un;
        a.s.vx -= ja * nx;
        a.s.vy -= ja * ny;
        b.s.vx += jb * nx;
        b.s.vy += jb * ny;
      }
    }
    for (auto& b : all)
      if (b.entry <= f && f <= b.exit) out[b.id].push_back(b.s);
  }
  return out;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("a body at rest stays put") {
  const auto scene = run_physics({body(0, 0.3, 0.6, 0, 0, 0.05, 12)}, 4, 12);
  for (const auto& s : scene.tracks[0].states) {
    CHECK(s.x == 0.3);
    CHECK(s.y == 0.6);
  }
}

TEST_CASE("first wall reflection at frame 5") {
  const auto scene = run_physics({body(0, 0.5, 0.5, 0.1, 0, 0.05, 10)}, 3, 10);
  const auto& t = scene.tracks[0];
  for (std::size_t f = 0; f < 5; ++f) CHECK(t.at(f).vx > 0);
  CHECK(t.at(4).x == doctest::Approx(0.9));
  CHECK(t.at(5).vx == doctest::Approx(-0.1));
  CHECK(t.at(5).x + 0.05 <= 1.0);
}

TEST_CASE("head-on overlap frame matches a fine-timestep reference") {
  for (double speed : {0.013, 0.021, 0.037, 0.05}) {
    for (double gap : {0.3, 0.41, 0.5}) {
      const BodyState a{0.5 - gap / 2, 0.5, speed, 0}, b{0.5 + gap / 2, 0.5, -speed, 0};
      const auto scene = run_physics({body(0, a.x, a.y, a.vx, a.vy, 0.05, 40), body(1, b.x, b.y, b.vx, b.vy, 0.06, 40)}, 2, 40);
      std::optional<std::size_t> coarse;
      for (std::size_t f = 0; f <= 40 && !coarse; ++f) {
        const auto& sa = scene.tracks[0].at(f);
        const auto& sb = scene.tracks[1].at(f);
        if (std::hypot(sa.x - sb.x, sa.y - sb.y) < 0.11) coarse = f;
      }
      const auto fine = fine_overlap(a, b, 0.11, 40);
      REQUIRE(coarse);
      REQUIRE(fine);
      CHECK(std::abs(static_cast<double>(*coarse) - *fine) <= 1.0);
    }
  }
}

TEST_CASE("labels of constructed scenes") {
  GeneratorConfig c;
  SUBCASE("disjoint stationary bodies") {
    const auto scene = run_physics({body(0, 0.2, 0.2, 0, 0, 0.05, 15), body(1, 0.8, 0.8, 0, 0, 0.05, 15)}, 6, 15);
    const auto labels = derive_labels(scene, c);
    CHECK(labels[0].labels.at({0, 1}) == std::vector<double>{0.0});
    CHECK(labels[1].labels.at({0, 1}) == std::vector<double>{0.0});
  }
  SUBCASE("head-on pair collides") {
    const auto scene = run_physics({body(0, 0.3, 0.5, 0.02, 0, 0.05, 25), body(1, 0.7, 0.5, -0.02, 0, 0.05, 25)}, 6, 25);
    CHECK(derive_labels(scene, c)[0].labels.at({0, 1}) == std::vector<double>{1.0});
  }
  SUBCASE("a pair with an early exit is masked") {
    auto early = body(1, 0.7, 0.5, -0.02, 0, 0.05, 20);
    const auto scene = run_physics({body(0, 0.3, 0.5, 0.02, 0, 0.05, 25), early}, 6, 25);
    for (const auto& rel : derive_labels(scene, c)) CHECK_FALSE(rel.labels.at({0, 1}).has_value());
  }
}

TEST_CASE("labels agree with an independent re-simulation") {
  GeneratorConfig c;
  c.min_objects = 2;
  c.max_objects = 6;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Scene scene = simulate(c, 1000 + seed);
    const auto states = resimulate(scene);
    const auto labels = derive_labels(scene, c);
    const std::size_t last = scene.input_frames - 1, T = scene.target_frame;
    for (const auto& a : scene.tracks) {
      for (const auto& b : scene.tracks) {
        if (a.id >= b.id || !a.present(last) || !b.present(last)) continue;
        const auto& got_c = labels[0].labels.at({a.id, b.id});
        const auto& got_m = labels[1].labels.at({a.id, b.id});
        if (a.exit < T || b.exit < T) {
          CHECK_FALSE(got_c.has_value());
          CHECK_FALSE(got_m.has_value());
          continue;
        }
        const auto& sa = states.at(a.id);
        const auto& sb = states.at(b.id);
        double hit = 0.0;
        for (std::size_t f = last + 1; f <= T; ++f) {
          const auto& p = sa[f - a.entry];
          const auto& q = sb[f - b.entry];
          const double reach = a.radius + b.radius;
          if ((p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y) < reach * reach) hit = 1.0;
        }
        const auto& p = sa.back();
        const auto& q = sb.back();
        const double moving = std::hypot(p.vx - q.vx, p.vy - q.vy) > c.motion_threshold ? 1.0 : 0.0;
        CHECK(got_c == std::vector<double>{hit});
        CHECK(got_m == std::vector<double>{moving});
      }
    }
  }
}

TEST_CASE("scene invariants") {
  GeneratorConfig c;
  c.min_objects = 2;
  c.max_objects = 6;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Scene scene = simulate(c, seed);
    CHECK(scene.input_frames - 1 < scene.target_frame);
    const std::size_t gap = scene.target_frame - (scene.input_frames - 1);
    CHECK(gap >= c.min_gap);
    CHECK(gap <= c.max_gap);
    for (const auto& t : scene.tracks) {
      CHECK(t.entry < t.exit);
      CHECK(t.exit <= scene.target_frame);
      for (const auto& s : t.states) {
        CHECK(s.x >= t.radius - 1e-12);
        CHECK(s.x <= 1.0 - t.radius + 1e-12);
        CHECK(s.y >= t.radius - 1e-12);
        CHECK(s.y <= 1.0 - t.radius + 1e-12);
      }
    }
    // kinetic energy (mass ~ r^2) over frames with no entry or exit
    for (std::size_t f = 1; f <= scene.target_frame; ++f) {
      bool steady = true;
      double e0 = 0.0, e1 = 0.0;
      for (const auto& t : scene.tracks) {
        if (t.present(f - 1) != t.present(f)) steady = false;
        if (!t.present(f - 1) || !t.present(f)) continue;
        const double m = t.radius * t.radius;
        e0 += m * (t.at(f - 1).vx * t.at(f - 1).vx + t.at(f - 1).vy * t.at(f - 1).vy);
        e1 += m * (t.at(f).vx * t.at(f).vx + t.at(f).vy * t.at(f).vy);
      }
      if (steady) CHECK(std::abs(e1 - e0) <= 1e-6 * std::max(1e-12, e0));
    }
  }
}

TEST_CASE("collision labels are monotone in the horizon") {
  GeneratorConfig c;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Scene base = simulate(c, 77 + seed);
    std::vector<TrackSpec> specs;
    for (const auto& t : base.tracks)
      specs.push_back(TrackSpec{t.id, t.entry, t.entry, t.radius, t.appearance, t.states.front()});
    for (auto& s : specs) s.exit = base.target_frame;
    const Scene shorter = run_physics(specs, base.input_frames, base.target_frame);
    for (auto& s : specs) s.exit = base.target_frame + 10;
    const Scene longer = run_physics(specs, base.input_frames, base.target_frame + 10);
    const auto a = derive_labels(shorter, c)[0];
    const auto b = derive_labels(longer, c)[0];
    for (const auto& [key, v] : a.labels)
      if (v && (*v)[0] == 1.0) CHECK(b.labels.at(key) == std::vector<double>{1.0});
  }
}

TEST_CASE("rendering") {
  GeneratorConfig c;
  c.feature_noise = 0;
  c.miss_probability = 0;
  c.false_positive_rate = 0;
  const Tensor proj = feature_projection(c, 4);
  CHECK(proj.shape() == Shape{c.feature_dim, c.appearance_dim + 7});
  const Scene scene = simulate(c, 4);
  SUBCASE("noiseless features are the projected state") {
    const auto fr = render_features(scene, 2, c, proj, 9, 0);
    for (const auto& n : fr.nodes) {
      const auto& t = *std::find_if(scene.tracks.begin(), scene.tracks.end(), [&](const Track& x) { return x.id == *n.track_id; });
      const auto want = state_feature(proj, c, t.appearance, t.at(2), t.radius, local_context(scene, 2, t.at(2), t.id, c));
      CHECK(n.features == want);
    }
    CHECK(render_features(scene, 2, c, proj, 10, 0).nodes.size() == fr.nodes.size());
  }
  SUBCASE("certain misses give empty frames") {
    c.miss_probability = 1.0;
    for (std::size_t f = 0; f < c.input_frames; ++f) CHECK(render_features(scene, f, c, proj, 9, 0).nodes.empty());
  }
  SUBCASE("target frames cannot be rendered") {
    CHECK_THROWS(render_features(scene, c.input_frames, c, proj, 9, 0));
  }
}

TEST_CASE("generator config json") {
  GeneratorConfig c;
  c.n_sequences = 7;
  c.max_objects = 4;
  CHECK(generator_config_from_json(generator_config_to_json(c)) == c);
  CHECK(config_hash(c) == config_hash(generator_config_from_json(generator_config_to_json(c))));
  CHECK_THROWS_WITH_AS(generator_config_from_json("{}"), doctest::Contains("n_sequences"), ConfigError);
  CHECK_THROWS_WITH_AS(generator_config_from_json(R"({"n_sequences": 3, "bogus": 1})"), doctest::Contains("bogus"), ConfigError);
  CHECK_THROWS_WITH_AS(generator_config_from_json(R"({"n_sequences": 3, "miss_probability": 1.5})"),
                       doctest::Contains("miss_probability"), ConfigError);
  CHECK_THROWS_AS(generator_config_from_json(R"({"n_sequences": 3, "feature_dim": 2})"), ConfigError);
  CHECK_THROWS_AS(generator_config_from_json(R"({"n_sequences": 3, "min_gap": 0})"), ConfigError);
}

TEST_CASE("splits") {
  const auto s = split_indices(500, 3);
  CHECK(s.at("train").size() == 350);
  CHECK(s.at("val").size() == 75);
  CHECK(s.at("test").size() == 75);
  CHECK(split_indices(500, 3) == s);
  std::vector<std::size_t> all;
  for (const auto& [_, v] : s) all.insert(all.end(), v.begin(), v.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
}

TEST_CASE("dataset files") {
  GeneratorConfig c;
  c.n_sequences = 1;
  const auto dir = scratch("one");
  const auto m = generate_dataset(c, 5, dir);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir)) files += e.is_regular_file();
  CHECK(files == 2);
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(sequence_path(dir, 0)));
  const auto back = read_manifest(dir);
  CHECK(back.config == c);
  CHECK(back.hash == m.hash);
  CHECK(back.splits == m.splits);
  CHECK(back.relations.size() == 2);
  fs::remove_all(dir);
}

TEST_CASE("same seed gives byte-identical datasets") {
  GeneratorConfig c;
  c.n_sequences = 12;
  const auto a = scratch("a"), b = scratch("b");
  generate_dataset(c, 8, a);
  generate_dataset(c, 8, b);
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
  for (std::size_t i = 0; i < c.n_sequences; ++i) CHECK(slurp(sequence_path(a, i)) == slurp(sequence_path(b, i)));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("per-frame node counts match the recorded manifest") {
  GeneratorConfig c;
  c.n_sequences = 25;
  const Tensor proj = feature_projection(c, 0);
  json got = json::array();
  for (std::size_t i = 0; i < c.n_sequences; ++i) {
    std::vector<std::size_t> counts;
    for (const auto& f : generate_sequence(c, 0, i, proj).sequence.graph.frames) counts.push_back(f.size());
    got.push_back(counts);
  }
  const std::string path = std::string(MTD_TEST_DATA_DIR) + "/golden_node_counts.json";
  if (std::getenv("MTD_REGENERATE_GOLDEN")) std::ofstream(path) << got.dump() << '\n';
  std::ifstream is(path);
  REQUIRE_MESSAGE(is.good(), "missing ", path);
  CHECK(json::parse(is) == got);
}

TEST_CASE("default benchmark positive collision rate is in range") {
  GeneratorConfig c;
  const Tensor proj = feature_projection(c, 0);
  std::size_t pos = 0, total = 0;
  for (std::size_t i = 0; i < c.n_sequences; ++i) {
    const auto gen = generate_sequence(c, 0, i, proj);
    const auto* t = gen.sequence.find_target(kCollision);
    for (std::size_t k = 0; k < t->pairs.size(); ++k) {
      if (!t->mask[k]) continue;
      ++total;
      pos += t->labels[k][0] != 0.0;
    }
  }
  const double rate = static_cast<double>(pos) / static_cast<double>(total);
  CAPTURE(rate);
  CHECK(rate >= 0.10);
  CHECK(rate <= 0.40);
}

}  // TEST_SUITE
