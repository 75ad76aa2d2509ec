#include "ltnvae/synthetic.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

using nlohmann::json;

namespace ltnvae {

namespace {

constexpr int kPeriod = 8;        // background pattern period, pixels
constexpr int kStreakPeriod = 8;  // diagonal streak spacing
constexpr int kStreakWidth = 2;
constexpr float kLo = 0.25f;
constexpr float kHi = 0.65f;

float quantize8(float v) {
  v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return static_cast<float>(std::lround(v * 255.0f)) / 255.0f;
}

}  // namespace

void SyntheticConfig::validate() const {
  if (height < 8 || width < 8) throw ConfigError("generator: image too small");
  if (train_per_partition < 1 || calib_per_partition < 1 || test_per_combo < 1)
    throw ConfigError("generator: sample counts must be >= 1");
  if (jitter < 0) throw ConfigError("generator: jitter must be >= 0");
}

std::string SyntheticConfig::to_json() const {
  json j{{"height", height},
         {"width", width},
         {"train_per_partition", train_per_partition},
         {"calib_per_partition", calib_per_partition},
         {"test_per_combo", test_per_combo},
         {"jitter", jitter}};
  return j.dump();
}

SyntheticConfig SyntheticConfig::from_json(const std::string& js) {
  json j = json::parse(js);
  SyntheticConfig c;
  c.height = j.value("height", c.height);
  c.width = j.value("width", c.width);
  c.train_per_partition = j.value("train_per_partition", c.train_per_partition);
  c.calib_per_partition = j.value("calib_per_partition", c.calib_per_partition);
  c.test_per_combo = j.value("test_per_combo", c.test_per_combo);
  c.jitter = j.value("jitter", c.jitter);
  c.validate();
  return c;
}

const std::array<std::string, 4>& streak_levels() {
  static const std::array<std::string, 4> v = {"none", "low", "moderate", "heavy"};
  return v;
}

const std::array<std::string, 3>& scene_kinds() {
  static const std::array<std::string, 3> v = {"stripes-h", "checker", "stripes-v"};
  return v;
}

std::pair<double, double> streak_band(const std::string& level) {
  if (level == "none") return {0.0, 0.0};
  if (level == "low") return {0.10, 0.16};
  if (level == "moderate") return {0.22, 0.30};
  if (level == "heavy") return {0.45, 0.60};
  throw ConfigError("unknown streak level: " + level);
}

ImageTensor scene_pattern(const SyntheticConfig& cfg, const std::string& scene) {
  ImageTensor img(cfg.height, cfg.width, 1);
  for (int y = 0; y < cfg.height; ++y)
    for (int x = 0; x < cfg.width; ++x) {
      bool on;
      if (scene == "stripes-h") on = (y / (kPeriod / 2)) % 2 == 0;
      else if (scene == "stripes-v") on = (x / (kPeriod / 2)) % 2 == 0;
      else if (scene == "checker")
        on = ((y / (kPeriod / 2)) + (x / (kPeriod / 2))) % 2 == 0;
      else
        throw ConfigError("unknown scene kind: " + scene);
      img.at(y, x, 0) = on ? kHi : kLo;
    }
  return img;
}

ImageTensor render_sample(const SyntheticConfig& cfg, const std::string& streak,
                          const std::string& scene, Rng& rng) {
  ImageTensor img = scene_pattern(cfg, scene);
  auto [lo, hi] = streak_band(streak);
  double amp = lo == hi ? lo : rng.uniform(lo, hi);
  int phase = static_cast<int>(rng.below(kStreakPeriod));
  for (int y = 0; y < cfg.height; ++y)
    for (int x = 0; x < cfg.width; ++x) {
      float v = img.at(y, x, 0);
      if (amp > 0.0 && (x + y + phase) % kStreakPeriod < kStreakWidth)
        v += static_cast<float>(amp);
      v += static_cast<float>(cfg.jitter * rng.normal());
      // Quantizing at render time keeps in-memory data identical to what a
      // write/read round trip through 8-bit rasters produces.
      img.at(y, x, 0) = quantize8(v);
    }
  return img;
}

namespace {

Sample make_sample(const SyntheticConfig& cfg, const std::string& split, int seq,
                   const std::string& streak, const std::string& scene, Rng& rng) {
  Sample s;
  std::ostringstream name;
  name << "imgs/" << split << "/";
  char buf[8];
  std::snprintf(buf, sizeof buf, "%06d", seq);
  name << buf << "_" << streak << "_" << scene << ".pgm";
  s.path = name.str();
  s.assignment[kStreakFactor] = streak;
  s.assignment[kSceneFactor] = scene;
  s.split = split;
  s.image = render_sample(cfg, streak, scene, rng);
  return s;
}

}  // namespace

Dataset generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Dataset ds;
  ds.seed = seed;
  ds.generator_config_json = cfg.to_json();

  FactorSpec streak;
  streak.name = kStreakFactor;
  streak.observed = {"low", "moderate"};
  FactorSpec scene;
  scene.name = kSceneFactor;
  scene.observed = {"stripes-h", "checker"};
  ds.factors = {streak, scene};

  const std::vector<std::string> id_streak = {"low", "moderate"};
  const std::vector<std::string> id_scene = {"stripes-h", "checker"};

  Rng rng(Rng::derive(seed, 0x5e7d47a));
  int seq = 0;
  for (const auto& sv : id_streak)
    for (const auto& sc : id_scene)
      for (int i = 0; i < cfg.train_per_partition; ++i)
        ds.samples.push_back(make_sample(cfg, "train", seq++, sv, sc, rng));
  seq = 0;
  for (const auto& sv : id_streak)
    for (const auto& sc : id_scene)
      for (int i = 0; i < cfg.calib_per_partition; ++i)
        ds.samples.push_back(make_sample(cfg, "calib", seq++, sv, sc, rng));

  // Streak test: every (streak, scene) combination at the base count. Six
  // combinations are streak-OOD ({none,heavy} x 3 scenes) and six are
  // streak-ID, so the split is balanced.
  seq = 0;
  for (const auto& sv : streak_levels())
    for (const auto& sc : scene_kinds())
      for (int i = 0; i < cfg.test_per_combo; ++i)
        ds.samples.push_back(make_sample(cfg, "test_streak", seq++, sv, sc, rng));

  // Scene test: scene-OOD combinations (stripes-v x 4 streak levels) at twice
  // the base count against eight scene-ID combinations at the base count.
  seq = 0;
  for (const auto& sv : streak_levels())
    for (const auto& sc : scene_kinds()) {
      int count = sc == "stripes-v" ? 2 * cfg.test_per_combo : cfg.test_per_combo;
      for (int i = 0; i < count; ++i)
        ds.samples.push_back(make_sample(cfg, "test_scene", seq++, sv, sc, rng));
    }

  return ds;
}

}  // namespace ltnvae
