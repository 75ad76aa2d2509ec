#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "ltnvae/dataset.hpp"

namespace ltnvae {

// Two-factor synthetic image generator. Factor "streak" adds diagonal streak
// noise whose amplitude is drawn from disjoint per-level bands; factor
// "scene" selects a deterministic background pattern. The in-distribution
// partitions are {low, moderate} x {stripes-h, checker}; the remaining
// values ({none, heavy} and stripes-v) appear only in the test splits as
// out-of-distribution material.
struct SyntheticConfig {
  int height = 32;
  int width = 32;
  int train_per_partition = 500;
  int calib_per_partition = 100;
  // Base per-combination test count. Scene-OOD combinations are drawn at
  // twice this count so both per-factor test sets are ID/OOD balanced.
  int test_per_combo = 100;
  double jitter = 0.02;

  void validate() const;
  std::string to_json() const;
  static SyntheticConfig from_json(const std::string& js);
};

inline constexpr const char* kStreakFactor = "streak";
inline constexpr const char* kSceneFactor = "scene";

const std::array<std::string, 4>& streak_levels();  // none, low, moderate, heavy
const std::array<std::string, 3>& scene_kinds();    // stripes-h, checker, stripes-v
std::pair<double, double> streak_band(const std::string& level);

// Clean background for a scene kind (no streaks, no jitter).
ImageTensor scene_pattern(const SyntheticConfig& cfg, const std::string& scene);

// One rendered sample; consumes draws from `rng` in a fixed order.
ImageTensor render_sample(const SyntheticConfig& cfg, const std::string& streak,
                          const std::string& scene, Rng& rng);

// Full dataset: train/calib over the four ID partitions, plus one balanced
// test split per factor. Deterministic in (cfg, seed); splits are mutually
// exclusive by construction.
Dataset generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed);

}  // namespace ltnvae
