#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltnvae/dataset.hpp"
#include "ltnvae/vae.hpp"

namespace ltnvae {

struct KmeansResult {
  std::vector<std::vector<double>> centers;
  std::vector<int> assignment;
  double inertia = 0;
  int iterations = 0;
};

// Lloyd's algorithm from k-means++-style seeding, run to an assignment
// fixpoint or max_iters. Inertia is verified non-increasing every iteration.
KmeansResult kmeans(const std::vector<std::vector<double>>& points, int k,
                    std::uint64_t seed, int max_iters = 100);

struct GmmComponent {
  std::vector<double> center;
  std::vector<double> variance;  // diagonal, floored at 1e-6
  double weight = 0;
};

inline constexpr double kVarianceFloor = 1e-6;

// One Gaussian per k-means center: center = cluster center, variance =
// per-cluster sample variance (floored), weight = cluster fraction. Empty
// clusters are dropped (with a warning recorded) and weights renormalized.
std::vector<GmmComponent> fit_gmm(const std::vector<std::vector<double>>& points,
                                  const KmeansResult& clusters,
                                  std::vector<std::string>* warnings = nullptr);

// Per-factor runtime OOD reasoner: a Gaussian mixture over the factor's
// designated latent dimensions plus the density threshold tau.
struct ReasonerModel {
  std::string factor;
  DimSet dims;
  std::vector<GmmComponent> components;
  double tau = 0;
  double quantile_pct = 5.0;
  std::uint64_t seed = 0;
  std::string manifest_digest;
  std::vector<std::string> warnings;

  void validate() const;

  // Mixture density at the code's mean restricted to dims. The encoded mean
  // (not a stochastic sample) is scored so runtime verdicts are
  // deterministic.
  double score(const LatentCode& code) const;
  double density_at(const std::vector<double>& point) const;

  // flag = density < tau (strictly); the density rides along for AUROC.
  std::pair<bool, double> is_ood(const LatentCode& code) const;

  std::string to_json() const;
  static ReasonerModel from_json(const std::string& text);
  void save(const std::string& path) const;
  static ReasonerModel load(const std::string& path);
};

// Builds the reasoner for one factor: projects the calibration codes' means
// onto the factor's dims, clusters with k = |observed values|, fits the
// mixture and sets tau to the quantile_pct-th percentile of the calibration
// densities.
ReasonerModel calibrate(const std::vector<LatentCode>& calibration_codes,
                        const FactorSpec& factor, double quantile_pct,
                        std::uint64_t seed, const std::string& manifest_digest);

}  // namespace ltnvae
