#pragma once

#include <string>
#include <vector>

#include "ltnvae/common.hpp"

namespace ltnvae {

// Density scores with binary OOD labels (1 = OOD w.r.t. the factor).
struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> labels;

  void validate() const;
};

// AUROC with the convention that a LOWER density is MORE out-of-distribution:
// the returned value is the probability that a random OOD sample scores below
// a random ID sample, ties counted 1/2. Rank statistic with average-rank tie
// correction; the numerator is an exact dyadic rational, so results agree
// bit-for-bit with a pairwise-comparison oracle.
double auroc(const ScoredSet& s);

// I(f; L) = H(f) - H(f | L) in nats. Latent values are discretized into
// `bins` equal-width bins over their observed range; entropies come from the
// joint histogram. A constant latent occupies a single bin and yields 0.
double mutual_information(const std::vector<int>& factor_labels,
                          const std::vector<double>& latent_values, int bins);

struct FactorColumn {
  std::string factor;
  std::vector<int> label_ids;  // per-sample value-id index
  int expected_dim = -1;       // designated dim E_L
};

struct MIReport {
  struct Entry {
    std::string factor;
    std::vector<std::pair<int, double>> ranked;  // (dim, MI) descending
    int expected_dim = -1;                       // E_L
    int top_dim = -1;                            // L_m
    int second_dim = -1;                         // L_sm
    double top_mi = 0;                           // M_m
    double second_mi = 0;                        // M_sm
    bool expected_is_top = false;
  };
  std::vector<Entry> factors;
};

// MI of every latent dimension's mean against each factor, ranked.
MIReport mi_report(const std::vector<std::vector<double>>& latent_mu,
                   const std::vector<FactorColumn>& factors, int bins);

// Simple non-interactive scatter plot of two latent dimensions, one dot per
// sample colored by category id.
void write_scatter_svg(const std::string& path, const std::vector<double>& xs,
                       const std::vector<double>& ys,
                       const std::vector<int>& category,
                       const std::vector<std::string>& category_names,
                       const std::string& title);

}  // namespace ltnvae
