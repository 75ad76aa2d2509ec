#include "ltnvae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace ltnvae {

void ScoredSet::validate() const {
  if (scores.size() != labels.size())
    throw ShapeError("scored set: score/label count mismatch");
  std::size_t pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw DomainError("scored set: labels must be 0/1");
    pos += static_cast<std::size_t>(l);
  }
  if (pos == 0 || pos == labels.size())
    throw DomainError("scored set: AUROC needs both classes present");
  for (double s : scores)
    if (!std::isfinite(s)) throw NumericError("scored set: non-finite score");
}

double auroc(const ScoredSet& s) {
  s.validate();
  std::size_t n = s.scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return s.scores[a] < s.scores[b];
  });

  // Average ranks over tie groups; rank sums stay exact dyadic rationals.
  double rank_sum_pos = 0;
  std::size_t n_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && s.scores[order[j]] == s.scores[order[i]]) ++j;
    double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t)
      if (s.labels[order[t]] == 1) {
        rank_sum_pos += avg_rank;
        ++n_pos;
      }
    i = j;
  }
  double np = static_cast<double>(n_pos);
  double nn = static_cast<double>(n - n_pos);
  // U counts pairs where the OOD score exceeds the ID score (+ half-ties);
  // the complement gives "OOD scores lower", our positive direction.
  double u_high = rank_sum_pos - np * (np + 1.0) / 2.0;
  return (np * nn - u_high) / (np * nn);
}

double mutual_information(const std::vector<int>& factor_labels,
                          const std::vector<double>& latent_values, int bins) {
  if (factor_labels.size() != latent_values.size())
    throw ShapeError("mutual_information: label/value count mismatch");
  if (factor_labels.empty()) throw DomainError("mutual_information: empty input");
  if (bins < 2) throw DomainError("mutual_information: bins must be >= 2");
  int n_labels = *std::max_element(factor_labels.begin(), factor_labels.end()) + 1;
  for (int l : factor_labels)
    if (l < 0) throw DomainError("mutual_information: negative label id");

  auto [lo_it, hi_it] = std::minmax_element(latent_values.begin(), latent_values.end());
  double lo = *lo_it, hi = *hi_it;
  std::size_t n = latent_values.size();

  auto bin_of = [&](double v) -> int {
    if (hi <= lo) return 0;  // constant latent: single occupied bin
    int b = static_cast<int>((v - lo) / (hi - lo) * bins);
    return std::min(b, bins - 1);
  };

  // Integer histograms: degenerate cases (single label, single bin) come out
  // exactly zero instead of accumulating rounding dust.
  std::vector<std::size_t> joint(static_cast<std::size_t>(n_labels) * bins, 0);
  std::vector<std::size_t> c_f(static_cast<std::size_t>(n_labels), 0);
  std::vector<std::size_t> c_b(static_cast<std::size_t>(bins), 0);
  for (std::size_t i = 0; i < n; ++i) {
    int f = factor_labels[i];
    int b = bin_of(latent_values[i]);
    ++joint[static_cast<std::size_t>(f) * bins + b];
    ++c_f[static_cast<std::size_t>(f)];
    ++c_b[static_cast<std::size_t>(b)];
  }

  double mi = 0;
  double dn = static_cast<double>(n);
  for (int f = 0; f < n_labels; ++f)
    for (int b = 0; b < bins; ++b) {
      std::size_t cj = joint[static_cast<std::size_t>(f) * bins + b];
      if (cj == 0) continue;
      double ratio = (static_cast<double>(cj) * dn) /
                     (static_cast<double>(c_f[static_cast<std::size_t>(f)]) *
                      static_cast<double>(c_b[static_cast<std::size_t>(b)]));
      mi += static_cast<double>(cj) / dn * std::log(ratio);
    }
  return std::max(mi, 0.0);
}

MIReport mi_report(const std::vector<std::vector<double>>& latent_mu,
                   const std::vector<FactorColumn>& factors, int bins) {
  if (latent_mu.empty()) throw DomainError("mi_report: no samples");
  std::size_t n_dims = latent_mu.front().size();
  for (const auto& row : latent_mu)
    if (row.size() != n_dims) throw ShapeError("mi_report: ragged latent matrix");

  MIReport report;
  for (const auto& fc : factors) {
    if (fc.label_ids.size() != latent_mu.size())
      throw ShapeError("mi_report: label count mismatch for factor " + fc.factor);
    MIReport::Entry e;
    e.factor = fc.factor;
    e.expected_dim = fc.expected_dim;
    std::vector<double> col(latent_mu.size());
    for (std::size_t d = 0; d < n_dims; ++d) {
      for (std::size_t i = 0; i < latent_mu.size(); ++i) col[i] = latent_mu[i][d];
      e.ranked.emplace_back(static_cast<int>(d),
                            mutual_information(fc.label_ids, col, bins));
    }
    std::stable_sort(e.ranked.begin(), e.ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    e.top_dim = e.ranked[0].first;
    e.top_mi = e.ranked[0].second;
    if (e.ranked.size() > 1) {
      e.second_dim = e.ranked[1].first;
      e.second_mi = e.ranked[1].second;
    }
    e.expected_is_top = e.top_dim == e.expected_dim;
    report.factors.push_back(std::move(e));
  }
  return report;
}

void write_scatter_svg(const std::string& path, const std::vector<double>& xs,
                       const std::vector<double>& ys,
                       const std::vector<int>& category,
                       const std::vector<std::string>& category_names,
                       const std::string& title) {
  if (xs.size() != ys.size() || xs.size() != category.size())
    throw ShapeError("scatter: column length mismatch");
  static const char* palette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a",
                                  "#66a61e", "#e6ab02", "#a6761d", "#666666"};
  constexpr int W = 640, H = 480, M = 48;
  double xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  if (!xs.empty()) {
    auto [a, b] = std::minmax_element(xs.begin(), xs.end());
    auto [c, d] = std::minmax_element(ys.begin(), ys.end());
    xlo = *a, xhi = *b, ylo = *c, yhi = *d;
    if (xhi - xlo < 1e-12) xhi = xlo + 1;
    if (yhi - ylo < 1e-12) yhi = ylo + 1;
  }
  auto sx = [&](double x) { return M + (x - xlo) / (xhi - xlo) * (W - 2 * M); };
  auto sy = [&](double y) { return H - M - (y - ylo) / (yhi - ylo) * (H - 2 * M); };

  std::ofstream out(path);
  if (!out) throw IoError("cannot write svg: " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n"
      << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-family='sans-serif'>"
      << title << "</text>\n";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const char* color = palette[static_cast<std::size_t>(category[i]) % 8];
    out << "<circle cx='" << sx(xs[i]) << "' cy='" << sy(ys[i])
        << "' r='2.5' fill='" << color << "' fill-opacity='0.6'/>\n";
  }
  for (std::size_t c = 0; c < category_names.size(); ++c) {
    double y = 30.0 + 16.0 * static_cast<double>(c);
    out << "<circle cx='" << W - M - 90 << "' cy='" << y << "' r='4' fill='"
        << palette[c % 8] << "'/>\n<text x='" << W - M - 80 << "' y='" << y + 4
        << "' font-family='sans-serif' font-size='12'>" << category_names[c]
        << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace ltnvae
