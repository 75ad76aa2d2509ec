#include "ltnvae/reasoner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

using nlohmann::json;

namespace ltnvae {

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double inertia_of(const std::vector<std::vector<double>>& points,
                  const std::vector<std::vector<double>>& centers,
                  const std::vector<int>& assignment) {
  double s = 0;
  for (std::size_t i = 0; i < points.size(); ++i)
    s += sq_dist(points[i], centers[static_cast<std::size_t>(assignment[i])]);
  return s;
}

}  // namespace

KmeansResult kmeans(const std::vector<std::vector<double>>& points, int k,
                    std::uint64_t seed, int max_iters) {
  if (k < 1) throw DomainError("kmeans: k must be >= 1");
  if (points.size() < static_cast<std::size_t>(k))
    throw DomainError("kmeans: k = " + std::to_string(k) + " exceeds " +
                      std::to_string(points.size()) + " points");
  std::size_t dim = points.front().size();
  for (const auto& p : points)
    if (p.size() != dim) throw ShapeError("kmeans: inconsistent point dimension");

  Rng rng(Rng::derive(seed, 0x6b3a));
  KmeansResult res;
  res.assignment.assign(points.size(), 0);

  // k-means++ style seeding: first center uniform, then proportional to the
  // squared distance from the nearest chosen center.
  res.centers.push_back(points[rng.below(points.size())]);
  std::vector<double> d2(points.size());
  while (static_cast<int>(res.centers.size()) < k) {
    double total = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : res.centers) best = std::min(best, sq_dist(points[i], c));
      d2[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total > 0) {
      double r = rng.uniform() * total;
      double acc = 0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        acc += d2[i];
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.below(points.size());  // all points coincide with a center
    }
    res.centers.push_back(points[pick]);
  }

  auto assign = [&]() {
    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      int best = 0;
      double bd = sq_dist(points[i], res.centers[0]);
      for (int c = 1; c < k; ++c) {
        double d = sq_dist(points[i], res.centers[static_cast<std::size_t>(c)]);
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (res.assignment[i] != best) {
        res.assignment[i] = best;
        changed = true;
      }
    }
    return changed;
  };

  assign();
  double prev = inertia_of(points, res.centers, res.assignment);
  for (res.iterations = 1; res.iterations <= max_iters; ++res.iterations) {
    // Update step: centers move to cluster means; empty clusters keep their
    // previous center.
    std::vector<std::vector<double>> sums(static_cast<std::size_t>(k),
                                          std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      auto c = static_cast<std::size_t>(res.assignment[i]);
      ++counts[c];
      for (std::size_t d = 0; d < dim; ++d) sums[c][d] += points[i][d];
    }
    for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c)
      if (counts[c] > 0)
        for (std::size_t d = 0; d < dim; ++d)
          res.centers[c][d] = sums[c][d] / static_cast<double>(counts[c]);

    bool changed = assign();
    double cur = inertia_of(points, res.centers, res.assignment);
    if (cur > prev + 1e-9 * std::max(1.0, prev))
      throw ContractError("kmeans: inertia increased across an iteration");
    prev = cur;
    if (!changed) break;
  }
  res.inertia = prev;
  return res;
}

std::vector<GmmComponent> fit_gmm(const std::vector<std::vector<double>>& points,
                                  const KmeansResult& clusters,
                                  std::vector<std::string>* warnings) {
  if (points.empty()) throw DomainError("fit_gmm: no points");
  if (clusters.assignment.size() != points.size())
    throw ContractError("fit_gmm: assignment/point count mismatch");
  std::size_t dim = points.front().size();
  std::size_t k = clusters.centers.size();

  std::vector<std::size_t> counts(k, 0);
  for (int a : clusters.assignment) ++counts[static_cast<std::size_t>(a)];

  std::vector<GmmComponent> out;
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) {
      if (warnings)
        warnings->push_back("dropped empty mixture component " + std::to_string(c));
      continue;
    }
    GmmComponent comp;
    comp.center = clusters.centers[c];
    comp.variance.assign(dim, 0.0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (static_cast<std::size_t>(clusters.assignment[i]) != c) continue;
      for (std::size_t d = 0; d < dim; ++d) {
        double diff = points[i][d] - comp.center[d];
        comp.variance[d] += diff * diff;
      }
    }
    for (std::size_t d = 0; d < dim; ++d)
      comp.variance[d] = std::max(comp.variance[d] / static_cast<double>(counts[c]),
                                  kVarianceFloor);
    comp.weight = static_cast<double>(counts[c]) / static_cast<double>(points.size());
    out.push_back(std::move(comp));
  }
  double wsum = 0;
  for (const auto& c : out) wsum += c.weight;
  for (auto& c : out) c.weight /= wsum;
  return out;
}

void ReasonerModel::validate() const {
  if (components.empty()) throw DomainError("reasoner: needs at least one component");
  if (dims.empty()) throw DomainError("reasoner: empty dim set");
  double ws = 0;
  for (const auto& c : components) {
    if (c.center.size() != dims.size() || c.variance.size() != dims.size())
      throw ShapeError("reasoner: component dimension mismatch");
    for (double v : c.variance)
      if (v < kVarianceFloor) throw DomainError("reasoner: variance below floor");
    ws += c.weight;
  }
  if (std::abs(ws - 1.0) > 1e-9) throw DomainError("reasoner: weights must sum to 1");
  if (tau < 0) throw DomainError("reasoner: tau must be >= 0");
}

double ReasonerModel::density_at(const std::vector<double>& point) const {
  if (point.size() != dims.size())
    throw ShapeError("reasoner: point dimension mismatch");
  constexpr double two_pi = 6.283185307179586476925286766559;
  double density = 0;
  for (const auto& c : components) {
    double logp = 0;
    for (std::size_t d = 0; d < dims.size(); ++d) {
      double diff = point[d] - c.center[d];
      logp += -0.5 * std::log(two_pi * c.variance[d]) - diff * diff / (2.0 * c.variance[d]);
    }
    density += c.weight * std::exp(logp);
  }
  return density;
}

double ReasonerModel::score(const LatentCode& code) const {
  std::int64_t needed = *std::max_element(dims.begin(), dims.end()) + 1;
  if (static_cast<std::int64_t>(code.size()) < needed)
    throw ShapeError("reasoner: code shorter than the reserved dims");
  std::vector<double> point;
  point.reserve(dims.size());
  for (auto d : dims) point.push_back(code.mu[static_cast<std::size_t>(d)]);
  return density_at(point);
}

std::pair<bool, double> ReasonerModel::is_ood(const LatentCode& code) const {
  double d = score(code);
  return {d < tau, d};
}

std::string ReasonerModel::to_json() const {
  json comps = json::array();
  for (const auto& c : components)
    comps.push_back({{"center", c.center}, {"variance", c.variance}, {"weight", c.weight}});
  json j{{"factor", factor},
         {"dims", dims},
         {"components", comps},
         {"tau", tau},
         {"quantile_pct", quantile_pct},
         {"seed", seed},
         {"manifest_digest", manifest_digest},
         {"warnings", warnings}};
  return j.dump(2);
}

ReasonerModel ReasonerModel::from_json(const std::string& text) {
  json j = json::parse(text);
  ReasonerModel m;
  m.factor = j.at("factor").get<std::string>();
  m.dims = j.at("dims").get<DimSet>();
  for (const auto& jc : j.at("components")) {
    GmmComponent c;
    c.center = jc.at("center").get<std::vector<double>>();
    c.variance = jc.at("variance").get<std::vector<double>>();
    c.weight = jc.at("weight").get<double>();
    m.components.push_back(std::move(c));
  }
  m.tau = j.at("tau").get<double>();
  m.quantile_pct = j.value("quantile_pct", 5.0);
  m.seed = j.value("seed", 0ull);
  m.manifest_digest = j.value("manifest_digest", std::string{});
  if (j.contains("warnings")) m.warnings = j.at("warnings").get<std::vector<std::string>>();
  m.validate();
  return m;
}

void ReasonerModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write reasoner: " + path);
  out << to_json() << "\n";
}

ReasonerModel ReasonerModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing reasoner file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  return from_json(text);
}

ReasonerModel calibrate(const std::vector<LatentCode>& calibration_codes,
                        const FactorSpec& factor, double quantile_pct,
                        std::uint64_t seed, const std::string& manifest_digest) {
  if (factor.dims.empty())
    throw DomainError("calibrate: factor '" + factor.name + "' has no reserved dims");
  if (quantile_pct < 0 || quantile_pct > 100)
    throw DomainError("calibrate: quantile must be in [0,100]");
  auto k = static_cast<int>(factor.observed.size());
  if (calibration_codes.size() < static_cast<std::size_t>(k))
    throw DomainError("calibrate: fewer calibration points than clusters");

  std::vector<std::vector<double>> points;
  points.reserve(calibration_codes.size());
  for (const auto& code : calibration_codes) {
    std::vector<double> p;
    p.reserve(factor.dims.size());
    for (auto d : factor.dims) {
      if (d < 0 || static_cast<std::size_t>(d) >= code.size())
        throw DomainError("calibrate: reserved dim out of range of encoded latent");
      p.push_back(code.mu[static_cast<std::size_t>(d)]);
    }
    points.push_back(std::move(p));
  }

  ReasonerModel m;
  m.factor = factor.name;
  m.dims = factor.dims;
  m.quantile_pct = quantile_pct;
  m.seed = seed;
  m.manifest_digest = manifest_digest;
  auto clusters = kmeans(points, k, seed);
  m.components = fit_gmm(points, clusters, &m.warnings);

  std::vector<double> densities;
  densities.reserve(points.size());
  for (const auto& p : points) densities.push_back(m.density_at(p));
  std::sort(densities.begin(), densities.end());
  // Nearest-rank percentile; quantile 0 selects the minimum density, so no
  // calibration sample is flagged.
  auto idx = static_cast<std::size_t>(
      std::floor(quantile_pct / 100.0 * static_cast<double>(densities.size() - 1)));
  m.tau = densities[idx];
  m.validate();
  return m;
}

}  // namespace ltnvae
