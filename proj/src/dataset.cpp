#include "ltnvae/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace ltnvae {

std::string to_hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

std::string key_str(const PartitionKey& key) {
  std::string s;
  for (std::size_t i = 0; i < key.size(); ++i) {
    if (i) s += '|';
    s += key[i];
  }
  return s;
}

std::size_t PartitionedDataset::factor_index(const std::string& name) const {
  for (std::size_t i = 0; i < factors.size(); ++i)
    if (factors[i].name == name) return i;
  throw DomainError("unknown factor: " + name);
}

PartitionedDataset build_partitions(const std::vector<Sample>& samples,
                                    const std::vector<FactorSpec>& factors,
                                    const std::string& split_filter) {
  if (factors.empty()) throw ConfigError("build_partitions: no factors declared");
  PartitionedDataset ds;
  ds.factors = factors;
  for (std::size_t si = 0; si < samples.size(); ++si) {
    const Sample& s = samples[si];
    if (!split_filter.empty() && s.split != split_filter) continue;
    PartitionKey key;
    key.reserve(factors.size());
    for (const auto& f : factors) {
      auto it = s.assignment.find(f.name);
      if (it == s.assignment.end())
        throw ConfigError("sample '" + s.path + "' missing factor '" + f.name + "'");
      if (!f.is_observed(it->second))
        throw ConfigError("sample '" + s.path + "' has undeclared value '" + it->second +
                          "' for factor '" + f.name + "'");
      key.push_back(it->second);
    }
    ds.partitions[key].push_back(si);
  }
  return ds;
}

std::vector<std::pair<PartitionKey, PartitionKey>> pair_set(
    const PartitionedDataset& ds, const std::string& factor) {
  std::size_t fi = ds.factor_index(factor);
  std::vector<PartitionKey> keys;
  keys.reserve(ds.partitions.size());
  for (const auto& [k, v] : ds.partitions) keys.push_back(k);
  std::vector<std::pair<PartitionKey, PartitionKey>> out;
  for (std::size_t i = 0; i < keys.size(); ++i)
    for (std::size_t j = i + 1; j < keys.size(); ++j) {
      std::size_t diff = 0, diff_at = 0;
      for (std::size_t c = 0; c < keys[i].size(); ++c)
        if (keys[i][c] != keys[j][c]) {
          ++diff;
          diff_at = c;
        }
      if (diff == 1 && diff_at == fi) out.emplace_back(keys[i], keys[j]);
    }
  for (const auto& [a, b] : out) {
    std::size_t diff = 0;
    for (std::size_t c = 0; c < a.size(); ++c)
      if (a[c] != b[c]) ++diff;
    if (diff != 1) throw ContractError("pair_set: pair differs in more than one factor");
  }
  return out;
}

std::optional<std::size_t> discretize_factor(double value,
                                             const std::vector<double>& edges) {
  if (edges.size() < 2) throw DomainError("discretize_factor: need at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1]))
      throw DomainError("discretize_factor: edges must be strictly increasing");
  if (value < edges.front() || value > edges.back()) return std::nullopt;
  if (value == edges.back()) return edges.size() - 2;  // last bin closed
  std::size_t lo = 0;
  while (lo + 2 < edges.size() && value >= edges[lo + 1]) ++lo;
  return lo;
}

TupleStream::TupleStream(const PartitionedDataset& ds, std::size_t batch,
                         std::uint64_t seed)
    : batch_(batch), seed_(seed) {
  if (batch == 0) throw ConfigError("batch size must be >= 1");
  if (ds.partitions.empty()) throw ConfigError("no partitions to batch");
  min_size_ = SIZE_MAX;
  for (const auto& [k, idx] : ds.partitions) {
    if (idx.size() < batch)
      throw ConfigError("partition " + key_str(k) + " has " + std::to_string(idx.size()) +
                        " samples, fewer than batch size " + std::to_string(batch));
    keys_.push_back(k);
    pools_.push_back(idx);
    min_size_ = std::min(min_size_, idx.size());
  }
}

std::vector<std::vector<std::vector<std::size_t>>> TupleStream::epoch(
    int epoch_index) const {
  std::size_t nb = batches_per_epoch();
  std::vector<std::vector<std::size_t>> shuffled = pools_;
  for (std::size_t p = 0; p < shuffled.size(); ++p) {
    Rng rng(Rng::derive(seed_, 0xba7c0000ull + (static_cast<std::uint64_t>(epoch_index) << 8) + p));
    rng.shuffle(shuffled[p].begin(), shuffled[p].end());
  }
  std::vector<std::vector<std::vector<std::size_t>>> batches(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    batches[b].resize(shuffled.size());
    for (std::size_t p = 0; p < shuffled.size(); ++p)
      batches[b][p].assign(shuffled[p].begin() + static_cast<std::ptrdiff_t>(b * batch_),
                           shuffled[p].begin() + static_cast<std::ptrdiff_t>((b + 1) * batch_));
  }
  return batches;
}

std::vector<std::size_t> Dataset::split_indices(const std::string& split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].split == split) out.push_back(i);
  return out;
}

void write_dataset(const Dataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  std::ostringstream manifest;
  manifest << "# ltnvae dataset manifest v1\n";
  manifest << "# seed: " << ds.seed << "\n";
  manifest << "# config: " << ds.generator_config_json << "\n";
  json jf = json::array();
  for (const auto& f : ds.factors) jf.push_back({{"name", f.name}, {"observed", f.observed}});
  manifest << "# factors: " << jf.dump() << "\n";
  manifest << "path";
  for (const auto& f : ds.factors) manifest << "," << f.name;
  manifest << ",split,partition\n";
  for (const auto& s : ds.samples) {
    fs::path full = fs::path(dir) / s.path;
    fs::create_directories(full.parent_path());
    write_raster(full.string(), s.image);
    PartitionKey key;
    manifest << s.path;
    for (const auto& f : ds.factors) {
      const std::string& v = s.assignment.at(f.name);
      manifest << "," << v;
      key.push_back(v);
    }
    manifest << "," << s.split << "," << key_str(key) << "\n";
  }
  std::ofstream out(fs::path(dir) / "manifest.csv", std::ios::binary);
  if (!out) throw IoError("cannot write manifest in " + dir);
  out << manifest.str();
}

std::string manifest_digest_of(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.csv", std::ios::binary);
  if (!in) throw IoError("missing manifest.csv in " + dir);
  std::ostringstream ss;
  ss << in.rdbuf();
  return to_hex(fnv1a64(ss.str()));
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

Dataset load_dataset(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.csv", std::ios::binary);
  if (!in) throw IoError("missing manifest.csv in " + dir);
  Dataset ds;
  std::string content((std::istreambuf_iterator<char>(in)), {});
  ds.manifest_digest = to_hex(fnv1a64(content));
  std::istringstream lines(content);
  std::string line;
  std::vector<std::string> header;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto strip = [&](const std::string& tag) -> std::optional<std::string> {
        std::string prefix = "# " + tag + ": ";
        if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
        return std::nullopt;
      };
      if (auto v = strip("seed")) ds.seed = std::stoull(*v);
      if (auto v = strip("config")) ds.generator_config_json = *v;
      if (auto v = strip("factors")) {
        for (const auto& jf : json::parse(*v)) {
          FactorSpec f;
          f.name = jf.at("name").get<std::string>();
          f.observed = jf.at("observed").get<std::vector<std::string>>();
          ds.factors.push_back(std::move(f));
        }
      }
      continue;
    }
    auto cells = split_csv_line(line);
    if (header.empty()) {
      header = cells;
      if (header.size() != ds.factors.size() + 3)
        throw ConfigError("manifest column count does not match declared factors");
      continue;
    }
    Sample s;
    s.path = cells.at(0);
    for (std::size_t i = 0; i < ds.factors.size(); ++i)
      s.assignment[ds.factors[i].name] = cells.at(1 + i);
    s.split = cells.at(1 + ds.factors.size());
    s.image = read_raster((fs::path(dir) / s.path).string());
    ds.samples.push_back(std::move(s));
  }
  if (ds.factors.empty()) throw ConfigError("manifest declares no factors: " + dir);
  return ds;
}

}  // namespace ltnvae
