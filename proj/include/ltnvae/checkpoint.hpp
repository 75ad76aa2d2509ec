#pragma once

#include <cstring>
#include <fstream>
#include <string>

#include <json.hpp>

#include "ltnvae/vae.hpp"

namespace ltnvae {

// Checkpoint = binary parameter blob (<stem>.ckpt) + sidecar metadata
// (<stem>.json). The sidecar carries the architecture, latent size, seed and
// training configuration so a checkpoint is self-describing.

namespace ckpt_detail {

inline constexpr char kMagic[4] = {'L', 'T', 'N', 'V'};
inline constexpr std::uint32_t kVersion = 1;

template <typename V>
void put(std::ofstream& out, const V& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}
template <typename V>
V get(std::ifstream& in, const std::string& path) {
  V v;
  in.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!in) throw IoError("truncated checkpoint: " + path);
  return v;
}

template <typename T>
constexpr std::uint8_t dtype_tag() {
  return sizeof(T) == 4 ? 0 : 1;
}

}  // namespace ckpt_detail

inline nlohmann::json arch_to_json(const ArchitectureConfig& a) {
  return nlohmann::json{{"height", a.height},       {"width", a.width},
                        {"channels", a.channels},   {"conv_depths", a.conv_depths},
                        {"dense_widths", a.dense_widths}, {"latent", a.latent},
                        {"kernel", a.kernel}};
}

inline ArchitectureConfig arch_from_json(const nlohmann::json& j) {
  ArchitectureConfig a;
  a.height = j.at("height").get<int>();
  a.width = j.at("width").get<int>();
  a.channels = j.at("channels").get<int>();
  a.conv_depths = j.at("conv_depths").get<std::vector<int>>();
  a.dense_widths = j.at("dense_widths").get<std::vector<int>>();
  a.latent = j.at("latent").get<int>();
  a.kernel = j.at("kernel").get<int>();
  a.validate();
  return a;
}

template <typename T>
void save_checkpoint(const std::string& stem, const VaeModel<T>& model,
                     nlohmann::json meta) {
  using namespace ckpt_detail;
  std::ofstream out(stem + ".ckpt", std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + stem + ".ckpt");
  out.write(kMagic, 4);
  put(out, kVersion);
  put(out, dtype_tag<T>());
  put(out, static_cast<std::uint32_t>(model.params().size()));
  model.params().for_each([&](const std::string& name,
                              const typename ParameterSet<T>::Entry& e) {
    put(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put(out, static_cast<std::uint8_t>(e.trainable ? 1 : 0));
    put(out, static_cast<std::uint8_t>(e.value.shape.size()));
    for (auto d : e.value.shape) put(out, static_cast<std::int64_t>(d));
    out.write(reinterpret_cast<const char*>(e.value.data.data()),
              static_cast<std::streamsize>(e.value.data.size() * sizeof(T)));
  });
  if (!out) throw IoError("short write: " + stem + ".ckpt");
  out.close();

  meta["format_version"] = kVersion;
  meta["dtype"] = sizeof(T) == 4 ? "float32" : "float64";
  meta["arch"] = arch_to_json(model.arch());
  std::ofstream js(stem + ".json");
  if (!js) throw IoError("cannot write checkpoint metadata: " + stem + ".json");
  js << meta.dump(2) << "\n";
}

inline nlohmann::json load_checkpoint_meta(const std::string& stem) {
  std::ifstream js(stem + ".json");
  if (!js) throw IoError("missing checkpoint metadata: " + stem + ".json");
  return nlohmann::json::parse(js);
}

template <typename T>
VaeModel<T> load_checkpoint(const std::string& stem) {
  using namespace ckpt_detail;
  auto meta = load_checkpoint_meta(stem);
  ArchitectureConfig arch = arch_from_json(meta.at("arch"));

  std::string path = stem + ".ckpt";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("missing checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("bad checkpoint magic: " + path);
  if (get<std::uint32_t>(in, path) != kVersion)
    throw IoError("unsupported checkpoint version: " + path);
  if (get<std::uint8_t>(in, path) != dtype_tag<T>())
    throw IoError("checkpoint dtype does not match requested load type: " + path);
  auto count = get<std::uint32_t>(in, path);
  ParameterSet<T> ps;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto len = get<std::uint16_t>(in, path);
    std::string name(len, '\0');
    in.read(name.data(), len);
    bool trainable = get<std::uint8_t>(in, path) != 0;
    auto ndim = get<std::uint8_t>(in, path);
    Shape shape(ndim);
    for (auto& d : shape) d = get<std::int64_t>(in, path);
    Tensor<T> t(shape);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(T)));
    if (!in) throw IoError("truncated checkpoint: " + path);
    ps.add(name, std::move(t), trainable);
  }
  return VaeModel<T>(arch, std::move(ps));
}

// Loads a checkpoint of either dtype as a float64 model for inference.
inline VaeModel<double> load_checkpoint_as_double(const std::string& stem) {
  auto meta = load_checkpoint_meta(stem);
  std::string dtype = meta.value("dtype", "float32");
  if (dtype == "float64") return load_checkpoint<double>(stem);
  return load_checkpoint<float>(stem).template cast<double>();
}

}  // namespace ltnvae
