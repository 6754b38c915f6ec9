#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "agmax/graph.hpp"

namespace agmax::model {

/**
 * Checkpoint file layout (little-endian):
 *   magic "AGMX", format version u32, then one record per parameter in store
 *   order: name length u32, name bytes, rank u32, dims u32 each, raw values
 *   in the configured precision (f32 or f64, matching the pipeline's scalar
 *   type). Records run to end of file.
 */
inline constexpr char kCheckpointMagic[4] = {'A', 'G', 'M', 'X'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

namespace detail {

inline void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint32_t read_u32(std::istream& in, const std::string& path) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw Error("checkpoint " + path + ": truncated");
  return v;
}

}  // namespace detail

template <typename T>
void save_checkpoint(const diff::ParameterStore<T>& store,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("checkpoint: cannot open " + path + " for writing");
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_u32(out, kCheckpointVersion);
  for (const auto& [name, node] : store) {
    detail::write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    const auto& shape = node->value.shape();
    detail::write_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (const std::size_t d : shape) {
      detail::write_u32(out, static_cast<std::uint32_t>(d));
    }
    const auto data = node->value.data();
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(T)));
  }
  if (!out) throw Error("checkpoint: write failed for " + path);
}

/**
 * Load values into an existing store (built from config). Validates magic,
 * version, and exact shape agreement; every parameter in the store must be
 * present in the file.
 */
template <typename T>
void load_checkpoint(diff::ParameterStore<T>& store, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw Error("checkpoint " + path + ": bad magic bytes");
  }
  const std::uint32_t version = detail::read_u32(in, path);
  if (version != kCheckpointVersion) {
    throw Error("checkpoint " + path + ": unsupported version " +
                std::to_string(version));
  }
  std::size_t loaded = 0;
  while (true) {
    std::uint32_t name_len = 0;
    in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
    if (in.eof()) break;
    if (!in) throw Error("checkpoint " + path + ": truncated");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint32_t rank = detail::read_u32(in, path);
    diff::Shape shape(rank);
    for (std::uint32_t i = 0; i < rank; ++i) {
      shape[i] = detail::read_u32(in, path);
    }
    if (!store.contains(name)) {
      throw Error("checkpoint " + path + ": unknown parameter '" + name + "'");
    }
    auto& node = store.get(name);
    if (node->value.shape() != shape) {
      throw Error("checkpoint " + path + ": shape mismatch for '" + name +
                  "': file " + ShapeError::to_string(shape) + " vs config " +
                  ShapeError::to_string(node->value.shape()));
    }
    diff::Tensor<T> tensor(shape);
    auto data = tensor.data();
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(T)));
    if (!in) throw Error("checkpoint " + path + ": truncated values for '" +
                         name + "'");
    node->value = std::move(tensor);
    node->grad = diff::Tensor<T>(node->value.shape());
    ++loaded;
  }
  if (loaded != store.size()) {
    throw Error("checkpoint " + path + ": has " + std::to_string(loaded) +
                " parameters, config expects " + std::to_string(store.size()));
  }
}

}  // namespace agmax::model
