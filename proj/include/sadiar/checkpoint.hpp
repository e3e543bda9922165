#pragma once

// Self-describing model checkpoint: a versioned binary container holding a
// JSON metadata header plus named raw tensors (little-endian f32 or f64).
// A 64-bit save/load round-trip is bit-exact.
//
// Layout: magic "SADCKPT\n" | u32 version | u32 header_len | header JSON |
//         concatenated tensor blobs in header order.

#include <cstring>
#include <string>
#include <vector>

#include <json.hpp>

#include "sadiar/param_store.hpp"
#include "sadiar/tensor.hpp"

namespace sadiar::io {

struct CheckpointTensor {
  std::string name;
  std::string dtype;  // "f32" | "f64"
  std::vector<long> shape;
  std::vector<unsigned char> bytes;
};

struct Checkpoint {
  nlohmann::json meta;  // model hyperparameters, vocab, stage markers
  std::vector<CheckpointTensor> tensors;

  const CheckpointTensor* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

template <typename T>
constexpr const char* dtype_name() {
  if constexpr (std::is_same_v<T, float>)
    return "f32";
  else
    return "f64";
}

template <typename T>
void pack_params(const num::ParamStore<T>& params, Checkpoint& ckpt) {
  for (const auto& [name, t] : params.items()) {
    CheckpointTensor ct;
    ct.name = name;
    ct.dtype = dtype_name<T>();
    ct.shape = t.shape;
    ct.bytes.resize(t.data->size() * sizeof(T));
    std::memcpy(ct.bytes.data(), t.data->data(), ct.bytes.size());
    ckpt.tensors.push_back(std::move(ct));
  }
}

// Loads values into an already-built store; shape mismatches and missing
// names are reported with the offending tensor. f32<->f64 conversion is
// allowed (widening exact).
template <typename T>
void unpack_params(const Checkpoint& ckpt, num::ParamStore<T>& params) {
  for (auto& [name, t] : params.items()) {
    const CheckpointTensor* ct = ckpt.find(name);
    if (ct == nullptr)
      throw DataError("checkpoint: missing tensor '" + name + "'");
    if (ct->shape != t.shape)
      throw DataError("checkpoint: shape mismatch for '" + name +
                      "': file has " + num::shape_str(ct->shape) +
                      ", model needs " + num::shape_str(t.shape));
    const size_t n = t.data->size();
    if (ct->dtype == "f32") {
      if (ct->bytes.size() != n * sizeof(float))
        throw DataError("checkpoint: byte count mismatch for '" + name + "'");
      const float* src = reinterpret_cast<const float*>(ct->bytes.data());
      for (size_t i = 0; i < n; ++i) (*t.data)[i] = static_cast<T>(src[i]);
    } else if (ct->dtype == "f64") {
      if (ct->bytes.size() != n * sizeof(double))
        throw DataError("checkpoint: byte count mismatch for '" + name + "'");
      const double* src = reinterpret_cast<const double*>(ct->bytes.data());
      for (size_t i = 0; i < n; ++i) (*t.data)[i] = static_cast<T>(src[i]);
    } else {
      throw DataError("checkpoint: unknown dtype '" + ct->dtype + "'");
    }
  }
}

}  // namespace sadiar::io
