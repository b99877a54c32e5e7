#pragma once
// On-disk formats.
//
//   ".ten":       magic "UDVDTEN1", u32 LE rank, rank u32 LE dims,
//                 then raw 32-bit LE floats.
//   checkpoint:   u32 LE entry count, then per entry a u16 LE name length,
//                 the UTF-8 name, and an embedded ".ten" payload.

#include <string>
#include <utility>
#include <vector>

#include "core/tensor.hpp"

namespace udvd {

// Arbitrary-rank payload of a ".ten" record. Rank-4 entries round-trip
// through Tensor; the PCA basis uses rank 1/2 and degradation maps rank 3.
struct TenData {
  std::vector<uint32_t> dims;
  std::vector<float> values;

  size_t numel() const {
    size_t p = 1;
    for (uint32_t d : dims) p *= d;
    return p;
  }
};

void write_ten(const std::string& path, const TenData& data);
TenData read_ten(const std::string& path);

TenData to_ten(const Tensor& t);             // rank 4
Tensor tensor_from_ten(const TenData& d);    // accepts rank 1..4, pads leading dims

void save_tensor(const Tensor& t, const std::string& path);
Tensor load_tensor(const std::string& path);

// Ordered named-tensor container (checkpoints, PCA basis files).
struct NamedTensors {
  std::vector<std::pair<std::string, TenData>> items;

  const TenData* find(const std::string& name) const;
  void put(const std::string& name, TenData data);
};

void save_container(const NamedTensors& c, const std::string& path);
NamedTensors load_container(const std::string& path);

}  // namespace udvd
