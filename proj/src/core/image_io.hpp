#pragma once
// 8-bit PNG input/output. Tensors hold RGB in [0,1]; palette, grayscale,
// 16-bit and alpha variants are normalized to RGB on read. Writes are
// deterministic: fixed settings, no ancillary chunks.

#include <string>

#include "core/tensor.hpp"

namespace udvd {

// Reads into a (1,3,h,w) tensor with values px/255.
Tensor read_png(const std::string& path);

// Accepts (1,3,h,w) or (1,1,h,w); clamps to [0,1] and rounds to 8 bits.
void write_png(const Tensor& img, const std::string& path);

}  // namespace udvd
