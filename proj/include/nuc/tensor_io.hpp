#pragma once

#include <string>

#include "nuc/tensor.hpp"

namespace nuc {

// Tensor container file: 8-byte magic "NUCTENS1", a JSON header
// {shape, dtype:"f32", byte_order:"LE", name} space-padded so the payload
// starts on a 64-byte boundary, then the raw little-endian f32 buffer.
// Round trips are bit-exact.

struct NamedTensor {
  Tensor tensor;
  std::string name;
};

void write_tensor(const std::string& path, const Tensor& t, const std::string& name = "");
NamedTensor read_tensor(const std::string& path);

// 8-bit binary PGM (P5) for viewing; values are clamped to [0,255] and
// rounded on write. Reading yields a [1,H,W] tensor with values in [0,255].
void write_pgm(const std::string& path, const Tensor& image);
Tensor read_pgm(const std::string& path);

// Reads an image from either container (.nt) or PGM, by file magic.
Tensor read_image_any(const std::string& path);

}  // namespace nuc
