#pragma once

#include <string>

#include "iik/tensor.hpp"

// File IO for fields and tensors.
//
// PNG values are treated as linear and mapped to [0,1]; no gamma handling.
// Raw tensors use a fixed little-endian container:
//   "IIKF" | u32 channels | u32 height | u32 width | f32 payload (row-major)
//   "IIKD" | u32 channels | u32 height | u32 width | f64 payload
// IIKF is the interchange format for image fields; IIKD exists so double
// data (checkpoints, accumulators) round-trips bit-exactly.

namespace iik::io {

// Always returns (3,H,W); grayscale is replicated, alpha dropped.
Tensor read_png(const std::string& path);

// Accepts (3,H,W) or (1,H,W); values clamped to [0,1]. bit_depth 8 or 16.
void write_png(const std::string& path, const Tensor& img, int bit_depth = 8);

void write_iikf(const std::string& path, const Tensor32& t);
void write_iikf(const std::string& path, const Tensor& t);  // narrows to f32
Tensor32 read_iikf32(const std::string& path);
Tensor read_iikf(const std::string& path);

void write_iikd(const std::string& path, const Tensor& t);
Tensor read_iikd(const std::string& path);

// Dispatches on the leading magic bytes (PNG signature, IIKF, IIKD).
Tensor read_field(const std::string& path);

}  // namespace iik::io
