// SPDX-License-Identifier: Apache-2.0
#pragma once

// CSTN tensor files:
//   "CSTN" | version u8 (=1) | dtype u8 | rank u8 | rank x u32 dims (LE) |
//   row-major little-endian payload.
// dtype 0 is IEEE-754 binary32; dtype 1 (binary64) is written only by the
// 64-bit build. Readers accept both and convert to Real.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "compstyle/tensor.hpp"

COMPSTYLE_NAMESPACE_BEGIN

inline constexpr std::uint8_t kCstnVersion = 1;
enum class DType : std::uint8_t { float32 = 0, float64 = 1 };

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);
void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

/// Label maps are stored as float32 tensors holding integral values.
Tensor labels_to_tensor(const IntTensor& labels);
IntTensor tensor_to_labels(const Tensor& t);

/// 8-bit binary PGM preview of a [H,W] or [1,H,W] tensor, mapping
/// [lo,hi] to [0,255].
void save_pgm(const std::filesystem::path& path, const Tensor& image, double lo = 0.0, double hi = 1.0);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

COMPSTYLE_NAMESPACE_END
