#pragma once

// Binary parameter file:
//   "SPDW", u32 version (1), u32 tensor count, then per tensor
//   u32 name length, UTF-8 name, u32 ndim, ndim x u32 dims,
//   float64 payload in row-major order.
// Every integer and float is little-endian. Tensors are written in name order.

#include "spdnn/executor.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace spdnn {

inline constexpr std::uint32_t kWeightsVersion = 1;

std::string encode_weights(const ParamStore& params);

/// Throws ParseError (with byte offset) on bad magic, version or truncation.
ParamStore decode_weights(std::string_view bytes);

void save_weights(const std::filesystem::path& path, const ParamStore& params);
ParamStore load_weights(const std::filesystem::path& path);

} // namespace spdnn
