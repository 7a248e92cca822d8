#pragma once

#include "spdnn/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace spdnn {

/// Binary (P5) greyscale image. 16-bit samples are big-endian on disk.
struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::uint32_t maxval = 255; // 1..65535
    std::vector<std::uint16_t> pixels; // row-major

    /// 1 x H x W tensor with values pixel / maxval.
    Tensor to_tensor() const;

    /// round(clamp(v, 0, 1) * maxval) for every element of a 1 x H x W tensor.
    static GrayImage from_tensor(const Tensor& t, std::uint32_t maxval = 255);

    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Throws ParseError with the byte offset of the problem.
GrayImage decode_pgm(std::string_view bytes);
std::string encode_pgm(const GrayImage& image);

GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

} // namespace spdnn
