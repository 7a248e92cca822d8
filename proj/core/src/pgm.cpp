#include "spdnn/pgm.hpp"

#include "spdnn/error.hpp"
#include "spdnn/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace spdnn {

namespace {

class HeaderReader {
public:
    explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

    // Skips whitespace and '#' comments between header tokens.
    void skip() {
        while (pos_ < bytes_.size()) {
            const auto c = static_cast<unsigned char>(bytes_[pos_]);
            if (std::isspace(c)) {
                ++pos_;
            } else if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::uint64_t number(const char* what) {
        skip();
        const auto start = pos_;
        std::uint64_t v = 0;
        while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
            v = v * 10 + static_cast<std::uint64_t>(bytes_[pos_] - '0');
            if (v > 0xFFFFFFFFULL) throw ParseError(std::string("PGM ") + what + " too large", start);
            ++pos_;
        }
        if (pos_ == start)
            throw ParseError(std::string("PGM header: expected ") + what, start);
        return v;
    }

    std::size_t pos() const noexcept { return pos_; }
    void advance() noexcept { ++pos_; }
    std::size_t size() const noexcept { return bytes_.size(); }
    char peek() const noexcept { return bytes_[pos_]; }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

} // namespace

Tensor GrayImage::to_tensor() const {
    Tensor t({1, height, width});
    for (std::size_t i = 0; i < pixels.size(); ++i)
        t[i] = static_cast<double>(pixels[i]) / static_cast<double>(maxval);
    return t;
}

GrayImage GrayImage::from_tensor(const Tensor& t, std::uint32_t maxval) {
    if (t.rank() != 3 || t.dim(0) != 1)
        throw ShapeError("image output must be 1×H×W, got " + shape_string(t.shape()));
    if (maxval < 1 || maxval > 65535) throw ValidationError("PGM maxval must be in 1..65535");
    GrayImage img;
    img.height = t.dim(1);
    img.width = t.dim(2);
    img.maxval = maxval;
    img.pixels.resize(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double v = std::clamp(t[i], 0.0, 1.0);
        img.pixels[i] = static_cast<std::uint16_t>(std::lround(v * maxval));
    }
    return img;
}

GrayImage decode_pgm(std::string_view bytes) {
    if (bytes.size() < 2 || bytes.substr(0, 2) != "P5")
        throw ParseError("not a binary PGM file (magic must be P5)", 0);
    HeaderReader h(bytes.substr(2));
    GrayImage img;
    img.width = h.number("width");
    img.height = h.number("height");
    const auto maxval_at = h.pos() + 2;
    const auto maxval = h.number("maxval");
    if (maxval < 1 || maxval > 65535)
        throw ParseError("PGM maxval " + std::to_string(maxval) + " outside 1..65535", maxval_at);
    img.maxval = static_cast<std::uint32_t>(maxval);
    if (img.width == 0 || img.height == 0) throw ParseError("PGM has zero size", 2);
    if (h.pos() >= h.size() || !std::isspace(static_cast<unsigned char>(h.peek())))
        throw ParseError("PGM header must end with a single whitespace byte", h.pos() + 2);
    h.advance();

    std::size_t offset = h.pos() + 2;
    const std::size_t bpp = img.maxval > 255 ? 2 : 1;
    const std::size_t count = img.width * img.height;
    if (count > (bytes.size() - offset) / bpp)
        throw ParseError("PGM raster truncated: need " + std::to_string(count * bpp) +
                             " bytes, have " + std::to_string(bytes.size() - offset),
                         bytes.size());
    img.pixels.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t v = static_cast<unsigned char>(bytes[offset]);
        if (bpp == 2) v = (v << 8) | static_cast<unsigned char>(bytes[offset + 1]);
        if (v > img.maxval)
            throw ParseError("PGM sample " + std::to_string(v) + " exceeds maxval", offset);
        img.pixels[i] = static_cast<std::uint16_t>(v);
        offset += bpp;
    }
    return img;
}

std::string encode_pgm(const GrayImage& image) {
    if (image.pixels.size() != image.width * image.height)
        throw ValidationError("PGM pixel count does not match its size");
    std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) +
                      "\n" + std::to_string(image.maxval) + "\n";
    const bool wide = image.maxval > 255;
    out.reserve(out.size() + image.pixels.size() * (wide ? 2 : 1));
    for (auto p : image.pixels) {
        if (wide) out += static_cast<char>(p >> 8);
        out += static_cast<char>(p & 0xFF);
    }
    return out;
}

GrayImage read_pgm(const std::filesystem::path& path) {
    return decode_pgm(read_file(path));
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
    write_file_atomic(path, encode_pgm(image));
}

} // namespace spdnn
