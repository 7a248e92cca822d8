#include "spdnn/weights_io.hpp"

#include "spdnn/error.hpp"
#include "spdnn/io.hpp"

#include <bit>
#include <cstring>

namespace spdnn {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}

void put_f64(std::string& out, double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    std::uint64_t take(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n)
            throw ParseError(std::string("weights file truncated while reading ") + what, pos_);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < n; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += n;
        return v;
    }

    std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(take(4, what)); }
    double f64() { return std::bit_cast<double>(take(8, "tensor payload")); }

    std::string_view bytes(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n)
            throw ParseError(std::string("weights file truncated while reading ") + what, pos_);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t pos() const noexcept { return pos_; }
    bool done() const noexcept { return pos_ == bytes_.size(); }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

} // namespace

std::string encode_weights(const ParamStore& params) {
    std::string out = "SPDW";
    put_u32(out, kWeightsVersion);
    put_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
        for (double v : t.data()) put_f64(out, v);
    }
    return out;
}

ParamStore decode_weights(std::string_view bytes) {
    Reader r(bytes);
    if (r.bytes(4, "magic") != "SPDW") throw ParseError("weights file has bad magic", 0);
    const auto version = r.u32("version");
    if (version != kWeightsVersion)
        throw ParseError("unsupported weights version " + std::to_string(version), 4);
    const auto count = r.u32("tensor count");
    ParamStore params;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto at = r.pos();
        const auto len = r.u32("name length");
        std::string name(r.bytes(len, "tensor name"));
        const auto ndim = r.u32("rank");
        std::vector<std::size_t> shape;
        for (std::uint32_t d = 0; d < ndim; ++d) shape.push_back(r.u32("dimension"));
        const auto n = element_count(shape);
        if (n > (bytes.size() - r.pos()) / 8)
            throw ParseError("weights file truncated in payload of '" + name + "'", r.pos());
        std::vector<double> data(n);
        for (auto& v : data) v = r.f64();
        if (!params.emplace(name, Tensor(std::move(shape), std::move(data))).second)
            throw ParseError("duplicate tensor '" + name + "'", at);
    }
    if (!r.done()) throw ParseError("trailing bytes after last tensor", r.pos());
    return params;
}

void save_weights(const std::filesystem::path& path, const ParamStore& params) {
    write_file_atomic(path, encode_weights(params));
}

ParamStore load_weights(const std::filesystem::path& path) {
    return decode_weights(read_file(path));
}

} // namespace spdnn
