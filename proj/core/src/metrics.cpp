#include "spdnn/metrics.hpp"

#include "spdnn/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

namespace spdnn {

namespace {

struct Plane {
    std::size_t height = 0;
    std::size_t width = 0;
    const double* data = nullptr;

    double at(std::size_t y, std::size_t x) const { return data[y * width + x]; }
};

Plane plane_of(const Tensor& t, const char* what) {
    if (t.rank() == 3 && t.dim(0) == 1) return {t.dim(1), t.dim(2), t.raw()};
    if (t.rank() == 2) return {t.dim(0), t.dim(1), t.raw()};
    throw ShapeError(std::string(what) + " image must be 1×H×W, got " + shape_string(t.shape()));
}

std::pair<Plane, Plane> planes(const Tensor& a, const Tensor& b) {
    auto pa = plane_of(a, "predicted");
    auto pb = plane_of(b, "reference");
    if (pa.height != pb.height || pa.width != pb.width)
        throw ShapeError("image dimensions differ: " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
    if (pa.height == 0 || pa.width == 0) throw ShapeError("empty image");
    return {pa, pb};
}

bool is_constant(const Plane& p) {
    const auto n = p.height * p.width;
    return std::all_of(p.data, p.data + n, [&](double v) { return v == p.data[0]; });
}

constexpr int kSsimRadius = 5;
constexpr double kSsimSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;
constexpr std::size_t kUqiWindow = 8;

// Quality index of one window, with the usual rules for flat windows.
double window_q(const Plane& a, const Plane& b, std::size_t y0, std::size_t x0, std::size_t h,
                std::size_t w) {
    const double n = static_cast<double>(h * w);
    double sa = 0, sb = 0;
    bool flat_a = true, flat_b = true;
    const double a0 = a.at(y0, x0), b0 = b.at(y0, x0);
    for (std::size_t y = y0; y < y0 + h; ++y)
        for (std::size_t x = x0; x < x0 + w; ++x) {
            sa += a.at(y, x);
            sb += b.at(y, x);
            flat_a = flat_a && a.at(y, x) == a0;
            flat_b = flat_b && b.at(y, x) == b0;
        }
    const double ma = sa / n, mb = sb / n;
    double vaa = 0, vbb = 0, vab = 0;
    for (std::size_t y = y0; y < y0 + h; ++y)
        for (std::size_t x = x0; x < x0 + w; ++x) {
            const double da = a.at(y, x) - ma, db = b.at(y, x) - mb;
            vaa += da * da;
            vbb += db * db;
            vab += da * db;
        }
    vaa /= n;
    vbb /= n;
    vab /= n;
    const double mean_den = ma * ma + mb * mb;
    const double var_den = (flat_a && flat_b) ? 0.0 : vaa + vbb;
    if (mean_den == 0.0 && var_den == 0.0) return 1.0;
    if (var_den == 0.0) return 2.0 * ma * mb / mean_den;
    if (mean_den == 0.0) return 2.0 * vab / var_den;
    return 4.0 * vab * ma * mb / (var_den * mean_den);
}

} // namespace

double ssim(const Tensor& a_, const Tensor& b_) {
    const auto [a, b] = planes(a_, b_);
    std::array<double, 2 * kSsimRadius + 1> g{};
    for (int d = -kSsimRadius; d <= kSsimRadius; ++d)
        g[static_cast<std::size_t>(d + kSsimRadius)] =
            std::exp(-(d * d) / (2.0 * kSsimSigma * kSsimSigma));

    const auto H = static_cast<long>(a.height), W = static_cast<long>(a.width);
    double total = 0.0;
    for (long y = 0; y < H; ++y) {
        const long y0 = std::max(0L, y - kSsimRadius), y1 = std::min(H - 1, y + kSsimRadius);
        for (long x = 0; x < W; ++x) {
            const long x0 = std::max(0L, x - kSsimRadius), x1 = std::min(W - 1, x + kSsimRadius);
            double wsum = 0, ma = 0, mb = 0;
            for (long v = y0; v <= y1; ++v)
                for (long u = x0; u <= x1; ++u) {
                    const double w = g[static_cast<std::size_t>(v - y + kSsimRadius)] *
                                     g[static_cast<std::size_t>(u - x + kSsimRadius)];
                    wsum += w;
                    ma += w * a.at(static_cast<std::size_t>(v), static_cast<std::size_t>(u));
                    mb += w * b.at(static_cast<std::size_t>(v), static_cast<std::size_t>(u));
                }
            ma /= wsum;
            mb /= wsum;
            double vaa = 0, vbb = 0, vab = 0;
            for (long v = y0; v <= y1; ++v)
                for (long u = x0; u <= x1; ++u) {
                    const double w = g[static_cast<std::size_t>(v - y + kSsimRadius)] *
                                     g[static_cast<std::size_t>(u - x + kSsimRadius)];
                    const double da = a.at(static_cast<std::size_t>(v), static_cast<std::size_t>(u)) - ma;
                    const double db = b.at(static_cast<std::size_t>(v), static_cast<std::size_t>(u)) - mb;
                    vaa += w * da * da;
                    vbb += w * db * db;
                    vab += w * da * db;
                }
            vaa /= wsum;
            vbb /= wsum;
            vab /= wsum;
            total += ((2 * ma * mb + kC1) * (2 * vab + kC2)) /
                     ((ma * ma + mb * mb + kC1) * (vaa + vbb + kC2));
        }
    }
    return total / static_cast<double>(H * W);
}

std::optional<double> uqi(const Tensor& a_, const Tensor& b_) {
    const auto [a, b] = planes(a_, b_);
    if (is_constant(a) || is_constant(b)) return std::nullopt;
    const auto wh = std::min(kUqiWindow, a.height), ww = std::min(kUqiWindow, a.width);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t y = 0; y + wh <= a.height; ++y)
        for (std::size_t x = 0; x + ww <= a.width; ++x) {
            total += window_q(a, b, y, x, wh, ww);
            ++count;
        }
    return total / static_cast<double>(count);
}

std::optional<double> pcc(const Tensor& a_, const Tensor& b_) {
    const auto [a, b] = planes(a_, b_);
    if (is_constant(a) || is_constant(b)) return std::nullopt;
    const auto n = a.height * a.width;
    double sa = 0, sb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sa += a.data[i];
        sb += b.data[i];
    }
    const double ma = sa / static_cast<double>(n), mb = sb / static_cast<double>(n);
    double vaa = 0, vbb = 0, vab = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a.data[i] - ma, db = b.data[i] - mb;
        vaa += da * da;
        vbb += db * db;
        vab += da * db;
    }
    return vab / std::sqrt(vaa * vbb);
}

MetricsReport compute_metrics(const Tensor& pred, const Tensor& ref) {
    const auto [p, r] = planes(pred, ref);
    const auto n = p.height * p.width;
    double se = 0, ae = 0, signal = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = r.data[i] - p.data[i];
        se += d * d;
        ae += std::abs(d);
        signal += r.data[i] * r.data[i];
    }
    constexpr double inf = std::numeric_limits<double>::infinity();
    MetricsReport m;
    m.mse = se / static_cast<double>(n);
    m.rmse = std::sqrt(m.mse);
    m.mae = ae / static_cast<double>(n);
    m.psnr = m.mse == 0.0 ? inf : -10.0 * std::log10(m.mse);
    m.snr = se == 0.0 ? inf : 10.0 * std::log10(signal / se);
    m.ssim = ssim(pred, ref);
    m.uqi = uqi(pred, ref);
    m.pcc = pcc(pred, ref);
    return m;
}

namespace {

struct Row {
    const char* name;
    bool higher_better;
    std::optional<double> (*get)(const MetricsReport&);
};

const std::array<Row, 8> kRows{{
    {"PSNR", true, [](const MetricsReport& m) -> std::optional<double> { return m.psnr; }},
    {"MSE", false, [](const MetricsReport& m) -> std::optional<double> { return m.mse; }},
    {"RMSE", false, [](const MetricsReport& m) -> std::optional<double> { return m.rmse; }},
    {"SNR", true, [](const MetricsReport& m) -> std::optional<double> { return m.snr; }},
    {"MAE", false, [](const MetricsReport& m) -> std::optional<double> { return m.mae; }},
    {"SSIM", true, [](const MetricsReport& m) -> std::optional<double> { return m.ssim; }},
    {"UQI", true, [](const MetricsReport& m) { return m.uqi; }},
    {"PCC", true, [](const MetricsReport& m) { return m.pcc; }},
}};

std::string cell(std::optional<double> v) {
    if (!v) return "undef";
    if (std::isinf(*v)) return *v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return buf;
}

} // namespace

std::string format_report(const std::vector<NamedReport>& reports) {
    if (reports.empty()) throw ValidationError("format_report needs at least one report");
    std::vector<std::vector<std::string>> table;
    table.push_back({"Metric"});
    for (const auto& [name, _] : reports) table.back().push_back(name);

    for (const auto& row : kRows) {
        std::vector<std::optional<double>> values;
        for (const auto& [_, m] : reports) values.push_back(row.get(m));
        std::optional<double> best;
        for (auto v : values)
            if (v && (!best || (row.higher_better ? *v > *best : *v < *best))) best = v;
        auto& line = table.emplace_back();
        line.push_back(row.name);
        for (auto v : values) {
            auto text = cell(v);
            // Ties are all marked; a single column still shows its value as best.
            if (v && best && *v == *best) text += "*";
            line.push_back(std::move(text));
        }
    }

    std::vector<std::size_t> widths(table.front().size(), 0);
    for (const auto& line : table)
        for (std::size_t c = 0; c < line.size(); ++c) widths[c] = std::max(widths[c], line[c].size());
    std::string out;
    for (const auto& line : table) {
        for (std::size_t c = 0; c < line.size(); ++c) {
            if (c == 0) {
                out += line[c] + std::string(widths[c] - line[c].size(), ' ');
            } else {
                out += "  " + std::string(widths[c] - line[c].size(), ' ') + line[c];
            }
        }
        out += '\n';
    }
    return out;
}

std::string to_json(const MetricsReport& m) {
    auto value = [](std::optional<double> v) -> nlohmann::ordered_json {
        if (!v) return nullptr;
        if (std::isinf(*v)) return *v > 0 ? "inf" : "-inf";
        return *v;
    };
    nlohmann::ordered_json j;
    for (const auto& row : kRows) {
        std::string key = row.name;
        std::transform(key.begin(), key.end(), key.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        j[key] = value(row.get(m));
    }
    return j.dump(2) + "\n";
}

} // namespace spdnn
