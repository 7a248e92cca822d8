#pragma once

#include "spdnn/tensor.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace spdnn {

/// Image-quality figures for a prediction against a reference, both in [0,1].
/// PSNR and SNR are +inf for a perfect prediction. UQI and PCC are empty when
/// either image is constant, where they are undefined.
struct MetricsReport {
    double psnr = 0.0; // dB, peak 1
    double mse = 0.0;
    double rmse = 0.0;
    double snr = 0.0; // dB, reference as signal
    double mae = 0.0;
    double ssim = 0.0;
    std::optional<double> uqi;
    std::optional<double> pcc;
};

/// Throws ShapeError unless both tensors are 1 x H x W (or H x W) with equal
/// dimensions.
MetricsReport compute_metrics(const Tensor& pred, const Tensor& ref);

/// Mean SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, L = 1.
/// Near the border the window is cut to the image and renormalised, so every
/// pixel contributes and small images are supported.
double ssim(const Tensor& a, const Tensor& b);

/// Mean universal quality index over all 8x8 windows. Images smaller than the
/// window use one window covering the whole image.
std::optional<double> uqi(const Tensor& a, const Tensor& b);

/// Pearson correlation over all pixels.
std::optional<double> pcc(const Tensor& a, const Tensor& b);

using NamedReport = std::pair<std::string, MetricsReport>;

/// Fixed-width table, one row per metric and one column per report, 4
/// decimals. The best value in each row carries a '*' (highest for PSNR, SNR,
/// SSIM, UQI and PCC, lowest for MSE, RMSE and MAE).
std::string format_report(const std::vector<NamedReport>& reports);

/// JSON object; infinities are written as the string "inf" and undefined
/// values as null.
std::string to_json(const MetricsReport& report);

} // namespace spdnn
