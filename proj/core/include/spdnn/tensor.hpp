#pragma once

#include "spdnn/topology.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace spdnn {

/// Dense row-major array of doubles.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape()); }
    static Tensor of(const Shape3& s, double fill = 0.0);

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    double* raw() noexcept { return data_.data(); }
    const double* raw() const noexcept { return data_.data(); }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    /// Element access for rank-3 (C x H x W) tensors.
    double& at(std::size_t c, std::size_t y, std::size_t x) noexcept {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }
    double at(std::size_t c, std::size_t y, std::size_t x) const noexcept {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }

    /// Same data under a new shape with an equal element count.
    Tensor reshaped(std::vector<std::size_t> shape) const;

    /// Interprets a rank-3 tensor's shape as a Shape3.
    Shape3 shape3() const;

    bool all_finite() const noexcept;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::size_t element_count(const std::vector<std::size_t>& shape) noexcept;
std::string shape_string(const std::vector<std::size_t>& shape);

} // namespace spdnn
