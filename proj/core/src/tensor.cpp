#include "spdnn/tensor.hpp"

#include "spdnn/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace spdnn {

std::size_t element_count(const std::vector<std::size_t>& shape) noexcept {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const std::vector<std::size_t>& shape) {
    std::string s;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "×";
        s += std::to_string(shape[i]);
    }
    return s;
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != element_count(shape_))
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string(shape_));
}

Tensor Tensor::of(const Shape3& s, double fill) {
    return Tensor({static_cast<std::size_t>(s.channels), static_cast<std::size_t>(s.height),
                   static_cast<std::size_t>(s.width)},
                  fill);
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
    return Tensor(std::move(shape), data_);
}

Shape3 Tensor::shape3() const {
    if (rank() != 3) throw ShapeError("expected a rank-3 tensor, got " + shape_string(shape_));
    return {static_cast<std::int64_t>(shape_[0]), static_cast<std::int64_t>(shape_[1]),
            static_cast<std::int64_t>(shape_[2])};
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

} // namespace spdnn
