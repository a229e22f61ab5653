#include "fcnseg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fcnseg/errors.hpp"

namespace fcnseg {

std::string Shape::to_string() const {
    std::ostringstream os;
    os << n << "x" << c << "x" << h << "x" << w;
    return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.size(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(shape), data_(std::move(values)) {
    if (data_.size() != shape_.size()) {
        throw ShapeError("tensor of shape " + shape_.to_string() + " needs " + std::to_string(shape_.size()) +
                         " values, got " + std::to_string(data_.size()));
    }
}

void Tensor::ensure_grad() {
    if (grad_.size() != data_.size()) grad_.assign(data_.size(), 0.0);
}

void Tensor::zero_grad() {
    std::fill(grad_.begin(), grad_.end(), 0.0);
}

void Tensor::fill(double value) {
    std::fill(data_.begin(), data_.end(), value);
}

Tensor Tensor::item(std::size_t n) const {
    if (n >= shape_.n) throw ShapeError("batch index " + std::to_string(n) + " out of range for " + shape_.to_string());
    const std::size_t per = shape_.c * shape_.plane();
    Shape s{1, shape_.c, shape_.h, shape_.w};
    return Tensor(s, std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(n * per),
                                         data_.begin() + static_cast<std::ptrdiff_t>((n + 1) * per)));
}

double dot(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw ShapeError("dot: " + a.shape().to_string() + " vs " + b.shape().to_string());
    double s = 0.0;
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("max_abs_diff: " + a.shape().to_string() + " vs " + b.shape().to_string());
    }
    double m = 0.0;
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
    return m;
}

bool all_finite(std::span<const double> values) noexcept {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace fcnseg
