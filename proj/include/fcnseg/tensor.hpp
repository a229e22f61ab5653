#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fcnseg {

/// Extents of a dense NCHW tensor.
struct Shape {
    std::size_t n = 0;
    std::size_t c = 0;
    std::size_t h = 0;
    std::size_t w = 0;

    constexpr std::size_t size() const noexcept { return n * c * h * w; }
    constexpr std::size_t plane() const noexcept { return h * w; }
    friend constexpr bool operator==(const Shape&, const Shape&) = default;

    std::string to_string() const;
};

/// Dense 4-D array of doubles with an optional gradient slot of identical shape.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    std::size_t index(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept {
        return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
    }
    double& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) noexcept {
        return data_[index(n, c, y, x)];
    }
    double at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept {
        return data_[index(n, c, y, x)];
    }

    // Gradient slot.
    bool has_grad() const noexcept { return !grad_.empty(); }
    void ensure_grad();
    void zero_grad();
    void drop_grad() noexcept { grad_.clear(); grad_.shrink_to_fit(); }
    std::span<double> grad() noexcept { return grad_; }
    std::span<const double> grad() const noexcept { return grad_; }

    void fill(double value);
    /// Slice of one batch item as a 1×C×H×W tensor (copy).
    Tensor item(std::size_t n) const;

private:
    Shape shape_{};
    std::vector<double> data_;
    std::vector<double> grad_;
};

/// Sum of elementwise products; shapes must match.
double dot(const Tensor& a, const Tensor& b);
/// Largest |a-b| over all elements; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);
bool all_finite(std::span<const double> values) noexcept;

}  // namespace fcnseg
