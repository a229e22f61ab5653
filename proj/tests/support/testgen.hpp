#pragma once
// Hand-rolled generators for the property tests. Nothing here depends on the
// standard distributions, so a seed names the same case on every platform.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fcnseg/label_image.hpp"
#include "fcnseg/tensor.hpp"

namespace testgen {

/// splitmix64 stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed * 0x9E3779B97F4A7C15ull + 0x632BE59BD9B4E019ull) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
    /// Uniform in [0, 1).
    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
    /// Uniform integer in [lo, hi].
    int integer(int lo, int hi) { return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1)); }
    bool coin(double p = 0.5) { return unit() < p; }

private:
    std::uint64_t state_;
};

inline fcnseg::Tensor random_tensor(Rng& rng, fcnseg::Shape shape, double lo = -1.0, double hi = 1.0) {
    fcnseg::Tensor t(shape);
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

inline fcnseg::LabelImage random_label(Rng& rng, int w, int h, int classes) {
    fcnseg::LabelImage l(w, h);
    for (auto& p : l.pixels) p = static_cast<std::uint8_t>(rng.integer(0, classes - 1));
    return l;
}

/// Labels made of a few random rectangles, closer to real masks than white noise.
inline fcnseg::LabelImage blocky_label(Rng& rng, int w, int h) {
    fcnseg::LabelImage l(w, h);
    const int blocks = rng.integer(0, 4);
    for (int b = 0; b < blocks; ++b) {
        const int x0 = rng.integer(0, w - 1), y0 = rng.integer(0, h - 1);
        const int x1 = rng.integer(x0, w - 1), y1 = rng.integer(y0, h - 1);
        const auto c = static_cast<std::uint8_t>(rng.integer(1, 2));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) l.at(x, y) = c;
    }
    return l;
}

inline double rel_err(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / scale;
}

/// Max relative error between an analytic gradient and central differences of
/// f over every coordinate of x. x is restored afterwards.
inline double gradient_error(std::vector<double>& x, const std::vector<double>& analytic,
                             const std::function<double()>& f, double step = 1e-5) {
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + step;
        const double up = f();
        x[i] = saved - step;
        const double down = f();
        x[i] = saved;
        const double numeric = (up - down) / (2 * step);
        // Absolute floor keeps round-off on near-zero entries from dominating.
        const double err = std::abs(numeric - analytic[i]) / std::max({std::abs(numeric), std::abs(analytic[i]), 1e-3});
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace testgen
