// Times the serial reference kernels against the library kernels on layer
// shapes taken from FCN-8s at width 0.1 and full width. Results are checked
// for agreement before timing is reported.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "fcnseg/kernels.hpp"
#include "fcnseg/layers.hpp"
#include "fcnseg/reference.hpp"

using namespace fcnseg;

namespace {

double best_ms(const std::function<void()>& fn, int reps) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

Tensor random_tensor(std::mt19937_64& rng, Shape s) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Tensor t(s);
    for (auto& v : t.data()) v = u(rng);
    return t;
}

void report(const char* name, double ref_ms, double lib_ms, double diff) {
    std::printf("%-34s reference %9.2f ms   library %8.2f ms   speedup %6.1fx   max|diff| %.1e\n", name, ref_ms, lib_ms,
                ref_ms / lib_ms, diff);
}

}  // namespace

int main() {
    std::mt19937_64 rng(3);
    std::printf("threads: %d\n", omp_get_max_threads());

    for (auto [m, n, k] : {std::array<std::size_t, 3>{64, 4096, 576}, {409, 100, 2304}, {256, 256, 256}}) {
        const Tensor a = random_tensor(rng, {1, 1, m, k}), b = random_tensor(rng, {1, 1, k, n});
        std::vector<double> c_ref(m * n), c_lib(m * n);
        const double ref = best_ms([&] { reference::gemm(m, n, k, a.data().data(), b.data().data(), c_ref.data()); }, 3);
        const double lib = best_ms(
            [&] {
                kernels::gemm(kernels::Trans::kNo, kernels::Trans::kNo, m, n, k, a.data().data(), k, b.data().data(), n, 0.0,
                              c_lib.data(), n);
            },
            5);
        double diff = 0.0;
        for (std::size_t i = 0; i < c_ref.size(); ++i) diff = std::max(diff, std::abs(c_ref[i] - c_lib[i]));
        char name[64];
        std::snprintf(name, sizeof name, "gemm %zux%zux%zu", m, n, k);
        report(name, ref, lib, diff);
    }

    struct ConvCase {
        const char* name;
        Shape input;
        std::size_t out_channels, k;
        int pad;
    };
    for (const auto& c : {ConvCase{"conv 3x3 6->6 @ 164x164 (conv1_2)", {1, 6, 164, 164}, 6, 3, 1},
                          ConvCase{"conv 3x3 51->51 @ 20x20 (conv5)", {1, 51, 20, 20}, 51, 3, 1},
                          ConvCase{"conv 7x7 51->409 @ 8x8 (fc6)", {1, 51, 8, 8}, 409, 7, 0},
                          ConvCase{"conv 3x3 64->64 @ 112x112", {1, 64, 112, 112}, 64, 3, 1}}) {
        const Tensor x = random_tensor(rng, c.input);
        const Tensor w = random_tensor(rng, {c.out_channels, c.input.c, c.k, c.k});
        const std::vector<double> bias(c.out_channels, 0.1);
        Tensor y_ref, y_lib;
        const double ref = best_ms([&] { y_ref = reference::conv2d(x, w, bias, 1, c.pad); }, 1);
        const double lib = best_ms([&] { y_lib = conv2d_forward(x, w, bias, 1, c.pad); }, 3);
        report(c.name, ref, lib, max_abs_diff(y_ref, y_lib));
    }

    for (auto [ch, hw, stride] : {std::array<std::size_t, 3>{3, 8, 8}, {3, 34, 2}, {21, 16, 2}}) {
        const Tensor x = random_tensor(rng, {1, ch, hw, hw});
        const Tensor w = random_tensor(rng, {ch, ch, 2 * stride, 2 * stride});
        Tensor y_ref, y_lib;
        const double ref = best_ms([&] { y_ref = reference::deconv2d(x, w, static_cast<int>(stride), 0); }, 3);
        const double lib = best_ms([&] { y_lib = deconv2d_forward(x, w, static_cast<int>(stride), 0); }, 5);
        char name[64];
        std::snprintf(name, sizeof name, "deconv s%zu %zuch @ %zux%zu", stride, ch, hw, hw);
        report(name, ref, lib, max_abs_diff(y_ref, y_lib));
    }
}
