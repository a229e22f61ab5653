#include <doctest.h>

#include <cmath>

#include "fcnseg/errors.hpp"
#include "fcnseg/kernels.hpp"
#include "fcnseg/layers.hpp"
#include "fcnseg/reference.hpp"
#include "gradsuite.hpp"
#include "testgen.hpp"

using namespace fcnseg;
using testgen::Rng;

namespace {

Tensor iota_tensor(Shape s) {
    Tensor t(s);
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<double>(i + 1);
    return t;
}

double max_rel(const Tensor& a, const Tensor& b) {
    REQUIRE(a.shape() == b.shape());
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, testgen::rel_err(a.data()[i], b.data()[i]));
    return worst;
}

}  // namespace

TEST_CASE("gemm matches the serial reference for every transpose combination") {
    Rng rng(11);
    for (int round = 0; round < 40; ++round) {
        const std::size_t m = rng.integer(1, 70), n = rng.integer(1, 40), k = rng.integer(1, 300);
        const bool ta = rng.coin(), tb = rng.coin();
        std::vector<double> a(m * k), b(k * n), c(m * n), plain_a(m * k), plain_b(k * n);
        for (auto& v : a) v = rng.uniform(-1, 1);
        for (auto& v : b) v = rng.uniform(-1, 1);
        for (auto& v : c) v = rng.uniform(-1, 1);
        // Row-major op(A) for the reference.
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) plain_a[i * k + p] = ta ? a[p * m + i] : a[i * k + p];
        for (std::size_t p = 0; p < k; ++p)
            for (std::size_t j = 0; j < n; ++j) plain_b[p * n + j] = tb ? b[j * k + p] : b[p * n + j];
        std::vector<double> want(m * n, 0.0);
        reference::gemm(m, n, k, plain_a.data(), plain_b.data(), want.data());
        const double beta = rng.coin() ? 0.0 : 1.0;
        for (std::size_t i = 0; i < m * n; ++i) want[i] += beta * c[i];
        kernels::gemm(ta ? kernels::Trans::kYes : kernels::Trans::kNo, tb ? kernels::Trans::kYes : kernels::Trans::kNo,
                      m, n, k, a.data(), ta ? m : k, b.data(), tb ? k : n, beta, c.data(), n);
        for (std::size_t i = 0; i < m * n; ++i) REQUIRE(c[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("conv2d: identity kernel on ones") {
    const Tensor x(Shape{1, 1, 3, 3}, 1.0);
    const Tensor w(Shape{1, 1, 1, 1}, 1.0);
    const std::vector<double> b{0.0};
    const Tensor y = conv2d_forward(x, w, b, 1, 0);
    CHECK(y.shape() == Shape{1, 1, 3, 3});
    for (double v : y.data()) CHECK(v == 1.0);
}

TEST_CASE("conv2d: strided padded case against the direct oracle") {
    Rng rng(3);
    const Tensor x = testgen::random_tensor(rng, Shape{1, 1, 5, 5});
    const Tensor w = testgen::random_tensor(rng, Shape{1, 1, 3, 3});
    const std::vector<double> b{0.25};
    const Tensor y = conv2d_forward(x, w, b, 2, 1);
    CHECK(y.shape() == Shape{1, 1, 3, 3});
    CHECK(max_rel(y, reference::conv2d(x, w, b, 2, 1)) <= 1e-12);
}

TEST_CASE("conv2d: 500 wide input with 3x3 same padding keeps its extent") {
    CHECK(conv_out_extent(500, 3, 1, 1) == 500);
    const Tensor y = conv2d_forward(Tensor(Shape{1, 1, 500, 500}, 1.0), Tensor(Shape{1, 1, 3, 3}, 1.0), {}, 1, 1);
    CHECK(y.shape() == Shape{1, 1, 500, 500});
    CHECK(y.at(0, 0, 0, 0) == 4.0);
    CHECK(y.at(0, 0, 250, 250) == 9.0);
}

TEST_CASE("conv2d equals the quadruple-loop oracle on small shapes") {
    Rng rng(99);
    for (int draw = 0; draw < 50; ++draw) {
        const std::size_t k = rng.integer(1, 4);
        const int stride = rng.integer(1, 3);
        const int pad = rng.integer(0, static_cast<int>(k) - 1);
        const Shape in{static_cast<std::size_t>(rng.integer(1, 2)), static_cast<std::size_t>(rng.integer(1, 4)),
                       static_cast<std::size_t>(rng.integer(static_cast<int>(k), 8)),
                       static_cast<std::size_t>(rng.integer(static_cast<int>(k), 8))};
        const Tensor x = testgen::random_tensor(rng, in);
        const Tensor w = testgen::random_tensor(rng, Shape{static_cast<std::size_t>(rng.integer(1, 4)), in.c, k, k});
        std::vector<double> b(w.shape().n);
        for (auto& v : b) v = rng.uniform(-1, 1);
        CHECK(max_rel(conv2d_forward(x, w, b, stride, pad), reference::conv2d(x, w, b, stride, pad)) <= 1e-12);
    }
}

TEST_CASE("conv2d: large kernel on a tiny map takes the pruned-tap path and still matches") {
    // 7x7 kernel, pad 3, on 2x2 input: only the centre 3x3 taps touch real pixels.
    Rng rng(5);
    const Tensor x = testgen::random_tensor(rng, Shape{2, 4, 2, 2});
    const Tensor w = testgen::random_tensor(rng, Shape{6, 4, 7, 7});
    std::vector<double> b(6, 0.5);
    CHECK(max_rel(conv2d_forward(x, w, b, 1, 3), reference::conv2d(x, w, b, 1, 3)) <= 1e-12);

    const Tensor r = testgen::random_tensor(rng, Shape{2, 6, 2, 2});
    const auto g = conv2d_backward(x, w, 1, 3, r);
    // Taps that only ever see padding get exactly zero kernel gradient.
    CHECK(g.kernel_grad.at(0, 0, 0, 0) == 0.0);
    CHECK(g.kernel_grad.at(5, 3, 6, 6) == 0.0);
    // Adjoint check of the input gradient: ⟨conv(x), r⟩ is linear in x.
    const double lhs = dot(conv2d_forward(x, w, {}, 1, 3), r);
    CHECK(dot(x, g.input_grad) == doctest::Approx(lhs).epsilon(1e-12));
    // Kernel gradient: same identity on the weights.
    CHECK(dot(w, g.kernel_grad) == doctest::Approx(lhs).epsilon(1e-12));
}

TEST_CASE("conv2d_backward: zero upstream gives zero gradients") {
    Rng rng(8);
    const Tensor x = testgen::random_tensor(rng, Shape{1, 2, 5, 5});
    const Tensor w = testgen::random_tensor(rng, Shape{3, 2, 3, 3});
    const auto g = conv2d_backward(x, w, 1, 1, Tensor(Shape{1, 3, 5, 5}));
    for (double v : g.input_grad.data()) CHECK(v == 0.0);
    for (double v : g.kernel_grad.data()) CHECK(v == 0.0);
    for (double v : g.bias_grad) CHECK(v == 0.0);
}

TEST_CASE("conv2d_backward: kernel gradient of sum-of-outputs on 1x2x6x6 matches differences") {
    Rng rng(21);
    const Tensor x = testgen::random_tensor(rng, Shape{1, 2, 6, 6});
    Tensor w = testgen::random_tensor(rng, Shape{2, 2, 3, 3});
    const Tensor ones(Shape{1, 2, 6, 6}, 1.0);
    const auto g = conv2d_backward(x, w, 1, 1, ones);
    std::vector<double> wv(w.data().begin(), w.data().end());
    const double err = testgen::gradient_error(
        wv, std::vector<double>(g.kernel_grad.data().begin(), g.kernel_grad.data().end()), [&] {
            std::copy(wv.begin(), wv.end(), w.data().begin());
            const Tensor y = conv2d_forward(x, w, {}, 1, 1);
            double s = 0.0;
            for (double v : y.data()) s += v;
            return s;
        });
    CHECK(err <= 1e-4);
}

TEST_CASE("conv2d: mismatched shapes are shape errors naming both") {
    const Tensor x(Shape{1, 2, 5, 5});
    const Tensor w(Shape{1, 3, 3, 3});
    try {
        (void)conv2d_forward(x, w, {}, 1, 0);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string what = e.what();
        CHECK(what.find(x.shape().to_string()) != std::string::npos);
        CHECK(what.find(w.shape().to_string()) != std::string::npos);
    }
    CHECK_THROWS_AS(conv2d_backward(x, Tensor(Shape{1, 2, 3, 3}), 1, 0, Tensor(Shape{1, 1, 5, 5})), ShapeError);
}

TEST_CASE("maxpool: hand-enumerated windows") {
    const auto r = maxpool2d_forward(iota_tensor(Shape{1, 1, 4, 4}), 2, 2);
    CHECK(r.output.shape() == Shape{1, 1, 2, 2});
    CHECK(r.output.at(0, 0, 0, 0) == 6);
    CHECK(r.output.at(0, 0, 0, 1) == 8);
    CHECK(r.output.at(0, 0, 1, 0) == 14);
    CHECK(r.output.at(0, 0, 1, 1) == 16);
}

TEST_CASE("maxpool: constant input ties go to the first cell of each window") {
    const auto r = maxpool2d_forward(Tensor(Shape{1, 1, 4, 4}, 2.0), 2, 2);
    for (double v : r.output.data()) CHECK(v == 2.0);
    CHECK(r.argmax == std::vector<std::size_t>{0, 2, 8, 10});
}

TEST_CASE("maxpool: window larger than input is a shape error") {
    CHECK_THROWS_AS(maxpool2d_forward(Tensor(Shape{1, 1, 2, 2}), 3, 2), ShapeError);
}

TEST_CASE("maxpool matches the window-scan reference including ceil-mode edges") {
    Rng rng(17);
    for (int draw = 0; draw < 30; ++draw) {
        const Tensor x = testgen::random_tensor(rng, Shape{1, 2, static_cast<std::size_t>(rng.integer(3, 11)),
                                                           static_cast<std::size_t>(rng.integer(3, 11))});
        std::vector<std::size_t> argmax;
        const Tensor want = reference::maxpool2d(x, 3, 2, &argmax);
        const auto got = maxpool2d_forward(x, 3, 2);
        CHECK(max_abs_diff(got.output, want) == 0.0);
        CHECK(got.argmax == argmax);
    }
}

TEST_CASE("upsample: centred impulse reproduces the bilinear kernel") {
    CHECK(bilinear_profile(2) == std::vector<double>{0.25, 0.75, 0.75, 0.25});
    auto spec = UpsampleSpec::bilinear(1, 2);
    Tensor x(Shape{1, 1, 3, 3});
    x.at(0, 0, 1, 1) = 1.0;
    const Tensor y = deconv2d_forward(x, spec);
    const auto p = bilinear_profile(2);
    // The impulse at (1,1) lands at output rows/cols 2..5.
    for (std::size_t u = 0; u < 4; ++u)
        for (std::size_t v = 0; v < 4; ++v) CHECK(y.at(0, 0, 2 + u, 2 + v) == doctest::Approx(p[u] * p[v]));
}

TEST_CASE("upsample: bilinear weights form a partition of unity") {
    for (int factor : {2, 4, 8, 16, 32}) {
        auto spec = UpsampleSpec::bilinear(2, factor);
        const Tensor y = deconv2d_forward(Tensor(Shape{1, 2, 6, 6}, 3.0), spec);
        // Interior cells receive contributions from a full neighbourhood.
        const std::size_t lo = spec.kernel_size(), hi = y.shape().h - spec.kernel_size();
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t yy = lo; yy < hi; ++yy)
                for (std::size_t xx = lo; xx < hi; ++xx) REQUIRE(y.at(0, c, yy, xx) == doctest::Approx(3.0));
    }
}

TEST_CASE("deconv is the adjoint of the strided convolution") {
    Rng rng(23);
    for (int draw = 0; draw < 20; ++draw) {
        const int factor = rng.integer(2, 4);
        const std::size_t k = static_cast<std::size_t>(UpsampleSpec::kernel_size_for(factor));
        const int pad = rng.integer(0, 1);
        const std::size_t ci = rng.integer(1, 3), co = rng.integer(1, 3);
        const Tensor x = testgen::random_tensor(rng, Shape{1, ci, static_cast<std::size_t>(rng.integer(2, 6)),
                                                           static_cast<std::size_t>(rng.integer(2, 6))});
        const Tensor w = testgen::random_tensor(rng, Shape{ci, co, k, k});
        const Tensor up = deconv2d_forward(x, w, factor, pad);
        const Tensor y = testgen::random_tensor(rng, up.shape());
        // conv with the same weights read as (co → ci) maps y back onto x's grid.
        const Tensor down = conv2d_forward(y, w, {}, factor, pad);
        REQUIRE(down.shape() == x.shape());
        CHECK(std::abs(dot(up, y) - dot(x, down)) <= 1e-10 * std::max(1.0, std::abs(dot(up, y))));
        CHECK(max_rel(up, reference::deconv2d(x, w, factor, pad)) <= 1e-12);
    }
}

TEST_CASE("softmax cross-entropy: worked values") {
    const Tensor zeros(Shape{1, 3, 2, 2});
    const LabelImage lab(2, 2, 1);
    CHECK(softmax_xent_pixelwise(zeros, lab).loss == doctest::Approx(std::log(3.0)).epsilon(1e-14));

    Tensor s(Shape{1, 3, 1, 1});
    s.at(0, 0, 0, 0) = 10.0;
    const auto r = softmax_xent_pixelwise(s, LabelImage(1, 1, 0));
    CHECK(r.loss == doctest::Approx(std::log1p(2 * std::exp(-10.0))).epsilon(1e-12));
    CHECK(r.loss == doctest::Approx(9.0797e-5).epsilon(1e-4));
}

TEST_CASE("softmax cross-entropy: ignore index and bad labels") {
    const Tensor s(Shape{1, 3, 1, 2});
    LabelImage lab(2, 1, 0);
    lab.at(1, 0) = kIgnoreLabel;
    CHECK(softmax_xent_pixelwise(s, lab).counted_pixels == 1);
    lab.at(1, 0) = 3;
    CHECK_THROWS_AS(softmax_xent_pixelwise(s, lab), DataError);
}

TEST_CASE("crop: identity and index arithmetic") {
    const Tensor x = iota_tensor(Shape{1, 1, 6, 6});
    CHECK(max_abs_diff(crop_center(x, 6, 6, 0), x) == 0.0);
    const Tensor c = crop_center(x, 2, 2, 2);
    CHECK(c.at(0, 0, 0, 0) == 15);
    CHECK(c.at(0, 0, 0, 1) == 16);
    CHECK(c.at(0, 0, 1, 0) == 21);
    CHECK(c.at(0, 0, 1, 1) == 22);
    CHECK_THROWS_AS(crop_center(x, 4, 4, 3), ShapeError);
}

TEST_CASE("layer gradients agree with central differences") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        CAPTURE(seed);
        CHECK(gradsuite::conv_check(seed) <= 1e-4);
        CHECK(gradsuite::deconv_check(seed) <= 1e-4);
        CHECK(gradsuite::maxpool_check(seed) <= 1e-4);
        CHECK(gradsuite::crop_check(seed) <= 1e-4);
        CHECK(gradsuite::loss_check(seed) <= 1e-4);
    }
}

TEST_CASE("layers are bit-identical across repeated calls") {
    Rng rng(31);
    const Tensor x = testgen::random_tensor(rng, Shape{1, 5, 13, 11});
    const Tensor w = testgen::random_tensor(rng, Shape{7, 5, 3, 3});
    const Tensor a = conv2d_forward(x, w, {}, 1, 1);
    const Tensor b = conv2d_forward(x, w, {}, 1, 1);
    CHECK(max_abs_diff(a, b) == 0.0);
}
