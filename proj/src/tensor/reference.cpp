#include "fcnseg/reference.hpp"

#include <algorithm>

#include "fcnseg/errors.hpp"
#include "fcnseg/layers.hpp"

namespace fcnseg::reference {

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
            c[i * n + j] = s;
        }
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::span<const double> bias, int stride, int pad) {
    const Shape in = input.shape();
    const Shape ks = kernel.shape();
    if (ks.c != in.c) throw ShapeError("reference::conv2d: channel mismatch " + in.to_string() + " vs " + ks.to_string());
    const long oh = static_cast<long>(conv_out_extent(in.h, ks.h, static_cast<std::size_t>(stride), static_cast<std::size_t>(pad)));
    const long ow = static_cast<long>(conv_out_extent(in.w, ks.w, static_cast<std::size_t>(stride), static_cast<std::size_t>(pad)));
    Tensor out(Shape{in.n, ks.n, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)});
    for (std::size_t n = 0; n < in.n; ++n)
        for (std::size_t o = 0; o < ks.n; ++o)
            for (long y = 0; y < oh; ++y)
                for (long x = 0; x < ow; ++x) {
                    double s = bias.empty() ? 0.0 : bias[o];
                    for (std::size_t i = 0; i < in.c; ++i)
                        for (std::size_t u = 0; u < ks.h; ++u)
                            for (std::size_t v = 0; v < ks.w; ++v) {
                                const long iy = y * stride - pad + static_cast<long>(u);
                                const long ix = x * stride - pad + static_cast<long>(v);
                                if (iy < 0 || ix < 0 || iy >= static_cast<long>(in.h) || ix >= static_cast<long>(in.w)) continue;
                                s += input.at(n, i, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) *
                                     kernel.at(o, i, u, v);
                            }
                    out.at(n, o, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = s;
                }
    return out;
}

Tensor deconv2d(const Tensor& input, const Tensor& kernel, int stride, int pad) {
    const Shape in = input.shape();
    const Shape ks = kernel.shape();
    if (ks.n != in.c) throw ShapeError("reference::deconv2d: channel mismatch " + in.to_string() + " vs " + ks.to_string());
    const long oh = static_cast<long>(deconv_out_extent(in.h, ks.h, static_cast<std::size_t>(stride), static_cast<std::size_t>(pad)));
    const long ow = static_cast<long>(deconv_out_extent(in.w, ks.w, static_cast<std::size_t>(stride), static_cast<std::size_t>(pad)));
    Tensor out(Shape{in.n, ks.c, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)});
    for (std::size_t n = 0; n < in.n; ++n)
        for (std::size_t i = 0; i < in.c; ++i)
            for (std::size_t y = 0; y < in.h; ++y)
                for (std::size_t x = 0; x < in.w; ++x) {
                    const double v = input.at(n, i, y, x);
                    for (std::size_t o = 0; o < ks.c; ++o)
                        for (std::size_t u = 0; u < ks.h; ++u)
                            for (std::size_t w = 0; w < ks.w; ++w) {
                                const long oy = static_cast<long>(y) * stride - pad + static_cast<long>(u);
                                const long ox = static_cast<long>(x) * stride - pad + static_cast<long>(w);
                                if (oy < 0 || ox < 0 || oy >= oh || ox >= ow) continue;
                                out.at(n, o, static_cast<std::size_t>(oy), static_cast<std::size_t>(ox)) += v * kernel.at(i, o, u, w);
                            }
                }
    return out;
}

Tensor maxpool2d(const Tensor& input, int k, int stride, std::vector<std::size_t>* argmax) {
    const Shape in = input.shape();
    const auto uk = static_cast<std::size_t>(k);
    const auto us = static_cast<std::size_t>(stride);
    const std::size_t oh = pool_out_extent(in.h, uk, us);
    const std::size_t ow = pool_out_extent(in.w, uk, us);
    Tensor out(Shape{in.n, in.c, oh, ow});
    if (argmax) argmax->assign(out.size(), 0);
    for (std::size_t n = 0; n < in.n; ++n)
        for (std::size_t c = 0; c < in.c; ++c)
            for (std::size_t y = 0; y < oh; ++y)
                for (std::size_t x = 0; x < ow; ++x) {
                    std::size_t best = input.index(n, c, y * us, x * us);
                    for (std::size_t u = y * us; u < std::min(y * us + uk, in.h); ++u)
                        for (std::size_t v = x * us; v < std::min(x * us + uk, in.w); ++v) {
                            const std::size_t idx = input.index(n, c, u, v);
                            if (input.data()[idx] > input.data()[best]) best = idx;
                        }
                    out.at(n, c, y, x) = input.data()[best];
                    if (argmax) (*argmax)[out.index(n, c, y, x)] = best;
                }
    return out;
}

}  // namespace fcnseg::reference
