#include <cstddef>

#include "fcnseg/kernels.hpp"

namespace fcnseg::kernels {

void im2col(const double* image, const ConvGeometry& g, double* col) {
    const std::size_t oh = g.out_height();
    const std::size_t ow = g.out_width();
    const std::size_t kk = g.kernel * g.kernel;
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(g.height);
    const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(g.width);
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.pad);
    const std::ptrdiff_t stride = static_cast<std::ptrdiff_t>(g.stride);
    const std::size_t rows = g.col_rows();

#pragma omp parallel for schedule(static)
    for (std::size_t row = 0; row < rows; ++row) {
        const std::size_t ch = row / kk;
        const std::ptrdiff_t ky = static_cast<std::ptrdiff_t>((row % kk) / g.kernel);
        const std::ptrdiff_t kx = static_cast<std::ptrdiff_t>(row % g.kernel);
        const double* plane = image + ch * g.height * g.width;
        double* out = col + row * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * stride - pad + ky;
            if (iy < 0 || iy >= h) {
                for (std::size_t ox = 0; ox < ow; ++ox) *out++ = 0.0;
                continue;
            }
            const double* src = plane + iy * w;
            for (std::size_t ox = 0; ox < ow; ++ox) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * stride - pad + kx;
                *out++ = (ix >= 0 && ix < w) ? src[ix] : 0.0;
            }
        }
    }
}

void col2im(const double* col, const ConvGeometry& g, double* image) {
    const std::size_t oh = g.out_height();
    const std::size_t ow = g.out_width();
    const std::size_t kk = g.kernel * g.kernel;
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(g.height);
    const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(g.width);
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.pad);
    const std::ptrdiff_t stride = static_cast<std::ptrdiff_t>(g.stride);

    // One thread per channel plane; rows of a channel are folded in order.
#pragma omp parallel for schedule(static)
    for (std::size_t ch = 0; ch < g.channels; ++ch) {
        double* plane = image + ch * g.height * g.width;
        for (std::size_t r = 0; r < kk; ++r) {
            const std::ptrdiff_t ky = static_cast<std::ptrdiff_t>(r / g.kernel);
            const std::ptrdiff_t kx = static_cast<std::ptrdiff_t>(r % g.kernel);
            const double* in = col + (ch * kk + r) * oh * ow;
            for (std::size_t oy = 0; oy < oh; ++oy) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * stride - pad + ky;
                if (iy < 0 || iy >= h) {
                    in += ow;
                    continue;
                }
                double* dst = plane + iy * w;
                for (std::size_t ox = 0; ox < ow; ++ox, ++in) {
                    const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * stride - pad + kx;
                    if (ix >= 0 && ix < w) dst[ix] += *in;
                }
            }
        }
    }
}

}  // namespace fcnseg::kernels
