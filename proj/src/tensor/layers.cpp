#include "fcnseg/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fcnseg/errors.hpp"
#include "fcnseg/kernels.hpp"

namespace fcnseg {
namespace {

using kernels::ConvGeometry;
using kernels::Trans;

std::string extent_str(std::size_t h, std::size_t w) {
    return std::to_string(h) + "x" + std::to_string(w);
}

void require_square(const Tensor& kernel, const char* who) {
    if (kernel.shape().h != kernel.shape().w || kernel.shape().h == 0) {
        throw ShapeError(std::string(who) + ": kernel " + kernel.shape().to_string() + " must be square and non-empty");
    }
}

void check_conv_args(const Tensor& input, const Tensor& kernel, int stride, int pad, const char* who) {
    require_square(kernel, who);
    if (stride < 1) throw ShapeError(std::string(who) + ": stride must be >= 1, got " + std::to_string(stride));
    if (pad < 0) throw ShapeError(std::string(who) + ": pad must be >= 0, got " + std::to_string(pad));
    if (input.shape().c != kernel.shape().c) {
        throw ShapeError(std::string(who) + ": input " + input.shape().to_string() + " has " +
                         std::to_string(input.shape().c) + " channels but kernel " + kernel.shape().to_string() +
                         " expects " + std::to_string(kernel.shape().c));
    }
    const std::size_t k = kernel.shape().h;
    const std::size_t p2 = 2 * static_cast<std::size_t>(pad);
    if (input.shape().h + p2 < k || input.shape().w + p2 < k) {
        throw ShapeError(std::string(who) + ": padded input " + input.shape().to_string() + " (pad " +
                         std::to_string(pad) + ") is smaller than kernel " + kernel.shape().to_string());
    }
}

ConvGeometry geometry(const Shape& in, std::size_t k, int stride, int pad) {
    return ConvGeometry{in.c, in.h, in.w, k, static_cast<std::size_t>(stride), static_cast<std::size_t>(pad)};
}

bool is_pointwise(const ConvGeometry& g) {
    return g.kernel == 1 && g.stride == 1 && g.pad == 0;
}

}  // namespace

std::size_t conv_out_extent(std::size_t n, std::size_t k, std::size_t stride, std::size_t pad) {
    return (n + 2 * pad - k) / stride + 1;
}

std::size_t deconv_out_extent(std::size_t n, std::size_t k, std::size_t stride, std::size_t pad) {
    return stride * (n - 1) + k - 2 * pad;
}

std::size_t pool_out_extent(std::size_t n, std::size_t k, std::size_t stride) {
    std::size_t out = (n - k + stride - 1) / stride + 1;
    if ((out - 1) * stride >= n) --out;
    return out;
}

void ConvSpec::validate() const {
    require_square(kernel, "ConvSpec");
    if (stride < 1 || pad < 0) throw ConfigError("ConvSpec: stride must be >= 1 and pad >= 0");
    if (!bias.empty() && bias.size() != kernel.shape().n) {
        throw ShapeError("ConvSpec: bias has " + std::to_string(bias.size()) + " values for " +
                         std::to_string(kernel.shape().n) + " output channels");
    }
}

void UpsampleSpec::validate() const {
    if (factor < 2) throw ConfigError("UpsampleSpec: factor must be >= 2, got " + std::to_string(factor));
    const auto k = static_cast<std::size_t>(kernel_size());
    if (kernel.shape().h != k || kernel.shape().w != k) {
        throw ShapeError("UpsampleSpec: kernel " + kernel.shape().to_string() + " must be " + std::to_string(k) + "x" +
                         std::to_string(k) + " for factor " + std::to_string(factor));
    }
    if (pad < 0) throw ConfigError("UpsampleSpec: pad must be >= 0");
}

std::vector<double> bilinear_profile(int factor) {
    const int size = UpsampleSpec::kernel_size_for(factor);
    const double center = (size % 2 == 1) ? factor - 1.0 : factor - 0.5;
    std::vector<double> profile(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) profile[static_cast<std::size_t>(i)] = 1.0 - std::abs(i - center) / factor;
    return profile;
}

void fill_bilinear(Tensor& kernel) {
    const Shape s = kernel.shape();
    if (s.h != s.w) throw ShapeError("fill_bilinear: kernel " + s.to_string() + " must be square");
    const int factor = static_cast<int>((s.h + 1) / 2);
    const auto profile = bilinear_profile(factor);
    if (profile.size() != s.h) throw ShapeError("fill_bilinear: kernel size " + std::to_string(s.h) + " is not 2f - f mod 2");
    kernel.fill(0.0);
    for (std::size_t c = 0; c < std::min(s.n, s.c); ++c)
        for (std::size_t y = 0; y < s.h; ++y)
            for (std::size_t x = 0; x < s.w; ++x) kernel.at(c, c, y, x) = profile[y] * profile[x];
}

UpsampleSpec UpsampleSpec::bilinear(int classes, int factor, int pad) {
    UpsampleSpec spec;
    spec.factor = factor;
    spec.pad = pad;
    const auto k = static_cast<std::size_t>(kernel_size_for(factor));
    spec.kernel = Tensor(Shape{static_cast<std::size_t>(classes), static_cast<std::size_t>(classes), k, k});
    fill_bilinear(spec.kernel);
    return spec;
}

// ---- convolution ----------------------------------------------------------

namespace {

/// Kernel taps (ky * K + kx) that read at least one real input pixel. Empty when
/// almost every tap is live, in which case the dense path is used.
std::vector<std::size_t> live_taps(const ConvGeometry& g) {
    const auto live_1d = [&](std::size_t extent, std::size_t out) {
        std::vector<bool> live(g.kernel, false);
        for (std::size_t k = 0; k < g.kernel; ++k) {
            for (std::size_t o = 0; o < out && !live[k]; ++o) {
                const auto i = static_cast<std::ptrdiff_t>(o * g.stride + k) - static_cast<std::ptrdiff_t>(g.pad);
                live[k] = i >= 0 && i < static_cast<std::ptrdiff_t>(extent);
            }
        }
        return live;
    };
    const auto ly = live_1d(g.height, g.out_height());
    const auto lx = live_1d(g.width, g.out_width());
    std::vector<std::size_t> taps;
    for (std::size_t ky = 0; ky < g.kernel; ++ky)
        for (std::size_t kx = 0; kx < g.kernel; ++kx)
            if (ly[ky] && lx[kx]) taps.push_back(ky * g.kernel + kx);
    if (taps.size() * 4 > g.kernel * g.kernel * 3) taps.clear();
    return taps;
}

/// Rows (or columns) of the full im2col layout that belong to live taps, per channel.
std::vector<std::size_t> live_rows(const ConvGeometry& g, const std::vector<std::size_t>& taps) {
    std::vector<std::size_t> rows;
    rows.reserve(g.channels * taps.size());
    const std::size_t kk = g.kernel * g.kernel;
    for (std::size_t c = 0; c < g.channels; ++c)
        for (auto t : taps) rows.push_back(c * kk + t);
    return rows;
}

/// Columns `keep` of a row-major m×k matrix.
std::vector<double> gather_columns(const double* m, std::size_t rows, std::size_t ld, const std::vector<std::size_t>& keep) {
    std::vector<double> out(rows * keep.size());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < keep.size(); ++j) out[r * keep.size() + j] = m[r * ld + keep[j]];
    return out;
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, std::span<const double> bias, int stride, int pad) {
    check_conv_args(input, kernel, stride, pad, "conv2d_forward");
    const Shape in = input.shape();
    const std::size_t outc = kernel.shape().n;
    if (!bias.empty() && bias.size() != outc) {
        throw ShapeError("conv2d_forward: bias has " + std::to_string(bias.size()) + " values for kernel " +
                         kernel.shape().to_string());
    }
    const ConvGeometry g = geometry(in, kernel.shape().h, stride, pad);
    const std::size_t rows = g.col_rows();
    const std::size_t cols = g.col_cols();
    Tensor out(Shape{in.n, outc, g.out_height(), g.out_width()});
    const bool pointwise = is_pointwise(g);
    std::vector<double> col(pointwise ? 0 : rows * cols);

    // Small inputs under large padded kernels (fc6 at desk scale) leave most taps
    // reading only padding; those rows are dropped from the product.
    const auto live = pointwise ? std::vector<std::size_t>{} : live_rows(g, live_taps(g));
    const std::vector<double> packed_kernel =
        live.empty() ? std::vector<double>{} : gather_columns(kernel.data().data(), outc, rows, live);
    std::vector<double> packed_col(live.size() * cols);

    for (std::size_t n = 0; n < in.n; ++n) {
        const double* src = input.data().data() + n * in.c * in.plane();
        double* dst = out.data().data() + n * outc * cols;
        if (pointwise) {
            kernels::gemm(Trans::kNo, Trans::kNo, outc, cols, rows, kernel.data().data(), rows, src, cols, 0.0, dst,
                          cols);
        } else {
            kernels::im2col(src, g, col.data());
            if (live.empty()) {
                kernels::gemm(Trans::kNo, Trans::kNo, outc, cols, rows, kernel.data().data(), rows, col.data(), cols,
                              0.0, dst, cols);
            } else {
                for (std::size_t r = 0; r < live.size(); ++r)
                    std::copy_n(col.data() + live[r] * cols, cols, packed_col.data() + r * cols);
                kernels::gemm(Trans::kNo, Trans::kNo, outc, cols, live.size(), packed_kernel.data(), live.size(),
                              packed_col.data(), cols, 0.0, dst, cols);
            }
        }
        if (!bias.empty()) {
#pragma omp parallel for schedule(static)
            for (std::size_t o = 0; o < outc; ++o) {
                double* plane = dst + o * cols;
                for (std::size_t i = 0; i < cols; ++i) plane[i] += bias[o];
            }
        }
    }
    return out;
}

ConvGrads conv2d_backward(const Tensor& input, const Tensor& kernel, int stride, int pad,
                          const Tensor& upstream_grad, unsigned which) {
    check_conv_args(input, kernel, stride, pad, "conv2d_backward");
    const Shape in = input.shape();
    const std::size_t outc = kernel.shape().n;
    const ConvGeometry g = geometry(in, kernel.shape().h, stride, pad);
    const Shape expected{in.n, outc, g.out_height(), g.out_width()};
    if (upstream_grad.shape() != expected) {
        throw ShapeError("conv2d_backward: upstream gradient " + upstream_grad.shape().to_string() +
                         " does not match forward output " + expected.to_string());
    }
    const std::size_t rows = g.col_rows();
    const std::size_t cols = g.col_cols();
    const bool pointwise = is_pointwise(g);
    const auto live = pointwise ? std::vector<std::size_t>{} : live_rows(g, live_taps(g));
    const bool packed = !live.empty();
    // Effective reduction length and the matrices used in the products.
    const std::size_t kr = packed ? live.size() : rows;
    const std::vector<double> packed_kernel =
        packed && (which & kGradInput) ? gather_columns(kernel.data().data(), outc, rows, live) : std::vector<double>{};
    const double* w = packed ? packed_kernel.data() : kernel.data().data();

    ConvGrads grads;
    if (which & kGradInput) grads.input_grad = Tensor(in);
    if (which & kGradKernel) grads.kernel_grad = Tensor(kernel.shape());
    if (which & kGradBias) grads.bias_grad.assign(outc, 0.0);

    std::vector<double> col((which & kGradKernel) && !pointwise ? rows * cols : 0);
    std::vector<double> packed_col((which & kGradKernel) && packed ? kr * cols : 0);
    std::vector<double> packed_dw((which & kGradKernel) && packed ? outc * kr : 0);
    std::vector<double> dcol((which & kGradInput) && !pointwise ? rows * cols : 0);
    std::vector<double> packed_dcol((which & kGradInput) && packed ? kr * cols : 0);

    for (std::size_t n = 0; n < in.n; ++n) {
        const double* src = input.data().data() + n * in.c * in.plane();
        const double* dy = upstream_grad.data().data() + n * outc * cols;
        if (which & kGradKernel) {
            const double* colp = src;
            if (!pointwise) {
                kernels::im2col(src, g, col.data());
                colp = col.data();
            }
            if (packed) {
                for (std::size_t r = 0; r < kr; ++r)
                    std::copy_n(col.data() + live[r] * cols, cols, packed_col.data() + r * cols);
                kernels::gemm(Trans::kNo, Trans::kYes, outc, kr, cols, dy, cols, packed_col.data(), cols,
                              n == 0 ? 0.0 : 1.0, packed_dw.data(), kr);
            } else {
                kernels::gemm(Trans::kNo, Trans::kYes, outc, rows, cols, dy, cols, colp, cols, n == 0 ? 0.0 : 1.0,
                              grads.kernel_grad.data().data(), rows);
            }
        }
        if (which & kGradInput) {
            double* dx = grads.input_grad.data().data() + n * in.c * in.plane();
            if (pointwise) {
                kernels::gemm(Trans::kYes, Trans::kNo, rows, cols, outc, kernel.data().data(), rows, dy, cols, 0.0, dx,
                              cols);
            } else if (packed) {
                kernels::gemm(Trans::kYes, Trans::kNo, kr, cols, outc, w, kr, dy, cols, 0.0, packed_dcol.data(), cols);
                std::fill(dcol.begin(), dcol.end(), 0.0);
                for (std::size_t r = 0; r < kr; ++r)
                    std::copy_n(packed_dcol.data() + r * cols, cols, dcol.data() + live[r] * cols);
                kernels::col2im(dcol.data(), g, dx);
            } else {
                kernels::gemm(Trans::kYes, Trans::kNo, rows, cols, outc, kernel.data().data(), rows, dy, cols, 0.0,
                              dcol.data(), cols);
                kernels::col2im(dcol.data(), g, dx);
            }
        }
        if (which & kGradBias) {
            for (std::size_t o = 0; o < outc; ++o) {
                double s = 0.0;
                for (std::size_t i = 0; i < cols; ++i) s += dy[o * cols + i];
                grads.bias_grad[o] += s;
            }
        }
    }
    if ((which & kGradKernel) && packed) {
        double* dw = grads.kernel_grad.data().data();
        for (std::size_t o = 0; o < outc; ++o)
            for (std::size_t r = 0; r < kr; ++r) dw[o * rows + live[r]] = packed_dw[o * kr + r];
    }
    return grads;
}

// ---- transposed convolution -------------------------------------------------

namespace {

void check_deconv_args(const Tensor& input, const Tensor& kernel, int stride, int pad, const char* who) {
    require_square(kernel, who);
    if (stride < 1 || pad < 0) throw ShapeError(std::string(who) + ": stride must be >= 1 and pad >= 0");
    if (input.shape().c != kernel.shape().n) {
        throw ShapeError(std::string(who) + ": input " + input.shape().to_string() + " has " +
                         std::to_string(input.shape().c) + " channels but kernel " + kernel.shape().to_string() +
                         " expects " + std::to_string(kernel.shape().n));
    }
    if (input.shape().h == 0 || input.shape().w == 0) throw ShapeError(std::string(who) + ": empty input");
    const std::size_t k = kernel.shape().h;
    const std::size_t s = static_cast<std::size_t>(stride);
    if (s * (input.shape().h - 1) + k <= 2 * static_cast<std::size_t>(pad) ||
        s * (input.shape().w - 1) + k <= 2 * static_cast<std::size_t>(pad)) {
        throw ShapeError(std::string(who) + ": pad " + std::to_string(pad) + " consumes the whole output for input " +
                         input.shape().to_string());
    }
}

// Geometry of the strided convolution whose adjoint is the deconvolution.
ConvGeometry deconv_geometry(const Shape& in, const Tensor& kernel, int stride, int pad) {
    const std::size_t k = kernel.shape().h;
    const auto s = static_cast<std::size_t>(stride);
    const auto p = static_cast<std::size_t>(pad);
    return ConvGeometry{kernel.shape().c, deconv_out_extent(in.h, k, s, p), deconv_out_extent(in.w, k, s, p), k, s, p};
}

}  // namespace

Tensor deconv2d_forward(const Tensor& input, const Tensor& kernel, int stride, int pad) {
    check_deconv_args(input, kernel, stride, pad, "deconv2d_forward");
    const Shape in = input.shape();
    const ConvGeometry g = deconv_geometry(in, kernel, stride, pad);
    const std::size_t rows = g.col_rows();
    const std::size_t cols = in.plane();
    Tensor out(Shape{in.n, g.channels, g.height, g.width});
    std::vector<double> dcol(rows * cols);
    for (std::size_t n = 0; n < in.n; ++n) {
        const double* x = input.data().data() + n * in.c * cols;
        kernels::gemm(Trans::kYes, Trans::kNo, rows, cols, in.c, kernel.data().data(), rows, x, cols, 0.0, dcol.data(),
                      cols);
        kernels::col2im(dcol.data(), g, out.data().data() + n * g.channels * g.height * g.width);
    }
    return out;
}

DeconvGrads deconv2d_backward(const Tensor& input, const Tensor& kernel, int stride, int pad,
                              const Tensor& upstream_grad, bool want_kernel_grad) {
    check_deconv_args(input, kernel, stride, pad, "deconv2d_backward");
    const Shape in = input.shape();
    const ConvGeometry g = deconv_geometry(in, kernel, stride, pad);
    const Shape expected{in.n, g.channels, g.height, g.width};
    if (upstream_grad.shape() != expected) {
        throw ShapeError("deconv2d_backward: upstream gradient " + upstream_grad.shape().to_string() +
                         " does not match forward output " + expected.to_string());
    }
    const std::size_t rows = g.col_rows();
    const std::size_t cols = in.plane();
    DeconvGrads grads;
    grads.input_grad = Tensor(in);
    if (want_kernel_grad) grads.kernel_grad = Tensor(kernel.shape());
    std::vector<double> col(rows * cols);
    for (std::size_t n = 0; n < in.n; ++n) {
        kernels::im2col(upstream_grad.data().data() + n * g.channels * g.height * g.width, g, col.data());
        kernels::gemm(Trans::kNo, Trans::kNo, in.c, cols, rows, kernel.data().data(), rows, col.data(), cols, 0.0,
                      grads.input_grad.data().data() + n * in.c * cols, cols);
        if (want_kernel_grad) {
            kernels::gemm(Trans::kNo, Trans::kYes, in.c, rows, cols, input.data().data() + n * in.c * cols, cols,
                          col.data(), cols, n == 0 ? 0.0 : 1.0, grads.kernel_grad.data().data(), rows);
        }
    }
    return grads;
}

// ---- pooling ------------------------------------------------------------------

PoolResult maxpool2d_forward(const Tensor& input, int k, int stride) {
    if (k < 1 || stride < 1) throw ShapeError("maxpool2d_forward: window and stride must be >= 1");
    const Shape in = input.shape();
    const auto uk = static_cast<std::size_t>(k);
    const auto us = static_cast<std::size_t>(stride);
    if (in.h < uk || in.w < uk) {
        throw ShapeError("maxpool2d_forward: window " + extent_str(uk, uk) + " is larger than input " + in.to_string());
    }
    const std::size_t oh = pool_out_extent(in.h, uk, us);
    const std::size_t ow = pool_out_extent(in.w, uk, us);
    PoolResult r{Tensor(Shape{in.n, in.c, oh, ow}), std::vector<std::size_t>(in.n * in.c * oh * ow)};
    const std::size_t planes = in.n * in.c;
    const double* src = input.data().data();
    double* dst = r.output.data().data();

#pragma omp parallel for schedule(static)
    for (std::size_t pl = 0; pl < planes; ++pl) {
        const std::size_t base = pl * in.plane();
        for (std::size_t oy = 0; oy < oh; ++oy) {
            const std::size_t y0 = oy * us;
            const std::size_t y1 = std::min(y0 + uk, in.h);
            for (std::size_t ox = 0; ox < ow; ++ox) {
                const std::size_t x0 = ox * us;
                const std::size_t x1 = std::min(x0 + uk, in.w);
                std::size_t best = base + y0 * in.w + x0;
                double best_v = src[best];
                for (std::size_t y = y0; y < y1; ++y) {
                    for (std::size_t x = x0; x < x1; ++x) {
                        const std::size_t idx = base + y * in.w + x;
                        if (src[idx] > best_v) {
                            best_v = src[idx];
                            best = idx;
                        }
                    }
                }
                const std::size_t o = (pl * oh + oy) * ow + ox;
                dst[o] = best_v;
                r.argmax[o] = best;
            }
        }
    }
    return r;
}

Tensor maxpool2d_backward(const Shape& input_shape, std::span<const std::size_t> argmax, const Tensor& upstream_grad) {
    if (argmax.size() != upstream_grad.size()) {
        throw ShapeError("maxpool2d_backward: " + std::to_string(argmax.size()) + " argmax entries for upstream " +
                         upstream_grad.shape().to_string());
    }
    Tensor g(input_shape);
    auto dst = g.data();
    auto up = upstream_grad.data();
    // Windows overlap when stride < k; a serial scatter keeps the sum order fixed.
    for (std::size_t i = 0; i < argmax.size(); ++i) {
        if (argmax[i] >= dst.size()) throw ShapeError("maxpool2d_backward: argmax index out of range");
        dst[argmax[i]] += up[i];
    }
    return g;
}

// ---- crop -----------------------------------------------------------------------

Tensor crop_center(const Tensor& a, std::size_t target_h, std::size_t target_w, std::size_t offset) {
    const Shape s = a.shape();
    if (offset + target_h > s.h || offset + target_w > s.w) {
        throw ShapeError("crop_center: window " + extent_str(target_h, target_w) + " at offset " +
                         std::to_string(offset) + " exceeds source " + s.to_string());
    }
    Tensor out(Shape{s.n, s.c, target_h, target_w});
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < s.c; ++c)
            for (std::size_t y = 0; y < target_h; ++y) {
                const double* src = &a.data()[a.index(n, c, y + offset, offset)];
                std::copy(src, src + target_w, &out.data()[out.index(n, c, y, 0)]);
            }
    return out;
}

Tensor crop_backward(const Shape& source_shape, std::size_t offset, const Tensor& upstream_grad) {
    const Shape u = upstream_grad.shape();
    if (u.n != source_shape.n || u.c != source_shape.c || offset + u.h > source_shape.h ||
        offset + u.w > source_shape.w) {
        throw ShapeError("crop_backward: upstream " + u.to_string() + " at offset " + std::to_string(offset) +
                         " does not fit source " + source_shape.to_string());
    }
    Tensor g(source_shape);
    for (std::size_t n = 0; n < u.n; ++n)
        for (std::size_t c = 0; c < u.c; ++c)
            for (std::size_t y = 0; y < u.h; ++y) {
                const double* src = &upstream_grad.data()[upstream_grad.index(n, c, y, 0)];
                std::copy(src, src + u.w, &g.data()[g.index(n, c, y + offset, offset)]);
            }
    return g;
}

// ---- activations and loss ---------------------------------------------------------

void relu_inplace(Tensor& t) {
    // Written so a NaN passes through and surfaces in the loss.
    for (double& v : t.data()) v = v < 0.0 ? 0.0 : v;
}

void relu_backward_inplace(const Tensor& output, Tensor& grad) {
    if (output.shape() != grad.shape()) {
        throw ShapeError("relu_backward: output " + output.shape().to_string() + " vs grad " + grad.shape().to_string());
    }
    auto o = output.data();
    auto g = grad.data();
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!(o[i] > 0.0)) g[i] = 0.0;
}

LossResult softmax_xent_pixelwise(const Tensor& scores, std::span<const LabelImage> labels, int ignore_index) {
    const Shape s = scores.shape();
    if (labels.size() != s.n) {
        throw ShapeError("softmax_xent_pixelwise: " + std::to_string(labels.size()) + " label images for scores " +
                         s.to_string());
    }
    for (const auto& l : labels) {
        if (static_cast<std::size_t>(l.height) != s.h || static_cast<std::size_t>(l.width) != s.w) {
            throw ShapeError("softmax_xent_pixelwise: label " + extent_str(static_cast<std::size_t>(l.height), static_cast<std::size_t>(l.width)) +
                             " does not match scores " + s.to_string());
        }
    }
    LossResult r;
    r.score_grad = Tensor(s);
    const std::size_t plane = s.plane();
    const double* sc = scores.data().data();
    double* gr = r.score_grad.data().data();
    std::vector<double> prob(s.c);
    double total = 0.0;

    for (std::size_t n = 0; n < s.n; ++n) {
        const auto& lab = labels[n].pixels;
        for (std::size_t p = 0; p < plane; ++p) {
            const int y = lab[p];
            if (y == ignore_index) continue;
            if (y < 0 || static_cast<std::size_t>(y) >= s.c) {
                throw DataError("softmax_xent_pixelwise: label " + std::to_string(y) + " at pixel " + std::to_string(p) +
                                " of item " + std::to_string(n) + " is outside 0.." + std::to_string(s.c - 1));
            }
            const double* px = sc + n * s.c * plane + p;
            double m = px[0];
            for (std::size_t c = 1; c < s.c; ++c) m = std::max(m, px[c * plane]);
            double z = 0.0;
            for (std::size_t c = 0; c < s.c; ++c) {
                prob[c] = std::exp(px[c * plane] - m);
                z += prob[c];
            }
            const double lse = m + std::log(z);
            total += lse - px[static_cast<std::size_t>(y) * plane];
            double* gx = gr + n * s.c * plane + p;
            for (std::size_t c = 0; c < s.c; ++c) gx[c * plane] = prob[c] / z;
            gx[static_cast<std::size_t>(y) * plane] -= 1.0;
            ++r.counted_pixels;
        }
    }
    if (r.counted_pixels == 0) return r;
    const double inv = 1.0 / static_cast<double>(r.counted_pixels);
    r.loss = total * inv;
    for (double& g : r.score_grad.data()) g *= inv;
    return r;
}

}  // namespace fcnseg
