#pragma once

// Layer primitives with forward and backward passes. Every function is pure:
// outputs depend only on arguments, and repeated calls are bit-identical.

#include <cstddef>
#include <span>
#include <vector>

#include "fcnseg/label_image.hpp"
#include "fcnseg/tensor.hpp"

namespace fcnseg {

/// Convolution parameters. kernel has shape (out_ch, in_ch, kh, kw).
struct ConvSpec {
    Tensor kernel;
    std::vector<double> bias;
    int stride = 1;
    int pad = 0;

    void validate() const;
};

/// Transposed-convolution upsampling by an integer factor.
/// kernel has shape (in_ch, out_ch, K, K) with K = 2·factor − factor mod 2.
struct UpsampleSpec {
    int factor = 2;
    Tensor kernel;
    int pad = 0;

    int stride() const noexcept { return factor; }
    int kernel_size() const noexcept { return kernel_size_for(factor); }
    void validate() const;

    static constexpr int kernel_size_for(int factor) noexcept { return 2 * factor - factor % 2; }
    /// Per-class bilinear kernel: channel c maps only to channel c.
    static UpsampleSpec bilinear(int classes, int factor, int pad = 0);
};

/// Fill a (C, C, K, K) tensor with the diagonal bilinear interpolation kernel.
void fill_bilinear(Tensor& kernel);
/// 1-D bilinear profile for a given factor, length kernel_size_for(factor).
std::vector<double> bilinear_profile(int factor);

std::size_t conv_out_extent(std::size_t n, std::size_t k, std::size_t stride, std::size_t pad);
std::size_t deconv_out_extent(std::size_t n, std::size_t k, std::size_t stride, std::size_t pad);
std::size_t pool_out_extent(std::size_t n, std::size_t k, std::size_t stride);

// ---- convolution ----------------------------------------------------------

Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, std::span<const double> bias, int stride,
                      int pad);
inline Tensor conv2d_forward(const Tensor& input, const ConvSpec& spec) {
    return conv2d_forward(input, spec.kernel, spec.bias, spec.stride, spec.pad);
}

struct ConvGrads {
    Tensor input_grad;
    Tensor kernel_grad;
    std::vector<double> bias_grad;
};

enum ConvGradMask : unsigned {
    kGradInput = 1u,
    kGradKernel = 2u,
    kGradBias = 4u,
    kGradAll = 7u,
};

ConvGrads conv2d_backward(const Tensor& input, const Tensor& kernel, int stride, int pad,
                          const Tensor& upstream_grad, unsigned which = kGradAll);
inline ConvGrads conv2d_backward(const Tensor& input, const ConvSpec& spec, const Tensor& upstream_grad) {
    return conv2d_backward(input, spec.kernel, spec.stride, spec.pad, upstream_grad);
}

// ---- transposed convolution -------------------------------------------------

Tensor deconv2d_forward(const Tensor& input, const Tensor& kernel, int stride, int pad);
inline Tensor deconv2d_forward(const Tensor& input, const UpsampleSpec& spec) {
    return deconv2d_forward(input, spec.kernel, spec.stride(), spec.pad);
}

struct DeconvGrads {
    Tensor input_grad;
    Tensor kernel_grad;
};

DeconvGrads deconv2d_backward(const Tensor& input, const Tensor& kernel, int stride, int pad,
                              const Tensor& upstream_grad, bool want_kernel_grad = true);

// ---- pooling ------------------------------------------------------------------

struct PoolResult {
    Tensor output;
    /// Flat index into the input tensor of the maximum for every output cell.
    std::vector<std::size_t> argmax;
};

PoolResult maxpool2d_forward(const Tensor& input, int k, int stride);
Tensor maxpool2d_backward(const Shape& input_shape, std::span<const std::size_t> argmax,
                          const Tensor& upstream_grad);

// ---- crop -----------------------------------------------------------------------

Tensor crop_center(const Tensor& a, std::size_t target_h, std::size_t target_w, std::size_t offset);
Tensor crop_backward(const Shape& source_shape, std::size_t offset, const Tensor& upstream_grad);

// ---- activations and loss ---------------------------------------------------------

void relu_inplace(Tensor& t);
/// Zero upstream entries where the ReLU output was not positive.
void relu_backward_inplace(const Tensor& output, Tensor& grad);

struct LossResult {
    double loss = 0.0;
    Tensor score_grad;
    std::size_t counted_pixels = 0;
};

/// Mean pixel-wise softmax cross-entropy over non-ignored pixels of the batch.
LossResult softmax_xent_pixelwise(const Tensor& scores, std::span<const LabelImage> labels,
                                  int ignore_index = kIgnoreLabel);
inline LossResult softmax_xent_pixelwise(const Tensor& scores, const LabelImage& label,
                                         int ignore_index = kIgnoreLabel) {
    return softmax_xent_pixelwise(scores, std::span<const LabelImage>(&label, 1), ignore_index);
}

}  // namespace fcnseg
