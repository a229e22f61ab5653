#pragma once

// Serial, loop-by-loop reference implementations. They are kept for the test
// suite and the benchmark; the library never calls them on the hot path.

#include <cstddef>
#include <span>
#include <vector>

#include "fcnseg/tensor.hpp"

namespace fcnseg::reference {

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);

/// Direct cross-correlation: out[n,o,y,x] = bias[o] + Σ in[n,i,y*s+u-p,x*s+v-p] · w[o,i,u,v].
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::span<const double> bias, int stride, int pad);

/// Transposed convolution by direct scatter of every input cell through the kernel.
Tensor deconv2d(const Tensor& input, const Tensor& kernel, int stride, int pad);

/// Max pooling by window scan (ceil-mode extents, lowest-index tie break).
Tensor maxpool2d(const Tensor& input, int k, int stride, std::vector<std::size_t>* argmax = nullptr);

}  // namespace fcnseg::reference
