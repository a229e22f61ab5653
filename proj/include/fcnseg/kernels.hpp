#pragma once

// Parallel compute kernels behind the layer functions. All loops parallelize
// over output elements only, so every output is reduced in a fixed order and
// results are bit-identical for any thread count.

#include <cstddef>

namespace fcnseg::kernels {

enum class Trans { kNo, kYes };

/// C = op(A) * op(B) + beta * C, row-major. op(A) is M×K, op(B) is K×N.
void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta,
          double* c, std::size_t ldc);

struct ConvGeometry {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t kernel = 1;
    std::size_t stride = 1;
    std::size_t pad = 0;

    std::size_t out_height() const noexcept { return (height + 2 * pad - kernel) / stride + 1; }
    std::size_t out_width() const noexcept { return (width + 2 * pad - kernel) / stride + 1; }
    std::size_t col_rows() const noexcept { return channels * kernel * kernel; }
    std::size_t col_cols() const noexcept { return out_height() * out_width(); }
};

/// Unfold one C×H×W image into a (C·k·k) × (OH·OW) column matrix.
void im2col(const double* image, const ConvGeometry& g, double* col);
/// Fold a column matrix back, accumulating into image (which is not cleared).
void col2im(const double* col, const ConvGeometry& g, double* image);

}  // namespace fcnseg::kernels
