#include <algorithm>
#include <cstddef>
#include <vector>

#include "fcnseg/kernels.hpp"

namespace fcnseg::kernels {
namespace {

// Register tile and cache blocks. The K loop of every C element runs in
// ascending order inside one thread, so the result is independent of the
// OpenMP schedule.
constexpr std::size_t kMr = 6;
constexpr std::size_t kNr = 16;
constexpr std::size_t kMc = 96;
constexpr std::size_t kKc = 256;
constexpr std::size_t kNc = 2048;

inline double load(const double* m, std::size_t ld, Trans t, std::size_t row, std::size_t col) {
    return t == Trans::kNo ? m[row * ld + col] : m[col * ld + row];
}

void pack_a(const double* a, std::size_t lda, Trans t, std::size_t i0, std::size_t mc, std::size_t p0,
            std::size_t kc, double* out) {
    for (std::size_t ir = 0; ir < mc; ir += kMr) {
        const std::size_t rows = std::min(kMr, mc - ir);
        for (std::size_t p = 0; p < kc; ++p) {
            for (std::size_t r = 0; r < kMr; ++r) {
                *out++ = r < rows ? load(a, lda, t, i0 + ir + r, p0 + p) : 0.0;
            }
        }
    }
}

void pack_b(const double* b, std::size_t ldb, Trans t, std::size_t p0, std::size_t kc, std::size_t j0,
            std::size_t nc, double* out) {
    const std::size_t panels = (nc + kNr - 1) / kNr;
#pragma omp parallel for schedule(static)
    for (std::size_t jp = 0; jp < panels; ++jp) {
        const std::size_t jr = jp * kNr;
        const std::size_t cols = std::min(kNr, nc - jr);
        double* dst = out + jp * kNr * kc;
        for (std::size_t p = 0; p < kc; ++p) {
            if (t == Trans::kNo && cols == kNr) {
                const double* src = b + (p0 + p) * ldb + j0 + jr;
                std::copy(src, src + kNr, dst);
                dst += kNr;
            } else {
                for (std::size_t c = 0; c < kNr; ++c) {
                    *dst++ = c < cols ? load(b, ldb, t, p0 + p, j0 + jr + c) : 0.0;
                }
            }
        }
    }
}

inline void micro_kernel(std::size_t kc, const double* __restrict ap, const double* __restrict bp,
                         double* __restrict c, std::size_t ldc, std::size_t rows, std::size_t cols) {
    double acc[kMr][kNr] = {};
    for (std::size_t p = 0; p < kc; ++p) {
        const double* bk = bp + p * kNr;
        const double* ak = ap + p * kMr;
#pragma GCC unroll 6
        for (std::size_t r = 0; r < kMr; ++r) {
            const double av = ak[r];
#pragma omp simd
            for (std::size_t j = 0; j < kNr; ++j) acc[r][j] += av * bk[j];
        }
    }
    for (std::size_t r = 0; r < rows; ++r) {
        double* crow = c + r * ldc;
        for (std::size_t j = 0; j < cols; ++j) crow[j] += acc[r][j];
    }
}

}  // namespace

void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k, const double* a,
          std::size_t lda, const double* b, std::size_t ldb, double beta, double* c, std::size_t ldc) {
    if (m == 0 || n == 0) return;
    if (beta == 0.0) {
        for (std::size_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, 0.0);
    } else if (beta != 1.0) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] *= beta;
    }
    if (k == 0) return;

    // Narrow outputs waste most of each 16-wide register tile; compute the
    // transposed product instead and fold it back into C.
    if (n * 2 <= kNr && m >= 2 * kNr) {
        std::vector<double> t(n * m, 0.0);
        const Trans flip_a = trans_a == Trans::kNo ? Trans::kYes : Trans::kNo;
        const Trans flip_b = trans_b == Trans::kNo ? Trans::kYes : Trans::kNo;
        gemm(flip_b, flip_a, n, m, k, b, ldb, a, lda, 0.0, t.data(), m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] += t[j * m + i];
        return;
    }

    std::vector<double> bpack(kKc * (std::min(kNc, n) + kNr));
    std::vector<double> apack(kKc * (std::min(kMc, m) + kMr));

    for (std::size_t j0 = 0; j0 < n; j0 += kNc) {
        const std::size_t nc = std::min(kNc, n - j0);
        const std::size_t npanels = (nc + kNr - 1) / kNr;
        for (std::size_t p0 = 0; p0 < k; p0 += kKc) {
            const std::size_t kc = std::min(kKc, k - p0);
            pack_b(b, ldb, trans_b, p0, kc, j0, nc, bpack.data());
            for (std::size_t i0 = 0; i0 < m; i0 += kMc) {
                const std::size_t mc = std::min(kMc, m - i0);
                const std::size_t mpanels = (mc + kMr - 1) / kMr;
                pack_a(a, lda, trans_a, i0, mc, p0, kc, apack.data());
                const std::size_t tiles = mpanels * npanels;
#pragma omp parallel for schedule(static)
                for (std::size_t t = 0; t < tiles; ++t) {
                    const std::size_t jp = t / mpanels;
                    const std::size_t ip = t % mpanels;
                    const std::size_t rows = std::min(kMr, mc - ip * kMr);
                    const std::size_t cols = std::min(kNr, nc - jp * kNr);
                    micro_kernel(kc, apack.data() + ip * kMr * kc, bpack.data() + jp * kNr * kc,
                                 c + (i0 + ip * kMr) * ldc + j0 + jp * kNr, ldc, rows, cols);
                }
            }
        }
    }
}

}  // namespace fcnseg::kernels
