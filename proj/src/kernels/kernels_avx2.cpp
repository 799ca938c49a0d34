// Compiled with -mavx2 -mfma; only reached through the dispatch table after
// a CPUID check.

#include "npm/kernels.hpp"

#include <immintrin.h>

#include <cmath>
#include <cstdint>

namespace npm::simd {
namespace {

// 4 x 8 register tile of C = A * B over the full k range.
inline void tile_nn_4x8(std::size_t k, const double* a, std::size_t lda,
                        const double* b, std::size_t ldb,
                        double* c, std::size_t ldc, bool accumulate) {
    __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
    __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
    __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
    __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
    const double* a0 = a;
    const double* a1 = a + lda;
    const double* a2 = a + 2 * lda;
    const double* a3 = a + 3 * lda;
    for (std::size_t p = 0; p < k; ++p) {
        const double* brow = b + p * ldb;
        const __m256d b0 = _mm256_loadu_pd(brow);
        const __m256d b1 = _mm256_loadu_pd(brow + 4);
        __m256d av = _mm256_broadcast_sd(a0 + p);
        c00 = _mm256_fmadd_pd(av, b0, c00);
        c01 = _mm256_fmadd_pd(av, b1, c01);
        av = _mm256_broadcast_sd(a1 + p);
        c10 = _mm256_fmadd_pd(av, b0, c10);
        c11 = _mm256_fmadd_pd(av, b1, c11);
        av = _mm256_broadcast_sd(a2 + p);
        c20 = _mm256_fmadd_pd(av, b0, c20);
        c21 = _mm256_fmadd_pd(av, b1, c21);
        av = _mm256_broadcast_sd(a3 + p);
        c30 = _mm256_fmadd_pd(av, b0, c30);
        c31 = _mm256_fmadd_pd(av, b1, c31);
    }
    double* r0 = c;
    double* r1 = c + ldc;
    double* r2 = c + 2 * ldc;
    double* r3 = c + 3 * ldc;
    if (accumulate) {
        c00 = _mm256_add_pd(c00, _mm256_loadu_pd(r0));
        c01 = _mm256_add_pd(c01, _mm256_loadu_pd(r0 + 4));
        c10 = _mm256_add_pd(c10, _mm256_loadu_pd(r1));
        c11 = _mm256_add_pd(c11, _mm256_loadu_pd(r1 + 4));
        c20 = _mm256_add_pd(c20, _mm256_loadu_pd(r2));
        c21 = _mm256_add_pd(c21, _mm256_loadu_pd(r2 + 4));
        c30 = _mm256_add_pd(c30, _mm256_loadu_pd(r3));
        c31 = _mm256_add_pd(c31, _mm256_loadu_pd(r3 + 4));
    }
    _mm256_storeu_pd(r0, c00);
    _mm256_storeu_pd(r0 + 4, c01);
    _mm256_storeu_pd(r1, c10);
    _mm256_storeu_pd(r1 + 4, c11);
    _mm256_storeu_pd(r2, c20);
    _mm256_storeu_pd(r2 + 4, c21);
    _mm256_storeu_pd(r3, c30);
    _mm256_storeu_pd(r3 + 4, c31);
}

// 1 x 4 tile, used for row and column remainders.
inline void tile_nn_1x4(std::size_t k, const double* a, const double* b, std::size_t ldb,
                        double* c, bool accumulate) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p) {
        acc = _mm256_fmadd_pd(_mm256_broadcast_sd(a + p), _mm256_loadu_pd(b + p * ldb), acc);
    }
    if (accumulate) acc = _mm256_add_pd(acc, _mm256_loadu_pd(c));
    _mm256_storeu_pd(c, acc);
}

inline double dot_strided(std::size_t k, const double* a, const double* b, std::size_t ldb) {
    double s = 0.0;
    for (std::size_t p = 0; p < k; ++p) s = std::fma(a[p], b[p * ldb], s);
    return s;
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k,
             const double* a, std::size_t lda,
             const double* b, std::size_t ldb,
             double* c, std::size_t ldc, bool accumulate) {
    const std::size_t n8 = n - n % 8;
    const std::size_t n4 = n - n % 4;
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        const double* ai = a + i * lda;
        double* ci = c + i * ldc;
        for (std::size_t j = 0; j < n8; j += 8) {
            tile_nn_4x8(k, ai, lda, b + j, ldb, ci + j, ldc, accumulate);
        }
        for (std::size_t r = 0; r < 4; ++r) {
            const double* ar = ai + r * lda;
            double* cr = ci + r * ldc;
            for (std::size_t j = n8; j < n4; j += 4) tile_nn_1x4(k, ar, b + j, ldb, cr + j, accumulate);
            for (std::size_t j = n4; j < n; ++j) {
                const double v = dot_strided(k, ar, b + j, ldb);
                cr[j] = accumulate ? cr[j] + v : v;
            }
        }
    }
    for (; i < m; ++i) {
        const double* ar = a + i * lda;
        double* cr = c + i * ldc;
        for (std::size_t j = 0; j < n4; j += 4) tile_nn_1x4(k, ar, b + j, ldb, cr + j, accumulate);
        for (std::size_t j = n4; j < n; ++j) {
            const double v = dot_strided(k, ar, b + j, ldb);
            cr[j] = accumulate ? cr[j] + v : v;
        }
    }
}

// C tile rows i..i+3, columns j..j+7 accumulated over all k rows of A and B.
inline void tile_tn_4x8(std::size_t k, const double* a, std::size_t lda,
                        const double* b, std::size_t ldb,
                        double* c, std::size_t ldc) {
    __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
    __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
    __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
    __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a + p * lda;
        const double* brow = b + p * ldb;
        const __m256d b0 = _mm256_loadu_pd(brow);
        const __m256d b1 = _mm256_loadu_pd(brow + 4);
        __m256d av = _mm256_broadcast_sd(arow);
        c00 = _mm256_fmadd_pd(av, b0, c00);
        c01 = _mm256_fmadd_pd(av, b1, c01);
        av = _mm256_broadcast_sd(arow + 1);
        c10 = _mm256_fmadd_pd(av, b0, c10);
        c11 = _mm256_fmadd_pd(av, b1, c11);
        av = _mm256_broadcast_sd(arow + 2);
        c20 = _mm256_fmadd_pd(av, b0, c20);
        c21 = _mm256_fmadd_pd(av, b1, c21);
        av = _mm256_broadcast_sd(arow + 3);
        c30 = _mm256_fmadd_pd(av, b0, c30);
        c31 = _mm256_fmadd_pd(av, b1, c31);
    }
    double* r0 = c;
    double* r1 = c + ldc;
    double* r2 = c + 2 * ldc;
    double* r3 = c + 3 * ldc;
    _mm256_storeu_pd(r0, _mm256_add_pd(c00, _mm256_loadu_pd(r0)));
    _mm256_storeu_pd(r0 + 4, _mm256_add_pd(c01, _mm256_loadu_pd(r0 + 4)));
    _mm256_storeu_pd(r1, _mm256_add_pd(c10, _mm256_loadu_pd(r1)));
    _mm256_storeu_pd(r1 + 4, _mm256_add_pd(c11, _mm256_loadu_pd(r1 + 4)));
    _mm256_storeu_pd(r2, _mm256_add_pd(c20, _mm256_loadu_pd(r2)));
    _mm256_storeu_pd(r2 + 4, _mm256_add_pd(c21, _mm256_loadu_pd(r2 + 4)));
    _mm256_storeu_pd(r3, _mm256_add_pd(c30, _mm256_loadu_pd(r3)));
    _mm256_storeu_pd(r3 + 4, _mm256_add_pd(c31, _mm256_loadu_pd(r3 + 4)));
}

inline void tile_tn_1x4(std::size_t k, const double* a, std::size_t lda,
                        const double* b, std::size_t ldb, double* c) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p) {
        acc = _mm256_fmadd_pd(_mm256_broadcast_sd(a + p * lda), _mm256_loadu_pd(b + p * ldb), acc);
    }
    _mm256_storeu_pd(c, _mm256_add_pd(acc, _mm256_loadu_pd(c)));
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k,
             const double* a, std::size_t lda,
             const double* b, std::size_t ldb,
             double* c, std::size_t ldc) {
    const std::size_t n8 = n - n % 8;
    const std::size_t n4 = n - n % 4;
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        for (std::size_t j = 0; j < n8; j += 8) {
            tile_tn_4x8(k, a + i, lda, b + j, ldb, c + i * ldc + j, ldc);
        }
        for (std::size_t r = 0; r < 4; ++r) {
            for (std::size_t j = n8; j < n4; j += 4) {
                tile_tn_1x4(k, a + i + r, lda, b + j, ldb, c + (i + r) * ldc + j);
            }
            for (std::size_t j = n4; j < n; ++j) {
                double s = 0.0;
                for (std::size_t p = 0; p < k; ++p) s = std::fma(a[p * lda + i + r], b[p * ldb + j], s);
                c[(i + r) * ldc + j] += s;
            }
        }
    }
    for (; i < m; ++i) {
        for (std::size_t j = 0; j < n4; j += 4) tile_tn_1x4(k, a + i, lda, b + j, ldb, c + i * ldc + j);
        for (std::size_t j = n4; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s = std::fma(a[p * lda + i], b[p * ldb + j], s);
            c[i * ldc + j] += s;
        }
    }
}

inline __m256d poly(__m256d x, double c0, double c1, double c2) {
    return _mm256_fmadd_pd(_mm256_fmadd_pd(_mm256_set1_pd(c0), x, _mm256_set1_pd(c1)), x,
                           _mm256_set1_pd(c2));
}

// exp(x) for |x| <= 45, Cody-Waite reduction with a Pade core.
inline __m256d exp_bounded(__m256d x) {
    const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
    const __m256d fx = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                                       _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(fx, _mm256_set1_pd(6.93145751953125E-1), x);
    r = _mm256_fnmadd_pd(fx, _mm256_set1_pd(1.42860682030941723212E-6), r);
    const __m256d r2 = _mm256_mul_pd(r, r);
    const __m256d px = _mm256_mul_pd(
        r, poly(r2, 1.26177193074810590878E-4, 3.02994407707441961300E-2, 9.99999999999999999910E-1));
    __m256d qx = _mm256_fmadd_pd(
        _mm256_fmadd_pd(_mm256_fmadd_pd(_mm256_set1_pd(3.00198505138664455042E-6), r2,
                                        _mm256_set1_pd(2.52448340349684104192E-3)),
                        r2, _mm256_set1_pd(2.27265548208155028766E-1)),
        r2, _mm256_set1_pd(2.00000000000000000009E0));
    __m256d e = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
    e = _mm256_fmadd_pd(_mm256_set1_pd(2.0), e, _mm256_set1_pd(1.0));
    // Scale by 2^fx through the exponent field.
    const __m128i n32 = _mm256_cvtpd_epi32(fx);
    const __m256i n64 = _mm256_cvtepi32_epi64(n32);
    const __m256i shifted = _mm256_slli_epi64(n64, 52);
    return _mm256_castsi256_pd(_mm256_add_epi64(_mm256_castpd_si256(e), shifted));
}

void tanh_kernel(const double* x, double* y, std::size_t n) {
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d two = _mm256_set1_pd(2.0);
    const __m256d small = _mm256_set1_pd(0.625);
    const __m256d big = _mm256_set1_pd(22.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(x + i);
        const __m256d sign = _mm256_and_pd(v, sign_mask);
        const __m256d ax = _mm256_andnot_pd(sign_mask, v);
        // |x| < 0.625: x + x^3 P(x^2) / Q(x^2)
        const __m256d z = _mm256_mul_pd(v, v);
        const __m256d p = poly(z, -9.64399179425052238628E-1, -9.92877231001918586564E1,
                               -1.61468768441708447952E3);
        const __m256d q = _mm256_fmadd_pd(
            _mm256_fmadd_pd(_mm256_add_pd(z, _mm256_set1_pd(1.12811678491632931402E2)), z,
                            _mm256_set1_pd(2.23548839060100448583E3)),
            z, _mm256_set1_pd(4.84406305325125486048E3));
        const __m256d t_small = _mm256_fmadd_pd(_mm256_mul_pd(v, z), _mm256_div_pd(p, q), v);
        // |x| >= 0.625: 1 - 2 / (exp(2|x|) + 1)
        const __m256d clamped = _mm256_min_pd(big, ax);
        const __m256d e = exp_bounded(_mm256_add_pd(clamped, clamped));
        __m256d t_large = _mm256_sub_pd(one, _mm256_div_pd(two, _mm256_add_pd(e, one)));
        t_large = _mm256_or_pd(t_large, sign);
        const __m256d use_small = _mm256_cmp_pd(ax, small, _CMP_LT_OQ);
        const __m256d t = _mm256_blendv_pd(t_large, t_small, use_small);
        const __m256d is_nan = _mm256_cmp_pd(v, v, _CMP_UNORD_Q);
        _mm256_storeu_pd(y + i, _mm256_blendv_pd(t, v, is_nan));
    }
    for (; i < n; ++i) y[i] = std::tanh(x[i]);
}

void tanh_backward(const double* a, const double* da, double* dz, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d av = _mm256_loadu_pd(a + i);
        const __m256d s = _mm256_fnmadd_pd(av, av, one);
        _mm256_storeu_pd(dz + i, _mm256_mul_pd(_mm256_loadu_pd(da + i), s));
    }
    for (; i < n; ++i) dz[i] = da[i] * (1.0 - a[i] * a[i]);
}

}  // namespace

namespace detail {
const KernelTable avx2_table{&gemm_nn, &gemm_tn, &tanh_kernel, &tanh_backward};
}

}  // namespace npm::simd
