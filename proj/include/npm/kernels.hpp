#pragma once

// Dense inner-loop kernels used by the batched network evaluator and the
// stage algebra. Every kernel has a portable scalar reference implementation
// and, on x86-64, an AVX2/FMA variant. The active table is chosen once at
// startup from CPUID and can be overridden with NPM_SIMD=scalar|avx2.

#include <cstddef>
#include <string_view>

namespace npm::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa) noexcept;

/// Row-major kernels. Leading dimensions are in elements.
struct KernelTable {
    /// C[m x n] = A[m x k] * B[k x n]   (or C += ... when accumulate is set)
    void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, std::size_t lda,
                    const double* b, std::size_t ldb,
                    double* c, std::size_t ldc, bool accumulate);

    /// C[m x n] += A[k x m]^T * B[k x n]
    void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, std::size_t lda,
                    const double* b, std::size_t ldb,
                    double* c, std::size_t ldc);

    /// y[i] = tanh(x[i]); in-place allowed.
    void (*tanh)(const double* x, double* y, std::size_t n);

    /// dz[i] = da[i] * (1 - a[i]^2)
    void (*tanh_backward)(const double* a, const double* da, double* dz, std::size_t n);
};

const KernelTable& kernels(Isa isa);

/// Table selected for this process.
const KernelTable& kernels();
Isa active_isa() noexcept;

bool isa_supported(Isa isa) noexcept;

/// Forces a kernel family; throws std::invalid_argument if the CPU lacks it.
void set_active_isa(Isa isa);

namespace detail {
extern const KernelTable scalar_table;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable avx2_table;
#endif
}  // namespace detail

}  // namespace npm::simd
