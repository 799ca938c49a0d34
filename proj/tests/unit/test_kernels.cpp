#include "npm/kernels.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

using namespace npm::simd;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    return v;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("scalar gemm matches naive triple loop") {
    std::mt19937_64 rng(1);
    const std::size_t m = 5, n = 7, k = 3;
    auto a = random_vec(m * k, rng);
    auto b = random_vec(k * n, rng);
    std::vector<double> c(m * n, 9.0);
    kernels(Isa::scalar).gemm_nn(m, n, k, a.data(), k, b.data(), n, c.data(), n, false);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
            CHECK(c[i * n + j] == doctest::Approx(s).epsilon(1e-14));
        }
}

TEST_CASE("avx2 kernels agree with scalar reference") {
    if (!isa_supported(Isa::avx2)) return;
    const KernelTable& ref = kernels(Isa::scalar);
    const KernelTable& vec = kernels(Isa::avx2);
    std::mt19937_64 rng(7);

    for (std::size_t m : {1u, 3u, 4u, 9u, 33u}) {
        for (std::size_t n : {1u, 5u, 8u, 17u, 62u}) {
            for (std::size_t k : {1u, 2u, 7u, 60u}) {
                auto a = random_vec(m * k, rng);
                auto b = random_vec(k * n, rng);
                auto c0 = random_vec(m * n, rng);
                auto c1 = c0;
                ref.gemm_nn(m, n, k, a.data(), k, b.data(), n, c0.data(), n, true);
                vec.gemm_nn(m, n, k, a.data(), k, b.data(), n, c1.data(), n, true);
                CHECK(max_diff(c0, c1) < 1e-12);

                auto at = random_vec(k * m, rng);
                auto d0 = random_vec(m * n, rng);
                auto d1 = d0;
                ref.gemm_tn(m, n, k, at.data(), m, b.data(), n, d0.data(), n);
                vec.gemm_tn(m, n, k, at.data(), m, b.data(), n, d1.data(), n);
                CHECK(max_diff(d0, d1) < 1e-12);
            }
        }
    }

    auto x = random_vec(1001, rng, 25.0);
    x[0] = 0.0;
    x[1] = 1e-300;
    x[2] = -0.6249;
    x[3] = 0.625;
    x[4] = 800.0;
    x[5] = -800.0;
    std::vector<double> y0(x.size()), y1(x.size());
    ref.tanh(x.data(), y0.data(), x.size());
    vec.tanh(x.data(), y1.data(), x.size());
    CHECK(max_diff(y0, y1) < 4e-16);

    std::vector<double> nan_in{std::numeric_limits<double>::quiet_NaN(), 1.0, 2.0, 3.0, -1.0};
    std::vector<double> nan_out(nan_in.size());
    vec.tanh(nan_in.data(), nan_out.data(), nan_in.size());
    CHECK(std::isnan(nan_out[0]));

    auto da = random_vec(x.size(), rng);
    std::vector<double> z0(x.size()), z1(x.size());
    ref.tanh_backward(y0.data(), da.data(), z0.data(), x.size());
    vec.tanh_backward(y0.data(), da.data(), z1.data(), x.size());
    CHECK(max_diff(z0, z1) < 1e-15);
}

TEST_CASE("isa selection") {
    CHECK(isa_supported(Isa::scalar));
    const Isa before = active_isa();
    set_active_isa(Isa::scalar);
    CHECK(active_isa() == Isa::scalar);
    CHECK(&kernels() == &kernels(Isa::scalar));
    set_active_isa(before);
    CHECK(isa_name(Isa::avx2) == "avx2");
}
