#include "npm/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace npm::simd {
namespace {

bool cpu_has_avx2() noexcept {
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa detect() {
    Isa best = cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
    if (const char* env = std::getenv("NPM_SIMD")) {
        const std::string want(env);
        if (want == "scalar") return Isa::scalar;
        if (want == "avx2" && best == Isa::avx2) return Isa::avx2;
    }
    return best;
}

std::atomic<Isa>& active() {
    static std::atomic<Isa> isa{detect()};
    return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
    }
    return "unknown";
}

bool isa_supported(Isa isa) noexcept {
    return isa == Isa::scalar || (isa == Isa::avx2 && cpu_has_avx2());
}

const KernelTable& kernels(Isa isa) {
    if (!isa_supported(isa)) {
        throw std::invalid_argument("kernel family not supported on this CPU: " + std::string(isa_name(isa)));
    }
#if defined(__x86_64__) || defined(_M_X64)
    if (isa == Isa::avx2) return detail::avx2_table;
#endif
    return detail::scalar_table;
}

const KernelTable& kernels() { return kernels(active().load(std::memory_order_relaxed)); }

Isa active_isa() noexcept { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
    if (!isa_supported(isa)) {
        throw std::invalid_argument("kernel family not supported on this CPU: " + std::string(isa_name(isa)));
    }
    active().store(isa, std::memory_order_relaxed);
}

}  // namespace npm::simd
