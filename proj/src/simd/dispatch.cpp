#include "ovita/simd/kernels.hpp"

#include <cstdlib>
#include <string_view>

namespace ovita::simd {
namespace {

const KernelTable& pick() {
    const char* env = std::getenv("OVITA_SIMD");
    const std::string_view want = env ? env : "auto";
    if (want == "scalar") return scalar_kernels();
    if (want == "avx2") {
        if (const auto* t = avx2_kernels()) return *t;
        return scalar_kernels();
    }
    if (want == "neon") {
        if (const auto* t = neon_kernels()) return *t;
        return scalar_kernels();
    }
    if (const auto* t = avx2_kernels()) return *t;
    if (const auto* t = neon_kernels()) return *t;
    return scalar_kernels();
}

}  // namespace

const KernelTable& active_kernels() {
    static const KernelTable& table = pick();
    return table;
}

}  // namespace ovita::simd
