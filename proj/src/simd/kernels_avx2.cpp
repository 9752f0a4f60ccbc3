#include "ovita/simd/kernels.hpp"

#include "kernels_internal.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define OVITA_HAVE_AVX2_TU 1
#include <immintrin.h>
#endif

#include <cmath>

namespace ovita::simd {

#if OVITA_HAVE_AVX2_TU
namespace {

// Only "avx2" is enabled for these functions, never "fma": the compiler must
// not contract the mul/add pairs, otherwise results drift from the scalar path.
#define OVITA_AVX2 __attribute__((target("avx2")))

OVITA_AVX2 void dual_update_avx2(const DualUpdateArgs& a) {
    const std::size_t m = a.z.size();
    const __m256d alpha = _mm256_set1_pd(a.alpha);
    const __m256d one_minus_alpha = _mm256_set1_pd(1.0 - a.alpha);
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        const __m256d zt = _mm256_loadu_pd(a.z_tilde.data() + i);
        const __m256d z = _mm256_loadu_pd(a.z.data() + i);
        const __m256d y = _mm256_loadu_pd(a.y.data() + i);
        const __m256d rho = _mm256_loadu_pd(a.rho.data() + i);
        const __m256d rho_inv = _mm256_loadu_pd(a.rho_inv.data() + i);
        const __m256d lower = _mm256_loadu_pd(a.lower.data() + i);
        const __m256d upper = _mm256_loadu_pd(a.upper.data() + i);

        const __m256d v = _mm256_add_pd(_mm256_mul_pd(alpha, zt), _mm256_mul_pd(one_minus_alpha, z));
        const __m256d w = _mm256_add_pd(v, _mm256_mul_pd(y, rho_inv));
        // maxpd(a,b) = a > b ? a : b and minpd(a,b) = a < b ? a : b, matching the scalar selects.
        const __m256d lo = _mm256_max_pd(w, lower);
        const __m256d zn = _mm256_min_pd(lo, upper);
        const __m256d yn = _mm256_add_pd(y, _mm256_mul_pd(rho, _mm256_sub_pd(v, zn)));

        _mm256_storeu_pd(a.dy.data() + i, _mm256_sub_pd(yn, y));
        _mm256_storeu_pd(a.y.data() + i, yn);
        _mm256_storeu_pd(a.z.data() + i, zn);
    }
    detail::dual_update_tail(a, i);
}

OVITA_AVX2 void relax_avx2(std::span<const double> x_tilde, std::span<double> x, double alpha_s) {
    const double oma_s = 1.0 - alpha_s;
    const __m256d alpha = _mm256_set1_pd(alpha_s);
    const __m256d one_minus_alpha = _mm256_set1_pd(oma_s);
    std::size_t i = 0;
    for (; i + 4 <= x.size(); i += 4) {
        const __m256d xt = _mm256_loadu_pd(x_tilde.data() + i);
        const __m256d xv = _mm256_loadu_pd(x.data() + i);
        _mm256_storeu_pd(x.data() + i,
                         _mm256_add_pd(_mm256_mul_pd(alpha, xt), _mm256_mul_pd(one_minus_alpha, xv)));
    }
    for (; i < x.size(); ++i) x[i] = alpha_s * x_tilde[i] + oma_s * x[i];
}

OVITA_AVX2 double horizontal_max(__m256d v) {
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, v);
    double m = lanes[0];
    for (int k = 1; k < 4; ++k) m = lanes[k] > m ? lanes[k] : m;
    return m;
}

OVITA_AVX2 double max_abs_avx2(std::span<const double> a) {
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= a.size(); i += 4) {
        const __m256d av = _mm256_andnot_pd(sign_mask, _mm256_loadu_pd(a.data() + i));
        acc = _mm256_max_pd(av, acc);
    }
    double m = horizontal_max(acc);
    for (; i < a.size(); ++i) {
        const double av = std::fabs(a[i]);
        m = av > m ? av : m;
    }
    return m;
}

OVITA_AVX2 double max_abs_diff_avx2(std::span<const double> a, std::span<const double> b) {
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= a.size(); i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i));
        acc = _mm256_max_pd(_mm256_andnot_pd(sign_mask, d), acc);
    }
    double m = horizontal_max(acc);
    for (; i < a.size(); ++i) {
        const double av = std::fabs(a[i] - b[i]);
        m = av > m ? av : m;
    }
    return m;
}

}  // namespace

const KernelTable* avx2_kernels() {
    static const bool supported = __builtin_cpu_supports("avx2");
    static const KernelTable table{"avx2", dual_update_avx2, relax_avx2, max_abs_avx2, max_abs_diff_avx2};
    return supported ? &table : nullptr;
}

#else

const KernelTable* avx2_kernels() { return nullptr; }

#endif

}  // namespace ovita::simd
