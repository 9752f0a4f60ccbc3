#include "ovita/simd/kernels.hpp"

#include "kernels_internal.hpp"

#if defined(__aarch64__) || defined(_M_ARM64)
#define OVITA_HAVE_NEON_TU 1
#include <arm_neon.h>
#endif

#include <cmath>

namespace ovita::simd {

#if OVITA_HAVE_NEON_TU
namespace {

// vmaxq/vminq follow IEEE maxNum and order -0 below +0, which the scalar
// select does not; compare-and-select keeps the variants bit-identical.
inline float64x2_t select_max(float64x2_t a, float64x2_t b) { return vbslq_f64(vcgtq_f64(a, b), a, b); }
inline float64x2_t select_min(float64x2_t a, float64x2_t b) { return vbslq_f64(vcltq_f64(a, b), a, b); }

void dual_update_neon(const DualUpdateArgs& a) {
    const std::size_t m = a.z.size();
    const float64x2_t alpha = vdupq_n_f64(a.alpha);
    const float64x2_t one_minus_alpha = vdupq_n_f64(1.0 - a.alpha);
    std::size_t i = 0;
    for (; i + 2 <= m; i += 2) {
        const float64x2_t zt = vld1q_f64(a.z_tilde.data() + i);
        const float64x2_t z = vld1q_f64(a.z.data() + i);
        const float64x2_t y = vld1q_f64(a.y.data() + i);
        const float64x2_t rho = vld1q_f64(a.rho.data() + i);
        const float64x2_t rho_inv = vld1q_f64(a.rho_inv.data() + i);
        const float64x2_t lower = vld1q_f64(a.lower.data() + i);
        const float64x2_t upper = vld1q_f64(a.upper.data() + i);

        // vmulq/vaddq separately: vfmaq would round once and diverge from scalar.
        const float64x2_t v = vaddq_f64(vmulq_f64(alpha, zt), vmulq_f64(one_minus_alpha, z));
        const float64x2_t w = vaddq_f64(v, vmulq_f64(y, rho_inv));
        const float64x2_t zn = select_min(select_max(w, lower), upper);
        const float64x2_t yn = vaddq_f64(y, vmulq_f64(rho, vsubq_f64(v, zn)));

        vst1q_f64(a.dy.data() + i, vsubq_f64(yn, y));
        vst1q_f64(a.y.data() + i, yn);
        vst1q_f64(a.z.data() + i, zn);
    }
    detail::dual_update_tail(a, i);
}

void relax_neon(std::span<const double> x_tilde, std::span<double> x, double alpha_s) {
    const double oma_s = 1.0 - alpha_s;
    const float64x2_t alpha = vdupq_n_f64(alpha_s);
    const float64x2_t one_minus_alpha = vdupq_n_f64(oma_s);
    std::size_t i = 0;
    for (; i + 2 <= x.size(); i += 2) {
        const float64x2_t xt = vld1q_f64(x_tilde.data() + i);
        const float64x2_t xv = vld1q_f64(x.data() + i);
        vst1q_f64(x.data() + i, vaddq_f64(vmulq_f64(alpha, xt), vmulq_f64(one_minus_alpha, xv)));
    }
    for (; i < x.size(); ++i) x[i] = alpha_s * x_tilde[i] + oma_s * x[i];
}

double lanes_max(float64x2_t v) {
    const double a = vgetq_lane_f64(v, 0);
    const double b = vgetq_lane_f64(v, 1);
    return b > a ? b : a;
}

double max_abs_neon(std::span<const double> a) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= a.size(); i += 2) acc = select_max(vabsq_f64(vld1q_f64(a.data() + i)), acc);
    double m = lanes_max(acc);
    for (; i < a.size(); ++i) {
        const double av = std::fabs(a[i]);
        m = av > m ? av : m;
    }
    return m;
}

double max_abs_diff_neon(std::span<const double> a, std::span<const double> b) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= a.size(); i += 2) {
        acc = select_max(vabdq_f64(vld1q_f64(a.data() + i), vld1q_f64(b.data() + i)), acc);
    }
    double m = lanes_max(acc);
    for (; i < a.size(); ++i) {
        const double av = std::fabs(a[i] - b[i]);
        m = av > m ? av : m;
    }
    return m;
}

}  // namespace

const KernelTable* neon_kernels() {
    static const KernelTable table{"neon", dual_update_neon, relax_neon, max_abs_neon, max_abs_diff_neon};
    return &table;
}

#else

const KernelTable* neon_kernels() { return nullptr; }

#endif

}  // namespace ovita::simd
