#include "ovita/simd/kernels.hpp"

#include "kernels_internal.hpp"

#include <cmath>

namespace ovita::simd {
namespace {

void dual_update_scalar(const DualUpdateArgs& a) { detail::dual_update_tail(a, 0); }

void relax_scalar(std::span<const double> x_tilde, std::span<double> x, double alpha) {
    const double one_minus_alpha = 1.0 - alpha;
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = alpha * x_tilde[i] + one_minus_alpha * x[i];
    }
}

double max_abs_scalar(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) {
        const double av = std::fabs(v);
        m = av > m ? av : m;
    }
    return m;
}

double max_abs_diff_scalar(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double av = std::fabs(a[i] - b[i]);
        m = av > m ? av : m;
    }
    return m;
}

}  // namespace

const KernelTable& scalar_kernels() {
    static const KernelTable table{"scalar", dual_update_scalar, relax_scalar, max_abs_scalar,
                                   max_abs_diff_scalar};
    return table;
}

namespace detail {
void dual_update_tail(const DualUpdateArgs& a, std::size_t begin) {
    const double alpha = a.alpha;
    const double one_minus_alpha = 1.0 - alpha;
    for (std::size_t i = begin; i < a.z.size(); ++i) {
        const double v = alpha * a.z_tilde[i] + one_minus_alpha * a.z[i];
        const double w = v + a.y[i] * a.rho_inv[i];
        const double lo = w > a.lower[i] ? w : a.lower[i];
        const double zn = lo < a.upper[i] ? lo : a.upper[i];
        const double yn = a.y[i] + a.rho[i] * (v - zn);
        a.dy[i] = yn - a.y[i];
        a.y[i] = yn;
        a.z[i] = zn;
    }
}
}  // namespace detail

}  // namespace ovita::simd
