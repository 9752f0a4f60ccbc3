#pragma once

// Elementwise kernels on the hot path of the ADMM iteration.
//
// Every variant must be bit-identical to the scalar reference: no fused
// multiply-add, identical operation order, and min/max with the exact
// select semantics spelled out below. Session replay depends on this, since a
// golden trajectory recorded on one machine must reproduce on another
// regardless of which variant the dispatcher picks.

#include <cstddef>
#include <span>
#include <string_view>

namespace ovita::simd {

/// Views over the per-constraint ADMM state. All spans have equal length.
struct DualUpdateArgs {
    std::span<const double> z_tilde;  // C * x_tilde
    std::span<double> z;              // in: z_k, out: z_{k+1}
    std::span<double> y;              // in: y_k, out: y_{k+1}
    std::span<double> dy;             // out: y_{k+1} - y_k
    std::span<const double> rho;
    std::span<const double> rho_inv;
    std::span<const double> lower;
    std::span<const double> upper;
    double alpha = 1.6;
};

/// Per row:
///   v  = alpha*zt + (1-alpha)*z
///   w  = v + y*rho_inv
///   zn = min(max(w, lower), upper)  with max(a,b) = a > b ? a : b, min(a,b) = a < b ? a : b
///   yn = y + rho*(v - zn)
using DualUpdateFn = void (*)(const DualUpdateArgs&);

/// x = alpha*x_tilde + (1-alpha)*x
using RelaxFn = void (*)(std::span<const double> x_tilde, std::span<double> x, double alpha);

/// max_i |a_i| (0 for empty input).
using MaxAbsFn = double (*)(std::span<const double> a);

/// max_i |a_i - b_i| (0 for empty input).
using MaxAbsDiffFn = double (*)(std::span<const double> a, std::span<const double> b);

struct KernelTable {
    std::string_view name;
    DualUpdateFn dual_update;
    RelaxFn relax;
    MaxAbsFn max_abs;
    MaxAbsDiffFn max_abs_diff;
};

const KernelTable& scalar_kernels();

/// nullptr when the variant was not compiled in or the CPU lacks the extension.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

/// Best available table. Honors OVITA_SIMD=scalar|avx2|neon|auto, read once.
const KernelTable& active_kernels();

}  // namespace ovita::simd
