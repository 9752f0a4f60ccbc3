#pragma once

#include "ovita/simd/kernels.hpp"

namespace ovita::simd::detail {

/// Scalar dual update over rows [begin, size); vector variants finish their remainder with it.
void dual_update_tail(const DualUpdateArgs& a, std::size_t begin);

}  // namespace ovita::simd::detail
