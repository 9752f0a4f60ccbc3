#pragma once

// Dense convex QP:
//
//   minimize    1/2 x'Px + q'x
//   subject to  Gx <= h,  Ax = b
//
// solved by operator splitting (ADMM) on the stacked form l <= Cx <= u, with
// over-relaxation, adaptive step size, a cached Cholesky factor, and a final
// active-set polishing solve. Every Optimal result is certified against the
// KKT conditions before it is returned.

#include "ovita/core/error.hpp"
#include "ovita/simd/kernels.hpp"

#include <Eigen/Dense>

#include <string>

namespace ovita::qp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

class DimensionMismatch : public Error {
public:
    explicit DimensionMismatch(const std::string& message) : Error("dimension_mismatch", message) {}
};

class NotPsd : public Error {
public:
    explicit NotPsd(const std::string& message) : Error("not_psd", message) {}
};

struct Problem {
    MatrixXd P;
    VectorXd q;
    MatrixXd G;  // m_i x n, may have zero rows
    VectorXd h;
    MatrixXd A;  // m_e x n, may have zero rows
    VectorXd b;

    Eigen::Index num_vars() const { return q.size(); }
};

enum class Status { Optimal, MaxIterations, Infeasible };

std::string to_string(Status s);

struct Solution {
    VectorXd x;
    VectorXd dual_ineq;  // >= 0
    VectorXd dual_eq;
    Status status = Status::MaxIterations;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    int iterations = 0;
    bool polished = false;
};

struct SolverConfig {
    double eps_abs = 1e-6;
    double eps_rel = 1e-6;
    double eps_comp = 1e-6;
    double eps_prim_inf = 1e-5;
    int max_iterations = 20000;
    double rho = 0.1;
    double sigma = 1e-6;
    double alpha = 1.6;  // over-relaxation
    bool adaptive_rho = true;
    int adaptive_rho_interval = 25;
    double adaptive_rho_tolerance = 5.0;
    int check_interval = 5;
    bool polish = true;
    double polish_delta = 1e-9;
    int polish_refine_iterations = 8;
    const simd::KernelTable* kernels = nullptr;  // nullptr: runtime dispatch
};

struct KktResiduals {
    double primal = 0.0;  // max(Gx-h)_+ and |Ax-b|
    double dual = 0.0;    // |Px + q + G'mu + A'nu|, and -min(mu)
    double comp = 0.0;    // |mu_i (Gx-h)_i|
};

/// Throws DimensionMismatch on inconsistent shapes.
void check_dimensions(const Problem& p);

/// Pure KKT audit of (x, dual_ineq, dual_eq) against the problem data.
/// Empty constraint blocks contribute zero.
KktResiduals kkt_residuals(const Problem& p, const Solution& s);

double objective(const Problem& p, const VectorXd& x);

/// Throws DimensionMismatch, or NotPsd when P is asymmetric or P + 1e-9 I
/// admits no Cholesky factor. Infeasibility and iteration exhaustion are
/// reported through Solution::status.
Solution solve(const Problem& p, const SolverConfig& cfg = {});

}  // namespace ovita::qp
