#include "ovita/qp/solver.hpp"

#include "ovita/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace ovita::qp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kEqRhoScale = 1e3;
constexpr double kTiny = 1e-30;
constexpr double kEarlyPolishScore = 1e6;  // residuals within 1e6 x tolerance
constexpr int kPolishInterval = 25;
constexpr int kPolishPasses = 4;

std::span<const double> view(const VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}
std::span<double> view(VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

// l <= Cx <= u with the inequality rows first and equality rows after.
struct Stacked {
    MatrixXd C;
    VectorXd l;
    VectorXd u;
    Eigen::Index num_ineq = 0;
};

Stacked stack(const Problem& p) {
    const Eigen::Index n = p.num_vars();
    const Eigen::Index mi = p.G.rows();
    const Eigen::Index me = p.A.rows();
    Stacked s;
    s.num_ineq = mi;
    s.C.resize(mi + me, n);
    s.l.resize(mi + me);
    s.u.resize(mi + me);
    if (mi > 0) {
        s.C.topRows(mi) = p.G;
        s.l.head(mi).setConstant(-kInf);
        s.u.head(mi) = p.h;
    }
    if (me > 0) {
        s.C.bottomRows(me) = p.A;
        s.l.tail(me) = p.b;
        s.u.tail(me) = p.b;
    }
    return s;
}

struct Candidate {
    VectorXd x;
    VectorXd y;
    KktResiduals kkt;
    bool polished = false;
};

class Admm {
public:
    Admm(const Problem& p, const SolverConfig& cfg, const simd::KernelTable& k)
        : p_(p), cfg_(cfg), k_(k), s_(stack(p)) {
        n_ = p.num_vars();
        m_ = s_.C.rows();
        x_ = VectorXd::Zero(n_);
        x_tilde_ = VectorXd::Zero(n_);
        z_ = VectorXd::Zero(m_);
        z_tilde_ = VectorXd::Zero(m_);
        y_ = VectorXd::Zero(m_);
        dy_ = VectorXd::Zero(m_);
        rho_vec_ = VectorXd::Zero(m_);
        rho_inv_ = VectorXd::Zero(m_);
        for (Eigen::Index i = 0; i < m_; ++i) {
            z_[i] = std::clamp(0.0, s_.l[i], s_.u[i]);
        }
        set_rho(std::clamp(cfg.rho, kRhoMin, kRhoMax));
    }

    Solution run() {
        std::optional<Candidate> best;
        double best_score = kInf;
        int last_polish = -1000000;
        int infeasible_streak = 0;
        int iter = 0;
        for (iter = 1; iter <= cfg_.max_iterations; ++iter) {
            step();

            const bool check = iter % cfg_.check_interval == 0 || iter == cfg_.max_iterations;
            if (!check) continue;

            const Residuals r = residuals();
            const double score = std::max(r.prim / r.eps_prim, r.dual / r.eps_dual);
            if (score < best_score) {
                best_score = score;
                best = Candidate{x_, y_, {}, false};
            }

            // Polish is attempted well before ADMM converges: the active set is
            // usually settled long before the residuals are small, and a wrong
            // guess is caught by certification.
            if (cfg_.polish && score <= kEarlyPolishScore && iter - last_polish >= kPolishInterval) {
                last_polish = iter;
                if (auto pc = polish(z_, y_); pc && certified(*pc)) return finish(*pc, iter);
            }
            if (r.prim <= r.eps_prim && r.dual <= r.eps_dual) {
                // The converged active set is the most reliable polish guess.
                if (cfg_.polish && iter != last_polish) {
                    if (auto pc = polish(z_, y_); pc && certified(*pc)) return finish(*pc, iter);
                }
                Candidate raw{x_, y_, audit(x_, y_), false};
                if (certified(raw)) return finish(raw, iter);
            }

            if (primal_infeasibility_certificate()) {
                if (++infeasible_streak >= 2) {
                    Candidate c{x_, y_, audit(x_, y_), false};
                    return finish(c, iter, Status::Infeasible);
                }
            } else {
                infeasible_streak = 0;
            }

            if (cfg_.adaptive_rho && iter % cfg_.adaptive_rho_interval == 0) adapt_rho(r);
        }

        Candidate c = best.value_or(Candidate{x_, y_, {}, false});
        if (cfg_.polish) {
            VectorXd z = s_.C * c.x;
            for (Eigen::Index i = 0; i < m_; ++i) z[i] = std::clamp(z[i], s_.l[i], s_.u[i]);
            if (auto pc = polish(z, c.y); pc && certified(*pc)) return finish(*pc, cfg_.max_iterations);
        }
        c.kkt = audit(c.x, c.y);
        return finish(c, cfg_.max_iterations, Status::MaxIterations);
    }

private:
    struct Residuals {
        double prim;
        double dual;
        double eps_prim;
        double eps_dual;
    };

    void set_rho(double rho) {
        rho_ = rho;
        for (Eigen::Index i = 0; i < m_; ++i) {
            const bool eq = s_.l[i] == s_.u[i];
            rho_vec_[i] = eq ? kEqRhoScale * rho : rho;
            rho_inv_[i] = 1.0 / rho_vec_[i];
        }
        MatrixXd K = p_.P;
        K.diagonal().array() += cfg_.sigma;
        if (m_ > 0) K.noalias() += s_.C.transpose() * rho_vec_.asDiagonal() * s_.C;
        llt_.compute(K);
    }

    void step() {
        VectorXd rhs = cfg_.sigma * x_ - p_.q;
        if (m_ > 0) {
            VectorXd w = rho_vec_.cwiseProduct(z_) - y_;
            rhs.noalias() += s_.C.transpose() * w;
        }
        x_tilde_ = llt_.solve(rhs);
        if (m_ > 0) z_tilde_.noalias() = s_.C * x_tilde_;

        k_.relax(view(x_tilde_), view(x_), cfg_.alpha);
        simd::DualUpdateArgs args{view(z_tilde_), view(z_),    view(y_),   view(dy_),
                                  view(rho_vec_), view(rho_inv_), view(s_.l), view(s_.u),
                                  cfg_.alpha};
        k_.dual_update(args);
    }

    Residuals residuals() const {
        const VectorXd Cx = s_.C * x_;
        const VectorXd Px = p_.P * x_;
        const VectorXd Cty = s_.C.transpose() * y_;
        const VectorXd stationarity = Px + p_.q + Cty;
        Residuals r{};
        r.prim = k_.max_abs_diff(view(Cx), view(z_));
        r.dual = k_.max_abs(view(stationarity));
        r.eps_prim = cfg_.eps_abs + cfg_.eps_rel * std::max(k_.max_abs(view(Cx)), k_.max_abs(view(z_)));
        r.eps_dual = cfg_.eps_abs + cfg_.eps_rel * std::max({k_.max_abs(view(Px)), k_.max_abs(view(Cty)),
                                                             k_.max_abs(view(p_.q))});
        return r;
    }

    void adapt_rho(const Residuals& r) {
        const VectorXd Cx = s_.C * x_;
        const VectorXd Px = p_.P * x_;
        const VectorXd Cty = s_.C.transpose() * y_;
        const double prim_scale = std::max({k_.max_abs(view(Cx)), k_.max_abs(view(z_)), kTiny});
        const double dual_scale = std::max({k_.max_abs(view(Px)), k_.max_abs(view(Cty)),
                                            k_.max_abs(view(p_.q)), kTiny});
        const double num = r.prim / prim_scale;
        const double den = r.dual / dual_scale;
        if (!(num > 0.0) || !(den > 0.0)) return;
        const double candidate = std::clamp(rho_ * std::sqrt(num / den), kRhoMin, kRhoMax);
        if (candidate > rho_ * cfg_.adaptive_rho_tolerance || candidate < rho_ / cfg_.adaptive_rho_tolerance) {
            set_rho(candidate);
        }
    }

    // A normalized dual step dy with C'dy ~ 0 and negative support function
    // u'dy+ + l'dy- proves {l <= Cx <= u} empty.
    bool primal_infeasibility_certificate() const {
        if (m_ == 0) return false;
        VectorXd d = dy_;
        for (Eigen::Index i = 0; i < m_; ++i) {
            if (s_.u[i] == kInf) d[i] = std::min(d[i], 0.0);
            if (s_.l[i] == -kInf) d[i] = std::max(d[i], 0.0);
        }
        const double norm = k_.max_abs(view(d));
        if (norm < 1e-12) return false;
        const VectorXd Ctd = s_.C.transpose() * d;
        if (k_.max_abs(view(Ctd)) > cfg_.eps_prim_inf * norm) return false;
        double support = 0.0;
        for (Eigen::Index i = 0; i < m_; ++i) {
            if (d[i] > 0.0) support += s_.u[i] * d[i];
            if (d[i] < 0.0) support += s_.l[i] * d[i];
        }
        return support < -cfg_.eps_prim_inf * norm;
    }

    // Guess the active set from (z, y), then solve the equality-constrained
    // KKT system on it with regularization plus iterative refinement. Rows
    // whose multiplier comes out with the wrong sign are dropped and the
    // system re-solved; this settles rows that duplicate an equality.
    std::optional<Candidate> polish(const VectorXd& z, const VectorXd& y) const {
        std::vector<Eigen::Index> rows;
        std::vector<double> bounds;
        for (Eigen::Index i = 0; i < m_; ++i) {
            if (s_.l[i] == s_.u[i]) {
                rows.push_back(i);
                bounds.push_back(s_.u[i]);
            } else if (s_.u[i] < kInf && s_.u[i] - z[i] < y[i]) {
                rows.push_back(i);
                bounds.push_back(s_.u[i]);
            } else if (s_.l[i] > -kInf && z[i] - s_.l[i] < -y[i]) {
                rows.push_back(i);
                bounds.push_back(s_.l[i]);
            }
        }
        std::optional<Candidate> c;
        for (int pass = 0; pass < kPolishPasses; ++pass) {
            c = solve_active(rows, bounds);
            if (!c) return c;
            std::vector<Eigen::Index> kept_rows;
            std::vector<double> kept_bounds;
            for (std::size_t a = 0; a < rows.size(); ++a) {
                const Eigen::Index i = rows[a];
                const bool upper = bounds[a] == s_.u[i];
                const bool wrong_sign = s_.l[i] != s_.u[i] && (upper ? c->y[i] < 0.0 : c->y[i] > 0.0);
                if (wrong_sign) continue;
                kept_rows.push_back(i);
                kept_bounds.push_back(bounds[a]);
            }
            if (kept_rows.size() == rows.size()) break;
            rows = std::move(kept_rows);
            bounds = std::move(kept_bounds);
        }
        return c;
    }

    std::optional<Candidate> solve_active(const std::vector<Eigen::Index>& rows,
                                          const std::vector<double>& bounds) const {
        const auto na = static_cast<Eigen::Index>(rows.size());
        const Eigen::Index dim = n_ + na;
        MatrixXd K = MatrixXd::Zero(dim, dim);
        K.topLeftCorner(n_, n_) = p_.P;
        for (Eigen::Index a = 0; a < na; ++a) {
            K.block(n_ + a, 0, 1, n_) = s_.C.row(rows[static_cast<std::size_t>(a)]);
            K.block(0, n_ + a, n_, 1) = s_.C.row(rows[static_cast<std::size_t>(a)]).transpose();
        }
        MatrixXd K_reg = K;
        K_reg.diagonal().head(n_).array() += cfg_.polish_delta;
        K_reg.diagonal().tail(na).array() -= cfg_.polish_delta;

        VectorXd rhs(dim);
        rhs.head(n_) = -p_.q;
        for (Eigen::Index a = 0; a < na; ++a) rhs[n_ + a] = bounds[static_cast<std::size_t>(a)];

        Eigen::PartialPivLU<MatrixXd> lu(K_reg);
        VectorXd sol = lu.solve(rhs);
        for (int it = 0; it < cfg_.polish_refine_iterations; ++it) {
            const VectorXd res = rhs - K * sol;
            if (!res.allFinite()) return std::nullopt;
            if (res.lpNorm<Eigen::Infinity>() < 1e-15 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>())) break;
            sol += lu.solve(res);
        }
        if (!sol.allFinite()) return std::nullopt;

        Candidate c;
        c.x = sol.head(n_);
        c.y = VectorXd::Zero(m_);
        for (Eigen::Index a = 0; a < na; ++a) c.y[rows[static_cast<std::size_t>(a)]] = sol[n_ + a];
        c.kkt = audit(c.x, c.y);
        c.polished = true;
        return c;
    }

    KktResiduals audit(const VectorXd& x, const VectorXd& y) const {
        Solution s;
        s.x = x;
        s.dual_ineq = y.head(s_.num_ineq);
        s.dual_eq = y.tail(m_ - s_.num_ineq);
        return kkt_residuals(p_, s);
    }

    bool certified(const Candidate& c) const {
        const VectorXd Cx = s_.C * c.x;
        const VectorXd Px = p_.P * c.x;
        const VectorXd Cty = s_.C.transpose() * c.y;
        const double tol_prim = cfg_.eps_abs + cfg_.eps_rel * k_.max_abs(view(Cx));
        const double tol_dual = cfg_.eps_abs + cfg_.eps_rel * std::max({k_.max_abs(view(Px)),
                                                                        k_.max_abs(view(Cty)),
                                                                        k_.max_abs(view(p_.q))});
        return c.kkt.primal <= tol_prim && c.kkt.dual <= tol_dual && c.kkt.comp <= cfg_.eps_comp;
    }

    Solution finish(const Candidate& c, int iterations, Status status = Status::Optimal) const {
        Solution s;
        s.x = c.x;
        s.dual_ineq = c.y.head(s_.num_ineq);
        s.dual_eq = c.y.tail(m_ - s_.num_ineq);
        s.status = status;
        const KktResiduals kkt = audit(c.x, c.y);
        s.primal_residual = kkt.primal;
        s.dual_residual = kkt.dual;
        s.iterations = iterations;
        s.polished = c.polished;
        return s;
    }

    const Problem& p_;
    const SolverConfig& cfg_;
    const simd::KernelTable& k_;
    Stacked s_;
    Eigen::Index n_ = 0;
    Eigen::Index m_ = 0;
    double rho_ = 0.1;
    VectorXd x_, x_tilde_, z_, z_tilde_, y_, dy_, rho_vec_, rho_inv_;
    Eigen::LLT<MatrixXd> llt_;
};

}  // namespace

std::string to_string(Status s) {
    switch (s) {
        case Status::Optimal: return "optimal";
        case Status::MaxIterations: return "max_iterations";
        case Status::Infeasible: return "infeasible";
    }
    return "unknown";
}

void check_dimensions(const Problem& p) {
    const Eigen::Index n = p.q.size();
    if (p.P.rows() != n || p.P.cols() != n) {
        throw DimensionMismatch("P must be " + std::to_string(n) + "x" + std::to_string(n));
    }
    if (p.G.rows() != p.h.size() || (p.G.rows() > 0 && p.G.cols() != n)) {
        throw DimensionMismatch("G/h shapes are inconsistent with n = " + std::to_string(n));
    }
    if (p.A.rows() != p.b.size() || (p.A.rows() > 0 && p.A.cols() != n)) {
        throw DimensionMismatch("A/b shapes are inconsistent with n = " + std::to_string(n));
    }
}

KktResiduals kkt_residuals(const Problem& p, const Solution& s) {
    check_dimensions(p);
    const Eigen::Index n = p.q.size();
    if (s.x.size() != n || s.dual_ineq.size() != p.G.rows() || s.dual_eq.size() != p.A.rows()) {
        throw DimensionMismatch("solution vectors do not match the problem");
    }
    KktResiduals r;
    VectorXd stationarity = p.P * s.x + p.q;
    if (p.G.rows() > 0) {
        const VectorXd slack = p.G * s.x - p.h;
        r.primal = std::max(r.primal, slack.maxCoeff());
        r.comp = s.dual_ineq.cwiseProduct(slack).cwiseAbs().maxCoeff();
        stationarity.noalias() += p.G.transpose() * s.dual_ineq;
        r.dual = std::max(r.dual, -s.dual_ineq.minCoeff());
    }
    if (p.A.rows() > 0) {
        r.primal = std::max(r.primal, (p.A * s.x - p.b).cwiseAbs().maxCoeff());
        stationarity.noalias() += p.A.transpose() * s.dual_eq;
    }
    r.primal = std::max(r.primal, 0.0);
    if (n > 0) r.dual = std::max(r.dual, stationarity.cwiseAbs().maxCoeff());
    return r;
}

double objective(const Problem& p, const VectorXd& x) { return 0.5 * x.dot(p.P * x) + p.q.dot(x); }

Solution solve(const Problem& p, const SolverConfig& cfg) {
    check_dimensions(p);
    if (!p.P.allFinite() || !p.q.allFinite() || !p.G.allFinite() || !p.h.allFinite() || !p.A.allFinite() ||
        !p.b.allFinite()) {
        throw DimensionMismatch("problem data must be finite");
    }
    const double scale = std::max(1.0, p.P.cwiseAbs().maxCoeff());
    if ((p.P - p.P.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw NotPsd("P is not symmetric");
    }
    MatrixXd shifted = p.P;
    shifted.diagonal().array() += 1e-9;
    if (Eigen::LLT<MatrixXd>(shifted).info() != Eigen::Success) {
        throw NotPsd("P + 1e-9 I has no Cholesky factor");
    }
    Admm admm(p, cfg, cfg.kernels ? *cfg.kernels : simd::active_kernels());
    return admm.run();
}

}  // namespace ovita::qp
