#include "ovita/csm/csm.hpp"

#include "ovita/core/json_io.hpp"

#include <algorithm>
#include <cmath>

namespace ovita::csm {
namespace {

constexpr Eigen::Index kStride = static_cast<Eigen::Index>(Trajectory::kStride);
constexpr double kDegenerateDistance = 1e-9;

// Accumulates rows of G/h (or A/b) before they are packed into dense matrices.
class RowBuilder {
public:
    explicit RowBuilder(Eigen::Index n) : n_(n) {}

    Eigen::VectorXd& add(double rhs, RowTag tag) {
        rows_.emplace_back(Eigen::VectorXd::Zero(n_));
        rhs_.push_back(rhs);
        tags_.push_back(std::move(tag));
        return rows_.back();
    }

    void pack(MatrixXd& M, VectorXd& v, std::vector<RowTag>& tags) {
        const auto m = static_cast<Eigen::Index>(rows_.size());
        M.resize(m, n_);
        v.resize(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            M.row(i) = rows_[static_cast<std::size_t>(i)].transpose();
            v[i] = rhs_[static_cast<std::size_t>(i)];
        }
        tags = std::move(tags_);
    }

private:
    Eigen::Index n_;
    std::vector<Eigen::VectorXd> rows_;
    std::vector<double> rhs_;
    std::vector<RowTag> tags_;
};

// Linearization of g(p) = |p - c|^2 around p_ref: g(p_ref) + grad'(p - p_ref), grad = 2 (p_ref - c).
struct SphereLinearization {
    Vec3 grad;
    double offset;  // g(p_ref) - grad'p_ref, so g_lin(p) = grad'p + offset
};

SphereLinearization linearize(const Vec3& p_ref, const Vec3& c, std::size_t waypoint, const std::string& what) {
    const Vec3 d = p_ref - c;
    if (d.norm() < kDegenerateDistance) throw DegenerateLinearization(waypoint, what);
    const Vec3 grad = 2.0 * d;
    return {grad, d.squaredNorm() - grad.dot(p_ref)};
}

}  // namespace

void validate(const CsmConfig& cfg) {
    if (!(cfg.lambda_dev > 0.0) || !std::isfinite(cfg.lambda_dev)) {
        throw InvalidArgument("lambda_dev must be > 0");
    }
    if (!(cfg.lambda_smooth > 0.0) || !std::isfinite(cfg.lambda_smooth)) {
        throw InvalidArgument("lambda_smooth must be > 0");
    }
}

std::string to_string(RowKind k) {
    switch (k) {
        case RowKind::WorkspaceUpper: return "workspace_upper";
        case RowKind::WorkspaceLower: return "workspace_lower";
        case RowKind::SphereOuter: return "sphere_outer";
        case RowKind::SphereInner: return "sphere_inner";
        case RowKind::Obstacle: return "obstacle";
        case RowKind::SpeedMax: return "speed_max";
        case RowKind::SpeedMin: return "speed_min";
        case RowKind::FixStart: return "fix_start";
        case RowKind::FixGoal: return "fix_goal";
    }
    return "unknown";
}

MatrixXd difference_operator(std::size_t num_waypoints, bool include_speed) {
    const Eigen::Index N = static_cast<Eigen::Index>(num_waypoints);
    const Eigen::Index channels = include_speed ? 4 : 3;
    MatrixXd D = MatrixXd::Zero(std::max<Eigen::Index>(N - 1, 0) * channels, N * kStride);
    for (Eigen::Index i = 0; i + 1 < N; ++i) {
        for (Eigen::Index c = 0; c < channels; ++c) {
            D(i * channels + c, i * kStride + c) = -1.0;
            D(i * channels + c, (i + 1) * kStride + c) = 1.0;
        }
    }
    return D;
}

Objective build_objective(const Trajectory& ref, const CsmConfig& cfg) {
    // A zero smoothness weight is allowed here so the pure-deviation objective
    // can be inspected; enforce() requires both weights strictly positive.
    if (!(cfg.lambda_dev > 0.0) || !(cfg.lambda_smooth >= 0.0) || !std::isfinite(cfg.lambda_smooth)) {
        throw InvalidArgument("objective weights require lambda_dev > 0 and lambda_smooth >= 0");
    }
    const Eigen::Index n = static_cast<Eigen::Index>(ref.size()) * kStride;
    const MatrixXd D = difference_operator(ref.size(), cfg.smooth_speed_channel);
    Objective o;
    o.P = 2.0 * (cfg.lambda_dev * MatrixXd::Identity(n, n) + cfg.lambda_smooth * (D.transpose() * D));
    o.q = -2.0 * cfg.lambda_dev * flatten(ref);
    return o;
}

Constraints build_constraints(const Trajectory& ref, const Scene& scene, const RobotProfile& profile) {
    validate(profile);
    const std::size_t N = ref.size();
    const Eigen::Index n = static_cast<Eigen::Index>(N) * kStride;
    const double delta = profile.delta;
    RowBuilder ineq(n);

    if (const auto* cub = std::get_if<CuboidWorkspace>(&profile.workspace)) {
        for (int axis = 0; axis < 3; ++axis) {
            if (!(cub->min[axis] + delta < cub->max[axis] - delta)) {
                throw InvalidArgument("inconsistent profile: safety margin closes the cuboid workspace on axis " +
                                      std::to_string(axis));
            }
        }
        for (std::size_t t = 0; t < N; ++t) {
            const Eigen::Index base = static_cast<Eigen::Index>(t) * kStride;
            for (int axis = 0; axis < 3; ++axis) {
                ineq.add(cub->max[axis] - delta, {RowKind::WorkspaceUpper, t, axis, {}})[base + axis] = 1.0;
                ineq.add(-(cub->min[axis] + delta), {RowKind::WorkspaceLower, t, axis, {}})[base + axis] = -1.0;
            }
        }
    } else if (const auto* sph = std::get_if<SphereWorkspace>(&profile.workspace)) {
        for (std::size_t t = 0; t < N; ++t) {
            const Eigen::Index base = static_cast<Eigen::Index>(t) * kStride;
            const auto lin = linearize(ref[t].position(), sph->center, t, "the spherical workspace");
            // outer: grad'p + offset <= r_max^2
            auto& outer = ineq.add(sph->r_max * sph->r_max - lin.offset, {RowKind::SphereOuter, t, -1, {}});
            outer.segment<3>(base) = lin.grad;
            // inner: -(grad'p + offset) <= -r_min^2
            auto& inner = ineq.add(lin.offset - sph->r_min * sph->r_min, {RowKind::SphereInner, t, -1, {}});
            inner.segment<3>(base) = -lin.grad;
        }
    }

    for (const auto& obj : scene.objects()) {
        const BoundingSphere bs = bounding_sphere(obj);
        const double clearance = bs.radius * bs.radius + delta * delta;
        for (std::size_t t = 0; t < N; ++t) {
            const Eigen::Index base = static_cast<Eigen::Index>(t) * kStride;
            const auto lin = linearize(ref[t].position(), bs.center, t, "obstacle '" + obj.label + "'");
            // grad'p + offset >= R^2 + delta^2  <=>  -grad'p <= offset - (R^2 + delta^2)
            auto& row = ineq.add(lin.offset - clearance, {RowKind::Obstacle, t, -1, obj.label});
            row.segment<3>(base) = -lin.grad;
        }
    }

    for (std::size_t t = 0; t < N; ++t) {
        const Eigen::Index v = static_cast<Eigen::Index>(t) * kStride + 3;
        ineq.add(profile.v_max, {RowKind::SpeedMax, t, 3, {}})[v] = 1.0;
        ineq.add(0.0, {RowKind::SpeedMin, t, 3, {}})[v] = -1.0;
    }

    RowBuilder eq(n);
    auto pin = [&](std::size_t t, RowKind kind) {
        const Waypoint& w = ref[t];
        const double values[4] = {w.x, w.y, w.z, w.v};
        for (int c = 0; c < 4; ++c) {
            eq.add(values[c], {kind, t, c, {}})[static_cast<Eigen::Index>(t) * kStride + c] = 1.0;
        }
    };
    if (profile.fix_start) pin(0, RowKind::FixStart);
    if (profile.fix_goal) pin(N - 1, RowKind::FixGoal);

    Constraints c;
    ineq.pack(c.G, c.h, c.inequality_tags);
    eq.pack(c.A, c.b, c.equality_tags);
    return c;
}

double true_violation(const Trajectory& t, const Scene& scene, const RobotProfile& profile) {
    double worst = 0.0;
    if (const auto* sph = std::get_if<SphereWorkspace>(&profile.workspace)) {
        for (const auto& w : t) {
            const double g = (w.position() - sph->center).squaredNorm();
            worst = std::max({worst, g - sph->r_max * sph->r_max, sph->r_min * sph->r_min - g});
        }
    }
    for (const auto& obj : scene.objects()) {
        const BoundingSphere bs = bounding_sphere(obj);
        const double clearance = bs.radius * bs.radius + profile.delta * profile.delta;
        for (const auto& w : t) {
            worst = std::max(worst, clearance - (w.position() - bs.center).squaredNorm());
        }
    }
    return worst;
}

CsmReport enforce(const Trajectory& ref, const Scene& scene, const RobotProfile& profile, const CsmConfig& cfg) {
    validate(cfg);
    const Objective obj = build_objective(ref, cfg);
    const Constraints con = build_constraints(ref, scene, profile);
    const qp::Problem problem{obj.P, obj.q, con.G, con.h, con.A, con.b};
    const qp::Solution sol = qp::solve(problem, cfg.solver);

    // Solver speeds may sit a rounding error below an active v >= 0 row; the
    // trajectory type forbids negative speeds, so those are written back as 0.
    VectorXd x = sol.x;
    std::size_t snapped = 0;
    for (Eigen::Index i = 3; i < x.size(); i += kStride) {
        if (x[i] < 0.0) {
            x[i] = 0.0;
            ++snapped;
        }
    }

    CsmReport r{unflatten(x, ref.frame()), {}, {}, {}, {}, {}, {}, {}, {}};
    r.status = sol.status;
    r.kkt = qp::kkt_residuals(problem, sol);
    r.iterations = sol.iterations;
    r.speeds_snapped = snapped;
    double linear = 0.0;
    if (con.G.rows() > 0) linear = std::max(linear, (con.G * sol.x - con.h).maxCoeff());
    if (con.A.rows() > 0) linear = std::max(linear, (con.A * sol.x - con.b).cwiseAbs().maxCoeff());
    r.linear_violation_max = linear;
    r.true_violation_max = true_violation(r.solution, scene, profile);
    r.deviation_cost = (sol.x - flatten(ref)).squaredNorm();
    r.smoothness_cost = (difference_operator(ref.size(), cfg.smooth_speed_channel) * sol.x).squaredNorm();
    return r;
}

nlohmann::json to_json(const CsmReport& r) {
    return {{"solution", io::to_json(r.solution)},
            {"status", qp::to_string(r.status)},
            {"linear_violation_max", r.linear_violation_max},
            {"true_violation_max", r.true_violation_max},
            {"deviation_cost", r.deviation_cost},
            {"smoothness_cost", r.smoothness_cost},
            {"kkt", {{"primal", r.kkt.primal}, {"dual", r.kkt.dual}, {"comp", r.kkt.comp}}},
            {"iterations", r.iterations},
            {"speeds_snapped", r.speeds_snapped}};
}

nlohmann::json to_json(const CsmConfig& c) {
    return {{"lambda_dev", c.lambda_dev},
            {"lambda_smooth", c.lambda_smooth},
            {"smooth_speed_channel", c.smooth_speed_channel}};
}

CsmConfig config_from_json(const nlohmann::json& j, const std::string& path) {
    io::require_object(j, path);
    io::reject_unknown_keys(j, {"lambda_dev", "lambda_smooth", "smooth_speed_channel"}, path);
    CsmConfig c;
    if (auto it = j.find("lambda_dev"); it != j.end()) {
        c.lambda_dev = io::require_number(*it, io::join_path(path, "lambda_dev"));
    }
    if (auto it = j.find("lambda_smooth"); it != j.end()) {
        c.lambda_smooth = io::require_number(*it, io::join_path(path, "lambda_smooth"));
    }
    if (auto it = j.find("smooth_speed_channel"); it != j.end()) {
        c.smooth_speed_channel = io::require_bool(*it, io::join_path(path, "smooth_speed_channel"));
    }
    if (!(c.lambda_dev > 0.0)) throw SchemaViolation(io::join_path(path, "lambda_dev"), "must be > 0");
    if (!(c.lambda_smooth > 0.0)) throw SchemaViolation(io::join_path(path, "lambda_smooth"), "must be > 0");
    return c;
}

}  // namespace ovita::csm
