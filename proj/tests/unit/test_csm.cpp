#include "ovita/csm/csm.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ovita;
using namespace ovita::csm;

namespace {

// Cube whose circumsphere has the given radius.
SceneObject sphere_like(const std::string& label, const Vec3& center, double radius) {
    const double side = 2.0 * radius / std::sqrt(3.0);
    return {label, center, Vec3::Constant(side), {}};
}

RobotProfile unbounded_profile(double v_max = 10.0, double delta = 0.0) {
    RobotProfile p;
    p.workspace = UnboundedWorkspace{};
    p.v_max = v_max;
    p.delta = delta;
    return p;
}

void check_rows_feasible(const Trajectory& ref, const Scene& scene, const RobotProfile& profile,
                         const CsmReport& r) {
    const Constraints c = build_constraints(ref, scene, profile);
    const Eigen::VectorXd x = flatten(r.solution);
    for (Eigen::Index i = 0; i < c.G.rows(); ++i) {
        CAPTURE(to_string(c.inequality_tags[static_cast<std::size_t>(i)].kind));
        CHECK(c.G.row(i).dot(x) - c.h[i] <= 1e-6);
    }
}

}  // namespace

TEST_CASE("objective with zero smoothing is 2I and -2 x_ref") {
    Trajectory ref({{1, 2, 3, 0.5}, {4, 5, 6, 0.25}});
    CsmConfig cfg;
    cfg.lambda_dev = 1.0;
    cfg.lambda_smooth = 0.0;
    const Objective o = build_objective(ref, cfg);
    CHECK(o.P.isApprox(2.0 * MatrixXd::Identity(8, 8)));
    CHECK(o.q.isApprox(-2.0 * flatten(ref)));
}

TEST_CASE("difference operator annihilates constants per channel") {
    const MatrixXd D = difference_operator(5, true);
    REQUIRE(D.rows() == 16);
    REQUIRE(D.cols() == 20);
    const MatrixXd DtD = D.transpose() * D;
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(20);
    CHECK((DtD * ones).cwiseAbs().maxCoeff() == 0.0);
    for (int channel = 0; channel < 4; ++channel) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(20);
        for (int i = 0; i < 5; ++i) e[i * 4 + channel] = 1.0;
        CHECK((DtD * e).cwiseAbs().maxCoeff() == 0.0);
    }
    // Position-only variant skips the v channel entirely.
    const MatrixXd D3 = difference_operator(5, false);
    CHECK(D3.rows() == 12);
    for (int i = 0; i < 5; ++i) CHECK(D3.col(i * 4 + 3).cwiseAbs().maxCoeff() == 0.0);

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<Waypoint> w(5);
    for (auto& p : w) p = {u(rng), u(rng), u(rng), 0.5 + 0.5 * u(rng)};
    CsmConfig cfg;
    const Objective o = build_objective(Trajectory(w), cfg);
    CHECK((o.P - o.P.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pure smoothing with pinned endpoints interpolates the midpoint") {
    Trajectory ref({{0, 0, 0, 0}, {0.3, 0.9, 0.1, 0.2}, {1, 1, 1, 1}});
    RobotProfile profile = unbounded_profile();
    profile.fix_start = profile.fix_goal = true;
    CsmConfig cfg;
    cfg.lambda_dev = 1e-9;
    cfg.lambda_smooth = 1.0;
    const CsmReport r = enforce(ref, Scene{}, profile, cfg);
    REQUIRE(r.status == qp::Status::Optimal);
    CHECK(r.solution[1].x == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(r.solution[1].y == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(r.solution[1].z == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(r.solution[1].v == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("constraint assembly") {
    Trajectory ref({{0, 0, 0, 1}, {1, 0, 0, 1}, {2, 0, 0, 1}});

    SUBCASE("unbounded, no objects, nothing fixed: only speed rows") {
        const Constraints c = build_constraints(ref, Scene{}, unbounded_profile());
        CHECK(c.G.rows() == 6);
        CHECK(c.A.rows() == 0);
        for (const auto& tag : c.inequality_tags) {
            CHECK((tag.kind == RowKind::SpeedMax || tag.kind == RowKind::SpeedMin));
        }
    }

    SUBCASE("cuboid bounds tightened by the safety margin") {
        RobotProfile p = unbounded_profile();
        p.workspace = CuboidWorkspace{Vec3::Zero(), Vec3::Ones()};
        p.delta = 0.05;
        const Constraints c = build_constraints(ref, Scene{}, p);
        CHECK(c.G.rows() == 3 * 6 + 3 * 2);
        for (Eigen::Index i = 0; i < 18; ++i) {
            const auto& tag = c.inequality_tags[static_cast<std::size_t>(i)];
            if (tag.kind == RowKind::WorkspaceUpper) CHECK(c.h[i] == doctest::Approx(0.95));
            if (tag.kind == RowKind::WorkspaceLower) CHECK(c.h[i] == doctest::Approx(-0.05));
            // position rows leave the speed entries untouched
            CHECK(c.G(i, static_cast<Eigen::Index>(tag.waypoint) * 4 + 3) == 0.0);
        }
    }

    SUBCASE("linearized obstacle row keeps the slack g - R^2 at the reference") {
        Trajectory single({{2, 0, 0, 0.5}, {2, 1, 0, 0.5}});
        Scene scene({sphere_like("ball", Vec3::Zero(), 1.0)});
        const Constraints c = build_constraints(single, scene, unbounded_profile());
        const Eigen::VectorXd x = flatten(single);
        Eigen::Index row = -1;
        for (Eigen::Index i = 0; i < c.G.rows(); ++i) {
            const auto& tag = c.inequality_tags[static_cast<std::size_t>(i)];
            if (tag.kind == RowKind::Obstacle && tag.waypoint == 0) row = i;
        }
        REQUIRE(row >= 0);
        // Hand oracle: g = |(2,0,0)|^2 = 4, R^2 = 1, slack = 3.
        CHECK(c.h[row] - c.G.row(row).dot(x) == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(c.G(row, 3) == 0.0);
    }

    SUBCASE("endpoint pins are four equality rows each") {
        RobotProfile p = unbounded_profile();
        p.fix_start = p.fix_goal = true;
        const Constraints c = build_constraints(ref, Scene{}, p);
        CHECK(c.A.rows() == 8);
        CHECK((c.A * flatten(ref) - c.b).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("sphere workspace produces outer and inner rows per waypoint") {
        RobotProfile p = unbounded_profile();
        p.workspace = SphereWorkspace{Vec3(0, 0, -1), 0.5, 3.0};
        const Constraints c = build_constraints(ref, Scene{}, p);
        CHECK(c.G.rows() == 3 * 2 + 3 * 2);
    }

    SUBCASE("reference at a sphere center is rejected with a direction hint") {
        Scene scene({sphere_like("ball", Vec3(1, 0, 0), 0.2)});
        try {
            build_constraints(ref, scene, unbounded_profile());
            FAIL("expected DegenerateLinearization");
        } catch (const DegenerateLinearization& e) {
            CHECK(e.waypoint() == 1);
            CHECK(e.suggested_direction() == Vec3(1, 0, 0));
        }
    }

    SUBCASE("margin that closes the cuboid is an inconsistent profile") {
        RobotProfile p = unbounded_profile();
        p.workspace = CuboidWorkspace{Vec3::Zero(), Vec3(1, 1, 0.08)};
        p.delta = 0.05;
        CHECK_THROWS_AS(build_constraints(ref, Scene{}, p), InvalidArgument);
    }
}

TEST_CASE("strictly feasible reference is returned almost unchanged") {
    Trajectory ref({{0.2, 0.2, 0.2, 0.3}, {0.4, 0.3, 0.25, 0.35}, {0.6, 0.45, 0.3, 0.3}, {0.8, 0.5, 0.3, 0.2}});
    RobotProfile p;
    p.workspace = CuboidWorkspace{Vec3::Zero(), Vec3::Ones()};
    p.v_max = 1.0;
    CsmConfig cfg;
    cfg.lambda_dev = 1.0;
    cfg.lambda_smooth = 1e-6;
    const CsmReport r = enforce(ref, Scene{}, p, cfg);
    REQUIRE(r.status == qp::Status::Optimal);
    for (std::size_t i = 0; i < ref.size(); ++i) {
        CHECK(std::abs(r.solution[i].x - ref[i].x) <= 1e-4);
        CHECK(std::abs(r.solution[i].y - ref[i].y) <= 1e-4);
        CHECK(std::abs(r.solution[i].z - ref[i].z) <= 1e-4);
        CHECK(std::abs(r.solution[i].v - ref[i].v) <= 1e-4);
    }
}

TEST_CASE("waypoint inside an obstacle is pushed onto the linearized half-space") {
    const Waypoint start{2, -1, 0, 0.5}, mid{0.5, 0, 0, 0.5}, goal{2, 1, 0, 0.5};
    Trajectory ref({start, mid, goal});
    Scene scene({sphere_like("ball", Vec3::Zero(), 1.0)});
    RobotProfile p = unbounded_profile(1.0, 0.0);
    p.fix_start = p.fix_goal = true;
    CsmConfig cfg;
    cfg.lambda_dev = 10.0;
    cfg.lambda_smooth = 1.0;
    const CsmReport r = enforce(ref, scene, p, cfg);
    REQUIRE(r.status == qp::Status::Optimal);

    // Independent oracle on the single free waypoint u = (x, y, z, v):
    // minimize ld |u - mid|^2 + ls (|u - start|^2 + |goal - u|^2), an isotropic
    // quadratic, subject to a'u >= b from linearizing |p|^2 >= 1 at mid.
    const double ld = cfg.lambda_dev, ls = cfg.lambda_smooth;
    Eigen::Vector4d m(mid.x, mid.y, mid.z, mid.v), s(start.x, start.y, start.z, start.v),
        g(goal.x, goal.y, goal.z, goal.v);
    Eigen::Vector4d u = (ld * m + ls * (s + g)) / (ld + 2.0 * ls);
    const Eigen::Vector4d a(2 * mid.x, 2 * mid.y, 2 * mid.z, 0.0);
    const double b = 1.0 - (mid.x * mid.x + mid.y * mid.y + mid.z * mid.z) + a.dot(m);
    if (a.dot(u) < b) u += (b - a.dot(u)) / a.squaredNorm() * a;
    CHECK(u[0] == doctest::Approx(1.25));

    CHECK(std::abs(r.solution[1].x - u[0]) <= 1e-6);
    CHECK(std::abs(r.solution[1].y - u[1]) <= 1e-6);
    CHECK(std::abs(r.solution[1].z - u[2]) <= 1e-6);
    CHECK(std::abs(r.solution[1].v - u[3]) <= 1e-6);
    // |(1.25,0,0)|^2 = 1.5625 > 1: linearization is conservative here.
    CHECK(r.true_violation_max == 0.0);
}

TEST_CASE("overspeed waypoint is capped at v_max") {
    Trajectory ref({{0, 0, 0, 0.5}, {0.1, 0, 0, 2.0}, {0.2, 0, 0, 0.5}});
    RobotProfile p = unbounded_profile(1.0);
    const CsmReport r = enforce(ref, Scene{}, p);
    REQUIRE(r.status == qp::Status::Optimal);
    for (const auto& w : r.solution) CHECK(w.v <= 1.0 + 1e-6);
    CHECK(r.linear_violation_max <= 1e-6);
}

TEST_CASE("random obstacle scenes: rows feasible, endpoints pinned, report exposes true violation") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 8; ++trial) {
        const int N = 12;
        std::vector<Waypoint> w;
        for (int i = 0; i < N; ++i) {
            const double s = static_cast<double>(i) / (N - 1);
            w.push_back({0.1 + 0.8 * s, 0.5 + 0.2 * (u(rng) - 0.5), 0.5, 0.1 + 0.35 * u(rng)});
        }
        Trajectory ref(w);
        std::vector<SceneObject> objs{sphere_like("o", Vec3(0.5, 0.45 + 0.1 * u(rng), 0.5 + 0.01), 0.12)};
        Scene scene(objs);
        RobotProfile p;
        p.workspace = CuboidWorkspace{Vec3::Zero(), Vec3::Ones()};
        p.v_max = 0.5;
        p.fix_start = p.fix_goal = true;
        const CsmReport r = enforce(ref, scene, p);
        REQUIRE(r.status == qp::Status::Optimal);
        check_rows_feasible(ref, scene, p, r);
        CHECK(r.kkt.primal <= 1e-6);
        CHECK(r.kkt.dual <= 1e-6);
        CHECK(r.kkt.comp <= 1e-6);
        for (int c = 0; c < 4; ++c) {
            CHECK(std::abs(flatten(r.solution)[c] - flatten(ref)[c]) <= 1e-8);
            CHECK(std::abs(flatten(r.solution)[4 * (N - 1) + c] - flatten(ref)[4 * (N - 1) + c]) <= 1e-8);
        }
        CHECK(r.true_violation_max == doctest::Approx(true_violation(r.solution, scene, p)));
    }
}

TEST_CASE("heavier smoothing never increases the roughness of the solution") {
    std::vector<Waypoint> w;
    for (int i = 0; i < 15; ++i) w.push_back({i * 0.05, 0.3 * std::sin(i * 0.9), 0.2, 0.2 + 0.1 * (i % 3)});
    Trajectory ref(w);
    Scene scene({sphere_like("box", Vec3(0.35, 0.0, 0.2), 0.1)});
    RobotProfile p = unbounded_profile(0.5, 0.05);
    p.fix_start = p.fix_goal = true;
    double previous = std::numeric_limits<double>::infinity();
    for (double ls : {0.01, 0.1, 1.0, 10.0}) {
        CsmConfig cfg;
        cfg.lambda_smooth = ls;
        const CsmReport r = enforce(ref, scene, p, cfg);
        REQUIRE(r.status == qp::Status::Optimal);
        CHECK(r.smoothness_cost <= previous + 1e-6);
        previous = r.smoothness_cost;
    }
}

TEST_CASE("position-only smoothing leaves speed deviations unpenalized by D1") {
    Trajectory ref({{0, 0, 0, 0.1}, {0.1, 0, 0, 0.9}, {0.2, 0, 0, 0.1}});
    CsmConfig cfg;
    cfg.smooth_speed_channel = false;
    cfg.lambda_smooth = 5.0;
    const CsmReport r = enforce(ref, Scene{}, unbounded_profile(), cfg);
    REQUIRE(r.status == qp::Status::Optimal);
    CHECK(r.solution[1].v == doctest::Approx(0.9).epsilon(1e-6));
}

TEST_CASE("config validation and json") {
    CsmConfig bad;
    bad.lambda_dev = 0.0;
    CHECK_THROWS_AS(enforce(Trajectory({{0, 0, 0, 0}, {1, 0, 0, 0}}), Scene{}, unbounded_profile(), bad),
                    InvalidArgument);
    const CsmConfig c = config_from_json(to_json(CsmConfig{2.0, 0.5, false, {}}));
    CHECK(c.lambda_dev == 2.0);
    CHECK(c.lambda_smooth == 0.5);
    CHECK_FALSE(c.smooth_speed_channel);
    CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"lambda_smooth": 0})")), SchemaViolation);
}
