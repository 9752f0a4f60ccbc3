#pragma once

// Constraint satisfaction: project a (policy-modified) reference trajectory
// onto the robot's safe set by solving
//
//   min  lambda_dev |x - x_ref|^2 + lambda_smooth |D1 x|^2
//   s.t. workspace, obstacle, and speed rows (G x <= h), optional endpoint pins (A x = b)
//
// Spherical workspace and obstacle constraints are linearized once around the
// reference. The report always carries the violation of the original
// nonlinear sphere constraints so linearization error stays visible.

#include "ovita/core/error.hpp"
#include "ovita/core/model.hpp"
#include "ovita/qp/solver.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <string>
#include <vector>

namespace ovita::csm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct CsmConfig {
    double lambda_dev = 1.0;
    double lambda_smooth = 0.1;
    bool smooth_speed_channel = true;  // whether D1 also differences the v entries
    qp::SolverConfig solver;
};

void validate(const CsmConfig& cfg);

/// A sphere row would be linearized at the sphere center, where the gradient vanishes.
class DegenerateLinearization : public Error {
public:
    DegenerateLinearization(std::size_t waypoint, std::string what)
        : Error("degenerate_linearization",
                "waypoint " + std::to_string(waypoint) + " coincides with the center of " + what +
                    "; perturb it (e.g. +x by 1e-6) before enforcing"),
          waypoint_(waypoint),
          suggested_direction_(1.0, 0.0, 0.0) {}

    std::size_t waypoint() const noexcept { return waypoint_; }
    const Vec3& suggested_direction() const noexcept { return suggested_direction_; }

private:
    std::size_t waypoint_;
    Vec3 suggested_direction_;
};

enum class RowKind {
    WorkspaceUpper,
    WorkspaceLower,
    SphereOuter,
    SphereInner,
    Obstacle,
    SpeedMax,
    SpeedMin,
    FixStart,
    FixGoal,
};

std::string to_string(RowKind k);

/// Which constraint a row of G (or A) encodes; `object` is set for obstacle rows.
struct RowTag {
    RowKind kind;
    std::size_t waypoint;
    int channel = -1;  // 0..3 for per-channel rows, -1 otherwise
    std::string object;
};

struct Objective {
    MatrixXd P;
    VectorXd q;
};

struct Constraints {
    MatrixXd G;
    VectorXd h;
    std::vector<RowTag> inequality_tags;
    MatrixXd A;
    VectorXd b;
    std::vector<RowTag> equality_tags;
};

/// Block first-order difference operator: row block i holds x_{i+1} - x_i.
/// With include_speed = false the v channel is left out (3 rows per block).
MatrixXd difference_operator(std::size_t num_waypoints, bool include_speed);

/// P = 2 (lambda_dev I + lambda_smooth D1'D1), q = -2 lambda_dev flatten(ref).
Objective build_objective(const Trajectory& ref, const CsmConfig& cfg);

Constraints build_constraints(const Trajectory& ref, const Scene& scene, const RobotProfile& profile);

struct CsmReport {
    Trajectory solution;
    qp::Status status = qp::Status::MaxIterations;
    double linear_violation_max = 0.0;
    double true_violation_max = 0.0;  // squared-distance units of the sphere constraints
    double deviation_cost = 0.0;      // |x* - x_ref|^2
    double smoothness_cost = 0.0;     // |D1 x*|^2
    qp::KktResiduals kkt;
    int iterations = 0;
    std::size_t speeds_snapped = 0;  // negative solver speeds written back as 0
};

CsmReport enforce(const Trajectory& ref, const Scene& scene, const RobotProfile& profile,
                  const CsmConfig& cfg = {});

/// Max violation of the nonlinear sphere constraints at `t` (0 when none apply).
double true_violation(const Trajectory& t, const Scene& scene, const RobotProfile& profile);

nlohmann::json to_json(const CsmReport& r);
nlohmann::json to_json(const CsmConfig& c);
CsmConfig config_from_json(const nlohmann::json& j, const std::string& path = "");

}  // namespace ovita::csm
