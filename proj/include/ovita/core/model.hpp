#pragma once

// Domain value types shared by every stage of the adaptation pipeline.

#include <Eigen/Core>

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace ovita {

using Vec3 = Eigen::Vector3d;

/// One trajectory sample: position in meters plus scalar speed in m/s.
struct Waypoint {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double v = 0.0;

    Vec3 position() const { return {x, y, z}; }

    bool operator==(const Waypoint&) const = default;
};

/// Throws InvalidArgument unless all components are finite and v >= 0.
void validate(const Waypoint& w);

/// Ordered sequence of at least two waypoints in a named frame.
class Trajectory {
public:
    static constexpr std::size_t kStride = 4;

    Trajectory(std::vector<Waypoint> waypoints, std::string frame = "world");

    std::size_t size() const noexcept { return waypoints_.size(); }
    const Waypoint& operator[](std::size_t i) const { return waypoints_[i]; }
    const std::vector<Waypoint>& waypoints() const noexcept { return waypoints_; }
    const std::string& frame() const noexcept { return frame_; }

    auto begin() const noexcept { return waypoints_.begin(); }
    auto end() const noexcept { return waypoints_.end(); }

    bool operator==(const Trajectory&) const = default;

private:
    std::vector<Waypoint> waypoints_;
    std::string frame_;
};

/// Stacks waypoints as [x0 y0 z0 v0 x1 y1 z1 v1 ...].
Eigen::VectorXd flatten(const Trajectory& t);

/// Inverse of flatten. The length must be a multiple of 4 covering N >= 2 waypoints.
Trajectory unflatten(std::span<const double> stacked, std::string frame = "world");
Trajectory unflatten(const Eigen::VectorXd& stacked, std::string frame = "world");

/// Labeled axis-aligned cuboid.
struct SceneObject {
    std::string label;
    Vec3 center = Vec3::Zero();
    Vec3 dimensions = Vec3::Ones();
    std::map<std::string, std::string> properties;

    bool operator==(const SceneObject&) const = default;
};

void validate(const SceneObject& o);

struct BoundingSphere {
    Vec3 center;
    double radius;
};

/// Circumscribing sphere: radius is half the cuboid diagonal.
BoundingSphere bounding_sphere(const SceneObject& o);

class Scene {
public:
    Scene() = default;
    explicit Scene(std::vector<SceneObject> objects, std::optional<std::string> description = {});

    const std::vector<SceneObject>& objects() const noexcept { return objects_; }
    const std::optional<std::string>& description() const noexcept { return description_; }

    /// nullptr when the label is unknown. Labels are case-sensitive.
    const SceneObject* find(const std::string& label) const;

    bool operator==(const Scene&) const = default;

private:
    std::vector<SceneObject> objects_;
    std::optional<std::string> description_;
};

struct CuboidWorkspace {
    Vec3 min;
    Vec3 max;
    bool operator==(const CuboidWorkspace&) const = default;
};

struct SphereWorkspace {
    Vec3 center;
    double r_min = 0.0;
    double r_max = 1.0;
    bool operator==(const SphereWorkspace&) const = default;
};

struct UnboundedWorkspace {
    bool operator==(const UnboundedWorkspace&) const = default;
};

using WorkspaceSpec = std::variant<CuboidWorkspace, SphereWorkspace, UnboundedWorkspace>;

void validate(const WorkspaceSpec& w);

struct RobotProfile {
    WorkspaceSpec workspace = UnboundedWorkspace{};
    double v_max = 1.0;
    double delta = 0.05;  // safety margin, meters
    bool fix_start = false;
    bool fix_goal = false;
    bool enforce_constraints = true;  // run the QP stage after policy execution

    bool operator==(const RobotProfile&) const = default;
};

void validate(const RobotProfile& p);

}  // namespace ovita
