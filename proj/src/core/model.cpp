#include "ovita/core/model.hpp"

#include "ovita/core/error.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace ovita {

void validate(const Waypoint& w) {
    if (!std::isfinite(w.x) || !std::isfinite(w.y) || !std::isfinite(w.z) || !std::isfinite(w.v)) {
        throw InvalidArgument("waypoint components must be finite");
    }
    if (w.v < 0.0) {
        throw InvalidArgument("waypoint speed must be non-negative");
    }
}

Trajectory::Trajectory(std::vector<Waypoint> waypoints, std::string frame)
    : waypoints_(std::move(waypoints)), frame_(std::move(frame)) {
    if (waypoints_.size() < 2) {
        throw InvalidArgument("trajectory needs at least 2 waypoints, got " +
                              std::to_string(waypoints_.size()));
    }
    for (const auto& w : waypoints_) validate(w);
}

Eigen::VectorXd flatten(const Trajectory& t) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(t.size() * Trajectory::kStride));
    Eigen::Index k = 0;
    for (const auto& w : t) {
        x[k++] = w.x;
        x[k++] = w.y;
        x[k++] = w.z;
        x[k++] = w.v;
    }
    return x;
}

Trajectory unflatten(std::span<const double> stacked, std::string frame) {
    if (stacked.size() % Trajectory::kStride != 0) {
        throw InvalidArgument("stacked vector length must be a multiple of 4");
    }
    std::vector<Waypoint> w;
    w.reserve(stacked.size() / Trajectory::kStride);
    for (std::size_t i = 0; i < stacked.size(); i += Trajectory::kStride) {
        w.push_back({stacked[i], stacked[i + 1], stacked[i + 2], stacked[i + 3]});
    }
    return Trajectory(std::move(w), std::move(frame));
}

Trajectory unflatten(const Eigen::VectorXd& stacked, std::string frame) {
    return unflatten(std::span<const double>(stacked.data(), static_cast<std::size_t>(stacked.size())),
                     std::move(frame));
}

void validate(const SceneObject& o) {
    if (!o.center.allFinite() || !o.dimensions.allFinite()) {
        throw InvalidArgument("object '" + o.label + "' has non-finite geometry");
    }
    if ((o.dimensions.array() <= 0.0).any()) {
        throw InvalidArgument("object '" + o.label + "' dimensions must be strictly positive");
    }
}

BoundingSphere bounding_sphere(const SceneObject& o) {
    validate(o);
    return {o.center, o.dimensions.norm() / 2.0};
}

Scene::Scene(std::vector<SceneObject> objects, std::optional<std::string> description)
    : objects_(std::move(objects)), description_(std::move(description)) {
    std::set<std::string> seen;
    for (const auto& o : objects_) {
        validate(o);
        if (!seen.insert(o.label).second) {
            throw InvalidArgument("duplicate object label '" + o.label + "'");
        }
    }
}

const SceneObject* Scene::find(const std::string& label) const {
    for (const auto& o : objects_) {
        if (o.label == label) return &o;
    }
    return nullptr;
}

void validate(const WorkspaceSpec& w) {
    if (const auto* c = std::get_if<CuboidWorkspace>(&w)) {
        if (!c->min.allFinite() || !c->max.allFinite() || !(c->min.array() < c->max.array()).all()) {
            throw InvalidArgument("cuboid workspace requires min < max component-wise");
        }
    } else if (const auto* s = std::get_if<SphereWorkspace>(&w)) {
        if (!s->center.allFinite() || !(s->r_min >= 0.0) || !(s->r_max > s->r_min) ||
            !std::isfinite(s->r_max)) {
            throw InvalidArgument("sphere workspace requires 0 <= r_min < r_max");
        }
    }
}

void validate(const RobotProfile& p) {
    validate(p.workspace);
    if (!(p.v_max > 0.0) || !std::isfinite(p.v_max)) throw InvalidArgument("v_max must be > 0");
    if (!(p.delta >= 0.0) || !std::isfinite(p.delta)) throw InvalidArgument("delta must be >= 0");
}

}  // namespace ovita
