#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ovita::policy {

enum class BuiltinKind {
    Transform,  // rewrites the working trajectory
    Query,      // reads the working trajectory or the scene
    Math,       // pure function of its arguments
};

struct BuiltinParam {
    std::string name;
    bool required = true;
    std::string default_value;  // TrajScript literal text, empty when required
};

struct BuiltinInfo {
    std::string name;
    BuiltinKind kind;
    std::vector<BuiltinParam> params;
    std::string math;  // exact definition of the effect
};

/// Every callable available to TrajScript programs, in catalog order.
const std::vector<BuiltinInfo>& builtin_transforms();

/// nullptr when `name` is not a builtin.
const BuiltinInfo* find_builtin(std::string_view name);

std::string to_string(BuiltinKind k);

}  // namespace ovita::policy
