#pragma once

// Weight search for the constraint satisfaction objective with a
// Tree-structured Parzen Estimator over a log-uniform space.

#include "ovita/core/error.hpp"
#include "ovita/core/model.hpp"
#include "ovita/csm/csm.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace ovita::tuner {

class EmptySpace : public Error {
public:
    EmptySpace() : Error("empty_space", "search space has no parameters") {}
};

/// Bounds in log10 units: the parameter ranges over [10^log10_lower, 10^log10_upper].
struct ParamBounds {
    std::string name;
    double log10_lower = -3.0;
    double log10_upper = 1.0;
};

struct SearchSpace {
    std::vector<ParamBounds> params;
};

/// lambda_dev and lambda_smooth, both in [1e-3, 1e1].
SearchSpace default_space();
void validate(const SearchSpace& space);

using Params = std::map<std::string, double>;

enum class TrialStatus { Optimal, Infeasible };
std::string to_string(TrialStatus s);

struct TrialRecord {
    Params params;
    double cost = 0.0;
    TrialStatus status = TrialStatus::Optimal;
};

struct TpeConfig {
    int n_startup = 10;
    double gamma = 0.25;
    int n_candidates = 24;
    double bandwidth_floor = 1e-3;  // log10 units
    bool prior = true;              // add a range-wide component to both densities
};

enum class Sampler { Tpe, Random };

/// Next point to evaluate. Pure: the result depends only on the arguments.
Params tpe_suggest(const std::vector<TrialRecord>& history, const SearchSpace& space, std::uint64_t seed,
                   const TpeConfig& cfg = {});

/// Log-uniform sample, independent of any history.
Params random_suggest(const SearchSpace& space, std::uint64_t seed, std::size_t trial);

struct Evaluation {
    double cost = 0.0;
    TrialStatus status = TrialStatus::Optimal;
};

using Objective = std::function<Evaluation(const Params&)>;

struct SearchConfig {
    int trials = 50;
    std::uint64_t seed = 0;
    Sampler sampler = Sampler::Tpe;
    TpeConfig tpe;
    bool parallel_startup = false;  // evaluate startup trials concurrently; objective must be thread-safe
};

struct SearchResult {
    std::vector<TrialRecord> history;
    std::vector<double> best_so_far;
    std::size_t best_index = 0;
};

/// Sequential minimization. trials must be >= 1; costs must be finite.
SearchResult minimize(const Objective& objective, const SearchSpace& space, const SearchConfig& cfg);

struct TuneResult {
    csm::CsmConfig best;
    SearchResult search;
};

/// |flatten(ref)|^2 + 1e6: the cost recorded for a trial that is not Optimal.
double infeasible_cost(const Trajectory& ref);

/// Searches lambda_dev and lambda_smooth (the other fields of `base` are kept)
/// minimizing the deviation cost of csm::enforce. DegenerateLinearization propagates.
TuneResult tune(const Trajectory& ref, const Scene& scene, const RobotProfile& profile, const SearchConfig& cfg = {},
                const csm::CsmConfig& base = {}, const SearchSpace& space = default_space());

nlohmann::json to_json(const TrialRecord& t);
nlohmann::json to_json(const TuneResult& r);

}  // namespace ovita::tuner
