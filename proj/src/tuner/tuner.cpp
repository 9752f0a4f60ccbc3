#include "ovita/tuner/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>

namespace ovita::tuner {

namespace {

constexpr double kInfeasiblePenalty = 1e6;
constexpr int kMaxRejections = 64;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Portable stream: std::mt19937_64 is fully specified, the std distributions are not.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }

    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

private:
    std::uint64_t next() {
        state_ = splitmix64(state_);
        return state_;
    }
    std::uint64_t state_;
};

std::uint64_t stream_seed(std::uint64_t seed, std::size_t trial, std::uint64_t salt) {
    return splitmix64(splitmix64(seed ^ salt) + static_cast<std::uint64_t>(trial));
}

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Univariate Gaussian mixture over log10 values, each component truncated to
// [lo, hi]. Observations share a Scott-rule bandwidth; the optional last component is
// the prior, centered on the range with the range as its width.
struct Kde {
    std::vector<double> mu;
    std::vector<double> sigma;
    std::vector<double> mass;  // per-component probability inside [lo, hi]
    double lo = 0.0, hi = 1.0;

    Kde(std::vector<double> points, double lo_, double hi_, double floor, bool prior)
        : mu(std::move(points)), lo(lo_), hi(hi_) {
        const double n = static_cast<double>(mu.size());
        double sd = 0.0;
        if (mu.size() > 1) {
            const double mean = std::accumulate(mu.begin(), mu.end(), 0.0) / n;
            double ss = 0.0;
            for (double m : mu) ss += (m - mean) * (m - mean);
            sd = std::sqrt(ss / (n - 1.0));
        }
        // Besides the fixed floor, the width never drops below range / min(100, 1 + n),
        // so a handful of clustered points cannot freeze the search.
        const double clip = (hi - lo) / std::min(100.0, 1.0 + n);
        sigma.assign(mu.size(), std::max({sd * std::pow(n, -0.2), floor, clip}));
        if (prior) {
            mu.push_back(0.5 * (lo + hi));
            sigma.push_back(hi - lo);
        }
        for (std::size_t i = 0; i < mu.size(); ++i) {
            mass.push_back(
                std::max(norm_cdf((hi - mu[i]) / sigma[i]) - norm_cdf((lo - mu[i]) / sigma[i]), 1e-300));
        }
    }

    double log_pdf(double x) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i) {
            const double z = (x - mu[i]) / sigma[i];
            acc += std::exp(-0.5 * z * z) / (mass[i] * sigma[i]);
        }
        acc /= static_cast<double>(mu.size()) * std::sqrt(2.0 * M_PI);
        return std::log(std::max(acc, 1e-300));
    }

    double sample(Rng& rng) const {
        const std::size_t k = rng.index(mu.size());
        for (int t = 0; t < kMaxRejections; ++t) {
            const double x = mu[k] + sigma[k] * rng.normal();
            if (x >= lo && x <= hi) return x;
        }
        return std::clamp(mu[k], lo, hi);
    }
};

double log10_of(const TrialRecord& t, const ParamBounds& b) {
    const auto it = t.params.find(b.name);
    if (it == t.params.end() || !(it->second > 0.0)) {
        throw InvalidArgument("trial history lacks a positive value for " + b.name);
    }
    return std::clamp(std::log10(it->second), b.log10_lower, b.log10_upper);
}

}  // namespace

SearchSpace default_space() { return {{{"lambda_dev", -3.0, 1.0}, {"lambda_smooth", -3.0, 1.0}}}; }

void validate(const SearchSpace& space) {
    if (space.params.empty()) throw EmptySpace();
    for (const auto& p : space.params) {
        if (!std::isfinite(p.log10_lower) || !std::isfinite(p.log10_upper) || !(p.log10_lower < p.log10_upper)) {
            throw InvalidArgument("search bounds for " + p.name + " need finite lower < upper");
        }
    }
}

std::string to_string(TrialStatus s) { return s == TrialStatus::Optimal ? "Optimal" : "Infeasible"; }

Params random_suggest(const SearchSpace& space, std::uint64_t seed, std::size_t trial) {
    validate(space);
    Rng rng(stream_seed(seed, trial, 0x52414E44ULL));
    Params out;
    for (const auto& b : space.params) out[b.name] = std::pow(10.0, rng.uniform(b.log10_lower, b.log10_upper));
    return out;
}

Params tpe_suggest(const std::vector<TrialRecord>& history, const SearchSpace& space, std::uint64_t seed,
                   const TpeConfig& cfg) {
    validate(space);
    if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0) || cfg.n_candidates < 1 || !(cfg.bandwidth_floor > 0.0)) {
        throw InvalidArgument("TPE needs 0 < gamma < 1, n_candidates >= 1, bandwidth_floor > 0");
    }
    const std::size_t n = history.size();
    if (n < static_cast<std::size_t>(std::max(cfg.n_startup, 2))) return random_suggest(space, seed, n);

    // Stable ordering: equal costs keep the older trial on the good side.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return history[a].cost < history[b].cost; });
    const std::size_t n_good =
        std::min(n - 1, std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.gamma * static_cast<double>(n)))));

    Rng rng(stream_seed(seed, n, 0x54504531ULL));
    std::vector<Kde> good, bad;
    for (const auto& b : space.params) {
        std::vector<double> l, g;
        for (std::size_t r = 0; r < n; ++r) (r < n_good ? l : g).push_back(log10_of(history[order[r]], b));
        good.emplace_back(std::move(l), b.log10_lower, b.log10_upper, cfg.bandwidth_floor, cfg.prior);
        bad.emplace_back(std::move(g), b.log10_lower, b.log10_upper, cfg.bandwidth_floor, cfg.prior);
    }

    std::vector<double> best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < cfg.n_candidates; ++c) {
        std::vector<double> x(space.params.size());
        double score = 0.0;
        for (std::size_t d = 0; d < x.size(); ++d) {
            x[d] = good[d].sample(rng);
            score += good[d].log_pdf(x[d]) - bad[d].log_pdf(x[d]);
        }
        if (score > best_score) {
            best_score = score;
            best = x;
        }
    }
    Params out;
    for (std::size_t d = 0; d < best.size(); ++d) {
        const auto& b = space.params[d];
        out[b.name] = std::clamp(std::pow(10.0, best[d]), std::pow(10.0, b.log10_lower), std::pow(10.0, b.log10_upper));
    }
    return out;
}

SearchResult minimize(const Objective& objective, const SearchSpace& space, const SearchConfig& cfg) {
    validate(space);
    if (cfg.trials < 1) throw InvalidArgument("trials must be at least 1");
    SearchResult r;
    auto record = [&r](Params p, Evaluation e) {
        if (!std::isfinite(e.cost)) throw InvalidArgument("objective returned a non-finite cost");
        r.history.push_back({std::move(p), e.cost, e.status});
        const double prev = r.best_so_far.empty() ? std::numeric_limits<double>::infinity() : r.best_so_far.back();
        if (e.cost < prev) r.best_index = r.history.size() - 1;
        r.best_so_far.push_back(std::min(prev, e.cost));
    };
    auto suggest = [&](std::size_t trial) {
        return cfg.sampler == Sampler::Random ? random_suggest(space, cfg.seed, trial)
                                              : tpe_suggest(r.history, space, cfg.seed, cfg.tpe);
    };

    std::size_t start = 0;
    if (cfg.parallel_startup) {
        // Startup suggestions depend only on (seed, trial), so evaluation order cannot change them.
        const std::size_t warm = cfg.sampler == Sampler::Random
                                     ? static_cast<std::size_t>(cfg.trials)
                                     : std::min<std::size_t>(std::max(cfg.tpe.n_startup, 2), cfg.trials);
        std::vector<Params> points;
        std::vector<std::future<Evaluation>> jobs;
        for (std::size_t t = 0; t < warm; ++t) {
            points.push_back(random_suggest(space, cfg.seed, t));
            jobs.push_back(std::async(std::launch::async, objective, points.back()));
        }
        for (std::size_t t = 0; t < warm; ++t) record(points[t], jobs[t].get());
        start = warm;
    }
    for (std::size_t t = start; t < static_cast<std::size_t>(cfg.trials); ++t) {
        Params p = suggest(t);
        const Evaluation e = objective(p);
        record(std::move(p), e);
    }
    return r;
}

double infeasible_cost(const Trajectory& ref) { return flatten(ref).squaredNorm() + kInfeasiblePenalty; }

TuneResult tune(const Trajectory& ref, const Scene& scene, const RobotProfile& profile, const SearchConfig& cfg,
                const csm::CsmConfig& base, const SearchSpace& space) {
    const double penalty = infeasible_cost(ref);
    auto with = [&base](const Params& p) {
        csm::CsmConfig c = base;
        if (const auto it = p.find("lambda_dev"); it != p.end()) c.lambda_dev = it->second;
        if (const auto it = p.find("lambda_smooth"); it != p.end()) c.lambda_smooth = it->second;
        return c;
    };
    const Objective objective = [&](const Params& p) {
        const csm::CsmReport rep = csm::enforce(ref, scene, profile, with(p));
        if (rep.status == qp::Status::Optimal) return Evaluation{rep.deviation_cost, TrialStatus::Optimal};
        return Evaluation{penalty, TrialStatus::Infeasible};
    };
    TuneResult out;
    out.search = minimize(objective, space, cfg);
    out.best = with(out.search.history[out.search.best_index].params);
    return out;
}

nlohmann::json to_json(const TrialRecord& t) {
    return {{"params", t.params}, {"cost", t.cost}, {"status", to_string(t.status)}};
}

nlohmann::json to_json(const TuneResult& r) {
    nlohmann::json history = nlohmann::json::array();
    for (const auto& t : r.search.history) history.push_back(to_json(t));
    return {{"best", {{"lambda_dev", r.best.lambda_dev}, {"lambda_smooth", r.best.lambda_smooth}}},
            {"best_cost", r.search.history[r.search.best_index].cost},
            {"best_trial", r.search.best_index},
            {"best_so_far", r.search.best_so_far},
            {"history", history}};
}

}  // namespace ovita::tuner
