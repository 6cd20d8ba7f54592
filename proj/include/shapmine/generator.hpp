#pragma once

#include "shapmine/csv.hpp"
#include "shapmine/error.hpp"
#include "shapmine/eventlog.hpp"
#include "shapmine/features.hpp"
#include "shapmine/process_tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace shapmine {

// ---------------------------------------------------------------------------
// Parameters and targets
// ---------------------------------------------------------------------------

struct GeneratorParams {
    int activity_count = 5;
    int max_depth = 4;
    double weight_seq = 1.0;
    double weight_xor = 1.0;
    double weight_and = 0.3;
    double weight_loop = 0.3;
    double leaf_probability = 0.3;
    double loop_repeat_probability = 0.3;
    int trace_count = 100;
    double noise_probability = 0.0; // per-trace chance of one deletion/insertion/swap
    std::uint64_t seed = 0;
};

inline void validate(const GeneratorParams& p) {
    if (p.activity_count < 1) throw DomainError("generator: activity_count < 1");
    if (p.max_depth < 1) throw DomainError("generator: max_depth < 1");
    if (p.weight_seq < 0 || p.weight_xor < 0 || p.weight_and < 0 || p.weight_loop < 0)
        throw DomainError("generator: negative operator weight");
    if (p.weight_seq + p.weight_xor + p.weight_and + p.weight_loop <= 0)
        throw DomainError("generator: all operator weights zero");
    if (p.leaf_probability <= 0 || p.leaf_probability > 1)
        throw DomainError("generator: leaf_probability outside (0,1]");
    if (p.loop_repeat_probability < 0 || p.loop_repeat_probability >= 1)
        throw DomainError("generator: loop_repeat_probability outside [0,1)");
    if (p.trace_count < 1) throw DomainError("generator: trace_count < 1");
    if (p.noise_probability < 0 || p.noise_probability >= 1)
        throw DomainError("generator: noise_probability outside [0,1)");
}

/// A coalition with pinned values: the partial feature vector a log should
/// realize.
struct TargetConfiguration {
    std::string id;
    std::map<FeatureId, double> targets;
};

inline void validate(const TargetConfiguration& t) {
    if (t.targets.empty()) throw DomainError("target configuration '" + t.id + "' is empty");
    for (const auto& [id, v] : t.targets) {
        const auto& info = feature_info(id);
        if (v < info.lo || v > info.hi)
            throw DomainError("target " + std::string(info.name) + "=" + csv::format_double(v) +
                              " outside catalog range");
    }
}

enum class GenStatus { Ok, BudgetExhausted, Infeasible };

inline const char* gen_status_name(GenStatus s) {
    switch (s) {
        case GenStatus::Ok: return "ok";
        case GenStatus::BudgetExhausted: return "budget_exhausted";
        case GenStatus::Infeasible: return "infeasible";
    }
    return "?";
}

struct GenerationOutcome {
    TargetConfiguration target;
    std::optional<EventLog> log; // best-effort log also on failure
    FeatureVector achieved;
    double distance = std::numeric_limits<double>::infinity();
    GenStatus status = GenStatus::BudgetExhausted;
    long iterations_used = 0;
    std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Stochastic process-tree sampling and playout
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::string activity_label(int i) { return "a" + std::to_string(i); }

inline ProcessTree sample_node(std::mt19937_64& rng, const GeneratorParams& p, int depth) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> label_dist(0, p.activity_count - 1);
    if (depth >= p.max_depth || unit(rng) < p.leaf_probability)
        return ProcessTree::leaf(activity_label(label_dist(rng)));

    double total = p.weight_seq + p.weight_xor + p.weight_and + p.weight_loop;
    double pick = unit(rng) * total;
    TreeOp op;
    if ((pick -= p.weight_seq) < 0) op = TreeOp::SEQ;
    else if ((pick -= p.weight_xor) < 0) op = TreeOp::XOR;
    else if ((pick -= p.weight_and) < 0) op = TreeOp::AND;
    else op = TreeOp::LOOP;

    std::uniform_int_distribution<int> width(2, 4);
    int child_count = (op == TreeOp::LOOP) ? 2 : width(rng);
    std::vector<ProcessTree> children;
    children.reserve(child_count);
    for (int i = 0; i < child_count; ++i) children.push_back(sample_node(rng, p, depth + 1));
    return ProcessTree::node(op, std::move(children));
}

// Loop repeats stop once a trace has consumed its event budget; exiting a
// loop is always legal, so capped traces stay inside the tree's language.
constexpr long kPlayEventBudget = 512;

inline void play(const ProcessTree& t, std::mt19937_64& rng, double loop_repeat,
                 std::vector<std::string>& out, long& budget) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    switch (t.kind) {
        case ProcessTree::Kind::Leaf:
            out.push_back(t.label);
            --budget;
            return;
        case ProcessTree::Kind::Silent:
            return;
        case ProcessTree::Kind::Operator:
            break;
    }
    switch (t.op) {
        case TreeOp::SEQ:
            for (const auto& c : t.children) play(c, rng, loop_repeat, out, budget);
            return;
        case TreeOp::XOR: {
            std::uniform_int_distribution<std::size_t> pick(0, t.children.size() - 1);
            play(t.children[pick(rng)], rng, loop_repeat, out, budget);
            return;
        }
        case TreeOp::AND: {
            std::vector<std::vector<std::string>> plays(t.children.size());
            std::size_t total = 0;
            for (std::size_t i = 0; i < t.children.size(); ++i) {
                play(t.children[i], rng, loop_repeat, plays[i], budget);
                total += plays[i].size();
            }
            // uniformly random interleaving: next element from child i with
            // probability remaining_i / total_remaining
            std::vector<std::size_t> cursor(plays.size(), 0);
            while (total > 0) {
                std::uniform_int_distribution<std::size_t> pick(0, total - 1);
                std::size_t k = pick(rng);
                for (std::size_t i = 0; i < plays.size(); ++i) {
                    std::size_t rem = plays[i].size() - cursor[i];
                    if (k < rem) {
                        out.push_back(plays[i][cursor[i]++]);
                        break;
                    }
                    k -= rem;
                }
                --total;
            }
            return;
        }
        case TreeOp::LOOP: {
            play(t.children[0], rng, loop_repeat, out, budget);
            while (budget > 0 && unit(rng) < loop_repeat) {
                play(t.children[1], rng, loop_repeat, out, budget);
                play(t.children[0], rng, loop_repeat, out, budget);
            }
            return;
        }
    }
}

} // namespace detail

/// Samples a stochastic process tree; deterministic for fixed (params, seed).
inline ProcessTree sample_tree(const GeneratorParams& params, std::uint64_t seed) {
    validate(params);
    std::mt19937_64 rng(detail::splitmix64(seed));
    return detail::sample_node(rng, params, 1);
}

/// Plays the tree semantics trace_count times; noise applies at most one
/// random deletion/insertion/swap per trace. Deterministic for fixed inputs.
inline EventLog simulate(const ProcessTree& tree, int trace_count, double noise_probability,
                         std::uint64_t seed, double loop_repeat_probability = 0.3) {
    if (trace_count < 1) throw DomainError("simulate: trace_count < 1");
    validate(tree);
    std::mt19937_64 rng(detail::splitmix64(seed ^ 0x5eedf00dull));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto label_set = tree_labels(tree);
    std::vector<std::string> alphabet(label_set.begin(), label_set.end());

    EventLog log;
    log.traces.reserve(trace_count);
    for (int i = 0; i < trace_count; ++i) {
        std::vector<std::string> acts;
        // silent-only trees would yield empty traces; retry bounded, then
        // fall back to a single labeled event if the tree has any label
        for (int attempt = 0; attempt < 16 && acts.empty(); ++attempt) {
            long budget = detail::kPlayEventBudget;
            detail::play(tree, rng, loop_repeat_probability, acts, budget);
        }
        if (acts.empty()) {
            if (alphabet.empty()) throw DomainError("simulate: tree produces only empty traces");
            acts.push_back(alphabet.front());
        }
        if (!alphabet.empty() && unit(rng) < noise_probability) {
            std::uniform_int_distribution<int> op_dist(0, 2);
            int op = op_dist(rng);
            if (acts.size() < 2 && op != 1) op = 1; // only insertion keeps the trace valid
            if (op == 0) { // delete
                std::uniform_int_distribution<std::size_t> pos(0, acts.size() - 1);
                acts.erase(acts.begin() + static_cast<std::ptrdiff_t>(pos(rng)));
            } else if (op == 1) { // insert
                std::uniform_int_distribution<std::size_t> pos(0, acts.size());
                std::uniform_int_distribution<std::size_t> which(0, alphabet.size() - 1);
                acts.insert(acts.begin() + static_cast<std::ptrdiff_t>(pos(rng)), alphabet[which(rng)]);
            } else { // swap adjacent
                std::uniform_int_distribution<std::size_t> pos(0, acts.size() - 2);
                std::size_t k = pos(rng);
                std::swap(acts[k], acts[k + 1]);
            }
        }
        Trace trace;
        trace.case_id = "c" + std::to_string(i);
        for (std::size_t j = 0; j < acts.size(); ++j)
            trace.events.push_back(Event{trace.case_id, acts[j], static_cast<std::int64_t>(j)});
        log.traces.push_back(std::move(trace));
    }
    return log;
}

/// Mean normalized absolute error over the targeted features; non-targeted
/// features are free dimensions.
inline double target_distance(const FeatureVector& achieved, const TargetConfiguration& target) {
    validate(target);
    double sum = 0;
    for (const auto& [id, wanted] : target.targets) {
        auto it = achieved.find(id);
        if (it == achieved.end())
            throw DomainError(std::string("target_distance: achieved vector missing ") + feature_name(id));
        const auto& info = feature_info(id);
        sum += std::fabs(it->second - wanted) / (info.hi - info.lo);
    }
    return sum / static_cast<double>(target.targets.size());
}

// ---------------------------------------------------------------------------
// Calibration: simulated annealing over GeneratorParams
// ---------------------------------------------------------------------------

namespace detail {

// Restart length is fixed (default budget / 5 restarts) so that a longer
// budget extends the same trajectory and the best distance stays monotone.
constexpr long kRestartLength = 400;
constexpr long kStagnationWindow = kRestartLength / 4;
constexpr int kRequiredStagnantRestarts = 5;

struct Evaluation {
    double distance = std::numeric_limits<double>::infinity();
    EventLog log;
    FeatureVector achieved;
};

inline Evaluation evaluate_params(const GeneratorParams& p, const TargetConfiguration& target) {
    Evaluation ev;
    ProcessTree tree = sample_tree(p, p.seed);
    ev.log = simulate(tree, p.trace_count, p.noise_probability, splitmix64(p.seed ^ 0xabcdefull),
                      p.loop_repeat_probability);
    std::set<FeatureId> ids;
    for (const auto& [id, v] : target.targets) ids.insert(id);
    ev.achieved = extract(ev.log, ids);
    ev.distance = target_distance(ev.achieved, target);
    return ev;
}

inline GeneratorParams random_init(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    GeneratorParams p;
    p.activity_count = 2 + static_cast<int>(rng() % 10);
    p.max_depth = 2 + static_cast<int>(rng() % 4);
    p.weight_seq = 0.3 + 0.7 * unit(rng);
    p.weight_xor = 0.3 + 0.7 * unit(rng);
    p.weight_and = 0.8 * unit(rng);
    p.weight_loop = 0.8 * unit(rng);
    p.leaf_probability = 0.15 + 0.35 * unit(rng);
    p.loop_repeat_probability = 0.6 * unit(rng);
    p.trace_count = 20 + static_cast<int>(rng() % 181);
    p.noise_probability = 0.15 * unit(rng);
    p.seed = rng();
    return p;
}

template <typename T>
T clamp(T v, T lo, T hi) {
    return v < lo ? lo : (v > hi ? hi : v);
}

inline GeneratorParams perturb(const GeneratorParams& base, std::mt19937_64& rng) {
    GeneratorParams p = base;
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<int> which(0, 7);
    switch (which(rng)) {
        case 0: {
            std::uniform_int_distribution<int> delta(1, 3);
            int d = delta(rng);
            if (rng() & 1) d = -d;
            p.activity_count = clamp(p.activity_count + d, 1, 30);
            break;
        }
        case 1:
            p.max_depth = clamp(p.max_depth + ((rng() & 1) ? 1 : -1), 1, 6);
            break;
        case 2: {
            double* weights[4] = {&p.weight_seq, &p.weight_xor, &p.weight_and, &p.weight_loop};
            std::uniform_int_distribution<int> wi(0, 3);
            double* w = weights[wi(rng)];
            *w = clamp(*w + 0.25 * gauss(rng), 0.0, 1.0);
            if (p.weight_seq + p.weight_xor + p.weight_and + p.weight_loop <= 0.0) p.weight_seq = 0.5;
            break;
        }
        case 3:
            p.leaf_probability = clamp(p.leaf_probability + 0.1 * gauss(rng), 0.05, 1.0);
            break;
        case 4:
            p.loop_repeat_probability = clamp(p.loop_repeat_probability + 0.1 * gauss(rng), 0.0, 0.9);
            break;
        case 5: {
            double scaled = static_cast<double>(p.trace_count) * std::exp(0.35 * gauss(rng));
            int tc = clamp(static_cast<int>(std::lround(scaled)), 1, 1000);
            if (tc == p.trace_count) tc = clamp(tc + 1, 1, 1000);
            p.trace_count = tc;
            break;
        }
        case 6:
            p.noise_probability = clamp(p.noise_probability + 0.05 * gauss(rng), 0.0, 0.45);
            break;
        case 7:
            p.seed = rng();
            break;
    }
    return p;
}

} // namespace detail

/// Searches generator parameters so the simulated log's features match the
/// target within epsilon (normalized distance). Fully deterministic for fixed
/// inputs; failures are encoded in status, never thrown.
inline GenerationOutcome calibrate(const TargetConfiguration& target, long budget, double epsilon,
                                   std::uint64_t seed) {
    validate(target);
    if (budget < 1) throw DomainError("calibrate: budget < 1");

    GenerationOutcome out;
    out.target = target;
    out.seed = seed;

    std::mt19937_64 rng(detail::splitmix64(seed ^ 0xca11b8a7eull));

    double best_distance = std::numeric_limits<double>::infinity();
    detail::Evaluation best_eval;
    long used = 0;
    int completed_restarts = 0;
    int stagnant_restarts = 0;
    bool reached = false;

    while (used < budget && !reached) {
        GeneratorParams current = detail::random_init(rng);
        detail::Evaluation cur_eval = detail::evaluate_params(current, target);
        ++used;
        double restart_best = cur_eval.distance;
        long since_improvement = 0;
        if (cur_eval.distance < best_distance) {
            best_distance = cur_eval.distance;
            best_eval = cur_eval;
        }
        if (best_distance <= epsilon) {
            reached = true;
            break;
        }

        double temperature = 1.0;
        long steps = 1;
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        while (steps < detail::kRestartLength && used < budget) {
            GeneratorParams candidate = detail::perturb(current, rng);
            detail::Evaluation cand_eval = detail::evaluate_params(candidate, target);
            ++used;
            ++steps;
            double delta = cand_eval.distance - cur_eval.distance;
            if (delta < 0 || unit(rng) < std::exp(-delta / temperature)) {
                current = candidate;
                cur_eval = cand_eval;
            }
            if (cand_eval.distance < restart_best) {
                restart_best = cand_eval.distance;
                since_improvement = 0;
            } else {
                ++since_improvement;
            }
            if (cand_eval.distance < best_distance) {
                best_distance = cand_eval.distance;
                best_eval = cand_eval;
            }
            if (best_distance <= epsilon) {
                reached = true;
                break;
            }
            temperature *= 0.995;
        }
        if (steps >= detail::kRestartLength) {
            ++completed_restarts;
            if (since_improvement > detail::kStagnationWindow) ++stagnant_restarts;
        }
    }

    out.iterations_used = used;
    out.distance = best_distance;
    out.achieved = best_eval.achieved;
    out.log = best_eval.log;
    if (reached || best_distance <= epsilon) {
        out.status = GenStatus::Ok;
    } else if (completed_restarts >= detail::kRequiredStagnantRestarts &&
               stagnant_restarts == completed_restarts) {
        out.status = GenStatus::Infeasible;
    } else {
        out.status = GenStatus::BudgetExhausted;
    }
    return out;
}

// ---------------------------------------------------------------------------
// generation.csv rows
// ---------------------------------------------------------------------------

inline std::string generation_csv_header() {
    return "config_id,features,targets,achieved,distance,status,iterations,seed";
}

inline std::string generation_csv_row(const GenerationOutcome& o) {
    std::string feats, targets, achieved;
    for (const auto& [id, v] : o.target.targets) {
        if (!feats.empty()) {
            feats += '|';
            targets += '|';
            achieved += '|';
        }
        feats += feature_name(id);
        targets += csv::format_double(v);
        auto it = o.achieved.find(id);
        achieved += (it != o.achieved.end()) ? csv::format_double(it->second) : std::string();
    }
    return csv::join({o.target.id, feats, targets, achieved, csv::format_double(o.distance),
                      gen_status_name(o.status), std::to_string(o.iterations_used),
                      std::to_string(o.seed)});
}

} // namespace shapmine
