#pragma once

#include "shapmine/discovery.hpp"
#include "shapmine/error.hpp"
#include "shapmine/eventlog.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace shapmine {

// ---------------------------------------------------------------------------
// Token replay
// ---------------------------------------------------------------------------

namespace detail {

/// One replay hypothesis: a marking plus the produce/consume counters of the
/// path that reached it.
struct ReplayState {
    std::vector<int> marking;
    long long produced = 0;
    long long consumed = 0;
};

class Replayer {
public:
    Replayer(const PetriNet& net, int silent_depth_cap)
        : net_(net), depth_cap_(silent_depth_cap) {
        validate(net);
        for (std::size_t i = 0; i < net.transitions.size(); ++i) {
            if (net.transitions[i].label.empty())
                silents_.push_back(static_cast<int>(i));
            else
                by_label_[net.transitions[i].label].push_back(static_cast<int>(i));
        }
    }

    static constexpr std::size_t kMaxStates = 64;     // hypothesis fan-out cap
    static constexpr std::size_t kMaxClosure = 4096;  // silent-closure cap

    /// All states reachable from `states` by firing at most depth_cap silent
    /// transitions, in deterministic BFS order (seeds first).
    std::vector<ReplayState> silent_closure(const std::vector<ReplayState>& states) const {
        std::vector<ReplayState> out;
        std::set<std::vector<int>> seen;
        std::deque<std::pair<ReplayState, int>> queue;
        for (const auto& s : states)
            if (seen.insert(s.marking).second) {
                out.push_back(s);
                queue.emplace_back(s, 0);
            }
        while (!queue.empty() && out.size() < kMaxClosure) {
            auto [cur, depth] = queue.front();
            queue.pop_front();
            if (depth >= depth_cap_) continue;
            for (int ti : silents_) {
                const auto& t = net_.transitions[ti];
                if (!enabled(t, cur.marking)) continue;
                ReplayState next;
                next.marking = fire(t, cur.marking);
                next.produced = cur.produced + static_cast<long long>(t.outputs.size());
                next.consumed = cur.consumed + static_cast<long long>(t.inputs.size());
                if (seen.insert(next.marking).second) {
                    out.push_back(next);
                    queue.emplace_back(next, depth + 1);
                }
            }
        }
        return out;
    }

    /// Zero-deficit successors after observing `label`; empty when the label
    /// cannot fire anywhere without missing tokens.
    std::vector<ReplayState> advance(const std::vector<ReplayState>& states, const std::string& label) const {
        std::vector<ReplayState> out;
        std::set<std::vector<int>> seen;
        auto it = by_label_.find(label);
        if (it == by_label_.end()) return out;
        for (const auto& s : silent_closure(states)) {
            for (int ti : it->second) {
                const auto& t = net_.transitions[ti];
                if (!enabled(t, s.marking)) continue;
                ReplayState next;
                next.marking = fire(t, s.marking);
                next.produced = s.produced + static_cast<long long>(t.outputs.size());
                next.consumed = s.consumed + static_cast<long long>(t.inputs.size());
                if (seen.insert(next.marking).second && out.size() < kMaxStates) out.push_back(next);
            }
        }
        return out;
    }

    /// Distinct labels fireable after silent moves only.
    std::set<std::string> enabled_labels(const std::vector<ReplayState>& states) const {
        std::set<std::string> labels;
        for (const auto& s : silent_closure(states))
            for (const auto& [label, tis] : by_label_)
                for (int ti : tis)
                    if (enabled(net_.transitions[ti], s.marking)) {
                        labels.insert(label);
                        break;
                    }
        return labels;
    }

    struct TraceCounts {
        long long produced = 0, consumed = 0, missing = 0, remaining = 0;
    };

    /// Replays one activity sequence, accounting produced/consumed/missing/
    /// remaining tokens (initial and final marking tokens included).
    TraceCounts replay_trace(const std::vector<std::string>& acts) const {
        TraceCounts totals;
        ReplayState init;
        init.marking.assign(net_.places.size(), 0);
        init.marking[net_.source] = 1;
        init.produced = 1; // initial token
        std::vector<ReplayState> states{init};

        for (const auto& label : acts) {
            auto next = advance(states, label);
            if (!next.empty()) {
                states = std::move(next);
                continue;
            }
            // deficit: collapse to the least-missing hypothesis
            auto it = by_label_.find(label);
            if (it == by_label_.end()) {
                // activity unknown to the model: unmet obligation
                totals.missing += 1;
                totals.consumed += 1;
                continue;
            }
            auto closure = silent_closure(states);
            long long best_deficit = -1;
            const ReplayState* best_state = nullptr;
            int best_t = -1;
            for (const auto& s : closure) {
                for (int ti : it->second) {
                    const auto& t = net_.transitions[ti];
                    std::map<int, int> need;
                    for (int p : t.inputs) need[p] += 1;
                    long long deficit = 0;
                    for (auto& [p, n] : need) deficit += std::max(0, n - s.marking[p]);
                    if (best_deficit < 0 || deficit < best_deficit) {
                        best_deficit = deficit;
                        best_state = &s;
                        best_t = ti;
                    }
                }
            }
            const auto& t = net_.transitions[best_t];
            ReplayState next_state = *best_state;
            std::map<int, int> need;
            for (int p : t.inputs) need[p] += 1;
            for (auto& [p, n] : need)
                if (next_state.marking[p] < n) next_state.marking[p] = n; // inject missing
            next_state.marking = fire(t, next_state.marking);
            next_state.produced += static_cast<long long>(t.outputs.size());
            next_state.consumed += static_cast<long long>(t.inputs.size());
            totals.missing += best_deficit;
            states.assign(1, next_state);
        }

        // consume the final marking
        std::vector<int> final_marking(net_.places.size(), 0);
        final_marking[net_.sink] = 1;
        auto closure = silent_closure(states);
        const ReplayState* chosen = nullptr;
        bool perfect = false, has_sink = false;
        auto total_tokens = [](const std::vector<int>& m) {
            long long s = 0;
            for (int v : m) s += v;
            return s;
        };
        for (const auto& s : closure) {
            if (s.marking == final_marking) {
                chosen = &s;
                perfect = true;
                break;
            }
        }
        if (!perfect) {
            for (const auto& s : closure) {
                bool sink_token = s.marking[net_.sink] >= 1;
                if (!chosen) {
                    chosen = &s;
                    has_sink = sink_token;
                    continue;
                }
                bool better;
                if (sink_token != has_sink) {
                    better = sink_token;
                } else {
                    auto a = total_tokens(s.marking), b = total_tokens(chosen->marking);
                    better = a < b || (a == b && s.marking < chosen->marking);
                }
                if (better) {
                    chosen = &s;
                    has_sink = sink_token;
                }
            }
        }
        totals.produced += chosen->produced;
        totals.consumed += chosen->consumed + 1; // final token obligation
        if (perfect || has_sink) {
            totals.remaining += total_tokens(chosen->marking) - 1;
        } else {
            totals.missing += 1;
            totals.remaining += total_tokens(chosen->marking);
        }
        return totals;
    }

private:
    const PetriNet& net_;
    int depth_cap_;
    std::map<std::string, std::vector<int>> by_label_;
    std::vector<int> silents_;
};

} // namespace detail

/// Token-based replay fitness: 0.5*(1 - missing/consumed) + 0.5*(1 -
/// remaining/produced), accumulated over all traces. Replays each distinct
/// variant once.
inline double token_replay_fitness(const PetriNet& net, const EventLog& log, int silent_depth_cap = 16) {
    if (log.empty()) throw DomainError("token_replay_fitness: empty log");
    detail::Replayer rep(net, silent_depth_cap);
    long long p = 0, c = 0, m = 0, r = 0;
    for (const auto& v : variants(log)) {
        auto counts = rep.replay_trace(v.activity_sequence);
        auto k = static_cast<long long>(v.count);
        p += counts.produced * k;
        c += counts.consumed * k;
        m += counts.missing * k;
        r += counts.remaining * k;
    }
    double f = 0.0;
    if (c > 0) f += 0.5 * (1.0 - static_cast<double>(m) / static_cast<double>(c));
    else f += 0.5;
    if (p > 0) f += 0.5 * (1.0 - static_cast<double>(r) / static_cast<double>(p));
    else f += 0.5;
    return f;
}

namespace detail {

struct PrefixNode {
    long long weight = 0; // traces sharing this prefix
    std::map<std::string, PrefixNode> children;
};

inline void precision_walk(const Replayer& rep, const PrefixNode& node, const std::vector<ReplayState>& states,
                           double& mass_sum, double& weight_sum) {
    auto enabled = rep.enabled_labels(states);
    if (!enabled.empty()) {
        long long observed = 0;
        for (const auto& [label, child] : node.children)
            if (enabled.count(label)) ++observed;
        mass_sum += static_cast<double>(node.weight) * static_cast<double>(observed) /
                    static_cast<double>(enabled.size());
        weight_sum += static_cast<double>(node.weight);
    }
    for (const auto& [label, child] : node.children) {
        auto next = rep.advance(states, label);
        if (next.empty()) continue; // prefix not replayable without deficits
        precision_walk(rep, child, next, mass_sum, weight_sum);
    }
}

} // namespace detail

/// Escaping-edges precision: at every replayable log prefix, the share of
/// model-enabled labels that the log actually continues with,
/// frequency-weighted over prefix occurrences.
inline double escaping_edges_precision(const PetriNet& net, const EventLog& log, int silent_depth_cap = 16) {
    if (log.empty()) throw DomainError("escaping_edges_precision: empty log");
    detail::Replayer rep(net, silent_depth_cap);

    detail::PrefixNode root;
    for (const auto& v : variants(log)) {
        detail::PrefixNode* cur = &root;
        cur->weight += static_cast<long long>(v.count);
        for (const auto& a : v.activity_sequence) {
            cur = &cur->children[a];
            cur->weight += static_cast<long long>(v.count);
        }
    }

    detail::ReplayState init;
    init.marking.assign(net.places.size(), 0);
    init.marking[net.source] = 1;
    std::vector<detail::ReplayState> states{init};

    double mass_sum = 0, weight_sum = 0;
    detail::precision_walk(rep, root, states, mass_sum, weight_sum);
    if (weight_sum == 0) return 1.0; // model enables nothing: no escaping edges
    return mass_sum / weight_sum;
}

inline double fscore(double fitness, double precision) {
    if (fitness < 0 || fitness > 1 || precision < 0 || precision > 1)
        throw DomainError("fscore: arguments outside [0,1]");
    double s = fitness + precision;
    if (s == 0.0) return 0.0;
    return 2.0 * fitness * precision / s;
}

// ---------------------------------------------------------------------------
// Complexity metrics
// ---------------------------------------------------------------------------

struct Complexity {
    long size = 0;
    long cfc = 0;
};

/// size = all nodes (tasks + gateways + start + end); cfc sums xor-split
/// out-degrees and counts each and-split once.
inline Complexity complexity(const GatewayGraph& g) {
    validate(g);
    Complexity c;
    c.size = static_cast<long>(g.nodes.size());
    for (const auto& n : g.nodes) {
        if (n.kind == GatewayKind::XorSplit) c.cfc += static_cast<long>(g.out_degree(n.id));
        if (n.kind == GatewayKind::AndSplit) c.cfc += 1;
    }
    return c;
}

// ---------------------------------------------------------------------------
// measure: discovery + all metrics under resource limits
// ---------------------------------------------------------------------------

struct ResourceLimits {
    std::int64_t timeout_ms = 300000;              // 5 minutes
    std::int64_t disk_cap_bytes = 19'000'000'000;  // 19 GB
};

enum class MeasureStatus { Ok, Timeout, ResourceExceeded, DiscoveryFailed };

inline const char* measure_status_name(MeasureStatus s) {
    switch (s) {
        case MeasureStatus::Ok: return "ok";
        case MeasureStatus::Timeout: return "timeout";
        case MeasureStatus::ResourceExceeded: return "resource_exceeded";
        case MeasureStatus::DiscoveryFailed: return "discovery_failed";
    }
    return "?";
}

struct MetricRecord {
    std::string config_id;
    std::string miner;
    std::optional<double> fitness;
    std::optional<double> precision;
    std::optional<double> fscore_value;
    std::optional<long> size;
    std::optional<long> cfc;
    std::int64_t exec_time_ms = 0; // discovery only
    Soundness sound = Soundness::Unknown;
    MeasureStatus status = MeasureStatus::DiscoveryFailed;
};

struct MeasureConfig {
    std::size_t soundness_state_cap = 10000;
    int silent_depth_cap = 16;
};

inline MetricRecord measure(const MinerRegistry& registry, const std::string& miner, const EventLog& log,
                            const ResourceLimits& limits, const std::string& config_id,
                            const MeasureConfig& cfg = {}) {
    if (!registry.has(miner)) throw DomainError("unknown miner '" + miner + "'");
    MetricRecord rec;
    rec.config_id = config_id;
    rec.miner = miner;

    auto start = std::chrono::steady_clock::now();
    auto elapsed_ms = [&] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start)
            .count();
    };
    auto out_of_time = [&] { return elapsed_ms() >= limits.timeout_ms; };

    if (out_of_time()) {
        rec.status = MeasureStatus::Timeout;
        return rec;
    }

    DiscoveredModel model;
    try {
        model = registry.run(miner, log);
        rec.exec_time_ms = elapsed_ms();
    } catch (const std::exception&) {
        rec.status = MeasureStatus::DiscoveryFailed;
        return rec;
    }
    if (out_of_time()) {
        rec.status = MeasureStatus::Timeout;
        return rec;
    }

    // serialized artifacts for this configuration against the disk cap
    std::size_t artifact_bytes = write_xes(log).size() + to_string(model.net).size() +
                                 to_string(model.graph).size() +
                                 (model.tree ? to_string(*model.tree).size() : 0);
    if (static_cast<std::int64_t>(artifact_bytes) > limits.disk_cap_bytes) {
        rec.status = MeasureStatus::ResourceExceeded;
        return rec;
    }

    rec.sound = check_soundness(model.net, cfg.soundness_state_cap);
    if (out_of_time()) {
        rec.status = MeasureStatus::Timeout;
        return rec;
    }

    double fit = token_replay_fitness(model.net, log, cfg.silent_depth_cap);
    if (out_of_time()) {
        rec.status = MeasureStatus::Timeout;
        return rec;
    }
    double prec = escaping_edges_precision(model.net, log, cfg.silent_depth_cap);
    if (out_of_time()) {
        rec.status = MeasureStatus::Timeout;
        return rec;
    }
    auto cx = complexity(model.graph);

    rec.fitness = fit;
    rec.precision = prec;
    rec.fscore_value = fscore(fit, prec);
    rec.size = cx.size;
    rec.cfc = cx.cfc;
    rec.status = MeasureStatus::Ok;
    return rec;
}

} // namespace shapmine
