#pragma once

#include "shapmine/csv.hpp"
#include "shapmine/error.hpp"
#include "shapmine/features.hpp"
#include "shapmine/generator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace shapmine {

// ---------------------------------------------------------------------------
// Coalition games
// ---------------------------------------------------------------------------

/// Characteristic function over the subsets of up to ~20 feature-value
/// players, stored by index bitmask. v(empty) = 0 by definition.
struct CoalitionGame {
    std::string id;
    std::string miner;
    std::string metric;
    std::vector<std::pair<FeatureId, double>> players; // ordered by feature
    std::vector<std::optional<double>> values;         // index = bitmask; [0] = 0

    int player_count() const { return static_cast<int>(players.size()); }

    static CoalitionGame make(std::string id, std::string miner, std::string metric,
                              std::vector<std::pair<FeatureId, double>> players) {
        CoalitionGame g;
        g.id = std::move(id);
        g.miner = std::move(miner);
        g.metric = std::move(metric);
        g.players = std::move(players);
        if (g.players.empty() || g.players.size() > 20)
            throw DomainError("coalition game: player count outside [1,20]");
        g.values.assign(std::size_t{1} << g.players.size(), std::nullopt);
        g.values[0] = 0.0;
        return g;
    }

    void set_value(std::uint32_t mask, double v) {
        if (mask == 0) throw DomainError("coalition game: v(empty) is fixed at 0");
        if (mask >= values.size()) throw DomainError("coalition game: mask out of range");
        if (values[mask] && *values[mask] != v)
            throw DomainError("coalition game '" + id + "': conflicting value for coalition mask " +
                              std::to_string(mask));
        values[mask] = v;
    }

    double value(std::uint32_t mask) const {
        if (mask >= values.size() || !values[mask])
            throw DomainError("coalition game '" + id + "': missing value for mask " + std::to_string(mask));
        return *values[mask];
    }

    bool complete() const {
        for (const auto& v : values)
            if (!v) return false;
        return true;
    }
};

/// Pointwise game algebra on identical player lists (for the additivity
/// axiom and tests).
inline CoalitionGame add_games(const CoalitionGame& a, const CoalitionGame& b) {
    if (a.players != b.players) throw DomainError("add_games: player mismatch");
    CoalitionGame out = a;
    out.id = a.id + "+" + b.id;
    for (std::size_t m = 1; m < out.values.size(); ++m)
        out.values[m] = a.value(static_cast<std::uint32_t>(m)) + b.value(static_cast<std::uint32_t>(m));
    return out;
}

inline CoalitionGame scale_game(const CoalitionGame& a, double factor) {
    CoalitionGame out = a;
    for (std::size_t m = 1; m < out.values.size(); ++m)
        out.values[m] = factor * a.value(static_cast<std::uint32_t>(m));
    return out;
}

// ---------------------------------------------------------------------------
// Attribution
// ---------------------------------------------------------------------------

struct ShapleyAttribution {
    std::string game_id;
    std::string miner;
    std::string metric;
    std::vector<std::pair<FeatureId, double>> players;
    std::vector<double> phi;
    std::vector<double> phi_normalized; // |phi| shares, sum 1 unless degenerate
    bool degenerate_normalization = false;
};

/// share_i = |phi_i| / sum |phi_j|; all-zero phi yields zero shares and the
/// degeneracy flag.
inline std::vector<double> normalize(const std::vector<double>& phi, bool* degenerate = nullptr) {
    double total = 0;
    for (double p : phi) total += std::fabs(p);
    std::vector<double> shares(phi.size(), 0.0);
    if (total == 0.0) {
        if (degenerate) *degenerate = true;
        return shares;
    }
    if (degenerate) *degenerate = false;
    for (std::size_t i = 0; i < phi.size(); ++i) shares[i] = std::fabs(phi[i]) / total;
    return shares;
}

namespace detail {

inline const std::vector<double>& factorials() {
    static const std::vector<double> table = [] {
        std::vector<double> f(21, 1.0);
        for (std::size_t i = 1; i < f.size(); ++i) f[i] = f[i - 1] * static_cast<double>(i);
        return f;
    }();
    return table;
}

inline ShapleyAttribution attribution_shell(const CoalitionGame& game) {
    ShapleyAttribution a;
    a.game_id = game.id;
    a.miner = game.miner;
    a.metric = game.metric;
    a.players = game.players;
    return a;
}

} // namespace detail

/// Exact Shapley values: phi_i = sum over S not containing i of
/// |S|!(k-|S|-1)!/k! * [v(S u {i}) - v(S)].
inline ShapleyAttribution shapley_exact(const CoalitionGame& game) {
    if (!game.complete()) throw DomainError("shapley_exact: incomplete game '" + game.id + "'");
    const int k = game.player_count();
    const auto& fact = detail::factorials();
    ShapleyAttribution a = detail::attribution_shell(game);
    a.phi.assign(k, 0.0);
    const std::uint32_t full = (1u << k) - 1;
    for (int i = 0; i < k; ++i) {
        const std::uint32_t bit = 1u << i;
        for (std::uint32_t s = 0; s <= full; ++s) {
            if (s & bit) continue;
            int size = std::popcount(s);
            double weight = fact[size] * fact[k - size - 1] / fact[k];
            a.phi[i] += weight * (game.value(s | bit) - game.value(s));
        }
    }
    a.phi_normalized = normalize(a.phi, &a.degenerate_normalization);
    return a;
}

/// Independent oracle: averages marginal contributions across all k!
/// permutations. Limited to k <= 8.
inline ShapleyAttribution shapley_permutation_oracle(const CoalitionGame& game) {
    if (!game.complete()) throw DomainError("shapley_permutation_oracle: incomplete game '" + game.id + "'");
    const int k = game.player_count();
    if (k > 8) throw DomainError("shapley_permutation_oracle: k > 8");
    ShapleyAttribution a = detail::attribution_shell(game);
    a.phi.assign(k, 0.0);
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    long permutations = 0;
    do {
        std::uint32_t preceding = 0;
        for (int who : perm) {
            const std::uint32_t bit = 1u << who;
            a.phi[who] += game.value(preceding | bit) - game.value(preceding);
            preceding |= bit;
        }
        ++permutations;
    } while (std::next_permutation(perm.begin(), perm.end()));
    for (double& p : a.phi) p /= static_cast<double>(permutations);
    a.phi_normalized = normalize(a.phi, &a.degenerate_normalization);
    return a;
}

// ---------------------------------------------------------------------------
// Axiom verifiers
// ---------------------------------------------------------------------------

inline bool verify_efficiency(const CoalitionGame& game, const ShapleyAttribution& a, double tol = 1e-9) {
    double sum = 0;
    for (double p : a.phi) sum += p;
    return std::fabs(sum - game.value((1u << game.player_count()) - 1)) <= tol;
}

/// If i and j contribute identically to every coalition, their phi match.
inline bool verify_symmetry(const CoalitionGame& game, const ShapleyAttribution& a, double tol = 1e-9) {
    const int k = game.player_count();
    const std::uint32_t full = (1u << k) - 1;
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j) {
            bool interchangeable = true;
            for (std::uint32_t s = 0; s <= full && interchangeable; ++s) {
                if ((s & (1u << i)) || (s & (1u << j))) continue;
                if (game.value(s | (1u << i)) != game.value(s | (1u << j))) interchangeable = false;
            }
            if (interchangeable && std::fabs(a.phi[i] - a.phi[j]) > tol) return false;
        }
    return true;
}

/// Null players (no marginal contribution anywhere) get phi exactly 0.
inline bool verify_null_player(const CoalitionGame& game, const ShapleyAttribution& a) {
    const int k = game.player_count();
    const std::uint32_t full = (1u << k) - 1;
    for (int i = 0; i < k; ++i) {
        bool null_player = true;
        for (std::uint32_t s = 0; s <= full && null_player; ++s) {
            if (s & (1u << i)) continue;
            if (game.value(s | (1u << i)) != game.value(s)) null_player = false;
        }
        if (null_player && a.phi[i] != 0.0) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Assembling games from measurements
// ---------------------------------------------------------------------------

/// One measured utility: the metric value a miner achieved on the log
/// generated for `coalition`. `value` is absent when generation, discovery or
/// the metric itself failed.
struct MeasurementRow {
    TargetConfiguration coalition;
    std::string miner;
    std::string metric;
    std::optional<double> value;
};

namespace detail {

inline std::string coalition_key(const std::map<FeatureId, double>& targets) {
    std::string key;
    for (const auto& [id, v] : targets) {
        if (!key.empty()) key += '|';
        key += feature_name(id);
        key += '=';
        key += csv::format_double(v);
    }
    return key;
}

} // namespace detail

/// Builds one game per (k_max-sized coalition, miner, metric), pulling every
/// sub-coalition's utility from the measurements of the smaller
/// configurations. Games missing any subset value stay incomplete.
inline std::vector<CoalitionGame> assemble_games(const std::vector<MeasurementRow>& rows, int k_max) {
    if (k_max < 1 || k_max > 20) throw DomainError("assemble_games: k_max outside [1,20]");

    struct Cell {
        std::optional<double> value;
        bool present = false;
    };
    std::map<std::string, Cell> index; // key|miner|metric -> value
    auto cell_key = [](const std::string& coalition, const std::string& miner, const std::string& metric) {
        return coalition + "\x1f" + miner + "\x1f" + metric;
    };

    struct FullCoalition {
        std::map<FeatureId, double> targets;
        std::string id;
    };
    std::map<std::string, FullCoalition> full; // coalition key -> coalition
    std::map<std::string, std::set<std::string>> miners_by_key, metrics_by_key;

    for (const auto& row : rows) {
        validate(row.coalition);
        std::string ckey = detail::coalition_key(row.coalition.targets);
        auto key = cell_key(ckey, row.miner, row.metric);
        auto it = index.find(key);
        if (it != index.end()) {
            bool same = (it->second.value.has_value() == row.value.has_value()) &&
                        (!row.value || *it->second.value == *row.value);
            if (!same)
                throw DomainError("assemble_games: conflicting duplicate measurement for coalition '" + ckey +
                                  "', miner '" + row.miner + "', metric '" + row.metric + "'");
        } else {
            index[key] = Cell{row.value, true};
        }
        if (static_cast<int>(row.coalition.targets.size()) == k_max) {
            full.emplace(ckey, FullCoalition{row.coalition.targets,
                                             row.coalition.id.empty() ? ckey : row.coalition.id});
            miners_by_key[ckey].insert(row.miner);
            metrics_by_key[ckey].insert(row.metric);
        }
    }

    std::vector<CoalitionGame> games;
    for (const auto& [ckey, coalition] : full) {
        std::vector<std::pair<FeatureId, double>> players(coalition.targets.begin(), coalition.targets.end());
        const int k = static_cast<int>(players.size());
        for (const auto& miner : miners_by_key[ckey]) {
            for (const auto& metric : metrics_by_key[ckey]) {
                CoalitionGame game = CoalitionGame::make(coalition.id, miner, metric, players);
                for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
                    std::map<FeatureId, double> sub;
                    for (int i = 0; i < k; ++i)
                        if (mask & (1u << i)) sub.insert(players[i]);
                    auto it = index.find(cell_key(detail::coalition_key(sub), miner, metric));
                    if (it != index.end() && it->second.value) game.set_value(mask, *it->second.value);
                }
                games.push_back(std::move(game));
            }
        }
    }
    return games;
}

// ---------------------------------------------------------------------------
// shapley.csv rows (complete games only)
// ---------------------------------------------------------------------------

inline std::string shapley_csv_header() {
    return "game_id,miner,metric,feature,target_value,phi,phi_normalized,complete";
}

inline std::string shapley_csv_rows(const ShapleyAttribution& a) {
    std::string out;
    for (std::size_t i = 0; i < a.players.size(); ++i) {
        out += csv::join({a.game_id, a.miner, a.metric, feature_name(a.players[i].first),
                          csv::format_double(a.players[i].second), csv::format_double(a.phi[i]),
                          csv::format_double(a.phi_normalized[i]), "1"});
        out += '\n';
    }
    return out;
}

} // namespace shapmine
