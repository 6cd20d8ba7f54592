#pragma once

#include "shapmine/error.hpp"
#include "shapmine/features.hpp"
#include "shapmine/shapley.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace shapmine {

// ---------------------------------------------------------------------------
// Mean attribution (average marginal effect)
// ---------------------------------------------------------------------------

struct MeanAttributionRow {
    FeatureId feature;
    std::string miner;  // empty when not grouped by miner
    std::string metric; // empty when not grouped by metric
    double mean_phi = 0;
    double mean_phi_normalized = 0;
    long count = 0;
};

inline std::vector<MeanAttributionRow> mean_attribution(const std::vector<ShapleyAttribution>& attrs,
                                                        bool by_miner, bool by_metric) {
    struct Acc {
        double phi = 0, norm = 0;
        long n = 0;
    };
    std::map<std::tuple<FeatureId, std::string, std::string>, Acc> groups;
    for (const auto& a : attrs) {
        for (std::size_t i = 0; i < a.players.size(); ++i) {
            auto key = std::make_tuple(a.players[i].first, by_miner ? a.miner : std::string{},
                                       by_metric ? a.metric : std::string{});
            auto& acc = groups[key];
            acc.phi += a.phi[i];
            acc.norm += a.phi_normalized[i];
            acc.n += 1;
        }
    }
    std::vector<MeanAttributionRow> rows;
    for (const auto& [key, acc] : groups) {
        MeanAttributionRow row;
        row.feature = std::get<0>(key);
        row.miner = std::get<1>(key);
        row.metric = std::get<2>(key);
        row.mean_phi = acc.phi / static_cast<double>(acc.n);
        row.mean_phi_normalized = acc.norm / static_cast<double>(acc.n);
        row.count = acc.n;
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Ranking: Friedman test + Nemenyi critical distance
// ---------------------------------------------------------------------------

/// Descending ranks (rank 1 = largest value), average ranks on ties.
inline std::vector<double> rank_descending(const std::vector<double>& values) {
    std::vector<double> ranks(values.size(), 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::size_t greater = 0, equal = 0;
        for (std::size_t j = 0; j < values.size(); ++j) {
            if (values[j] > values[i]) ++greater;
            if (values[j] == values[i]) ++equal;
        }
        ranks[i] = static_cast<double>(greater) + (static_cast<double>(equal) + 1.0) / 2.0;
    }
    return ranks;
}

struct RankReport {
    std::vector<std::string> features;
    std::vector<double> mean_ranks;
    double statistic = 0;       // Friedman chi-squared, k-1 dof
    double p_value = 1;
    double critical_distance = 0;
    std::vector<std::vector<std::size_t>> cliques; // feature indices, maximal sets
    std::size_t games = 0;
};

namespace detail {

/// Studentized-range constants / sqrt(2) for the Nemenyi test, k = 2..20.
inline double nemenyi_q(double alpha, std::size_t k) {
    static const double q05[] = {1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164, 3.219,
                                 3.268, 3.313, 3.354, 3.391, 3.426, 3.458, 3.489, 3.517, 3.544};
    static const double q10[] = {1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920, 2.978,
                                 3.030, 3.077, 3.120, 3.159, 3.196, 3.230, 3.261, 3.291, 3.319};
    if (k < 2 || k > 20) throw DomainError("nemenyi: k outside [2,20]");
    if (alpha == 0.05) return q05[k - 2];
    if (alpha == 0.10) return q10[k - 2];
    throw DomainError("nemenyi: alpha must be 0.05 or 0.10");
}

} // namespace detail

/// `value_matrix` holds one row per game (|normalized phi| per feature);
/// rows are ranked descending internally.
inline RankReport friedman_nemenyi(const std::vector<std::vector<double>>& value_matrix,
                                   const std::vector<std::string>& features, double alpha) {
    const std::size_t k = features.size();
    const std::size_t n = value_matrix.size();
    if (k < 2) throw DomainError("friedman_nemenyi: need >=2 features");
    if (k > 20) throw DomainError("friedman_nemenyi: k > 20 unsupported (table bound)");
    if (n < 2) throw DomainError("friedman_nemenyi: need >=2 games");

    RankReport report;
    report.features = features;
    report.games = n;
    report.mean_ranks.assign(k, 0.0);
    for (const auto& row : value_matrix) {
        if (row.size() != k) throw DomainError("friedman_nemenyi: ragged matrix");
        auto ranks = rank_descending(row);
        for (std::size_t j = 0; j < k; ++j) report.mean_ranks[j] += ranks[j];
    }
    for (std::size_t j = 0; j < k; ++j) report.mean_ranks[j] /= static_cast<double>(n);

    const double kd = static_cast<double>(k);
    const double nd = static_cast<double>(n);
    double sum_sq = 0;
    for (double r : report.mean_ranks) {
        double d = r - (kd + 1.0) / 2.0;
        sum_sq += d * d;
    }
    report.statistic = 12.0 * nd / (kd * (kd + 1.0)) * sum_sq;
    boost::math::chi_squared chi2(kd - 1.0);
    report.p_value = boost::math::cdf(boost::math::complement(chi2, std::max(0.0, report.statistic)));
    report.critical_distance = detail::nemenyi_q(alpha, k) * std::sqrt(kd * (kd + 1.0) / (6.0 * nd));

    // maximal groups of features whose pairwise mean-rank gap stays below CD
    std::vector<std::size_t> order(k);
    for (std::size_t i = 0; i < k; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (report.mean_ranks[a] != report.mean_ranks[b]) return report.mean_ranks[a] < report.mean_ranks[b];
        return features[a] < features[b];
    });
    std::vector<std::pair<std::size_t, std::size_t>> windows; // [first, last] in `order`
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i;
        while (j + 1 < k &&
               report.mean_ranks[order[j + 1]] - report.mean_ranks[order[i]] < report.critical_distance)
            ++j;
        if (windows.empty() || windows.back().second < j) windows.emplace_back(i, j);
    }
    for (auto [lo, hi] : windows) {
        std::vector<std::size_t> clique;
        for (std::size_t i = lo; i <= hi; ++i) clique.push_back(order[i]);
        std::sort(clique.begin(), clique.end());
        report.cliques.push_back(std::move(clique));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Spearman correlation
// ---------------------------------------------------------------------------

struct Correlation {
    double rho = 0;
    double p_value = 1;
};

/// Pearson correlation of average ranks (tie-corrected) with a t-distribution
/// p-value (two-sided).
inline Correlation spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 3) throw DomainError("spearman: need >=3 paired samples");
    auto rank_asc = [](const std::vector<double>& v) {
        std::vector<double> ranks(v.size(), 0.0);
        for (std::size_t i = 0; i < v.size(); ++i) {
            std::size_t less = 0, equal = 0;
            for (std::size_t j = 0; j < v.size(); ++j) {
                if (v[j] < v[i]) ++less;
                if (v[j] == v[i]) ++equal;
            }
            ranks[i] = static_cast<double>(less) + (static_cast<double>(equal) + 1.0) / 2.0;
        }
        return ranks;
    };
    Correlation c;
    c.rho = pearson(rank_asc(xs), rank_asc(ys)); // throws DomainError on constant input
    double n = static_cast<double>(xs.size());
    if (std::fabs(c.rho) >= 1.0) {
        c.rho = c.rho > 0 ? 1.0 : -1.0;
        c.p_value = 0.0;
        return c;
    }
    double t = c.rho * std::sqrt((n - 2.0) / (1.0 - c.rho * c.rho));
    boost::math::students_t dist(n - 2.0);
    c.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
    return c;
}

// ---------------------------------------------------------------------------
// Correlation strength classification
// ---------------------------------------------------------------------------

enum class StrengthClass { Insignificant, Gray, Weak, Medium, Strong };

inline const char* strength_name(StrengthClass s) {
    switch (s) {
        case StrengthClass::Insignificant: return "insignificant";
        case StrengthClass::Gray: return "gray";
        case StrengthClass::Weak: return "weak";
        case StrengthClass::Medium: return "medium";
        case StrengthClass::Strong: return "strong";
    }
    return "?";
}

/// Significance gate p <= 0.05, then |rho| thresholds 0.1 / 0.3 / 0.5.
inline StrengthClass classify_strength(double rho, double p_value) {
    if (p_value > 0.05) return StrengthClass::Insignificant;
    double r = std::fabs(rho);
    if (r < 0.1) return StrengthClass::Gray;
    if (r <= 0.3) return StrengthClass::Weak;
    if (r <= 0.5) return StrengthClass::Medium;
    return StrengthClass::Strong;
}

struct CorrelationRecord {
    std::string miner;
    std::string metric;
    FeatureId feature;
    double rho = 0;
    double p_value = 1;
    StrengthClass strength = StrengthClass::Insignificant;
    long n = 0;
};

/// Spearman correlation between a feature's target values and its signed phi,
/// per (miner, metric, feature). Groups with <3 points or constant inputs are
/// skipped.
inline std::vector<CorrelationRecord> correlate_value_impact(const std::vector<ShapleyAttribution>& attrs) {
    std::map<std::tuple<std::string, std::string, FeatureId>, std::pair<std::vector<double>, std::vector<double>>>
        groups;
    for (const auto& a : attrs)
        for (std::size_t i = 0; i < a.players.size(); ++i) {
            auto& [xs, ys] = groups[{a.miner, a.metric, a.players[i].first}];
            xs.push_back(a.players[i].second);
            ys.push_back(a.phi[i]);
        }
    std::vector<CorrelationRecord> records;
    for (const auto& [key, data] : groups) {
        const auto& [xs, ys] = data;
        if (xs.size() < 3) continue;
        Correlation c;
        try {
            c = spearman(xs, ys);
        } catch (const DomainError&) {
            continue; // constant values: correlation undefined
        }
        CorrelationRecord rec;
        rec.miner = std::get<0>(key);
        rec.metric = std::get<1>(key);
        rec.feature = std::get<2>(key);
        rec.rho = c.rho;
        rec.p_value = c.p_value;
        rec.strength = classify_strength(c.rho, c.p_value);
        rec.n = static_cast<long>(xs.size());
        records.push_back(rec);
    }
    return records;
}

// ---------------------------------------------------------------------------
// Robustness (mean/variance of normalized phi per miner x metric)
// ---------------------------------------------------------------------------

struct RobustnessPoint {
    std::string miner;
    std::string metric;
    double mean_norm_phi = 0;
    double var_norm_phi = 0; // population variance
    long n = 0;
    bool degenerate = false; // singleton pool
};

inline std::vector<RobustnessPoint> robustness(const std::vector<ShapleyAttribution>& attrs) {
    std::map<std::pair<std::string, std::string>, std::vector<double>> pools;
    for (const auto& a : attrs)
        for (double share : a.phi_normalized) pools[{a.miner, a.metric}].push_back(share);
    std::vector<RobustnessPoint> points;
    for (const auto& [key, pool] : pools) {
        RobustnessPoint p;
        p.miner = key.first;
        p.metric = key.second;
        p.n = static_cast<long>(pool.size());
        double mean = 0;
        for (double v : pool) mean += v;
        mean /= static_cast<double>(pool.size());
        double var = 0;
        for (double v : pool) var += (v - mean) * (v - mean);
        var /= static_cast<double>(pool.size());
        p.mean_norm_phi = mean;
        p.var_norm_phi = var;
        p.degenerate = pool.size() < 2;
        points.push_back(p);
    }
    return points;
}

// ---------------------------------------------------------------------------
// Feasibility (per-miner success + bucketed feature heatmap)
// ---------------------------------------------------------------------------

struct FeasibilityInput {
    TargetConfiguration coalition;
    std::string miner;
    bool ok = false;
};

struct FeasibilityCell {
    FeatureId feature;
    double lo = 0, hi = 0; // bucket bounds
    std::string miner;
    std::string metric;
    double success_fraction = 0;
    std::optional<double> mean_norm_phi; // absent when no successful games
    long n_configs = 0;
    long n_phi = 0;
};

struct MinerFeasibility {
    std::string miner;
    double percent_ok = 0;
    long configs = 0;
};

struct FeasibilityReport {
    std::vector<MinerFeasibility> per_miner;
    double overlap_percent = 0; // configurations ok under every miner
    std::vector<FeasibilityCell> cells;
};

inline FeasibilityReport feasibility(const std::vector<FeasibilityInput>& measurements,
                                     const std::vector<ShapleyAttribution>& attributions, int bucket_count) {
    if (bucket_count < 1) throw DomainError("feasibility: bucket_count < 1");
    FeasibilityReport report;

    std::set<std::string> miners;
    std::map<std::string, std::map<std::string, bool>> by_config; // coalition key -> miner -> ok
    std::map<std::string, std::pair<long, long>> miner_counts;    // miner -> {ok, total}
    for (const auto& m : measurements) {
        miners.insert(m.miner);
        by_config[detail::coalition_key(m.coalition.targets)][m.miner] = m.ok;
        auto& [ok, total] = miner_counts[m.miner];
        if (m.ok) ++ok;
        ++total;
    }
    for (const auto& [miner, counts] : miner_counts) {
        MinerFeasibility mf;
        mf.miner = miner;
        mf.configs = counts.second;
        mf.percent_ok = counts.second ? 100.0 * static_cast<double>(counts.first) /
                                            static_cast<double>(counts.second)
                                      : 0.0;
        report.per_miner.push_back(mf);
    }
    long overlap = 0;
    for (const auto& [key, per_miner] : by_config) {
        bool all_ok = true;
        for (const auto& miner : miners) {
            auto it = per_miner.find(miner);
            if (it == per_miner.end() || !it->second) {
                all_ok = false;
                break;
            }
        }
        if (all_ok) ++overlap;
    }
    report.overlap_percent = by_config.empty()
                                 ? 0.0
                                 : 100.0 * static_cast<double>(overlap) / static_cast<double>(by_config.size());

    // bucketed cells
    auto bucket_of = [&](FeatureId f, double value) {
        const auto& info = feature_info(f);
        double width = (info.hi - info.lo) / static_cast<double>(bucket_count);
        int b = static_cast<int>((value - info.lo) / width);
        if (b >= bucket_count) b = bucket_count - 1;
        if (b < 0) b = 0;
        return b;
    };

    std::set<FeatureId> seen_features;
    for (const auto& m : measurements)
        for (const auto& [f, v] : m.coalition.targets) seen_features.insert(f);
    std::set<std::string> metrics;
    for (const auto& a : attributions) metrics.insert(a.metric);
    if (metrics.empty()) metrics.insert("");

    for (FeatureId f : seen_features) {
        const auto& info = feature_info(f);
        double width = (info.hi - info.lo) / static_cast<double>(bucket_count);
        for (int b = 0; b < bucket_count; ++b) {
            for (const auto& miner : miners) {
                long ok = 0, total = 0;
                for (const auto& m : measurements) {
                    if (m.miner != miner) continue;
                    auto it = m.coalition.targets.find(f);
                    if (it == m.coalition.targets.end() || bucket_of(f, it->second) != b) continue;
                    ++total;
                    if (m.ok) ++ok;
                }
                if (total == 0) continue;
                for (const auto& metric : metrics) {
                    FeasibilityCell cell;
                    cell.feature = f;
                    cell.lo = info.lo + b * width;
                    cell.hi = (b + 1 == bucket_count) ? info.hi : info.lo + (b + 1) * width;
                    cell.miner = miner;
                    cell.metric = metric;
                    cell.n_configs = total;
                    cell.success_fraction = static_cast<double>(ok) / static_cast<double>(total);
                    double phi_sum = 0;
                    long phi_n = 0;
                    for (const auto& a : attributions) {
                        if (a.miner != miner || a.metric != metric) continue;
                        for (std::size_t i = 0; i < a.players.size(); ++i)
                            if (a.players[i].first == f && bucket_of(f, a.players[i].second) == b) {
                                phi_sum += a.phi_normalized[i];
                                ++phi_n;
                            }
                    }
                    if (phi_n > 0) cell.mean_norm_phi = phi_sum / static_cast<double>(phi_n);
                    cell.n_phi = phi_n;
                    report.cells.push_back(cell);
                }
            }
        }
    }
    return report;
}

} // namespace shapmine
