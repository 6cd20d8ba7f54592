#pragma once

#include "shapmine/error.hpp"
#include "shapmine/eventlog.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace shapmine {

// ---------------------------------------------------------------------------
// Meta-feature catalog
// ---------------------------------------------------------------------------

enum class FeatureId { aq1, nusa, saq1, ekbr3, rt5v, svo, tlkh, tlv };

struct FeatureInfo {
    FeatureId id;
    const char* name;
    const char* description;
    double lo;
    double hi;
};

/// The eight control-flow meta-features with their canonical value ranges.
inline const std::array<FeatureInfo, 8>& feature_catalog() {
    static const std::array<FeatureInfo, 8> catalog = {{
        {FeatureId::aq1, "aq1", "lower quartile of activity counts", 1.0, 79.92},
        {FeatureId::nusa, "nusa", "number of unique start activities", 1.0, 6.56},
        {FeatureId::saq1, "saq1", "lower quartile of start activity counts", 1.0, 174.79},
        {FeatureId::ekbr3, "ekbr3", "3-block entropy ratio", 0.0, 4.37},
        {FeatureId::rt5v, "rt5v", "trace share of the top 5% variants", 0.0, 0.38},
        {FeatureId::svo, "svo", "skewness of variant occurrences", 1.54, 11.61},
        {FeatureId::tlkh, "tlkh", "excess kurtosis of trace lengths", -0.97, 7.92},
        {FeatureId::tlv, "tlv", "variance of trace lengths", 0.0, 138.7},
    }};
    return catalog;
}

inline const FeatureInfo& feature_info(FeatureId id) {
    for (const auto& f : feature_catalog())
        if (f.id == id) return f;
    throw DomainError("unknown feature id");
}

inline const char* feature_name(FeatureId id) { return feature_info(id).name; }

inline FeatureId feature_from_name(const std::string& name) {
    for (const auto& f : feature_catalog())
        if (name == f.name) return f.id;
    throw DomainError("unknown feature '" + name + "'");
}

inline bool feature_in_range(FeatureId id, double value) {
    const auto& f = feature_info(id);
    return value >= f.lo && value <= f.hi;
}

using FeatureVector = std::map<FeatureId, double>;

// ---------------------------------------------------------------------------
// Shared numeric helpers
// ---------------------------------------------------------------------------

/// Linear-interpolation quantile on a copy of `values`: h = (n-1)q.
inline double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw DomainError("quantile: empty input");
    std::sort(values.begin(), values.end());
    double h = (static_cast<double>(values.size()) - 1.0) * q;
    auto lo = static_cast<std::size_t>(h);
    double frac = h - static_cast<double>(lo);
    if (lo + 1 >= values.size() || frac == 0.0) return values[lo];
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

namespace detail {

struct Moments {
    double m2 = 0, m3 = 0, m4 = 0;
    std::size_t n = 0;
};

// accumulation runs over sorted values so results are bit-identical under
// input permutation
inline Moments central_moments(std::vector<double> xs) {
    Moments m;
    m.n = xs.size();
    if (m.n == 0) return m;
    std::sort(xs.begin(), xs.end());
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(m.n);
    for (double x : xs) {
        double d = x - mean;
        m.m2 += d * d;
        m.m3 += d * d * d;
        m.m4 += d * d * d * d;
    }
    m.m2 /= static_cast<double>(m.n);
    m.m3 /= static_cast<double>(m.n);
    m.m4 /= static_cast<double>(m.n);
    return m;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

struct FeatureExtraction {
    FeatureVector values;
    std::set<FeatureId> degenerate;   // moment-degenerate or window-less features
    std::set<FeatureId> out_of_range; // values outside the catalog range (reported, never clamped)
};

/// Extracts the requested meta-features. Skewness/kurtosis of constant or
/// too-short samples are reported as 0 and flagged degenerate.
inline FeatureExtraction extract_detailed(const EventLog& log, const std::set<FeatureId>& ids) {
    if (log.empty()) throw DomainError("extract: empty log");
    FeatureExtraction out;
    auto wants = [&](FeatureId id) { return ids.count(id) > 0; };

    if (wants(FeatureId::aq1)) {
        std::map<std::string, double> counts;
        for (const auto& t : log.traces)
            for (const auto& e : t.events) counts[e.activity] += 1.0;
        std::vector<double> xs;
        for (auto& [a, c] : counts) xs.push_back(c);
        out.values[FeatureId::aq1] = quantile(xs, 0.25);
    }
    if (wants(FeatureId::nusa) || wants(FeatureId::saq1)) {
        std::map<std::string, double> start_counts;
        for (const auto& t : log.traces) start_counts[t.events.front().activity] += 1.0;
        if (wants(FeatureId::nusa))
            out.values[FeatureId::nusa] = static_cast<double>(start_counts.size());
        if (wants(FeatureId::saq1)) {
            std::vector<double> xs;
            for (auto& [a, c] : start_counts) xs.push_back(c);
            out.values[FeatureId::saq1] = quantile(xs, 0.25);
        }
    }
    if (wants(FeatureId::ekbr3)) {
        std::unordered_map<std::string, double> windows;
        double total = 0;
        for (const auto& t : log.traces) {
            const auto& ev = t.events;
            for (std::size_t i = 0; i + 3 <= ev.size(); ++i) {
                std::string key = ev[i].activity;
                key.push_back('\x1f');
                key += ev[i + 1].activity;
                key.push_back('\x1f');
                key += ev[i + 2].activity;
                windows[key] += 1.0;
                total += 1.0;
            }
        }
        double h = 0.0;
        if (total > 0) {
            std::vector<double> counts;
            counts.reserve(windows.size());
            for (auto& [w, c] : windows) counts.push_back(c);
            std::sort(counts.begin(), counts.end());
            for (double c : counts) {
                double p = c / total;
                h -= p * std::log(p);
            }
        } else {
            out.degenerate.insert(FeatureId::ekbr3);
        }
        out.values[FeatureId::ekbr3] = h / 3.0;
    }
    if (wants(FeatureId::rt5v) || wants(FeatureId::svo)) {
        auto vs = variants(log);
        if (wants(FeatureId::rt5v)) {
            auto top = static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(vs.size())));
            if (top < 1) top = 1;
            double covered = 0;
            for (std::size_t i = 0; i < top && i < vs.size(); ++i)
                covered += static_cast<double>(vs[i].count);
            out.values[FeatureId::rt5v] = covered / static_cast<double>(log.trace_count());
        }
        if (wants(FeatureId::svo)) {
            std::vector<double> xs;
            for (const auto& v : vs) xs.push_back(static_cast<double>(v.count));
            auto m = detail::central_moments(xs);
            if (m.n < 3 || m.m2 == 0.0) {
                out.values[FeatureId::svo] = 0.0;
                out.degenerate.insert(FeatureId::svo);
            } else {
                out.values[FeatureId::svo] = m.m3 / std::pow(m.m2, 1.5);
            }
        }
    }
    if (wants(FeatureId::tlkh) || wants(FeatureId::tlv)) {
        std::vector<double> lengths;
        for (const auto& t : log.traces) lengths.push_back(static_cast<double>(t.events.size()));
        auto m = detail::central_moments(lengths);
        if (wants(FeatureId::tlv)) out.values[FeatureId::tlv] = m.m2;
        if (wants(FeatureId::tlkh)) {
            if (m.n < 3 || m.m2 == 0.0) {
                out.values[FeatureId::tlkh] = 0.0;
                out.degenerate.insert(FeatureId::tlkh);
            } else {
                out.values[FeatureId::tlkh] = m.m4 / (m.m2 * m.m2) - 3.0;
            }
        }
    }
    for (auto& [id, v] : out.values) {
        if (!std::isfinite(v)) throw DomainError(std::string("extract: non-finite value for ") + feature_name(id));
        if (!feature_in_range(id, v)) out.out_of_range.insert(id);
    }
    return out;
}

inline FeatureVector extract(const EventLog& log, const std::set<FeatureId>& ids) {
    return extract_detailed(log, ids).values;
}

inline std::set<FeatureId> all_feature_ids() {
    std::set<FeatureId> ids;
    for (const auto& f : feature_catalog()) ids.insert(f.id);
    return ids;
}

/// CSV rows for an extraction: log_id, feature, value, degenerate_flag.
inline std::string extraction_report_csv(const std::string& log_id, const FeatureExtraction& ex,
                                         bool header = true) {
    std::string out;
    if (header) out += "log_id,feature,value,degenerate_flag\n";
    for (const auto& [id, v] : ex.values) {
        out += log_id;
        out += ',';
        out += feature_name(id);
        out += ',';
        out += csv::format_double(v);
        out += ',';
        out += ex.degenerate.count(id) ? '1' : '0';
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Greedy correlation-based pre-selection
// ---------------------------------------------------------------------------

inline double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2) throw DomainError("pearson: need two equally sized samples");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(ys.size());
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double dx = xs[i] - mx, dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw DomainError("pearson: constant input");
    return sxy / std::sqrt(sxx * syy);
}

/// Candidate columns, keyed by identifier; all columns share the row count.
using FeatureMatrix = std::map<std::string, std::vector<double>>;

/// Picks `n` features: first the one with the lowest mean |r| to all others,
/// then repeatedly the candidate with the smallest maximum |r| to the
/// already-selected set. Ties break lexicographically.
inline std::vector<std::string> greedy_select(const FeatureMatrix& matrix, std::size_t n) {
    if (matrix.empty()) throw DomainError("greedy_select: no candidates");
    if (n > matrix.size()) throw DomainError("greedy_select: n exceeds candidate count");
    std::size_t rows = matrix.begin()->second.size();
    if (rows < 2) throw DomainError("greedy_select: need at least 2 rows");
    std::vector<std::string> names;
    for (const auto& [name, col] : matrix) {
        if (col.size() != rows) throw DomainError("greedy_select: ragged matrix");
        double first = col.front();
        bool constant = true;
        for (double v : col)
            if (v != first) {
                constant = false;
                break;
            }
        if (constant) throw DomainError("greedy_select: column '" + name + "' is constant");
        names.push_back(name);
    }

    std::map<std::pair<std::string, std::string>, double> corr;
    for (std::size_t i = 0; i < names.size(); ++i)
        for (std::size_t j = i + 1; j < names.size(); ++j) {
            double r = std::fabs(pearson(matrix.at(names[i]), matrix.at(names[j])));
            corr[{names[i], names[j]}] = r;
            corr[{names[j], names[i]}] = r;
        }

    std::vector<std::string> selected;
    std::set<std::string> remaining(names.begin(), names.end());

    // first pick: lowest mean |r| against all other candidates
    std::string best;
    double best_score = 0;
    for (const auto& name : names) {
        double sum = 0;
        for (const auto& other : names)
            if (other != name) sum += corr[{name, other}];
        double mean = names.size() > 1 ? sum / static_cast<double>(names.size() - 1) : 0.0;
        if (best.empty() || mean < best_score) {
            best = name;
            best_score = mean;
        }
    }
    selected.push_back(best);
    remaining.erase(best);

    while (selected.size() < n) {
        std::string pick;
        double pick_score = 0;
        for (const auto& cand : remaining) { // set iteration = lexicographic tie-break
            double worst = 0;
            for (const auto& s : selected) worst = std::max(worst, corr[{cand, s}]);
            if (pick.empty() || worst < pick_score) {
                pick = cand;
                pick_score = worst;
            }
        }
        selected.push_back(pick);
        remaining.erase(pick);
    }
    return selected;
}

} // namespace shapmine
