#pragma once

// Per-group base metrics at a threshold, max-minus-min disparities, and the
// empirical 1-D Wasserstein distance between group score distributions.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fdi/core.hpp"
#include "fdi/grouping.hpp"
#include "fdi/verification.hpp"

namespace fdi {

// Groups below these pair counts are excluded from the analysis (and
// reported); rates would be undefined or meaningless there.
struct ValidityPolicy {
    std::uint64_t min_genuine = 1;
    std::uint64_t min_impostor = 1;
};

struct GroupMetricsTable {
    struct Row {
        std::string label;
        double fpr = 0.0;
        double fnr = 0.0;
        double acc = 0.0;
        std::uint64_t n_genuine = 0;
        std::uint64_t n_impostor = 0;
    };

    double tau = 0.0;
    std::vector<Row> rows;              // valid groups, partition order
    std::vector<std::string> excluded;  // groups that failed the validity policy

    const Row& row(const std::string& label) const {
        for (const auto& r : rows)
            if (r.label == label) return r;
        throw Error("group metrics: no row for group '" + label + "'");
    }
};

struct DisparitySummary {
    double delta_fpr = 0.0;
    double delta_fnr = 0.0;
    double delta_acc = 0.0;
    double acc_min = 0.0;
};

inline GroupMetricsTable group_metrics(std::span<const LabeledScore> scores,
                                       const PairGroupAssignment& assignment,
                                       double tau,
                                       const ValidityPolicy& validity = {}) {
    GroupMetricsTable table;
    table.tau = tau;
    for (std::size_t g = 0; g < assignment.group_labels.size(); ++g) {
        ConfusionCounts c;
        for (std::size_t idx : assignment.members[g]) {
            const auto& s = scores[idx];
            bool accept = s.score >= tau;
            if (s.is_genuine)
                accept ? ++c.tp : ++c.fn;
            else
                accept ? ++c.fp : ++c.tn;
        }
        if (c.genuine_total() < validity.min_genuine ||
            c.impostor_total() < validity.min_impostor) {
            table.excluded.push_back(assignment.group_labels[g]);
            continue;
        }
        Rates r = rates(c);
        table.rows.push_back({assignment.group_labels[g], r.fpr, r.fnr, r.acc,
                              c.genuine_total(), c.impostor_total()});
    }
    if (table.rows.size() < 2) {
        std::string detail = "group_metrics: fewer than 2 valid groups at tau=" +
                             format_real(tau) + " (valid " + format_count(table.rows.size());
        detail += ", excluded";
        for (const auto& e : table.excluded) detail += " " + e;
        detail += ")";
        throw Error(detail);
    }
    return table;
}

inline DisparitySummary disparities(const GroupMetricsTable& t) {
    DisparitySummary d;
    double fpr_lo = t.rows[0].fpr, fpr_hi = t.rows[0].fpr;
    double fnr_lo = t.rows[0].fnr, fnr_hi = t.rows[0].fnr;
    double acc_lo = t.rows[0].acc, acc_hi = t.rows[0].acc;
    for (const auto& r : t.rows) {
        fpr_lo = std::min(fpr_lo, r.fpr); fpr_hi = std::max(fpr_hi, r.fpr);
        fnr_lo = std::min(fnr_lo, r.fnr); fnr_hi = std::max(fnr_hi, r.fnr);
        acc_lo = std::min(acc_lo, r.acc); acc_hi = std::max(acc_hi, r.acc);
    }
    d.delta_fpr = fpr_hi - fpr_lo;
    d.delta_fnr = fnr_hi - fnr_lo;
    d.delta_acc = acc_hi - acc_lo;
    d.acc_min = acc_lo;
    return d;
}

// Exact empirical W1 between two samples with equal per-sample mass:
// integrate |Fa^{-1}(u) - Fb^{-1}(u)| over u in (0,1). The quantile functions
// are step functions with breakpoints at i/n and j/m, so the integral is a
// finite sum walked with two pointers over the sorted samples.
inline double wasserstein_1d(std::span<const double> sample_a,
                             std::span<const double> sample_b) {
    if (sample_a.empty() || sample_b.empty())
        throw Error("wasserstein_1d: empty sample");
    for (double v : sample_a)
        if (!std::isfinite(v)) throw Error("wasserstein_1d: non-finite value in sample a");
    for (double v : sample_b)
        if (!std::isfinite(v)) throw Error("wasserstein_1d: non-finite value in sample b");

    std::vector<double> a(sample_a.begin(), sample_a.end());
    std::vector<double> b(sample_b.begin(), sample_b.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());

    const double n = static_cast<double>(a.size());
    const double m = static_cast<double>(b.size());
    std::size_t ia = 0, ib = 0;
    double u = 0.0, total = 0.0;
    while (ia < a.size() && ib < b.size()) {
        double next_a = static_cast<double>(ia + 1) / n;
        double next_b = static_cast<double>(ib + 1) / m;
        double next = std::min(next_a, next_b);
        total += (next - u) * std::fabs(a[ia] - b[ib]);
        u = next;
        if (next_a <= next) ++ia;
        if (next_b <= next) ++ib;
    }
    return total;
}

enum class ClassFilter { genuine, impostor, all };

inline ClassFilter parse_class_filter(const std::string& s) {
    if (s == "genuine") return ClassFilter::genuine;
    if (s == "impostor") return ClassFilter::impostor;
    if (s == "all") return ClassFilter::all;
    throw Error("class filter '" + s + "': expected genuine, impostor, or all");
}

// Symmetric K x K matrix of pairwise W1 distances between group score
// distributions under the class filter. Groups empty under the filter get
// NaN rows/columns and are listed in `undefined`.
struct DivergenceMatrix {
    std::vector<std::string> labels;
    Matrix values;
    std::vector<std::string> undefined;
};

inline DivergenceMatrix group_score_divergences(std::span<const LabeledScore> scores,
                                                const PairGroupAssignment& assignment,
                                                ClassFilter filter = ClassFilter::impostor) {
    const std::size_t k = assignment.group_labels.size();
    std::vector<std::vector<double>> samples(k);
    for (std::size_t g = 0; g < k; ++g)
        for (std::size_t idx : assignment.members[g]) {
            const auto& s = scores[idx];
            if (filter == ClassFilter::all || (filter == ClassFilter::genuine) == s.is_genuine)
                samples[g].push_back(s.score);
        }

    DivergenceMatrix out;
    out.labels = assignment.group_labels;
    out.values = Matrix(k, k, 0.0);
    for (std::size_t g = 0; g < k; ++g)
        if (samples[g].empty()) out.undefined.push_back(assignment.group_labels[g]);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) {
            double v = (samples[i].empty() || samples[j].empty())
                           ? std::numeric_limits<double>::quiet_NaN()
                           : wasserstein_1d(samples[i], samples[j]);
            out.values(i, j) = v;
            out.values(j, i) = v;
        }
    return out;
}

}  // namespace fdi
