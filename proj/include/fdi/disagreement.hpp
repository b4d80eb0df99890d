#pragma once

// The fairness disagreement index over a metric-by-group matrix, in four
// steps:
//
//   1. normalize   — per metric row, min-max rescale over groups to [0,1];
//                    a constant row maps to all zeros.
//   2. value term  — D_ij = (1/K) sum_k |norm_i(k) - norm_j(k)|.
//   3. rank term   — groups ranked ascending by raw value with fractional
//                    (average) ranks for ties; R_ij = (1/K) sum_k
//                    |rank_i(k) - rank_j(k)|, i.e. the Spearman footrule
//                    over groups divided by K. R is deliberately not
//                    rescaled to [0,1]; its ceiling is floor(K^2/2)/K.
//   4. index       — mean over unordered metric pairs of
//                    alpha*D_ij + (1-alpha)*R_ij.
//
// Zero means every metric pair agrees in both values and rankings; the index
// can exceed 1 through the rank term (ceiling alpha + (1-alpha)*floor(K^2/2)/K).

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fdi/core.hpp"
#include "fdi/grouping.hpp"
#include "fdi/metrics.hpp"
#include "fdi/rng.hpp"
#include "fdi/verification.hpp"

namespace fdi {

// Raw ranking orders groups ascending by value regardless of whether a high
// value is good or bad for the group; oriented ranking flips higher-is-better
// metrics so that rank 1 is always the least-affected group.
enum class RankOrientation { raw, oriented };

inline RankOrientation parse_rank_orientation(const std::string& s) {
    if (s == "raw") return RankOrientation::raw;
    if (s == "oriented") return RankOrientation::oriented;
    throw Error("rank orientation '" + s + "': expected raw or oriented");
}

struct MetricDef {
    std::string name;
    bool higher_is_better = false;  // consulted only under oriented ranking
};

// N metric rows over K group columns; entry (i,k) is metric i evaluated on
// group k.
struct MetricMatrix {
    std::vector<MetricDef> metrics;
    std::vector<std::string> groups;
    Matrix values;

    std::size_t n() const { return metrics.size(); }
    std::size_t k() const { return groups.size(); }

    void validate() const {
        if (metrics.size() < 2) throw Error("metric matrix: need at least 2 metrics");
        if (groups.size() < 2) throw Error("metric matrix: need at least 2 groups");
        if (values.rows() != metrics.size() || values.cols() != groups.size())
            throw Error("metric matrix: shape mismatch");
        if (!values.all_finite()) throw Error("metric matrix: non-finite entry");
    }

    // Default metric set: the per-group FPR, FNR, ACC rows of a metrics table.
    static MetricMatrix from_table(const GroupMetricsTable& t) {
        MetricMatrix m;
        m.metrics = {{"fpr", false}, {"fnr", false}, {"accuracy", true}};
        m.values = Matrix(3, t.rows.size());
        for (std::size_t g = 0; g < t.rows.size(); ++g) {
            m.groups.push_back(t.rows[g].label);
            m.values(0, g) = t.rows[g].fpr;
            m.values(1, g) = t.rows[g].fnr;
            m.values(2, g) = t.rows[g].acc;
        }
        return m;
    }
};

inline Matrix normalize(const MetricMatrix& m) {
    m.validate();
    Matrix out(m.n(), m.k());
    for (std::size_t i = 0; i < m.n(); ++i) {
        double lo = m.values(i, 0), hi = m.values(i, 0);
        for (std::size_t c = 1; c < m.k(); ++c) {
            lo = std::min(lo, m.values(i, c));
            hi = std::max(hi, m.values(i, c));
        }
        for (std::size_t c = 0; c < m.k(); ++c)
            out(i, c) = (hi == lo) ? 0.0 : (m.values(i, c) - lo) / (hi - lo);
    }
    return out;
}

// Fractional (average) ranks in [1, K], ascending. A fully tied row ranks
// every group at (K+1)/2.
inline Matrix ranks(const MetricMatrix& m, RankOrientation orientation = RankOrientation::raw) {
    m.validate();
    Matrix out(m.n(), m.k());
    for (std::size_t i = 0; i < m.n(); ++i) {
        const double sign =
            (orientation == RankOrientation::oriented && m.metrics[i].higher_is_better)
                ? -1.0
                : 1.0;
        for (std::size_t c = 0; c < m.k(); ++c) {
            std::size_t less = 0, equal = 0;
            for (std::size_t d = 0; d < m.k(); ++d) {
                double vc = sign * m.values(i, c), vd = sign * m.values(i, d);
                if (vd < vc) ++less;
                if (vd == vc) ++equal;
            }
            out(i, c) = static_cast<double>(less + 1) + static_cast<double>(equal - 1) * 0.5;
        }
    }
    return out;
}

namespace detail {

inline Matrix pairwise_mean_abs_diff(const Matrix& rows) {
    Matrix out(rows.rows(), rows.rows(), 0.0);
    for (std::size_t i = 0; i < rows.rows(); ++i)
        for (std::size_t j = i + 1; j < rows.rows(); ++j) {
            double sum = 0.0;
            for (std::size_t c = 0; c < rows.cols(); ++c)
                sum += std::fabs(rows(i, c) - rows(j, c));
            double v = sum / static_cast<double>(rows.cols());
            out(i, j) = v;
            out(j, i) = v;
        }
    return out;
}

}  // namespace detail

inline Matrix value_disagreement(const Matrix& normalized) {
    return detail::pairwise_mean_abs_diff(normalized);
}

inline Matrix rank_disagreement(const MetricMatrix& m,
                                RankOrientation orientation = RankOrientation::raw) {
    return detail::pairwise_mean_abs_diff(ranks(m, orientation));
}

// Full decomposition of one index evaluation, enough to recompute every
// number in a report.
struct DisagreementResult {
    std::vector<std::string> metric_labels;
    std::vector<std::string> group_labels;
    Matrix normalized;              // N x K
    Matrix rank_matrix;             // N x K
    Matrix value_disagreement;      // N x N, symmetric, zero diagonal
    Matrix rank_disagreement;       // N x N, symmetric, zero diagonal
    double alpha = 0.5;
    double mean_value_disagreement = 0.0;  // mean D_ij over unordered pairs
    double mean_rank_disagreement = 0.0;   // mean R_ij over unordered pairs
    double fdi = 0.0;
};

inline DisagreementResult fdi_index(const MetricMatrix& m, double alpha = 0.5,
                                    RankOrientation orientation = RankOrientation::raw) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("fdi: alpha must be in [0, 1]");
    m.validate();

    DisagreementResult r;
    for (const auto& def : m.metrics) r.metric_labels.push_back(def.name);
    r.group_labels = m.groups;
    r.alpha = alpha;
    r.normalized = normalize(m);
    r.rank_matrix = ranks(m, orientation);
    r.value_disagreement = detail::pairwise_mean_abs_diff(r.normalized);
    r.rank_disagreement = detail::pairwise_mean_abs_diff(r.rank_matrix);

    double sum_d = 0.0, sum_r = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < m.n(); ++i)
        for (std::size_t j = i + 1; j < m.n(); ++j) {
            sum_d += r.value_disagreement(i, j);
            sum_r += r.rank_disagreement(i, j);
            ++pairs;
        }
    r.mean_value_disagreement = sum_d / static_cast<double>(pairs);
    r.mean_rank_disagreement = sum_r / static_cast<double>(pairs);
    r.fdi = alpha * r.mean_value_disagreement + (1.0 - alpha) * r.mean_rank_disagreement;
    return r;
}

// One grid threshold of a sweep. A threshold where the analysis is invalid
// keeps its slot with the failure diagnostic instead of being dropped.
struct SweepEntry {
    double tau = 0.0;
    std::optional<GroupMetricsTable> table;
    std::optional<DisparitySummary> disparity;
    std::optional<DisagreementResult> disagreement;
    std::string failure;

    bool valid() const { return table.has_value(); }
};

struct SweepSeries {
    std::vector<double> grid;
    std::vector<SweepEntry> entries;
    std::size_t failed_count = 0;
};

inline SweepSeries sweep(std::span<const LabeledScore> scores,
                         const PairGroupAssignment& assignment, const ThresholdGrid& grid,
                         double alpha = 0.5, const ValidityPolicy& validity = {},
                         RankOrientation orientation = RankOrientation::raw) {
    SweepSeries series;
    series.grid = grid.values();
    for (double tau : grid.values()) {
        SweepEntry entry;
        entry.tau = tau;
        try {
            entry.table = group_metrics(scores, assignment, tau, validity);
            entry.disparity = disparities(*entry.table);
            entry.disagreement = fdi_index(MetricMatrix::from_table(*entry.table), alpha,
                                           orientation);
        } catch (const Error& e) {
            entry.table.reset();
            entry.disparity.reset();
            entry.disagreement.reset();
            entry.failure = e.what();
            ++series.failed_count;
        }
        series.entries.push_back(std::move(entry));
    }
    if (series.failed_count == series.entries.size())
        throw Error("sweep: analysis invalid at every threshold (first failure: " +
                    series.entries.front().failure + ")");
    return series;
}

struct BootstrapResult {
    double point = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::uint64_t n_resamples = 0;
    std::uint64_t failed_resamples = 0;  // resamples still invalid after retries
};

namespace detail {

// Percentile with linear interpolation between order statistics
// (h = (B-1)p), over an already sorted vector.
inline double percentile(const std::vector<double>& sorted, double p) {
    if (sorted.size() == 1) return sorted[0];
    double h = static_cast<double>(sorted.size() - 1) * p;
    std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace detail

// Percentile-bootstrap confidence interval for the index at one threshold.
// Pairs are resampled with replacement within each (group, class) stratum,
// which preserves per-group class counts; each resample draws from its own
// stream derived from (seed, resample index). A resample that fails the
// validity policy is redrawn up to 8 times, then counted as failed.
inline BootstrapResult bootstrap_fdi(std::span<const LabeledScore> scores,
                                     const PairGroupAssignment& assignment, double tau,
                                     double alpha, std::uint64_t n_resamples,
                                     std::uint64_t seed, const ValidityPolicy& validity = {},
                                     RankOrientation orientation = RankOrientation::raw) {
    if (n_resamples < 1) throw Error("bootstrap_fdi: need at least 1 resample");

    GroupMetricsTable base_table = group_metrics(scores, assignment, tau, validity);
    BootstrapResult result;
    result.point = fdi_index(MetricMatrix::from_table(base_table), alpha, orientation).fdi;
    result.n_resamples = n_resamples;

    // Strata: per valid group, the genuine and impostor member scores.
    struct Stratum {
        std::vector<double> genuine;
        std::vector<double> impostor;
    };
    std::vector<Stratum> strata;
    std::vector<std::string> labels;
    for (std::size_t g = 0; g < assignment.group_labels.size(); ++g) {
        bool valid = std::none_of(base_table.excluded.begin(), base_table.excluded.end(),
                                  [&](const std::string& e) {
                                      return e == assignment.group_labels[g];
                                  });
        if (!valid) continue;
        Stratum st;
        for (std::size_t idx : assignment.members[g]) {
            const auto& s = scores[idx];
            (s.is_genuine ? st.genuine : st.impostor).push_back(s.score);
        }
        strata.push_back(std::move(st));
        labels.push_back(assignment.group_labels[g]);
    }

    constexpr int kRetries = 8;
    std::vector<double> draws;
    draws.reserve(n_resamples);
    for (std::uint64_t rep = 0; rep < n_resamples; ++rep) {
        Rng rng(derive_stream(seed, rep));
        bool ok = false;
        for (int attempt = 0; attempt <= kRetries && !ok; ++attempt) {
            GroupMetricsTable t;
            t.tau = tau;
            bool valid = true;
            for (std::size_t g = 0; g < strata.size(); ++g) {
                ConfusionCounts c;
                for (std::size_t i = 0; i < strata[g].genuine.size(); ++i) {
                    double v = strata[g].genuine[rng.below(strata[g].genuine.size())];
                    v >= tau ? ++c.tp : ++c.fn;
                }
                for (std::size_t i = 0; i < strata[g].impostor.size(); ++i) {
                    double v = strata[g].impostor[rng.below(strata[g].impostor.size())];
                    v >= tau ? ++c.fp : ++c.tn;
                }
                if (c.genuine_total() < validity.min_genuine ||
                    c.impostor_total() < validity.min_impostor) {
                    valid = false;
                    break;
                }
                Rates r = rates(c);
                t.rows.push_back({labels[g], r.fpr, r.fnr, r.acc, c.genuine_total(),
                                  c.impostor_total()});
            }
            if (!valid || t.rows.size() < 2) continue;
            draws.push_back(fdi_index(MetricMatrix::from_table(t), alpha, orientation).fdi);
            ok = true;
        }
        if (!ok) ++result.failed_resamples;
    }
    if (draws.empty())
        throw Error("bootstrap_fdi: every resample failed the validity policy");
    std::sort(draws.begin(), draws.end());
    result.ci_low = detail::percentile(draws, 0.025);
    result.ci_high = detail::percentile(draws, 0.975);
    return result;
}

// Side-by-side sweep comparison of two models: per-threshold index values
// plus each model's max-min range over the grid.
struct ComparisonTable {
    struct Row {
        double tau = 0.0;
        double fdi_a = 0.0;
        double fdi_b = 0.0;
        double diff = 0.0;  // fdi_a - fdi_b
    };
    struct ModelRange {
        std::string label;
        double fdi_max = 0.0;
        double fdi_min = 0.0;
    };

    std::string label_a;
    std::string label_b;
    std::vector<Row> rows;
    std::vector<double> skipped_taus;  // thresholds invalid in either series
    ModelRange range_a;
    ModelRange range_b;
};

inline ComparisonTable compare_models(const SweepSeries& series_a, const SweepSeries& series_b,
                                      const std::string& label_a, const std::string& label_b) {
    if (series_a.grid != series_b.grid)
        throw Error("compare_models: threshold grids differ");
    for (std::size_t i = 0; i < series_a.entries.size(); ++i) {
        const auto& ea = series_a.entries[i];
        const auto& eb = series_b.entries[i];
        if (ea.valid() && eb.valid() &&
            ea.table->rows.size() != eb.table->rows.size())
            throw Error("compare_models: group partitions differ at tau=" +
                        format_real(ea.tau));
        if (ea.valid() && eb.valid())
            for (std::size_t g = 0; g < ea.table->rows.size(); ++g)
                if (ea.table->rows[g].label != eb.table->rows[g].label)
                    throw Error("compare_models: group partitions differ at tau=" +
                                format_real(ea.tau));
    }

    ComparisonTable out;
    out.label_a = label_a;
    out.label_b = label_b;
    out.range_a.label = label_a;
    out.range_b.label = label_b;
    bool first = true;
    for (std::size_t i = 0; i < series_a.entries.size(); ++i) {
        const auto& ea = series_a.entries[i];
        const auto& eb = series_b.entries[i];
        if (!ea.valid() || !eb.valid()) {
            out.skipped_taus.push_back(series_a.grid[i]);
            continue;
        }
        double fa = ea.disagreement->fdi;
        double fb = eb.disagreement->fdi;
        out.rows.push_back({ea.tau, fa, fb, fa - fb});
        if (first) {
            out.range_a.fdi_max = out.range_a.fdi_min = fa;
            out.range_b.fdi_max = out.range_b.fdi_min = fb;
            first = false;
        } else {
            out.range_a.fdi_max = std::max(out.range_a.fdi_max, fa);
            out.range_a.fdi_min = std::min(out.range_a.fdi_min, fa);
            out.range_b.fdi_max = std::max(out.range_b.fdi_max, fb);
            out.range_b.fdi_min = std::min(out.range_b.fdi_min, fb);
        }
    }
    if (out.rows.empty()) throw Error("compare_models: no threshold valid in both series");
    return out;
}

}  // namespace fdi
