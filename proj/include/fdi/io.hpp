#pragma once

// File formats and report emission. All files are UTF-8, comma-delimited
// where tabular, newline = '\n'. Reals are serialized with the shortest
// representation that round-trips the exact double, so rewriting a file from
// the same data is byte-identical and score files reload exactly.
//
//   score file:     identity_a,identity_b,score,is_genuine
//   embedding file: identity_id,d0,d1,...
//   group map:      identity_id,group
//   plot series:    tau,metric,scope,value
//
// The structured report is a single JSON document; its schema is versioned
// with the tool (top-level schema_version).

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdi/core.hpp"
#include "fdi/disagreement.hpp"
#include "fdi/grouping.hpp"
#include "fdi/metrics.hpp"
#include "fdi/verification.hpp"

namespace fdi {

inline constexpr const char* kSchemaVersion = "1";
inline constexpr const char* kToolVersion = "0.1.0";

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

inline std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

inline double parse_real(const std::string& text, const std::string& where) {
    try {
        std::size_t used = 0;
        double v = std::stod(text, &used);
        if (used != text.size()) throw Error(where + ": trailing characters in '" + text + "'");
        return v;
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        throw Error(where + ": cannot parse '" + text + "' as a real number");
    }
}

inline void check_identity_field(const std::string& id, const std::string& where) {
    if (id.empty()) throw Error(where + ": empty identity");
    if (id.find_first_of(",\n\r") != std::string::npos)
        throw Error(where + ": identity '" + id + "' contains a delimiter character");
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    return out;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "' for reading");
    return in;
}

}  // namespace detail

inline std::vector<LabeledScore> read_scores(const std::filesystem::path& path) {
    auto in = detail::open_in(path);
    std::string line;
    if (!std::getline(in, line))
        throw Error(path.string() + ": empty file (expected header)");
    if (detail::strip_cr(line) != "identity_a,identity_b,score,is_genuine")
        throw Error(path.string() + ":1: unknown header '" + detail::strip_cr(line) +
                    "' (expected identity_a,identity_b,score,is_genuine)");

    std::vector<LabeledScore> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        const std::string where = path.string() + ":" + format_count(lineno);
        auto fields = detail::split_csv_line(line);
        if (fields.size() != 4)
            throw Error(where + ": expected 4 fields, got " + format_count(fields.size()));
        LabeledScore s;
        s.identity_a = fields[0];
        s.identity_b = fields[1];
        detail::check_identity_field(s.identity_a, where);
        detail::check_identity_field(s.identity_b, where);
        s.score = detail::parse_real(fields[2], where);
        if (!std::isfinite(s.score) || s.score < -1.0 || s.score > 1.0)
            throw Error(where + ": score " + fields[2] + " outside [-1, 1]");
        if (fields[3] == "1") s.is_genuine = true;
        else if (fields[3] == "0") s.is_genuine = false;
        else throw Error(where + ": is_genuine must be 0 or 1, got '" + fields[3] + "'");
        if (s.is_genuine && s.identity_a != s.identity_b)
            throw Error(where + ": genuine pair with different identities '" +
                        s.identity_a + "' and '" + s.identity_b + "'");
        out.push_back(std::move(s));
    }
    if (out.empty()) throw Error(path.string() + ": no records after header");
    return out;
}

inline void write_scores(const std::filesystem::path& path,
                         std::span<const LabeledScore> scores) {
    auto out = detail::open_out(path);
    out << "identity_a,identity_b,score,is_genuine\n";
    for (const auto& s : scores) {
        detail::check_identity_field(s.identity_a, path.string());
        detail::check_identity_field(s.identity_b, path.string());
        if (!std::isfinite(s.score) || s.score < -1.0 || s.score > 1.0)
            throw Error(path.string() + ": score " + format_real(s.score) +
                        " outside [-1, 1]");
        out << s.identity_a << ',' << s.identity_b << ',' << format_real(s.score) << ','
            << (s.is_genuine ? '1' : '0') << '\n';
    }
}

inline std::vector<Embedding> read_embeddings(const std::filesystem::path& path) {
    auto in = detail::open_in(path);
    std::string line;
    if (!std::getline(in, line))
        throw Error(path.string() + ": empty file (expected header)");
    auto header = detail::split_csv_line(detail::strip_cr(line));
    if (header.size() < 2 || header[0] != "identity_id")
        throw Error(path.string() + ":1: unknown header (expected identity_id,d0,d1,...)");
    for (std::size_t i = 1; i < header.size(); ++i)
        if (header[i] != "d" + format_count(i - 1))
            throw Error(path.string() + ":1: unknown header column '" + header[i] + "'");
    const std::size_t dim = header.size() - 1;

    std::vector<Embedding> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        const std::string where = path.string() + ":" + format_count(lineno);
        auto fields = detail::split_csv_line(line);
        if (fields.size() != dim + 1)
            throw Error(where + ": record '" + fields[0] + "' has " +
                        format_count(fields.size() - 1) + " components, expected " +
                        format_count(dim));
        Embedding e;
        e.identity = fields[0];
        detail::check_identity_field(e.identity, where);
        for (std::size_t i = 1; i < fields.size(); ++i) {
            double v = detail::parse_real(fields[i], where);
            if (!std::isfinite(v))
                throw Error(where + ": record '" + e.identity + "' has non-finite component");
            e.vec.push_back(v);
        }
        out.push_back(std::move(e));
    }
    if (out.empty()) throw Error(path.string() + ": no records after header");
    return out;
}

inline void write_embeddings(const std::filesystem::path& path,
                             std::span<const Embedding> embeddings) {
    if (embeddings.empty()) throw Error("write_embeddings: nothing to write");
    auto out = detail::open_out(path);
    out << "identity_id";
    for (std::size_t i = 0; i < embeddings[0].vec.size(); ++i) out << ",d" << format_count(i);
    out << '\n';
    for (const auto& e : embeddings) {
        out << e.identity;
        for (double v : e.vec) out << ',' << format_real(v);
        out << '\n';
    }
}

// Explicit identity -> group mapping, the alternative to the first-letter
// proxy rule. Duplicate rows are allowed when consistent.
inline GroupPartition read_group_map(const std::filesystem::path& path,
                                     const std::string& partition_name = "mapping") {
    auto in = detail::open_in(path);
    std::string line;
    if (!std::getline(in, line))
        throw Error(path.string() + ": empty file (expected header)");
    if (detail::strip_cr(line) != "identity_id,group")
        throw Error(path.string() + ":1: unknown header (expected identity_id,group)");

    std::map<std::string, std::set<std::string>> groups;
    std::map<std::string, std::string> seen;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        const std::string where = path.string() + ":" + format_count(lineno);
        auto fields = detail::split_csv_line(line);
        if (fields.size() != 2)
            throw Error(where + ": expected 2 fields, got " + format_count(fields.size()));
        detail::check_identity_field(fields[0], where);
        if (fields[1].empty()) throw Error(where + ": empty group label");
        auto [it, inserted] = seen.emplace(fields[0], fields[1]);
        if (!inserted && it->second != fields[1])
            throw Error(where + ": identity '" + fields[0] + "' mapped to both '" +
                        it->second + "' and '" + fields[1] + "'");
        groups[fields[1]].insert(fields[0]);
    }
    if (groups.empty()) throw Error(path.string() + ": empty mapping");
    std::vector<GroupPartition::Group> gs;
    for (auto& [label, ids] : groups) gs.push_back({label, std::move(ids)});
    return GroupPartition(partition_name, std::move(gs));
}

// ---------------------------------------------------------------------------
// Analysis report
// ---------------------------------------------------------------------------

struct RunMetadata {
    std::string command;
    std::string input;
    std::string model_label;
    std::string partition_source;
    std::string partition_name;
    std::string pairs_protocol;
    double alpha = 0.5;
    std::optional<double> tau;
    std::optional<std::string> grid;
    std::string cross_group_policy = "exclude";
    std::string non_alpha_policy = "drop";
    std::string rank_orientation = "raw";
    std::string divergence_class_filter = "impostor";
    std::uint64_t min_genuine = 1;
    std::uint64_t min_impostor = 1;
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> bootstrap_resamples;
};

struct ExclusionDiagnostics {
    std::vector<std::string> dropped_identities;
    std::size_t cross_group_excluded = 0;
    std::size_t unknown_identity_pairs = 0;
    std::vector<double> failed_taus;
};

// Everything a run produced. Each number is recomputable from the inputs
// plus this metadata.
struct AnalysisReport {
    RunMetadata meta;
    std::vector<SweepEntry> entries;  // one for analyze, grid-many for sweep
    std::optional<DivergenceMatrix> score_divergence;
    ExclusionDiagnostics exclusions;
    std::optional<BootstrapResult> bootstrap;
};

enum class ReportFormat { structured, tabular };

inline ReportFormat parse_report_format(const std::string& s) {
    if (s == "structured") return ReportFormat::structured;
    if (s == "tabular") return ReportFormat::tabular;
    throw Error("format '" + s + "': expected structured or tabular");
}

namespace detail {

using ojson = nlohmann::ordered_json;

inline ojson matrix_json(const Matrix& m) {
    ojson rows = ojson::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        ojson row = ojson::array();
        for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline ojson meta_json(const RunMetadata& m) {
    ojson j;
    j["command"] = m.command;
    j["input"] = m.input;
    if (!m.model_label.empty()) j["model_label"] = m.model_label;
    j["partition_source"] = m.partition_source;
    j["partition_name"] = m.partition_name;
    if (!m.pairs_protocol.empty()) j["pairs_protocol"] = m.pairs_protocol;
    j["alpha"] = m.alpha;
    if (m.tau) j["tau"] = *m.tau;
    if (m.grid) j["grid"] = *m.grid;
    j["cross_group_policy"] = m.cross_group_policy;
    j["non_alpha_policy"] = m.non_alpha_policy;
    j["rank_orientation"] = m.rank_orientation;
    j["divergence_class_filter"] = m.divergence_class_filter;
    j["min_genuine"] = m.min_genuine;
    j["min_impostor"] = m.min_impostor;
    j["seed"] = m.seed;
    if (m.bootstrap_resamples) j["bootstrap_resamples"] = *m.bootstrap_resamples;
    return j;
}

inline ojson entry_json(const SweepEntry& e) {
    ojson j;
    j["tau"] = e.tau;
    if (!e.valid()) {
        j["failure"] = e.failure;
        return j;
    }
    ojson rows = ojson::array();
    for (const auto& r : e.table->rows) {
        ojson row;
        row["group"] = r.label;
        row["accuracy"] = r.acc;
        row["fpr"] = r.fpr;
        row["fnr"] = r.fnr;
        row["n_genuine"] = r.n_genuine;
        row["n_impostor"] = r.n_impostor;
        rows.push_back(std::move(row));
    }
    j["group_metrics"] = std::move(rows);
    if (!e.table->excluded.empty()) j["excluded_groups"] = e.table->excluded;
    ojson d;
    d["delta_acc"] = e.disparity->delta_acc;
    d["delta_fpr"] = e.disparity->delta_fpr;
    d["delta_fnr"] = e.disparity->delta_fnr;
    d["acc_min"] = e.disparity->acc_min;
    j["disparities"] = std::move(d);
    ojson g;
    g["metrics"] = e.disagreement->metric_labels;
    g["groups"] = e.disagreement->group_labels;
    g["normalized"] = matrix_json(e.disagreement->normalized);
    g["ranks"] = matrix_json(e.disagreement->rank_matrix);
    g["value_disagreement"] = matrix_json(e.disagreement->value_disagreement);
    g["rank_disagreement"] = matrix_json(e.disagreement->rank_disagreement);
    g["alpha"] = e.disagreement->alpha;
    g["mean_value_disagreement"] = e.disagreement->mean_value_disagreement;
    g["mean_rank_disagreement"] = e.disagreement->mean_rank_disagreement;
    g["fdi"] = e.disagreement->fdi;
    j["disagreement"] = std::move(g);
    return j;
}

}  // namespace detail

// Structured format: one JSON document at `<stem>.json`. Tabular format:
// one CSV per artifact at `<stem>_group_metrics.csv`, `<stem>_disparities.csv`
// and `<stem>_fdi.csv`. Returns the paths written.
inline std::vector<std::filesystem::path> write_report(const AnalysisReport& r,
                                                       ReportFormat format,
                                                       const std::filesystem::path& stem) {
    std::vector<std::filesystem::path> written;
    if (format == ReportFormat::structured) {
        detail::ojson j;
        j["tool"] = "fdi";
        j["tool_version"] = kToolVersion;
        j["schema_version"] = kSchemaVersion;
        j["metadata"] = detail::meta_json(r.meta);
        detail::ojson entries = detail::ojson::array();
        for (const auto& e : r.entries) entries.push_back(detail::entry_json(e));
        j["results"] = std::move(entries);
        if (r.score_divergence) {
            detail::ojson d;
            d["groups"] = r.score_divergence->labels;
            d["wasserstein"] = detail::matrix_json(r.score_divergence->values);
            if (!r.score_divergence->undefined.empty())
                d["undefined_groups"] = r.score_divergence->undefined;
            j["score_divergence"] = std::move(d);
        }
        detail::ojson ex;
        if (!r.exclusions.dropped_identities.empty())
            ex["dropped_identities"] = r.exclusions.dropped_identities;
        ex["cross_group_excluded_pairs"] = r.exclusions.cross_group_excluded;
        ex["unknown_identity_pairs"] = r.exclusions.unknown_identity_pairs;
        if (!r.exclusions.failed_taus.empty()) ex["failed_taus"] = r.exclusions.failed_taus;
        j["exclusions"] = std::move(ex);
        if (r.bootstrap) {
            detail::ojson b;
            b["point"] = r.bootstrap->point;
            b["ci_low"] = r.bootstrap->ci_low;
            b["ci_high"] = r.bootstrap->ci_high;
            b["n_resamples"] = r.bootstrap->n_resamples;
            b["failed_resamples"] = r.bootstrap->failed_resamples;
            j["bootstrap"] = std::move(b);
        }
        auto path = stem;
        path += ".json";
        auto out = detail::open_out(path);
        out << j.dump(2) << '\n';
        written.push_back(path);
        return written;
    }

    // tabular
    {
        auto path = stem;
        path += "_group_metrics.csv";
        auto out = detail::open_out(path);
        out << "tau,group,accuracy,fpr,fnr,n_genuine,n_impostor\n";
        for (const auto& e : r.entries) {
            if (!e.valid()) continue;
            for (const auto& row : e.table->rows)
                out << format_real(e.tau) << ',' << row.label << ',' << format_real(row.acc)
                    << ',' << format_real(row.fpr) << ',' << format_real(row.fnr) << ','
                    << format_count(row.n_genuine) << ',' << format_count(row.n_impostor)
                    << '\n';
        }
        written.push_back(path);
    }
    {
        auto path = stem;
        path += "_disparities.csv";
        auto out = detail::open_out(path);
        out << "tau,delta_acc,delta_fpr,delta_fnr,acc_min\n";
        for (const auto& e : r.entries) {
            if (!e.valid()) continue;
            out << format_real(e.tau) << ',' << format_real(e.disparity->delta_acc) << ','
                << format_real(e.disparity->delta_fpr) << ','
                << format_real(e.disparity->delta_fnr) << ','
                << format_real(e.disparity->acc_min) << '\n';
        }
        written.push_back(path);
    }
    {
        auto path = stem;
        path += "_fdi.csv";
        auto out = detail::open_out(path);
        out << "tau,fdi\n";
        for (const auto& e : r.entries) {
            if (!e.valid()) continue;
            out << format_real(e.tau) << ',' << format_real(e.disagreement->fdi) << '\n';
        }
        written.push_back(path);
    }
    {
        auto path = stem;
        path += "_exclusions.csv";
        auto out = detail::open_out(path);
        out << "kind,detail,count\n";
        out << "dropped_identities,," << r.exclusions.dropped_identities.size() << '\n';
        out << "cross_group_excluded_pairs,," << r.exclusions.cross_group_excluded << '\n';
        out << "unknown_identity_pairs,," << r.exclusions.unknown_identity_pairs << '\n';
        for (const auto& e : r.entries) {
            if (!e.table) continue;
            for (const auto& g : e.table->excluded)
                out << "excluded_group,tau=" << format_real(e.tau) << ";group=" << g << ",1\n";
        }
        for (double tau : r.exclusions.failed_taus)
            out << "failed_tau," << format_real(tau) << ",1\n";
        written.push_back(path);
    }
    return written;
}

// Long-form series sufficient to re-plot every per-group rate, disparity,
// worst-group accuracy, and index value of a sweep.
inline void write_plot_series(const SweepSeries& s, const std::filesystem::path& path) {
    auto out = detail::open_out(path);
    out << "tau,metric,scope,value\n";
    for (const auto& e : s.entries) {
        if (!e.valid()) continue;
        const std::string tau = format_real(e.tau);
        for (const auto& row : e.table->rows) {
            out << tau << ",accuracy," << row.label << ',' << format_real(row.acc) << '\n';
            out << tau << ",fpr," << row.label << ',' << format_real(row.fpr) << '\n';
            out << tau << ",fnr," << row.label << ',' << format_real(row.fnr) << '\n';
        }
        out << tau << ",delta_acc,aggregate," << format_real(e.disparity->delta_acc) << '\n';
        out << tau << ",delta_fpr,aggregate," << format_real(e.disparity->delta_fpr) << '\n';
        out << tau << ",delta_fnr,aggregate," << format_real(e.disparity->delta_fnr) << '\n';
        out << tau << ",acc_min,aggregate," << format_real(e.disparity->acc_min) << '\n';
        out << tau << ",fdi,aggregate," << format_real(e.disagreement->fdi) << '\n';
    }
}

// Cross-model comparison report. Tabular emits the per-model range table
// ("<max> - <min>") plus the per-threshold index pairs backing it.
inline std::vector<std::filesystem::path> write_comparison(const ComparisonTable& t,
                                                           const RunMetadata& meta,
                                                           ReportFormat format,
                                                           const std::filesystem::path& stem) {
    std::vector<std::filesystem::path> written;
    auto range_string = [](const ComparisonTable::ModelRange& r) {
        return format_real(r.fdi_max) + " - " + format_real(r.fdi_min);
    };
    if (format == ReportFormat::structured) {
        detail::ojson j;
        j["tool"] = "fdi";
        j["tool_version"] = kToolVersion;
        j["schema_version"] = kSchemaVersion;
        j["metadata"] = detail::meta_json(meta);
        detail::ojson models = detail::ojson::array();
        for (const auto* r : {&t.range_a, &t.range_b}) {
            detail::ojson m;
            m["model"] = r->label;
            m["fdi_range"] = range_string(*r);
            m["fdi_max"] = r->fdi_max;
            m["fdi_min"] = r->fdi_min;
            models.push_back(std::move(m));
        }
        j["model_ranges"] = std::move(models);
        detail::ojson rows = detail::ojson::array();
        for (const auto& row : t.rows) {
            detail::ojson rj;
            rj["tau"] = row.tau;
            rj["fdi_a"] = row.fdi_a;
            rj["fdi_b"] = row.fdi_b;
            rj["diff"] = row.diff;
            rows.push_back(std::move(rj));
        }
        j["per_threshold"] = std::move(rows);
        if (!t.skipped_taus.empty()) j["skipped_taus"] = t.skipped_taus;
        auto path = stem;
        path += ".json";
        auto out = detail::open_out(path);
        out << j.dump(2) << '\n';
        written.push_back(path);
        return written;
    }

    {
        auto path = stem;
        path += "_model_ranges.csv";
        auto out = detail::open_out(path);
        out << "model,fdi_range,fdi_max,fdi_min\n";
        for (const auto* r : {&t.range_a, &t.range_b})
            out << r->label << ',' << range_string(*r) << ',' << format_real(r->fdi_max)
                << ',' << format_real(r->fdi_min) << '\n';
        written.push_back(path);
    }
    {
        auto path = stem;
        path += "_fdi_by_tau.csv";
        auto out = detail::open_out(path);
        out << "tau,fdi_a,fdi_b,diff\n";
        for (const auto& row : t.rows)
            out << format_real(row.tau) << ',' << format_real(row.fdi_a) << ','
                << format_real(row.fdi_b) << ',' << format_real(row.diff) << '\n';
        written.push_back(path);
    }
    return written;
}

}  // namespace fdi
