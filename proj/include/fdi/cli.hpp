#pragma once

// Command-line surface. Subcommands:
//
//   analyze  — single-threshold analysis: per-group metrics, disparities,
//              disagreement index, score divergences, optional bootstrap.
//   sweep    — the same across a threshold grid, plus a plot series file.
//   compare  — two models side by side over a shared grid and partition.
//   synth    — generate a synthetic score file from a spec or a named fixture.
//   group    — partition inspection: group sizes and dropped identities.
//
// Configuration comes from flags or from a JSON config file (--config); a
// key present in both is an error, not a precedence rule.

#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fdi/core.hpp"
#include "fdi/disagreement.hpp"
#include "fdi/grouping.hpp"
#include "fdi/io.hpp"
#include "fdi/metrics.hpp"
#include "fdi/synth.hpp"
#include "fdi/verification.hpp"

namespace fdi::cli {

namespace detail {

// Flags shared by the analysis-style subcommands.
struct CommonOpts {
    std::string scores_path;
    std::string embeddings_path;
    std::string pairs_protocol = "exhaustive";
    bool proxy_groups = false;
    std::string group_map_path;
    std::string intersect_spec;
    double alpha = 0.5;
    std::string cross_group = "exclude";
    std::string non_alpha = "drop";
    std::string rank_orientation = "raw";
    std::string class_filter = "impostor";
    std::uint64_t min_genuine = 1;
    std::uint64_t min_impostor = 1;
    std::uint64_t seed = 0;
    std::string out = "fdi_report";
    std::string format = "structured";
};

inline void add_input_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--scores", o.scores_path, "Score file (identity_a,identity_b,score,is_genuine)");
    cmd->add_option("--embeddings", o.embeddings_path, "Embedding file (identity_id,d0,d1,...)");
    cmd->add_option("--pairs-protocol", o.pairs_protocol,
                    "Pair construction for embeddings: exhaustive or sampled[:cap]");
}

inline void add_partition_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_flag("--proxy-groups", o.proxy_groups, "Partition by first letter of identity");
    cmd->add_option("--group-map", o.group_map_path, "Identity-to-group mapping file");
    cmd->add_option("--intersect", o.intersect_spec,
                    "Intersection of two sources, e.g. proxy,map.csv or a.csv,b.csv");
    cmd->add_option("--non-alpha", o.non_alpha,
                    "Identities not starting with A-Z: reject, drop, or other");
}

inline void add_policy_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--alpha", o.alpha, "Weight of value vs rank disagreement, in [0,1]");
    cmd->add_option("--cross-group", o.cross_group,
                    "Impostor pairs spanning two groups: exclude or duplicate");
    cmd->add_option("--rank-orientation", o.rank_orientation, "raw or oriented");
    cmd->add_option("--class-filter", o.class_filter,
                    "Scores entering the divergence matrix: genuine, impostor, or all");
    cmd->add_option("--min-genuine", o.min_genuine, "Validity: minimum genuine pairs per group");
    cmd->add_option("--min-impostor", o.min_impostor, "Validity: minimum impostor pairs per group");
    cmd->add_option("--seed", o.seed, "Seed for sampling and bootstrap");
}

inline void add_output_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--out", o.out, "Output path stem");
    cmd->add_option("--format", o.format, "structured or tabular");
}

// Loads --config JSON and replays its keys as --key=value tokens, erroring
// on any key that was also given on the command line.
inline std::vector<std::string> apply_config_file(const std::vector<std::string>& args) {
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw Error("--config: missing path");
            config_path = args[i + 1];
        } else if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
        }
    }
    if (config_path.empty()) return args;

    auto in = fdi::detail::open_in(config_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("config '" + config_path + "': " + e.what());
    }
    if (!j.is_object()) throw Error("config '" + config_path + "': expected a JSON object");

    std::vector<std::string> extended = args;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string flag = "--" + it.key();
        for (const auto& a : args)
            if (a == flag || a.rfind(flag + "=", 0) == 0)
                throw Error("config key '" + it.key() +
                            "' is also set on the command line; set it in one place");
        std::string value;
        if (it.value().is_string()) value = it.value().get<std::string>();
        else if (it.value().is_boolean()) value = it.value().get<bool>() ? "true" : "false";
        else value = it.value().dump();
        extended.push_back(flag + "=" + value);
    }
    return extended;
}

struct LoadedInput {
    std::vector<LabeledScore> scores;
    std::string input_description;
    std::string pairs_protocol_description;
};

inline LoadedInput load_scores(const CommonOpts& o) {
    const bool have_scores = !o.scores_path.empty();
    const bool have_embeddings = !o.embeddings_path.empty();
    if (have_scores == have_embeddings)
        throw Error("exactly one of --scores or --embeddings is required");
    LoadedInput in;
    if (have_scores) {
        in.scores = read_scores(o.scores_path);
        in.input_description = "scores:" + o.scores_path;
    } else {
        auto embeddings = read_embeddings(o.embeddings_path);
        auto protocol = PairProtocol::parse(o.pairs_protocol);
        protocol.seed = o.seed;
        in.scores = build_pairs(embeddings, protocol);
        in.input_description = "embeddings:" + o.embeddings_path;
        in.pairs_protocol_description = o.pairs_protocol;
    }
    return in;
}

inline std::set<std::string> identities_of(std::span<const LabeledScore> scores) {
    std::set<std::string> ids;
    for (const auto& s : scores) {
        ids.insert(s.identity_a);
        ids.insert(s.identity_b);
    }
    return ids;
}

struct BuiltPartition {
    GroupPartition partition;
    std::string source_description;
    std::vector<std::string> dropped;  // input identities outside the partition
};

inline GroupPartition partition_from_source(const std::string& source,
                                            const std::set<std::string>& identities,
                                            NonAlphaPolicy non_alpha) {
    if (source == "proxy") return proxy_partition(identities, non_alpha).partition;
    return read_group_map(source, std::filesystem::path(source).stem().string());
}

inline BuiltPartition build_partition(const CommonOpts& o,
                                      const std::set<std::string>& identities) {
    int sources = (o.proxy_groups ? 1 : 0) + (o.group_map_path.empty() ? 0 : 1) +
                  (o.intersect_spec.empty() ? 0 : 1);
    if (sources != 1)
        throw Error("exactly one of --proxy-groups, --group-map, or --intersect is required");
    NonAlphaPolicy non_alpha = parse_non_alpha_policy(o.non_alpha);

    std::optional<GroupPartition> partition;
    std::string description;
    if (o.proxy_groups) {
        partition = proxy_partition(identities, non_alpha).partition;
        description = "proxy";
    } else if (!o.group_map_path.empty()) {
        partition = read_group_map(o.group_map_path,
                                   std::filesystem::path(o.group_map_path).stem().string());
        description = "map:" + o.group_map_path;
    } else {
        auto comma = o.intersect_spec.find(',');
        if (comma == std::string::npos)
            throw Error("--intersect: expected two comma-separated sources");
        std::string a = o.intersect_spec.substr(0, comma);
        std::string b = o.intersect_spec.substr(comma + 1);
        partition = intersect_partitions(partition_from_source(a, identities, non_alpha),
                                         partition_from_source(b, identities, non_alpha));
        description = "intersect:" + o.intersect_spec;
    }

    BuiltPartition out{std::move(*partition), std::move(description), {}};
    for (const auto& id : identities)
        if (out.partition.group_of(id) == GroupPartition::npos) out.dropped.push_back(id);
    return out;
}

inline RunMetadata make_metadata(const CommonOpts& o, const LoadedInput& in,
                                 const BuiltPartition& bp, const std::string& command) {
    RunMetadata m;
    m.command = command;
    m.input = in.input_description;
    m.partition_source = bp.source_description;
    m.partition_name = bp.partition.name();
    m.pairs_protocol = in.pairs_protocol_description;
    m.alpha = o.alpha;
    m.cross_group_policy = o.cross_group;
    m.non_alpha_policy = o.non_alpha;
    m.rank_orientation = o.rank_orientation;
    m.divergence_class_filter = o.class_filter;
    m.min_genuine = o.min_genuine;
    m.min_impostor = o.min_impostor;
    m.seed = o.seed;
    return m;
}

inline void check_label(const std::string& label, const std::string& flag) {
    if (label.empty()) throw Error(flag + ": empty label");
    if (label.find_first_of(",\n\r") != std::string::npos)
        throw Error(flag + ": label '" + label + "' contains a delimiter character");
}

inline std::vector<GroupScoreSpec> read_synth_spec(const std::filesystem::path& path) {
    auto in = fdi::detail::open_in(path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("synth spec '" + path.string() + "': " + e.what());
    }
    if (!j.is_object() || !j.contains("groups") || !j["groups"].is_array())
        throw Error("synth spec '" + path.string() + "': expected {\"groups\": [...]}");

    auto parse_dist = [&](const nlohmann::json& d, const std::string& where) {
        if (!d.is_object() || !d.contains("family"))
            throw Error(where + ": expected {family, location, scale}");
        DistSpec spec;
        spec.family = DistSpec::parse_family(d["family"].get<std::string>());
        spec.location = d.value("location", 0.0);
        spec.scale = d.value("scale", 0.0);
        return spec;
    };

    std::vector<GroupScoreSpec> specs;
    for (const auto& g : j["groups"]) {
        const std::string where = "synth spec group " + format_count(specs.size());
        GroupScoreSpec s;
        if (!g.contains("label")) throw Error(where + ": missing label");
        s.group_label = g["label"].get<std::string>();
        check_label(s.group_label, where);
        if (!g.contains("genuine") || !g.contains("impostor"))
            throw Error(where + ": missing genuine/impostor distribution");
        s.genuine_dist = parse_dist(g["genuine"], where + " genuine");
        s.impostor_dist = parse_dist(g["impostor"], where + " impostor");
        std::int64_t ng = g.value("n_genuine", std::int64_t{0});
        std::int64_t ni = g.value("n_impostor", std::int64_t{0});
        if (ng < 0 || ni < 0) throw Error(where + ": counts must be >= 0");
        s.n_genuine = static_cast<std::uint64_t>(ng);
        s.n_impostor = static_cast<std::uint64_t>(ni);
        s.validate();
        specs.push_back(std::move(s));
    }
    return specs;
}

struct AnalysisProducts {
    AnalysisReport report;
    std::optional<SweepSeries> series;
};

inline AnalysisProducts run_analysis(const CommonOpts& o, const std::string& command,
                                     std::optional<double> tau,
                                     const std::optional<std::string>& grid_text,
                                     std::uint64_t bootstrap_n) {
    if (!(o.alpha >= 0.0 && o.alpha <= 1.0)) throw Error("--alpha must be in [0, 1]");
    auto in = load_scores(o);
    auto bp = build_partition(o, identities_of(in.scores));
    auto cross = parse_cross_group_policy(o.cross_group);
    auto orientation = parse_rank_orientation(o.rank_orientation);
    auto filter = parse_class_filter(o.class_filter);
    ValidityPolicy validity{o.min_genuine, o.min_impostor};

    auto assignment = assign_pairs(in.scores, bp.partition, cross);

    AnalysisProducts products;
    products.report.meta = make_metadata(o, in, bp, command);
    products.report.meta.tau = tau;
    products.report.meta.grid = grid_text;
    products.report.exclusions.dropped_identities = bp.dropped;
    products.report.exclusions.cross_group_excluded = assignment.cross_group_excluded;
    products.report.exclusions.unknown_identity_pairs = assignment.unknown_identity;

    if (tau) {
        SweepEntry entry;
        entry.tau = *tau;
        entry.table = group_metrics(in.scores, assignment, *tau, validity);
        entry.disparity = disparities(*entry.table);
        entry.disagreement =
            fdi_index(MetricMatrix::from_table(*entry.table), o.alpha, orientation);
        products.report.entries.push_back(std::move(entry));
        if (bootstrap_n > 0) {
            products.report.meta.bootstrap_resamples = bootstrap_n;
            products.report.bootstrap = bootstrap_fdi(in.scores, assignment, *tau, o.alpha,
                                                      bootstrap_n, o.seed, validity,
                                                      orientation);
        }
    } else {
        ThresholdGrid grid = ThresholdGrid::parse(*grid_text);
        SweepSeries series =
            sweep(in.scores, assignment, grid, o.alpha, validity, orientation);
        products.report.entries = series.entries;
        for (const auto& e : series.entries)
            if (!e.valid()) products.report.exclusions.failed_taus.push_back(e.tau);
        products.series = std::move(series);
    }
    products.report.score_divergence = group_score_divergences(in.scores, assignment, filter);
    return products;
}

}  // namespace detail

// Runs the CLI on `args` (without the program name). Returns the exit code.
inline int run(std::vector<std::string> args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    CLI::App app{"Fairness metric disagreement analysis for verification scores"};
    app.require_subcommand(1);

    detail::CommonOpts opts;
    std::string config_path;  // consumed by apply_config_file; registered so CLI11 accepts it

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Single-threshold fairness analysis");
    double analyze_tau = 0.5;
    std::uint64_t bootstrap_n = 0;
    std::string model_label;
    detail::add_input_flags(analyze, opts);
    detail::add_partition_flags(analyze, opts);
    detail::add_policy_flags(analyze, opts);
    detail::add_output_flags(analyze, opts);
    auto* tau_opt = analyze->add_option("--tau", analyze_tau, "Decision threshold");
    analyze->add_option("--bootstrap", bootstrap_n, "Bootstrap resamples (0 = off)");
    analyze->add_option("--model-label", model_label, "Label recorded in report metadata");
    analyze->add_option("--config", config_path, "JSON config file");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "Threshold-grid fairness analysis");
    std::string grid_text;
    detail::CommonOpts sweep_opts;
    std::string sweep_model_label;
    detail::add_input_flags(sweep_cmd, sweep_opts);
    detail::add_partition_flags(sweep_cmd, sweep_opts);
    detail::add_policy_flags(sweep_cmd, sweep_opts);
    detail::add_output_flags(sweep_cmd, sweep_opts);
    auto* grid_opt = sweep_cmd->add_option("--grid", grid_text, "Thresholds start:end:step");
    sweep_cmd->add_option("--model-label", sweep_model_label, "Label recorded in report metadata");
    sweep_cmd->add_option("--config", config_path, "JSON config file");

    // compare
    auto* compare_cmd = app.add_subcommand("compare", "Two models over a shared grid");
    detail::CommonOpts cmp_opts;
    std::string scores_a, scores_b, label_a = "model_a", label_b = "model_b", cmp_grid;
    compare_cmd->add_option("--scores-a", scores_a, "Score file of the first model")->required();
    compare_cmd->add_option("--scores-b", scores_b, "Score file of the second model")->required();
    compare_cmd->add_option("--label-a", label_a, "Label of the first model");
    compare_cmd->add_option("--label-b", label_b, "Label of the second model");
    compare_cmd->add_option("--grid", cmp_grid, "Thresholds start:end:step")->required();
    detail::add_partition_flags(compare_cmd, cmp_opts);
    detail::add_policy_flags(compare_cmd, cmp_opts);
    detail::add_output_flags(compare_cmd, cmp_opts);
    compare_cmd->add_option("--config", config_path, "JSON config file");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic score file");
    std::string synth_spec_path, synth_fixture, synth_out = "synth_scores.csv";
    std::uint64_t synth_seed = 0;
    bool synth_seed_given = false;
    synth_cmd->add_option("--spec", synth_spec_path, "JSON group-distribution spec");
    synth_cmd->add_option("--fixture", synth_fixture,
                          "Named fixture: opposing-conclusions, threshold-flip, agreement, "
                          "graded-disparity");
    synth_cmd->add_option("--seed", synth_seed, "Dataset seed")
        ->each([&](const std::string&) { synth_seed_given = true; });
    synth_cmd->add_option("--out", synth_out, "Output score file");
    synth_cmd->add_option("--config", config_path, "JSON config file");

    // group
    auto* group_cmd = app.add_subcommand("group", "Inspect a partition: sizes and drops");
    detail::CommonOpts group_opts;
    detail::add_input_flags(group_cmd, group_opts);
    detail::add_partition_flags(group_cmd, group_opts);
    group_cmd->add_option("--seed", group_opts.seed, "Seed for sampled pair construction");
    group_cmd->add_option("--config", config_path, "JSON config file");

    try {
        args = detail::apply_config_file(args);
        // CLI11 wants argv order reversed for its vector-parse entry point.
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);

        if (analyze->parsed()) {
            if (tau_opt->count() == 0) throw Error("analyze: --tau is required");
            auto products =
                detail::run_analysis(opts, "analyze", analyze_tau, std::nullopt, bootstrap_n);
            products.report.meta.model_label = model_label;
            auto written =
                write_report(products.report, parse_report_format(opts.format), opts.out);
            const auto& e = products.report.entries.front();
            out << "tau " << format_real(e.tau) << ": K=" << e.table->rows.size()
                << " fdi=" << format_real(e.disagreement->fdi) << '\n';
            if (products.report.bootstrap)
                out << "bootstrap: point " << format_real(products.report.bootstrap->point)
                    << " ci [" << format_real(products.report.bootstrap->ci_low) << ", "
                    << format_real(products.report.bootstrap->ci_high) << "]\n";
            for (const auto& p : written) out << "wrote " << p.string() << '\n';
            return 0;
        }
        if (sweep_cmd->parsed()) {
            if (grid_opt->count() == 0) throw Error("sweep: --grid is required");
            auto products =
                detail::run_analysis(sweep_opts, "sweep", std::nullopt, grid_text, 0);
            products.report.meta.model_label = sweep_model_label;
            auto format = parse_report_format(sweep_opts.format);
            auto written = write_report(products.report, format, sweep_opts.out);
            std::filesystem::path plot_path = sweep_opts.out + "_plot_series.csv";
            write_plot_series(*products.series, plot_path);
            written.push_back(plot_path);
            std::size_t valid = 0;
            for (const auto& e : products.series->entries)
                if (e.valid()) ++valid;
            out << "sweep: " << valid << "/" << products.series->entries.size()
                << " thresholds valid\n";
            for (const auto& p : written) out << "wrote " << p.string() << '\n';
            return 0;
        }
        if (compare_cmd->parsed()) {
            detail::check_label(label_a, "--label-a");
            detail::check_label(label_b, "--label-b");
            auto run_side = [&](const std::string& path) {
                detail::CommonOpts side = cmp_opts;
                side.scores_path = path;
                return detail::run_analysis(side, "compare", std::nullopt, cmp_grid, 0);
            };
            auto pa = run_side(scores_a);
            auto pb = run_side(scores_b);
            auto table = compare_models(*pa.series, *pb.series, label_a, label_b);
            RunMetadata meta = pa.report.meta;
            meta.input = "scores:" + scores_a + ";scores:" + scores_b;
            meta.model_label = label_a + ";" + label_b;
            auto written = write_comparison(table, meta, parse_report_format(cmp_opts.format),
                                            cmp_opts.out);
            out << table.range_a.label << " " << format_real(table.range_a.fdi_max) << " - "
                << format_real(table.range_a.fdi_min) << '\n';
            out << table.range_b.label << " " << format_real(table.range_b.fdi_max) << " - "
                << format_real(table.range_b.fdi_min) << '\n';
            for (const auto& p : written) out << "wrote " << p.string() << '\n';
            return 0;
        }
        if (synth_cmd->parsed()) {
            const bool have_spec = !synth_spec_path.empty();
            const bool have_fixture = !synth_fixture.empty();
            if (have_spec == have_fixture)
                throw Error("synth: exactly one of --spec or --fixture is required");
            std::vector<GroupScoreSpec> specs;
            std::uint64_t seed = synth_seed;
            if (have_fixture) {
                Fixture f = fixture_by_name(synth_fixture);
                specs = f.specs;
                if (!synth_seed_given) seed = f.seed;
            } else {
                specs = detail::read_synth_spec(synth_spec_path);
            }
            SynthDataset ds = generate(specs, seed);
            write_scores(synth_out, ds.scores);
            out << "seed " << format_count(ds.seed) << '\n';
            out << "wrote " << synth_out << " (" << ds.scores.size() << " pairs)\n";
            return 0;
        }
        if (group_cmd->parsed()) {
            // partition inspection needs identities only; an embedding file
            // is read directly, skipping pair construction
            const bool have_scores = !group_opts.scores_path.empty();
            const bool have_embeddings = !group_opts.embeddings_path.empty();
            if (have_scores == have_embeddings)
                throw Error("exactly one of --scores or --embeddings is required");
            std::set<std::string> ids;
            if (have_scores) {
                for (const auto& s : read_scores(group_opts.scores_path)) {
                    ids.insert(s.identity_a);
                    ids.insert(s.identity_b);
                }
            } else {
                for (const auto& e : read_embeddings(group_opts.embeddings_path))
                    ids.insert(e.identity);
            }
            auto bp = detail::build_partition(group_opts, ids);
            out << "partition " << bp.partition.name() << ": K="
                << bp.partition.size() << '\n';
            for (const auto& g : bp.partition.groups())
                out << g.label << "," << g.identities.size() << '\n';
            out << "dropped," << bp.dropped.size() << '\n';
            for (const auto& id : bp.dropped) out << "dropped_identity," << id << '\n';
            return 0;
        }
        throw Error("no subcommand given");
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            out << app.help();
            return 0;
        }
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace fdi::cli
