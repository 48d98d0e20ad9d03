// Experiment harness: seeded scene synthesis, size estimation, certification
// backends, efficiency sweeps, and brute-force cross-checks, with CSV/JSON
// output. See README for the config file schema.

#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ibcd/ibcd.hpp"

namespace {

using nlohmann::json;

struct CommonOptions {
    ibcd::ExperimentConfig config;
    std::string format = "json";
    std::string out;
};

void add_common_flags(CLI::App* cmd, CommonOptions& opt) {
    auto& cfg = opt.config;
    cmd->add_option("--width", cfg.width, "Image width in pixels")->capture_default_str();
    cmd->add_option("--height", cfg.height, "Image height in pixels")->capture_default_str();
    cmd->add_option("--stride", cfg.stride, "Mask sliding stride")->capture_default_str();
    cmd->add_option("--interval", cfg.reduction_interval, "Mask size reduction interval")
        ->capture_default_str();
    cmd->add_option("--eta-min", cfg.eta_min, "Smallest mask size (0 = stride)")
        ->capture_default_str();
    cmd->add_option("--sizes", cfg.patch_sizes, "Patch sizes under test")
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--scenes", cfg.scenes_per_size, "Scenes per patch size (and clean scenes)")
        ->capture_default_str();
    cmd->add_option("--seed", cfg.seed, "Seed fixing every random draw")->capture_default_str();
    cmd->add_option("--tau", cfg.tau, "Object fraction that must stay visible")
        ->capture_default_str();
    cmd->add_option("--classes", cfg.num_classes, "Label universe size")->capture_default_str();
    cmd->add_option("--policy", cfg.attacker_policy, "Attacker policy")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, ibcd::AttackerPolicy>{
                {"constant", ibcd::AttackerPolicy::ConstantWrong},
                {"hash", ibcd::AttackerPolicy::RegionHash}},
            CLI::ignore_case))
        ->default_str("constant");
    cmd->add_option("--backend", cfg.backend, "Certification backend")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, ibcd::CertBackend>{
                {"doublemask", ibcd::CertBackend::DoubleMask},
                {"band", ibcd::CertBackend::BandSmoothing},
                {"block", ibcd::CertBackend::BlockSmoothing}},
            CLI::ignore_case))
        ->default_str("doublemask");
    cmd->add_option("--ablation-width", cfg.ablation_width, "Smoothing ablation width b")
        ->capture_default_str();
    cmd->add_flag("--sliding", cfg.sliding_opt, "Enable the sliding space optimization");
    cmd->add_flag("--per-image", cfg.per_image_certification,
                  "Certify with per-image estimates instead of the aggregate");
    cmd->add_option("--format", opt.format, "Output format")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
    cmd->add_option("--out", opt.out, "Output path (default: stdout)");
}

// "--sizes 0" means a clean-only corpus.
void normalize(CommonOptions& opt) {
    auto& sizes = opt.config.patch_sizes;
    if (sizes.size() == 1 && sizes[0] == 0) sizes.clear();
}

void write_output(const std::string& text, const CommonOptions& opt) {
    if (opt.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream file(opt.out, std::ios::binary);
    if (!file) throw std::runtime_error("cannot open output file: " + opt.out);
    file << text;
}

std::string csv_cell(const json& value) {
    if (value.is_null()) return "na";
    if (value.is_boolean()) return value.get<bool>() ? "1" : "0";
    if (value.is_number_integer()) return std::to_string(value.get<long long>());
    if (value.is_number_unsigned()) return std::to_string(value.get<unsigned long long>());
    if (value.is_number_float()) return ibcd::detail::fixed6(value.get<double>());
    return value.get<std::string>();
}

json config_meta(const ibcd::ExperimentConfig& cfg) {
    return json{
        {"seed", cfg.seed},
        {"config_hash", cfg.hash()},
        {"backend", ibcd::to_string(cfg.backend)},
        {"attacker_policy", ibcd::to_string(cfg.attacker_policy)},
        {"width", cfg.width},
        {"height", cfg.height},
        {"stride", cfg.stride},
        {"reduction_interval", cfg.reduction_interval},
        {"eta_min", cfg.effective_eta_min()},
        {"ablation_width", cfg.ablation_width},
        {"scenes_per_size", cfg.scenes_per_size},
        {"num_classes", cfg.num_classes},
        {"tau", cfg.tau},
        {"sliding_opt", cfg.sliding_opt},
        {"per_image_certification", cfg.per_image_certification},
    };
}

/// Rows share a fixed column order so the CSV schema is stable.
void emit_rows(const std::string& schema, const CommonOptions& opt,
               const std::vector<std::string>& columns, const json& rows,
               const std::vector<std::string>& trailer = {}) {
    if (opt.format == "json") {
        json j{{"schema", schema}, {"config", config_meta(opt.config)}, {"rows", rows}};
        write_output(j.dump(2) + "\n", opt);
        return;
    }
    std::string text = "# " + schema + "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) text += (i ? "," : "") + columns[i];
    text += "\n";
    for (const json& row : rows) {
        for (std::size_t i = 0; i < columns.size(); ++i)
            text += (i ? "," : "") + csv_cell(row.at(columns[i]));
        text += "\n";
    }
    for (const std::string& line : trailer) text += "# " + line + "\n";
    write_output(text, opt);
}

std::vector<int> parse_range_list(const std::string& text) {
    std::vector<int> values;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        const std::string token = text.substr(pos, comma - pos);
        const std::size_t dots = token.find("..");
        if (dots == std::string::npos) {
            values.push_back(std::stoi(token));
        } else {
            const int lo = std::stoi(token.substr(0, dots));
            const int hi = std::stoi(token.substr(dots + 2));
            for (int v = lo; v <= hi; ++v) values.push_back(v);
        }
        pos = comma + 1;
    }
    if (values.empty()) throw ibcd::invalid_config_error("empty interval list");
    return values;
}

// ---------------------------------------------------------------------------
// Subcommands.
// ---------------------------------------------------------------------------

int run_estimate(const CommonOptions& opt) {
    const auto& cfg = opt.config;
    const ibcd::SceneCorpus corpus = ibcd::synth_scenes(cfg, cfg.seed);
    const ibcd::MaskSchedule schedule = ibcd::build_schedule(
        cfg.width, cfg.stride, cfg.reduction_interval, cfg.effective_eta_min());

    std::vector<ibcd::EstimationResult> results(corpus.scenes.size());
    ibcd::parallel_for(corpus.scenes.size(), [&](std::size_t i) {
        ibcd::WorstCaseClassifier clf;
        results[i] = ibcd::estimate_patch_size(clf, corpus.scenes[i], schedule,
                                               {cfg.sliding_opt});
    });

    json rows = json::array();
    for (std::size_t i = 0; i < corpus.scenes.size(); ++i) {
        const ibcd::Scene& scene = corpus.scenes[i];
        rows.push_back(json{
            {"scene_id", i},
            {"actual_size", scene.attacked() ? scene.patch->side() : 0},
            {"estimated_size", results[i].estimated_size},
            {"iterations", results[i].iterations},
            {"queries", results[i].query_count},
            {"searches", results[i].search_count},
        });
    }
    emit_rows("ibcd-estimate-v1", opt,
              {"scene_id", "actual_size", "estimated_size", "iterations", "queries", "searches"},
              rows);
    return 0;
}

int run_certify(const CommonOptions& opt, int size) {
    const auto& cfg = opt.config;
    const ibcd::SceneCorpus corpus = ibcd::synth_scenes(cfg, cfg.seed);
    const std::vector<ibcd::Scene> clean = corpus.clean_scenes();
    const ibcd::CertificationBackend backend{cfg.backend, cfg.stride, cfg.ablation_width};

    ibcd::WorstCaseClassifier clf;
    json rows = json::array();
    std::size_t correct = 0;
    std::size_t certified = 0;
    const double clean_acc = ibcd::detail::clean_accuracy_for_size(clean, size, backend);
    for (std::size_t i = 0; i < clean.size(); ++i) {
        const std::span<const ibcd::Scene> one(&clean[i], 1);
        const bool scene_correct =
            ibcd::detail::clean_accuracy_for_size(one, size, backend) > 0.5;
        const bool scene_certified = ibcd::certified_accuracy(clf, one, size, backend) > 0.5;
        correct += scene_correct;
        certified += scene_certified;
        rows.push_back(json{{"scene_id", i},
                            {"recovered_correct", scene_correct},
                            {"certified", scene_certified}});
    }
    const double certified_acc = static_cast<double>(certified) / clean.size();
    (void)correct;
    emit_rows("ibcd-certify-v1", opt, {"scene_id", "recovered_correct", "certified"}, rows,
              {"size=" + std::to_string(size),
               "clean_accuracy=" + ibcd::detail::fixed6(clean_acc),
               "certified_accuracy=" + ibcd::detail::fixed6(certified_acc)});
    return 0;
}

int run_smooth(const CommonOptions& opt, int size) {
    const auto& cfg = opt.config;
    const ibcd::AblationKind kind = cfg.backend == ibcd::CertBackend::BlockSmoothing
                                        ? ibcd::AblationKind::Block
                                        : ibcd::AblationKind::Band;
    const ibcd::SceneCorpus corpus = ibcd::synth_scenes(cfg, cfg.seed);
    const std::vector<ibcd::Scene> clean = corpus.clean_scenes();
    const auto ablations =
        ibcd::enumerate_ablations(cfg.width, cfg.height, cfg.ablation_width, kind);

    ibcd::WorstCaseClassifier clf;
    json rows = json::array();
    for (std::size_t i = 0; i < clean.size(); ++i) {
        const ibcd::VoteTally tally = ibcd::vote_tally(clf, clean[i], ablations);
        const ibcd::Label top = tally.top_class();
        json row{
            {"scene_id", i},
            {"top_class", top},
            {"correct", top == clean[i].true_label},
            {"n_top", tally.counts[top]},
            {"n_runner_up", tally.runner_up_count(top)},
            {"max_certifiable", ibcd::max_certifiable_patch(tally, kind, cfg.ablation_width)},
        };
        row["certified"] = size > 0
                               ? json(ibcd::is_certified(tally, kind, size, cfg.ablation_width, top))
                               : json(nullptr);
        rows.push_back(std::move(row));
    }
    emit_rows("ibcd-smooth-v1", opt,
              {"scene_id", "top_class", "correct", "n_top", "n_runner_up", "max_certifiable",
               "certified"},
              rows);
    return 0;
}

int run_ibcd_cmd(const CommonOptions& opt) {
    const ibcd::Report report = ibcd::run_ibcd(opt.config);
    if (opt.format == "csv")
        write_output(ibcd::report_to_csv(report), opt);
    else
        write_output(ibcd::report_to_json(report).dump(2) + "\n", opt);
    std::cerr << "ibcd: " << report.rows.size() << " size rows in "
              << ibcd::detail::fixed6(report.wall_seconds) << "s\n";
    return 0;
}

int run_bench(const CommonOptions& opt, const std::string& intervals_text) {
    const auto& cfg = opt.config;
    const std::vector<int> intervals = parse_range_list(intervals_text);
    const ibcd::SceneCorpus corpus = ibcd::synth_scenes(cfg, cfg.seed);
    std::vector<ibcd::Scene> attacked;
    for (const ibcd::Scene& s : corpus.scenes)
        if (s.attacked()) attacked.push_back(s);
    if (attacked.empty()) throw ibcd::invalid_input_error("bench needs attacked scenes");

    json rows = json::array();
    for (const int interval : intervals) {
        const ibcd::MaskSchedule schedule =
            ibcd::build_schedule(cfg.width, cfg.stride, interval, cfg.effective_eta_min());
        for (const bool sliding : {false, true}) {
            std::vector<ibcd::EstimationResult> results(attacked.size());
            ibcd::parallel_for(attacked.size(), [&](std::size_t i) {
                ibcd::WorstCaseClassifier clf;
                results[i] = ibcd::estimate_patch_size(clf, attacked[i], schedule, {sliding});
            });
            double searches = 0.0;
            double queries = 0.0;
            double estimated = 0.0;
            for (const auto& r : results) {
                searches += static_cast<double>(r.search_count);
                queries += static_cast<double>(r.query_count);
                estimated += r.estimated_size;
            }
            rows.push_back(json{
                {"interval", interval},
                {"sliding_opt", sliding},
                {"mean_searches", searches / attacked.size()},
                {"mean_queries", queries / attacked.size()},
                {"mean_estimated", estimated / attacked.size()},
            });
        }
    }
    emit_rows("ibcd-bench-v1", opt,
              {"interval", "sliding_opt", "mean_searches", "mean_queries", "mean_estimated"},
              rows);
    return 0;
}

int run_oracle(const CommonOptions& opt) {
    const auto& cfg = opt.config;
    const ibcd::SceneCorpus corpus = ibcd::synth_scenes(cfg, cfg.seed);
    const ibcd::MaskSchedule schedule = ibcd::build_schedule(
        cfg.width, cfg.stride, cfg.reduction_interval, cfg.effective_eta_min());

    json rows = json::array();
    bool any_failure = false;
    auto add_check = [&](const std::string& name, std::size_t cases, std::size_t failures) {
        rows.push_back(json{{"check", name}, {"cases", cases}, {"failures", failures}});
        if (failures > 0) any_failure = true;
    };

    // Estimation vs exhaustive coverage search, with and without the
    // sliding optimization.
    std::size_t mismatches = 0;
    std::size_t sliding_mismatches = 0;
    std::size_t transition_violations = 0;
    std::size_t cases = 0;
    for (const ibcd::Scene& scene : corpus.scenes) {
        if (!scene.attacked()) continue;
        ++cases;
        ibcd::WorstCaseClassifier clf;
        const auto plain = ibcd::estimate_patch_size(clf, scene, schedule, {false});
        const auto sliding = ibcd::estimate_patch_size(clf, scene, schedule, {true});
        const int reference = ibcd::oracles::brute_force_estimate(scene, schedule);
        if (plain.estimated_size != reference) ++mismatches;
        if (sliding.estimated_size != plain.estimated_size) ++sliding_mismatches;
        bool seen_false = false;
        for (const bool sat : plain.sat_states) {
            if (!sat) seen_false = true;
            else if (seen_false) ++transition_violations;
        }
    }
    add_check("estimate_matches_brute_force", cases, mismatches);
    add_check("sliding_opt_neutral", cases, sliding_mismatches);
    add_check("single_sat_transition", cases, transition_violations);

    // Guaranteed-coverage bound across the schedule sizes.
    std::size_t coverage_cases = 0;
    std::size_t coverage_failures = 0;
    for (const int eta : schedule.sizes) {
        const int v = ibcd::max_coverable_patch(eta, cfg.stride);
        if (v < 1) continue;
        ++coverage_cases;
        const auto mask_set = ibcd::generate_mask_set(cfg.width, cfg.height, eta, cfg.stride);
        if (!ibcd::oracles::coverage_oracle(mask_set, v, cfg.width, cfg.height).covered)
            ++coverage_failures;
    }
    add_check("coverage_at_guaranteed_bound", coverage_cases, coverage_failures);

    emit_rows("ibcd-oracle-v1", opt, {"check", "cases", "failures"}, rows);
    return any_failure ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Black-box certified defense against adversarial patches: "
                 "size estimation plus masking/smoothing certification"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Config file (INI format; flags override it)");
    app.footer("Environment: IBCD_WORKERS overrides the worker count for scene-level parallelism.");

    CommonOptions est_opt, cert_opt, smooth_opt, ibcd_opt, bench_opt, oracle_opt;
    int cert_size = 0;
    int smooth_size = 0;
    std::string bench_intervals = "1..7";

    CLI::App* est = app.add_subcommand("estimate", "Stage 1 only: per-scene size estimates");
    add_common_flags(est, est_opt);

    CLI::App* cert = app.add_subcommand("certify", "Stage 2 only: certification at a given size");
    add_common_flags(cert, cert_opt);
    cert->add_option("--size", cert_size, "Patch size to certify against")->required();

    CLI::App* smooth = app.add_subcommand("smooth", "Derandomized smoothing tallies and bounds");
    add_common_flags(smooth, smooth_opt);
    smooth->add_option("--size", smooth_size, "Patch size for the certified column (0 = skip)");

    CLI::App* full = app.add_subcommand("ibcd", "Full two-stage run producing the report");
    add_common_flags(full, ibcd_opt);

    CLI::App* bench = app.add_subcommand("bench", "Efficiency sweep over reduction intervals "
                                                  "and the sliding optimization");
    add_common_flags(bench, bench_opt);
    bench->add_option("--intervals", bench_intervals, "Intervals to sweep, e.g. 1..7 or 1,2,4")
        ->capture_default_str();

    CLI::App* oracle = app.add_subcommand("oracle", "Brute-force cross-checks");
    add_common_flags(oracle, oracle_opt);

    CLI11_PARSE(app, argc, argv);

    try {
        for (CommonOptions* opt :
             {&est_opt, &cert_opt, &smooth_opt, &ibcd_opt, &bench_opt, &oracle_opt})
            normalize(*opt);
        if (app.got_subcommand(est)) return run_estimate(est_opt);
        if (app.got_subcommand(cert)) return run_certify(cert_opt, cert_size);
        if (app.got_subcommand(smooth)) return run_smooth(smooth_opt, smooth_size);
        if (app.got_subcommand(full)) return run_ibcd_cmd(ibcd_opt);
        if (app.got_subcommand(bench)) return run_bench(bench_opt, bench_intervals);
        if (app.got_subcommand(oracle)) return run_oracle(oracle_opt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
