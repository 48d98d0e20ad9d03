#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ibcd/classifier.hpp"
#include "ibcd/config.hpp"
#include "ibcd/estimator.hpp"
#include "ibcd/geometry.hpp"
#include "ibcd/masking.hpp"
#include "ibcd/parallel.hpp"
#include "ibcd/scenes.hpp"
#include "ibcd/smoothing.hpp"

namespace ibcd {

struct CertificationBackend {
    CertBackend kind = CertBackend::DoubleMask;
    int stride = 5;          // double-mask backend
    int ablation_width = 4;  // smoothing backends
};

/// Two-mask correctness on the clean rendering: certified iff every ordered
/// mask pair keeps the prediction correct. The mask set must be able to cover
/// a patch of the claimed size at its stride.
inline bool certify_two_mask(ClassifierContract& clf, const Scene& scene, const MaskSet& mask_set,
                             int v) {
    const Scene clean = scene.clean_view();
    if (v == 0) return clf.classify(clean, {}) == scene.true_label;
    if (max_coverable_patch(mask_set.eta, mask_set.stride) < v)
        throw invalid_config_error("mask set cannot cover patches of the claimed size");
    for (const Mask& m0 : mask_set.masks)
        for (const Mask& m1 : mask_set.masks)
            if (clf.classify(clean, {m0.region, m1.region}) != scene.true_label) return false;
    return true;
}

/// Double-mask recovery prediction: keep the prior unless some disagreeing
/// mask survives the consistency check, in which case its consistent label
/// wins (first in grid order).
inline Label double_mask_recover(ClassifierContract& clf, const Scene& scene,
                                 const MaskSet& mask_set) {
    const Label y_prior = clf.classify(scene, {});
    const auto predictions = sweep_predictions(clf, scene, mask_set.masks);
    for (std::size_t i = 0; i < mask_set.masks.size(); ++i) {
        if (predictions[i] == y_prior) continue;
        const ConsistencyRecord rec = double_mask_check(clf, scene, mask_set.masks[i], mask_set);
        if (rec.cp) return *rec.y_con;
    }
    return y_prior;
}

inline double clean_accuracy(ClassifierContract& clf, std::span<const Scene> scenes,
                             const MaskSet& mask_set) {
    if (scenes.empty()) throw invalid_input_error("no scenes to evaluate");
    std::size_t correct = 0;
    for (const Scene& scene : scenes)
        if (double_mask_recover(clf, scene, mask_set) == scene.true_label) ++correct;
    return static_cast<double>(correct) / static_cast<double>(scenes.size());
}

/// Fraction of scenes provably correct under any patch of side v. A geometry
/// that cannot host the required mask set counts as not certified.
inline double certified_accuracy(ClassifierContract& clf, std::span<const Scene> scenes, int v,
                                 const CertificationBackend& backend) {
    if (scenes.empty()) throw invalid_input_error("no scenes to evaluate");
    if (v < 0) throw invalid_input_error("patch size must be non-negative");
    std::size_t certified = 0;
    for (const Scene& scene : scenes) {
        if (backend.kind == CertBackend::DoubleMask) {
            if (v == 0) {
                certified += clf.classify(scene.clean_view(), {}) == scene.true_label;
                continue;
            }
            const int eta = v + backend.stride - 1;
            if (eta > std::min(scene.width, scene.height)) continue;
            const MaskSet mask_set =
                generate_mask_set(scene.width, scene.height, eta, backend.stride);
            certified += certify_two_mask(clf, scene, mask_set, v);
        } else {
            const AblationKind kind =
                backend.kind == CertBackend::BandSmoothing ? AblationKind::Band : AblationKind::Block;
            const Scene clean = scene.clean_view();
            const auto ablations =
                enumerate_ablations(clean.width, clean.height, backend.ablation_width, kind);
            const VoteTally tally = vote_tally(clf, clean, ablations);
            const Label y = tally.top_class();
            if (y != scene.true_label) continue;
            if (v == 0) {
                ++certified;
                continue;
            }
            certified += is_certified(tally, kind, v, backend.ablation_width, y);
        }
    }
    return static_cast<double>(certified) / static_cast<double>(scenes.size());
}

/// Relative accuracy gap between the true-size and estimated-size runs.
inline double fluctuation_rate(double acc_white, double acc_black) {
    if (acc_white <= 0.0) throw undefined_rate_error("fluctuation undefined at zero accuracy");
    return std::abs(acc_white - acc_black) / acc_white;
}

// ---------------------------------------------------------------------------
// Full two-stage run.
// ---------------------------------------------------------------------------

struct ReportRow {
    int actual_size = 0;
    double estimated_mean = 0.0;
    int estimated_size = 0;  // ceiling of the mean
    double certified_acc_white = 0.0;
    double clean_acc_white = 0.0;
    double certified_acc_black = 0.0;
    double clean_acc_black = 0.0;
    std::optional<double> certified_fluctuation;
    std::optional<double> clean_fluctuation;
    double mean_queries = 0.0;
    double mean_searches = 0.0;
    std::vector<int> per_scene_estimates;
};

struct Report {
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    std::string backend;
    std::string attacker_policy;
    int width = 0;
    int height = 0;
    int stride = 0;
    int reduction_interval = 0;
    int eta_min = 0;
    int ablation_width = 0;
    int scenes_per_size = 0;
    int num_classes = 0;
    double tau = 0.0;
    bool sliding_opt = false;
    bool per_image_certification = false;
    double clean_baseline = 0.0;  // undefended accuracy on the clean batch
    std::vector<ReportRow> rows;
    double wall_seconds = 0.0;  // never serialized, so outputs stay byte-stable
};

namespace detail {

inline double clean_accuracy_for_size(std::span<const Scene> scenes, int v,
                                      const CertificationBackend& backend) {
    WorstCaseClassifier clf;
    if (backend.kind == CertBackend::DoubleMask) {
        if (scenes.empty()) throw invalid_input_error("no scenes to evaluate");
        if (v == 0) {
            std::size_t correct = 0;
            for (const Scene& s : scenes) correct += clf.classify(s, {}) == s.true_label;
            return static_cast<double>(correct) / static_cast<double>(scenes.size());
        }
        const int eta = v + backend.stride - 1;
        std::size_t correct = 0;
        for (const Scene& s : scenes) {
            if (eta > std::min(s.width, s.height)) continue;
            const MaskSet mask_set = generate_mask_set(s.width, s.height, eta, backend.stride);
            correct += double_mask_recover(clf, s, mask_set) == s.true_label;
        }
        return static_cast<double>(correct) / static_cast<double>(scenes.size());
    }
    // Smoothed prediction is the tally majority; the patch size plays no role
    // in the clean metric.
    const AblationKind kind =
        backend.kind == CertBackend::BandSmoothing ? AblationKind::Band : AblationKind::Block;
    std::size_t correct = 0;
    for (const Scene& s : scenes) {
        const auto ablations = enumerate_ablations(s.width, s.height, backend.ablation_width, kind);
        correct += vote_tally(clf, s, ablations).top_class() == s.true_label;
    }
    return static_cast<double>(correct) / static_cast<double>(scenes.size());
}

inline std::optional<double> safe_fluctuation(double white, double black) {
    if (white <= 0.0) return std::nullopt;
    return fluctuation_rate(white, black);
}

}  // namespace detail

inline Report run_ibcd(const ExperimentConfig& config) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();

    const SceneCorpus corpus = synth_scenes(config, config.seed);
    const MaskSchedule schedule = build_schedule(config.width, config.stride,
                                                 config.reduction_interval,
                                                 config.effective_eta_min());
    const std::vector<Scene> clean = corpus.clean_scenes();
    const CertificationBackend backend{config.backend, config.stride, config.ablation_width};

    Report report;
    report.seed = config.seed;
    report.config_hash = config.hash();
    report.backend = to_string(config.backend);
    report.attacker_policy = to_string(config.attacker_policy);
    report.width = config.width;
    report.height = config.height;
    report.stride = config.stride;
    report.reduction_interval = config.reduction_interval;
    report.eta_min = config.effective_eta_min();
    report.ablation_width = config.ablation_width;
    report.scenes_per_size = config.scenes_per_size;
    report.num_classes = config.num_classes;
    report.tau = config.tau;
    report.sliding_opt = config.sliding_opt;
    report.per_image_certification = config.per_image_certification;

    {
        WorstCaseClassifier clf;
        std::size_t correct = 0;
        for (const Scene& s : clean) correct += clf.classify(s, {}) == s.true_label;
        report.clean_baseline = static_cast<double>(correct) / static_cast<double>(clean.size());
    }

    for (const int v : config.patch_sizes) {
        const std::vector<Scene> attacked = corpus.attacked_scenes(v);
        ReportRow row;
        row.actual_size = v;

        // Stage 1: per-scene size estimation.
        std::vector<EstimationResult> results(attacked.size());
        parallel_for(attacked.size(), [&](std::size_t i) {
            WorstCaseClassifier clf;  // one instance per scene keeps accounting exact
            results[i] =
                estimate_patch_size(clf, attacked[i], schedule, {config.sliding_opt});
        });
        long long size_sum = 0;
        double query_sum = 0.0;
        double search_sum = 0.0;
        for (const EstimationResult& r : results) {
            row.per_scene_estimates.push_back(r.estimated_size);
            size_sum += r.estimated_size;
            query_sum += static_cast<double>(r.query_count);
            search_sum += static_cast<double>(r.search_count);
        }
        row.estimated_mean = static_cast<double>(size_sum) / static_cast<double>(results.size());
        row.estimated_size = aggregate_estimate(row.per_scene_estimates);
        row.mean_queries = query_sum / static_cast<double>(results.size());
        row.mean_searches = search_sum / static_cast<double>(results.size());

        // Stage 2: accuracy with the actual size (white-box reference) and the
        // estimated size (black-box defense).
        WorstCaseClassifier clf;
        row.clean_acc_white = detail::clean_accuracy_for_size(clean, v, backend);
        row.certified_acc_white = certified_accuracy(clf, clean, v, backend);
        row.clean_acc_black = detail::clean_accuracy_for_size(clean, row.estimated_size, backend);
        if (config.per_image_certification) {
            std::size_t certified = 0;
            for (std::size_t i = 0; i < attacked.size(); ++i) {
                const std::span<const Scene> one(&attacked[i], 1);
                certified +=
                    certified_accuracy(clf, one, row.per_scene_estimates[i], backend) > 0.5;
            }
            row.certified_acc_black =
                static_cast<double>(certified) / static_cast<double>(attacked.size());
        } else {
            row.certified_acc_black = certified_accuracy(clf, clean, row.estimated_size, backend);
        }
        row.certified_fluctuation =
            detail::safe_fluctuation(row.certified_acc_white, row.certified_acc_black);
        row.clean_fluctuation = detail::safe_fluctuation(row.clean_acc_white, row.clean_acc_black);
        report.rows.push_back(std::move(row));
    }

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

// ---------------------------------------------------------------------------
// Serialization. Schema version ibcd-report-v1; wall time deliberately absent.
// ---------------------------------------------------------------------------

inline constexpr const char* kReportSchema = "ibcd-report-v1";

namespace detail {

inline std::string fixed6(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", value);
    return buf;
}

}  // namespace detail

inline nlohmann::json report_to_json(const Report& report) {
    nlohmann::json j;
    j["schema"] = kReportSchema;
    j["config"] = {
        {"seed", report.seed},
        {"config_hash", report.config_hash},
        {"backend", report.backend},
        {"attacker_policy", report.attacker_policy},
        {"width", report.width},
        {"height", report.height},
        {"stride", report.stride},
        {"reduction_interval", report.reduction_interval},
        {"eta_min", report.eta_min},
        {"ablation_width", report.ablation_width},
        {"scenes_per_size", report.scenes_per_size},
        {"num_classes", report.num_classes},
        {"tau", report.tau},
        {"sliding_opt", report.sliding_opt},
        {"per_image_certification", report.per_image_certification},
    };
    j["clean_baseline"] = report.clean_baseline;
    j["rows"] = nlohmann::json::array();
    for (const ReportRow& row : report.rows) {
        nlohmann::json r = {
            {"actual_size", row.actual_size},
            {"estimated_mean", row.estimated_mean},
            {"estimated_size", row.estimated_size},
            {"certified_acc_white", row.certified_acc_white},
            {"clean_acc_white", row.clean_acc_white},
            {"certified_acc_black", row.certified_acc_black},
            {"clean_acc_black", row.clean_acc_black},
            {"mean_queries", row.mean_queries},
            {"mean_searches", row.mean_searches},
            {"per_scene_estimates", row.per_scene_estimates},
        };
        r["certified_fluctuation"] =
            row.certified_fluctuation ? nlohmann::json(*row.certified_fluctuation)
                                      : nlohmann::json(nullptr);
        r["clean_fluctuation"] = row.clean_fluctuation ? nlohmann::json(*row.clean_fluctuation)
                                                       : nlohmann::json(nullptr);
        j["rows"].push_back(std::move(r));
    }
    return j;
}

inline std::string report_to_csv(const Report& report) {
    std::string out;
    out += "# ";
    out += kReportSchema;
    out += "\n";
    out += "actual_size,certified_acc_white,clean_acc_white,estimated_mean,estimated_size,"
           "certified_acc_black,clean_acc_black,certified_fluctuation,clean_fluctuation,"
           "mean_queries,mean_searches\n";
    for (const ReportRow& row : report.rows) {
        out += std::to_string(row.actual_size);
        out += "," + detail::fixed6(row.certified_acc_white);
        out += "," + detail::fixed6(row.clean_acc_white);
        out += "," + detail::fixed6(row.estimated_mean);
        out += "," + std::to_string(row.estimated_size);
        out += "," + detail::fixed6(row.certified_acc_black);
        out += "," + detail::fixed6(row.clean_acc_black);
        out += ",";
        out += row.certified_fluctuation ? detail::fixed6(*row.certified_fluctuation) : "na";
        out += ",";
        out += row.clean_fluctuation ? detail::fixed6(*row.clean_fluctuation) : "na";
        out += "," + detail::fixed6(row.mean_queries);
        out += "," + detail::fixed6(row.mean_searches);
        out += "\n";
    }
    return out;
}

}  // namespace ibcd
