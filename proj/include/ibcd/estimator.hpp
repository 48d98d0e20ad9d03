#pragma once

#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "ibcd/classifier.hpp"
#include "ibcd/geometry.hpp"
#include "ibcd/masking.hpp"

namespace ibcd {

struct EstimationResult {
    int estimated_size = 0;  // 0 = judged clean
    int iterations = 0;
    std::uint64_t query_count = 0;   // every classifier call issued
    std::uint64_t search_count = 0;  // one-mask placements examined (what the sliding
                                     // space optimization reduces)
    std::vector<int> per_iteration_sizes;  // mask size per iteration, strictly descending
    std::vector<bool> sat_states;          // satisfiability state per iteration
    std::optional<Label> y_true_recovered;
    bool used_sliding_opt = false;
};

struct EstimatorOptions {
    bool sliding_opt = false;
};

/// Clean-image test: the input is judged clean when every prediction under a
/// single largest-size mask equals the prior prediction. A clean scene whose
/// object can hide entirely under one mask (tau > 0) is misdetected as
/// attacked; scene generation rules that case out.
inline bool detect_clean(ClassifierContract& clf, const Scene& scene, const MaskSet& largest_mask_set,
                         Label y_prior) {
    for (const Mask& m : largest_mask_set.masks)
        if (clf.classify(scene, {m.region}) != y_prior) return false;
    return true;
}

/// Mask sizes from the largest-coverage policy size down to eta_min, stepping
/// by the reduction interval (the final step may be shorter).
inline MaskSchedule build_schedule(int width, int stride, int interval, int eta_min) {
    if (stride < 1) throw invalid_config_error("stride must be at least 1");
    if (interval < 1) throw invalid_config_error("reduction interval must be at least 1");
    if (eta_min < stride)
        throw invalid_config_error("eta_min below the stride has no guaranteed coverage");
    const auto eta_max = eta_max_policy(width, width, stride);
    if (!eta_max) throw invalid_config_error("largest mask size would exceed the image");
    if (eta_min > *eta_max) throw invalid_config_error("eta_min exceeds the largest mask size");

    MaskSchedule schedule;
    schedule.stride = stride;
    schedule.reduction_interval = interval;
    int eta = *eta_max;
    while (eta > eta_min) {
        schedule.sizes.push_back(eta);
        eta -= interval;
    }
    schedule.sizes.push_back(eta_min);
    return schedule;
}

/// Masks of the next (smaller) size class that intersect the mask which
/// covered the patch in the previous iteration; only these need sweeping.
inline std::vector<Mask> sliding_space_filter(const Rect& hit_mask, const MaskSet& next_mask_set) {
    std::vector<Mask> filtered;
    for (const Mask& m : next_mask_set.masks)
        if (rect_intersects(m.region, hit_mask)) filtered.push_back(m);
    return filtered;
}

/// Iterative patch size estimation.
///
/// A prior prediction plus a largest-mask sweep decides clean vs attacked.
/// On the attacked path, mask sizes shrink along the schedule; each iteration
/// runs the search operation and keeps going while some consistency record
/// exists. The reference label is fixed by the first consistent record of
/// iteration 0. The search stops and returns the previous iteration's size
/// when a consistent record carries a different label, or when no record is
/// consistent; an exhausted schedule returns its last size.
inline EstimationResult estimate_patch_size(ClassifierContract& clf, const Scene& scene,
                                            const MaskSchedule& schedule,
                                            EstimatorOptions opts = {}) {
    if (schedule.sizes.empty()) throw invalid_config_error("schedule has no sizes");
    if (schedule.sizes.front() > std::min(scene.width, scene.height))
        throw invalid_config_error("schedule does not fit the scene");

    const std::uint64_t queries_before = clf.query_count();
    EstimationResult result;
    result.used_sliding_opt = opts.sliding_opt;

    std::optional<Label> y_true;
    auto finish = [&](int size) {
        result.estimated_size = size;
        result.y_true_recovered = y_true;
        result.query_count = clf.query_count() - queries_before;
        return result;
    };

    const Label y_prior = clf.classify(scene, {});
    MaskSet mask_set =
        generate_mask_set(scene.width, scene.height, schedule.sizes.front(), schedule.stride);

    // Clean detection doubles as iteration 0's first-round sweep.
    const std::vector<Label> largest_preds = sweep_predictions(clf, scene, mask_set.masks);
    result.search_count += mask_set.masks.size();
    bool clean = true;
    for (const Label y : largest_preds) {
        if (y != y_prior) {
            clean = false;
            break;
        }
    }
    if (clean) return finish(0);

    std::optional<Rect> hit;  // previous iteration's first covering mask
    auto previous_size = [&](std::size_t iteration) {
        if (iteration == 0)
            throw assumption_violation_error(
                "no largest-size mask produced a consistent prediction; "
                "the patch exceeds the admissible size bound");
        return result.per_iteration_sizes[iteration - 1];
    };

    for (std::size_t it = 0; it < schedule.sizes.size(); ++it) {
        const int eta = schedule.sizes[it];
        if (it > 0) mask_set = generate_mask_set(scene.width, scene.height, eta, schedule.stride);
        result.per_iteration_sizes.push_back(eta);
        ++result.iterations;

        std::vector<SelectedMask> selected;
        if (it == 0) {
            for (std::size_t i = 0; i < mask_set.masks.size(); ++i)
                if (sweep_selects(largest_preds[i], y_prior, y_true))
                    selected.push_back({mask_set.masks[i], largest_preds[i]});
        } else {
            std::vector<Mask> candidates_storage;
            std::span<const Mask> candidates(mask_set.masks);
            if (opts.sliding_opt && hit) {
                candidates_storage = sliding_space_filter(*hit, mask_set);
                candidates = candidates_storage;
                if (candidates.empty()) {
                    // Degenerate filter result: treat like an all-inconsistent iteration.
                    result.sat_states.push_back(false);
                    return finish(previous_size(it));
                }
            }
            result.search_count += candidates.size();
            selected = one_mask_sweep(clf, scene, candidates, y_prior, y_true);
        }

        bool any_consistent = false;
        std::optional<Rect> hit_this_iteration;
        for (const SelectedMask& sm : selected) {
            const ConsistencyRecord rec = double_mask_check(clf, scene, sm.mask, mask_set);
            if (!rec.cp) continue;
            if (it == 0 && !y_true) y_true = rec.y_con;
            if (y_true && rec.y_con != y_true) {
                // Consistent under a wrong label: this size no longer dominates the patch.
                result.sat_states.push_back(false);
                return finish(previous_size(it));
            }
            any_consistent = true;
            if (!hit_this_iteration) hit_this_iteration = sm.mask.region;
        }
        result.sat_states.push_back(any_consistent);
        if (!any_consistent) return finish(previous_size(it));
        hit = hit_this_iteration;
    }
    return finish(schedule.sizes.back());
}

/// Ceiling of the mean of per-image estimates: the dataset-level size that
/// still guarantees coverage.
inline int aggregate_estimate(std::span<const int> per_image_sizes) {
    if (per_image_sizes.empty()) throw invalid_input_error("no estimates to aggregate");
    long long sum = 0;
    for (const int v : per_image_sizes) {
        if (v < 0) throw invalid_input_error("estimates must be non-negative");
        sum += v;
    }
    const long long n = static_cast<long long>(per_image_sizes.size());
    return static_cast<int>((sum + n - 1) / n);
}

}  // namespace ibcd
