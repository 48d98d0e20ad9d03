#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ibcd/classifier.hpp"
#include "ibcd/geometry.hpp"

namespace ibcd {

/// Outcome of one double-mask consistency check: cp = 1 means every
/// second-round prediction agreed, and y_con carries that label.
struct ConsistencyRecord {
    bool cp = false;
    std::optional<Label> y_con;  // present iff cp
    Rect first_mask;
};

/// All consistency records collected in one search iteration.
struct SCPSet {
    std::vector<ConsistencyRecord> records;
};

struct SelectedMask {
    Mask mask;
    Label prediction;
};

/// One-mask predictions in grid order, one query per mask.
inline std::vector<Label> sweep_predictions(ClassifierContract& clf, const Scene& scene,
                                            std::span<const Mask> masks) {
    std::vector<Label> preds;
    preds.reserve(masks.size());
    for (const Mask& m : masks) preds.push_back(clf.classify(scene, {m.region}));
    return preds;
}

/// Selection rule of the first masking round: keep a mask when its prediction
/// differs from the prior, or matches the reference label once one is known.
inline bool sweep_selects(Label prediction, Label y_prior, const std::optional<Label>& y_true) {
    return prediction != y_prior || (y_true && prediction == *y_true);
}

inline std::vector<SelectedMask> one_mask_sweep(ClassifierContract& clf, const Scene& scene,
                                                std::span<const Mask> candidates, Label y_prior,
                                                std::optional<Label> y_true = std::nullopt) {
    std::vector<SelectedMask> selected;
    for (const Mask& m : candidates) {
        const Label prediction = clf.classify(scene, {m.region});
        if (sweep_selects(prediction, y_prior, y_true)) selected.push_back({m, prediction});
    }
    return selected;
}

inline std::vector<SelectedMask> one_mask_sweep(ClassifierContract& clf, const Scene& scene,
                                                const MaskSet& mask_set, Label y_prior,
                                                std::optional<Label> y_true = std::nullopt) {
    return one_mask_sweep(clf, scene, std::span<const Mask>(mask_set.masks), y_prior, y_true);
}

/// Second masking round: classify under (m0, m1) for every m1 of the same
/// size class; consistent iff all predictions are identical.
inline ConsistencyRecord double_mask_check(ClassifierContract& clf, const Scene& scene,
                                           const Mask& m0, const MaskSet& mask_set) {
    ConsistencyRecord rec;
    rec.first_mask = m0.region;
    std::optional<Label> common;
    bool consistent = true;
    for (const Mask& m1 : mask_set.masks) {
        const Label y = clf.classify(scene, {m0.region, m1.region});
        if (!common) {
            common = y;
        } else if (*common != y) {
            consistent = false;
            // keep sweeping: the query-count contract is one full second round per selected mask
        }
    }
    rec.cp = consistent && common.has_value();
    if (rec.cp) rec.y_con = common;
    return rec;
}

/// The full search operation for one mask size: first-round selection over
/// the candidate masks (all of them by default), then a consistency check per
/// selected mask.
inline SCPSet search_operation(ClassifierContract& clf, const Scene& scene, const MaskSet& mask_set,
                               Label y_prior, std::optional<Label> y_true = std::nullopt,
                               std::span<const Mask> candidates = {}) {
    if (candidates.data() == nullptr) candidates = std::span<const Mask>(mask_set.masks);
    SCPSet scp;
    for (const SelectedMask& sm : one_mask_sweep(clf, scene, candidates, y_prior, y_true))
        scp.records.push_back(double_mask_check(clf, scene, sm.mask, mask_set));
    return scp;
}

/// True iff any record is consistent. An empty set means no candidate mask
/// restored a non-prior label, which the convention maps to False.
inline bool satisfiability_check(const SCPSet& scp) {
    for (const ConsistencyRecord& rec : scp.records)
        if (rec.cp) return true;
    return false;
}

}  // namespace ibcd
