#pragma once

#include <optional>
#include <vector>

#include "ibcd/classifier.hpp"
#include "ibcd/geometry.hpp"
#include "ibcd/smoothing.hpp"

// Brute-force reference implementations. These read hidden scene state (the
// planted patch rectangle) on purpose and exist only for testing and
// acceptance runs; production paths must not depend on them.

namespace ibcd::oracles {

struct CoverageReport {
    int eta = 0;
    bool covered = false;
    std::optional<Rect> witness;         // one covering mask, when covered
    std::optional<Rect> counterexample;  // first uncoverable placement otherwise
};

/// Every placement of a v x v patch inside a width x height image, row-major.
inline std::vector<Rect> enumerate_patch_positions(int width, int height, int v) {
    if (v < 1 || v > std::min(width, height))
        throw invalid_geometry_error("patch side out of range");
    std::vector<Rect> positions;
    positions.reserve(static_cast<std::size_t>(width - v + 1) * (height - v + 1));
    for (int y = 0; y + v <= height; ++y)
        for (int x = 0; x + v <= width; ++x) positions.push_back(Rect{x, y, x + v - 1, y + v - 1});
    return positions;
}

/// Exhaustive single-mask coverage check over every patch placement.
inline CoverageReport coverage_oracle(const MaskSet& mask_set, int v, int width, int height) {
    CoverageReport report;
    report.eta = mask_set.eta;
    report.covered = true;
    for (const Rect& placement : enumerate_patch_positions(width, height, v)) {
        const Mask* covering = nullptr;
        for (const Mask& m : mask_set.masks) {
            if (rect_covers(m.region, placement)) {
                covering = &m;
                break;
            }
        }
        if (!covering) {
            report.covered = false;
            report.witness.reset();
            report.counterexample = placement;
            return report;
        }
        if (!report.witness) report.witness = covering->region;
    }
    return report;
}

/// White-box reference for the size search: walk the schedule and return the
/// last size at which some single grid mask covers the actual patch.
inline int brute_force_estimate(const Scene& scene, const MaskSchedule& schedule) {
    if (!scene.patch) return 0;
    const Rect patch = scene.patch->region;
    int previous = -1;
    for (const int eta : schedule.sizes) {
        const MaskSet mask_set = generate_mask_set(scene.width, scene.height, eta, schedule.stride);
        bool covered = false;
        for (const Mask& m : mask_set.masks) {
            if (rect_covers(m.region, patch)) {
                covered = true;
                break;
            }
        }
        if (!covered) {
            if (previous < 0)
                throw assumption_violation_error(
                    "patch is not coverable at the largest mask size");
            return previous;
        }
        previous = eta;
    }
    return schedule.sizes.back();
}

/// Exhaustive attack against a smoothing certificate: for every patch
/// placement and every wrong class, flip each intersecting ablation's vote to
/// that class and see whether the majority changes (ties break toward the
/// smaller label id). Returns true iff some attack succeeds.
inline bool smoothing_attack_oracle(ClassifierContract& clf, const Scene& scene, AblationKind kind,
                                    int v, int b) {
    if (v <= 0) return false;
    const Scene clean = scene.clean_view();
    const auto ablations = enumerate_ablations(clean.width, clean.height, b, kind);
    const auto votes = ablation_votes(clf, clean, ablations);
    const VoteTally base = tally_votes(votes, clean.num_classes);
    const Label y = base.top_class();

    for (const Rect& placement : enumerate_patch_positions(clean.width, clean.height, v)) {
        std::vector<int> flipped;
        for (std::size_t i = 0; i < ablations.size(); ++i)
            if (ablation_intersects(ablations[i], placement, clean.width, clean.height))
                flipped.push_back(static_cast<int>(i));
        if (flipped.empty()) continue;
        for (Label wrong = 0; wrong < clean.num_classes; ++wrong) {
            if (wrong == y) continue;
            VoteTally attacked = base;
            for (const int i : flipped) {
                --attacked.counts[votes[i]];
                ++attacked.counts[wrong];
            }
            if (attacked.top_class() != y) return true;
        }
    }
    return false;
}

}  // namespace ibcd::oracles
