#pragma once

#include <algorithm>
#include <climits>
#include <cmath>
#include <span>
#include <vector>

#include "ibcd/classifier.hpp"
#include "ibcd/geometry.hpp"

namespace ibcd {

enum class AblationKind { Block, Band };

/// One retained region for derandomized smoothing: a vertical band of width b
/// (one per column, K = W) or a b x b block (one per pixel, K = H*W), both
/// wrapping around the image edges. Index k is 1-based.
struct AblationSpec {
    AblationKind kind = AblationKind::Band;
    int width = 1;  // b
    int index = 1;  // k in [1, K]
    int total = 1;  // K
};

/// Per-class ablation vote counts; abstention-free, so the counts sum to K.
struct VoteTally {
    std::vector<int> counts;  // indexed by label id
    int total = 0;            // K

    int num_classes() const { return static_cast<int>(counts.size()); }

    /// Majority class; ties break toward the smaller label id.
    Label top_class() const {
        Label best = 0;
        for (Label y = 1; y < num_classes(); ++y)
            if (counts[y] > counts[best]) best = y;
        return best;
    }

    /// Highest count among labels other than y, ties included.
    int runner_up_count(Label y) const {
        int best = 0;
        for (Label c = 0; c < num_classes(); ++c)
            if (c != y && counts[c] > best) best = counts[c];
        return best;
    }
};

namespace detail {

struct IndexInterval {
    int lo = 0;
    int hi = 0;  // inclusive
};

/// [start, start+width-1] modulo extent, as one or two unwrapped intervals.
inline std::vector<IndexInterval> wrap_interval(int start, int width, int extent) {
    if (width >= extent) return {{0, extent - 1}};
    const int end = start + width - 1;
    if (end < extent) return {{start, end}};
    return {{start, extent - 1}, {0, end - extent}};
}

inline bool intervals_meet(const std::vector<IndexInterval>& intervals, int lo, int hi) {
    for (const auto& iv : intervals)
        if (iv.lo <= hi && lo <= iv.hi) return true;
    return false;
}

inline void retained_axes(const AblationSpec& spec, int image_width, int image_height,
                          std::vector<IndexInterval>& cols, std::vector<IndexInterval>& rows) {
    if (spec.kind == AblationKind::Band) {
        cols = wrap_interval(spec.index - 1, spec.width, image_width);
        rows = {{0, image_height - 1}};
    } else {
        const int k0 = spec.index - 1;
        const int row = k0 / image_width;
        const int col = k0 % image_width;
        rows = wrap_interval(row, spec.width, image_height);
        cols = wrap_interval(col, spec.width, image_width);
    }
}

}  // namespace detail

inline std::vector<AblationSpec> enumerate_ablations(int width, int height, int b,
                                                     AblationKind kind) {
    if (kind == AblationKind::Band) {
        if (b < 1 || b > width) throw invalid_geometry_error("band width out of range");
        std::vector<AblationSpec> specs;
        specs.reserve(width);
        for (int k = 1; k <= width; ++k) specs.push_back({kind, b, k, width});
        return specs;
    }
    if (b < 1 || b > std::min(width, height))
        throw invalid_geometry_error("block width out of range");
    const int total = width * height;
    std::vector<AblationSpec> specs;
    specs.reserve(total);
    for (int k = 1; k <= total; ++k) specs.push_back({kind, b, k, total});
    return specs;
}

/// The occlusion rectangles a classifier must apply for one ablation: the
/// complement of the retained region.
inline std::vector<Rect> ablation_occlusion(const AblationSpec& spec, int width, int height) {
    std::vector<detail::IndexInterval> cols, rows;
    detail::retained_axes(spec, width, height, cols, rows);

    std::vector<bool> col_kept(width, false), row_kept(height, false);
    for (const auto& iv : cols)
        for (int c = iv.lo; c <= iv.hi; ++c) col_kept[c] = true;
    for (const auto& iv : rows)
        for (int r = iv.lo; r <= iv.hi; ++r) row_kept[r] = true;

    auto runs_of_false = [](const std::vector<bool>& kept) {
        std::vector<detail::IndexInterval> runs;
        int start = -1;
        for (int i = 0; i <= static_cast<int>(kept.size()); ++i) {
            const bool off = i < static_cast<int>(kept.size()) && !kept[i];
            if (off && start < 0) start = i;
            if (!off && start >= 0) {
                runs.push_back({start, i - 1});
                start = -1;
            }
        }
        return runs;
    };
    auto runs_of_true = [](const std::vector<bool>& kept) {
        std::vector<detail::IndexInterval> runs;
        int start = -1;
        for (int i = 0; i <= static_cast<int>(kept.size()); ++i) {
            const bool on = i < static_cast<int>(kept.size()) && kept[i];
            if (on && start < 0) start = i;
            if (!on && start >= 0) {
                runs.push_back({start, i - 1});
                start = -1;
            }
        }
        return runs;
    };

    std::vector<Rect> occlusion;
    for (const auto& rr : runs_of_false(row_kept))
        occlusion.push_back(Rect{0, rr.lo, width - 1, rr.hi});
    for (const auto& rr : runs_of_true(row_kept))
        for (const auto& cc : runs_of_false(col_kept))
            occlusion.push_back(Rect{cc.lo, rr.lo, cc.hi, rr.hi});
    return occlusion;
}

/// True iff the ablation's retained region shares a pixel with the patch.
/// Ablations wrap around the image; patches (physical stickers) do not.
inline bool ablation_intersects(const AblationSpec& spec, const Rect& patch, int width,
                                int height) {
    std::vector<detail::IndexInterval> cols, rows;
    detail::retained_axes(spec, width, height, cols, rows);
    return detail::intervals_meet(cols, patch.x1, patch.x2) &&
           detail::intervals_meet(rows, patch.y1, patch.y2);
}

/// Per-ablation labels in enumeration order; one classifier query each.
inline std::vector<Label> ablation_votes(ClassifierContract& clf, const Scene& scene,
                                         std::span<const AblationSpec> ablations) {
    std::vector<Label> votes;
    votes.reserve(ablations.size());
    for (const AblationSpec& spec : ablations) {
        const auto occlusion = ablation_occlusion(spec, scene.width, scene.height);
        votes.push_back(clf.classify(scene, occlusion));
    }
    return votes;
}

inline VoteTally tally_votes(std::span<const Label> votes, int num_classes) {
    VoteTally tally;
    tally.counts.assign(num_classes, 0);
    tally.total = static_cast<int>(votes.size());
    for (const Label y : votes) ++tally.counts[y];
    return tally;
}

inline VoteTally vote_tally(ClassifierContract& clf, const Scene& scene,
                            std::span<const AblationSpec> ablations) {
    return tally_votes(ablation_votes(clf, scene, ablations), scene.num_classes);
}

/// Maximum number of ablations a v x v patch can intersect: v+b-1 bands, or
/// (v+b-1)^2 blocks.
inline long long delta(AblationKind kind, int v, int b) {
    const long long d = static_cast<long long>(v) + b - 1;
    return kind == AblationKind::Band ? d : d * d;
}

namespace detail {

inline long long isqrt(long long n) {
    if (n < 0) return -1;
    long long r = static_cast<long long>(std::sqrt(static_cast<double>(n)));
    while (r * r > n) --r;
    while ((r + 1) * (r + 1) <= n) ++r;
    return r;
}

/// Margin a competitor label needs to be beaten by: 2*delta, plus one when
/// the competitor wins argmax ties (smaller id), so a tie after the attack
/// still resolves to y.
inline long long required_margin(long long d, Label competitor, Label y) {
    return 2 * d + (competitor < y ? 1 : 0);
}

}  // namespace detail

/// Certification test: every intersecting ablation voting adversarially can
/// swing at most delta votes each way, so y's margin over every competitor
/// must cover twice delta (strictly, against competitors that win ties).
inline bool is_certified(const VoteTally& tally, AblationKind kind, int v, int b, Label y) {
    const long long d = delta(kind, v, b);
    const long long n_y = tally.counts[y];
    for (Label c = 0; c < tally.num_classes(); ++c) {
        if (c == y) continue;
        if (n_y - tally.counts[c] < detail::required_margin(d, c, y)) return false;
    }
    return true;
}

/// Largest patch side certifiable from this tally, clamped at 0 and capped at
/// the absolute bound of the smoothing kind (half the width for bands, the
/// square root of half the area for blocks).
inline int max_certifiable_patch(const VoteTally& tally, AblationKind kind, int b) {
    const Label y = tally.top_class();
    const long long n_y = tally.counts[y];
    long long delta_max = LLONG_MAX;
    for (Label c = 0; c < tally.num_classes(); ++c) {
        if (c == y) continue;
        // top_class ties break toward smaller ids, so the numerator is never negative
        delta_max = std::min(delta_max, (n_y - tally.counts[c] - (c < y ? 1 : 0)) / 2);
    }
    long long bound;
    long long cap;
    if (kind == AblationKind::Band) {
        bound = (delta_max == LLONG_MAX ? tally.total : delta_max) - b + 1;
        cap = tally.total / 2;
    } else {
        bound = detail::isqrt(delta_max == LLONG_MAX ? tally.total : delta_max) - b + 1;
        cap = detail::isqrt(tally.total / 2);
    }
    return static_cast<int>(std::max(0ll, std::min(bound, cap)));
}

}  // namespace ibcd
