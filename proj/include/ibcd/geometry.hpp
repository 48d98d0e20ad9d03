#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "ibcd/errors.hpp"

namespace ibcd {

/// Axis-aligned pixel rectangle, closed on both ends: [x1,x2] x [y1,y2].
/// All size arithmetic therefore uses (hi - lo + 1).
struct Rect {
    int x1 = 0;
    int y1 = 0;
    int x2 = 0;
    int y2 = 0;

    int width() const { return x2 - x1 + 1; }
    int height() const { return y2 - y1 + 1; }
    long long area() const { return static_cast<long long>(width()) * height(); }

    bool contains(int x, int y) const { return x1 <= x && x <= x2 && y1 <= y && y <= y2; }

    bool operator==(const Rect&) const = default;
};

/// Well-formed and inside a width x height image.
inline bool rect_valid(const Rect& r, int width, int height) {
    return 0 <= r.x1 && r.x1 <= r.x2 && r.x2 < width && 0 <= r.y1 && r.y1 <= r.y2 && r.y2 < height;
}

/// Closed-interval overlap on both axes (a single shared pixel counts).
inline bool rect_intersects(const Rect& a, const Rect& b) {
    return a.x1 <= b.x2 && b.x1 <= a.x2 && a.y1 <= b.y2 && b.y1 <= a.y2;
}

/// True iff inner lies entirely within outer.
inline bool rect_covers(const Rect& outer, const Rect& inner) {
    return outer.x1 <= inner.x1 && inner.x2 <= outer.x2 &&
           outer.y1 <= inner.y1 && inner.y2 <= outer.y2;
}

inline std::optional<Rect> rect_intersection(const Rect& a, const Rect& b) {
    if (!rect_intersects(a, b)) return std::nullopt;
    return Rect{std::max(a.x1, b.x1), std::max(a.y1, b.y1), std::min(a.x2, b.x2), std::min(a.y2, b.y2)};
}

inline long long intersection_area(const Rect& a, const Rect& b) {
    const auto i = rect_intersection(a, b);
    return i ? i->area() : 0;
}

/// A square occlusion mask, fully described by its region: pixels inside are
/// blanked, pixels outside untouched.
struct Mask {
    Rect region;

    int side() const { return region.width(); }
};

/// All masks of one side length eta, laid out on a stride-s grid that tiles
/// the whole image (the final anchor is clamped to the image edge).
struct MaskSet {
    int eta = 0;
    int stride = 1;
    std::vector<Mask> masks;  // row-major grid order

    std::size_t size() const { return masks.size(); }
};

/// Grid anchors {0, s, 2s, ...} along one axis, with the last anchor clamped
/// to extent - eta so the grid reaches the edge. No duplicates.
inline std::vector<int> grid_anchors(int extent, int eta, int stride) {
    std::vector<int> anchors;
    const int last = extent - eta;
    for (int a = 0; a < last; a += stride) anchors.push_back(a);
    anchors.push_back(last);
    return anchors;
}

inline MaskSet generate_mask_set(int width, int height, int eta, int stride) {
    if (eta < 1 || eta > std::min(width, height))
        throw invalid_geometry_error("mask side must lie in [1, min(width, height)]");
    if (stride < 1) throw invalid_geometry_error("stride must be at least 1");

    MaskSet set;
    set.eta = eta;
    set.stride = stride;
    const auto xs = grid_anchors(width, eta, stride);
    const auto ys = grid_anchors(height, eta, stride);
    set.masks.reserve(xs.size() * ys.size());
    for (int ay : ys)
        for (int ax : xs) set.masks.push_back(Mask{Rect{ax, ay, ax + eta - 1, ay + eta - 1}});
    return set;
}

/// Largest patch side guaranteed to be fully covered by some grid mask of
/// side eta at stride s, regardless of patch position. Clamped below at 0.
inline int max_coverable_patch(int eta, int stride) {
    return std::max(0, eta - stride + 1);
}

/// Descending sequence of mask sizes driving the iterative search.
struct MaskSchedule {
    std::vector<int> sizes;  // strictly descending
    int stride = 1;
    int reduction_interval = 1;
};

/// Smallest first-iteration mask side whose guaranteed coverage reaches
/// floor(width/2), the largest patch side admissible under the quarter-area
/// assumption. Empty when no such mask fits inside the image.
inline std::optional<int> eta_max_policy(int width, int height, int stride) {
    const int needed = width / 2 + stride - 1;
    if (needed > std::min(width, height)) return std::nullopt;
    return needed;
}

}  // namespace ibcd
