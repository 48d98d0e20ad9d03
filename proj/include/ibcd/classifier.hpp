#pragma once

#include <atomic>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <vector>

#include "ibcd/errors.hpp"
#include "ibcd/geometry.hpp"

namespace ibcd {

using Label = int;

/// How the simulated attacker picks its wrong label while the patch has
/// visible pixels. ConstantWrong always answers the scene's distractor;
/// RegionHash answers a deterministic wrong label keyed by the set of
/// visible patch pixels, so different maskings yield different wrong labels.
enum class AttackerPolicy { ConstantWrong, RegionHash };

struct PatchSpec {
    Rect region;

    int side() const { return region.width(); }
};

/// Synthetic image stand-in. No pixel content is stored; classification is
/// decided from the geometry of the object, the optional planted patch, and
/// whatever masks the defense applies.
struct Scene {
    int width = 0;
    int height = 0;
    Rect object_region;
    Label true_label = 0;
    Label distractor_label = 1;
    std::optional<PatchSpec> patch;
    double occlusion_tolerance = 0.0;  // tau: object fraction that must stay visible
    AttackerPolicy attacker_policy = AttackerPolicy::ConstantWrong;
    int num_classes = 10;

    bool attacked() const { return patch.has_value(); }

    /// The same scene with the patch removed.
    Scene clean_view() const {
        Scene s = *this;
        s.patch.reset();
        return s;
    }

    void validate() const {
        if (width < 1 || height < 1) throw invalid_input_error("scene dimensions must be positive");
        if (num_classes < 2) throw invalid_input_error("scene needs at least two classes");
        if (true_label < 0 || true_label >= num_classes || distractor_label < 0 ||
            distractor_label >= num_classes)
            throw invalid_input_error("scene labels out of range");
        if (distractor_label == true_label)
            throw invalid_input_error("distractor label must differ from the true label");
        if (!rect_valid(object_region, width, height))
            throw invalid_input_error("object region outside the image");
        if (patch) {
            if (!rect_valid(patch->region, width, height))
                throw invalid_input_error("patch region outside the image");
            if (patch->region.width() != patch->region.height())
                throw invalid_input_error("patch must be square");
        }
    }
};

// ---------------------------------------------------------------------------
// Exact pixel-set arithmetic over closed rectangles.
// ---------------------------------------------------------------------------

/// Area of (union of spans) ∩ target, exact, via coordinate compression.
inline long long union_area_within(const Rect& target, std::span<const Rect> spans) {
    std::vector<int> xs{target.x1, target.x2 + 1};
    std::vector<int> ys{target.y1, target.y2 + 1};
    std::vector<Rect> clipped;
    clipped.reserve(spans.size());
    for (const Rect& r : spans) {
        const auto c = rect_intersection(r, target);
        if (!c) continue;
        clipped.push_back(*c);
        xs.push_back(c->x1);
        xs.push_back(c->x2 + 1);
        ys.push_back(c->y1);
        ys.push_back(c->y2 + 1);
    }
    if (clipped.empty()) return 0;
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());

    long long area = 0;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
            const int px = xs[i];
            const int py = ys[j];
            for (const Rect& r : clipped) {
                if (r.contains(px, py)) {
                    area += static_cast<long long>(xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
                    break;
                }
            }
        }
    }
    return area;
}

/// True iff every pixel of patch lies under some mask. A patch may be covered
/// by the union of several masks even when no single mask covers it.
inline bool union_covers_patch(const Rect& patch, std::span<const Rect> masks) {
    if (masks.empty()) return false;
    if (masks.size() == 1) return rect_covers(masks[0], patch);
    if (masks.size() == 2) {
        long long covered = intersection_area(patch, masks[0]) + intersection_area(patch, masks[1]);
        if (const auto both = rect_intersection(masks[0], masks[1]))
            covered -= intersection_area(patch, *both);
        return covered == patch.area();
    }
    return union_area_within(patch, masks) == patch.area();
}

/// Fraction of object pixels hidden neither by a mask nor by the patch.
inline double visible_fraction(const Rect& object, const std::optional<Rect>& patch,
                               std::span<const Rect> masks) {
    std::vector<Rect> occluders(masks.begin(), masks.end());
    if (patch) occluders.push_back(*patch);
    const long long hidden = union_area_within(object, occluders);
    return static_cast<double>(object.area() - hidden) / static_cast<double>(object.area());
}

// ---------------------------------------------------------------------------
// Classifier contract.
// ---------------------------------------------------------------------------

/// The black-box interface every defense stage consumes: deterministic in
/// (scene, mask multiset), with one query counted per call.
class ClassifierContract {
  public:
    virtual ~ClassifierContract() = default;

    Label classify(const Scene& scene, std::span<const Rect> applied_masks) {
        queries_.fetch_add(1, std::memory_order_relaxed);
        return classify_impl(scene, applied_masks);
    }

    Label classify(const Scene& scene, std::initializer_list<Rect> applied_masks) {
        return classify(scene, std::span<const Rect>(applied_masks.begin(), applied_masks.size()));
    }

    std::uint64_t query_count() const { return queries_.load(std::memory_order_relaxed); }
    void reset_query_count() { queries_.store(0, std::memory_order_relaxed); }

  private:
    virtual Label classify_impl(const Scene& scene, std::span<const Rect> applied_masks) = 0;

    std::atomic<std::uint64_t> queries_{0};
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Deterministic wrong label keyed by the set of visible patch pixels.
inline Label region_hash_label(const Scene& scene, std::span<const Rect> masks) {
    const Rect& p = scene.patch->region;
    // only masks meeting the patch can hide its pixels
    std::vector<Rect> touching;
    touching.reserve(masks.size());
    for (const Rect& m : masks)
        if (rect_intersects(m, p)) touching.push_back(m);

    std::uint64_t h = 0x6a09e667f3bcc908ull;
    for (int y = p.y1; y <= p.y2; ++y) {
        for (int x = p.x1; x <= p.x2; ++x) {
            bool hidden = false;
            for (const Rect& m : touching) {
                if (m.contains(x, y)) {
                    hidden = true;
                    break;
                }
            }
            if (!hidden) h = splitmix64(h ^ static_cast<std::uint64_t>(y * scene.width + x + 1));
        }
    }
    Label wrong = static_cast<Label>(h % static_cast<std::uint64_t>(scene.num_classes - 1));
    if (wrong >= scene.true_label) ++wrong;  // never the true label
    return wrong;
}

}  // namespace detail

/// The worst-case attacker of the threat model: any visible patch pixel
/// forces a wrong label. With the patch fully masked (or absent), the answer
/// is correct as long as at least a tau-fraction of the object stays visible.
inline Label worst_case_classify(const Scene& scene, std::span<const Rect> applied_masks) {
    if (scene.patch && !union_covers_patch(scene.patch->region, applied_masks)) {
        if (scene.attacker_policy == AttackerPolicy::ConstantWrong) return scene.distractor_label;
        return detail::region_hash_label(scene, applied_masks);
    }
    if (scene.occlusion_tolerance <= 0.0) return scene.true_label;
    const std::optional<Rect> patch_rect =
        scene.patch ? std::optional<Rect>(scene.patch->region) : std::nullopt;
    const double visible = visible_fraction(scene.object_region, patch_rect, applied_masks);
    return visible >= scene.occlusion_tolerance - 1e-12 ? scene.true_label : scene.distractor_label;
}

class WorstCaseClassifier final : public ClassifierContract {
  private:
    Label classify_impl(const Scene& scene, std::span<const Rect> applied_masks) override {
        return worst_case_classify(scene, applied_masks);
    }
};

/// Row-major W*H*3 float rendering in [0,1] for external classifiers:
/// background 0.5, object 0.75, patch 1.0, masked pixels exactly 0.
inline std::vector<float> render_scene(const Scene& scene, std::span<const Rect> applied_masks) {
    std::vector<float> pixels(static_cast<std::size_t>(scene.width) * scene.height * 3, 0.5f);
    auto paint = [&](const Rect& r, float value) {
        for (int y = r.y1; y <= r.y2; ++y) {
            for (int x = r.x1; x <= r.x2; ++x) {
                float* px = &pixels[(static_cast<std::size_t>(y) * scene.width + x) * 3];
                px[0] = px[1] = px[2] = value;
            }
        }
    };
    paint(scene.object_region, 0.75f);
    if (scene.patch) paint(scene.patch->region, 1.0f);
    for (const Rect& m : applied_masks) paint(m, 0.0f);
    return pixels;
}

}  // namespace ibcd
