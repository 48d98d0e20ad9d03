#include <numeric>

#include <catch2/catch_amalgamated.hpp>

#include "ibcd/estimator.hpp"
#include "ibcd/oracles.hpp"
#include "ibcd/scenes.hpp"

using namespace ibcd;

namespace {

Scene make_scene(int v, int px, int py, AttackerPolicy policy = AttackerPolicy::ConstantWrong) {
    Scene s;
    s.width = 32;
    s.height = 32;
    s.object_region = Rect{1, 1, 30, 30};
    s.true_label = 1;
    s.distractor_label = 6;
    s.attacker_policy = policy;
    if (v > 0) s.patch = PatchSpec{Rect{px, py, px + v - 1, py + v - 1}};
    return s;
}

}  // namespace

TEST_CASE("detect_clean") {
    const MaskSet largest = generate_mask_set(32, 32, 20, 5);
    WorstCaseClassifier clf;

    SECTION("clean scene passes") {
        const Scene s = make_scene(0, 0, 0);
        CHECK(detect_clean(clf, s, largest, clf.classify(s, {})));
    }
    SECTION("admissible patch is flagged") {
        const Scene s = make_scene(7, 10, 10);
        CHECK_FALSE(detect_clean(clf, s, largest, clf.classify(s, {})));
    }
    SECTION("tiny object under high tolerance is misdetected as attacked") {
        Scene s = make_scene(0, 0, 0);
        s.object_region = Rect{0, 0, 9, 9};  // hides under one 20x20 mask
        s.occlusion_tolerance = 0.5;
        CHECK_FALSE(detect_clean(clf, s, largest, clf.classify(s, {})));
    }
}

TEST_CASE("build_schedule") {
    SECTION("stride five, interval two") {
        const MaskSchedule sched = build_schedule(32, 5, 2, 5);
        CHECK(sched.sizes == std::vector<int>{20, 18, 16, 14, 12, 10, 8, 6, 5});
    }
    SECTION("unit stride and interval") {
        const MaskSchedule sched = build_schedule(32, 1, 1, 1);
        std::vector<int> expected(16);
        std::iota(expected.rbegin(), expected.rend(), 1);
        CHECK(sched.sizes == expected);
    }
    SECTION("invalid configurations") {
        CHECK_THROWS_AS(build_schedule(32, 5, 0, 5), invalid_config_error);
        CHECK_THROWS_AS(build_schedule(32, 5, 2, 3), invalid_config_error);   // below stride
        CHECK_THROWS_AS(build_schedule(32, 20, 2, 20), invalid_config_error); // does not fit
    }
}

TEST_CASE("sliding_space_filter") {
    const MaskSet next = generate_mask_set(32, 32, 14, 5);

    SECTION("keeps masks intersecting the hit") {
        const auto filtered = sliding_space_filter(Rect{0, 0, 19, 19}, next);
        std::size_t expected = 0;
        for (const Mask& m : next.masks)
            expected += (m.region.x1 <= 19 && m.region.y1 <= 19);
        CHECK(filtered.size() == expected);
        for (const Mask& m : filtered) CHECK(rect_intersects(m.region, Rect{0, 0, 19, 19}));
    }
    SECTION("full-image hit keeps everything") {
        CHECK(sliding_space_filter(Rect{0, 0, 31, 31}, next).size() == next.masks.size());
    }
    SECTION("disjoint grid yields an empty set") {
        MaskSet corner;
        corner.eta = 4;
        corner.stride = 1;
        corner.masks = {Mask{Rect{28, 28, 31, 31}}};
        CHECK(sliding_space_filter(Rect{0, 0, 3, 3}, corner).empty());
    }
}

TEST_CASE("estimate_patch_size pins the size with unit stride") {
    const Scene s = make_scene(7, 10, 10);
    const MaskSchedule sched = build_schedule(32, 1, 1, 1);
    WorstCaseClassifier clf;
    const auto result = estimate_patch_size(clf, s, sched);
    CHECK(result.estimated_size == 7);  // first failing size is 6
    CHECK(result.y_true_recovered == s.true_label);
    CHECK(result.query_count == clf.query_count());
    CHECK(result.per_iteration_sizes.front() == 16);
    CHECK(std::is_sorted(result.per_iteration_sizes.rbegin(), result.per_iteration_sizes.rend()));
}

TEST_CASE("estimate_patch_size clean path") {
    const Scene s = make_scene(0, 0, 0);
    const MaskSchedule sched = build_schedule(32, 5, 2, 5);
    WorstCaseClassifier clf;
    const auto result = estimate_patch_size(clf, s, sched);
    CHECK(result.estimated_size == 0);
    CHECK(result.iterations == 0);
    CHECK(result.query_count == 1 + generate_mask_set(32, 32, 20, 5).masks.size());
}

TEST_CASE("estimate_patch_size agrees with the coverage reference at stride five") {
    const MaskSchedule sched = build_schedule(32, 5, 2, 5);
    for (int px = 0; px <= 25; px += 3) {
        const Scene s = make_scene(7, px, (px * 5) % 25);
        WorstCaseClassifier clf;
        const auto result = estimate_patch_size(clf, s, sched);
        CHECK(result.estimated_size == oracles::brute_force_estimate(s, sched));
        CHECK(result.estimated_size >= 7);
    }
}

TEST_CASE("satisfiability states form a single descending transition") {
    const MaskSchedule sched = build_schedule(32, 2, 2, 2);
    for (const auto policy : {AttackerPolicy::ConstantWrong, AttackerPolicy::RegionHash}) {
        for (int v = 2; v <= 14; v += 3) {
            const Scene s = make_scene(v, (v * 7) % (33 - v), (v * 11) % (33 - v), policy);
            WorstCaseClassifier clf;
            const auto result = estimate_patch_size(clf, s, sched);
            bool seen_false = false;
            for (const bool sat : result.sat_states) {
                if (!sat) {
                    seen_false = true;
                } else {
                    CHECK_FALSE(seen_false);  // never True after False
                }
            }
        }
    }
}

TEST_CASE("sliding optimization changes no estimate and never adds work") {
    const MaskSchedule sched = build_schedule(32, 1, 2, 1);
    for (const auto policy : {AttackerPolicy::ConstantWrong, AttackerPolicy::RegionHash}) {
        for (int v = 3; v <= 15; v += 4) {
            const Scene s = make_scene(v, (v * 3) % (33 - v), (v * 13) % (33 - v), policy);
            WorstCaseClassifier a, b;
            const auto plain = estimate_patch_size(a, s, sched, {false});
            const auto sliding = estimate_patch_size(b, s, sched, {true});
            CHECK(plain.estimated_size == sliding.estimated_size);
            CHECK(sliding.query_count <= plain.query_count);
            CHECK(sliding.search_count <= plain.search_count);
            CHECK(sliding.used_sliding_opt);
        }
    }
}

TEST_CASE("query counts do not grow with the reduction interval") {
    const Scene s = make_scene(7, 11, 9);
    std::uint64_t previous = ~0ull;
    for (int interval = 1; interval <= 7; ++interval) {
        const MaskSchedule sched = build_schedule(32, 7, interval, 7);
        WorstCaseClassifier clf;
        const auto result = estimate_patch_size(clf, s, sched);
        CHECK(result.query_count <= previous);
        previous = result.query_count;
    }
}

TEST_CASE("oversized patch raises an assumption violation") {
    const Scene s = make_scene(20, 3, 3, AttackerPolicy::RegionHash);
    const MaskSchedule sched = build_schedule(32, 5, 2, 5);
    WorstCaseClassifier clf;
    CHECK_THROWS_AS(estimate_patch_size(clf, s, sched), assumption_violation_error);
    CHECK_THROWS_AS(oracles::brute_force_estimate(s, sched), assumption_violation_error);
}

TEST_CASE("aggregate_estimate takes the ceiling of the mean") {
    SECTION("fractional means round up") {
        std::vector<int> sizes(100, 18);
        for (int i = 0; i < 61; ++i) sizes[i] = 19;  // mean 18.61
        CHECK(aggregate_estimate(sizes) == 19);

        std::vector<int> sizes2(100, 16);
        for (int i = 0; i < 40; ++i) sizes2[i] = 17;  // mean 16.40
        CHECK(aggregate_estimate(sizes2) == 17);
    }
    SECTION("integral mean stays put") {
        const std::vector<int> sizes{8, 8, 8};
        CHECK(aggregate_estimate(sizes) == 8);
    }
    SECTION("empty input is rejected") {
        CHECK_THROWS_AS(aggregate_estimate(std::vector<int>{}), invalid_input_error);
    }
}
