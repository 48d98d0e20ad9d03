#include <catch2/catch_amalgamated.hpp>

#include "ibcd/geometry.hpp"
#include "ibcd/oracles.hpp"

using namespace ibcd;

TEST_CASE("rect_intersects uses closed intervals") {
    CHECK_FALSE(rect_intersects(Rect{0, 0, 3, 3}, Rect{4, 4, 7, 7}));
    CHECK(rect_intersects(Rect{0, 0, 3, 3}, Rect{0, 0, 3, 3}));
    // single shared corner pixel counts as overlap
    CHECK(rect_intersects(Rect{0, 0, 3, 3}, Rect{3, 3, 5, 5}));
    CHECK(rect_intersects(Rect{3, 3, 5, 5}, Rect{0, 0, 3, 3}));
}

TEST_CASE("rect_covers is containment on both axes") {
    CHECK(rect_covers(Rect{0, 0, 9, 9}, Rect{2, 2, 5, 5}));
    CHECK_FALSE(rect_covers(Rect{2, 2, 5, 5}, Rect{0, 0, 9, 9}));
    // one-pixel overhang breaks coverage
    CHECK_FALSE(rect_covers(Rect{0, 0, 5, 5}, Rect{3, 3, 6, 6}));
    CHECK(rect_covers(Rect{0, 0, 5, 5}, Rect{0, 0, 5, 5}));
}

TEST_CASE("generate_mask_set lays a clamped grid") {
    SECTION("mask equal to the image") {
        const MaskSet set = generate_mask_set(32, 32, 32, 5);
        REQUIRE(set.masks.size() == 1);
        CHECK(set.masks[0].region == Rect{0, 0, 31, 31});
    }
    SECTION("final anchor clamps to the edge") {
        const MaskSet set = generate_mask_set(32, 32, 20, 5);
        REQUIRE(set.masks.size() == 16);
        CHECK(grid_anchors(32, 20, 5) == std::vector<int>{0, 5, 10, 12});
        // row-major order: y advances slowest
        CHECK(set.masks[0].region == Rect{0, 0, 19, 19});
        CHECK(set.masks[1].region == Rect{5, 0, 24, 19});
        CHECK(set.masks[4].region == Rect{0, 5, 19, 24});
        CHECK(set.masks[15].region == Rect{12, 12, 31, 31});
    }
    SECTION("unit stride enumerates every anchor") {
        const MaskSet set = generate_mask_set(8, 8, 3, 1);
        CHECK(set.masks.size() == 36);
    }
    SECTION("oversized mask rejected") {
        CHECK_THROWS_AS(generate_mask_set(32, 32, 33, 5), invalid_geometry_error);
        CHECK_THROWS_AS(generate_mask_set(8, 4, 6, 1), invalid_geometry_error);
    }
}

TEST_CASE("max_coverable_patch") {
    CHECK(max_coverable_patch(6, 5) == 2);
    CHECK(max_coverable_patch(7, 1) == 7);
    CHECK(max_coverable_patch(3, 5) == 0);
}

TEST_CASE("eta_max_policy reaches half the image width") {
    CHECK(eta_max_policy(32, 32, 5) == 20);
    CHECK(eta_max_policy(32, 32, 1) == 16);
    CHECK(eta_max_policy(8, 8, 5) == 8);
    CHECK_FALSE(eta_max_policy(32, 32, 20).has_value());
}

TEST_CASE("mask grids cover the whole image") {
    for (const int extent : {8, 16, 32}) {
        for (const int eta : {3, 5, 7}) {
            for (const int stride : {1, 2, 5}) {
                const MaskSet set = generate_mask_set(extent, extent, eta, stride);
                std::vector<char> hit(static_cast<std::size_t>(extent) * extent, 0);
                for (const Mask& m : set.masks)
                    for (int y = m.region.y1; y <= m.region.y2; ++y)
                        for (int x = m.region.x1; x <= m.region.x2; ++x)
                            hit[static_cast<std::size_t>(y) * extent + x] = 1;
                const bool all = std::all_of(hit.begin(), hit.end(), [](char c) { return c; });
                INFO("extent=" << extent << " eta=" << eta << " stride=" << stride);
                CHECK(all);
            }
        }
    }
}

TEST_CASE("coverage holds for every patch within the guaranteed bound") {
    // exhaustive over placements at several image sizes
    for (const int extent : {8, 16, 32}) {
        for (int stride = 1; stride <= 7; ++stride) {
            for (int eta = stride; eta <= extent; eta += 3) {
                const int v = max_coverable_patch(eta, stride);
                if (v < 1) continue;
                const MaskSet set = generate_mask_set(extent, extent, eta, stride);
                const auto report = oracles::coverage_oracle(set, v, extent, extent);
                INFO("extent=" << extent << " eta=" << eta << " stride=" << stride);
                CHECK(report.covered);
            }
        }
    }
}

TEST_CASE("mask set generation is deterministic and duplicate-free") {
    const MaskSet a = generate_mask_set(32, 32, 14, 5);
    const MaskSet b = generate_mask_set(32, 32, 14, 5);
    REQUIRE(a.masks.size() == b.masks.size());
    for (std::size_t i = 0; i < a.masks.size(); ++i) CHECK(a.masks[i].region == b.masks[i].region);
    for (std::size_t i = 0; i < a.masks.size(); ++i)
        for (std::size_t j = i + 1; j < a.masks.size(); ++j)
            CHECK_FALSE(a.masks[i].region == a.masks[j].region);
}
