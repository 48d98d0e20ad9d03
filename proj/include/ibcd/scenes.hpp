#pragma once

#include <random>
#include <string>
#include <vector>

#include "ibcd/classifier.hpp"
#include "ibcd/config.hpp"
#include "ibcd/geometry.hpp"

namespace ibcd {

inline constexpr const char* kSceneGeneratorVersion = "1";

/// Seeded synthetic test set: one batch of clean scenes plus one batch of
/// attacked scenes per configured patch size. Same seed + config, same corpus.
struct SceneCorpus {
    std::uint64_t seed = 0;
    std::string generator_version;
    std::uint64_t config_hash = 0;
    std::vector<Scene> scenes;

    std::vector<Scene> clean_scenes() const {
        std::vector<Scene> out;
        for (const Scene& s : scenes)
            if (!s.attacked()) out.push_back(s);
        return out;
    }

    std::vector<Scene> attacked_scenes(int patch_side) const {
        std::vector<Scene> out;
        for (const Scene& s : scenes)
            if (s.attacked() && s.patch->side() == patch_side) out.push_back(s);
        return out;
    }
};

namespace detail {

// mt19937_64 output reduced by modulo: biased in general but fully
// deterministic across platforms, which matters more here.
inline int draw_below(std::mt19937_64& rng, int n) {
    return static_cast<int>(rng() % static_cast<std::uint64_t>(n));
}

}  // namespace detail

/// Seeded scene synthesis. Objects are large off-center rectangles; when
/// tau > 0 the object must not fit under any single largest-schedule mask,
/// otherwise the clean test misfires by construction. Patch positions are
/// uniform over all in-bounds anchors. Attacked scenes carry tau = 0: the
/// size search assumes a classifier that recovers once the patch is fully
/// masked, while tau enters the certification-accuracy experiments through
/// the clean batch.
inline SceneCorpus synth_scenes(const ExperimentConfig& config, std::uint64_t seed) {
    config.validate();
    std::mt19937_64 rng(seed);

    SceneCorpus corpus;
    corpus.seed = seed;
    corpus.generator_version = kSceneGeneratorVersion;
    corpus.config_hash = config.hash();

    const auto eta_max = eta_max_policy(config.width, config.height, config.stride);

    auto sample_labels = [&](Scene& scene) {
        scene.true_label = detail::draw_below(rng, config.num_classes);
        scene.distractor_label = detail::draw_below(rng, config.num_classes - 1);
        if (scene.distractor_label >= scene.true_label) ++scene.distractor_label;
    };

    auto sample_object = [&](Scene& scene, bool constrain_occlusion) {
        const int max_margin_x = std::max(1, config.width / 8);
        const int max_margin_y = std::max(1, config.height / 8);
        for (int attempt = 0; attempt < 128; ++attempt) {
            const int left = detail::draw_below(rng, max_margin_x + 1);
            const int right = detail::draw_below(rng, max_margin_x + 1);
            const int top = detail::draw_below(rng, max_margin_y + 1);
            const int bottom = detail::draw_below(rng, max_margin_y + 1);
            const Rect object{left, top, config.width - 1 - right, config.height - 1 - bottom};
            if (!rect_valid(object, config.width, config.height)) continue;
            if (constrain_occlusion && eta_max &&
                object.width() <= *eta_max && object.height() <= *eta_max)
                continue;  // fully occludable by one largest mask
            scene.object_region = object;
            return;
        }
        throw generation_error(
            "cannot sample an object that resists full occlusion by a single mask");
    };

    for (int i = 0; i < config.scenes_per_size; ++i) {
        Scene scene;
        scene.width = config.width;
        scene.height = config.height;
        scene.num_classes = config.num_classes;
        scene.attacker_policy = config.attacker_policy;
        scene.occlusion_tolerance = config.tau;
        sample_labels(scene);
        sample_object(scene, config.tau > 0.0);
        scene.validate();
        corpus.scenes.push_back(scene);
    }

    for (const int v : config.patch_sizes) {
        for (int i = 0; i < config.scenes_per_size; ++i) {
            Scene scene;
            scene.width = config.width;
            scene.height = config.height;
            scene.num_classes = config.num_classes;
            scene.attacker_policy = config.attacker_policy;
            scene.occlusion_tolerance = 0.0;
            sample_labels(scene);
            sample_object(scene, false);
            const int ax = detail::draw_below(rng, config.width - v + 1);
            const int ay = detail::draw_below(rng, config.height - v + 1);
            scene.patch = PatchSpec{Rect{ax, ay, ax + v - 1, ay + v - 1}};
            scene.validate();
            corpus.scenes.push_back(scene);
        }
    }
    return corpus;
}

}  // namespace ibcd
