#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "ibcd/classifier.hpp"
#include "ibcd/errors.hpp"

namespace ibcd {

enum class CertBackend { DoubleMask, BandSmoothing, BlockSmoothing };

inline std::string to_string(CertBackend backend) {
    switch (backend) {
        case CertBackend::DoubleMask: return "double_mask";
        case CertBackend::BandSmoothing: return "band_smoothing";
        case CertBackend::BlockSmoothing: return "block_smoothing";
    }
    return "unknown";
}

inline std::string to_string(AttackerPolicy policy) {
    return policy == AttackerPolicy::ConstantWrong ? "constant_wrong" : "region_hash";
}

/// Everything one experiment run depends on. The seed fixes every random
/// draw, so a config + seed pair fully determines the output.
struct ExperimentConfig {
    int width = 32;
    int height = 32;
    int stride = 5;
    int reduction_interval = 2;
    int eta_min = 0;  // 0: default to the stride
    AttackerPolicy attacker_policy = AttackerPolicy::ConstantWrong;
    double tau = 0.0;
    std::vector<int> patch_sizes = {3, 6, 9, 12, 15};
    int scenes_per_size = 20;
    std::uint64_t seed = 1;
    bool sliding_opt = false;
    bool per_image_certification = false;
    CertBackend backend = CertBackend::DoubleMask;
    int ablation_width = 4;  // b, smoothing backends only
    int num_classes = 10;

    int effective_eta_min() const { return eta_min > 0 ? eta_min : stride; }

    void validate() const {
        if (width < 2 || height < 2) throw invalid_config_error("image too small");
        if (stride < 1) throw invalid_config_error("stride must be at least 1");
        if (reduction_interval < 1) throw invalid_config_error("interval must be at least 1");
        if (scenes_per_size < 1) throw invalid_config_error("need at least one scene per size");
        if (num_classes < 2) throw invalid_config_error("need at least two classes");
        if (tau < 0.0 || tau > 1.0) throw invalid_config_error("tau must lie in [0,1]");
        if (ablation_width < 1) throw invalid_config_error("ablation width must be at least 1");
        for (const int v : patch_sizes)
            if (v < 1 || v > std::min(width, height))
                throw invalid_config_error("patch size out of range");
    }

    std::string canonical_string() const {
        std::ostringstream out;
        out << "w=" << width << ";h=" << height << ";s=" << stride
            << ";interval=" << reduction_interval << ";eta_min=" << effective_eta_min()
            << ";policy=" << to_string(attacker_policy) << ";tau=" << tau << ";sizes=";
        for (std::size_t i = 0; i < patch_sizes.size(); ++i)
            out << (i ? "," : "") << patch_sizes[i];
        out << ";scenes=" << scenes_per_size << ";seed=" << seed
            << ";sliding=" << (sliding_opt ? 1 : 0)
            << ";per_image=" << (per_image_certification ? 1 : 0)
            << ";backend=" << to_string(backend) << ";b=" << ablation_width
            << ";classes=" << num_classes;
        return out.str();
    }

    // FNV-1a
    std::uint64_t hash() const {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (const char c : canonical_string()) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ull;
        }
        return h;
    }
};

}  // namespace ibcd
