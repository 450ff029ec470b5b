#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vidkd/dataset/manifest.hpp"
#include "vidkd/error.hpp"

namespace vidkd {

enum class CropStrategy { center, random_scale_center };

inline const char* to_string(CropStrategy s) {
    return s == CropStrategy::center ? "center" : "random-scale-center";
}

inline CropStrategy parse_crop_strategy(const std::string& text) {
    if (text == "center") {
        return CropStrategy::center;
    }
    if (text == "random-scale-center") {
        return CropStrategy::random_scale_center;
    }
    throw ConfigError("unknown crop strategy '" + text + "'");
}

struct SamplingConfig {
    int num_frames = 8;    // frames per clip; values >= frame_count select every frame
    int crop_size = 224;   // output height == width
    CropStrategy crop_strategy = CropStrategy::center;
    std::uint64_t seed = 0;
    // Smallest crop side as a fraction of the short image side for random-scale-center.
    double min_crop_scale = 0.8;
    // Per-channel normalization applied when frames are packed into model input.
    std::array<float, 3> mean{0.0f, 0.0f, 0.0f};
    std::array<float, 3> stddev{1.0f, 1.0f, 1.0f};

    void validate() const {
        if (num_frames < 1) {
            throw ConfigError("sampling.num_frames must be >= 1");
        }
        if (crop_size < 8) {
            throw ConfigError("sampling.crop_size must be >= 8");
        }
        if (!(min_crop_scale > 0.0 && min_crop_scale <= 1.0)) {
            throw ConfigError("sampling.min_crop_scale must lie in (0, 1]");
        }
        for (float s : stddev) {
            if (!(s > 0.0f)) {
                throw ConfigError("sampling.std entries must be positive");
            }
        }
    }

    bool operator==(const SamplingConfig&) const = default;
};

/// Segment-center uniform sampling: k = min(num_frames, frame_count) indices,
/// index_i = floor((i + 0.5) * frame_count / k).
inline std::vector<int> sample_uniform(int frame_count, int num_frames) {
    if (num_frames < 1) {
        throw ConfigError("num_frames must be >= 1");
    }
    if (frame_count < 1) {
        throw ConfigError("frame_count must be >= 1");
    }
    const int k = std::min(num_frames, frame_count);
    std::vector<int> out(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        // Integer form of floor((i + 0.5) * n / k) == floor((2i + 1) * n / 2k).
        const auto num = static_cast<std::int64_t>(2 * i + 1) * frame_count;
        out[static_cast<std::size_t>(i)] = static_cast<int>(num / (2 * static_cast<std::int64_t>(k)));
    }
    return out;
}

inline std::vector<int> sample_uniform(const ClipRecord& record, const SamplingConfig& config) {
    return sample_uniform(record.frame_count, config.num_frames);
}

}  // namespace vidkd
