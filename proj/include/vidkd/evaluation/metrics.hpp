#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vidkd/error.hpp"
#include "vidkd/tensor.hpp"

namespace vidkd {

struct FramePrediction {
    std::string clip_id;
    int frame_index = 0;
    int predicted = 0;
    int true_label = 0;
};

struct VideoVerdict {
    std::string clip_id;
    int frames_total = 0;
    int frames_correct = 0;
    bool correct = false;

    bool operator==(const VideoVerdict&) const = default;
};

/// Index of the largest entry; ties go to the lower index.
inline int argmax_row(const float* row, std::size_t count) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < count; ++c) {
        if (row[c] > row[best]) {
            best = c;
        }
    }
    return static_cast<int>(best);
}

/// A clip is correct when at least half of its frames are: frames_correct >= ceil(total / 2).
inline bool video_rule(int frames_total, int frames_correct) {
    if (frames_total < 1) {
        throw DomainError("a clip needs at least one frame");
    }
    if (frames_correct < 0 || frames_correct > frames_total) {
        throw DomainError("frames_correct outside [0, frames_total]");
    }
    return frames_correct >= (frames_total + 1) / 2;
}

/// Fraction of rows whose label ranks within the top k logits (ties broken toward the lower index).
inline double topk_frame_accuracy(const Tensor& logits, std::span<const int> labels, int k) {
    if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
        throw ShapeError("top-k: " + to_string(logits.shape()) + " logits vs " + std::to_string(labels.size()) +
                         " labels");
    }
    const std::size_t m = logits.dim(1);
    if (k < 1 || static_cast<std::size_t>(k) > m) {
        throw DomainError("top-k needs 1 <= k <= M");
    }
    if (labels.empty()) {
        throw ShapeError("top-k of an empty batch");
    }
    std::size_t hits = 0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        const int y = labels[r];
        if (y < 0 || static_cast<std::size_t>(y) >= m) {
            throw DomainError("label outside [0, M)");
        }
        const float* row = logits.data() + r * m;
        std::size_t rank = 0;
        for (std::size_t c = 0; c < m; ++c) {
            if (row[c] > row[y] || (row[c] == row[y] && c < static_cast<std::size_t>(y))) {
                ++rank;
            }
        }
        hits += rank < static_cast<std::size_t>(k) ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

struct VideoAccuracy {
    double accuracy = 0.0;
    std::vector<VideoVerdict> verdicts;  // in order of first appearance
};

/// Groups frame predictions by clip and applies the at-least-half rule per clip.
inline VideoAccuracy video_level_accuracy(const std::vector<FramePrediction>& predictions) {
    if (predictions.empty()) {
        throw DomainError("video accuracy of an empty prediction set");
    }
    VideoAccuracy out;
    std::map<std::string, std::size_t> slot;
    for (const auto& p : predictions) {
        auto [it, inserted] = slot.try_emplace(p.clip_id, out.verdicts.size());
        if (inserted) {
            out.verdicts.push_back({p.clip_id, 0, 0, false});
        }
        auto& v = out.verdicts[it->second];
        ++v.frames_total;
        v.frames_correct += p.predicted == p.true_label ? 1 : 0;
    }
    std::size_t correct = 0;
    for (auto& v : out.verdicts) {
        v.correct = video_rule(v.frames_total, v.frames_correct);
        correct += v.correct ? 1 : 0;
    }
    out.accuracy = static_cast<double>(correct) / static_cast<double>(out.verdicts.size());
    return out;
}

}  // namespace vidkd
