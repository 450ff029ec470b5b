#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "vidkd/dataset/frames.hpp"
#include "vidkd/dataset/manifest.hpp"
#include "vidkd/dataset/sampling.hpp"
#include "vidkd/random.hpp"
#include "vidkd/tensor.hpp"

namespace vidkd {

/// Record indices of one split, grouped into batches. Train order is a seeded permutation,
/// validation keeps manifest order; the final partial batch is kept.
inline std::vector<std::vector<std::size_t>> plan_batches(const ClipManifest& manifest, Split split,
                                                          std::size_t batch_size, std::uint64_t seed) {
    if (batch_size == 0) {
        throw ConfigError("batch_size must be positive");
    }
    auto order = manifest.indices(split);
    if (order.empty()) {
        throw ConfigError(std::string("split '") + to_string(split) + "' is empty");
    }
    if (split == Split::train) {
        Rng rng(seed);
        std::shuffle(order.begin(), order.end(), rng);
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
        const auto end = std::min(order.size(), begin + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

/// Model input for a batch of clips. Frames of all clips are stacked along the leading axis
/// (N x 3 x H x W, normalized); clip b owns frames [offsets[b], offsets[b + 1]).
struct ClipBatch {
    Tensor frames;
    std::vector<std::size_t> offsets{0};
    std::vector<int> labels;
    std::vector<std::string> clip_ids;

    std::size_t clip_count() const noexcept { return labels.size(); }
    std::size_t frame_count() const noexcept { return offsets.back(); }
    std::size_t frames_in(std::size_t clip) const { return offsets[clip + 1] - offsets[clip]; }
};

inline ClipBatch pack_batch(const std::vector<const FrameSequence*>& clips, const std::vector<int>& labels,
                            const SamplingConfig& config) {
    ClipBatch batch;
    std::size_t total = 0;
    for (const auto* seq : clips) {
        total += seq->frames.size();
    }
    if (clips.empty() || total == 0) {
        throw ConfigError("cannot pack an empty batch");
    }
    const int h = clips.front()->frames.front().height;
    const int w = clips.front()->frames.front().width;
    const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    batch.frames = Tensor({total, 3, static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
    float* out = batch.frames.data();
    std::size_t n = 0;
    for (const auto* seq : clips) {
        for (const auto& img : seq->frames) {
            if (img.height != h || img.width != w) {
                throw ShapeError("clip '" + seq->clip_id + "' frame size differs within the batch");
            }
            for (int c = 0; c < 3; ++c) {
                float* dst = out + (n * 3 + static_cast<std::size_t>(c)) * plane;
                const float mean = config.mean[static_cast<std::size_t>(c)];
                const float inv = 1.0f / config.stddev[static_cast<std::size_t>(c)];
                for (std::size_t p = 0; p < plane; ++p) {
                    dst[p] = (img.pixels[p * 3 + static_cast<std::size_t>(c)] - mean) * inv;
                }
            }
            ++n;
        }
        batch.offsets.push_back(n);
        batch.clip_ids.push_back(seq->clip_id);
    }
    batch.labels = labels;
    return batch;
}

/// Manifest plus sampling policy; hands out preprocessed clips and packed batches.
/// Center-cropped clips are memoized because they are a pure function of (clip, config).
class ClipDataset {
public:
    ClipDataset(ClipManifest manifest, SamplingConfig sampling)
        : manifest_(std::move(manifest)), sampling_(std::move(sampling)) {
        sampling_.validate();
    }

    const ClipManifest& manifest() const noexcept { return manifest_; }
    const SamplingConfig& sampling() const noexcept { return sampling_; }
    std::size_t num_classes() const noexcept { return manifest_.num_classes(); }

    /// `epoch` only matters for random-scale-center crops; evaluation passes no epoch.
    const FrameSequence& clip(std::size_t record_index, std::optional<int> epoch = std::nullopt) {
        const auto& record = manifest_.records.at(record_index);
        const bool random = sampling_.crop_strategy == CropStrategy::random_scale_center && epoch.has_value();
        if (!random) {
            auto it = cache_.find(record_index);
            if (it == cache_.end()) {
                SamplingConfig eval_config = sampling_;
                eval_config.crop_strategy = CropStrategy::center;
                it = cache_.emplace(record_index, preprocess_clip(manifest_, record, eval_config)).first;
            }
            return it->second;
        }
        scratch_ = preprocess_clip(manifest_, record, sampling_,
                                   derive_seed(sampling_.seed, "crop", *epoch, record.clip_id));
        return scratch_;
    }

    ClipBatch batch(const std::vector<std::size_t>& record_indices, std::optional<int> epoch = std::nullopt) {
        std::vector<FrameSequence> owned;
        std::vector<const FrameSequence*> ptrs;
        std::vector<int> labels;
        const bool random = sampling_.crop_strategy == CropStrategy::random_scale_center && epoch.has_value();
        owned.reserve(record_indices.size());
        for (auto idx : record_indices) {
            if (random) {
                owned.push_back(clip(idx, epoch));
            } else {
                ptrs.push_back(&clip(idx));
            }
            labels.push_back(manifest_.records.at(idx).label_index);
        }
        if (random) {
            for (const auto& s : owned) {
                ptrs.push_back(&s);
            }
        }
        return pack_batch(ptrs, labels, sampling_);
    }

private:
    ClipManifest manifest_;
    SamplingConfig sampling_;
    std::map<std::size_t, FrameSequence> cache_;
    FrameSequence scratch_;
};

/// Single-consumer iterator over one epoch of (clips, labels) batches.
class BatchStream {
public:
    struct Batch {
        std::vector<FrameSequence> clips;
        std::vector<int> labels;
        std::vector<std::size_t> record_indices;
    };

    BatchStream(ClipDataset& dataset, Split split, std::size_t batch_size, std::uint64_t seed,
                std::optional<int> epoch = std::nullopt)
        : dataset_(&dataset), plan_(plan_batches(dataset.manifest(), split, batch_size, seed)), epoch_(epoch) {}

    std::size_t batch_count() const noexcept { return plan_.size(); }

    std::optional<Batch> next() {
        if (cursor_ >= plan_.size()) {
            return std::nullopt;
        }
        Batch b;
        b.record_indices = plan_[cursor_++];
        for (auto idx : b.record_indices) {
            b.clips.push_back(dataset_->clip(idx, epoch_));
            b.labels.push_back(dataset_->manifest().records[idx].label_index);
        }
        return b;
    }

private:
    ClipDataset* dataset_;
    std::vector<std::vector<std::size_t>> plan_;
    std::optional<int> epoch_;
    std::size_t cursor_ = 0;
};

/// Iterator form of batch planning.
inline BatchStream make_batches(ClipDataset& dataset, Split split, std::size_t batch_size, std::uint64_t seed) {
    return BatchStream(dataset, split, batch_size, seed);
}

}  // namespace vidkd
