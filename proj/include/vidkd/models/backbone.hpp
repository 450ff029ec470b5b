#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "vidkd/archive.hpp"
#include "vidkd/models/model.hpp"
#include "vidkd/models/specs.hpp"
#include "vidkd/nn/conv.hpp"

namespace vidkd {

/// A feature extractor emitting output_dim values per clip.
class Backbone : public Model {
public:
    explicit Backbone(BackboneSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

    std::string type() const override { return "backbone"; }
    Json spec() const override { return {{"type", type()}, {"backbone", to_json(spec_)}}; }
    const BackboneSpec& backbone_spec() const noexcept { return spec_; }
    std::size_t output_dim() const override { return spec_.output_dim; }
    OutputGranularity granularity() const override { return OutputGranularity::clip; }
    bool frozen() const noexcept { return spec_.frozen; }

protected:
    BackboneSpec spec_;
};

/// Small seeded convolutional stack standing in for a pretrained temporal network:
/// per-frame conv features, averaged over time, projected to output_dim.
class TinyTemporalBackbone : public Backbone {
public:
    explicit TinyTemporalBackbone(BackboneSpec spec) : Backbone(std::move(spec)) {
        Rng rng(derive_seed(spec_.seed, "synthetic-tiny", spec_.identifier));
        const std::size_t half = std::max<std::size_t>(1, spec_.width / 2);
        frame_net_.emplace<nn::Conv2d>(3, half, 3, 1, 1, rng);
        frame_net_.emplace<nn::ReLU>();
        frame_net_.emplace<nn::Conv2d>(half, spec_.width, 3, 2, 1, rng);
        frame_net_.emplace<nn::ReLU>();
        frame_net_.emplace<nn::GlobalAvgPool>();
        head_ = std::make_unique<nn::Linear>(spec_.width, spec_.output_dim, rng);
        // Scale the projection so outputs spread like classifier logits rather than near zero.
        std::vector<nn::ParamRef> head_params;
        head_->collect("", head_params);
        for (auto& p : head_params) {
            for (auto& v : p.param->value.values()) {
                v *= kOutputGain;
            }
        }
        if (spec_.frozen) {
            for (auto& p : parameters()) {
                p.param->trainable = false;
            }
        }
    }

    Tensor forward(const ClipBatch& batch, const nn::ForwardContext& ctx) override {
        // A frozen backbone always runs in inference mode.
        nn::ForwardContext local = ctx;
        local.training = ctx.training && !spec_.frozen;
        const Tensor per_frame = frame_net_.forward(batch.frames, local);
        offsets_ = batch.offsets;
        return head_->forward(aggregate_clip_logits(per_frame, batch.offsets), local);
    }

    void backward(const Tensor& grad) override {
        if (spec_.frozen) {
            throw ConfigError("cannot back-propagate into a frozen backbone");
        }
        const Tensor dclip = head_->backward(grad);
        Tensor dframes({offsets_.back(), dclip.dim(1)});
        for (std::size_t b = 0; b + 1 < offsets_.size(); ++b) {
            const auto t = static_cast<float>(offsets_[b + 1] - offsets_[b]);
            for (std::size_t n = offsets_[b]; n < offsets_[b + 1]; ++n) {
                for (std::size_t c = 0; c < dclip.dim(1); ++c) {
                    dframes.at(n, c) = dclip.at(b, c) / t;
                }
            }
        }
        frame_net_.backward(dframes);
    }

    std::vector<nn::ParamRef> parameters() override {
        std::vector<nn::ParamRef> out;
        frame_net_.collect("backbone.frames", out);
        head_->collect("backbone.head", out);
        return out;
    }

private:
    static constexpr float kOutputGain = 10.0f;

    nn::Sequential frame_net_;
    std::unique_ptr<nn::Linear> head_;
    std::vector<std::size_t> offsets_;
};

/// Frozen pretrained temporal network consumed through its exported per-clip outputs.
/// The archive carries meta {"kind": "clip-features", "clip_ids": [...], "output_dim": 400,
/// optional "parameter_count"} and a "features" tensor of shape clips x 400.
class PrecomputedFeatureBackbone : public Backbone {
public:
    explicit PrecomputedFeatureBackbone(BackboneSpec spec) : Backbone(std::move(spec)) {
        if (!spec_.frozen) {
            throw ConfigError("pretrained-temporal backbones are always frozen");
        }
        const std::filesystem::path path(spec_.identifier);
        if (!std::filesystem::exists(path)) {
            throw IoError("pretrained backbone weights not found: '" + spec_.identifier + "'");
        }
        const Archive a = read_archive(path);
        if (a.meta.value("kind", "") != "clip-features") {
            throw FormatError("'" + spec_.identifier + "' is not a clip-feature archive");
        }
        const Tensor* features = a.find("features");
        const auto ids = a.meta.value("clip_ids", std::vector<std::string>{});
        if (features == nullptr || features->rank() != 2 || features->dim(0) != ids.size() ||
            features->dim(1) != spec_.output_dim) {
            throw FormatError("'" + spec_.identifier + "' features do not match clips x " +
                              std::to_string(spec_.output_dim));
        }
        features_ = *features;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            rows_[ids[i]] = i;
        }
        parameter_count_ = a.meta.value("parameter_count", std::size_t{0});
    }

    Tensor forward(const ClipBatch& batch, const nn::ForwardContext&) override {
        Tensor out({batch.clip_count(), spec_.output_dim});
        for (std::size_t b = 0; b < batch.clip_count(); ++b) {
            const auto it = rows_.find(batch.clip_ids[b]);
            if (it == rows_.end()) {
                throw FormatError("no exported backbone output for clip '" + batch.clip_ids[b] + "'");
            }
            out.matrix().row(static_cast<Eigen::Index>(b)) =
                features_.matrix().row(static_cast<Eigen::Index>(it->second));
        }
        return out;
    }

    void backward(const Tensor&) override { throw ConfigError("cannot back-propagate into a pretrained backbone"); }

    std::vector<nn::ParamRef> parameters() override { return {}; }
    std::size_t external_parameter_count() const override { return parameter_count_; }

private:
    Tensor features_;
    std::map<std::string, std::size_t> rows_;
    std::size_t parameter_count_ = 0;
};

/// Writes a clip-feature archive for PrecomputedFeatureBackbone.
inline void write_clip_features(const std::filesystem::path& path, const std::vector<std::string>& clip_ids,
                                const Tensor& features, std::size_t parameter_count = 0) {
    if (features.rank() != 2 || features.dim(0) != clip_ids.size()) {
        throw ShapeError("features must be clips x dims");
    }
    Archive a;
    a.meta = {{"kind", "clip-features"},
              {"clip_ids", clip_ids},
              {"output_dim", features.dim(1)},
              {"parameter_count", parameter_count}};
    a.tensors.emplace_back("features", features);
    write_archive(path, a);
}

inline std::unique_ptr<Backbone> build_backbone(const BackboneSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case BackboneKind::synthetic_tiny: return std::make_unique<TinyTemporalBackbone>(spec);
        case BackboneKind::pretrained_temporal: return std::make_unique<PrecomputedFeatureBackbone>(spec);
    }
    throw ConfigError("unknown backbone kind");
}

}  // namespace vidkd
