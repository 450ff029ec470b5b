#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "vidkd/models/model.hpp"
#include "vidkd/models/specs.hpp"
#include "vidkd/nn/conv.hpp"

namespace vidkd {

/// 2D per-frame classifier. Clip logits are the mean of frame logits.
class Student : public Model {
public:
    explicit Student(StudentSpec spec) : spec_(std::move(spec)) {
        spec_.validate();
        Rng rng(derive_seed(spec_.seed, "student", to_string(spec_.architecture)));
        switch (spec_.architecture) {
            case StudentArchitecture::tiny_conv: build_tiny_conv(rng); break;
            case StudentArchitecture::small_residual_2d: build_small_residual(rng); break;
        }
    }

    std::string type() const override { return "student"; }
    Json spec() const override { return {{"type", type()}, {"student", to_json(spec_)}}; }
    const StudentSpec& student_spec() const noexcept { return spec_; }
    std::size_t output_dim() const override { return spec_.num_classes; }
    OutputGranularity granularity() const override { return OutputGranularity::frame; }

    Tensor forward_frames(const Tensor& frames, const nn::ForwardContext& ctx) { return net_.forward(frames, ctx); }

    Tensor forward(const ClipBatch& batch, const nn::ForwardContext& ctx) override {
        offsets_ = batch.offsets;
        return aggregate_clip_logits(net_.forward(batch.frames, ctx), batch.offsets);
    }

    void backward(const Tensor& grad) override {
        const std::size_t m = grad.dim(1);
        Tensor dframes({offsets_.back(), m});
        for (std::size_t b = 0; b + 1 < offsets_.size(); ++b) {
            const auto t = static_cast<float>(offsets_[b + 1] - offsets_[b]);
            for (std::size_t n = offsets_[b]; n < offsets_[b + 1]; ++n) {
                for (std::size_t c = 0; c < m; ++c) {
                    dframes.at(n, c) = grad.at(b, c) / t;
                }
            }
        }
        net_.backward(dframes);
    }

    Tensor predict_units(const ClipBatch& batch) override { return net_.forward(batch.frames, {}); }

    std::vector<nn::ParamRef> parameters() override {
        std::vector<nn::ParamRef> out;
        net_.collect("student", out);
        return out;
    }

private:
    void build_tiny_conv(Rng& rng) {
        const std::size_t half = std::max<std::size_t>(1, spec_.width / 2);
        net_.emplace<nn::Conv2d>(3, half, 3, 1, 1, rng, false);
        net_.emplace<nn::BatchNorm>(half);
        net_.emplace<nn::ReLU>();
        net_.emplace<nn::Conv2d>(half, spec_.width, 3, 2, 1, rng, false);
        net_.emplace<nn::BatchNorm>(spec_.width);
        net_.emplace<nn::ReLU>();
        net_.emplace<nn::GlobalAvgPool>();
        add_head(spec_.width, rng);
    }

    // Eighteen-layer residual layout: 7x7 stem, four stages of two basic blocks (64-512 channels).
    void build_small_residual(Rng& rng) {
        net_.emplace<nn::Conv2d>(3, 64, 7, 2, 3, rng, false);
        net_.emplace<nn::BatchNorm>(64);
        net_.emplace<nn::ReLU>();
        net_.emplace<nn::MaxPool2d>(3, 2, 1);
        const std::array<std::size_t, 4> widths{64, 128, 256, 512};
        std::size_t in = 64;
        for (std::size_t stage = 0; stage < widths.size(); ++stage) {
            const std::size_t stride = stage == 0 ? 1 : 2;
            net_.emplace<nn::BasicBlock>(in, widths[stage], stride, rng);
            net_.emplace<nn::BasicBlock>(widths[stage], widths[stage], 1, rng);
            in = widths[stage];
        }
        net_.emplace<nn::GlobalAvgPool>();
        add_head(in, rng);
    }

    void add_head(std::size_t in, Rng& rng) {
        if (spec_.dropout_rate > 0.0) {
            net_.emplace<nn::Dropout>(static_cast<float>(spec_.dropout_rate));
        }
        net_.emplace<nn::Linear>(in, spec_.num_classes, rng);
    }

    StudentSpec spec_;
    nn::Sequential net_;
    std::vector<std::size_t> offsets_;
};

inline std::unique_ptr<Student> build_student(const StudentSpec& spec) { return std::make_unique<Student>(spec); }

}  // namespace vidkd
