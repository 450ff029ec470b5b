#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vidkd/models/backbone.hpp"
#include "vidkd/models/model.hpp"
#include "vidkd/models/specs.hpp"
#include "vidkd/nn/layers.hpp"

namespace vidkd {

/// Outputs of each jointnet stage for one batch.
struct JointnetStages {
    Tensor backbone;
    Tensor adapter;
    Tensor logits;
};

/// Teacher network: frozen backbone -> learnable fully connected adapter -> FrontNet head.
class Jointnet : public Model {
public:
    Jointnet(std::unique_ptr<Backbone> backbone, AdapterSpec adapter, FrontNetSpec frontnet, std::uint64_t init_seed = 0)
        : backbone_(std::move(backbone)), adapter_spec_(std::move(adapter)), frontnet_spec_(std::move(frontnet)),
          init_seed_(init_seed) {
        if (!backbone_) {
            throw ConfigError("jointnet needs a backbone");
        }
        if (!backbone_->frozen()) {
            throw ConfigError("jointnet requires a frozen backbone");
        }
        adapter_spec_.validate(backbone_->output_dim());
        frontnet_spec_.validate();
        Rng rng(derive_seed(init_seed_, "jointnet"));
        const auto& aw = adapter_spec_.layer_widths;
        for (std::size_t i = 0; i + 1 < aw.size(); ++i) {
            adapter_.emplace<nn::Linear>(aw[i], aw[i + 1], rng);
            if (adapter_spec_.use_batch_normalization) {
                adapter_.emplace<nn::BatchNorm>(aw[i + 1]);
            }
            adapter_.emplace<nn::ReLU>();
        }
        std::size_t in = aw.back();
        for (auto width : frontnet_spec_.hidden_widths) {
            frontnet_.emplace<nn::Linear>(in, width, rng);
            if (frontnet_spec_.use_batch_normalization) {
                frontnet_.emplace<nn::BatchNorm>(width);
            }
            frontnet_.emplace<nn::ReLU>();
            if (frontnet_spec_.dropout_rate > 0.0) {
                frontnet_.emplace<nn::Dropout>(static_cast<float>(frontnet_spec_.dropout_rate));
            }
            in = width;
        }
        frontnet_.emplace<nn::Linear>(in, frontnet_spec_.num_classes, rng);
    }

    std::string type() const override { return "jointnet"; }
    Json spec() const override {
        return {{"type", type()},
                {"backbone", to_json(backbone_->backbone_spec())},
                {"adapter", to_json(adapter_spec_)},
                {"frontnet", to_json(frontnet_spec_)},
                {"init_seed", init_seed_}};
    }
    std::size_t output_dim() const override { return frontnet_spec_.num_classes; }
    OutputGranularity granularity() const override { return OutputGranularity::clip; }

    Backbone& backbone() noexcept { return *backbone_; }
    const AdapterSpec& adapter_spec() const noexcept { return adapter_spec_; }
    const FrontNetSpec& frontnet_spec() const noexcept { return frontnet_spec_; }

    JointnetStages forward_stages(const ClipBatch& batch, const nn::ForwardContext& ctx) {
        JointnetStages s;
        s.backbone = backbone_->forward(batch, {});
        s.adapter = adapter_.forward(s.backbone, ctx);
        s.logits = frontnet_.forward(s.adapter, ctx);
        return s;
    }

    Tensor adapter_forward(const Tensor& features, const nn::ForwardContext& ctx) { return adapter_.forward(features, ctx); }
    Tensor frontnet_forward(const Tensor& adapted, const nn::ForwardContext& ctx) { return frontnet_.forward(adapted, ctx); }

    Tensor forward(const ClipBatch& batch, const nn::ForwardContext& ctx) override {
        return forward_stages(batch, ctx).logits;
    }

    /// Stops at the backbone boundary.
    void backward(const Tensor& grad) override { adapter_.backward(frontnet_.backward(grad)); }

    std::vector<nn::ParamRef> parameters() override {
        auto out = backbone_->parameters();
        adapter_.collect("adapter", out);
        frontnet_.collect("frontnet", out);
        return out;
    }

    std::size_t external_parameter_count() const override { return backbone_->external_parameter_count(); }

private:
    std::unique_ptr<Backbone> backbone_;
    AdapterSpec adapter_spec_;
    FrontNetSpec frontnet_spec_;
    std::uint64_t init_seed_;
    nn::Sequential adapter_;
    nn::Sequential frontnet_;
};

inline std::unique_ptr<Jointnet> build_jointnet(std::unique_ptr<Backbone> backbone, const AdapterSpec& adapter,
                                                const FrontNetSpec& frontnet, std::uint64_t init_seed = 0) {
    return std::make_unique<Jointnet>(std::move(backbone), adapter, frontnet, init_seed);
}

}  // namespace vidkd
