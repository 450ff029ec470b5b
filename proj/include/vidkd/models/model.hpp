#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vidkd/archive.hpp"
#include "vidkd/dataset/batches.hpp"
#include "vidkd/json_util.hpp"
#include "vidkd/nn/layers.hpp"
#include "vidkd/random.hpp"
#include "vidkd/tensor.hpp"

namespace vidkd {

/// Clip models emit one logit row per clip; frame models classify every frame and
/// reduce to clip logits by averaging.
enum class OutputGranularity { clip, frame };

/// Common handle for every network: backbone, teacher jointnet and student.
class Model {
public:
    virtual ~Model() = default;

    virtual std::string type() const = 0;
    /// Everything needed to rebuild the architecture (serialized into checkpoints).
    virtual Json spec() const = 0;
    virtual std::size_t output_dim() const = 0;
    virtual OutputGranularity granularity() const = 0;

    /// B x output_dim clip logits.
    virtual Tensor forward(const ClipBatch& batch, const nn::ForwardContext& ctx) = 0;
    /// Back-propagates d(loss)/d(clip logits) from the last training-mode forward.
    virtual void backward(const Tensor& grad_clip_logits) = 0;
    /// Evaluation-mode rows used for scoring: one per frame for frame models, one per clip otherwise.
    virtual Tensor predict_units(const ClipBatch& batch) { return forward(batch, {}); }

    /// All parameters and buffers with stable dotted names.
    virtual std::vector<nn::ParamRef> parameters() = 0;
    /// Scalars held outside this process (e.g. an exported pretrained network), all frozen.
    virtual std::size_t external_parameter_count() const { return 0; }
};

/// Exact number of scalar parameters (buffers excluded).
inline std::size_t count_parameters(Model& model, bool trainable_only) {
    std::size_t n = trainable_only ? 0 : model.external_parameter_count();
    for (const auto& p : model.parameters()) {
        if (p.param->buffer) {
            continue;
        }
        if (!trainable_only || p.param->trainable) {
            n += p.param->value.size();
        }
    }
    return n;
}

/// FNV-1a over names and values; `frozen_only` restricts to non-trainable parameters and buffers
/// of frozen sub-networks.
inline std::uint64_t parameter_checksum(Model& model, bool frozen_only = false) {
    Fnv1a h;
    for (const auto& p : model.parameters()) {
        if (frozen_only && p.param->trainable) {
            continue;
        }
        h.update(p.name);
        h.update(p.param->value.values());
    }
    return h.digest();
}

inline void zero_grads(Model& model) {
    for (const auto& p : model.parameters()) {
        p.param->grad.fill(0.0f);
    }
}

/// Mean over the frame axis: T x M -> 1 x M.
inline Tensor aggregate_clip_logits(const Tensor& per_frame) {
    if (per_frame.rank() != 2 || per_frame.dim(0) == 0) {
        throw ShapeError("aggregate_clip_logits needs a non-empty T x M matrix");
    }
    Tensor out({1, per_frame.dim(1)});
    out.matrix() = per_frame.matrix().colwise().mean();
    return out;
}

/// Batched mean aggregation using clip offsets into the frame axis.
inline Tensor aggregate_clip_logits(const Tensor& per_frame, const std::vector<std::size_t>& offsets) {
    const std::size_t clips = offsets.size() - 1;
    Tensor out({clips, per_frame.dim(1)});
    for (std::size_t b = 0; b < clips; ++b) {
        const auto begin = static_cast<Eigen::Index>(offsets[b]);
        const auto count = static_cast<Eigen::Index>(offsets[b + 1] - offsets[b]);
        if (count == 0) {
            throw ShapeError("clip without frames cannot be aggregated");
        }
        out.matrix().row(static_cast<Eigen::Index>(b)) = per_frame.matrix().middleRows(begin, count).colwise().mean();
    }
    return out;
}

/// Named copies of every parameter and buffer.
inline std::vector<std::pair<std::string, Tensor>> export_state(Model& model) {
    std::vector<std::pair<std::string, Tensor>> out;
    for (const auto& p : model.parameters()) {
        out.emplace_back(p.name, p.param->value);
    }
    return out;
}

/// Overwrites parameters from named tensors; every parameter must be present with its exact shape.
inline void import_state(Model& model, const std::vector<std::pair<std::string, Tensor>>& state) {
    auto params = model.parameters();
    for (const auto& p : params) {
        const Tensor* found = nullptr;
        for (const auto& [name, t] : state) {
            if (name == p.name) {
                found = &t;
                break;
            }
        }
        if (found == nullptr) {
            throw FormatError("state is missing parameter '" + p.name + "'");
        }
        if (found->shape() != p.param->value.shape()) {
            throw ShapeError("parameter '" + p.name + "' has shape " + to_string(found->shape()) +
                             " but the architecture expects " + to_string(p.param->value.shape()));
        }
        p.param->value = *found;
    }
    if (state.size() != params.size()) {
        throw FormatError("state holds " + std::to_string(state.size()) + " tensors but the model has " +
                          std::to_string(params.size()));
    }
}

}  // namespace vidkd
