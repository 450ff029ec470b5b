#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "vidkd/error.hpp"
#include "vidkd/random.hpp"
#include "vidkd/tensor.hpp"

namespace vidkd::nn {

/// A learnable array (or a persistent buffer such as normalization running statistics).
/// `trainable` means training may change the value: through gradients for ordinary parameters,
/// through running statistics for buffers. Freezing clears it for both.
struct Parameter {
    Tensor value;
    Tensor grad;
    bool trainable = true;
    bool buffer = false;

    Parameter() = default;
    explicit Parameter(Tensor v, bool is_buffer = false)
        : value(std::move(v)), grad(value.shape()), buffer(is_buffer) {}

    bool needs_grad() const noexcept { return trainable && !buffer; }
};

struct ParamRef {
    std::string name;
    Parameter* param;
};

struct ForwardContext {
    bool training = false;
    Rng* rng = nullptr;  // required only by stochastic layers in training mode
};

class Layer {
public:
    virtual ~Layer() = default;

    /// In training mode the layer caches what backward() needs.
    virtual Tensor forward(const Tensor& x, const ForwardContext& ctx) = 0;
    /// Accumulates parameter gradients and returns the gradient w.r.t. the last forward input.
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual void collect(const std::string& prefix, std::vector<ParamRef>& out) { (void)prefix, (void)out; }
};

inline std::string join_name(const std::string& prefix, const std::string& name) {
    return prefix.empty() ? name : prefix + "." + name;
}

/// He-normal initialization for weights feeding a rectifier.
inline void init_he_normal(Tensor& w, std::size_t fan_in, Rng& rng) {
    std::normal_distribution<float> dist(0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)));
    for (auto& v : w.values()) {
        v = dist(rng);
    }
}

/// y = x W^T + b, x: N x in.
class Linear : public Layer {
public:
    Linear(std::size_t in, std::size_t out, Rng& rng, bool bias = true)
        : in_(in), out_(out), has_bias_(bias), weight_(Tensor({out, in})) {
        init_he_normal(weight_.value, in, rng);
        if (has_bias_) {
            bias_ = Parameter(Tensor({out}));
        }
    }

    std::size_t in_features() const noexcept { return in_; }
    std::size_t out_features() const noexcept { return out_; }

    Tensor forward(const Tensor& x, const ForwardContext& ctx) override {
        if (x.rank() != 2 || x.dim(1) != in_) {
            throw ShapeError("linear layer expects N x " + std::to_string(in_) + ", got " + to_string(x.shape()));
        }
        Tensor y({x.dim(0), out_});
        y.matrix().noalias() = x.matrix() * weight_.value.matrix().transpose();
        if (has_bias_) {
            const Eigen::Map<const Eigen::RowVectorXf> b(bias_.value.data(), static_cast<Eigen::Index>(out_));
            y.matrix().rowwise() += b;
        }
        if (ctx.training) {
            input_ = x;
        }
        return y;
    }

    Tensor backward(const Tensor& g) override {
        if (weight_.needs_grad()) {
            weight_.grad.matrix().noalias() += g.matrix().transpose() * input_.matrix();
        }
        if (has_bias_ && bias_.needs_grad()) {
            Eigen::Map<Eigen::RowVectorXf> db(bias_.grad.data(), static_cast<Eigen::Index>(out_));
            db += g.matrix().colwise().sum();
        }
        Tensor dx({g.dim(0), in_});
        dx.matrix().noalias() = g.matrix() * weight_.value.matrix();
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) override {
        out.push_back({join_name(prefix, "weight"), &weight_});
        if (has_bias_) {
            out.push_back({join_name(prefix, "bias"), &bias_});
        }
    }

private:
    std::size_t in_, out_;
    bool has_bias_;
    Parameter weight_;
    Parameter bias_;
    Tensor input_;
};

/// Batch normalization over axis 1 of N x C or N x C x H x W input.
/// A training batch with a single value per channel cannot estimate variance; such batches are
/// normalized with the running statistics, which are then left untouched.
class BatchNorm : public Layer {
public:
    explicit BatchNorm(std::size_t channels, float momentum = 0.1f, float eps = 1e-5f)
        : channels_(channels),
          momentum_(momentum),
          eps_(eps),
          gamma_(Tensor({channels}, 1.0f)),
          beta_(Tensor({channels})),
          running_mean_(Tensor({channels}), true),
          running_var_(Tensor({channels}, 1.0f), true) {}

    Tensor forward(const Tensor& x, const ForwardContext& ctx) override {
        if (x.rank() < 2 || x.dim(1) != channels_) {
            throw ShapeError("batch norm expects N x " + std::to_string(channels_) + " x ..., got " +
                             to_string(x.shape()));
        }
        const std::size_t n = x.dim(0);
        const std::size_t spatial = x.size() / (n * channels_);
        const std::size_t count = n * spatial;
        Tensor y(x.shape());
        mean_.assign(channels_, 0.0f);
        inv_std_.assign(channels_, 0.0f);
        use_batch_stats_ = ctx.training && count > 1;
        for (std::size_t c = 0; c < channels_; ++c) {
            double mean = running_mean_.value[c];
            double var = running_var_.value[c];
            if (use_batch_stats_) {
                double sum = 0.0;
                double sq = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const float* p = x.data() + (i * channels_ + c) * spatial;
                    for (std::size_t s = 0; s < spatial; ++s) {
                        sum += p[s];
                        sq += static_cast<double>(p[s]) * p[s];
                    }
                }
                mean = sum / static_cast<double>(count);
                var = std::max(0.0, sq / static_cast<double>(count) - mean * mean);
                const double unbiased = var * static_cast<double>(count) / static_cast<double>(count - 1);
                running_mean_.value[c] =
                    static_cast<float>((1.0 - momentum_) * running_mean_.value[c] + momentum_ * mean);
                running_var_.value[c] =
                    static_cast<float>((1.0 - momentum_) * running_var_.value[c] + momentum_ * unbiased);
            }
            const auto m = static_cast<float>(mean);
            const auto inv = static_cast<float>(1.0 / std::sqrt(var + eps_));
            mean_[c] = m;
            inv_std_[c] = inv;
            const float g = gamma_.value[c];
            const float b = beta_.value[c];
            for (std::size_t i = 0; i < n; ++i) {
                const float* p = x.data() + (i * channels_ + c) * spatial;
                float* q = y.data() + (i * channels_ + c) * spatial;
                for (std::size_t s = 0; s < spatial; ++s) {
                    q[s] = (p[s] - m) * inv * g + b;
                }
            }
        }
        if (ctx.training) {
            input_ = x;
        }
        return y;
    }

    Tensor backward(const Tensor& g) override {
        const std::size_t n = input_.dim(0);
        const std::size_t spatial = input_.size() / (n * channels_);
        const auto count = static_cast<double>(n * spatial);
        Tensor dx(input_.shape());
        for (std::size_t c = 0; c < channels_; ++c) {
            const float m = mean_[c];
            const float inv = inv_std_[c];
            double sum_g = 0.0;
            double sum_gx = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const float* gp = g.data() + (i * channels_ + c) * spatial;
                const float* xp = input_.data() + (i * channels_ + c) * spatial;
                for (std::size_t s = 0; s < spatial; ++s) {
                    sum_g += gp[s];
                    sum_gx += static_cast<double>(gp[s]) * (xp[s] - m) * inv;
                }
            }
            if (gamma_.needs_grad()) {
                gamma_.grad[c] += static_cast<float>(sum_gx);
            }
            if (beta_.needs_grad()) {
                beta_.grad[c] += static_cast<float>(sum_g);
            }
            const float gamma = gamma_.value[c];
            for (std::size_t i = 0; i < n; ++i) {
                const float* gp = g.data() + (i * channels_ + c) * spatial;
                const float* xp = input_.data() + (i * channels_ + c) * spatial;
                float* dp = dx.data() + (i * channels_ + c) * spatial;
                for (std::size_t s = 0; s < spatial; ++s) {
                    if (use_batch_stats_) {
                        const double xhat = (xp[s] - m) * inv;
                        dp[s] = static_cast<float>(gamma * inv * (gp[s] - sum_g / count - xhat * sum_gx / count));
                    } else {
                        dp[s] = gamma * inv * gp[s];
                    }
                }
            }
        }
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) override {
        out.push_back({join_name(prefix, "weight"), &gamma_});
        out.push_back({join_name(prefix, "bias"), &beta_});
        out.push_back({join_name(prefix, "running_mean"), &running_mean_});
        out.push_back({join_name(prefix, "running_var"), &running_var_});
    }

private:
    std::size_t channels_;
    float momentum_, eps_;
    Parameter gamma_, beta_, running_mean_, running_var_;
    Tensor input_;
    std::vector<float> mean_, inv_std_;
    bool use_batch_stats_ = false;
};

class ReLU : public Layer {
public:
    Tensor forward(const Tensor& x, const ForwardContext& ctx) override {
        Tensor y = x;
        for (auto& v : y.values()) {
            v = v > 0.0f ? v : 0.0f;
        }
        if (ctx.training) {
            output_ = y;
        }
        return y;
    }

    Tensor backward(const Tensor& g) override {
        Tensor dx = g;
        for (std::size_t i = 0; i < dx.size(); ++i) {
            if (output_[i] <= 0.0f) {
                dx[i] = 0.0f;
            }
        }
        return dx;
    }

private:
    Tensor output_;
};

/// Inverted dropout; identity outside training.
class Dropout : public Layer {
public:
    explicit Dropout(float rate) : rate_(rate) {
        if (!(rate >= 0.0f && rate < 1.0f)) {
            throw ConfigError("dropout rate must lie in [0, 1)");
        }
    }

    Tensor forward(const Tensor& x, const ForwardContext& ctx) override {
        active_ = ctx.training && rate_ > 0.0f;
        if (!active_) {
            return x;
        }
        if (ctx.rng == nullptr) {
            throw ConfigError("dropout in training mode needs a random generator");
        }
        std::bernoulli_distribution keep(1.0 - rate_);
        const float scale = 1.0f / (1.0f - rate_);
        mask_ = Tensor(x.shape());
        Tensor y = x;
        for (std::size_t i = 0; i < y.size(); ++i) {
            mask_[i] = keep(*ctx.rng) ? scale : 0.0f;
            y[i] *= mask_[i];
        }
        return y;
    }

    Tensor backward(const Tensor& g) override {
        if (!active_) {
            return g;
        }
        Tensor dx = g;
        for (std::size_t i = 0; i < dx.size(); ++i) {
            dx[i] *= mask_[i];
        }
        return dx;
    }

private:
    float rate_;
    bool active_ = false;
    Tensor mask_;
};

class Sequential : public Layer {
public:
    Sequential() = default;

    template <typename L, typename... Args>
    L& emplace(Args&&... args) {
        auto layer = std::make_unique<L>(std::forward<Args>(args)...);
        L& ref = *layer;
        layers_.push_back(std::move(layer));
        return ref;
    }

    void append(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

    std::size_t size() const noexcept { return layers_.size(); }
    bool empty() const noexcept { return layers_.empty(); }

    Tensor forward(const Tensor& x, const ForwardContext& ctx) override {
        Tensor h = x;
        for (auto& l : layers_) {
            h = l->forward(h, ctx);
        }
        return h;
    }

    Tensor backward(const Tensor& g) override {
        Tensor d = g;
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
            d = (*it)->backward(d);
        }
        return d;
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) override {
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            layers_[i]->collect(join_name(prefix, std::to_string(i)), out);
        }
    }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace vidkd::nn
