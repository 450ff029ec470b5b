#pragma once

#include <json.hpp>

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vidkd/nn/layers.hpp"

namespace vidkd::nn {

struct OptimizerState {
    nlohmann::json meta = nlohmann::json::object();
    std::vector<std::pair<std::string, Tensor>> tensors;
};

/// Updates only parameters that require gradients; frozen parameters and buffers are never touched.
class Optimizer {
public:
    explicit Optimizer(const std::vector<ParamRef>& params) {
        for (const auto& p : params) {
            if (p.param->needs_grad()) {
                params_.push_back(p);
            }
        }
    }
    virtual ~Optimizer() = default;

    std::size_t parameter_count() const noexcept { return params_.size(); }

    void zero_grad() {
        for (auto& p : params_) {
            p.param->grad.fill(0.0f);
        }
    }

    /// Rescales gradients so their global L2 norm is at most max_norm; returns the norm before clipping.
    double clip_grad_norm(double max_norm) {
        double sq = 0.0;
        for (auto& p : params_) {
            for (float g : p.param->grad.values()) {
                sq += static_cast<double>(g) * g;
            }
        }
        const double norm = std::sqrt(sq);
        if (max_norm > 0.0 && norm > max_norm) {
            const auto scale = static_cast<float>(max_norm / (norm + 1e-12));
            for (auto& p : params_) {
                for (float& g : p.param->grad.values()) {
                    g *= scale;
                }
            }
        }
        return norm;
    }

    virtual void step(double learning_rate) = 0;
    virtual std::string kind() const = 0;
    virtual OptimizerState state() const = 0;
    virtual void load_state(const OptimizerState& state) = 0;

protected:
    std::vector<ParamRef> params_;

    static const Tensor& find(const OptimizerState& s, const std::string& name, const Shape& shape) {
        for (const auto& [n, t] : s.tensors) {
            if (n == name) {
                if (t.shape() != shape) {
                    throw ShapeError("optimizer state '" + name + "' has shape " + to_string(t.shape()) +
                                     ", expected " + to_string(shape));
                }
                return t;
            }
        }
        throw FormatError("optimizer state is missing '" + name + "'");
    }
};

class Adam : public Optimizer {
public:
    Adam(const std::vector<ParamRef>& params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
         double weight_decay = 0.0)
        : Optimizer(params), beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {
        for (const auto& p : params_) {
            m_.emplace_back(p.param->value.shape());
            v_.emplace_back(p.param->value.shape());
        }
    }

    void step(double lr) override {
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& w = params_[i].param->value;
            const auto& g = params_[i].param->grad;
            for (std::size_t j = 0; j < w.size(); ++j) {
                const double grad = g[j] + weight_decay_ * w[j];
                m_[i][j] = static_cast<float>(beta1_ * m_[i][j] + (1.0 - beta1_) * grad);
                v_[i][j] = static_cast<float>(beta2_ * v_[i][j] + (1.0 - beta2_) * grad * grad);
                const double mhat = m_[i][j] / c1;
                const double vhat = v_[i][j] / c2;
                w[j] = static_cast<float>(w[j] - lr * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    std::string kind() const override { return "adam"; }

    OptimizerState state() const override {
        OptimizerState s;
        s.meta = {{"kind", kind()}, {"step", t_}};
        for (std::size_t i = 0; i < params_.size(); ++i) {
            s.tensors.emplace_back("m." + params_[i].name, m_[i]);
            s.tensors.emplace_back("v." + params_[i].name, v_[i]);
        }
        return s;
    }

    void load_state(const OptimizerState& s) override {
        if (s.meta.value("kind", "") != kind()) {
            throw FormatError("optimizer state kind mismatch (expected adam)");
        }
        t_ = s.meta.at("step").get<long>();
        for (std::size_t i = 0; i < params_.size(); ++i) {
            m_[i] = find(s, "m." + params_[i].name, m_[i].shape());
            v_[i] = find(s, "v." + params_[i].name, v_[i].shape());
        }
    }

private:
    double beta1_, beta2_, eps_, weight_decay_;
    long t_ = 0;
    std::vector<Tensor> m_, v_;
};

/// SGD with heavy-ball momentum and L2 weight decay folded into the gradient.
class MomentumSgd : public Optimizer {
public:
    MomentumSgd(const std::vector<ParamRef>& params, double momentum, double weight_decay)
        : Optimizer(params), momentum_(momentum), weight_decay_(weight_decay) {
        for (const auto& p : params_) {
            buf_.emplace_back(p.param->value.shape());
        }
    }

    void step(double lr) override {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& w = params_[i].param->value;
            const auto& g = params_[i].param->grad;
            for (std::size_t j = 0; j < w.size(); ++j) {
                const double grad = g[j] + weight_decay_ * w[j];
                const double b = started_ ? momentum_ * buf_[i][j] + grad : grad;
                buf_[i][j] = static_cast<float>(b);
                w[j] = static_cast<float>(w[j] - lr * b);
            }
        }
        started_ = true;
    }

    std::string kind() const override { return "momentum-sgd"; }

    OptimizerState state() const override {
        OptimizerState s;
        s.meta = {{"kind", kind()}, {"started", started_}};
        for (std::size_t i = 0; i < params_.size(); ++i) {
            s.tensors.emplace_back("momentum." + params_[i].name, buf_[i]);
        }
        return s;
    }

    void load_state(const OptimizerState& s) override {
        if (s.meta.value("kind", "") != kind()) {
            throw FormatError("optimizer state kind mismatch (expected momentum-sgd)");
        }
        started_ = s.meta.at("started").get<bool>();
        for (std::size_t i = 0; i < params_.size(); ++i) {
            buf_[i] = find(s, "momentum." + params_[i].name, buf_[i].shape());
        }
    }

private:
    double momentum_, weight_decay_;
    bool started_ = false;
    std::vector<Tensor> buf_;
};

}  // namespace vidkd::nn
