#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>
#include <functional>
#include <random>

#include "vidkd/nn/conv.hpp"
#include "vidkd/nn/optim.hpp"

using namespace vidkd;
using namespace vidkd::nn;

namespace {

Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, float scale = 1.0f) {
    std::normal_distribution<float> d(0.0f, scale);
    Tensor t(shape);
    for (auto& v : t.values()) {
        v = d(rng);
    }
    return t;
}

double weighted_sum(const Tensor& y, const Tensor& r) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        s += static_cast<double>(y[i]) * r[i];
    }
    return s;
}

/// Compares backward() against central differences of L = sum(forward(x) * R), for the input and
/// every parameter. Forward always runs in training mode.
void check_gradients(Layer& layer, const Tensor& x0, double tol = 2e-2, float h = 1e-2f) {
    std::mt19937_64 rng(99);
    Rng drop_rng(1);
    ForwardContext ctx{true, &drop_rng};
    std::vector<ParamRef> params;
    layer.collect("", params);
    for (auto& p : params) {
        p.param->grad.fill(0.0f);
    }
    const Tensor y = layer.forward(x0, ctx);
    const Tensor r = random_tensor(y.shape(), rng);
    const Tensor dx = layer.backward(r);
    ASSERT_EQ(dx.shape(), x0.shape());

    auto loss_at = [&](const Tensor& x) {
        return weighted_sum(layer.forward(x, ctx), r);
    };
    auto compare = [&](const std::function<float&(std::size_t)>& slot, std::size_t n, const Tensor& analytic,
                       const Tensor& base, const std::string& what) {
        double num_sq = 0.0, diff_sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const float keep = slot(i);
            slot(i) = keep + h;
            const double lp = loss_at(base);
            slot(i) = keep - h;
            const double lm = loss_at(base);
            slot(i) = keep;
            const double numeric = (lp - lm) / (2.0 * h);
            num_sq += numeric * numeric;
            diff_sq += (numeric - analytic[i]) * (numeric - analytic[i]);
        }
        EXPECT_LT(std::sqrt(diff_sq), tol * std::max(std::sqrt(num_sq), 1e-3)) << what;
    };

    Tensor x = x0;
    compare([&](std::size_t i) -> float& { return x[i]; }, x.size(), dx, x, "input");
    for (auto& p : params) {
        if (!p.param->needs_grad()) {
            continue;
        }
        const Tensor g = p.param->grad;
        compare([&](std::size_t i) -> float& { return p.param->value[i]; }, p.param->value.size(), g, x0, p.name);
    }
}

/// Values at least `gap` apart and away from zero, so kinks and ties sit outside the probe step.
Tensor spaced_tensor(const Shape& shape, std::mt19937_64& rng, float gap = 0.1f) {
    Tensor t(shape);
    std::vector<float> vals;
    for (std::size_t i = 0; i < t.size(); ++i) {
        vals.push_back((static_cast<float>(i) - static_cast<float>(t.size() / 2)) * gap + gap / 2.0f);
    }
    std::shuffle(vals.begin(), vals.end(), rng);
    std::copy(vals.begin(), vals.end(), t.data());
    return t;
}

}  // namespace

TEST(LayerGradients, Linear) {
    std::mt19937_64 rng(1);
    Rng init(2);
    Linear layer(5, 3, init);
    check_gradients(layer, random_tensor({4, 5}, rng));
}

TEST(LayerGradients, Conv2dStrideAndPadding) {
    std::mt19937_64 rng(3);
    Rng init(4);
    Conv2d layer(2, 3, 3, 2, 1, init);
    check_gradients(layer, random_tensor({2, 2, 5, 5}, rng));
}

TEST(LayerGradients, Conv2dNoBias) {
    std::mt19937_64 rng(5);
    Rng init(6);
    Conv2d layer(3, 2, 1, 1, 0, init, false);
    check_gradients(layer, random_tensor({1, 3, 4, 4}, rng));
}

TEST(LayerGradients, BatchNormTraining) {
    std::mt19937_64 rng(7);
    BatchNorm layer(3);
    check_gradients(layer, random_tensor({4, 3, 2, 2}, rng));
}

TEST(LayerGradients, ReluAndPooling) {
    std::mt19937_64 rng(8);
    ReLU relu;
    check_gradients(relu, spaced_tensor({3, 7}, rng));
    MaxPool2d pool(3, 2, 1);
    check_gradients(pool, spaced_tensor({1, 2, 6, 6}, rng));
    GlobalAvgPool gap;
    check_gradients(gap, random_tensor({2, 3, 3, 4}, rng));
}

TEST(LayerGradients, BasicBlockWithDownsample) {
    std::mt19937_64 rng(9);
    Rng init(10);
    BasicBlock block(2, 4, 2, init);
    check_gradients(block, random_tensor({2, 2, 6, 6}, rng), 5e-2);
}

TEST(LayerGradients, Sequential) {
    std::mt19937_64 rng(11);
    Rng init(12);
    Sequential seq;
    seq.emplace<Linear>(6, 8, init);
    seq.emplace<ReLU>();
    seq.emplace<Linear>(8, 3, init);
    // Small step so no hidden unit crosses the ReLU kink.
    check_gradients(seq, random_tensor({5, 6}, rng), 2e-2, 1e-3f);
}

TEST(Layers, ConvKnownValues) {
    Rng init(0);
    Conv2d conv(1, 1, 3, 1, 1, init, false);
    std::vector<ParamRef> params;
    conv.collect("", params);
    params[0].param->value.fill(1.0f);
    Tensor x({1, 1, 3, 3}, 1.0f);
    const Tensor y = conv.forward(x, {});
    // Box filter over a zero-padded 3x3 field of ones.
    const std::vector<float> expected{4, 6, 4, 6, 9, 6, 4, 6, 4};
    EXPECT_EQ(y.storage(), expected);
}

TEST(Layers, BatchNormEvalUsesRunningStats) {
    BatchNorm bn(2);
    Tensor x({1, 2}, std::vector<float>{3.0f, -1.0f});
    const Tensor y = bn.forward(x, {});
    EXPECT_NEAR(y[0], 3.0f / std::sqrt(1.0f + 1e-5f), 1e-6f);
    EXPECT_NEAR(y[1], -1.0f / std::sqrt(1.0f + 1e-5f), 1e-6f);
}

TEST(Layers, BatchNormTrainingNormalizesBatch) {
    std::mt19937_64 rng(13);
    BatchNorm bn(3);
    const Tensor x = random_tensor({16, 3}, rng, 4.0f);
    const Tensor y = bn.forward(x, {true, nullptr});
    for (std::size_t c = 0; c < 3; ++c) {
        double mean = 0.0, sq = 0.0;
        for (std::size_t n = 0; n < 16; ++n) {
            mean += y.at(n, c);
            sq += static_cast<double>(y.at(n, c)) * y.at(n, c);
        }
        mean /= 16;
        EXPECT_NEAR(mean, 0.0, 1e-5);
        EXPECT_NEAR(sq / 16 - mean * mean, 1.0, 1e-3);
    }
}

TEST(Layers, DropoutIdentityInEvalAndSeededInTraining) {
    Dropout d(0.5f);
    Tensor x({2, 50}, 1.0f);
    EXPECT_EQ(d.forward(x, {}).storage(), x.storage());
    Rng a(5), b(5);
    const Tensor ya = d.forward(x, {true, &a});
    const Tensor yb = d.forward(x, {true, &b});
    EXPECT_EQ(ya.storage(), yb.storage());
    for (float v : ya.values()) {
        EXPECT_TRUE(v == 0.0f || v == 2.0f);
    }
    EXPECT_THROW(d.forward(x, {true, nullptr}), ConfigError);
    EXPECT_THROW(Dropout(1.0f), ConfigError);
}

TEST(Layers, ShapeErrors) {
    Rng init(0);
    Linear lin(3, 2, init);
    EXPECT_THROW(lin.forward(Tensor({2, 4}), {}), ShapeError);
    Conv2d conv(3, 2, 3, 1, 0, init);
    EXPECT_THROW(conv.forward(Tensor({1, 2, 5, 5}), {}), ShapeError);
    EXPECT_THROW(conv.forward(Tensor({1, 3, 2, 2}), {}), ShapeError);
}

namespace {

struct OneParam {
    Parameter p{Tensor({2}, std::vector<float>{1.0f, -2.0f})};
    std::vector<ParamRef> refs() { return {{"w", &p}}; }
};

}  // namespace

TEST(Optimizers, AdamFirstStepMovesByLearningRate) {
    OneParam o;
    Adam adam(o.refs());
    o.p.grad = Tensor({2}, std::vector<float>{0.3f, -5.0f});
    adam.step(0.01);
    // After one step the bias-corrected update is lr * g / (|g| + eps).
    EXPECT_NEAR(o.p.value[0], 1.0f - 0.01f, 1e-6f);
    EXPECT_NEAR(o.p.value[1], -2.0f + 0.01f, 1e-6f);
}

TEST(Optimizers, AdamMatchesHandRecurrence) {
    OneParam o;
    Adam adam(o.refs());
    double m = 0, v = 0, w = 1.0;
    const double grads[] = {0.5, -0.25, 1.0, 0.1};
    for (int t = 1; t <= 4; ++t) {
        const double g = grads[t - 1];
        o.p.grad = Tensor({2}, std::vector<float>{static_cast<float>(g), 0.0f});
        adam.step(0.1);
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        w -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
        EXPECT_NEAR(o.p.value[0], w, 1e-5);
    }
    EXPECT_EQ(o.p.value[1], -2.0f);
}

TEST(Optimizers, MomentumSgdMatchesHandRecurrence) {
    OneParam o;
    MomentumSgd sgd(o.refs(), 0.9, 5e-4);
    double b = 0.0, w = 1.0;
    const double grads[] = {0.5, -0.25, 1.0};
    for (int t = 0; t < 3; ++t) {
        o.p.grad = Tensor({2}, std::vector<float>{static_cast<float>(grads[t]), 0.0f});
        sgd.step(0.1);
        const double g = grads[t] + 5e-4 * w;
        b = t == 0 ? g : 0.9 * b + g;
        w -= 0.1 * b;
        EXPECT_NEAR(o.p.value[0], w, 1e-6);
    }
}

TEST(Optimizers, SkipFrozenAndBuffers) {
    Parameter frozen(Tensor({1}, 1.0f));
    frozen.trainable = false;
    Parameter buffer(Tensor({1}, 1.0f), true);
    Parameter live(Tensor({1}, 1.0f));
    for (auto* p : {&frozen, &buffer, &live}) {
        p->grad.fill(1.0f);
    }
    MomentumSgd sgd({{"f", &frozen}, {"b", &buffer}, {"l", &live}}, 0.9, 0.0);
    EXPECT_EQ(sgd.parameter_count(), 1u);
    sgd.step(0.5);
    EXPECT_EQ(frozen.value[0], 1.0f);
    EXPECT_EQ(buffer.value[0], 1.0f);
    EXPECT_EQ(live.value[0], 0.5f);
}

TEST(Optimizers, ClipGradNorm) {
    OneParam o;
    Adam adam(o.refs());
    o.p.grad = Tensor({2}, std::vector<float>{3.0f, 4.0f});
    EXPECT_NEAR(adam.clip_grad_norm(1.0), 5.0, 1e-9);
    EXPECT_NEAR(o.p.grad[0], 0.6f, 1e-6f);
    EXPECT_NEAR(o.p.grad[1], 0.8f, 1e-6f);
    EXPECT_NEAR(adam.clip_grad_norm(0.0), 1.0, 1e-6);
}

TEST(Optimizers, StateRoundTripContinuesIdentically) {
    OneParam a, b;
    Adam oa(a.refs()), ob(b.refs());
    a.p.grad = Tensor({2}, std::vector<float>{0.2f, -0.7f});
    oa.step(0.05);
    b.p.value = a.p.value;
    ob.load_state(oa.state());
    for (int i = 0; i < 3; ++i) {
        a.p.grad = b.p.grad = Tensor({2}, std::vector<float>{0.1f * i, 0.3f});
        oa.step(0.05);
        ob.step(0.05);
    }
    EXPECT_EQ(a.p.value.storage(), b.p.value.storage());
    OneParam c;
    MomentumSgd sgd(c.refs(), 0.9, 0.0);
    EXPECT_THROW(sgd.load_state(oa.state()), FormatError);
}
