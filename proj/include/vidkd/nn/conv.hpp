#pragma once

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "vidkd/nn/layers.hpp"

namespace vidkd::nn {

/// 2D convolution over N x C x H x W input (square kernel, symmetric zero padding), via im2col.
class Conv2d : public Layer {
public:
    Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
           std::size_t padding, Rng& rng, bool bias = true)
        : in_(in_channels),
          out_(out_channels),
          k_(kernel),
          stride_(stride),
          pad_(padding),
          has_bias_(bias),
          weight_(Tensor({out_channels, in_channels, kernel, kernel})) {
        init_he_normal(weight_.value, in_channels * kernel * kernel, rng);
        if (has_bias_) {
            bias_ = Parameter(Tensor({out_channels}));
        }
    }

    Tensor forward(const Tensor& x, const ForwardContext& ctx) override {
        if (x.rank() != 4 || x.dim(1) != in_) {
            throw ShapeError("conv expects N x " + std::to_string(in_) + " x H x W, got " + to_string(x.shape()));
        }
        const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
        if (h + 2 * pad_ < k_ || w + 2 * pad_ < k_) {
            throw ShapeError("conv input " + to_string(x.shape()) + " smaller than kernel");
        }
        oh_ = (h + 2 * pad_ - k_) / stride_ + 1;
        ow_ = (w + 2 * pad_ - k_) / stride_ + 1;
        const std::size_t ckk = in_ * k_ * k_;
        const std::size_t plane = oh_ * ow_;
        Tensor y({n, out_, oh_, ow_});
        RowMatrixXf col(static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(plane));
        const ConstMatrixMap wmat(weight_.value.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(ckk));
        for (std::size_t i = 0; i < n; ++i) {
            im2col(x.data() + i * in_ * h * w, h, w, col.data());
            MatrixMap out(y.data() + i * out_ * plane, static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(plane));
            out.noalias() = wmat * col;
            if (has_bias_) {
                for (std::size_t o = 0; o < out_; ++o) {
                    out.row(static_cast<Eigen::Index>(o)).array() += bias_.value[o];
                }
            }
        }
        if (ctx.training) {
            input_ = x;
        }
        return y;
    }

    Tensor backward(const Tensor& g) override {
        const std::size_t n = input_.dim(0), h = input_.dim(2), w = input_.dim(3);
        const std::size_t ckk = in_ * k_ * k_;
        const std::size_t plane = oh_ * ow_;
        Tensor dx(input_.shape());
        RowMatrixXf col(static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(plane));
        RowMatrixXf dcol(static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(plane));
        const ConstMatrixMap wmat(weight_.value.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(ckk));
        MatrixMap dw(weight_.grad.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(ckk));
        for (std::size_t i = 0; i < n; ++i) {
            const ConstMatrixMap gy(g.data() + i * out_ * plane, static_cast<Eigen::Index>(out_),
                                    static_cast<Eigen::Index>(plane));
            if (weight_.needs_grad()) {
                im2col(input_.data() + i * in_ * h * w, h, w, col.data());
                dw.noalias() += gy * col.transpose();
            }
            if (has_bias_ && bias_.needs_grad()) {
                for (std::size_t o = 0; o < out_; ++o) {
                    bias_.grad[o] += gy.row(static_cast<Eigen::Index>(o)).sum();
                }
            }
            dcol.noalias() = wmat.transpose() * gy;
            col2im(dcol.data(), h, w, dx.data() + i * in_ * h * w);
        }
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) override {
        out.push_back({join_name(prefix, "weight"), &weight_});
        if (has_bias_) {
            out.push_back({join_name(prefix, "bias"), &bias_});
        }
    }

private:
    void im2col(const float* src, std::size_t h, std::size_t w, float* col) const {
        const std::size_t plane = oh_ * ow_;
        for (std::size_t c = 0; c < in_; ++c) {
            for (std::size_t ky = 0; ky < k_; ++ky) {
                for (std::size_t kx = 0; kx < k_; ++kx) {
                    float* dst = col + ((c * k_ + ky) * k_ + kx) * plane;
                    for (std::size_t oy = 0; oy < oh_; ++oy) {
                        const auto iy = static_cast<std::ptrdiff_t>(oy * stride_ + ky) - static_cast<std::ptrdiff_t>(pad_);
                        for (std::size_t ox = 0; ox < ow_; ++ox) {
                            const auto ix =
                                static_cast<std::ptrdiff_t>(ox * stride_ + kx) - static_cast<std::ptrdiff_t>(pad_);
                            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(h) &&
                                                ix < static_cast<std::ptrdiff_t>(w);
                            dst[oy * ow_ + ox] = inside ? src[(c * h + static_cast<std::size_t>(iy)) * w +
                                                              static_cast<std::size_t>(ix)]
                                                        : 0.0f;
                        }
                    }
                }
            }
        }
    }

    void col2im(const float* col, std::size_t h, std::size_t w, float* dst) const {
        const std::size_t plane = oh_ * ow_;
        for (std::size_t c = 0; c < in_; ++c) {
            for (std::size_t ky = 0; ky < k_; ++ky) {
                for (std::size_t kx = 0; kx < k_; ++kx) {
                    const float* src = col + ((c * k_ + ky) * k_ + kx) * plane;
                    for (std::size_t oy = 0; oy < oh_; ++oy) {
                        const auto iy = static_cast<std::ptrdiff_t>(oy * stride_ + ky) - static_cast<std::ptrdiff_t>(pad_);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
                            continue;
                        }
                        for (std::size_t ox = 0; ox < ow_; ++ox) {
                            const auto ix =
                                static_cast<std::ptrdiff_t>(ox * stride_ + kx) - static_cast<std::ptrdiff_t>(pad_);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) {
                                continue;
                            }
                            dst[(c * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)] +=
                                src[oy * ow_ + ox];
                        }
                    }
                }
            }
        }
    }

    std::size_t in_, out_, k_, stride_, pad_;
    bool has_bias_;
    Parameter weight_;
    Parameter bias_;
    Tensor input_;
    std::size_t oh_ = 0, ow_ = 0;
};

class MaxPool2d : public Layer {
public:
    MaxPool2d(std::size_t kernel, std::size_t stride, std::size_t padding)
        : k_(kernel), stride_(stride), pad_(padding) {}

    Tensor forward(const Tensor& x, const ForwardContext& ctx) override {
        const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
        const std::size_t oh = (h + 2 * pad_ - k_) / stride_ + 1;
        const std::size_t ow = (w + 2 * pad_ - k_) / stride_ + 1;
        Tensor y({n, c, oh, ow});
        argmax_.assign(y.size(), 0);
        for (std::size_t p = 0; p < n * c; ++p) {
            const float* src = x.data() + p * h * w;
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    float best = -std::numeric_limits<float>::infinity();
                    std::size_t best_idx = 0;
                    for (std::size_t ky = 0; ky < k_; ++ky) {
                        const auto iy = static_cast<std::ptrdiff_t>(oy * stride_ + ky) - static_cast<std::ptrdiff_t>(pad_);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
                            continue;
                        }
                        for (std::size_t kx = 0; kx < k_; ++kx) {
                            const auto ix =
                                static_cast<std::ptrdiff_t>(ox * stride_ + kx) - static_cast<std::ptrdiff_t>(pad_);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) {
                                continue;
                            }
                            const std::size_t idx = static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix);
                            if (src[idx] > best) {
                                best = src[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    const std::size_t o = (p * oh + oy) * ow + ox;
                    y[o] = best;
                    argmax_[o] = p * h * w + best_idx;
                }
            }
        }
        if (ctx.training) {
            input_shape_ = x.shape();
        }
        return y;
    }

    Tensor backward(const Tensor& g) override {
        Tensor dx(input_shape_);
        for (std::size_t o = 0; o < g.size(); ++o) {
            dx[argmax_[o]] += g[o];
        }
        return dx;
    }

private:
    std::size_t k_, stride_, pad_;
    std::vector<std::size_t> argmax_;
    Shape input_shape_;
};

/// N x C x H x W -> N x C spatial mean.
class GlobalAvgPool : public Layer {
public:
    Tensor forward(const Tensor& x, const ForwardContext& ctx) override {
        const std::size_t n = x.dim(0), c = x.dim(1);
        const std::size_t spatial = x.size() / (n * c);
        Tensor y({n, c});
        for (std::size_t p = 0; p < n * c; ++p) {
            double s = 0.0;
            const float* src = x.data() + p * spatial;
            for (std::size_t i = 0; i < spatial; ++i) {
                s += src[i];
            }
            y[p] = static_cast<float>(s / static_cast<double>(spatial));
        }
        if (ctx.training) {
            input_shape_ = x.shape();
        }
        return y;
    }

    Tensor backward(const Tensor& g) override {
        Tensor dx(input_shape_);
        const std::size_t nc = input_shape_[0] * input_shape_[1];
        const std::size_t spatial = dx.size() / nc;
        const float inv = 1.0f / static_cast<float>(spatial);
        for (std::size_t p = 0; p < nc; ++p) {
            float* dst = dx.data() + p * spatial;
            for (std::size_t i = 0; i < spatial; ++i) {
                dst[i] = g[p] * inv;
            }
        }
        return dx;
    }

private:
    Shape input_shape_;
};

/// Two 3x3 convolutions with normalization and an identity (or projected) shortcut.
class BasicBlock : public Layer {
public:
    BasicBlock(std::size_t in, std::size_t out, std::size_t stride, Rng& rng) {
        main_.emplace<Conv2d>(in, out, 3, stride, 1, rng, false);
        main_.emplace<BatchNorm>(out);
        main_.emplace<ReLU>();
        main_.emplace<Conv2d>(out, out, 3, 1, 1, rng, false);
        main_.emplace<BatchNorm>(out);
        if (stride != 1 || in != out) {
            shortcut_ = std::make_unique<Sequential>();
            shortcut_->emplace<Conv2d>(in, out, 1, stride, 0, rng, false);
            shortcut_->emplace<BatchNorm>(out);
        }
    }

    Tensor forward(const Tensor& x, const ForwardContext& ctx) override {
        Tensor y = main_.forward(x, ctx);
        const Tensor s = shortcut_ ? shortcut_->forward(x, ctx) : x;
        if (s.shape() != y.shape()) {
            throw ShapeError("residual shapes differ: " + to_string(y.shape()) + " vs " + to_string(s.shape()));
        }
        for (std::size_t i = 0; i < y.size(); ++i) {
            y[i] += s[i];
        }
        return relu_.forward(y, ctx);
    }

    Tensor backward(const Tensor& g) override {
        const Tensor d = relu_.backward(g);
        Tensor dx = main_.backward(d);
        const Tensor ds = shortcut_ ? shortcut_->backward(d) : d;
        for (std::size_t i = 0; i < dx.size(); ++i) {
            dx[i] += ds[i];
        }
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) override {
        main_.collect(join_name(prefix, "main"), out);
        if (shortcut_) {
            shortcut_->collect(join_name(prefix, "shortcut"), out);
        }
    }

private:
    Sequential main_;
    std::unique_ptr<Sequential> shortcut_;
    ReLU relu_;
};

}  // namespace vidkd::nn
