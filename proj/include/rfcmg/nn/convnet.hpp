// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "rfcmg/nn/layers.hpp"

namespace rfcmg::nn {

/// conv -> groupnorm -> silu blocks with 2x average pooling between them,
/// then global average pooling and a linear head.
template <typename T>
class ConvNet {
public:
    struct Tape {
        Tensor<T> x;
        std::vector<Tensor<T>> in, pre, act;  // per block: conv input, norm output, silu output
        std::vector<GroupNormCache<T>> gn;
        Tensor<T> pooled;
    };

    ConvNet(std::vector<int> channels, int classes, Binder<T> b)
        : channels_(std::move(channels)), classes_(classes) {
        require(!channels_.empty(), "convnet needs at least one block");
        int prev = 1;
        for (std::size_t i = 0; i < channels_.size(); ++i) {
            const std::string name = "block" + std::to_string(i);
            convs_.emplace_back(b, name + ".conv", prev, channels_[i]);
            norms_.emplace_back(b, name + ".norm", channels_[i], groups_for(channels_[i]));
            prev = channels_[i];
        }
        head_ = Linear<T>(b, "head", prev, classes);
    }

    int feature_dim() const { return channels_.back(); }
    int classes() const { return classes_; }
    int blocks() const { return static_cast<int>(channels_.size()); }

    void init(ParamStore<T>& p, Rng& rng) const {
        for (const auto& c : convs_) c.init(p, rng);
        for (const auto& n : norms_) n.init(p);
        head_.init(p, rng);
    }

    /// Returns logits (n, classes, 1, 1).
    Tensor<T> forward(const ParamStore<T>& p, const Tensor<T>& x, Tape& tape) const {
        const int nb = blocks();
        tape.x = x;
        tape.in.resize(nb);
        tape.pre.resize(nb);
        tape.act.resize(nb);
        tape.gn.resize(nb);
        Tensor<T> h = x;
        for (int i = 0; i < nb; ++i) {
            if (i > 0) h = avg_pool2(h);
            tape.in[i] = h;
            h = convs_[i].forward(p, h);
            tape.pre[i] = norms_[i].forward(p, h, tape.gn[i]);
            tape.act[i] = silu(tape.pre[i]);
            h = tape.act[i];
        }
        tape.pooled = global_avg_pool(h);
        return head_.forward(p, tape.pooled);
    }

    void backward(const ParamStore<T>& p, const Tape& tape, const Tensor<T>& dlogits,
                  Grads<T>* g) const {
        Tensor<T> d = head_.backward(p, tape.pooled, dlogits, g);
        const Tensor<T>& last = tape.act.back();
        d = global_avg_pool_backward(d, last.h, last.w);
        for (int i = blocks() - 1; i >= 0; --i) {
            d = silu_backward(tape.pre[i], d);
            d = norms_[i].backward(p, tape.gn[i], d, g);
            d = convs_[i].backward(p, tape.in[i], d, g);
            if (i > 0) d = avg_pool2_backward(d);
        }
    }

    static Tensor<T> global_avg_pool(const Tensor<T>& x) {
        Tensor<T> y(x.n, x.c, 1, 1);
        const std::size_t hw = x.plane_size();
        for (int b = 0; b < x.n; ++b) {
            for (int ch = 0; ch < x.c; ++ch) {
                const T* src = x.sample(b) + ch * hw;
                T acc = 0;
                for (std::size_t i = 0; i < hw; ++i) acc += src[i];
                y.v[b * x.c + ch] = acc / static_cast<T>(hw);
            }
        }
        return y;
    }

    static Tensor<T> global_avg_pool_backward(const Tensor<T>& dy, int h, int w) {
        Tensor<T> dx(dy.n, dy.c, h, w);
        const std::size_t hw = dx.plane_size();
        for (int b = 0; b < dy.n; ++b) {
            for (int ch = 0; ch < dy.c; ++ch) {
                const T v = dy.v[b * dy.c + ch] / static_cast<T>(hw);
                std::fill(dx.sample(b) + ch * hw, dx.sample(b) + (ch + 1) * hw, v);
            }
        }
        return dx;
    }

private:
    static int groups_for(int c) { return c % 4 == 0 ? 4 : 1; }

    std::vector<int> channels_;
    int classes_ = 0;
    std::vector<Conv2d<T>> convs_;
    std::vector<GroupNorm<T>> norms_;
    Linear<T> head_;
};

/// Mean softmax cross-entropy; writes dL/dlogits into `dlogits`.
template <typename T>
double softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels,
                             Tensor<T>& dlogits) {
    const int n = logits.n;
    const int k = static_cast<int>(logits.sample_size());
    require(static_cast<int>(labels.size()) == n, "one label per logit row");
    dlogits = Tensor<T>(logits.n, logits.c, logits.h, logits.w);
    double loss = 0.0;
    for (int b = 0; b < n; ++b) {
        const T* z = logits.sample(b);
        double mx = z[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(z[j]));
        double sum = 0.0;
        for (int j = 0; j < k; ++j) sum += std::exp(z[j] - mx);
        const int y = labels[b];
        require(y >= 0 && y < k, "label out of range for classifier head");
        loss += -(z[y] - mx - std::log(sum));
        for (int j = 0; j < k; ++j) {
            const double pj = std::exp(z[j] - mx) / sum;
            dlogits.sample(b)[j] = static_cast<T>((pj - (j == y ? 1.0 : 0.0)) / n);
        }
    }
    return loss / n;
}

}  // namespace rfcmg::nn
