// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rfcmg/nn/layers.hpp"

namespace rfcmg::nn {

inline int norm_groups(int channels) {
    for (int g : {8, 4, 2}) {
        if (channels % g == 0) return g;
    }
    return 1;
}

/// Pre-activation residual block with an additive per-channel step projection.
template <typename T>
struct ResBlock {
    GroupNorm<T> n1, n2;
    Conv2d<T> c1, c2;
    Linear<T> tproj;
    std::optional<Conv2d<T>> skip;
    int cin = 0, cout = 0;

    struct Cache {
        Tensor<T> x, a1, s1, a2, s2;
        GroupNormCache<T> g1, g2;
    };

    ResBlock() = default;
    ResBlock(Binder<T>& b, const std::string& name, int cin_, int cout_, int tdim)
        : n1(b, name + ".norm1", cin_, norm_groups(cin_)),
          n2(b, name + ".norm2", cout_, norm_groups(cout_)),
          c1(b, name + ".conv1", cin_, cout_),
          c2(b, name + ".conv2", cout_, cout_),
          tproj(b, name + ".temb", tdim, cout_),
          cin(cin_),
          cout(cout_) {
        if (cin != cout) skip.emplace(b, name + ".skip", cin, cout, 1);
    }

    void init(ParamStore<T>& p, Rng& rng) const {
        n1.init(p);
        n2.init(p);
        c1.init(p, rng);
        c2.init(p, rng, 0.5);
        tproj.init(p, rng);
        if (skip) skip->init(p, rng);
    }

    Tensor<T> forward(const ParamStore<T>& p, const Tensor<T>& x, const Tensor<T>& temb_act,
                      Cache& c) const {
        c.x = x;
        c.a1 = n1.forward(p, x, c.g1);
        c.s1 = silu(c.a1);
        Tensor<T> h = c1.forward(p, c.s1);
        add_channel_bias(h, tproj.forward(p, temb_act));
        c.a2 = n2.forward(p, h, c.g2);
        c.s2 = silu(c.a2);
        Tensor<T> out = c2.forward(p, c.s2);
        if (skip) {
            add_inplace(out, skip->forward(p, x));
        } else {
            add_inplace(out, x);
        }
        return out;
    }

    /// Accumulates into `dtemb_act`; returns dL/dx.
    Tensor<T> backward(const ParamStore<T>& p, const Cache& c, const Tensor<T>& temb_act,
                       const Tensor<T>& dy, Grads<T>* g, Tensor<T>& dtemb_act) const {
        Tensor<T> dx_skip = skip ? skip->backward(p, c.x, dy, g) : dy;
        Tensor<T> d = c2.backward(p, c.s2, dy, g);
        d = silu_backward(c.a2, d);
        d = n2.backward(p, c.g2, d, g);
        add_inplace(dtemb_act, tproj.backward(p, temb_act, channel_sums(d), g));
        d = c1.backward(p, c.s1, d, g);
        d = silu_backward(c.a1, d);
        d = n1.backward(p, c.g1, d, g);
        add_inplace(d, dx_skip);
        return d;
    }
};

struct UNetShape {
    int height = 32;
    int width = 32;
    int base_channels = 32;
    std::vector<int> channel_multipliers{1, 2, 4};
    int time_embed_dim = 128;
};

/// Encoder/decoder noise predictor. The optional conditioning vector is added
/// to the step embedding before it reaches the residual blocks, so a zero
/// vector leaves the output unchanged.
template <typename T>
class UNet {
public:
    struct Tape {
        Tensor<T> x, temb0, m1, sm1, temb, tact;
        std::vector<typename ResBlock<T>::Cache> down, up;
        typename ResBlock<T>::Cache mid;
        GroupNormCache<T> out_gn;
        Tensor<T> out_a, out_s;
    };

    UNet(const UNetShape& shape, Binder<T> b) : shape_(shape) {
        const int d = shape.time_embed_dim;
        const int c = shape.base_channels;
        const int levels = static_cast<int>(shape.channel_multipliers.size());
        require(levels >= 1, "unet needs at least one resolution level");
        mlp1_ = Linear<T>(b, "time.mlp1", d, d);
        mlp2_ = Linear<T>(b, "time.mlp2", d, d);
        in_conv_ = Conv2d<T>(b, "in_conv", 1, c);
        std::vector<int> ch;
        for (int m : shape.channel_multipliers) ch.push_back(c * m);
        int prev = c;
        for (int i = 0; i < levels; ++i) {
            down_.emplace_back(b, "down" + std::to_string(i), prev, ch[i], d);
            prev = ch[i];
        }
        mid_ = ResBlock<T>(b, "mid", ch.back(), ch.back(), d);
        up_.resize(std::max(levels - 1, 0));
        for (int i = levels - 2; i >= 0; --i) {
            up_[i] = ResBlock<T>(b, "up" + std::to_string(i), ch[i + 1] + ch[i], ch[i], d);
        }
        out_norm_ = GroupNorm<T>(b, "out_norm", c, norm_groups(c));
        out_conv_ = Conv2d<T>(b, "out_conv", c, 1);
        channels_ = ch;
    }

    const UNetShape& shape() const { return shape_; }

    void init(ParamStore<T>& p, Rng& rng) const {
        mlp1_.init(p, rng);
        mlp2_.init(p, rng);
        in_conv_.init(p, rng);
        for (const auto& r : down_) r.init(p, rng);
        mid_.init(p, rng);
        for (const auto& r : up_) r.init(p, rng);
        out_norm_.init(p);
        out_conv_.init(p, rng, 0.1);
    }

    /// `cond` is (n, time_embed_dim, 1, 1) or null.
    Tensor<T> forward(const ParamStore<T>& p, const Tensor<T>& x, std::span<const int> steps,
                      const Tensor<T>* cond, Tape& tape) const {
        require(x.c == 1 && x.h == shape_.height && x.w == shape_.width,
                "unet input shape does not match config");
        require(static_cast<int>(steps.size()) == x.n, "one step index per batch element");
        const int levels = static_cast<int>(down_.size());
        tape.x = x;
        tape.temb0 = timestep_embedding<T>(steps, shape_.time_embed_dim);
        tape.m1 = mlp1_.forward(p, tape.temb0);
        tape.sm1 = silu(tape.m1);
        tape.temb = mlp2_.forward(p, tape.sm1);
        if (cond) {
            require(cond->n == x.n && static_cast<int>(cond->sample_size()) == shape_.time_embed_dim,
                    "conditioning vector has wrong dimension");
            add_inplace(tape.temb, *cond);
        }
        tape.tact = silu(tape.temb);

        tape.down.resize(levels);
        tape.up.resize(up_.size());
        Tensor<T> h = in_conv_.forward(p, x);
        std::vector<Tensor<T>> skips;
        for (int i = 0; i < levels; ++i) {
            h = down_[i].forward(p, h, tape.tact, tape.down[i]);
            if (i < levels - 1) {
                skips.push_back(h);
                h = avg_pool2(h);
            }
        }
        h = mid_.forward(p, h, tape.tact, tape.mid);
        for (int i = levels - 2; i >= 0; --i) {
            h = upsample2(h);
            h = up_[i].forward(p, concat_channels(h, skips[i]), tape.tact, tape.up[i]);
        }
        tape.out_a = out_norm_.forward(p, h, tape.out_gn);
        tape.out_s = silu(tape.out_a);
        return out_conv_.forward(p, tape.out_s);
    }

    /// Backpropagates dy. Parameter gradients go to `g` (if non-null); the
    /// conditioning gradient goes to `dcond` (if non-null).
    void backward(const ParamStore<T>& p, const Tape& tape, const Tensor<T>& dy, Grads<T>* g,
                  Tensor<T>* dcond) const {
        const int levels = static_cast<int>(down_.size());
        Tensor<T> dtact(tape.tact.n, tape.tact.c, 1, 1);
        Tensor<T> d = out_conv_.backward(p, tape.out_s, dy, g);
        d = silu_backward(tape.out_a, d);
        d = out_norm_.backward(p, tape.out_gn, d, g);

        std::vector<Tensor<T>> dskips(std::max(levels - 1, 0));
        for (int i = 0; i <= levels - 2; ++i) {
            Tensor<T> dcat = up_[i].backward(p, tape.up[i], tape.tact, d, g, dtact);
            auto [dh, ds] = split_channels(dcat, channels_[i + 1]);
            dskips[i] = std::move(ds);
            d = upsample2_backward(dh);
        }
        d = mid_.backward(p, tape.mid, tape.tact, d, g, dtact);
        for (int i = levels - 1; i >= 0; --i) {
            if (i < levels - 1) {
                d = avg_pool2_backward(d);
                add_inplace(d, dskips[i]);
            }
            d = down_[i].backward(p, tape.down[i], tape.tact, d, g, dtact);
        }
        if (g) in_conv_.backward(p, tape.x, d, g);

        const Tensor<T> dtemb = silu_backward(tape.temb, dtact);
        if (dcond) *dcond = dtemb;
        if (g) {
            Tensor<T> dm = mlp2_.backward(p, tape.sm1, dtemb, g);
            dm = silu_backward(tape.m1, dm);
            mlp1_.backward(p, tape.temb0, dm, g);
        }
    }

private:
    UNetShape shape_;
    Linear<T> mlp1_, mlp2_;
    Conv2d<T> in_conv_;
    std::vector<ResBlock<T>> down_;
    ResBlock<T> mid_;
    std::vector<ResBlock<T>> up_;
    GroupNorm<T> out_norm_;
    Conv2d<T> out_conv_;
    std::vector<int> channels_;
};

}  // namespace rfcmg::nn
