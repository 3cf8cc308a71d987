// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

// Minimal layer kit with explicit forward/backward passes. Layers are plain
// descriptors holding parameter indices; parameters live in a ParamStore and
// activations needed by backward live in caller-owned caches, so a layer can
// be shared read-only between threads.

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rfcmg/nn/tensor.hpp"

namespace rfcmg::nn {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Registers parameters into a mutable store, or looks them up in an existing one.
template <typename T>
class Binder {
public:
    explicit Binder(ParamStore<T>& store) : mut_(&store), store_(&store) {}
    explicit Binder(const ParamStore<T>& store) : store_(&store) {}

    int get(const std::string& name, const std::vector<int>& shape) {
        if (mut_ && !mut_->contains(name)) return mut_->add(name, shape);
        const int idx = store_->index(name);
        require(store_->shape(idx) == shape, "parameter " + name + " has unexpected shape");
        return idx;
    }

private:
    ParamStore<T>* mut_ = nullptr;
    const ParamStore<T>* store_ = nullptr;
};

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
inline T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
using ArrMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
template <typename T>
using ConstArrMap = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;

template <typename T>
Tensor<T> silu(const Tensor<T>& x) {
    Tensor<T> y(x.n, x.c, x.h, x.w);
    const auto n = static_cast<Eigen::Index>(x.v.size());
    ConstArrMap<T> a(x.v.data(), n);
    ArrMap<T>(y.v.data(), n) = a / (T(1) + (-a).exp());
    return y;
}

template <typename T>
Tensor<T> silu_backward(const Tensor<T>& x, const Tensor<T>& dy) {
    Tensor<T> dx(dy.n, dy.c, dy.h, dy.w);
    const auto n = static_cast<Eigen::Index>(x.v.size());
    ConstArrMap<T> a(x.v.data(), n);
    const Eigen::Array<T, Eigen::Dynamic, 1> s = T(1) / (T(1) + (-a).exp());
    ArrMap<T>(dx.v.data(), n) = ConstArrMap<T>(dy.v.data(), n) * s * (T(1) + a * (T(1) - s));
    return dx;
}

template <typename T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b) {
    for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
}

// ---------------------------------------------------------------------------
// Convolution (stride 1, same padding, odd kernel)

template <typename T>
struct Conv2d {
    int weight = -1, bias = -1;
    int cin = 0, cout = 0, k = 3;

    Conv2d() = default;
    Conv2d(Binder<T>& b, const std::string& name, int cin_, int cout_, int k_ = 3)
        : cin(cin_), cout(cout_), k(k_) {
        weight = b.get(name + ".weight", {cout, cin, k, k});
        bias = b.get(name + ".bias", {cout});
    }

    void init(ParamStore<T>& p, Rng& rng, double gain = 1.0) const {
        fill_normal(p, weight, gain / std::sqrt(static_cast<double>(cin * k * k)), rng);
    }

    /// Per-sample columns: (cin*k*k) x (h*w), written into `cols`.
    void im2col(const T* src, int h, int w, RowMat<T>& cols) const {
        const int pad = k / 2;
        const int hw = h * w;
        cols.resize(static_cast<Eigen::Index>(cin) * k * k, hw);
        for (int ci = 0; ci < cin; ++ci) {
            const T* plane = src + static_cast<std::size_t>(ci) * hw;
            for (int ky = 0; ky < k; ++ky) {
                const int oy = ky - pad;
                for (int kx = 0; kx < k; ++kx) {
                    const int ox = kx - pad;
                    const int x0 = std::max(0, -ox);
                    const int x1 = std::min(w, w - ox);
                    T* row = cols.row((ci * k + ky) * k + kx).data();
                    for (int y = 0; y < h; ++y) {
                        T* d = row + y * w;
                        const int sy = y + oy;
                        if (sy < 0 || sy >= h) {
                            std::fill(d, d + w, T(0));
                            continue;
                        }
                        std::fill(d, d + x0, T(0));
                        std::copy(plane + sy * w + x0 + ox, plane + sy * w + x1 + ox, d + x0);
                        std::fill(d + x1, d + w, T(0));
                    }
                }
            }
        }
    }

    void col2im(const RowMat<T>& cols, int h, int w, T* dst) const {
        const int pad = k / 2;
        const int hw = h * w;
        for (int ci = 0; ci < cin; ++ci) {
            T* plane = dst + static_cast<std::size_t>(ci) * hw;
            for (int ky = 0; ky < k; ++ky) {
                const int oy = ky - pad;
                for (int kx = 0; kx < k; ++kx) {
                    const int ox = kx - pad;
                    const int x0 = std::max(0, -ox);
                    const int x1 = std::min(w, w - ox);
                    const T* row = cols.row((ci * k + ky) * k + kx).data();
                    for (int y = 0; y < h; ++y) {
                        const int sy = y + oy;
                        if (sy < 0 || sy >= h) continue;
                        T* d = plane + sy * w + ox;
                        const T* s = row + y * w;
                        for (int xx = x0; xx < x1; ++xx) d[xx] += s[xx];
                    }
                }
            }
        }
    }

    Tensor<T> forward(const ParamStore<T>& p, const Tensor<T>& x) const {
        require(x.c == cin, "conv input channels mismatch");
        const Eigen::Index kk = static_cast<Eigen::Index>(cin) * k * k;
        const int hw = x.h * x.w;
        Eigen::Map<const RowMat<T>> W(p.data(weight), cout, kk);
        Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bvec(p.data(bias), cout);
        Tensor<T> out(x.n, cout, x.h, x.w);
        RowMat<T> cols;
        for (int b = 0; b < x.n; ++b) {
            Eigen::Map<RowMat<T>> Y(out.sample(b), cout, hw);
            if (k == 1) {
                Y.noalias() = W * Eigen::Map<const RowMat<T>>(x.sample(b), cin, hw);
            } else {
                im2col(x.sample(b), x.h, x.w, cols);
                Y.noalias() = W * cols;
            }
            Y.colwise() += bvec;
        }
        return out;
    }

    /// Returns dL/dx; accumulates dL/dW, dL/db into `g` when non-null.
    Tensor<T> backward(const ParamStore<T>& p, const Tensor<T>& x, const Tensor<T>& dy,
                       Grads<T>* g) const {
        const Eigen::Index kk = static_cast<Eigen::Index>(cin) * k * k;
        const int hw = x.h * x.w;
        Eigen::Map<const RowMat<T>> W(p.data(weight), cout, kk);
        Tensor<T> dx(x.n, cin, x.h, x.w);
        RowMat<T> cols, dcols;
        for (int b = 0; b < x.n; ++b) {
            Eigen::Map<const RowMat<T>> dY(dy.sample(b), cout, hw);
            Eigen::Map<const RowMat<T>> X(x.sample(b), cin, hw);
            if (g) {
                Eigen::Map<RowMat<T>> dW((*g)[weight].data(), cout, kk);
                if (k == 1) {
                    dW.noalias() += dY * X.transpose();
                } else {
                    im2col(x.sample(b), x.h, x.w, cols);
                    dW.noalias() += dY * cols.transpose();
                }
                Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db((*g)[bias].data(), cout);
                db += dY.rowwise().sum();
            }
            if (k == 1) {
                Eigen::Map<RowMat<T>>(dx.sample(b), cin, hw).noalias() = W.transpose() * dY;
            } else {
                dcols.noalias() = W.transpose() * dY;
                col2im(dcols, x.h, x.w, dx.sample(b));
            }
        }
        return dx;
    }
};

// ---------------------------------------------------------------------------
// Group normalization

template <typename T>
struct GroupNormCache {
    Tensor<T> xhat;
    std::vector<T> inv_std;  // n * groups
};

template <typename T>
struct GroupNorm {
    int gamma = -1, beta = -1;
    int channels = 0, groups = 1;
    T eps = T(1e-5);

    GroupNorm() = default;
    GroupNorm(Binder<T>& b, const std::string& name, int channels_, int groups_)
        : channels(channels_), groups(groups_) {
        require(channels % groups == 0, "group norm: channels not divisible by groups");
        gamma = b.get(name + ".gamma", {channels});
        beta = b.get(name + ".beta", {channels});
    }

    void init(ParamStore<T>& p) const { std::fill(p.value(gamma).begin(), p.value(gamma).end(), T(1)); }

    Tensor<T> forward(const ParamStore<T>& p, const Tensor<T>& x, GroupNormCache<T>& cache) const {
        const int cpg = channels / groups;
        const std::size_t hw = x.plane_size();
        const std::size_t m = cpg * hw;
        cache.xhat = Tensor<T>(x.n, x.c, x.h, x.w);
        cache.inv_std.assign(static_cast<std::size_t>(x.n) * groups, T(0));
        Tensor<T> y(x.n, x.c, x.h, x.w);
        const T* g = p.data(gamma);
        const T* be = p.data(beta);
        for (int b = 0; b < x.n; ++b) {
            for (int gi = 0; gi < groups; ++gi) {
                const std::size_t off = (static_cast<std::size_t>(b) * x.c + gi * cpg) * hw;
                ConstArrMap<T> src(x.v.data() + off, static_cast<Eigen::Index>(m));
                const T mean = src.mean();
                const T var = (src - mean).square().mean();
                const T inv = T(1) / std::sqrt(var + eps);
                cache.inv_std[b * groups + gi] = inv;
                for (int cc = 0; cc < cpg; ++cc) {
                    const int ch = gi * cpg + cc;
                    const auto k0 = static_cast<Eigen::Index>(cc * hw);
                    const auto len = static_cast<Eigen::Index>(hw);
                    ArrMap<T> xh(cache.xhat.v.data() + off + k0, len);
                    xh = (src.segment(k0, len) - mean) * inv;
                    ArrMap<T>(y.v.data() + off + k0, len) = g[ch] * xh + be[ch];
                }
            }
        }
        return y;
    }

    Tensor<T> backward(const ParamStore<T>& p, const GroupNormCache<T>& cache, const Tensor<T>& dy,
                       Grads<T>* grads) const {
        const int cpg = channels / groups;
        const std::size_t hw = dy.plane_size();
        const std::size_t m = cpg * hw;
        const T* g = p.data(gamma);
        Tensor<T> dx(dy.n, dy.c, dy.h, dy.w);
        Buffer<T> dxhat(m);
        for (int b = 0; b < dy.n; ++b) {
            for (int gi = 0; gi < groups; ++gi) {
                const std::size_t off = (static_cast<std::size_t>(b) * dy.c + gi * cpg) * hw;
                const auto len = static_cast<Eigen::Index>(hw);
                ArrMap<T> dxh(dxhat.data(), static_cast<Eigen::Index>(m));
                ConstArrMap<T> xh(cache.xhat.v.data() + off, static_cast<Eigen::Index>(m));
                for (int cc = 0; cc < cpg; ++cc) {
                    const int ch = gi * cpg + cc;
                    ConstArrMap<T> d(dy.v.data() + off + cc * hw, len);
                    if (grads) {
                        (*grads)[gamma][ch] += (d * xh.segment(cc * len, len)).sum();
                        (*grads)[beta][ch] += d.sum();
                    }
                    dxh.segment(cc * len, len) = d * g[ch];
                }
                const T sum_d = dxh.sum();
                const T sum_dx = (dxh * xh).sum();
                const T inv = cache.inv_std[b * groups + gi];
                const T mm = static_cast<T>(m);
                ArrMap<T>(dx.v.data() + off, static_cast<Eigen::Index>(m)) =
                    inv / mm * (mm * dxh - sum_d - xh * sum_dx);
            }
        }
        return dx;
    }
};

// ---------------------------------------------------------------------------
// Fully connected over (n, c, 1, 1) tensors

template <typename T>
struct Linear {
    int weight = -1, bias = -1;
    int in = 0, out = 0;

    Linear() = default;
    Linear(Binder<T>& b, const std::string& name, int in_, int out_) : in(in_), out(out_) {
        weight = b.get(name + ".weight", {out, in});
        bias = b.get(name + ".bias", {out});
    }

    void init(ParamStore<T>& p, Rng& rng, double gain = 1.0) const {
        fill_normal(p, weight, gain / std::sqrt(static_cast<double>(in)), rng);
    }

    Tensor<T> forward(const ParamStore<T>& p, const Tensor<T>& x) const {
        require(static_cast<int>(x.sample_size()) == in, "linear input size mismatch");
        Eigen::Map<const RowMat<T>> X(x.v.data(), x.n, in);
        Eigen::Map<const RowMat<T>> W(p.data(weight), out, in);
        Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bvec(p.data(bias), out);
        Tensor<T> y(x.n, out, 1, 1);
        Eigen::Map<RowMat<T>> Y(y.v.data(), x.n, out);
        Y.noalias() = X * W.transpose();
        Y.rowwise() += bvec;
        return y;
    }

    Tensor<T> backward(const ParamStore<T>& p, const Tensor<T>& x, const Tensor<T>& dy,
                       Grads<T>* g) const {
        Eigen::Map<const RowMat<T>> X(x.v.data(), x.n, in);
        Eigen::Map<const RowMat<T>> W(p.data(weight), out, in);
        Eigen::Map<const RowMat<T>> dY(dy.v.data(), dy.n, out);
        if (g) {
            Eigen::Map<RowMat<T>> dW((*g)[weight].data(), out, in);
            dW.noalias() += dY.transpose() * X;
            Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db((*g)[bias].data(), out);
            db += dY.colwise().sum();
        }
        Tensor<T> dx(x.n, x.c, x.h, x.w);
        Eigen::Map<RowMat<T>> dX(dx.v.data(), x.n, in);
        dX.noalias() = dY * W;
        return dx;
    }
};

// ---------------------------------------------------------------------------
// Resampling and channel plumbing

template <typename T>
Tensor<T> avg_pool2(const Tensor<T>& x) {
    Tensor<T> y(x.n, x.c, x.h / 2, x.w / 2);
    for (int b = 0; b < x.n; ++b)
        for (int ch = 0; ch < x.c; ++ch)
            for (int yy = 0; yy < y.h; ++yy)
                for (int xx = 0; xx < y.w; ++xx)
                    y.at(b, ch, yy, xx) = T(0.25) * (x.at(b, ch, 2 * yy, 2 * xx) +
                                                     x.at(b, ch, 2 * yy, 2 * xx + 1) +
                                                     x.at(b, ch, 2 * yy + 1, 2 * xx) +
                                                     x.at(b, ch, 2 * yy + 1, 2 * xx + 1));
    return y;
}

template <typename T>
Tensor<T> avg_pool2_backward(const Tensor<T>& dy) {
    Tensor<T> dx(dy.n, dy.c, dy.h * 2, dy.w * 2);
    for (int b = 0; b < dx.n; ++b)
        for (int ch = 0; ch < dx.c; ++ch)
            for (int yy = 0; yy < dx.h; ++yy)
                for (int xx = 0; xx < dx.w; ++xx)
                    dx.at(b, ch, yy, xx) = T(0.25) * dy.at(b, ch, yy / 2, xx / 2);
    return dx;
}

template <typename T>
Tensor<T> upsample2(const Tensor<T>& x) {
    Tensor<T> y(x.n, x.c, x.h * 2, x.w * 2);
    for (int b = 0; b < y.n; ++b)
        for (int ch = 0; ch < y.c; ++ch)
            for (int yy = 0; yy < y.h; ++yy)
                for (int xx = 0; xx < y.w; ++xx) y.at(b, ch, yy, xx) = x.at(b, ch, yy / 2, xx / 2);
    return y;
}

template <typename T>
Tensor<T> upsample2_backward(const Tensor<T>& dy) {
    Tensor<T> dx(dy.n, dy.c, dy.h / 2, dy.w / 2);
    for (int b = 0; b < dy.n; ++b)
        for (int ch = 0; ch < dy.c; ++ch)
            for (int yy = 0; yy < dy.h; ++yy)
                for (int xx = 0; xx < dy.w; ++xx) dx.at(b, ch, yy / 2, xx / 2) += dy.at(b, ch, yy, xx);
    return dx;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.n == b.n && a.h == b.h && a.w == b.w, "concat: shape mismatch");
    Tensor<T> y(a.n, a.c + b.c, a.h, a.w);
    for (int i = 0; i < a.n; ++i) {
        std::copy(a.sample(i), a.sample(i) + a.sample_size(), y.sample(i));
        std::copy(b.sample(i), b.sample(i) + b.sample_size(), y.sample(i) + a.sample_size());
    }
    return y;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& y, int ca) {
    Tensor<T> a(y.n, ca, y.h, y.w), b(y.n, y.c - ca, y.h, y.w);
    for (int i = 0; i < y.n; ++i) {
        std::copy(y.sample(i), y.sample(i) + a.sample_size(), a.sample(i));
        std::copy(y.sample(i) + a.sample_size(), y.sample(i) + y.sample_size(), b.sample(i));
    }
    return {std::move(a), std::move(b)};
}

/// Broadcast-add a per-channel (n, c, 1, 1) tensor onto every pixel.
template <typename T>
void add_channel_bias(Tensor<T>& x, const Tensor<T>& bias) {
    const std::size_t hw = x.plane_size();
    for (int b = 0; b < x.n; ++b)
        for (int ch = 0; ch < x.c; ++ch) {
            const T v = bias.v[static_cast<std::size_t>(b) * x.c + ch];
            T* dst = x.sample(b) + ch * hw;
            for (std::size_t i = 0; i < hw; ++i) dst[i] += v;
        }
}

template <typename T>
Tensor<T> channel_sums(const Tensor<T>& x) {
    Tensor<T> s(x.n, x.c, 1, 1);
    const std::size_t hw = x.plane_size();
    for (int b = 0; b < x.n; ++b)
        for (int ch = 0; ch < x.c; ++ch) {
            const T* src = x.sample(b) + ch * hw;
            T acc = 0;
            for (std::size_t i = 0; i < hw; ++i) acc += src[i];
            s.v[static_cast<std::size_t>(b) * x.c + ch] = acc;
        }
    return s;
}

/// Sinusoidal step embedding, (n, dim, 1, 1).
template <typename T>
Tensor<T> timestep_embedding(std::span<const int> steps, int dim) {
    Tensor<T> e(static_cast<int>(steps.size()), dim, 1, 1);
    const int half = dim / 2;
    for (std::size_t b = 0; b < steps.size(); ++b) {
        for (int i = 0; i < half; ++i) {
            const double freq = std::exp(-std::log(10000.0) * i / half);
            const double arg = steps[b] * freq;
            e.v[b * dim + i] = static_cast<T>(std::sin(arg));
            e.v[b * dim + half + i] = static_cast<T>(std::cos(arg));
        }
    }
    return e;
}

}  // namespace rfcmg::nn
