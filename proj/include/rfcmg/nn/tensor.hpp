// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "rfcmg/common.hpp"
#include "rfcmg/rng.hpp"

namespace rfcmg::nn {

/// Heap storage aligned to Eigen's widest packet. Vectorized reductions peel
/// a head whose length depends on the start address, so a fixed alignment is
/// what makes repeated evaluations bitwise identical.
template <typename T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

/// Dense NCHW tensor.
template <typename T>
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    Buffer<T> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, T fill = T(0))
        : n(n_), c(c_), h(h_), w(w_), v(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

    std::size_t size() const { return v.size(); }
    std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }
    std::size_t plane_size() const { return static_cast<std::size_t>(h) * w; }
    T* sample(int i) { return v.data() + i * sample_size(); }
    const T* sample(int i) const { return v.data() + i * sample_size(); }
    T& at(int i, int ch, int y, int x) {
        return v[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
    }
    T at(int i, int ch, int y, int x) const {
        return v[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
    }
    bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
};

/// Single-channel batch from spectrogram planes.
template <typename T>
Tensor<T> stack_planes(const std::vector<const Plane*>& planes) {
    require(!planes.empty(), "stack_planes: empty batch");
    const int h = static_cast<int>(planes[0]->rows());
    const int w = static_cast<int>(planes[0]->cols());
    Tensor<T> out(static_cast<int>(planes.size()), 1, h, w);
    for (std::size_t i = 0; i < planes.size(); ++i) {
        require(planes[i]->rows() == h && planes[i]->cols() == w, "stack_planes: ragged batch");
        for (Eigen::Index k = 0; k < planes[i]->size(); ++k) {
            out.v[i * out.sample_size() + k] = static_cast<T>(planes[i]->data()[k]);
        }
    }
    return out;
}

template <typename T>
Plane unstack_plane(const Tensor<T>& t, int i) {
    Plane p(t.h, t.w);
    const T* src = t.sample(i);
    for (Eigen::Index k = 0; k < p.size(); ++k) p.data()[k] = static_cast<double>(src[k]);
    return p;
}

/// Named parameter tensors, addressed by insertion index.
template <typename T>
class ParamStore {
public:
    int add(const std::string& name, std::vector<int> shape) {
        require(!index_.contains(name), "duplicate parameter " + name);
        std::size_t n = 1;
        for (int d : shape) n *= static_cast<std::size_t>(d);
        index_[name] = static_cast<int>(names_.size());
        names_.push_back(name);
        shapes_.push_back(std::move(shape));
        values_.emplace_back(n, T(0));
        return static_cast<int>(names_.size()) - 1;
    }

    int index(const std::string& name) const {
        auto it = index_.find(name);
        require(it != index_.end(), "missing parameter " + name);
        return it->second;
    }
    bool contains(const std::string& name) const { return index_.contains(name); }

    int count() const { return static_cast<int>(names_.size()); }
    std::size_t total_size() const {
        std::size_t n = 0;
        for (const auto& v : values_) n += v.size();
        return n;
    }

    const std::string& name(int i) const { return names_.at(i); }
    const std::vector<int>& shape(int i) const { return shapes_.at(i); }
    Buffer<T>& value(int i) { return values_.at(i); }
    const Buffer<T>& value(int i) const { return values_.at(i); }
    const T* data(int i) const { return values_[i].data(); }
    T* data(int i) { return values_[i].data(); }

    template <typename U>
    ParamStore<U> cast() const {
        ParamStore<U> out;
        for (int i = 0; i < count(); ++i) {
            out.add(names_[i], shapes_[i]);
            auto& dst = out.value(i);
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = static_cast<U>(values_[i][k]);
        }
        return out;
    }

    bool operator==(const ParamStore& o) const {
        return names_ == o.names_ && shapes_ == o.shapes_ && values_ == o.values_;
    }

private:
    std::vector<std::string> names_;
    std::vector<std::vector<int>> shapes_;
    std::vector<Buffer<T>> values_;
    std::unordered_map<std::string, int> index_;
};

/// Gradient buffers parallel to a ParamStore.
template <typename T>
using Grads = std::vector<Buffer<T>>;

template <typename T>
Grads<T> zero_grads(const ParamStore<T>& p) {
    Grads<T> g(p.count());
    for (int i = 0; i < p.count(); ++i) g[i].assign(p.value(i).size(), T(0));
    return g;
}

template <typename T>
void fill_normal(ParamStore<T>& p, int idx, double stddev, Rng& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& x : p.value(idx)) x = static_cast<T>(dist(rng));
}

/// FNV-1a over the raw bytes of every parameter tensor.
template <typename T>
std::uint64_t checksum(const ParamStore<T>& p) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (int i = 0; i < p.count(); ++i) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(p.data(i));
        for (std::size_t k = 0; k < p.value(i).size() * sizeof(T); ++k) {
            h ^= bytes[k];
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

}  // namespace rfcmg::nn
