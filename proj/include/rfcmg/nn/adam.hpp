// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "rfcmg/nn/tensor.hpp"

namespace rfcmg::nn {

/// Adam with optional decoupled weight decay (AdamW when weight_decay > 0).
template <typename T>
class Adam {
public:
    struct Options {
        double lr = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 0.0;
    };

    explicit Adam(const ParamStore<T>& params, Options opt) : opt_(opt) {
        m_.resize(params.count());
        v_.resize(params.count());
        for (int i = 0; i < params.count(); ++i) {
            m_[i].assign(params.value(i).size(), 0.0);
            v_[i].assign(params.value(i).size(), 0.0);
        }
    }

    void set_lr(double lr) { opt_.lr = lr; }
    double lr() const { return opt_.lr; }
    long steps() const { return t_; }

    void step(ParamStore<T>& params, const Grads<T>& grads) {
        ++t_;
        const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
        for (int i = 0; i < params.count(); ++i) {
            auto& p = params.value(i);
            const auto& g = grads[i];
            auto& m = m_[i];
            auto& v = v_[i];
            for (std::size_t k = 0; k < p.size(); ++k) {
                const double gk = static_cast<double>(g[k]);
                m[k] = opt_.beta1 * m[k] + (1.0 - opt_.beta1) * gk;
                v[k] = opt_.beta2 * v[k] + (1.0 - opt_.beta2) * gk * gk;
                double update = (m[k] / c1) / (std::sqrt(v[k] / c2) + opt_.eps);
                if (opt_.weight_decay > 0.0) update += opt_.weight_decay * static_cast<double>(p[k]);
                p[k] = static_cast<T>(static_cast<double>(p[k]) - opt_.lr * update);
            }
        }
    }

private:
    Options opt_;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

/// Adam over a single dense vector; used for embedding rows.
class VectorAdam {
public:
    VectorAdam() = default;
    VectorAdam(std::size_t n, double lr) : lr_(lr), m_(n, 0.0), v_(n, 0.0) {}

    void step(std::span<double> x, std::span<const double> g) {
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t k = 0; k < x.size(); ++k) {
            m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * g[k];
            v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * g[k] * g[k];
            x[k] -= lr_ * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + 1e-8);
        }
    }

private:
    double lr_ = 1e-2;
    double beta1_ = 0.9, beta2_ = 0.999;
    long t_ = 0;
    std::vector<double> m_, v_;
};

}  // namespace rfcmg::nn
