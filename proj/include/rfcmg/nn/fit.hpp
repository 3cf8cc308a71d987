// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "rfcmg/nn/adam.hpp"
#include "rfcmg/nn/convnet.hpp"

namespace rfcmg::nn {

struct FitOptions {
    int epochs = 30;
    long steps = 0;  // when positive: exactly this many optimizer steps, epochs ignored
    int batch = 64;
    double lr = 5e-4;
    bool cosine = true;
    std::uint64_t seed = 0;
};

struct FitHistory {
    std::vector<double> epoch_loss;
    std::vector<double> epoch_accuracy;  // running training accuracy during each epoch
};

/// Minibatch cross-entropy training of a ConvNet with Adam.
inline FitHistory fit_convnet(const ConvNet<float>& net, ParamStore<float>& params,
                              const std::vector<const Plane*>& data, const std::vector<int>& labels,
                              const FitOptions& opt) {
    require(!data.empty() && data.size() == labels.size(), "classifier data/labels mismatch");
    require(opt.batch >= 1 && opt.epochs >= 0 && opt.steps >= 0, "invalid classifier schedule");
    Adam<float> adam(params, {.lr = opt.lr});
    Rng rng(derive_seed(opt.seed, "fit.shuffle"));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t per_epoch = (data.size() + opt.batch - 1) / opt.batch;
    const long budget = opt.steps > 0 ? opt.steps : static_cast<long>(per_epoch) * opt.epochs;
    const double total = static_cast<double>(std::max(budget, 1L));
    FitHistory hist;
    long step = 0;
    while (step < budget) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        long correct = 0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size() && step < budget; start += opt.batch) {
            const std::size_t end = std::min(order.size(), start + opt.batch);
            std::vector<const Plane*> ptrs;
            std::vector<int> ys;
            for (std::size_t i = start; i < end; ++i) {
                ptrs.push_back(data[order[i]]);
                ys.push_back(labels[order[i]]);
            }
            if (opt.cosine) {
                adam.set_lr(opt.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * step / total)));
            }
            const auto x = stack_planes<float>(ptrs);
            typename ConvNet<float>::Tape tape;
            const auto logits = net.forward(params, x, tape);
            Tensor<float> dlogits;
            const double loss = softmax_cross_entropy(logits, ys, dlogits);
            if (!std::isfinite(loss)) throw NonFiniteError("classifier loss became non-finite");
            for (int b = 0; b < logits.n; ++b) {
                const float* z = logits.sample(b);
                const int pred = static_cast<int>(std::max_element(z, z + logits.c) - z);
                correct += pred == ys[b];
            }
            auto grads = zero_grads(params);
            net.backward(params, tape, dlogits, &grads);
            adam.step(params, grads);
            loss_sum += loss * static_cast<double>(end - start);
            seen += end - start;
            ++step;
        }
        hist.epoch_loss.push_back(loss_sum / static_cast<double>(seen));
        hist.epoch_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(seen));
    }
    return hist;
}

/// Arg-max predictions in batches.
inline std::vector<int> predict_convnet(const ConvNet<float>& net, const ParamStore<float>& params,
                                        const std::vector<const Plane*>& data) {
    std::vector<int> out;
    out.reserve(data.size());
    constexpr std::size_t kChunk = 64;
    for (std::size_t start = 0; start < data.size(); start += kChunk) {
        const std::size_t end = std::min(data.size(), start + kChunk);
        std::vector<const Plane*> ptrs(data.begin() + start, data.begin() + end);
        typename ConvNet<float>::Tape tape;
        const auto logits = net.forward(params, stack_planes<float>(ptrs), tape);
        for (int b = 0; b < logits.n; ++b) {
            const float* z = logits.sample(b);
            out.push_back(static_cast<int>(std::max_element(z, z + logits.c) - z));
        }
    }
    return out;
}

}  // namespace rfcmg::nn
