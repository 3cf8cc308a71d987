// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "rfcmg/common.hpp"
#include "rfcmg/diffusion.hpp"
#include "rfcmg/nn/adam.hpp"
#include "rfcmg/nn/unet.hpp"

namespace rfcmg::denoiser {

struct DenoiserConfig {
    nn::UNetShape shape;
    std::uint64_t seed = 0;

    int embed_dim() const { return shape.time_embed_dim; }
    /// Throws InvalidArgument on power-of-two, channel or embedding violations.
    void validate() const;
};

nlohmann::json to_json(const DenoiserConfig& c);
DenoiserConfig config_from_json(const nlohmann::json& j);

struct TrainingMeta {
    std::string source_dataset;
    long steps = 0;
    double final_loss = 0.0;
    std::vector<double> loss_history;
};

struct DenoiserCheckpoint {
    DenoiserConfig config;
    nn::ParamStore<float> params;
    TrainingMeta meta;

    /// Content id derived from the parameter bytes.
    std::string id() const;
};

DenoiserCheckpoint init_params(const DenoiserConfig& config);

/// Closed-form parameter count of the U-Net described by `shape`.
std::size_t parameter_count(const nn::UNetShape& shape);

/// eps prediction for one sample. An empty `cond` means no conditioning.
Plane denoise(const DenoiserCheckpoint& ckpt, const Plane& xt, int t,
              std::span<const double> cond = {});

/// Batched prediction; `conds` is empty or holds one vector per sample.
std::vector<Plane> denoise_batch(const DenoiserCheckpoint& ckpt, const std::vector<Plane>& xt,
                                 std::span<const int> t,
                                 const std::vector<std::vector<double>>& conds = {});

/// Mean squared eps error of `net` on a batch; fills `grads` when non-null.
template <typename T>
double eps_loss(const nn::UNet<T>& net, const nn::ParamStore<T>& params, const nn::Tensor<T>& xt,
                std::span<const int> steps, const nn::Tensor<T>& eps, nn::Grads<T>* grads) {
    typename nn::UNet<T>::Tape tape;
    const nn::Tensor<T> pred = net.forward(params, xt, steps, nullptr, tape);
    nn::Tensor<T> dy(pred.n, pred.c, pred.h, pred.w);
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double diff = static_cast<double>(pred.v[i]) - static_cast<double>(eps.v[i]);
        loss += diff * diff * inv;
        dy.v[i] = static_cast<T>(2.0 * diff * inv);
    }
    if (grads) net.backward(params, tape, dy, grads, nullptr);
    return loss;
}

struct TrainOptions {
    long steps = 0;
    double lr = 2e-4;
    int batch = 32;
    std::uint64_t seed = 0;
    std::string dataset_id;
    /// Called every `report_every` steps with (step, windowed mean loss).
    std::function<void(long, double)> progress;
    long report_every = 100;
};

/// Eps-prediction training on `dataset` with every parameter trainable.
DenoiserCheckpoint train_denoiser(const DenoiserCheckpoint& ckpt,
                                  const std::vector<Spectrogram>& dataset,
                                  const diffusion::NoiseSchedule& sched, const TrainOptions& opt);

/// Source-domain pretraining; every sample must carry the source modality.
DenoiserCheckpoint pretrain_source(const DenoiserCheckpoint& ckpt,
                                   const std::vector<Spectrogram>& dataset,
                                   const diffusion::NoiseSchedule& sched, const TrainOptions& opt);

void save_checkpoint(const std::filesystem::path& path, const DenoiserCheckpoint& ckpt);
DenoiserCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rfcmg::denoiser
