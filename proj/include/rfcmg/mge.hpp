// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

// Piecewise time-dependent embeddings fitted against a frozen denoiser.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

#include "rfcmg/denoiser.hpp"
#include "rfcmg/diffusion.hpp"

namespace rfcmg::mge {

/// gamma(t) is 1 up to `anneal_low`, 0 from `anneal_high`, linear and decreasing in between.
struct AnnealingSchedule {
    int anneal_high = 800;
    int anneal_low = 200;
    double nu = 1.0;

    static AnnealingSchedule defaults(int T);
    void validate(int T) const;
};

struct EmbeddingTrainingMeta {
    long iters = 0;
    double lr = 0.0;
    int batch = 0;
    std::uint64_t seed = 0;
    std::string backbone_id;
    std::size_t targets = 0;
    std::vector<double> loss_history;
};

struct ModalityEmbedding {
    int eta = 15;
    int T = 1000;
    Eigen::MatrixXf table;  // eta x d
    AnnealingSchedule anneal;
    EmbeddingTrainingMeta meta;

    int dim() const { return static_cast<int>(table.cols()); }
    std::string id() const;

    static ModalityEmbedding zeros(int eta, int T, int d);
};

/// floor((t - 1) * eta / T).
int row_index(const ModalityEmbedding& e, int t);
std::vector<double> lookup(const ModalityEmbedding& e, int t);

struct GuidedOutput {
    Plane eps;
    Plane x0_hat;
    Plane xtm1_hat;
};

GuidedOutput guided_denoise(const denoiser::DenoiserCheckpoint& ckpt, std::span<const double> e_vec,
                            const Plane& xt, int t, const diffusion::NoiseSchedule& sched);

/// mean (x0_tar - x0_hat)^2 + mean (xtm1_tar - xtm1_hat)^2.
double mge_loss(const Plane& x0_hat, const Plane& xtm1_hat, const Plane& x0_tar,
                const Plane& xtm1_tar);

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad;  // d/d e_vec
};

/// Batch-mean mge_loss over (xts[b], x0s[b], xtm1s[b]) at a shared step t,
/// with its gradient with respect to the conditioning vector.
LossGrad mge_loss_grad(const denoiser::DenoiserCheckpoint& ckpt, std::span<const double> e_vec,
                       int t, const std::vector<Plane>& xts, const std::vector<Plane>& x0s,
                       const std::vector<Plane>& xtm1s, const diffusion::NoiseSchedule& sched);

struct TrainOptions {
    int eta = 15;
    long iters = 2000;
    double lr = 1e-2;
    /// Targets drawn per iteration; they share the iteration's step index.
    int batch = 8;
    std::uint64_t seed = 0;
    AnnealingSchedule anneal;
    std::function<void(long, double)> progress;
    long report_every = 100;
};

/// Fits the table with the backbone frozen. Intervals are visited in shuffled
/// rounds, so every row gets equal use; inside an interval t follows a
/// randomly phased golden-ratio sequence, which covers it evenly.
ModalityEmbedding train_embeddings(const denoiser::DenoiserCheckpoint& ckpt,
                                   const std::vector<Spectrogram>& targets,
                                   const diffusion::NoiseSchedule& sched, const TrainOptions& opt);

double gamma(int t, const AnnealingSchedule& a);

/// sqrt(gamma) e + nu sqrt(1 - gamma) z.
std::vector<double> perturb(std::span<const double> e_vec, int t, const AnnealingSchedule& a,
                            std::span<const double> z);

nlohmann::json sidecar_json(const ModalityEmbedding& e);

/// Writes `<stem>.rft` (eta x d) and `<stem>.json`.
void save_embedding(const std::filesystem::path& stem, const ModalityEmbedding& e);
ModalityEmbedding load_embedding(const std::filesystem::path& stem);

}  // namespace rfcmg::mge
