// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

// Experiment orchestration on the synthetic benchmark. A Bench owns the
// datasets and lazily builds (or loads from a cache directory) every trained
// artifact an experiment needs, so experiments can share them.

#pragma once

#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "rfcmg/config.hpp"
#include "rfcmg/denoiser.hpp"
#include "rfcmg/diffusion.hpp"
#include "rfcmg/metrics.hpp"
#include "rfcmg/mge.hpp"
#include "rfcmg/pipeline.hpp"

namespace rfcmg::experiments {

/// Real target data. `pool` holds kshot_max samples per class; every K-shot
/// adaptation set is a prefix of it per class, and `eval` is its complement.
struct TargetSplit {
    std::vector<Spectrogram> pool;
    std::vector<Spectrogram> eval;
};

class Bench {
public:
    explicit Bench(config::ExperimentConfig cfg, std::ostream* log = nullptr);

    const config::ExperimentConfig& config() const { return cfg_; }
    const diffusion::NoiseSchedule& schedule() const { return sched_; }
    int classes_of(StyleKind s) const;
    void log(const std::string& line) const;

    std::vector<Spectrogram> source_data() const;
    std::vector<Spectrogram> mismatched_data() const;
    /// Held-out renders of every style, labeled by (style, class).
    std::pair<std::vector<Plane>, std::vector<int>> encoder_data() const;
    const TargetSplit& target(StyleKind s);
    /// First k pool samples of every class.
    std::vector<Spectrogram> adapt(StyleKind s, int k);

    denoiser::DenoiserConfig denoiser_config() const;
    /// prior: "source" (default), "random" or "mismatched".
    const denoiser::DenoiserCheckpoint& backbone(const std::string& prior = "");
    const metrics::FeatureEncoder& encoder();
    mge::ModalityEmbedding embedding(const denoiser::DenoiserCheckpoint& ckpt,
                                     const std::vector<Spectrogram>& targets, int eta);
    denoiser::DenoiserCheckpoint finetuned(const denoiser::DenoiserCheckpoint& ckpt,
                                           const std::vector<Spectrogram>& targets);

    pipeline::GenerationConfig generation_config() const;
    /// `n` samples in batches of gen_batch. Sample i is anchored to
    /// refs[i % refs.size()] and carries its label; with no refs (or LFMC off)
    /// samples are labeled -1. Batch b uses seed derive_seed(seed, b), so
    /// methods sharing a seed share their initial noise.
    std::vector<Spectrogram> generate(const denoiser::DenoiserCheckpoint& ckpt,
                                      const mge::ModalityEmbedding* e,
                                      const std::vector<Spectrogram>& refs, int n,
                                      const pipeline::GenerationConfig& g, StyleKind style);
    std::vector<Spectrogram> sample_plain(const denoiser::DenoiserCheckpoint& ckpt, int n,
                                          const pipeline::GenerationConfig& g, StyleKind style);

    /// FID-proxy and r-LPIPS against the style's eval set; SSIM/PSNR of each
    /// sample against its best-matching (highest SSIM) reference in `refs`.
    metrics::MetricReport score(const std::vector<Spectrogram>& generated, StyleKind style,
                                const std::vector<Spectrogram>& refs);

private:
    std::filesystem::path cache_path(const std::string& name) const;

    config::ExperimentConfig cfg_;
    std::ostream* log_;
    diffusion::NoiseSchedule sched_;
    std::map<StyleKind, TargetSplit> targets_;
    std::map<std::string, denoiser::DenoiserCheckpoint> backbones_;
    std::unique_ptr<metrics::FeatureEncoder> encoder_;
    std::map<StyleKind, Eigen::MatrixXd> eval_features_;
    std::map<StyleKind, double> eval_diversity_;
};

struct ExperimentResult {
    std::string name;
    std::vector<metrics::MetricReport> rows;
    nlohmann::json details = nlohmann::json::object();
    /// Representative samples per method or setting, for grids.
    std::map<std::string, std::vector<Plane>> samples;
    /// Extra images (e.g. mechanism maps) keyed by name.
    std::map<std::string, std::vector<Plane>> maps;
};

/// Full method against its ablations and the two baselines.
ExperimentResult quality(Bench& b, StyleKind style);
/// kind in {eta, N, nu, kshot}; an empty grid selects the kind's default.
ExperimentResult sweep(Bench& b, const std::string& kind, StyleKind style,
                       std::vector<double> values);
/// SSIM/PSNR to a held-out sample when anchored to it, to another sample of
/// its class, and to a sample of another class.
ExperimentResult reference_sensitivity(Bench& b, StyleKind style);
/// Intra-modal unseen actions, cross-modal seen actions, cross-modal unseen actions.
ExperimentResult generalization(Bench& b, StyleKind style);
/// Classifier on generated data only, plus the generated-to-real ratio sweep.
/// `pool` replaces the freshly generated training set when non-null.
ExperimentResult downstream_utility(Bench& b, StyleKind style,
                                    const std::vector<Spectrogram>* pool = nullptr);
/// Band energies of the guided-minus-plain x0 difference and of the guided low band.
ExperimentResult mechanism(Bench& b, StyleKind style);
/// Source, random and mismatched backbones under the same adaptation.
ExperimentResult prior_ablation(Bench& b, StyleKind style);

/// Dispatches sweep_kind to one of the experiments above.
ExperimentResult run_sweep_kind(Bench& b, const std::string& kind, StyleKind style,
                                const std::vector<double>& values);

StyleKind target_style(const config::ExperimentConfig& cfg);

}  // namespace rfcmg::experiments
