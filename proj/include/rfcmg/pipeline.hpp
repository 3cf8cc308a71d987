// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "rfcmg/denoiser.hpp"
#include "rfcmg/diffusion.hpp"
#include "rfcmg/lfmc.hpp"
#include "rfcmg/mge.hpp"

namespace rfcmg::pipeline {

enum class Sampler { ddpm, ddim };

struct GenerationConfig {
    Sampler sampler = Sampler::ddim;
    int ddim_steps = 25;
    int lowpass_factor = 2;
    lfmc::ResampleKernel kernel = lfmc::ResampleKernel::block;
    /// Overrides the embedding's stored annealing schedule when set.
    std::optional<mge::AnnealingSchedule> anneal;
    bool use_mge = true;
    bool use_lfmc = true;
    std::uint64_t seed = 0;
    int batch = 8;

    void validate(int T) const;
};

nlohmann::json to_json(const GenerationConfig& c);

/// Reverse-time plan: {T, ..., 0}. DDPM visits every step.
std::vector<int> sampler_plan(const GenerationConfig& c, int T);

struct GenerationTrace {
    std::vector<double> step_ms;
    std::uint64_t init_seed = 0, reference_seed = 0, embedding_seed = 0, transition_seed = 0;
};

/// Samples `cfg.batch` outputs. `refs` holds one reference for the whole batch
/// or one per output; it may be empty when LFMC is off. `start` optionally
/// replaces the initial Gaussian states. `e` may be null when MGE is off.
std::vector<Plane> generate(const denoiser::DenoiserCheckpoint& ckpt, const mge::ModalityEmbedding* e,
                            const std::vector<Plane>& refs, const GenerationConfig& cfg,
                            const diffusion::NoiseSchedule& sched,
                            const std::vector<Plane>* start = nullptr,
                            GenerationTrace* trace = nullptr);

/// Plain ancestral/DDIM sampling from the backbone, drawing its initial and
/// transition noise from the same streams as `generate`.
std::vector<Plane> sample_backbone(const denoiser::DenoiserCheckpoint& ckpt,
                                   const GenerationConfig& cfg,
                                   const diffusion::NoiseSchedule& sched);

/// Full-parameter fine-tuning on the target set; the input checkpoint is untouched.
denoiser::DenoiserCheckpoint baseline_finetune(const denoiser::DenoiserCheckpoint& ckpt,
                                               const std::vector<Spectrogram>& targets,
                                               const diffusion::NoiseSchedule& sched, long steps,
                                               double lr, std::uint64_t seed, int batch = 32);

struct MechanismMaps {
    Plane hf_saliency;   // |guided x0 - plain x0|
    Plane lf_structure;  // low_pass(guided x0)
    Plane difference;    // guided x0 - plain x0, before rectification
};

MechanismMaps mechanism_maps(const denoiser::DenoiserCheckpoint& ckpt,
                             const mge::ModalityEmbedding& e, const Plane& xt, int t, int factor,
                             const diffusion::NoiseSchedule& sched);

/// Writes `<stem>.rft` (B x H x W) and `<stem>.json`.
void save_samples(const std::filesystem::path& stem, const std::vector<Plane>& samples,
                  const nlohmann::json& sidecar);
std::vector<Plane> load_samples(const std::filesystem::path& stem);

}  // namespace rfcmg::pipeline
