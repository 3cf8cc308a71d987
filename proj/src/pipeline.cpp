// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rfcmg/pipeline.hpp"

#include <chrono>

#include "rfcmg/io.hpp"

namespace rfcmg::pipeline {

namespace {

struct Streams {
    std::vector<Rng> init, transition, reference, embedding;
    GenerationTrace seeds;

    Streams(std::uint64_t seed, int n) {
        seeds.init_seed = derive_seed(seed, "init");
        seeds.transition_seed = derive_seed(seed, "transition");
        seeds.reference_seed = derive_seed(seed, "reference");
        seeds.embedding_seed = derive_seed(seed, "embedding");
        for (int i = 0; i < n; ++i) {
            const auto k = static_cast<std::uint64_t>(i);
            init.emplace_back(derive_seed(seeds.init_seed, k));
            transition.emplace_back(derive_seed(seeds.transition_seed, k));
            reference.emplace_back(derive_seed(seeds.reference_seed, k));
            embedding.emplace_back(derive_seed(seeds.embedding_seed, k));
        }
    }
};

std::vector<Plane> initial_states(const denoiser::DenoiserCheckpoint& ckpt, Streams& s, int n) {
    std::vector<Plane> x;
    x.reserve(n);
    for (int i = 0; i < n; ++i) {
        x.push_back(normal_plane(ckpt.config.shape.height, ckpt.config.shape.width, s.init[i]));
    }
    return x;
}

Plane transition(const GenerationConfig& cfg, const Plane& xt, const Plane& eps, int t, int t_prev,
                 const diffusion::NoiseSchedule& sched, Rng& rng) {
    if (cfg.sampler == Sampler::ddim) return diffusion::ddim_step(xt, eps, t, t_prev, sched);
    const Plane z = normal_plane(static_cast<int>(xt.rows()), static_cast<int>(xt.cols()), rng);
    return diffusion::reverse_step(xt, eps, t, sched, z);
}

void check_finite(const std::vector<Plane>& x, int t) {
    for (const auto& p : x) {
        if (!all_finite(p)) {
            throw NonFiniteError("sampler state became non-finite at step " + std::to_string(t));
        }
    }
}

}  // namespace

void GenerationConfig::validate(int T) const {
    require(batch >= 1, "batch must be >= 1");
    if (sampler == Sampler::ddim) {
        require(ddim_steps >= 1 && ddim_steps <= T && T % ddim_steps == 0,
                "ddim steps must divide the number of diffusion steps");
    }
    require(lowpass_factor >= 1, "low-pass factor must be positive");
    if (anneal) anneal->validate(T);
}

nlohmann::json to_json(const GenerationConfig& c) {
    nlohmann::json j = {{"sampler", c.sampler == Sampler::ddim ? "ddim" : "ddpm"},
                        {"ddim_steps", c.ddim_steps},
                        {"N", c.lowpass_factor},
                        {"kernel", c.kernel == lfmc::ResampleKernel::block ? "block" : "bicubic"},
                        {"use_mge", c.use_mge},
                        {"use_lfmc", c.use_lfmc},
                        {"seed", c.seed},
                        {"batch", c.batch}};
    if (c.anneal) {
        j["anneal_high"] = c.anneal->anneal_high;
        j["anneal_low"] = c.anneal->anneal_low;
        j["nu"] = c.anneal->nu;
    }
    return j;
}

std::vector<int> sampler_plan(const GenerationConfig& c, int T) {
    if (c.sampler == Sampler::ddim) return diffusion::ddim_plan(T, c.ddim_steps);
    std::vector<int> plan(T + 1);
    for (int i = 0; i <= T; ++i) plan[i] = T - i;
    return plan;
}

std::vector<Plane> generate(const denoiser::DenoiserCheckpoint& ckpt, const mge::ModalityEmbedding* e,
                            const std::vector<Plane>& refs, const GenerationConfig& cfg,
                            const diffusion::NoiseSchedule& sched, const std::vector<Plane>* start,
                            GenerationTrace* trace) {
    const int T = sched.steps();
    cfg.validate(T);
    const int n = cfg.batch;
    const bool guided = cfg.use_mge && e != nullptr;
    if (cfg.use_mge) require(e != nullptr, "MGE is enabled but no embedding was given");
    if (guided) {
        require(e->dim() == ckpt.config.embed_dim(), "embedding dimension does not match backbone");
        require(e->T == T, "embedding horizon does not match the schedule");
    }
    const mge::AnnealingSchedule anneal = cfg.anneal ? *cfg.anneal
                                          : guided   ? e->anneal
                                                     : mge::AnnealingSchedule::defaults(T);
    const lfmc::LowPassFilter filter{cfg.lowpass_factor, cfg.kernel};
    if (cfg.use_lfmc) {
        require(refs.size() == 1 || static_cast<int>(refs.size()) == n,
                "LFMC needs one reference or one per output");
        for (const auto& r : refs) {
            require(r.rows() == ckpt.config.shape.height && r.cols() == ckpt.config.shape.width,
                    "reference size does not match backbone");
            lfmc::check_divisible(r, cfg.lowpass_factor);
        }
    }

    Streams s(cfg.seed, n);
    std::vector<Plane> x;
    if (start) {
        require(static_cast<int>(start->size()) == n, "one start state per output");
        x = *start;
    } else {
        x = initial_states(ckpt, s, n);
    }
    const auto plan = sampler_plan(cfg, T);
    const int d = ckpt.config.embed_dim();
    for (std::size_t k = 0; k + 1 < plan.size(); ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        const int t = plan[k];
        const int t_prev = plan[k + 1];
        std::vector<std::vector<double>> conds;
        if (guided) {
            const auto base = mge::lookup(*e, t);
            for (int i = 0; i < n; ++i) {
                const auto z = normal_vector(static_cast<std::size_t>(d), s.embedding[i]);
                conds.push_back(mge::perturb(base, t, anneal, z));
            }
        }
        const std::vector<int> steps(n, t);
        const auto eps = denoiser::denoise_batch(ckpt, x, steps, conds);
        for (int i = 0; i < n; ++i) {
            x[i] = transition(cfg, x[i], eps[i], t, t_prev, sched, s.transition[i]);
            if (cfg.use_lfmc) {
                const Plane& ref = refs.size() == 1 ? refs[0] : refs[i];
                const Plane noise = t_prev > 0 ? normal_plane(static_cast<int>(ref.rows()),
                                                              static_cast<int>(ref.cols()),
                                                              s.reference[i])
                                               : Plane::Zero(ref.rows(), ref.cols());
                x[i] = lfmc::lfmc_project(x[i], lfmc::diffuse_reference(ref, t_prev, sched, noise),
                                          filter);
            }
        }
        check_finite(x, t);
        if (trace) {
            trace->step_ms.push_back(
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count());
        }
    }
    if (trace) {
        const auto steps_ms = std::move(trace->step_ms);
        *trace = s.seeds;
        trace->step_ms = steps_ms;
    }
    return x;
}

std::vector<Plane> sample_backbone(const denoiser::DenoiserCheckpoint& ckpt,
                                   const GenerationConfig& cfg,
                                   const diffusion::NoiseSchedule& sched) {
    const int T = sched.steps();
    cfg.validate(T);
    Streams s(cfg.seed, cfg.batch);
    std::vector<Plane> x = initial_states(ckpt, s, cfg.batch);
    const auto plan = sampler_plan(cfg, T);
    for (std::size_t k = 0; k + 1 < plan.size(); ++k) {
        const std::vector<int> steps(cfg.batch, plan[k]);
        const auto eps = denoiser::denoise_batch(ckpt, x, steps);
        for (int i = 0; i < cfg.batch; ++i) {
            x[i] = transition(cfg, x[i], eps[i], plan[k], plan[k + 1], sched, s.transition[i]);
        }
        check_finite(x, plan[k]);
    }
    return x;
}

denoiser::DenoiserCheckpoint baseline_finetune(const denoiser::DenoiserCheckpoint& ckpt,
                                               const std::vector<Spectrogram>& targets,
                                               const diffusion::NoiseSchedule& sched, long steps,
                                               double lr, std::uint64_t seed, int batch) {
    require(!targets.empty(), "fine-tuning needs at least one target sample");
    denoiser::TrainOptions opt;
    opt.steps = steps;
    opt.lr = lr;
    opt.batch = batch;
    opt.seed = derive_seed(seed, "finetune");
    return denoiser::train_denoiser(ckpt, targets, sched, opt);
}

MechanismMaps mechanism_maps(const denoiser::DenoiserCheckpoint& ckpt,
                             const mge::ModalityEmbedding& e, const Plane& xt, int t, int factor,
                             const diffusion::NoiseSchedule& sched) {
    const auto guided = mge::guided_denoise(ckpt, mge::lookup(e, t), xt, t, sched);
    const Plane plain_eps = denoiser::denoise(ckpt, xt, t);
    const Plane plain_x0 = diffusion::predict_x0(xt, plain_eps, t, sched);
    const Plane diff = guided.x0_hat - plain_x0;
    return MechanismMaps{diff.abs(), lfmc::low_pass(guided.x0_hat, factor), diff};
}

void save_samples(const std::filesystem::path& stem, const std::vector<Plane>& samples,
                  const nlohmann::json& sidecar) {
    require(!samples.empty(), "no samples to save");
    io::TensorData t;
    t.shape = {samples.size(), static_cast<std::uint64_t>(samples[0].rows()),
               static_cast<std::uint64_t>(samples[0].cols())};
    for (const auto& p : samples) {
        require(p.rows() == samples[0].rows() && p.cols() == samples[0].cols(),
                "samples must share one size");
        for (Eigen::Index k = 0; k < p.size(); ++k) t.values.push_back(static_cast<float>(p.data()[k]));
    }
    io::write_tensor_file(stem.string() + ".rft", t);
    nlohmann::json j = sidecar;
    j["kind"] = "samples";
    j["count"] = samples.size();
    io::write_json(stem.string() + ".json", j);
}

std::vector<Plane> load_samples(const std::filesystem::path& stem) {
    const auto t = io::read_tensor_file(stem.string() + ".rft");
    if (t.shape.size() != 3) throw CorruptFileError(stem.string() + ".rft: expected a rank-3 tensor");
    const auto n = t.shape[0], h = t.shape[1], w = t.shape[2];
    std::vector<Plane> out(n, Plane(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(w)));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < h * w; ++k) out[i].data()[k] = t.values[i * h * w + k];
    }
    return out;
}

}  // namespace rfcmg::pipeline
