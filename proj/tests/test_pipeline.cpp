// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#include <numeric>

#include "doctest.h"
#include "rfcmg/io.hpp"
#include "rfcmg/pipeline.hpp"
#include "rfcmg/synthdata.hpp"
#include "support.hpp"

using namespace rfcmg;
using namespace rfcmg::pipeline;
using rfcmg::testing::max_abs;
using rfcmg::testing::random_plane;
using rfcmg::testing::tiny_config;

namespace {

const diffusion::NoiseSchedule& sched() {
    static const auto s = diffusion::default_schedule();
    return s;
}

const denoiser::DenoiserCheckpoint& backbone() {
    static const auto ck = denoiser::init_params(tiny_config(21));
    return ck;
}

mge::ModalityEmbedding random_embedding(std::uint64_t seed) {
    auto e = mge::ModalityEmbedding::zeros(15, 1000, 16);
    Rng rng(seed);
    std::normal_distribution<float> nd(0.0f, 0.5f);
    for (Eigen::Index k = 0; k < e.table.size(); ++k) e.table.data()[k] = nd(rng);
    return e;
}

Plane reference() {
    return synthdata::render(synthdata::action_for_class(1),
                             synthdata::ModalityStyle::defaults(StyleKind::mmwave), 5, 16, 16)
        .sample.data;
}

bool identical(const std::vector<Plane>& a, const std::vector<Plane>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!(a[i] == b[i]).all()) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("disabling both modules reproduces the plain sampler") {
    for (Sampler s : {Sampler::ddim, Sampler::ddpm}) {
        GenerationConfig cfg;
        cfg.sampler = s;
        cfg.use_mge = false;
        cfg.use_lfmc = false;
        cfg.seed = 7;
        cfg.batch = 3;
        if (s == Sampler::ddpm) {
            // Full ancestral chain on a short schedule keeps the test quick.
            const auto short_sched = diffusion::build_schedule(50, 1e-3, 0.2);
            CHECK(identical(generate(backbone(), nullptr, {}, cfg, short_sched),
                            sample_backbone(backbone(), cfg, short_sched)));
        } else {
            const auto e = random_embedding(1);
            CHECK(identical(generate(backbone(), &e, {}, cfg, sched()), sample_backbone(backbone(), cfg, sched())));
        }
    }
    // A zero table without perturbation is the same as no embedding.
    GenerationConfig cfg;
    cfg.use_lfmc = false;
    cfg.batch = 2;
    cfg.anneal = mge::AnnealingSchedule{800, 200, 0.0};
    const auto zero = mge::ModalityEmbedding::zeros(15, 1000, 16);
    auto plain = cfg;
    plain.use_mge = false;
    CHECK(identical(generate(backbone(), &zero, {}, cfg, sched()), sample_backbone(backbone(), plain, sched())));
}

TEST_CASE("low-frequency anchoring") {
    const auto e = random_embedding(2);
    const Plane ref = reference();
    for (int n : {1, 2, 4, 8}) {
        GenerationConfig cfg;
        cfg.lowpass_factor = n;
        cfg.batch = 2;
        cfg.seed = 3;
        for (const auto& x : generate(backbone(), &e, {ref}, cfg, sched())) {
            CHECK((lfmc::low_pass(x, n) - lfmc::low_pass(ref, n)).abs().maxCoeff() <= 1e-5);
        }
    }
    // One reference per output.
    GenerationConfig cfg;
    cfg.batch = 2;
    const std::vector<Plane> refs{ref, random_plane(16, 16, 8)};
    const auto out = generate(backbone(), &e, refs, cfg, sched());
    for (int i = 0; i < 2; ++i) CHECK((lfmc::low_pass(out[i], 2) - lfmc::low_pass(refs[i], 2)).abs().mean() <= 1e-5);
    CHECK_THROWS_AS(generate(backbone(), &e, {ref, ref, ref}, cfg, sched()), InvalidArgument);
    cfg.lowpass_factor = 3;
    CHECK_THROWS_AS(generate(backbone(), &e, {ref}, cfg, sched()), InvalidArgument);
}

TEST_CASE("seeding") {
    const auto e = random_embedding(3);
    const Plane ref = reference();
    GenerationConfig cfg;
    cfg.batch = 2;
    cfg.seed = 11;
    GenerationTrace t1, t2;
    const auto a = generate(backbone(), &e, {ref}, cfg, sched(), nullptr, &t1);
    const auto b = generate(backbone(), &e, {ref}, cfg, sched(), nullptr, &t2);
    CHECK(identical(a, b));
    CHECK(t1.step_ms.size() == 25);
    CHECK(t1.init_seed == t2.init_seed);
    cfg.seed = 12;
    const auto c = generate(backbone(), &e, {ref}, cfg, sched());
    CHECK((a[0] - c[0]).abs().mean() > 0.0);
    CHECK((a[0] - a[1]).abs().mean() > 0.0);

    // Streams are independent of nu: the same initial states are used.
    GenerationConfig quiet = cfg, loud = cfg;
    quiet.anneal = mge::AnnealingSchedule{800, 200, 0.0};
    loud.anneal = mge::AnnealingSchedule{800, 200, 2.0};
    GenerationTrace tq, tl;
    const auto q = generate(backbone(), &e, {ref}, quiet, sched(), nullptr, &tq);
    const auto l = generate(backbone(), &e, {ref}, loud, sched(), nullptr, &tl);
    CHECK(tq.init_seed == tl.init_seed);
    CHECK(tq.reference_seed == tl.reference_seed);
    CHECK(tq.transition_seed == tl.transition_seed);
    CHECK((q[0] - l[0]).abs().mean() > 0.0);
    // The initial state can be supplied directly; a supplied copy of the
    // default draw gives the same result.
    Rng init(derive_seed(tq.init_seed, std::uint64_t{0}));
    Rng init1(derive_seed(tq.init_seed, std::uint64_t{1}));
    const std::vector<Plane> start{normal_plane(16, 16, init), normal_plane(16, 16, init1)};
    CHECK(identical(generate(backbone(), &e, {ref}, quiet, sched(), &start), q));

    GenerationConfig bad;
    bad.ddim_steps = 30;
    CHECK_THROWS_AS(generate(backbone(), &e, {ref}, bad, sched()), InvalidArgument);
    bad = GenerationConfig{};
    CHECK_THROWS_AS(generate(backbone(), nullptr, {ref}, bad, sched()), InvalidArgument);
}

TEST_CASE("fine-tuning baseline") {
    const auto before = nn::checksum(backbone().params);
    synthdata::DatasetSpec spec;
    spec.style = StyleKind::mmwave;
    spec.per_class = 2;
    spec.height = 16;
    spec.width = 16;
    const auto targets = synthdata::kshot_split(synthdata::make_dataset(spec), 1, 1).first;
    CHECK(baseline_finetune(backbone(), targets, sched(), 0, 1e-3, 1).params == backbone().params);
    const auto tuned = baseline_finetune(backbone(), targets, sched(), 200, 2e-3, 1, 8);
    CHECK(nn::checksum(backbone().params) == before);
    CHECK_FALSE(tuned.params == backbone().params);
    const auto& h = tuned.meta.loss_history;
    REQUIRE(h.size() == 200);
    CHECK(std::accumulate(h.end() - 20, h.end(), 0.0) < std::accumulate(h.begin(), h.begin() + 20, 0.0));
    CHECK_THROWS_AS(baseline_finetune(backbone(), {}, sched(), 10, 1e-3, 1), InvalidArgument);
}

TEST_CASE("mechanism maps") {
    const Plane xt = random_plane(16, 16, 4);
    const auto zero = mge::ModalityEmbedding::zeros(15, 1000, 16);
    const auto m0 = mechanism_maps(backbone(), zero, xt, 300, 2, sched());
    CHECK(m0.hf_saliency.isZero());
    const auto e = random_embedding(5);
    const auto m = mechanism_maps(backbone(), e, xt, 300, 2, sched());
    CHECK(m.hf_saliency.minCoeff() >= 0.0);
    CHECK(m.hf_saliency.maxCoeff() > 0.0);
    CHECK(max_abs(lfmc::low_pass(m.lf_structure, 2), m.lf_structure) <= 1e-12);
}

TEST_CASE("sample archive") {
    const auto dir = rfcmg::testing::scratch_dir("samples");
    const std::vector<Plane> xs{random_plane(16, 16, 1), random_plane(16, 16, 2)};
    save_samples(dir / "s", xs, {{"seed", 3}});
    const auto back = load_samples(dir / "s");
    REQUIRE(back.size() == 2);
    CHECK(max_abs(back[1], xs[1].cast<float>().cast<double>()) == 0.0);
    const auto j = io::read_json(dir / "s.json");
    CHECK(j.at("kind") == "samples");
    CHECK(j.at("seed") == 3);
    std::filesystem::resize_file(dir / "s.rft", 30);
    CHECK_THROWS_AS(load_samples(dir / "s"), CorruptFileError);
}
