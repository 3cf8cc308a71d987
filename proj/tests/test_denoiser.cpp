// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <numeric>
#include <utility>

#include "doctest.h"
#include "rfcmg/denoiser.hpp"
#include "rfcmg/diffusion.hpp"
#include "rfcmg/synthdata.hpp"
#include "support.hpp"

using namespace rfcmg;
using namespace rfcmg::denoiser;
using rfcmg::testing::max_abs;
using rfcmg::testing::random_plane;
using rfcmg::testing::tiny_config;

namespace {

// Layer-by-layer tally written out independently of the library's formula.
std::size_t count_by_hand(int c, const std::vector<int>& mult, int d) {
    auto conv = [](std::size_t cin, std::size_t cout, std::size_t k) { return cin * cout * k * k + cout; };
    auto norm = [](std::size_t ch) { return 2 * ch; };
    auto block = [&](std::size_t cin, std::size_t cout) {
        std::size_t n = norm(cin) + conv(cin, cout, 3) + norm(cout) + conv(cout, cout, 3) + (d * cout + cout);
        if (cin != cout) n += conv(cin, cout, 1);
        return n;
    };
    std::size_t n = 2 * (static_cast<std::size_t>(d) * d + d);  // step-embedding MLP
    n += conv(1, c, 3);
    std::vector<std::size_t> ch;
    for (int m : mult) ch.push_back(static_cast<std::size_t>(c) * m);
    std::size_t prev = c;
    for (auto x : ch) {
        n += block(prev, x);
        prev = x;
    }
    n += block(ch.back(), ch.back());
    for (std::size_t i = 0; i + 1 < ch.size(); ++i) n += block(ch[i + 1] + ch[i], ch[i]);
    n += norm(c) + conv(c, 1, 3);
    return n;
}

std::vector<Spectrogram> source_set(int size, int per_class, std::uint64_t seed) {
    synthdata::DatasetSpec spec;
    spec.style = StyleKind::wifi;
    spec.per_class = per_class;
    spec.seed = seed;
    spec.height = size;
    spec.width = size;
    return synthdata::make_dataset(spec);
}

}  // namespace

TEST_CASE("initialization") {
    const auto a = init_params(tiny_config(3));
    const auto b = init_params(tiny_config(3));
    const auto c = init_params(tiny_config(4));
    CHECK(a.params == b.params);
    CHECK_FALSE(a.params == c.params);

    DenoiserConfig def;
    CHECK(parameter_count(def.shape) == count_by_hand(32, {1, 2, 4}, 128));
    CHECK(init_params(def).params.total_size() == count_by_hand(32, {1, 2, 4}, 128));
    CHECK(a.params.total_size() == count_by_hand(8, {1, 2}, 16));

    DenoiserConfig bad = tiny_config();
    bad.shape.height = 24;
    CHECK_THROWS_AS(init_params(bad), InvalidArgument);
    bad = tiny_config();
    bad.shape.time_embed_dim = 4;
    CHECK_THROWS_AS(init_params(bad), InvalidArgument);
    bad = tiny_config();
    bad.shape.height = 8;
    bad.shape.width = 8;
    CHECK_THROWS_AS(init_params(bad), InvalidArgument);
}

TEST_CASE("conditioning port") {
    const auto ck = init_params(tiny_config());
    const Plane x = random_plane(16, 16, 1);
    for (int t : {1, 250, 1000}) {
        const Plane plain = denoise(ck, x, t);
        CHECK(plain.rows() == 16);
        CHECK(plain.cols() == 16);
        const std::vector<double> zero(16, 0.0);
        CHECK(max_abs(denoise(ck, x, t, zero), plain) == 0.0);
    }
    const std::vector<double> wrong(7, 0.0);
    CHECK_THROWS_AS(denoise(ck, x, 10, wrong), InvalidArgument);
    CHECK_THROWS_AS(denoise(ck, random_plane(8, 8, 1), 10), InvalidArgument);

    // Batched and single-sample paths agree.
    const std::vector<Plane> xs{x, random_plane(16, 16, 2)};
    const int ts[2] = {5, 700};
    const auto batch = denoise_batch(ck, xs, ts);
    CHECK(max_abs(batch[1], denoise(ck, xs[1], 700)) <= 1e-6);
}

TEST_CASE("output varies smoothly with the conditioning vector") {
    auto ck = init_params(tiny_config(8));
    const Plane x = random_plane(16, 16, 3);
    Rng rng(4);
    const auto e = normal_vector(16, rng);
    const Plane base = denoise(ck, x, 300, e);
    auto ratio = [&](double scale, std::uint64_t seed) {
        Rng r(seed);
        auto dir = normal_vector(16, r);
        double norm = 0.0;
        for (double v : dir) norm += v * v;
        norm = std::sqrt(norm);
        std::vector<double> moved(e);
        for (int k = 0; k < 16; ++k) moved[k] += scale * dir[k] / norm;
        return std::sqrt((denoise(ck, x, 300, moved) - base).square().sum()) / scale;
    };
    double lip = 0.0;
    for (std::uint64_t s = 0; s < 8; ++s) lip = std::max(lip, ratio(1e-1, s));
    CHECK(std::isfinite(lip));
    CHECK(lip > 0.0);
    for (std::uint64_t s = 100; s < 108; ++s) CHECK(ratio(1e-2, s) <= 2.0 * lip);
}

TEST_CASE("analytic gradients match finite differences") {
    // Double-precision copy of a tiny backbone; float rounding would swamp the check.
    const auto ck = init_params(tiny_config(5));
    nn::ParamStore<double> p = ck.params.cast<double>();
    const nn::UNet<double> net(ck.config.shape, nn::Binder<double>(std::as_const(p)));
    nn::Tensor<double> xt(2, 1, 16, 16), eps(2, 1, 16, 16);
    Rng rng(6);
    std::normal_distribution<double> nd;
    for (auto& v : xt.v) v = nd(rng);
    for (auto& v : eps.v) v = nd(rng);
    const std::vector<int> steps{37, 812};

    auto grads = nn::zero_grads(p);
    eps_loss<double>(net, p, xt, steps, eps, &grads);

    std::uniform_int_distribution<int> pick_tensor(0, p.count() - 1);
    int probes = 0;
    double worst = 0.0;
    while (probes < 16) {
        const int i = pick_tensor(rng);
        std::uniform_int_distribution<std::size_t> pick_elem(0, p.value(i).size() - 1);
        const std::size_t k = pick_elem(rng);
        const double analytic = grads[i][k];
        const double keep = p.value(i)[k];
        const double h = 1e-5;
        p.value(i)[k] = keep + h;
        const double up = eps_loss<double>(net, p, xt, steps, eps, nullptr);
        p.value(i)[k] = keep - h;
        const double down = eps_loss<double>(net, p, xt, steps, eps, nullptr);
        p.value(i)[k] = keep;
        const double numeric = (up - down) / (2 * h);
        const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        const double rel = std::abs(analytic - numeric) / scale;
        CAPTURE(p.name(i));
        CAPTURE(analytic);
        CAPTURE(numeric);
        CHECK(rel <= 1e-3);
        worst = std::max(worst, rel);
        ++probes;
    }
    MESSAGE("worst relative error " << worst);
}

TEST_CASE("conditioning gradient matches finite differences") {
    const auto ck = init_params(tiny_config(9));
    const nn::ParamStore<double> p = ck.params.cast<double>();
    const nn::UNet<double> net(ck.config.shape, nn::Binder<double>(p));
    nn::Tensor<double> x(1, 1, 16, 16), target(1, 1, 16, 16), cond(1, 16, 1, 1);
    Rng rng(10);
    std::normal_distribution<double> nd;
    for (auto& v : x.v) v = nd(rng);
    for (auto& v : target.v) v = nd(rng);
    for (auto& v : cond.v) v = 0.3 * nd(rng);
    const std::vector<int> steps{450};
    auto loss = [&](const nn::Tensor<double>& c, nn::Tensor<double>* dcond) {
        nn::UNet<double>::Tape tape;
        const auto y = net.forward(p, x, steps, &c, tape);
        nn::Tensor<double> dy(1, 1, 16, 16);
        double l = 0.0;
        for (std::size_t k = 0; k < y.size(); ++k) {
            l += (y.v[k] - target.v[k]) * (y.v[k] - target.v[k]);
            dy.v[k] = 2 * (y.v[k] - target.v[k]);
        }
        if (dcond) net.backward(p, tape, dy, nullptr, dcond);
        return l;
    };
    nn::Tensor<double> g;
    loss(cond, &g);
    REQUIRE(g.size() == 16);
    for (int k = 0; k < 16; ++k) {
        auto c = cond;
        c.v[k] += 1e-5;
        const double up = loss(c, nullptr);
        c.v[k] -= 2e-5;
        const double down = loss(c, nullptr);
        const double numeric = (up - down) / 2e-5;
        CHECK(std::abs(g.v[k] - numeric) / std::max({std::abs(numeric), std::abs(g.v[k]), 1e-6}) <= 1e-3);
    }
}

TEST_CASE("source pretraining") {
    const auto sched = diffusion::default_schedule();
    auto cfg = tiny_config(2);
    cfg.shape.height = 32;
    cfg.shape.width = 32;
    const auto init = init_params(cfg);
    const auto data = source_set(32, 20, 7);

    TrainOptions none;
    none.steps = 0;
    CHECK(pretrain_source(init, data, sched, none).params == init.params);

    TrainOptions opt;
    opt.steps = 400;
    opt.lr = 2e-3;
    opt.batch = 16;
    opt.seed = 3;
    const auto a = pretrain_source(init, data, sched, opt);
    const auto& h = a.meta.loss_history;
    REQUIRE(h.size() == 400);
    std::vector<double> windows;
    for (std::size_t s = 0; s < h.size(); s += 100) {
        windows.push_back(std::accumulate(h.begin() + s, h.begin() + s + 100, 0.0) / 100.0);
    }
    for (std::size_t k = 1; k < windows.size(); ++k) {
        CAPTURE(k);
        CHECK(windows[k] < windows[k - 1]);
    }
    const double first = std::accumulate(h.begin(), h.begin() + 40, 0.0) / 40.0;
    const double last = std::accumulate(h.end() - 40, h.end(), 0.0) / 40.0;
    CHECK(last < first);

    opt.steps = 20;
    const auto b1 = pretrain_source(init, data, sched, opt);
    const auto b2 = pretrain_source(init, data, sched, opt);
    CHECK(b1.params == b2.params);

    CHECK_THROWS_AS(pretrain_source(init, {}, sched, opt), InvalidArgument);
    auto wrong = data;
    wrong[3].modality = Modality::target_a;
    CHECK_THROWS_AS(pretrain_source(init, wrong, sched, opt), InvalidArgument);
}

TEST_CASE("checkpoint persistence") {
    const auto dir = rfcmg::testing::scratch_dir("denoiser");
    auto ck = init_params(tiny_config(12));
    ck.meta.source_dataset = "ds-1";
    ck.meta.steps = 5;
    ck.meta.loss_history = {1.0, 0.5};
    save_checkpoint(dir / "a.rfck", ck);
    const auto back = load_checkpoint(dir / "a.rfck");
    CHECK(back.params == ck.params);
    CHECK(back.id() == ck.id());
    CHECK(back.meta.source_dataset == "ds-1");
    CHECK(back.meta.loss_history == ck.meta.loss_history);
    const Plane x = random_plane(16, 16, 1);
    CHECK(max_abs(denoise(back, x, 321), denoise(ck, x, 321)) == 0.0);

    // Truncation anywhere must surface as a corruption error.
    const auto size = std::filesystem::file_size(dir / "a.rfck");
    for (auto cut : {std::uintmax_t{3}, size / 2, size - 1}) {
        std::filesystem::copy_file(dir / "a.rfck", dir / "b.rfck",
                                   std::filesystem::copy_options::overwrite_existing);
        std::filesystem::resize_file(dir / "b.rfck", cut);
        CHECK_THROWS_AS(load_checkpoint(dir / "b.rfck"), CorruptFileError);
    }
    CHECK_THROWS(load_checkpoint(dir / "missing.rfck"));
}
