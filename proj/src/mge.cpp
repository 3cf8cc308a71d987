// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rfcmg/mge.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rfcmg/io.hpp"
#include "rfcmg/nn/adam.hpp"

namespace rfcmg::mge {

namespace {

int ceil_div(long a, long b) { return static_cast<int>((a + b - 1) / b); }

// Chain rule through x0_hat = (x - sqrt(1-ab) eps)/sqrt(ab) and
// xtm1_hat = (x - beta/sqrt(1-ab) eps)/sqrt(alpha), then back through the
// frozen network to the shared conditioning vector.
LossGrad batch_loss_grad(const nn::UNet<float>& net, const nn::ParamStore<float>& params,
                         std::span<const double> e_vec, int t, const std::vector<Plane>& xts,
                         const std::vector<Plane>& x0s, const std::vector<Plane>& xtm1s,
                         const diffusion::NoiseSchedule& sched) {
    const int B = static_cast<int>(xts.size());
    require(B >= 1 && x0s.size() == xts.size() && xtm1s.size() == xts.size(),
            "one clean and one previous-step target per noised input");
    const int d = static_cast<int>(e_vec.size());
    const int h = static_cast<int>(xts[0].rows());
    const int w = static_cast<int>(xts[0].cols());
    const int hw = h * w;
    const double ab = sched.alpha_bar(t);
    const double sa = std::sqrt(ab), sn = std::sqrt(1.0 - ab), sqa = std::sqrt(sched.alpha(t));
    const double k0 = sn / sa;
    const double k1 = sched.beta(t) / sn;

    std::vector<const Plane*> ptrs;
    for (const auto& x : xts) {
        require_same_shape(x, xts[0], "mge batch");
        ptrs.push_back(&x);
    }
    const auto xt = nn::stack_planes<float>(ptrs);
    nn::Tensor<float> cond(B, d, 1, 1);
    for (int b = 0; b < B; ++b) {
        for (int k = 0; k < d; ++k) cond.sample(b)[k] = static_cast<float>(e_vec[k]);
    }
    const std::vector<int> steps(B, t);
    nn::UNet<float>::Tape tape;
    const auto eps = net.forward(params, xt, steps, &cond, tape);

    nn::Tensor<float> deps(B, 1, h, w);
    LossGrad out{0.0, std::vector<double>(d, 0.0)};
    const double inv = 1.0 / static_cast<double>(hw);
    for (int b = 0; b < B; ++b) {
        require_same_shape(x0s[b], xts[b], "mge x0 target");
        require_same_shape(xtm1s[b], xts[b], "mge previous-step target");
        for (int k = 0; k < hw; ++k) {
            const double e_k = eps.sample(b)[k];
            const double x = xts[b].data()[k];
            const double r0 = (x - sn * e_k) / sa - x0s[b].data()[k];
            const double r1 = (x - k1 * e_k) / sqa - xtm1s[b].data()[k];
            out.loss += (r0 * r0 + r1 * r1) * inv / B;
            deps.sample(b)[k] = static_cast<float>(2.0 * inv / B * (-k0 * r0 - k1 / sqa * r1));
        }
    }
    nn::Tensor<float> dcond;
    net.backward(params, tape, deps, nullptr, &dcond);
    for (int b = 0; b < B; ++b) {
        for (int k = 0; k < d; ++k) out.grad[k] += dcond.sample(b)[k];
    }
    return out;
}

}  // namespace

AnnealingSchedule AnnealingSchedule::defaults(int T) {
    return AnnealingSchedule{std::max(2, static_cast<int>(std::lround(0.8 * T))),
                             std::max(1, static_cast<int>(std::lround(0.2 * T))), 1.0};
}

void AnnealingSchedule::validate(int T) const {
    require(1 <= anneal_low && anneal_low < anneal_high && anneal_high <= T,
            "annealing bounds must satisfy 1 <= anneal_low < anneal_high <= T");
    require(nu >= 0.0 && std::isfinite(nu), "nu must be a finite non-negative number");
}

std::string ModalityEmbedding::id() const {
    std::vector<unsigned char> bytes(reinterpret_cast<const unsigned char*>(table.data()),
                                     reinterpret_cast<const unsigned char*>(table.data()) +
                                         table.size() * sizeof(float));
    return "mge-" + io::bytes_digest(bytes);
}

ModalityEmbedding ModalityEmbedding::zeros(int eta, int T, int d) {
    require(eta >= 1, "eta must be >= 1");
    require(T >= eta, "T must be at least eta");
    require(d >= 1, "embedding dimension must be positive");
    ModalityEmbedding e;
    e.eta = eta;
    e.T = T;
    e.table = Eigen::MatrixXf::Zero(eta, d);
    e.anneal = AnnealingSchedule::defaults(T);
    return e;
}

int row_index(const ModalityEmbedding& e, int t) {
    if (t < 1 || t > e.T) {
        throw InvalidArgument("embedding lookup: step " + std::to_string(t) + " outside [1, " +
                              std::to_string(e.T) + "]");
    }
    return static_cast<int>((static_cast<long>(t - 1) * e.eta) / e.T);
}

std::vector<double> lookup(const ModalityEmbedding& e, int t) {
    const int r = row_index(e, t);
    std::vector<double> v(e.dim());
    for (int k = 0; k < e.dim(); ++k) v[k] = e.table(r, k);
    return v;
}

GuidedOutput guided_denoise(const denoiser::DenoiserCheckpoint& ckpt, std::span<const double> e_vec,
                            const Plane& xt, int t, const diffusion::NoiseSchedule& sched) {
    GuidedOutput out;
    out.eps = denoiser::denoise(ckpt, xt, t, e_vec);
    out.x0_hat = diffusion::predict_x0(xt, out.eps, t, sched);
    out.xtm1_hat = diffusion::posterior_mean(xt, out.eps, t, sched);
    return out;
}

double mge_loss(const Plane& x0_hat, const Plane& xtm1_hat, const Plane& x0_tar,
                const Plane& xtm1_tar) {
    require_same_shape(x0_hat, x0_tar, "mge_loss x0");
    require_same_shape(xtm1_hat, xtm1_tar, "mge_loss x_{t-1}");
    require_same_shape(x0_hat, xtm1_hat, "mge_loss");
    return (x0_tar - x0_hat).square().mean() + (xtm1_tar - xtm1_hat).square().mean();
}

LossGrad mge_loss_grad(const denoiser::DenoiserCheckpoint& ckpt, std::span<const double> e_vec,
                       int t, const std::vector<Plane>& xts, const std::vector<Plane>& x0s,
                       const std::vector<Plane>& xtm1s, const diffusion::NoiseSchedule& sched) {
    require(static_cast<int>(e_vec.size()) == ckpt.config.embed_dim(),
            "embedding length does not match backbone");
    const nn::UNet<float> net(ckpt.config.shape, nn::Binder<float>(ckpt.params));
    return batch_loss_grad(net, ckpt.params, e_vec, t, xts, x0s, xtm1s, sched);
}

ModalityEmbedding train_embeddings(const denoiser::DenoiserCheckpoint& ckpt,
                                   const std::vector<Spectrogram>& targets,
                                   const diffusion::NoiseSchedule& sched, const TrainOptions& opt) {
    require(!targets.empty(), "MGE training needs at least one target sample");
    require(opt.batch >= 1, "batch must be >= 1");
    require(opt.iters >= 0, "iters must be non-negative");
    const int T = sched.steps();
    opt.anneal.validate(T);
    const int d = ckpt.config.embed_dim();
    const int h = ckpt.config.shape.height;
    const int w = ckpt.config.shape.width;
    for (const auto& s : targets) {
        require(s.height() == h && s.width() == w, "target sample size does not match backbone");
    }

    ModalityEmbedding e = ModalityEmbedding::zeros(opt.eta, T, d);
    e.anneal = opt.anneal;
    e.meta = {opt.iters, opt.lr, opt.batch, opt.seed, ckpt.id(), targets.size(), {}};
    if (opt.iters == 0) return e;

    const std::uint64_t frozen = nn::checksum(ckpt.params);
    const nn::UNet<float> net(ckpt.config.shape, nn::Binder<float>(ckpt.params));
    Eigen::MatrixXd table = Eigen::MatrixXd::Zero(opt.eta, d);
    std::vector<nn::VectorAdam> adam(opt.eta, nn::VectorAdam(d, opt.lr));

    Rng rng(derive_seed(opt.seed, "mge.train"));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<int> rounds(opt.eta);
    std::iota(rounds.begin(), rounds.end(), 0);
    std::size_t round_pos = rounds.size();
    std::vector<double> phase(opt.eta);
    for (auto& p : phase) p = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    std::vector<long> visits(opt.eta, 0);
    std::vector<std::size_t> order(targets.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t order_pos = order.size();

    const int B = opt.batch;
    double window = 0.0;
    long window_n = 0;
    for (long it = 0; it < opt.iters; ++it) {
        if (round_pos == rounds.size()) {
            std::shuffle(rounds.begin(), rounds.end(), rng);
            round_pos = 0;
        }
        const int row = rounds[round_pos++];
        const int lo = ceil_div(static_cast<long>(row) * T, opt.eta) + 1;
        const int hi = ceil_div(static_cast<long>(row + 1) * T, opt.eta);
        // Golden-ratio sequence per row: uniform coverage of the interval
        // without clumping, so early and late iterations see the same mix of t.
        const double u = std::fmod(phase[row] + 0.6180339887498949 * visits[row]++, 1.0);
        const int t = std::min(hi, lo + static_cast<int>(u * (hi - lo + 1)));

        const double ab = sched.alpha_bar(t);
        const double ab_prev = sched.alpha_bar(t - 1);
        std::vector<Plane> x0s(B), xtm1s(B), xts(B);
        for (int b = 0; b < B; ++b) {
            if (order_pos == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                order_pos = 0;
            }
            const Plane& x0 = targets[order[order_pos++]].data;
            Plane z(h, w);
            for (Eigen::Index k = 0; k < z.size(); ++k) z.data()[k] = normal(rng);
            xts[b] = std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * z;
            xtm1s[b] = std::sqrt(ab_prev) * x0 + std::sqrt(1.0 - ab_prev) * z;
            x0s[b] = x0;
        }
        std::vector<double> cur(d);
        for (int k = 0; k < d; ++k) cur[k] = table(row, k);
        const auto [loss, grad] = batch_loss_grad(net, ckpt.params, cur, t, xts, x0s, xtm1s, sched);
        if (!std::isfinite(loss)) {
            throw NonFiniteError("MGE loss became non-finite at iteration " + std::to_string(it) +
                                 " (t=" + std::to_string(t) + ")");
        }
        adam[row].step(cur, grad);
        for (int k = 0; k < d; ++k) table(row, k) = cur[k];

        e.meta.loss_history.push_back(loss);
        window += loss;
        ++window_n;
        if (opt.progress && (it + 1) % opt.report_every == 0) {
            opt.progress(it + 1, window / static_cast<double>(window_n));
            window = 0.0;
            window_n = 0;
        }
    }
    if (nn::checksum(ckpt.params) != frozen) {
        throw std::logic_error("backbone parameters changed during embedding training");
    }
    e.table = table.cast<float>();
    return e;
}

double gamma(int t, const AnnealingSchedule& a) {
    if (t <= a.anneal_low) return 1.0;
    if (t >= a.anneal_high) return 0.0;
    // Falls linearly from 1 at anneal_low to 0 at anneal_high, so the
    // weight is continuous at both bounds.
    return static_cast<double>(a.anneal_high - t) / static_cast<double>(a.anneal_high - a.anneal_low);
}

std::vector<double> perturb(std::span<const double> e_vec, int t, const AnnealingSchedule& a,
                            std::span<const double> z) {
    require(z.size() == e_vec.size(), "perturbation noise length must match the embedding");
    const double g = gamma(t, a);
    const double se = std::sqrt(g);
    const double sz = a.nu * std::sqrt(1.0 - g);
    std::vector<double> out(e_vec.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = se * e_vec[k] + sz * z[k];
    return out;
}

nlohmann::json sidecar_json(const ModalityEmbedding& e) {
    return {{"kind", "modality_embedding"},
            {"eta", e.eta},
            {"T", e.T},
            {"d", e.dim()},
            {"anneal_high", e.anneal.anneal_high},
            {"anneal_low", e.anneal.anneal_low},
            {"nu", e.anneal.nu},
            {"training_meta",
             {{"iters", e.meta.iters},
              {"lr", e.meta.lr},
              {"batch", e.meta.batch},
              {"seed", e.meta.seed},
              {"backbone_id", e.meta.backbone_id},
              {"targets", e.meta.targets},
              {"loss_history", e.meta.loss_history}}}};
}

void save_embedding(const std::filesystem::path& stem, const ModalityEmbedding& e) {
    io::TensorData t;
    t.shape = {static_cast<std::uint64_t>(e.eta), static_cast<std::uint64_t>(e.dim())};
    t.values.resize(e.table.size());
    for (int r = 0; r < e.eta; ++r) {
        for (int k = 0; k < e.dim(); ++k) t.values[r * e.dim() + k] = e.table(r, k);
    }
    io::write_tensor_file(stem.string() + ".rft", t);
    io::write_json(stem.string() + ".json", sidecar_json(e));
}

ModalityEmbedding load_embedding(const std::filesystem::path& stem) {
    const auto j = io::read_json(stem.string() + ".json");
    if (j.value("kind", std::string()) != "modality_embedding") {
        throw CorruptFileError(stem.string() + ".json: not an embedding sidecar");
    }
    const auto t = io::read_tensor_file(stem.string() + ".rft");
    ModalityEmbedding e = ModalityEmbedding::zeros(j.at("eta").get<int>(), j.at("T").get<int>(),
                                                   j.at("d").get<int>());
    if (t.shape != std::vector<std::uint64_t>{static_cast<std::uint64_t>(e.eta),
                                              static_cast<std::uint64_t>(e.dim())}) {
        throw CorruptFileError(stem.string() + ".rft: table shape disagrees with sidecar");
    }
    for (int r = 0; r < e.eta; ++r) {
        for (int k = 0; k < e.dim(); ++k) e.table(r, k) = t.values[r * e.dim() + k];
    }
    e.anneal = {j.at("anneal_high").get<int>(), j.at("anneal_low").get<int>(),
                j.at("nu").get<double>()};
    const auto& m = j.at("training_meta");
    e.meta.iters = m.value("iters", 0L);
    e.meta.lr = m.value("lr", 0.0);
    e.meta.batch = m.value("batch", 0);
    e.meta.seed = m.value("seed", std::uint64_t{0});
    e.meta.backbone_id = m.value("backbone_id", std::string());
    e.meta.targets = m.value("targets", std::size_t{0});
    e.meta.loss_history = m.value("loss_history", std::vector<double>{});
    return e;
}

}  // namespace rfcmg::mge
