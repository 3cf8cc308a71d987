// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rfcmg/denoiser.hpp"

#include <cmath>
#include <sstream>

#include "rfcmg/io.hpp"

namespace rfcmg::denoiser {

namespace {

constexpr int kMaxInferenceBatch = 32;

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

std::size_t resblock_params(std::size_t cin, std::size_t cout, std::size_t d) {
    std::size_t n = 2 * cin + (cin * cout * 9 + cout) + (d * cout + cout) + 2 * cout +
                    (cout * cout * 9 + cout);
    if (cin != cout) n += cin * cout + cout;
    return n;
}

}  // namespace

void DenoiserConfig::validate() const {
    require(is_pow2(shape.height) && shape.height >= 16, "image height must be a power of two >= 16");
    require(is_pow2(shape.width) && shape.width >= 16, "image width must be a power of two >= 16");
    require(shape.time_embed_dim >= 8 && shape.time_embed_dim % 2 == 0,
            "time_embed_dim must be even and >= 8");
    require(shape.base_channels >= 1, "base_channels must be positive");
    require(!shape.channel_multipliers.empty(), "channel_multipliers must be non-empty");
    for (int m : shape.channel_multipliers) require(m >= 1, "channel multipliers must be positive");
    const int levels = static_cast<int>(shape.channel_multipliers.size());
    require((shape.height >> (levels - 1)) >= 2 && (shape.width >> (levels - 1)) >= 2,
            "too many resolution levels for the image size");
}

nlohmann::json to_json(const DenoiserConfig& c) {
    return {{"image_size", {c.shape.height, c.shape.width}},
            {"base_channels", c.shape.base_channels},
            {"channel_multipliers", c.shape.channel_multipliers},
            {"time_embed_dim", c.shape.time_embed_dim},
            {"seed", c.seed}};
}

DenoiserConfig config_from_json(const nlohmann::json& j) {
    DenoiserConfig c;
    c.shape.height = j.at("image_size").at(0).get<int>();
    c.shape.width = j.at("image_size").at(1).get<int>();
    c.shape.base_channels = j.at("base_channels").get<int>();
    c.shape.channel_multipliers = j.at("channel_multipliers").get<std::vector<int>>();
    c.shape.time_embed_dim = j.at("time_embed_dim").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
}

std::string DenoiserCheckpoint::id() const {
    std::ostringstream os;
    os << "unet-" << std::hex << nn::checksum(params);
    return os.str();
}

std::size_t parameter_count(const nn::UNetShape& s) {
    const std::size_t d = s.time_embed_dim;
    const std::size_t c = s.base_channels;
    std::size_t n = 2 * (d * d + d);  // step-embedding MLP
    n += 9 * c + c;                   // input conv
    std::vector<std::size_t> ch;
    for (int m : s.channel_multipliers) ch.push_back(c * m);
    std::size_t prev = c;
    for (auto ci : ch) {
        n += resblock_params(prev, ci, d);
        prev = ci;
    }
    n += resblock_params(ch.back(), ch.back(), d);
    for (std::size_t i = 0; i + 1 < ch.size(); ++i) n += resblock_params(ch[i + 1] + ch[i], ch[i], d);
    n += 2 * c + (9 * c + 1);  // output norm + conv
    return n;
}

DenoiserCheckpoint init_params(const DenoiserConfig& config) {
    config.validate();
    DenoiserCheckpoint ckpt;
    ckpt.config = config;
    nn::UNet<float> net(config.shape, nn::Binder<float>(ckpt.params));
    Rng rng(derive_seed(config.seed, "denoiser.init"));
    net.init(ckpt.params, rng);
    return ckpt;
}

std::vector<Plane> denoise_batch(const DenoiserCheckpoint& ckpt, const std::vector<Plane>& xt,
                                 std::span<const int> t,
                                 const std::vector<std::vector<double>>& conds) {
    require(xt.size() == t.size(), "denoise_batch: one step per sample");
    require(conds.empty() || conds.size() == xt.size(), "denoise_batch: one cond per sample");
    const nn::UNet<float> net(ckpt.config.shape, nn::Binder<float>(ckpt.params));
    const int d = ckpt.config.embed_dim();
    std::vector<Plane> out;
    out.reserve(xt.size());
    for (std::size_t start = 0; start < xt.size(); start += kMaxInferenceBatch) {
        const std::size_t end = std::min(xt.size(), start + kMaxInferenceBatch);
        std::vector<const Plane*> ptrs;
        for (std::size_t i = start; i < end; ++i) ptrs.push_back(&xt[i]);
        const auto x = nn::stack_planes<float>(ptrs);
        std::optional<nn::Tensor<float>> cond;
        if (!conds.empty()) {
            cond.emplace(static_cast<int>(end - start), d, 1, 1);
            for (std::size_t i = start; i < end; ++i) {
                require(static_cast<int>(conds[i].size()) == d,
                        "conditioning vector length " + std::to_string(conds[i].size()) +
                            " != embedding dim " + std::to_string(d));
                for (int k = 0; k < d; ++k) {
                    cond->v[(i - start) * d + k] = static_cast<float>(conds[i][k]);
                }
            }
        }
        nn::UNet<float>::Tape tape;
        const auto y = net.forward(ckpt.params, x, t.subspan(start, end - start),
                                   cond ? &*cond : nullptr, tape);
        for (int i = 0; i < y.n; ++i) out.push_back(nn::unstack_plane(y, i));
    }
    return out;
}

Plane denoise(const DenoiserCheckpoint& ckpt, const Plane& xt, int t, std::span<const double> cond) {
    const int steps[1] = {t};
    std::vector<std::vector<double>> conds;
    if (!cond.empty()) conds.emplace_back(cond.begin(), cond.end());
    return denoise_batch(ckpt, {xt}, steps, conds).front();
}

DenoiserCheckpoint train_denoiser(const DenoiserCheckpoint& ckpt,
                                  const std::vector<Spectrogram>& dataset,
                                  const diffusion::NoiseSchedule& sched, const TrainOptions& opt) {
    require(!dataset.empty(), "training set is empty");
    require(opt.batch >= 1, "batch must be >= 1");
    DenoiserCheckpoint out = ckpt;
    if (opt.steps <= 0) return out;

    const nn::UNet<float> net(out.config.shape, nn::Binder<float>(out.params));
    nn::Adam<float> adam(out.params, {.lr = opt.lr});
    Rng rng(derive_seed(opt.seed, "denoiser.train"));
    std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
    std::uniform_int_distribution<int> pick_t(1, sched.steps());
    std::normal_distribution<double> normal(0.0, 1.0);
    const int h = out.config.shape.height;
    const int w = out.config.shape.width;

    double window = 0.0;
    long window_n = 0;
    for (long step = 0; step < opt.steps; ++step) {
        nn::Tensor<float> xt(opt.batch, 1, h, w), eps(opt.batch, 1, h, w);
        std::vector<int> ts(opt.batch);
        for (int b = 0; b < opt.batch; ++b) {
            const Plane& x0 = dataset[pick(rng)].data;
            require(x0.rows() == h && x0.cols() == w, "training sample has wrong size");
            ts[b] = pick_t(rng);
            const double sa = std::sqrt(sched.alpha_bar(ts[b]));
            const double sn = std::sqrt(1.0 - sched.alpha_bar(ts[b]));
            float* xs = xt.sample(b);
            float* es = eps.sample(b);
            for (Eigen::Index k = 0; k < x0.size(); ++k) {
                const double e = normal(rng);
                es[k] = static_cast<float>(e);
                xs[k] = static_cast<float>(sa * x0.data()[k] + sn * e);
            }
        }
        auto grads = nn::zero_grads(out.params);
        const double loss = eps_loss(net, out.params, xt, ts, eps, &grads);
        if (!std::isfinite(loss)) {
            throw NonFiniteError("denoiser training loss became non-finite at step " +
                                 std::to_string(out.meta.steps + step));
        }
        adam.step(out.params, grads);
        out.meta.loss_history.push_back(loss);
        window += loss;
        ++window_n;
        if (opt.progress && (step + 1) % opt.report_every == 0) {
            opt.progress(step + 1, window / static_cast<double>(window_n));
            window = 0.0;
            window_n = 0;
        }
    }
    out.meta.steps += opt.steps;
    out.meta.final_loss = out.meta.loss_history.back();
    if (!opt.dataset_id.empty()) out.meta.source_dataset = opt.dataset_id;
    return out;
}

DenoiserCheckpoint pretrain_source(const DenoiserCheckpoint& ckpt,
                                   const std::vector<Spectrogram>& dataset,
                                   const diffusion::NoiseSchedule& sched, const TrainOptions& opt) {
    require(!dataset.empty(), "source dataset is empty");
    for (const auto& s : dataset) {
        require(s.modality == Modality::source, "pretrain_source received a non-source sample");
    }
    return train_denoiser(ckpt, dataset, sched, opt);
}

void save_checkpoint(const std::filesystem::path& path, const DenoiserCheckpoint& ckpt) {
    io::Archive a;
    a.header = {{"kind", "denoiser_checkpoint"},
                {"config", to_json(ckpt.config)},
                {"training_meta",
                 {{"source_dataset", ckpt.meta.source_dataset},
                  {"steps", ckpt.meta.steps},
                  {"final_loss", ckpt.meta.final_loss},
                  {"loss_history", ckpt.meta.loss_history}}}};
    for (int i = 0; i < ckpt.params.count(); ++i) {
        io::TensorData t;
        for (int d : ckpt.params.shape(i)) t.shape.push_back(static_cast<std::uint64_t>(d));
        t.values.assign(ckpt.params.value(i).begin(), ckpt.params.value(i).end());
        a.tensors.push_back({ckpt.params.name(i), std::move(t)});
    }
    io::write_archive(path, a);
}

DenoiserCheckpoint load_checkpoint(const std::filesystem::path& path) {
    const io::Archive a = io::read_archive(path);
    if (a.header.value("kind", std::string()) != "denoiser_checkpoint") {
        throw CorruptFileError(path.string() + ": not a denoiser checkpoint");
    }
    DenoiserCheckpoint ckpt;
    ckpt.config = config_from_json(a.header.at("config"));
    const auto& meta = a.header.at("training_meta");
    ckpt.meta.source_dataset = meta.value("source_dataset", std::string());
    ckpt.meta.steps = meta.value("steps", 0L);
    ckpt.meta.final_loss = meta.value("final_loss", 0.0);
    ckpt.meta.loss_history = meta.value("loss_history", std::vector<double>{});
    // Bind the expected layout, then fill each tensor by name.
    nn::UNet<float> net(ckpt.config.shape, nn::Binder<float>(ckpt.params));
    if (static_cast<std::size_t>(ckpt.params.count()) != a.tensors.size()) {
        throw CorruptFileError(path.string() + ": parameter count mismatch");
    }
    for (int i = 0; i < ckpt.params.count(); ++i) {
        const auto& t = a.get(ckpt.params.name(i));
        std::vector<std::uint64_t> expect;
        for (int d : ckpt.params.shape(i)) expect.push_back(static_cast<std::uint64_t>(d));
        if (t.shape != expect) {
            throw CorruptFileError(path.string() + ": shape mismatch for " + ckpt.params.name(i));
        }
        ckpt.params.value(i).assign(t.values.begin(), t.values.end());
    }
    return ckpt;
}

}  // namespace rfcmg::denoiser
