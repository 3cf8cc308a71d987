// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rfcmg/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "rfcmg/downstream.hpp"
#include "rfcmg/io.hpp"
#include "rfcmg/lfmc.hpp"
#include "rfcmg/rng.hpp"
#include "rfcmg/synthdata.hpp"

namespace rfcmg::experiments {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string digest_of(const std::string& blob) {
    const auto* p = reinterpret_cast<const unsigned char*>(blob.data());
    return io::bytes_digest(std::span<const unsigned char>(p, blob.size()));
}

std::string identity_of(const std::vector<Spectrogram>& data) {
    std::ostringstream os;
    for (const auto& s : data) {
        os << to_string(s.meta.style) << ':' << s.label << ':' << s.meta.instance_seed << ';';
    }
    return os.str();
}

std::string fmt_value(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

std::vector<Plane> head(const std::vector<Spectrogram>& s, std::size_t n) {
    std::vector<Plane> out;
    for (std::size_t i = 0; i < std::min(n, s.size()); ++i) out.push_back(s[i].data);
    return out;
}

/// The k-th sample of each class, cycling classes, until `count` are taken.
std::vector<Spectrogram> spread_over_classes(const std::vector<Spectrogram>& data, int count) {
    std::map<int, std::vector<const Spectrogram*>> by_class;
    for (const auto& s : data) by_class[s.label].push_back(&s);
    std::vector<Spectrogram> out;
    for (std::size_t k = 0; static_cast<int>(out.size()) < count; ++k) {
        bool any = false;
        for (auto& [label, v] : by_class) {
            if (k < v.size() && static_cast<int>(out.size()) < count) {
                out.push_back(*v[k]);
                any = true;
            }
        }
        if (!any) break;
    }
    require(static_cast<int>(out.size()) == count, "not enough samples to pick references from");
    return out;
}

metrics::MetricReport pair_scores(const std::vector<Spectrogram>& gen,
                                  const std::vector<Spectrogram>& truth) {
    metrics::MetricReport r;
    double s = 0.0, p = 0.0;
    for (std::size_t i = 0; i < gen.size(); ++i) {
        s += metrics::ssim(gen[i].data, truth[i].data);
        p += metrics::psnr(gen[i].data, truth[i].data);
    }
    r.ssim = s / static_cast<double>(gen.size());
    r.psnr = p / static_cast<double>(gen.size());
    r.n_generated = static_cast<long>(gen.size());
    r.n_real = static_cast<long>(truth.size());
    return r;
}

}  // namespace

StyleKind target_style(const config::ExperimentConfig& cfg) {
    const StyleKind s = style_from_string(cfg.text("target_style"));
    require(s == StyleKind::mmwave || s == StyleKind::rfid, "target_style must be mmwave or rfid");
    return s;
}

Bench::Bench(config::ExperimentConfig cfg, std::ostream* log)
    : cfg_(std::move(cfg)),
      log_(log),
      sched_(diffusion::build_schedule(cfg_.int32("T"), cfg_.real("beta_start"),
                                       cfg_.real("beta_end"))) {}

int Bench::classes_of(StyleKind s) const {
    switch (s) {
        case StyleKind::mmwave:
            return cfg_.int32("mmwave_classes");
        case StyleKind::rfid:
            return cfg_.int32("rfid_classes");
        default:
            return cfg_.int32("source_classes");
    }
}

void Bench::log(const std::string& line) const {
    if (log_) *log_ << line << std::endl;
}

std::filesystem::path Bench::cache_path(const std::string& name) const {
    const auto& dir = cfg_.text("cache_dir");
    if (dir.empty()) return {};
    std::filesystem::create_directories(dir);
    return std::filesystem::path(dir) / name;
}

std::vector<Spectrogram> Bench::source_data() const {
    synthdata::DatasetSpec d;
    d.style = StyleKind::wifi;
    d.classes = cfg_.int32("source_classes");
    d.per_class = cfg_.int32("source_per_class");
    d.seed = derive_seed(cfg_.seed(), "data.source");
    d.height = d.width = cfg_.int32("image_size");
    d.texture_scale = cfg_.real("texture_scale");
    return synthdata::make_dataset(d);
}

std::vector<Spectrogram> Bench::mismatched_data() const {
    synthdata::DatasetSpec d;
    d.style = StyleKind::mismatched;
    d.classes = cfg_.int32("source_classes");
    d.per_class = cfg_.int32("source_per_class");
    d.seed = derive_seed(cfg_.seed(), "data.mismatched");
    d.height = d.width = cfg_.int32("image_size");
    auto data = synthdata::make_dataset(d);
    // Pretraining only accepts the source modality; the content is what differs.
    for (auto& s : data) s.modality = Modality::source;
    return data;
}

std::pair<std::vector<Plane>, std::vector<int>> Bench::encoder_data() const {
    std::vector<Plane> x;
    std::vector<int> y;
    int offset = 0;
    for (StyleKind s : {StyleKind::wifi, StyleKind::mmwave, StyleKind::rfid}) {
        synthdata::DatasetSpec d;
        d.style = s;
        d.classes = classes_of(s);
        d.per_class = cfg_.int32("encoder_per_class");
        d.seed = derive_seed(cfg_.seed(), "data.encoder");
        d.height = d.width = cfg_.int32("image_size");
        d.texture_scale = cfg_.real("texture_scale");
        for (const auto& sp : synthdata::make_dataset(d)) {
            x.push_back(sp.data);
            y.push_back(offset + sp.label);
        }
        offset += d.classes;
    }
    return {std::move(x), std::move(y)};
}

const TargetSplit& Bench::target(StyleKind s) {
    auto it = targets_.find(s);
    if (it != targets_.end()) return it->second;
    synthdata::DatasetSpec d;
    d.style = s;
    d.classes = classes_of(s);
    d.per_class = cfg_.int32("target_per_class");
    d.seed = derive_seed(cfg_.seed(), std::string("data.target.") + std::string(to_string(s)));
    d.height = d.width = cfg_.int32("image_size");
    d.texture_scale = cfg_.real("texture_scale");
    auto [pool, eval] = synthdata::kshot_split(synthdata::make_dataset(d), cfg_.int32("kshot_max"),
                                               derive_seed(cfg_.seed(), "split"));
    synthdata::require_disjoint(pool, eval);
    return targets_.emplace(s, TargetSplit{std::move(pool), std::move(eval)}).first->second;
}

std::vector<Spectrogram> Bench::adapt(StyleKind s, int k) {
    require(k >= 1 && k <= cfg_.int32("kshot_max"), "K must lie in [1, kshot_max]");
    std::map<int, int> taken;
    std::vector<Spectrogram> out;
    for (const auto& sp : target(s).pool) {
        if (taken[sp.label]++ < k) out.push_back(sp);
    }
    return out;
}

denoiser::DenoiserConfig Bench::denoiser_config() const {
    denoiser::DenoiserConfig c;
    c.shape.height = c.shape.width = cfg_.int32("image_size");
    c.shape.base_channels = cfg_.int32("base_channels");
    c.shape.channel_multipliers = cfg_.ints("channel_multipliers");
    c.shape.time_embed_dim = cfg_.int32("time_embed_dim");
    c.seed = derive_seed(cfg_.seed(), "backbone.init");
    c.validate();
    return c;
}

const denoiser::DenoiserCheckpoint& Bench::backbone(const std::string& prior_in) {
    const std::string prior = prior_in.empty() ? cfg_.text("prior") : prior_in;
    require(prior == "source" || prior == "random" || prior == "mismatched",
            "prior must be source, random or mismatched");
    if (auto it = backbones_.find(prior); it != backbones_.end()) return it->second;

    if (prior == "source" && !cfg_.text("backbone").empty()) {
        return backbones_.emplace(prior, denoiser::load_checkpoint(cfg_.text("backbone")))
            .first->second;
    }
    auto ckpt = denoiser::init_params(denoiser_config());
    if (prior == "random") return backbones_.emplace(prior, std::move(ckpt)).first->second;

    const std::string key =
        cfg_.digest({"seed", "image_size", "source_classes", "source_per_class", "texture_scale",
                     "T", "beta_start", "beta_end", "base_channels", "channel_multipliers",
                     "time_embed_dim", "pretrain_steps", "pretrain_lr", "pretrain_batch"});
    const auto cached = cache_path("backbone-" + prior + "-" + key + ".rfck");
    if (!cached.empty() && std::filesystem::exists(cached)) {
        log("loading cached " + prior + " backbone " + cached.string());
        return backbones_.emplace(prior, denoiser::load_checkpoint(cached)).first->second;
    }
    const auto data = prior == "source" ? source_data() : mismatched_data();
    denoiser::TrainOptions opt;
    opt.steps = cfg_.integer("pretrain_steps");
    opt.lr = cfg_.real("pretrain_lr");
    opt.batch = cfg_.int32("pretrain_batch");
    opt.seed = derive_seed(cfg_.seed(), "backbone.train");
    opt.dataset_id = prior + "-" + key;
    opt.report_every = 500;
    opt.progress = [this, &prior](long step, double loss) {
        std::ostringstream os;
        os << "pretrain[" << prior << "] step " << step << " loss " << loss;
        log(os.str());
    };
    const auto t0 = Clock::now();
    auto trained = denoiser::pretrain_source(ckpt, data, sched_, opt);
    log("pretrain[" + prior + "] done in " + fmt_value(seconds_since(t0)) + " s");
    if (!cached.empty()) denoiser::save_checkpoint(cached, trained);
    return backbones_.emplace(prior, std::move(trained)).first->second;
}

const metrics::FeatureEncoder& Bench::encoder() {
    if (encoder_) return *encoder_;
    if (!cfg_.text("encoder").empty()) {
        encoder_ = std::make_unique<metrics::FeatureEncoder>(metrics::load_encoder(cfg_.text("encoder")));
        return *encoder_;
    }
    const std::string key =
        cfg_.digest({"seed", "image_size", "source_classes", "mmwave_classes", "rfid_classes",
                     "encoder_per_class", "texture_scale", "encoder_epochs", "encoder_lr"});
    const auto cached = cache_path("encoder-" + key + ".rfck");
    if (!cached.empty() && std::filesystem::exists(cached)) {
        encoder_ = std::make_unique<metrics::FeatureEncoder>(metrics::load_encoder(cached));
        return *encoder_;
    }
    const auto [x, y] = encoder_data();
    metrics::EncoderOptions opt;
    opt.epochs = cfg_.int32("encoder_epochs");
    opt.lr = cfg_.real("encoder_lr");
    opt.seed = derive_seed(cfg_.seed(), "encoder");
    const auto t0 = Clock::now();
    encoder_ = std::make_unique<metrics::FeatureEncoder>(metrics::train_encoder(x, y, opt));
    log("encoder trained in " + fmt_value(seconds_since(t0)) + " s");
    if (!cached.empty()) metrics::save_encoder(cached, *encoder_);
    return *encoder_;
}

mge::ModalityEmbedding Bench::embedding(const denoiser::DenoiserCheckpoint& ckpt,
                                        const std::vector<Spectrogram>& targets, int eta) {
    mge::TrainOptions opt;
    opt.eta = eta;
    opt.iters = cfg_.integer("mge_iters");
    opt.lr = cfg_.real("mge_lr");
    opt.batch = cfg_.int32("mge_batch");
    opt.seed = derive_seed(cfg_.seed(), "mge");
    opt.anneal = {cfg_.int32("anneal_high"), cfg_.int32("anneal_low"), cfg_.real("nu")};
    std::ostringstream key;
    key << ckpt.id() << '|' << eta << '|' << opt.iters << '|' << opt.lr << '|' << opt.batch << '|'
        << opt.seed << '|' << opt.anneal.anneal_high << '|' << opt.anneal.anneal_low << '|'
        << opt.anneal.nu << '|' << identity_of(targets);
    const auto cached = cache_path("mge-" + digest_of(key.str()));
    if (!cached.empty() && std::filesystem::exists(cached.string() + ".rft")) {
        return mge::load_embedding(cached);
    }
    const auto t0 = Clock::now();
    auto e = mge::train_embeddings(ckpt, targets, sched_, opt);
    log("embedding (eta " + std::to_string(eta) + ", " + std::to_string(targets.size()) +
        " targets) fitted in " + fmt_value(seconds_since(t0)) + " s");
    if (!cached.empty()) mge::save_embedding(cached, e);
    return e;
}

denoiser::DenoiserCheckpoint Bench::finetuned(const denoiser::DenoiserCheckpoint& ckpt,
                                              const std::vector<Spectrogram>& targets) {
    const long steps = cfg_.integer("finetune_steps");
    const double lr = cfg_.real("finetune_lr");
    const int batch = cfg_.int32("finetune_batch");
    std::ostringstream key;
    key << ckpt.id() << '|' << steps << '|' << lr << '|' << batch << '|' << cfg_.seed() << '|'
        << identity_of(targets);
    const auto cached = cache_path("finetune-" + digest_of(key.str()) + ".rfck");
    if (!cached.empty() && std::filesystem::exists(cached)) return denoiser::load_checkpoint(cached);
    const auto t0 = Clock::now();
    auto out = pipeline::baseline_finetune(ckpt, targets, sched_, steps, lr, cfg_.seed(), batch);
    log("fine-tune baseline done in " + fmt_value(seconds_since(t0)) + " s");
    if (!cached.empty()) denoiser::save_checkpoint(cached, out);
    return out;
}

pipeline::GenerationConfig Bench::generation_config() const {
    pipeline::GenerationConfig g;
    const auto& s = cfg_.text("sampler");
    require(s == "ddim" || s == "ddpm", "sampler must be ddim or ddpm");
    g.sampler = s == "ddim" ? pipeline::Sampler::ddim : pipeline::Sampler::ddpm;
    g.ddim_steps = cfg_.int32("ddim_steps");
    g.lowpass_factor = cfg_.int32("N");
    const auto& k = cfg_.text("kernel");
    require(k == "block" || k == "bicubic", "kernel must be block or bicubic");
    g.kernel = k == "block" ? lfmc::ResampleKernel::block : lfmc::ResampleKernel::bicubic;
    g.anneal = mge::AnnealingSchedule{cfg_.int32("anneal_high"), cfg_.int32("anneal_low"),
                                      cfg_.real("nu")};
    g.use_mge = cfg_.flag("use_mge");
    g.use_lfmc = cfg_.flag("use_lfmc");
    g.seed = derive_seed(cfg_.seed(), "generate");
    g.batch = cfg_.int32("gen_batch");
    g.validate(sched_.steps());
    return g;
}

std::vector<Spectrogram> Bench::generate(const denoiser::DenoiserCheckpoint& ckpt,
                                         const mge::ModalityEmbedding* e,
                                         const std::vector<Spectrogram>& refs, int n,
                                         const pipeline::GenerationConfig& g, StyleKind style) {
    require(n >= 1, "need at least one sample");
    const bool anchored = g.use_lfmc;
    if (anchored) require(!refs.empty(), "LFMC needs at least one reference");
    std::vector<Spectrogram> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int start = 0, b = 0; start < n; start += g.batch, ++b) {
        pipeline::GenerationConfig gc = g;
        gc.batch = std::min(g.batch, n - start);
        gc.seed = derive_seed(g.seed, static_cast<std::uint64_t>(b));
        gc.use_mge = g.use_mge && e != nullptr;
        std::vector<Plane> r;
        if (anchored) {
            for (int i = 0; i < gc.batch; ++i) r.push_back(refs[(start + i) % refs.size()].data);
        }
        const auto x = pipeline::generate(ckpt, gc.use_mge ? e : nullptr, r, gc, sched_);
        for (int i = 0; i < gc.batch; ++i) {
            Spectrogram s;
            s.data = x[i];
            s.modality = modality_of(style);
            s.label = anchored ? refs[(start + i) % refs.size()].label : -1;
            s.meta.style = style;
            s.meta.instance_seed =
                derive_seed(derive_seed(g.seed, "sample"), static_cast<std::uint64_t>(start + i));
            out.push_back(std::move(s));
        }
    }
    return out;
}

std::vector<Spectrogram> Bench::sample_plain(const denoiser::DenoiserCheckpoint& ckpt, int n,
                                             const pipeline::GenerationConfig& g, StyleKind style) {
    pipeline::GenerationConfig gc = g;
    gc.use_mge = false;
    gc.use_lfmc = false;
    return generate(ckpt, nullptr, {}, n, gc, style);
}

metrics::MetricReport Bench::score(const std::vector<Spectrogram>& generated, StyleKind style,
                                   const std::vector<Spectrogram>& refs) {
    require(generated.size() >= 2, "scoring needs at least two generated samples");
    const auto& enc = encoder();
    const auto& eval = target(style).eval;
    if (!eval_features_.count(style)) {
        const auto planes = metrics::planes_of(eval);
        eval_features_[style] = metrics::features(enc, planes);
        eval_diversity_[style] = metrics::intra_lpips(enc, planes);
    }
    const auto planes = metrics::planes_of(generated);
    metrics::MetricReport r;
    r.target_style = std::string(to_string(style));
    r.fid = metrics::fid(metrics::features(enc, planes), eval_features_[style]);
    r.intra_lpips = metrics::intra_lpips(enc, planes);
    r.r_lpips = *r.intra_lpips / eval_diversity_[style];
    if (!refs.empty()) {
        double s_sum = 0.0, p_sum = 0.0;
        for (const auto& g : generated) {
            double best = -2.0;
            const Plane* best_ref = nullptr;
            for (const auto& ref : refs) {
                const double s = metrics::ssim(g.data, ref.data);
                if (s > best) {
                    best = s;
                    best_ref = &ref.data;
                }
            }
            s_sum += best;
            p_sum += metrics::psnr(g.data, *best_ref);
        }
        r.ssim = s_sum / static_cast<double>(generated.size());
        r.psnr = p_sum / static_cast<double>(generated.size());
    }
    r.n_generated = static_cast<long>(generated.size());
    r.n_real = static_cast<long>(eval.size());
    r.encoder_id = enc.id();
    return r;
}

// ---------------------------------------------------------------------------

ExperimentResult quality(Bench& b, StyleKind style) {
    const auto& cfg = b.config();
    ExperimentResult res;
    res.name = "quality";
    const int n = cfg.int32("n_generate");
    const auto refs = b.adapt(style, cfg.int32("kshot"));
    const auto& bb = b.backbone();
    const auto emb = b.embedding(bb, refs, cfg.int32("eta"));
    auto g = b.generation_config();
    g.use_mge = g.use_lfmc = true;

    auto add = [&](const std::string& method, const std::vector<Spectrogram>& gen) {
        auto r = b.score(gen, style, refs);
        r.experiment = res.name;
        r.method = method;
        r.param_name = "kshot";
        r.param_value = std::to_string(cfg.int32("kshot"));
        res.rows.push_back(r);
        res.samples[method] = head(gen, 16);
        b.log(method + ": fid " + fmt_value(*r.fid) + " ssim " + fmt_value(*r.ssim) + " r_lpips " +
              fmt_value(*r.r_lpips));
    };

    add("rfcmg", b.generate(bb, &emb, refs, n, g, style));
    auto g_lf = g;
    g_lf.use_mge = false;
    add("lfmc_only", b.generate(bb, nullptr, refs, n, g_lf, style));
    auto g_mge = g;
    g_mge.use_lfmc = false;
    add("mge_only", b.generate(bb, &emb, {}, n, g_mge, style));
    add("source", b.sample_plain(bb, n, g, style));
    const auto ft = b.finetuned(bb, refs);
    add("finetune", b.sample_plain(ft, n, g, style));
    res.details["embedding_loss_history"] = emb.meta.loss_history.size();
    return res;
}

ExperimentResult sweep(Bench& b, const std::string& kind, StyleKind style, std::vector<double> values) {
    const auto& cfg = b.config();
    if (values.empty()) {
        if (kind == "eta") values = {1, 5, 15, 20};
        else if (kind == "N") values = {1, 2, 4, 8};
        else if (kind == "nu") values = {0, 0.5, 1, 2};
        else if (kind == "kshot") values = {1, 5, 10};
        else throw InvalidArgument("unknown sweep kind '" + kind + "'");
    }
    ExperimentResult res;
    res.name = "sweep_" + kind;
    const int n = cfg.int32("n_generate");
    const auto& bb = b.backbone();
    const int k0 = cfg.int32("kshot");
    const auto base_refs = b.adapt(style, k0);
    std::unique_ptr<mge::ModalityEmbedding> base_emb;
    if (kind == "N" || kind == "nu") {
        base_emb = std::make_unique<mge::ModalityEmbedding>(b.embedding(bb, base_refs, cfg.int32("eta")));
    }
    for (double v : values) {
        auto g = b.generation_config();
        g.use_mge = g.use_lfmc = true;
        std::vector<Spectrogram> refs = base_refs;
        std::vector<Spectrogram> gen;
        if (kind == "eta") {
            const int eta = static_cast<int>(std::lround(v));
            require(eta >= 1 && std::abs(v - eta) < 1e-9, "eta values must be positive integers");
            const auto emb = b.embedding(bb, refs, eta);
            gen = b.generate(bb, &emb, refs, n, g, style);
        } else if (kind == "N") {
            const int f = static_cast<int>(std::lround(v));
            require(f >= 1 && std::abs(v - f) < 1e-9, "N values must be positive integers");
            g.lowpass_factor = f;
            gen = b.generate(bb, base_emb.get(), refs, n, g, style);
        } else if (kind == "nu") {
            require(v >= 0.0, "nu values must be non-negative");
            g.anneal->nu = v;
            gen = b.generate(bb, base_emb.get(), refs, n, g, style);
        } else if (kind == "kshot") {
            const int k = static_cast<int>(std::lround(v));
            require(k >= 1 && std::abs(v - k) < 1e-9, "kshot values must be positive integers");
            refs = b.adapt(style, k);
            const auto emb = b.embedding(bb, refs, cfg.int32("eta"));
            gen = b.generate(bb, &emb, refs, n, g, style);
        } else {
            throw InvalidArgument("unknown sweep kind '" + kind + "'");
        }
        auto r = b.score(gen, style, refs);
        r.experiment = res.name;
        r.method = "rfcmg";
        r.param_name = kind;
        r.param_value = fmt_value(v);
        b.log(res.name + " " + r.param_value + ": fid " + fmt_value(*r.fid) + " ssim " +
              fmt_value(*r.ssim));
        res.rows.push_back(r);
        res.samples[kind + "=" + r.param_value] = head(gen, 8);
    }
    return res;
}

ExperimentResult reference_sensitivity(Bench& b, StyleKind style) {
    const auto& cfg = b.config();
    ExperimentResult res;
    res.name = "reference";
    const int count = cfg.int32("reference_count");
    const auto& eval = b.target(style).eval;
    const int classes = b.classes_of(style);
    const auto truth = spread_over_classes(eval, count);

    std::vector<Spectrogram> same, cross;
    for (const auto& x : truth) {
        const Spectrogram* s = nullptr;
        const Spectrogram* c = nullptr;
        const int other = (x.label + 1) % classes;
        for (const auto& e : eval) {
            if (!s && e.label == x.label && e.meta.instance_seed != x.meta.instance_seed) s = &e;
            if (!c && e.label == other) c = &e;
        }
        require(s && c, "reference pairing needs two samples per class");
        same.push_back(*s);
        cross.push_back(*c);
    }
    const auto& bb = b.backbone();
    const auto emb = b.embedding(bb, b.adapt(style, cfg.int32("kshot")), cfg.int32("eta"));
    auto g = b.generation_config();
    g.use_mge = g.use_lfmc = true;
    const std::vector<std::pair<std::string, const std::vector<Spectrogram>*>> conds = {
        {"correct", &truth}, {"same_class", &same}, {"cross_class", &cross}};
    for (const auto& [name, refs] : conds) {
        const auto gen = b.generate(bb, &emb, *refs, count, g, style);
        auto r = pair_scores(gen, truth);
        r.experiment = res.name;
        r.target_style = std::string(to_string(style));
        r.method = "rfcmg";
        r.param_name = "reference";
        r.param_value = name;
        res.rows.push_back(r);
        res.samples[name] = head(gen, 8);
        b.log("reference " + name + ": ssim " + fmt_value(*r.ssim) + " psnr " + fmt_value(*r.psnr));
    }
    return res;
}

ExperimentResult generalization(Bench& b, StyleKind style) {
    const auto& cfg = b.config();
    ExperimentResult res;
    res.name = "generalization";
    const int count = cfg.int32("reference_count");
    const int classes = b.classes_of(style);
    constexpr int kSeen = 4;  // actions 0..3 are adapted on; the rest are unseen
    require(classes > kSeen, "generalization needs more than four target classes");
    const int src_classes = cfg.int32("source_classes");
    const auto& bb = b.backbone();
    auto g = b.generation_config();
    g.use_lfmc = true;

    // Intra-modal: unseen source-style actions. The embedding is fitted the
    // same way as in the cross-modal settings (K-shot, seen actions only), on
    // fresh source-style renders, so the settings differ only in modality
    // and action.
    synthdata::DatasetSpec d;
    d.style = StyleKind::wifi;
    d.classes = 2;
    d.first_class = src_classes;
    d.per_class = (count + 1) / 2;
    d.seed = derive_seed(cfg.seed(), "data.imca");
    d.height = d.width = cfg.int32("image_size");
    d.texture_scale = cfg.real("texture_scale");
    const auto imca_truth = spread_over_classes(synthdata::make_dataset(d), count);
    synthdata::DatasetSpec da = d;
    da.classes = kSeen;
    da.first_class = 0;
    da.per_class = cfg.int32("kshot");
    da.seed = derive_seed(cfg.seed(), "data.imca.adapt");
    const auto intra_emb = b.embedding(bb, synthdata::make_dataset(da), cfg.int32("eta"));
    g.use_mge = true;
    const auto imca = b.generate(bb, &intra_emb, imca_truth, count, g, StyleKind::wifi);
    auto g_plain = g;
    g_plain.use_mge = false;
    const auto imca_plain = b.generate(bb, nullptr, imca_truth, count, g_plain, StyleKind::wifi);

    const auto seen_adapt =
        synthdata::filter_labels(b.adapt(style, cfg.int32("kshot")), 0, kSeen - 1);
    const auto emb = b.embedding(bb, seen_adapt, cfg.int32("eta"));
    const auto& eval = b.target(style).eval;
    const auto cmia_truth = spread_over_classes(synthdata::filter_labels(eval, 0, kSeen - 1), count);
    const auto cmca_truth =
        spread_over_classes(synthdata::filter_labels(eval, kSeen, classes - 1), count);
    const auto cmia = b.generate(bb, &emb, cmia_truth, count, g, style);
    const auto cmca = b.generate(bb, &emb, cmca_truth, count, g, style);

    const std::vector<std::tuple<std::string, const std::vector<Spectrogram>*,
                                 const std::vector<Spectrogram>*>>
        settings = {{"IMCA", &imca, &imca_truth}, {"CMIA", &cmia, &cmia_truth},
                    {"CMCA", &cmca, &cmca_truth},
                    {"IMCA_no_embedding", &imca_plain, &imca_truth}};
    for (const auto& [name, gen, truth] : settings) {
        auto r = pair_scores(*gen, *truth);
        r.experiment = res.name;
        r.target_style = std::string(to_string(style));
        r.method = "rfcmg";
        r.param_name = "setting";
        r.param_value = name;
        res.rows.push_back(r);
        res.samples[name] = head(*gen, 8);
        b.log("generalization " + name + ": ssim " + fmt_value(*r.ssim) + " psnr " +
              fmt_value(*r.psnr));
    }
    return res;
}

ExperimentResult downstream_utility(Bench& b, StyleKind style, const std::vector<Spectrogram>* pool) {
    const auto& cfg = b.config();
    ExperimentResult res;
    res.name = "downstream";
    const auto refs = b.adapt(style, cfg.int32("downstream_kshot"));
    const auto& test = b.target(style).eval;
    std::vector<Spectrogram> generated;
    if (pool) {
        generated = *pool;
    } else {
        const auto& bb = b.backbone();
        const auto emb = b.embedding(bb, refs, cfg.int32("eta"));
        auto g = b.generation_config();
        g.use_mge = g.use_lfmc = true;
        const auto t0 = Clock::now();
        generated = b.generate(bb, &emb, refs, cfg.int32("downstream_generate"), g, style);
        b.log("downstream pool generated in " + fmt_value(seconds_since(t0)) + " s");
    }
    for (const auto& s : generated) require(s.label >= 0, "downstream needs labeled samples");

    downstream::ClassifierConfig cc;
    cc.classes = b.classes_of(style);
    cc.epochs = cfg.int32("classifier_epochs");
    cc.lr = cfg.real("classifier_lr");
    cc.batch = cfg.int32("classifier_batch");
    cc.seed = derive_seed(cfg.seed(), "classifier");

    const auto clf = downstream::train_classifier(generated, cc);
    const auto ev = downstream::evaluate(clf, test);
    metrics::MetricReport r;
    r.experiment = res.name;
    r.target_style = std::string(to_string(style));
    r.method = "rfcmg";
    r.param_name = "train_set";
    r.param_value = "generated";
    r.accuracy = ev.accuracy;
    r.n_generated = static_cast<long>(generated.size());
    r.n_real = static_cast<long>(test.size());
    res.rows.push_back(r);
    res.details["generated_only"] = downstream::to_json(ev);
    b.log("downstream generated-only accuracy " + fmt_value(ev.accuracy));

    // Every point of the sweep trains for the same number of optimizer steps,
    // so the curve reflects the training data rather than training length.
    require(cfg.integer("classifier_steps") >= 0, "classifier_steps must be non-negative");
    auto sweep_cc = cc;
    const long per_pass = (static_cast<long>(generated.size()) + cc.batch - 1) / cc.batch;
    sweep_cc.steps = cfg.integer("classifier_steps") > 0 ? cfg.integer("classifier_steps")
                                                         : per_pass * cc.epochs;
    res.details["sweep_classifier_steps"] = sweep_cc.steps;
    std::vector<std::vector<double>> runs;
    const auto curve = downstream::ratio_sweep(refs, generated, test, cfg.reals("ratios"), sweep_cc,
                                               cfg.int32("classifier_repeats"), &runs);
    nlohmann::json jc = nlohmann::json::array();
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const auto [ratio, acc] = curve[i];
        metrics::MetricReport rr = r;
        rr.param_name = "ratio";
        rr.param_value = fmt_value(ratio);
        rr.accuracy = acc;
        rr.n_generated = static_cast<long>(std::floor(ratio * static_cast<double>(refs.size())));
        res.rows.push_back(rr);
        jc.push_back({{"ratio", ratio}, {"accuracy", acc}, {"runs", runs[i]}});
        b.log("ratio " + fmt_value(ratio) + ": accuracy " + fmt_value(acc));
    }
    res.details["ratio_curve"] = jc;
    res.details["real_train"] = refs.size();
    res.samples["generated"] = head(generated, 16);
    return res;
}

ExperimentResult mechanism(Bench& b, StyleKind style) {
    const auto& cfg = b.config();
    ExperimentResult res;
    res.name = "mechanism";
    const auto& bb = b.backbone();
    const auto emb = b.embedding(bb, b.adapt(style, cfg.int32("kshot")), cfg.int32("eta"));
    const int probes = cfg.int32("probe_count");
    const int t = cfg.int32("probe_t");
    const int factor = cfg.int32("N");
    require(t >= 1 && t <= b.schedule().steps(), "probe_t must lie in [1, T]");
    const auto truth = spread_over_classes(b.target(style).eval, probes);
    Rng rng(derive_seed(cfg.seed(), "mechanism"));
    double hf = 0.0, lf = 0.0, signed_hf = 0.0;
    std::vector<Plane> sal, lfs;
    nlohmann::json per = nlohmann::json::array();
    for (const auto& x : truth) {
        const Plane z = normal_plane(x.height(), x.width(), rng);
        const Plane xt = diffusion::forward_diffuse(x.data, t, z, b.schedule());
        const auto m = pipeline::mechanism_maps(bb, emb, xt, t, factor, b.schedule());
        const double h = metrics::band_energy(m.hf_saliency, factor).high_fraction();
        const double l = metrics::band_energy(m.lf_structure, factor).low_fraction();
        const double d = metrics::band_energy(m.difference, factor).high_fraction();
        hf += h;
        lf += l;
        signed_hf += d;
        per.push_back({{"hf_saliency_high_fraction", h},
                       {"lf_structure_low_fraction", l},
                       {"difference_high_fraction", d}});
        if (sal.size() < 8) {
            sal.push_back(m.hf_saliency);
            lfs.push_back(m.lf_structure);
        }
    }
    res.details["probe_t"] = t;
    res.details["N"] = factor;
    res.details["probes"] = per;
    res.details["hf_saliency_high_fraction"] = hf / probes;
    res.details["lf_structure_low_fraction"] = lf / probes;
    // Rectification moves energy into block means, so the unrectified
    // difference is reported alongside.
    res.details["difference_high_fraction"] = signed_hf / probes;
    res.maps["hf_saliency"] = sal;
    res.maps["lf_structure"] = lfs;
    res.maps["input"] = head(truth, 8);
    b.log("mechanism: hf_saliency high fraction " + fmt_value(hf / probes) +
          ", lf_structure low fraction " + fmt_value(lf / probes));
    return res;
}

ExperimentResult prior_ablation(Bench& b, StyleKind style) {
    const auto& cfg = b.config();
    ExperimentResult res;
    res.name = "prior";
    const int n = cfg.int32("n_generate");
    const auto refs = b.adapt(style, cfg.int32("kshot"));
    auto g = b.generation_config();
    g.use_mge = g.use_lfmc = true;
    for (const std::string prior : {"source", "random", "mismatched"}) {
        const auto& bb = b.backbone(prior);
        const auto emb = b.embedding(bb, refs, cfg.int32("eta"));
        const auto gen = b.generate(bb, &emb, refs, n, g, style);
        auto r = b.score(gen, style, refs);
        r.experiment = res.name;
        r.method = "rfcmg";
        r.param_name = "prior";
        r.param_value = prior;
        res.rows.push_back(r);
        res.samples[prior] = head(gen, 8);
        b.log("prior " + prior + ": fid " + fmt_value(*r.fid) + " ssim " + fmt_value(*r.ssim));
    }
    return res;
}

ExperimentResult run_sweep_kind(Bench& b, const std::string& kind, StyleKind style,
                                const std::vector<double>& values) {
    if (kind == "eta" || kind == "N" || kind == "nu" || kind == "kshot") {
        return sweep(b, kind, style, values);
    }
    require(values.empty(), "sweep kind '" + kind + "' takes no sweep_values");
    if (kind == "quality") return quality(b, style);
    if (kind == "reference") return reference_sensitivity(b, style);
    if (kind == "generalization") return generalization(b, style);
    if (kind == "prior") return prior_ablation(b, style);
    if (kind == "mechanism") return mechanism(b, style);
    if (kind == "downstream") return downstream_utility(b, style);
    throw InvalidArgument("unknown sweep kind '" + kind + "'");
}

}  // namespace rfcmg::experiments
