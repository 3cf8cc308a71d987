// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rfcmg/commands.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "rfcmg/denoiser.hpp"
#include "rfcmg/experiments.hpp"
#include "rfcmg/io.hpp"
#include "rfcmg/metrics.hpp"
#include "rfcmg/nn/tensor.hpp"
#include "rfcmg/pipeline.hpp"
#include "rfcmg/plot.hpp"
#include "rfcmg/synthdata.hpp"

namespace rfcmg::commands {

namespace fs = std::filesystem;

namespace {

class MissingInput : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

const fs::path& require_input(const fs::path& p, const std::string& what) {
    if (p.empty()) throw MissingInput(what + " was not given");
    if (!fs::exists(p)) throw MissingInput(what + " not found: " + p.string());
    return p;
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

struct Context {
    const config::ExperimentConfig& cfg;
    fs::path dir;
    std::ostream& log;
    experiments::Bench bench;
    nlohmann::json summary = nlohmann::json::object();

    Context(const config::ExperimentConfig& c, fs::path d, std::ostream& l)
        : cfg(c), dir(std::move(d)), log(l), bench(c, &l) {}

    StyleKind style() const { return experiments::target_style(cfg); }
};

struct LoadedSamples {
    std::vector<Spectrogram> samples;
    StyleKind style = StyleKind::mmwave;
};

LoadedSamples load_labeled_samples(const fs::path& stem, StyleKind fallback) {
    require_input(stem.string() + ".rft", "sample tensor");
    require_input(stem.string() + ".json", "sample sidecar");
    const auto planes = pipeline::load_samples(stem);
    const auto side = io::read_json(stem.string() + ".json");
    LoadedSamples out;
    out.style = side.contains("style") ? style_from_string(side.at("style").get<std::string>())
                                       : fallback;
    std::vector<int> labels(planes.size(), -1);
    if (side.contains("labels")) {
        labels = side.at("labels").get<std::vector<int>>();
        if (labels.size() != planes.size()) {
            throw CorruptFileError(stem.string() + ".json: label count does not match the tensor");
        }
    }
    for (std::size_t i = 0; i < planes.size(); ++i) {
        Spectrogram s;
        s.data = planes[i];
        s.label = labels[i];
        s.modality = modality_of(out.style);
        s.meta.style = out.style;
        s.meta.instance_seed = derive_seed(derive_seed(0x5a17, "loaded"), i);
        out.samples.push_back(std::move(s));
    }
    return out;
}

void save_labeled_samples(const fs::path& stem, const std::vector<Spectrogram>& s, StyleKind style,
                          nlohmann::json side) {
    std::vector<Plane> planes;
    nlohmann::json labels = nlohmann::json::array();
    for (const auto& x : s) {
        planes.push_back(x.data);
        labels.push_back(x.label);
    }
    side["style"] = std::string(to_string(style));
    side["labels"] = labels;
    pipeline::save_samples(stem, planes, side);
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
    if (!out) throw std::runtime_error("cannot write " + p.string());
}

void grid_png(const fs::path& p, const std::vector<Plane>& tiles, const std::string& title,
              bool autoscale = false) {
    if (tiles.empty()) return;
    plot::write_png(p, plot::image_grid(tiles, std::min<int>(8, static_cast<int>(tiles.size())), 3,
                                        autoscale ? 0.0 : -1.0, autoscale ? 0.0 : 1.0, title));
}

void write_rows(Context& c, std::vector<metrics::MetricReport> rows) {
    const std::string run_id = c.dir.filename().string();
    for (auto& r : rows) r.run_id = run_id;
    metrics::append_csv(c.dir / "metrics.csv", rows);
}

void emit_experiment(Context& c, const experiments::ExperimentResult& r) {
    write_rows(c, r.rows);
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& m : r.rows) {
        nlohmann::json j = {{"method", m.method}, {"param_name", m.param_name},
                            {"param_value", m.param_value}, {"target_style", m.target_style}};
        if (m.fid) j["fid"] = *m.fid;
        if (m.ssim) j["ssim"] = *m.ssim;
        if (m.psnr) j["psnr"] = *m.psnr;
        if (m.r_lpips) j["r_lpips"] = *m.r_lpips;
        if (m.accuracy) j["accuracy"] = *m.accuracy;
        rows.push_back(j);
    }
    io::write_json(c.dir / (r.name + ".json"), {{"rows", rows}, {"details", r.details}});
    for (const auto& [name, tiles] : r.samples) {
        std::string file = name;
        std::replace(file.begin(), file.end(), '=', '_');
        grid_png(c.dir / ("samples_" + file + ".png"), tiles, r.name + " " + name);
    }
    for (const auto& [name, tiles] : r.maps) {
        grid_png(c.dir / ("map_" + name + ".png"), tiles, name, name != "input");
    }
    c.summary["rows"] = rows;
}

/// Numeric sweeps as curves, categorical experiments as bars.
void chart(Context& c, const experiments::ExperimentResult& r) {
    if (r.rows.empty()) return;
    const auto metric_of = [](const metrics::MetricReport& m, const std::string& k) -> double {
        if (k == "fid") return m.fid.value_or(NAN);
        if (k == "ssim") return m.ssim.value_or(NAN);
        if (k == "accuracy") return m.accuracy.value_or(NAN);
        return NAN;
    };
    for (const std::string k : {"fid", "ssim", "accuracy"}) {
        if (!std::any_of(r.rows.begin(), r.rows.end(),
                         [&](const auto& m) { return std::isfinite(metric_of(m, k)); })) {
            continue;
        }
        bool numeric = true;
        std::vector<double> xs, ys;
        std::vector<std::string> labels;
        std::string pname;
        for (const auto& m : r.rows) {
            if (!std::isfinite(metric_of(m, k))) continue;
            pname = m.param_name;
            char* end = nullptr;
            const double x = std::strtod(m.param_value.c_str(), &end);
            numeric = numeric && end && *end == '\0' && !m.param_value.empty();
            xs.push_back(x);
            ys.push_back(metric_of(m, k));
            labels.push_back(r.name == "quality" ? m.method : m.param_value);
        }
        const auto file = c.dir / ("plot_" + r.name + "_" + k + ".png");
        if (numeric && r.name != "quality") {
            plot::write_png(file, plot::line_chart(r.name + " " + k, pname, {{k, xs, ys}}));
        } else {
            plot::write_png(file, plot::bar_chart(r.name + " " + k, labels, ys));
        }
    }
}

// --- commands --------------------------------------------------------------

void cmd_gen_data(Context& c) {
    const fs::path d = c.dir / "data";
    fs::create_directories(d);
    const auto src = c.bench.source_data();
    synthdata::save_dataset(d / "source", src, {{"role", "source"}});
    for (StyleKind s : {StyleKind::mmwave, StyleKind::rfid}) {
        const auto& t = c.bench.target(s);
        const std::string name(to_string(s));
        synthdata::save_dataset(d / (name + "_pool"), t.pool,
                                {{"role", "adaptation pool"}, {"kshot_max", c.cfg.int32("kshot_max")}});
        synthdata::save_dataset(d / (name + "_eval"), t.eval, {{"role", "evaluation"}});
    }
    if (c.cfg.text("prior") == "mismatched") {
        synthdata::save_dataset(d / "mismatched", c.bench.mismatched_data(), {{"role", "mismatched prior"}});
    }
    std::vector<Plane> preview;
    for (std::size_t i = 0; i < src.size() && preview.size() < 8;
         i += src.size() / 8 + 1) {
        preview.push_back(src[i].data);
    }
    for (StyleKind s : {StyleKind::mmwave, StyleKind::rfid}) {
        const auto& pool = c.bench.target(s).pool;
        for (int k = 0; k < 8 && k < static_cast<int>(pool.size()); ++k) {
            preview.push_back(pool[static_cast<std::size_t>(k) * pool.size() / 8].data);
        }
    }
    grid_png(c.dir / "preview.png", preview, "wifi / mmwave / rfid");
    c.summary["source_samples"] = src.size();
}

void cmd_pretrain(Context& c) {
    const auto& bb = c.bench.backbone();
    denoiser::save_checkpoint(c.dir / "backbone.rfck", bb);
    c.summary["backbone_id"] = bb.id();
    c.summary["final_loss"] = bb.meta.final_loss;
    if (!bb.meta.loss_history.empty()) {
        std::vector<double> x, y;
        for (std::size_t i = 0; i < bb.meta.loss_history.size(); ++i) {
            x.push_back(static_cast<double>(i));
            y.push_back(bb.meta.loss_history[i]);
        }
        plot::write_png(c.dir / "plot_pretrain_loss.png",
                        plot::line_chart("pretrain loss", "report", {{"loss", x, y}}));
    }
}

void cmd_fit_mge(Context& c) {
    const auto& bb = c.bench.backbone();
    const auto before = nn::checksum(bb.params);
    const auto targets = c.bench.adapt(c.style(), c.cfg.int32("kshot"));
    const auto e = c.bench.embedding(bb, targets, c.cfg.int32("eta"));
    const auto after = nn::checksum(bb.params);
    if (before != after) throw std::runtime_error("backbone parameters changed while fitting");
    mge::save_embedding(c.dir / "embedding", e);
    c.summary["embedding_id"] = e.id();
    c.summary["backbone_checksum"] = before;
    const auto& h = e.meta.loss_history;
    if (h.size() >= 10) {
        const std::size_t dec = h.size() / 10;
        double first = 0.0, last = 0.0;
        for (std::size_t i = 0; i < dec; ++i) {
            first += h[i];
            last += h[h.size() - dec + i];
        }
        c.summary["first_decile_loss"] = first / dec;
        c.summary["last_decile_loss"] = last / dec;
    }
}

mge::ModalityEmbedding embedding_for(Context& c, const denoiser::DenoiserCheckpoint& bb,
                                     const std::vector<Spectrogram>& refs) {
    if (!c.cfg.text("embedding").empty()) {
        const fs::path stem = c.cfg.text("embedding");
        require_input(stem.string() + ".rft", "embedding");
        return mge::load_embedding(stem);
    }
    return c.bench.embedding(bb, refs, c.cfg.int32("eta"));
}

void cmd_generate(Context& c) {
    const auto style = c.style();
    const auto& bb = c.bench.backbone();
    const auto refs = c.bench.adapt(style, c.cfg.int32("kshot"));
    const auto g = c.bench.generation_config();
    std::unique_ptr<mge::ModalityEmbedding> e;
    if (g.use_mge) e = std::make_unique<mge::ModalityEmbedding>(embedding_for(c, bb, refs));
    const auto out = c.bench.generate(bb, e.get(), refs, c.cfg.int32("n_generate"), g, style);
    nlohmann::json side = {{"generation", pipeline::to_json(g)},
                           {"backbone_id", bb.id()},
                           {"n_references", refs.size()}};
    if (e) side["embedding_id"] = e->id();
    save_labeled_samples(c.dir / "samples", out, style, side);
    std::vector<Plane> tiles;
    for (std::size_t i = 0; i < std::min<std::size_t>(out.size(), 32); ++i) tiles.push_back(out[i].data);
    grid_png(c.dir / "samples.png", tiles, "generated " + std::string(to_string(style)));
    c.summary["n_generated"] = out.size();
}

void cmd_finetune(Context& c) {
    const auto style = c.style();
    const auto& bb = c.bench.backbone();
    const auto refs = c.bench.adapt(style, c.cfg.int32("kshot"));
    const auto ft = c.bench.finetuned(bb, refs);
    denoiser::save_checkpoint(c.dir / "finetuned.rfck", ft);
    const auto out = c.bench.sample_plain(ft, c.cfg.int32("n_generate"), c.bench.generation_config(), style);
    save_labeled_samples(c.dir / "samples", out, style,
                         {{"method", "finetune"}, {"backbone_id", ft.id()}, {"source_backbone_id", bb.id()}});
    std::vector<Plane> tiles;
    for (std::size_t i = 0; i < std::min<std::size_t>(out.size(), 32); ++i) tiles.push_back(out[i].data);
    grid_png(c.dir / "samples.png", tiles, "fine-tuned " + std::string(to_string(style)));
    c.summary["finetuned_id"] = ft.id();
}

void cmd_eval_gen(Context& c) {
    const fs::path stem = c.cfg.text("samples");
    if (stem.empty()) throw MissingInput("eval-gen needs samples=<stem>");
    const auto loaded = load_labeled_samples(stem, c.style());
    const auto refs = c.bench.adapt(loaded.style, c.cfg.int32("kshot"));
    auto r = c.bench.score(loaded.samples, loaded.style, refs);
    r.experiment = "eval";
    r.method = c.cfg.text("method");
    r.param_name = "samples";
    r.param_value = stem.filename().string();
    write_rows(c, {r});
    c.summary["fid"] = *r.fid;
    c.summary["ssim"] = *r.ssim;
    c.summary["r_lpips"] = *r.r_lpips;
}

void cmd_downstream(Context& c) {
    experiments::ExperimentResult r;
    if (!c.cfg.text("samples").empty()) {
        const auto loaded = load_labeled_samples(c.cfg.text("samples"), c.style());
        r = experiments::downstream_utility(c.bench, loaded.style, &loaded.samples);
    } else {
        r = experiments::downstream_utility(c.bench, c.style());
    }
    emit_experiment(c, r);
    io::write_json(c.dir / "confusion.json", r.details.at("generated_only"));
    chart(c, r);
}

void cmd_sweep(Context& c) {
    const auto r = experiments::run_sweep_kind(c.bench, c.cfg.text("sweep_kind"), c.style(),
                                               c.cfg.reals("sweep_values"));
    emit_experiment(c, r);
    chart(c, r);
}

void cmd_visualize(Context& c) {
    const auto r = experiments::mechanism(c.bench, c.style());
    emit_experiment(c, r);
    c.summary["hf_saliency_high_fraction"] = r.details.at("hf_saliency_high_fraction");
    c.summary["lf_structure_low_fraction"] = r.details.at("lf_structure_low_fraction");
    if (!c.cfg.text("samples").empty()) {
        const auto loaded = load_labeled_samples(c.cfg.text("samples"), c.style());
        std::vector<Plane> tiles;
        for (std::size_t i = 0; i < std::min<std::size_t>(loaded.samples.size(), 32); ++i) {
            tiles.push_back(loaded.samples[i].data);
        }
        grid_png(c.dir / "samples.png", tiles, "samples");
    }
}

using Handler = void (*)(Context&);

Handler handler_for(const std::string& name) {
    if (name == "gen-data") return cmd_gen_data;
    if (name == "pretrain") return cmd_pretrain;
    if (name == "fit-mge") return cmd_fit_mge;
    if (name == "generate") return cmd_generate;
    if (name == "finetune-baseline") return cmd_finetune;
    if (name == "eval-gen") return cmd_eval_gen;
    if (name == "downstream") return cmd_downstream;
    if (name == "sweep") return cmd_sweep;
    if (name == "visualize") return cmd_visualize;
    return nullptr;
}

nlohmann::json error_record(int status, const std::string& type, const std::string& message) {
    return {{"status", status}, {"type", type}, {"message", message}};
}

nlohmann::json artifact_list(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    nlohmann::json out = nlohmann::json::array();
    for (const auto& f : files) {
        out.push_back({{"path", fs::relative(f, dir).generic_string()},
                       {"bytes", fs::file_size(f)},
                       {"digest", io::file_digest(f)}});
    }
    return out;
}

}  // namespace

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {"gen-data", "pretrain", "fit-mge",
                                                   "generate", "finetune-baseline", "eval-gen",
                                                   "downstream", "sweep", "visualize"};
    return names;
}

fs::path run_directory(const std::string& name, const config::ExperimentConfig& cfg) {
    std::string id = cfg.text("run_id");
    if (id.empty()) {
        config::ExperimentConfig c = cfg;
        c.set("out", "");
        id = name + "-" + c.digest().substr(0, 10);
    }
    require(id.find('/') == std::string::npos && id != "." && id != "..",
            "run_id must be a plain directory name");
    return fs::path(cfg.text("out")) / id;
}

RunResult run_command(const std::string& name, const config::ExperimentConfig& cfg,
                      std::ostream& log) {
    RunResult res;
    const Handler h = handler_for(name);
    if (!h) {
        res.status = invalid_config;
        res.error = error_record(res.status, "usage", "unknown command '" + name + "'");
        return res;
    }
    try {
        res.run_dir = run_directory(name, cfg);
    } catch (const std::exception& e) {
        res.status = invalid_config;
        res.error = error_record(res.status, "config", e.what());
        return res;
    }
    if (fs::exists(res.run_dir) && !fs::is_empty(res.run_dir)) {
        res.status = invalid_config;
        res.error = error_record(res.status, "run_exists",
                                 "run directory already exists: " + res.run_dir.string());
        res.run_dir.clear();
        return res;
    }
    fs::create_directories(res.run_dir);
    write_text(res.run_dir / "config.txt", cfg.echo());

    const std::string started = utc_now();
    const auto t0 = std::chrono::steady_clock::now();
    nlohmann::json summary;
    try {
        Context c(cfg, res.run_dir, log);
        h(c);
        summary = c.summary;
    } catch (const MissingInput& e) {
        res.status = missing_input;
        res.error = error_record(res.status, "missing_input", e.what());
    } catch (const InvalidArgument& e) {
        res.status = invalid_config;
        res.error = error_record(res.status, "invalid_argument", e.what());
    } catch (const NonFiniteError& e) {
        res.status = non_finite;
        res.error = error_record(res.status, "non_finite", e.what());
    } catch (const CorruptFileError& e) {
        res.status = corrupt_input;
        res.error = error_record(res.status, "corrupt_input", e.what());
    } catch (const std::exception& e) {
        res.status = failure;
        res.error = error_record(res.status, "error", e.what());
    }
    if (res.status != ok) io::write_json(res.run_dir / "error.json", res.error);

    nlohmann::json manifest = {
        {"command", name},
        {"run_id", res.run_dir.filename().string()},
        {"status", res.status},
        {"seed", cfg.seed()},
        {"config_digest", cfg.digest()},
        {"started_utc", started},
        {"finished_utc", utc_now()},
        {"wall_seconds",
         std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()},
        {"summary", summary.is_null() ? nlohmann::json::object() : summary},
    };
    manifest["artifacts"] = artifact_list(res.run_dir);
    io::write_json(res.run_dir / "manifest.json", manifest);
    return res;
}

}  // namespace rfcmg::commands
