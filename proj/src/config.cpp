// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rfcmg/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <span>
#include <sstream>

#include "rfcmg/common.hpp"
#include "rfcmg/io.hpp"

namespace rfcmg::config {

namespace {

using K = ValueKind;

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else if (ch != '[' && ch != ']') {
            cur += ch;
        }
    }
    if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
    return out;
}

bool parse_long(const std::string& s, long& out) {
    const char* b = s.data();
    const char* e = b + s.size();
    auto r = std::from_chars(b, e, out);
    return r.ec == std::errc{} && r.ptr == e && !s.empty();
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    std::istringstream is(s);
    is.imbue(std::locale::classic());
    is >> out;
    return !is.fail() && is.peek() == std::char_traits<char>::eof() && std::isfinite(out);
}

bool parse_flag(const std::string& s, bool& out) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") {
        out = true;
        return true;
    }
    if (s == "false" || s == "0" || s == "no" || s == "off") {
        out = false;
        return true;
    }
    return false;
}

const KeySpec& spec_of(const std::string& key) {
    for (const auto& k : registry()) {
        if (k.key == key) return k;
    }
    throw InvalidArgument("unknown config key '" + key + "'");
}

void check_value(const KeySpec& k, const std::string& v) {
    const auto fail = [&](const char* what) {
        throw InvalidArgument("config key '" + k.key + "' expects " + what + ", got '" + v + "'");
    };
    long l = 0;
    double d = 0.0;
    bool f = false;
    switch (k.kind) {
        case K::text:
            break;
        case K::integer:
            if (!parse_long(v, l)) fail("an integer");
            break;
        case K::real:
            if (!parse_double(v, d)) fail("a real number");
            break;
        case K::flag:
            if (!parse_flag(v, f)) fail("true or false");
            break;
        case K::real_list:
            for (const auto& x : split_list(v)) {
                if (!parse_double(x, d)) fail("a comma-separated list of reals");
            }
            break;
        case K::int_list:
            for (const auto& x : split_list(v)) {
                if (!parse_long(x, l)) fail("a comma-separated list of integers");
            }
            break;
    }
}

}  // namespace

const std::vector<KeySpec>& registry() {
    static const std::vector<KeySpec> keys = {
        // run plumbing
        {"run_id", K::text, "", "run directory name; derived from command and config when empty"},
        {"out", K::text, "runs", "output root"},
        {"seed", K::integer, "0", "master seed"},
        {"cache_dir", K::text, "", "reuse trained backbones, encoders and embeddings from here"},
        // benchmark
        {"image_size", K::integer, "32", "spectrogram height and width"},
        {"source_classes", K::integer, "6", "action classes in the source set"},
        {"source_per_class", K::integer, "200", "source samples per class"},
        {"mmwave_classes", K::integer, "6", "action classes of the mmwave target"},
        {"rfid_classes", K::integer, "8", "action classes of the rfid target"},
        {"target_per_class", K::integer, "30", "real target samples per class"},
        {"encoder_per_class", K::integer, "40", "held-out renders per style and class for the encoder"},
        {"texture_scale", K::real, "1.0", "multiplier on every texture amplitude"},
        // diffusion
        {"T", K::integer, "1000", "diffusion steps"},
        {"beta_start", K::real, "1e-4", "first beta"},
        {"beta_end", K::real, "0.02", "last beta"},
        // backbone
        {"base_channels", K::integer, "32", "U-Net base width"},
        {"channel_multipliers", K::int_list, "1,2,4", "per-level width multipliers"},
        {"time_embed_dim", K::integer, "128", "step embedding and MGE dimension"},
        {"pretrain_steps", K::integer, "6000", "source pretraining steps"},
        {"pretrain_lr", K::real, "2e-4", "source pretraining learning rate"},
        {"pretrain_batch", K::integer, "32", "source pretraining batch"},
        {"prior", K::text, "source", "backbone prior: source, random or mismatched"},
        {"backbone", K::text, "", "backbone checkpoint to load instead of training"},
        // target
        {"target_style", K::text, "mmwave", "mmwave or rfid"},
        {"kshot", K::integer, "1", "adaptation samples per class"},
        {"kshot_max", K::integer, "10", "largest K; fixes the shared evaluation split"},
        // embedding
        {"eta", K::integer, "15", "embedding intervals"},
        {"mge_iters", K::integer, "2000", "embedding fitting iterations"},
        {"mge_lr", K::real, "1e-2", "embedding learning rate"},
        {"mge_batch", K::integer, "8", "targets per embedding iteration"},
        {"anneal_high", K::integer, "800", "perturbation fully on from this step"},
        {"anneal_low", K::integer, "200", "perturbation fully off up to this step"},
        {"nu", K::real, "1.0", "perturbation scale"},
        {"embedding", K::text, "", "embedding stem to load instead of fitting"},
        // sampling
        {"sampler", K::text, "ddim", "ddim or ddpm"},
        {"ddim_steps", K::integer, "25", "DDIM steps"},
        {"N", K::integer, "2", "low-pass factor"},
        {"kernel", K::text, "block", "block or bicubic"},
        {"use_mge", K::flag, "true", "steer with the fitted embedding"},
        {"use_lfmc", K::flag, "true", "project onto the reference low band"},
        {"gen_batch", K::integer, "8", "samples per sampler batch"},
        {"n_generate", K::integer, "512", "samples per evaluated method"},
        // fine-tuning baseline
        {"finetune_steps", K::integer, "2000", "naive fine-tuning steps"},
        {"finetune_lr", K::real, "2e-4", "naive fine-tuning learning rate"},
        {"finetune_batch", K::integer, "8", "naive fine-tuning batch"},
        // feature encoder
        {"encoder_epochs", K::integer, "12", "encoder training epochs"},
        {"encoder_lr", K::real, "1e-3", "encoder learning rate"},
        {"encoder", K::text, "", "encoder checkpoint to load instead of training"},
        // downstream
        {"downstream_kshot", K::integer, "10", "real samples per class used as references and real training data"},
        {"downstream_generate", K::integer, "600", "generated training samples"},
        {"classifier_epochs", K::integer, "30", "classifier epochs"},
        {"classifier_lr", K::real, "5e-4", "classifier learning rate"},
        {"classifier_batch", K::integer, "64", "classifier batch"},
        {"classifier_steps", K::integer, "0",
         "optimizer steps per ratio-sweep classifier; 0 matches the generated-only classifier"},
        {"classifier_repeats", K::integer, "3", "independently seeded classifiers averaged per ratio point"},
        {"ratios", K::real_list, "0,0.25,0.5,0.75,1,1.25,1.5,1.75,2", "generated-to-real ratios"},
        // experiments
        {"sweep_kind", K::text, "eta",
         "eta, N, nu, kshot, quality, reference, generalization, prior, mechanism or downstream"},
        {"sweep_values", K::real_list, "", "sweep grid; empty selects the kind's default grid"},
        {"reference_count", K::integer, "24", "references per condition"},
        {"probe_count", K::integer, "20", "noisy probes for mechanism maps"},
        {"probe_t", K::integer, "100", "step of the mechanism-map probes"},
        {"samples", K::text, "", "sample archive stem for eval-gen, downstream and visualize"},
        {"method", K::text, "rfcmg", "method label written to metric rows"},
    };
    return keys;
}

ExperimentConfig::ExperimentConfig() {
    for (const auto& k : registry()) values_[k.key] = k.fallback;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    const auto& k = spec_of(key);
    const std::string v = trim(value);
    check_value(k, v);
    values_[key] = v;
}

void ExperimentConfig::set_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw InvalidArgument("expected key=value, got '" + assignment + "'");
    }
    set(trim(std::string_view(assignment).substr(0, eq)),
        trim(std::string_view(assignment).substr(eq + 1)));
}

void ExperimentConfig::load_file(const std::filesystem::path& path) { load_file_impl(path, 0); }

void ExperimentConfig::load_file_impl(const std::filesystem::path& path, int depth) {
    require(depth < 16, "config include depth exceeded at " + path.string());
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config file " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (body.empty()) continue;
        const auto where = path.string() + ":" + std::to_string(lineno) + ": ";
        if (body.rfind("include", 0) == 0 && body.find('=') == std::string::npos) {
            const std::string target = trim(std::string_view(body).substr(7));
            if (target.empty()) throw InvalidArgument(where + "include needs a path");
            std::filesystem::path p(target);
            if (p.is_relative()) p = path.parent_path() / p;
            load_file_impl(p, depth + 1);
            continue;
        }
        try {
            set_assignment(body);
        } catch (const InvalidArgument& e) {
            throw InvalidArgument(where + e.what());
        }
    }
}

bool ExperimentConfig::has(const std::string& key) const { return values_.count(key) > 0; }

const std::string& ExperimentConfig::text(const std::string& key) const {
    spec_of(key);
    return values_.at(key);
}

long ExperimentConfig::integer(const std::string& key) const {
    long v = 0;
    if (spec_of(key).kind != K::integer || !parse_long(values_.at(key), v)) {
        throw InvalidArgument("config key '" + key + "' is not an integer");
    }
    return v;
}

int ExperimentConfig::int32(const std::string& key) const {
    const long v = integer(key);
    require(v >= INT32_MIN && v <= INT32_MAX, "config key '" + key + "' is out of range");
    return static_cast<int>(v);
}

double ExperimentConfig::real(const std::string& key) const {
    double v = 0.0;
    if (spec_of(key).kind != K::real || !parse_double(values_.at(key), v)) {
        throw InvalidArgument("config key '" + key + "' is not a real number");
    }
    return v;
}

bool ExperimentConfig::flag(const std::string& key) const {
    bool v = false;
    if (spec_of(key).kind != K::flag || !parse_flag(values_.at(key), v)) {
        throw InvalidArgument("config key '" + key + "' is not a flag");
    }
    return v;
}

std::vector<double> ExperimentConfig::reals(const std::string& key) const {
    require(spec_of(key).kind == K::real_list, "config key '" + key + "' is not a real list");
    std::vector<double> out;
    for (const auto& s : split_list(values_.at(key))) {
        double d = 0.0;
        parse_double(s, d);
        out.push_back(d);
    }
    return out;
}

std::vector<int> ExperimentConfig::ints(const std::string& key) const {
    require(spec_of(key).kind == K::int_list, "config key '" + key + "' is not an integer list");
    std::vector<int> out;
    for (const auto& s : split_list(values_.at(key))) {
        long l = 0;
        parse_long(s, l);
        out.push_back(static_cast<int>(l));
    }
    return out;
}

std::uint64_t ExperimentConfig::seed() const {
    return static_cast<std::uint64_t>(integer("seed"));
}

std::string ExperimentConfig::echo() const {
    std::ostringstream os;
    for (const auto& [k, v] : values_) os << k << " = " << v << "\n";
    return os.str();
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : values_) j[k] = v;
    return j;
}

std::string ExperimentConfig::digest(const std::vector<std::string>& keys) const {
    std::string blob;
    if (keys.empty()) {
        blob = echo();
    } else {
        for (const auto& k : keys) blob += k + "=" + text(k) + "\n";
    }
    const auto* p = reinterpret_cast<const unsigned char*>(blob.data());
    return io::bytes_digest(std::span<const unsigned char>(p, blob.size()));
}

}  // namespace rfcmg::config
