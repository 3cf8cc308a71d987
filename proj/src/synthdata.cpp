// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rfcmg/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "rfcmg/io.hpp"
#include "rfcmg/rng.hpp"

namespace rfcmg::synthdata {

namespace {

constexpr double kBackground = -0.7;
constexpr double kPeak = 0.6;
constexpr double kEdge = 0.04;  // softness of ridge on/offsets, in normalized time

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Ridge line(double from, double to, double amplitude = 1.0) {
    return Ridge{from, to - from, 0.0, 3.25, amplitude, 0.0, 1.0};
}

ActionSpec random_action(int class_id) {
    Rng rng(derive_seed(0x5eedc1a55ULL, static_cast<std::uint64_t>(class_id)));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ActionSpec a{class_id, {}};
    const int n = 2 + static_cast<int>(u(rng) * 2.0);
    for (int i = 0; i < n; ++i) {
        Ridge r;
        r.c0 = 0.2 + 0.6 * u(rng);
        const double end = 0.2 + 0.6 * u(rng);
        r.c2 = (u(rng) - 0.5) * 1.2;
        r.c1 = end - r.c0 - r.c2;
        r.width = 3.0 + 0.5 * u(rng);
        r.amplitude = 0.7 + 0.3 * u(rng);
        r.onset = 0.4 * u(rng) * u(rng);
        r.offset = 1.0 - 0.4 * u(rng) * u(rng);
        a.ridges.push_back(r);
    }
    return a;
}

Plane texture(const ModalityStyle& s, const Plane& mask, std::uint64_t instance_seed, int angle) {
    const auto h = mask.rows();
    const auto w = mask.cols();
    Rng rng(derive_seed(derive_seed(instance_seed, "texture"), static_cast<std::uint64_t>(s.kind)));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    Plane hf = Plane::Zero(h, w);
    if (s.grain > 0.0) {
        for (Eigen::Index i = 0; i < hf.size(); ++i) hf.data()[i] += s.grain * normal(rng);
    }
    if (s.flicker > 0.0) {
        for (Eigen::Index c = 0; c < w; ++c) {
            const double g = s.flicker * normal(rng);
            hf.col(c) += g * mask.col(c);
        }
    }
    if (s.fringe_amp > 0.0) {
        const double phase =
            2.0 * std::numbers::pi * static_cast<double>(angle % kAngles) / kAngles;
        for (Eigen::Index r = 0; r < h; ++r) {
            const double c = std::cos(2.0 * std::numbers::pi * static_cast<double>(r) /
                                          s.fringe_period + phase);
            hf.row(r) += s.fringe_amp * c * c * c * mask.row(r);
        }
    }
    if (s.speckle_rate > 0.0) {
        for (Eigen::Index i = 0; i < hf.size(); ++i) {
            const double hit = u(rng);
            const double mag = s.speckle_amp * (0.6 + 0.4 * u(rng));
            const double sign = u(rng) < 0.5 ? -1.0 : 1.0;
            if (hit < s.speckle_rate) hf.data()[i] += sign * mag;
        }
    }
    if (s.checker_amp > 0.0) {
        for (Eigen::Index r = 0; r < h; ++r) {
            for (Eigen::Index c = 0; c < w; ++c) {
                hf(r, c) += ((r + c) % 2 == 0 ? 1.0 : -1.0) * s.checker_amp;
            }
        }
    }
    return hf;
}

}  // namespace

ActionSpec action_for_class(int class_id) {
    require(class_id >= 0, "class id must be non-negative");
    ActionSpec a{class_id, {}};
    switch (class_id) {
        case 0: a.ridges = {line(0.2, 0.75)}; break;
        case 1: a.ridges = {line(0.8, 0.25)}; break;
        case 2: a.ridges = {Ridge{0.25, 2.0, -2.0, 3.25, 1.0, 0.0, 1.0}}; break;
        case 3: a.ridges = {Ridge{0.75, -2.0, 2.0, 3.25, 1.0, 0.0, 1.0}}; break;
        case 4: a.ridges = {line(0.3, 0.3), line(0.7, 0.7)}; break;
        case 5: a.ridges = {line(0.2, 0.8, 0.8), line(0.8, 0.2, 0.8)}; break;
        case 6:
            a.ridges = {Ridge{0.5, 0.0, 0.0, 3.5, 1.0, 0.3, 0.7}, line(0.75, 0.9, 0.6)};
            break;
        case 7:
            a.ridges = {Ridge{0.15, 1.4, -0.7, 3.0, 1.0, 0.0, 1.0},
                        Ridge{0.25, 0.0, 0.0, 3.25, 0.8, 0.5, 1.0}};
            break;
        default: return random_action(class_id);
    }
    return a;
}

ModalityStyle ModalityStyle::defaults(StyleKind kind) {
    ModalityStyle s;
    s.kind = kind;
    switch (kind) {
        case StyleKind::wifi:
            s.grain = 0.03;
            s.flicker = 0.10;
            break;
        case StyleKind::mmwave:
            s.grain = 0.02;
            s.fringe_amp = 0.2;
            s.fringe_period = 4.0;
            s.speckle_rate = 0.03;
            s.speckle_amp = 0.3;
            break;
        case StyleKind::rfid:
            s.grain = 0.11;
            s.checker_amp = 0.06;
            break;
        case StyleKind::mismatched:
            s.grain = 0.03;
            break;
    }
    return s;
}

ModalityStyle ModalityStyle::scaled(double k) const {
    ModalityStyle s = *this;
    s.grain *= k;
    s.flicker *= k;
    s.fringe_amp *= k;
    s.speckle_amp *= k;
    s.checker_amp *= k;
    return s;
}

nlohmann::json to_json(const ModalityStyle& s) {
    return {{"kind", std::string(to_string(s.kind))},
            {"grain", s.grain},
            {"flicker", s.flicker},
            {"fringe_amp", s.fringe_amp},
            {"fringe_period", s.fringe_period},
            {"speckle_rate", s.speckle_rate},
            {"speckle_amp", s.speckle_amp},
            {"checker_amp", s.checker_amp}};
}

Plane render_trajectory(const ActionSpec& action, std::uint64_t instance_seed, int height,
                        int width) {
    require(height >= 2 && width >= 2, "render size must be at least 2x2");
    Rng rng(derive_seed(instance_seed, "trajectory"));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double shift = 0.03 * normal(rng);

    Plane keep = Plane::Ones(height, width);  // product of (1 - ridge_i)
    for (Ridge r : action.ridges) {
        r.c0 += 0.025 * normal(rng);
        r.c1 *= 1.0 + 0.08 * normal(rng);
        r.width = std::clamp(r.width * (0.9 + 0.2 * u(rng)), 3.0, 3.5);
        r.amplitude *= 0.85 + 0.15 * u(rng);
        for (int c = 0; c < width; ++c) {
            const double tau = static_cast<double>(c) / (width - 1) - shift;
            const double env =
                logistic((tau - r.onset) / kEdge) * logistic((r.offset - tau) / kEdge);
            const double centre = (r.c0 + r.c1 * tau + r.c2 * tau * tau) * (height - 1);
            for (int f = 0; f < height; ++f) {
                const double d = (f - centre) / r.width;
                keep(f, c) *= 1.0 - r.amplitude * env * std::exp(-0.5 * d * d);
            }
        }
    }
    return kBackground + (kPeak - kBackground) * (1.0 - keep);
}

Rendered render(const ActionSpec& action, const ModalityStyle& style, std::uint64_t instance_seed,
                int height, int width, int angle) {
    Rendered out;
    out.lf_truth = render_trajectory(action, instance_seed, height, width);
    const Plane mask = (out.lf_truth - kBackground) / (kPeak - kBackground);
    out.hf_truth = texture(style, mask, instance_seed, angle);
    out.sample.data = (out.lf_truth + out.hf_truth).cwiseMax(-1.0).cwiseMin(1.0);
    out.sample.modality = modality_of(style.kind);
    out.sample.label = action.class_id;
    out.sample.meta = SampleMeta{instance_seed, style.kind == StyleKind::mmwave ? angle : 0,
                                 style.kind};
    return out;
}

Rendered render_mismatched(std::uint64_t instance_seed, int height, int width) {
    Rng rng(derive_seed(instance_seed, "mismatched"));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Plane s = Plane::Zero(height, width);
    const int gratings = 1 + static_cast<int>(u(rng) * 2.0);
    for (int g = 0; g < gratings; ++g) {
        const double theta = std::numbers::pi * u(rng);
        const double period = 8.0 + 8.0 * u(rng);
        const double phase = 2.0 * std::numbers::pi * u(rng);
        const double amp = 0.2 + 0.2 * u(rng);
        for (int r = 0; r < height; ++r) {
            for (int c = 0; c < width; ++c) {
                const double p = r * std::sin(theta) + c * std::cos(theta);
                s(r, c) += amp * (0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * p / period + phase));
            }
        }
    }
    const int disks = 1 + static_cast<int>(u(rng) * 3.0);
    for (int d = 0; d < disks; ++d) {
        const double cy = height * u(rng), cx = width * u(rng);
        const double rad = 3.0 + 4.0 * u(rng);
        const double amp = 0.4 + 0.5 * u(rng);
        for (int r = 0; r < height; ++r) {
            for (int c = 0; c < width; ++c) {
                const double dist = std::hypot(r - cy, c - cx);
                s(r, c) += amp * logistic((rad - dist) / 0.7);
            }
        }
    }
    Rendered out;
    out.lf_truth = kBackground + (kPeak - kBackground) * s.cwiseMin(1.0);
    const ModalityStyle style = ModalityStyle::defaults(StyleKind::mismatched);
    out.hf_truth = texture(style, Plane::Ones(height, width), instance_seed, 0);
    out.sample.data = (out.lf_truth + out.hf_truth).cwiseMax(-1.0).cwiseMin(1.0);
    out.sample.modality = Modality::source;
    out.sample.label = 0;
    out.sample.meta = SampleMeta{instance_seed, 0, StyleKind::mismatched};
    return out;
}

std::vector<Spectrogram> make_dataset(const DatasetSpec& spec) {
    require(spec.classes >= 2, "a dataset needs at least two classes");
    require(spec.per_class >= 1, "per_class must be positive");
    require(spec.first_class >= 0, "first_class must be non-negative");
    const std::uint64_t base =
        derive_seed(derive_seed(spec.seed, "dataset"), static_cast<std::uint64_t>(spec.style));
    const ModalityStyle style = ModalityStyle::defaults(spec.style).scaled(spec.texture_scale);
    std::vector<Spectrogram> out;
    out.reserve(static_cast<std::size_t>(spec.classes) * spec.per_class);
    std::set<std::uint64_t> seen;
    for (int k = 0; k < spec.classes; ++k) {
        const int label = spec.first_class + k;
        const ActionSpec action = action_for_class(label);
        for (int i = 0; i < spec.per_class; ++i) {
            std::uint64_t inst = derive_seed(base, static_cast<std::uint64_t>(label) * 1000003ULL + i);
            while (!seen.insert(inst).second) inst = mix_seed(inst);
            if (spec.style == StyleKind::mismatched) {
                auto r = render_mismatched(inst, spec.height, spec.width);
                r.sample.label = label;
                out.push_back(std::move(r.sample));
            } else {
                out.push_back(render(action, style, inst, spec.height, spec.width, i % kAngles).sample);
            }
        }
    }
    return out;
}

std::pair<std::vector<Spectrogram>, std::vector<Spectrogram>> kshot_split(
    const std::vector<Spectrogram>& data, int k, std::uint64_t seed) {
    require(k >= 0, "K must be non-negative");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < data.size(); ++i) by_class[data[i].label].push_back(i);
    std::vector<bool> adapt(data.size(), false);
    std::vector<std::size_t> picks;
    for (auto& [label, idx] : by_class) {
        if (static_cast<int>(idx.size()) <= k) {
            throw InvalidArgument("class " + std::to_string(label) + " has " +
                                  std::to_string(idx.size()) + " samples; need more than K=" +
                                  std::to_string(k));
        }
        Rng rng(derive_seed(derive_seed(seed, "kshot"), static_cast<std::uint64_t>(label)));
        std::shuffle(idx.begin(), idx.end(), rng);
        std::set<int> angles;
        std::vector<std::size_t> chosen;
        for (std::size_t i : idx) {
            if (static_cast<int>(chosen.size()) == k) break;
            if (angles.insert(data[i].meta.angle).second) chosen.push_back(i);
        }
        for (std::size_t i : idx) {
            if (static_cast<int>(chosen.size()) == k) break;
            if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) chosen.push_back(i);
        }
        for (std::size_t i : chosen) {
            adapt[i] = true;
            picks.push_back(i);
        }
    }
    std::pair<std::vector<Spectrogram>, std::vector<Spectrogram>> out;
    for (std::size_t i : picks) out.first.push_back(data[i]);
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!adapt[i]) out.second.push_back(data[i]);
    }
    return out;
}

std::vector<Spectrogram> filter_labels(const std::vector<Spectrogram>& data, int lo, int hi) {
    std::vector<Spectrogram> out;
    for (const auto& s : data) {
        if (s.label >= lo && s.label <= hi) out.push_back(s);
    }
    return out;
}

void require_disjoint(const std::vector<Spectrogram>& a, const std::vector<Spectrogram>& b) {
    std::set<std::uint64_t> seeds;
    for (const auto& s : a) seeds.insert(s.meta.instance_seed);
    for (const auto& s : b) {
        if (seeds.contains(s.meta.instance_seed)) {
            throw InvalidArgument("train/test overlap: instance seed " +
                                  std::to_string(s.meta.instance_seed) + " appears in both sets");
        }
    }
}

void save_dataset(const std::filesystem::path& stem, const std::vector<Spectrogram>& data,
                  const nlohmann::json& extra) {
    require(!data.empty(), "cannot save an empty dataset");
    const int h = data.front().height();
    const int w = data.front().width();
    io::TensorData t;
    t.shape = {data.size(), static_cast<std::uint64_t>(h), static_cast<std::uint64_t>(w)};
    t.values.reserve(data.size() * h * w);
    nlohmann::json labels = nlohmann::json::array(), seeds = nlohmann::json::array(),
                   angles = nlohmann::json::array(), styles = nlohmann::json::array(),
                   modalities = nlohmann::json::array();
    for (const auto& s : data) {
        require(s.height() == h && s.width() == w, "dataset samples must share one size");
        for (Eigen::Index i = 0; i < s.data.size(); ++i) {
            t.values.push_back(static_cast<float>(s.data.data()[i]));
        }
        labels.push_back(s.label);
        seeds.push_back(s.meta.instance_seed);
        angles.push_back(s.meta.angle);
        styles.push_back(std::string(to_string(s.meta.style)));
        modalities.push_back(std::string(to_string(s.modality)));
    }
    io::write_tensor_file(stem.string() + ".rft", t);
    nlohmann::json j = {{"kind", "dataset"},
                        {"generator_version", kGeneratorVersion},
                        {"count", data.size()},
                        {"height", h},
                        {"width", w},
                        {"labels", labels},
                        {"instance_seeds", seeds},
                        {"angles", angles},
                        {"styles", styles},
                        {"modalities", modalities}};
    if (extra.is_object()) {
        for (const auto& [k, v] : extra.items()) j[k] = v;
    }
    io::write_json(stem.string() + ".json", j);
}

std::vector<Spectrogram> load_dataset(const std::filesystem::path& stem) {
    const auto meta = io::read_json(stem.string() + ".json");
    const auto t = io::read_tensor_file(stem.string() + ".rft");
    if (meta.value("kind", std::string()) != "dataset") {
        throw CorruptFileError(stem.string() + ".json: not a dataset sidecar");
    }
    const auto n = meta.at("count").get<std::size_t>();
    const auto h = meta.at("height").get<std::size_t>();
    const auto w = meta.at("width").get<std::size_t>();
    if (t.shape != std::vector<std::uint64_t>{n, h, w}) {
        throw CorruptFileError(stem.string() + ".rft: shape disagrees with sidecar");
    }
    std::vector<Spectrogram> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& s = out[i];
        s.data.resize(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(w));
        for (std::size_t k = 0; k < h * w; ++k) s.data.data()[k] = t.values[i * h * w + k];
        s.label = meta.at("labels").at(i).get<int>();
        s.meta.instance_seed = meta.at("instance_seeds").at(i).get<std::uint64_t>();
        s.meta.angle = meta.at("angles").at(i).get<int>();
        s.meta.style = style_from_string(meta.at("styles").at(i).get<std::string>());
        s.modality = modality_from_string(meta.at("modalities").at(i).get<std::string>());
    }
    return out;
}

}  // namespace rfcmg::synthdata
