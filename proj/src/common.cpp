// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rfcmg/common.hpp"

#include <sstream>

#include "rfcmg/rng.hpp"

namespace rfcmg {

std::string_view to_string(Modality m) {
    switch (m) {
        case Modality::source: return "source";
        case Modality::target_a: return "target_A";
        case Modality::target_b: return "target_B";
    }
    return "unknown";
}

std::string_view to_string(StyleKind k) {
    switch (k) {
        case StyleKind::wifi: return "wifi";
        case StyleKind::mmwave: return "mmwave";
        case StyleKind::rfid: return "rfid";
        case StyleKind::mismatched: return "mismatched";
    }
    return "unknown";
}

Modality modality_from_string(std::string_view s) {
    if (s == "source") return Modality::source;
    if (s == "target_A") return Modality::target_a;
    if (s == "target_B") return Modality::target_b;
    throw InvalidArgument("unknown modality: " + std::string(s));
}

StyleKind style_from_string(std::string_view s) {
    if (s == "wifi") return StyleKind::wifi;
    if (s == "mmwave") return StyleKind::mmwave;
    if (s == "rfid") return StyleKind::rfid;
    if (s == "mismatched") return StyleKind::mismatched;
    throw InvalidArgument("unknown style: " + std::string(s));
}

Modality modality_of(StyleKind k) {
    switch (k) {
        case StyleKind::mmwave: return Modality::target_a;
        case StyleKind::rfid: return Modality::target_b;
        default: return Modality::source;
    }
}

void require(bool cond, const std::string& message) {
    if (!cond) throw InvalidArgument(message);
}

void require_same_shape(const Plane& a, const Plane& b, std::string_view what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        std::ostringstream os;
        os << what << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows()
           << "x" << b.cols();
        throw InvalidArgument(os.str());
    }
}

bool all_finite(const Plane& p) { return p.allFinite(); }

std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) {
    // FNV-1a over the stream name, then mixed with the parent seed.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : stream) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return mix_seed(seed ^ mix_seed(h));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return mix_seed(seed ^ mix_seed(index + 0x5851f42d4c957f2dULL));
}

Plane normal_plane(int height, int width, Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Plane p(height, width);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = dist(rng);
    return p;
}

std::vector<double> normal_vector(std::size_t n, Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

NoiseDraw NoiseDraw::sample(int height, int width, std::uint64_t seed) {
    Rng rng(seed);
    return NoiseDraw{normal_plane(height, width, rng), seed};
}

NoiseDraw NoiseDraw::zeros(int height, int width) {
    return NoiseDraw{Plane::Zero(height, width), 0};
}

}  // namespace rfcmg
