// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

// Shared fixtures for the unit tests: a tiny backbone and scratch directories.

#pragma once

#include <filesystem>
#include <string>

#include "rfcmg/common.hpp"
#include "rfcmg/denoiser.hpp"
#include "rfcmg/rng.hpp"

namespace rfcmg::testing {

/// 16x16 input, two levels, 8 base channels: fast enough for per-test training.
inline denoiser::DenoiserConfig tiny_config(std::uint64_t seed = 1) {
    denoiser::DenoiserConfig c;
    c.shape.height = 16;
    c.shape.width = 16;
    c.shape.base_channels = 8;
    c.shape.channel_multipliers = {1, 2};
    c.shape.time_embed_dim = 16;
    c.seed = seed;
    return c;
}

inline Plane random_plane(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    return normal_plane(h, w, rng);
}

inline Plane uniform_plane(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Plane p(h, w);
    for (Eigen::Index k = 0; k < p.size(); ++k) p.data()[k] = u(rng);
    return p;
}

inline double max_abs(const Plane& a, const Plane& b) { return (a - b).abs().maxCoeff(); }

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("rfcmg-test-" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace rfcmg::testing
