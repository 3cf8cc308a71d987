// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "rfcmg/common.hpp"

namespace rfcmg {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Seed for a named sub-stream of `seed`. Different names give unrelated streams.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Standard-normal H x W draw, reproducible from `seed`.
struct NoiseDraw {
    Plane data;
    std::uint64_t seed = 0;

    static NoiseDraw sample(int height, int width, std::uint64_t seed);
    static NoiseDraw zeros(int height, int width);
};

Plane normal_plane(int height, int width, Rng& rng);
std::vector<double> normal_vector(std::size_t n, Rng& rng);

}  // namespace rfcmg
