// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "rfcmg/common.hpp"
#include "rfcmg/diffusion.hpp"

namespace rfcmg::lfmc {

enum class ResampleKernel {
    /// Block average down, nearest-neighbour up. Linear, idempotent, orthogonal.
    block,
    /// Block average down, bicubic up with each block shifted back to its mean.
    /// Smoother than `block` and still idempotent.
    bicubic,
};

struct LowPassFilter {
    int factor = 2;
    ResampleKernel kernel = ResampleKernel::block;
};

/// Down-then-up resampling by `f.factor`; output has the input's shape.
Plane low_pass(const Plane& x, const LowPassFilter& f);
inline Plane low_pass(const Plane& x, int factor) { return low_pass(x, LowPassFilter{factor}); }

/// Block means only, (H/N) x (W/N).
Plane block_downsample(const Plane& x, int factor);

/// Reference corrupted to step t; t = 0 returns the reference unchanged.
Plane diffuse_reference(const Plane& ref, int t, const diffusion::NoiseSchedule& sched,
                        const Plane& noise);

/// low_pass(r_noised) + (x_prop - low_pass(x_prop)).
Plane lfmc_project(const Plane& x_prop, const Plane& r_noised, const LowPassFilter& f);

void check_divisible(const Plane& x, int factor);

}  // namespace rfcmg::lfmc
