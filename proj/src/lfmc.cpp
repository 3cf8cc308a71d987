// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rfcmg/lfmc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rfcmg::lfmc {

namespace {

double cubic_weight(double x) {
    constexpr double a = -0.5;
    x = std::abs(x);
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    return 0.0;
}

Plane nearest_upsample(const Plane& small, int factor) {
    Plane out(small.rows() * factor, small.cols() * factor);
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        for (Eigen::Index c = 0; c < out.cols(); ++c) {
            out(r, c) = small(r / factor, c / factor);
        }
    }
    return out;
}

Plane bicubic_upsample(const Plane& small, int factor) {
    const Eigen::Index h = small.rows();
    const Eigen::Index w = small.cols();
    Plane out(h * factor, w * factor);
    auto at = [&](Eigen::Index r, Eigen::Index c) {
        return small(std::clamp<Eigen::Index>(r, 0, h - 1), std::clamp<Eigen::Index>(c, 0, w - 1));
    };
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        const double sy = (r + 0.5) / factor - 0.5;
        const auto y0 = static_cast<Eigen::Index>(std::floor(sy));
        for (Eigen::Index c = 0; c < out.cols(); ++c) {
            const double sx = (c + 0.5) / factor - 0.5;
            const auto x0 = static_cast<Eigen::Index>(std::floor(sx));
            double acc = 0.0;
            for (int dy = -1; dy <= 2; ++dy) {
                const double wy = cubic_weight(sy - static_cast<double>(y0 + dy));
                for (int dx = -1; dx <= 2; ++dx) {
                    acc += wy * cubic_weight(sx - static_cast<double>(x0 + dx)) *
                           at(y0 + dy, x0 + dx);
                }
            }
            out(r, c) = acc;
        }
    }
    // Shift each block so its mean is the coarse value again; block averaging
    // then inverts the up-sampling exactly and the filter stays idempotent.
    for (Eigen::Index r = 0; r < h; ++r) {
        for (Eigen::Index c = 0; c < w; ++c) {
            auto blk = out.block(r * factor, c * factor, factor, factor);
            blk += small(r, c) - blk.mean();
        }
    }
    return out;
}

}  // namespace

void check_divisible(const Plane& x, int factor) {
    if (factor < 1 || x.rows() % factor != 0 || x.cols() % factor != 0) {
        throw InvalidArgument("low-pass factor " + std::to_string(factor) + " does not divide " +
                              std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
    }
}

Plane block_downsample(const Plane& x, int factor) {
    check_divisible(x, factor);
    const Eigen::Index h = x.rows() / factor;
    const Eigen::Index w = x.cols() / factor;
    Plane small(h, w);
    const double inv = 1.0 / (factor * factor);
    for (Eigen::Index r = 0; r < h; ++r) {
        for (Eigen::Index c = 0; c < w; ++c) {
            small(r, c) = x.block(r * factor, c * factor, factor, factor).sum() * inv;
        }
    }
    return small;
}

Plane low_pass(const Plane& x, const LowPassFilter& f) {
    check_divisible(x, f.factor);
    if (f.factor == 1) return x;
    const Plane small = block_downsample(x, f.factor);
    return f.kernel == ResampleKernel::block ? nearest_upsample(small, f.factor)
                                             : bicubic_upsample(small, f.factor);
}

Plane diffuse_reference(const Plane& ref, int t, const diffusion::NoiseSchedule& sched,
                        const Plane& noise) {
    require_same_shape(ref, noise, "diffuse_reference");
    if (t == 0) return ref;
    return diffusion::forward_diffuse(ref, t, noise, sched);
}

Plane lfmc_project(const Plane& x_prop, const Plane& r_noised, const LowPassFilter& f) {
    require_same_shape(x_prop, r_noised, "lfmc_project");
    return low_pass(r_noised, f) + (x_prop - low_pass(x_prop, f));
}

}  // namespace rfcmg::lfmc
