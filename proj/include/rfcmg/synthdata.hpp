// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

// Procedural RF-style spectrograms. A sample is the sum of a smooth
// "trajectory" image determined by the action class and instance seed, and a
// texture image determined by the style and instance seed. Rendering the same
// (action, instance) under two styles therefore shares the trajectory exactly.

#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "json.hpp"

#include "rfcmg/common.hpp"

namespace rfcmg::synthdata {

inline constexpr int kGeneratorVersion = 1;
inline constexpr int kAngles = 10;

/// Quadratic centre curve f(tau) = c0 + c1 tau + c2 tau^2 over normalized
/// time tau in [0, 1]; f is in normalized frequency [0, 1].
struct Ridge {
    double c0 = 0.5, c1 = 0.0, c2 = 0.0;
    double width = 3.25;  // Gaussian sigma in pixels along frequency
    double amplitude = 1.0;
    double onset = 0.0, offset = 1.0;  // active time window
};

struct ActionSpec {
    int class_id = 0;
    std::vector<Ridge> ridges;
};

/// Class templates; ids 0..7 are hand-designed, larger ids are seeded draws.
ActionSpec action_for_class(int class_id);

struct ModalityStyle {
    StyleKind kind = StyleKind::wifi;
    double grain = 0.03;          // iid Gaussian grain std
    double flicker = 0.0;         // per-column gain flicker std, masked by the trajectory
    double fringe_amp = 0.0;      // micro-Doppler fringe amplitude, masked by the trajectory
    double fringe_period = 4.0;   // fringe period in frequency bins
    double speckle_rate = 0.0;    // fraction of pixels hit by a multipath speckle
    double speckle_amp = 0.0;
    double checker_amp = 0.0;     // backscatter interference pattern

    static ModalityStyle defaults(StyleKind kind);
    /// Every texture amplitude multiplied by `k`.
    ModalityStyle scaled(double k) const;
};

nlohmann::json to_json(const ModalityStyle& s);

struct Rendered {
    Spectrogram sample;
    Plane lf_truth;
    Plane hf_truth;
};

/// Low-frequency image of `action` with per-instance jitter.
Plane render_trajectory(const ActionSpec& action, std::uint64_t instance_seed, int height,
                        int width);

/// sample = clamp(lf_truth + hf_truth, -1, 1). `angle` selects the mmwave
/// fringe phase and is ignored by other styles.
Rendered render(const ActionSpec& action, const ModalityStyle& style, std::uint64_t instance_seed,
                int height, int width, int angle = 0);

/// Unrelated structure (gratings and disks) for prior-mismatch ablations.
Rendered render_mismatched(std::uint64_t instance_seed, int height, int width);

struct DatasetSpec {
    StyleKind style = StyleKind::wifi;
    int classes = 6;
    int per_class = 200;
    int first_class = 0;  // labels are first_class .. first_class + classes - 1
    std::uint64_t seed = 0;
    int height = 32;
    int width = 32;
    double texture_scale = 1.0;
};

/// Balanced, deterministic dataset. mmwave samples cycle through the angles.
std::vector<Spectrogram> make_dataset(const DatasetSpec& spec);

/// K samples per class into the adapt set, the rest into the eval set. Within
/// a class, the adapt picks prefer distinct angles.
std::pair<std::vector<Spectrogram>, std::vector<Spectrogram>> kshot_split(
    const std::vector<Spectrogram>& data, int k, std::uint64_t seed);

/// Only samples whose label is in [lo, hi].
std::vector<Spectrogram> filter_labels(const std::vector<Spectrogram>& data, int lo, int hi);

/// Throws InvalidArgument if any instance seed appears in both sets.
void require_disjoint(const std::vector<Spectrogram>& a, const std::vector<Spectrogram>& b);

/// Writes `<stem>.rft` (M x H x W) and `<stem>.json`.
void save_dataset(const std::filesystem::path& stem, const std::vector<Spectrogram>& data,
                  const nlohmann::json& extra = {});
std::vector<Spectrogram> load_dataset(const std::filesystem::path& stem);

}  // namespace rfcmg::synthdata
