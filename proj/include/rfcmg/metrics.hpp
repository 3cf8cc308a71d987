// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rfcmg/common.hpp"
#include "rfcmg/nn/convnet.hpp"

namespace rfcmg::metrics {

inline constexpr double kPsnrPeak = 2.0;
inline constexpr double kPsnrCap = 100.0;

/// 10 log10(peak^2 / mse) for signals in [-1, 1]; 100 dB when mse < 1e-10.
double psnr(const Plane& a, const Plane& b);

/// Mean local SSIM, 7x7 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// dynamic range 2, evaluated at every position where the window fits.
double ssim(const Plane& a, const Plane& b);

/// Frechet distance between Gaussian fits of two feature sets (one row per sample).
double fid(const Eigen::MatrixXd& feats_a, const Eigen::MatrixXd& feats_b);

struct BandEnergy {
    double low = 0.0;
    double high = 0.0;
    double high_fraction() const { return high / (low + high); }
    double low_fraction() const { return low / (low + high); }
};

/// Energy of the block low-pass component and of its residual.
BandEnergy band_energy(const Plane& x, int factor);

/// Small frozen CNN whose activations define the FID and perceptual spaces.
struct FeatureEncoder {
    std::vector<int> channels{16, 32, 64};
    int classes = 2;
    std::uint64_t seed = 0;
    nn::ParamStore<float> params;

    int feature_dim() const { return channels.back(); }
    std::string id() const;
    nn::ConvNet<float> net() const;
};

struct EncoderOptions {
    std::vector<int> channels{16, 32, 64};
    int epochs = 12;
    int batch = 64;
    double lr = 1e-3;
    std::uint64_t seed = 0;
};

/// Trains the encoder as a classifier on `labels` and freezes it.
FeatureEncoder train_encoder(const std::vector<Plane>& data, const std::vector<int>& labels,
                             const EncoderOptions& opt);

/// Globally pooled last-block activations, one row per sample.
Eigen::MatrixXd features(const FeatureEncoder& enc, const std::vector<Plane>& samples);

/// Per-block activations, each unit-normalized across channels at every position.
std::vector<std::vector<float>> normalized_activations(const FeatureEncoder& enc,
                                                       const Plane& x);

/// Sum over blocks of the mean squared difference of normalized activations.
double perceptual_distance(const FeatureEncoder& enc, const Plane& a, const Plane& b);

/// Mean perceptual distance over all unordered pairs.
double intra_lpips(const FeatureEncoder& enc, const std::vector<Plane>& samples);

/// intra_lpips(generated) / intra_lpips(real).
double r_lpips(const FeatureEncoder& enc, const std::vector<Plane>& generated,
               const std::vector<Plane>& real);

void save_encoder(const std::filesystem::path& path, const FeatureEncoder& enc);
FeatureEncoder load_encoder(const std::filesystem::path& path);

/// One row of the metrics table. Unset values are written as empty cells.
struct MetricReport {
    std::string run_id;
    std::string experiment;
    std::string target_style;
    std::string method;
    std::string param_name;
    std::string param_value;
    std::optional<double> fid, ssim, psnr, intra_lpips, r_lpips, accuracy;
    long n_generated = 0;
    long n_real = 0;
    std::string encoder_id;
};

inline constexpr int kCsvSchemaVersion = 1;
std::string csv_header();
std::string csv_row(const MetricReport& r);
/// Appends `rows`, writing the header first if the file is new or empty.
void append_csv(const std::filesystem::path& path, const std::vector<MetricReport>& rows);

std::vector<Plane> planes_of(const std::vector<Spectrogram>& s);

}  // namespace rfcmg::metrics
