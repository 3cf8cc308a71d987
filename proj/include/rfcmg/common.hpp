// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace rfcmg {

/// Row-major H x W real array. Rows index frequency bins, columns index time.
using Plane = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Modality { source, target_a, target_b };

/// Texture family a sample was rendered with. `wifi` is the abundant source
/// modality; `mmwave` and `rfid` are the scarce targets.
enum class StyleKind { wifi, mmwave, rfid, mismatched };

std::string_view to_string(Modality m);
std::string_view to_string(StyleKind k);
Modality modality_from_string(std::string_view s);
StyleKind style_from_string(std::string_view s);
Modality modality_of(StyleKind k);

struct SampleMeta {
    std::uint64_t instance_seed = 0;
    int angle = 0;  // nuisance index; only meaningful for mmwave renders
    StyleKind style = StyleKind::wifi;
};

struct Spectrogram {
    Plane data;
    Modality modality = Modality::source;
    int label = 0;
    SampleMeta meta;

    int height() const { return static_cast<int>(data.rows()); }
    int width() const { return static_cast<int>(data.cols()); }
};

/// Invalid argument, shape mismatch or violated precondition.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A training or sampling state became NaN/Inf.
class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A persisted artifact failed its header/length checks.
class CorruptFileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& message);
void require_same_shape(const Plane& a, const Plane& b, std::string_view what);
bool all_finite(const Plane& p);

}  // namespace rfcmg
