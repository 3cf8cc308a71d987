// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

// Binary containers shared by every persisted artifact.
//
// Tensor file (.rft):
//   "RFCT" | u32 version | u32 dtype (1 = float32) | u32 rank | u64 shape[rank] | payload
// Archive (.rfck): a JSON header followed by named tensors
//   "RFCK" | u32 version | u64 json_bytes | json | u32 count |
//   count x ( u32 name_bytes | name | u32 dtype | u32 rank | u64 shape[rank] | payload )
// All integers and float payloads are little-endian. Readers check every
// length against the file size and fail with CorruptFileError.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace rfcmg::io {

inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr std::uint32_t kDtypeFloat32 = 1;

struct TensorData {
    std::vector<std::uint64_t> shape;
    std::vector<float> values;

    std::uint64_t element_count() const;
};

struct NamedTensor {
    std::string name;
    TensorData tensor;
};

struct Archive {
    nlohmann::json header;
    std::vector<NamedTensor> tensors;

    const TensorData& get(const std::string& name) const;
};

void write_tensor_file(const std::filesystem::path& path, const TensorData& t);
TensorData read_tensor_file(const std::filesystem::path& path);

void write_archive(const std::filesystem::path& path, const Archive& a);
Archive read_archive(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

/// Hex SHA-free content id: 64-bit FNV-1a of a file's bytes.
std::string file_digest(const std::filesystem::path& path);
std::string bytes_digest(std::span<const unsigned char> bytes);

}  // namespace rfcmg::io
