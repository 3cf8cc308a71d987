// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

// Flat key=value experiment configuration.
//
// File syntax, one entry per line:
//   key = value
//   include other.cfg      (path relative to the including file)
//   # comment
// Later entries override earlier ones. Every key must be registered in the
// defaults table; anything else is rejected.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace rfcmg::config {

enum class ValueKind { text, integer, real, flag, real_list, int_list };

struct KeySpec {
    std::string key;
    ValueKind kind;
    std::string fallback;
    std::string help;
};

/// Every recognised key with its default and a one-line description.
const std::vector<KeySpec>& registry();

class ExperimentConfig {
public:
    /// All keys at their defaults.
    ExperimentConfig();

    /// Validates the key and the value's syntax for its kind.
    void set(const std::string& key, const std::string& value);
    /// Parses `key=value`.
    void set_assignment(const std::string& assignment);
    void load_file(const std::filesystem::path& path);

    bool has(const std::string& key) const;
    const std::string& text(const std::string& key) const;
    long integer(const std::string& key) const;
    int int32(const std::string& key) const;
    double real(const std::string& key) const;
    bool flag(const std::string& key) const;
    std::vector<double> reals(const std::string& key) const;
    std::vector<int> ints(const std::string& key) const;
    std::uint64_t seed() const;

    /// Sorted `key = value` lines; loading it back gives the same config.
    std::string echo() const;
    nlohmann::json to_json() const;
    /// Content id of the values of `keys` (all keys when empty).
    std::string digest(const std::vector<std::string>& keys = {}) const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    void load_file_impl(const std::filesystem::path& path, int depth);

    std::map<std::string, std::string> values_;
};

}  // namespace rfcmg::config
