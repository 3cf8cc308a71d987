// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

// Command entry points. Each command writes into a fresh run directory
// `<out>/<run_id>/` containing:
//   config.txt     resolved configuration (loadable with --config)
//   manifest.json  command, timing, seed and a digest of every artifact
//   error.json     only on failure: {"status", "type", "message"}
// plus the command's own artifacts. An existing non-empty run directory is
// never touched.

#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "rfcmg/config.hpp"

namespace rfcmg::commands {

/// gen-data, pretrain, fit-mge, generate, finetune-baseline, eval-gen,
/// downstream, sweep, visualize.
const std::vector<std::string>& command_names();

enum Status : int {
    ok = 0,
    failure = 1,
    invalid_config = 2,
    missing_input = 3,
    non_finite = 4,
    corrupt_input = 5,
};

struct RunResult {
    int status = ok;
    std::filesystem::path run_dir;
    nlohmann::json error;  // null on success
};

/// Runs `name` with `cfg`; domain errors are reported through the result
/// (and error.json when the run directory could be created), not thrown.
RunResult run_command(const std::string& name, const config::ExperimentConfig& cfg,
                      std::ostream& log);

/// Directory a run of `name` with `cfg` writes to.
std::filesystem::path run_directory(const std::string& name, const config::ExperimentConfig& cfg);

}  // namespace rfcmg::commands
