// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "app/config.hpp"

namespace propcredit::app {

inline constexpr const char* kManifestName = "run_manifest.json";

/// Resolved config plus seed and code version; feeding it back as a config
/// reproduces the run.
std::string manifest_json(const RunConfig& config);

/// Runs the command and writes its outputs and the manifest into `out_dir`
/// (created when missing). Returns the written file names in order.
std::vector<std::string> run_command(const RunConfig& config, const std::filesystem::path& out_dir);

}  // namespace propcredit::app
