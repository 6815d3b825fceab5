// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "nn/policy_net.hpp"

namespace propcredit::nn {

inline constexpr int kCheckpointVersion = 1;

/// JSON document with format tag, version, architecture and the flat
/// parameter array. Doubles are written in shortest round-trip form.
std::string checkpoint_to_json(const PolicyParams& params);
PolicyParams checkpoint_from_json(const std::string& text);

void save_checkpoint(const PolicyParams& params, const std::filesystem::path& path);
PolicyParams load_checkpoint(const std::filesystem::path& path);

}  // namespace propcredit::nn
