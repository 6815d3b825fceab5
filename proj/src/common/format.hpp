// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

namespace propcredit {

/// Shortest decimal text that round-trips to the same double. Non-finite
/// values print as nan, inf and -inf.
std::string format_number(double v);

}  // namespace propcredit
