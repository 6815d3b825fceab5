// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#include "common/format.hpp"

#include <charconv>
#include <cmath>

namespace propcredit {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace propcredit
