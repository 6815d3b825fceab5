// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace propcredit {

enum class ErrorKind {
    InvalidArgument,
    Config,
    Numerical,
    Io,
};

// All library failures are reported through this exception; the C API maps
// the kind onto its status codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), m_kind(kind) {}

    ErrorKind kind() const noexcept { return m_kind; }

private:
    ErrorKind m_kind;
};

[[noreturn]] void throw_invalid(const std::string& what);
[[noreturn]] void throw_config(const std::string& what);
[[noreturn]] void throw_numerical(const std::string& what);
[[noreturn]] void throw_io(const std::string& what);

#define PROPCREDIT_REQUIRE(cond, msg)                 \
    do {                                              \
        if (!(cond)) ::propcredit::throw_invalid(msg); \
    } while (0)

}  // namespace propcredit
