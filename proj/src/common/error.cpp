// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#include "common/error.hpp"

namespace propcredit {

void throw_invalid(const std::string& what) { throw Error(ErrorKind::InvalidArgument, what); }
void throw_config(const std::string& what) { throw Error(ErrorKind::Config, what); }
void throw_numerical(const std::string& what) { throw Error(ErrorKind::Numerical, what); }
void throw_io(const std::string& what) { throw Error(ErrorKind::Io, what); }

}  // namespace propcredit
