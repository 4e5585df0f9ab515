// Copyright (c) 2026, prunekit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace prunekit {

inline constexpr const char* kToolVersion = "0.3.0";

/// Exit codes: 0 ok, 2 validation, 3 infeasible budget, 4 I/O. Errors are
/// written to `err` as one JSON object.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace prunekit
