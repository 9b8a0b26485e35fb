// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace krnet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Parses `args` (without the program name) and runs one subcommand.
/// Errors are printed to stderr as a single JSON object.
int run(const std::vector<std::string>& args);

}  // namespace krnet::cli
