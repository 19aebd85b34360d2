// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#pragma once

#include <iosfwd>

namespace raw2raw::tools {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitDataError = 2;

/// Entry point of the `raw2raw` tool.
///
/// Subcommands: synth-gen, fit-calib, build-anchors, train, map, eval,
/// baseline, annotate-serve. Returns 0 on success, 1 on a usage error (the
/// usage text goes to `err`) and 2 when a pipeline stage fails.
int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace raw2raw::tools
