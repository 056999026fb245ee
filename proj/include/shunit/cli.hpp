#pragma once

namespace shunit {

// Process exit codes of the `shunit` tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;      // bad arguments, config, data or checkpoint
inline constexpr int kExitNumerical = 3;  // non-finite loss during training
inline constexpr int kExitMetric = 4;     // metric undefined for the given sets

// Subcommands: train, translate, eval-cfid, gen-synthetic, inspect.
// Relative paths resolve against --workdir (default: current directory).
int run_cli(int argc, char** argv);

}  // namespace shunit
