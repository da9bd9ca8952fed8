#pragma once

#include <iosfwd>
#include <string>

#include "volt/run_config.hpp"

namespace volt {

// CLI exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

// Maps the in-flight exception to an exit code; call from a catch block.
int exit_code_for_current_exception();

// Each command validates the resolved config before doing any work, echoes it
// to `log`, and throws a volt::Error subclass on failure.

// Writes a synthetic dataset into cfg.out. Refuses an existing dataset unless
// force is set.
void cmd_gen(const RunConfig& cfg, bool force, std::ostream& log);

// Trains on cfg.data, writes <out>/checkpoint.vltc, <out>/train_log.csv,
// <out>/config.txt and <out>/train_summary.txt.
void cmd_train(const RunConfig& cfg, std::ostream& log);

// Per-object IoU and surface F-score over the requested view counts, with a
// threshold sweep: <out>/metrics.csv, <out>/threshold_sweep.csv,
// <out>/metrics_summary.csv.
void cmd_eval(const RunConfig& cfg, std::ostream& log);

// Attention divergence exports: <out>/attention.csv, <out>/divergence.csv,
// <out>/kde.csv, <out>/divergence_summary.csv.
void cmd_diagnose(const RunConfig& cfg, std::ostream& log);

// Central-difference check of the full model gradient on random inputs.
// Returns the maximum relative error; throws NumericError above 1e-4.
double cmd_grad_check(const RunConfig& cfg, std::ostream& log);

inline constexpr double kGradCheckTolerance = 1e-4;
inline constexpr double kGradCheckEpsilon = 1e-5;

}  // namespace volt
