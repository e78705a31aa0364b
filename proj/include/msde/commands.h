//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MSDE_COMMANDS_H_
#define MSDE_COMMANDS_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>

#include "msde/config.h"
#include "msde/scorenets.h"

namespace msde {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
};

void cmd_gen_synthetic(int n, uint64_t seed, const std::filesystem::path &out);

/// Fresh model for the configured architecture and schedule.
Model init_model(const RunConfig &cfg);

Model load_model(const std::filesystem::path &path);
void save_model(const std::filesystem::path &path, const Model &model);

void cmd_pretrain(const RunConfig &cfg, std::ostream &log);
void cmd_sample_conf(const RunConfig &cfg, std::ostream &log);

/// Writes predicted topologies; when the input records carry bonds, also
/// logs the pooled bond-existence AUC of the continuous edge evidence.
void cmd_sample_topo(const RunConfig &cfg, std::ostream &log);

/// Reads references (paths.corpus) and generated conformers (`generated`),
/// writes a per-molecule CSV to paths.output when set, logs the summary.
CovMatSummary cmd_eval_covmat(const RunConfig &cfg,
                              const std::filesystem::path &generated,
                              std::ostream &log);

struct CheckOptions {
  int trials = 100;
  double rotation_tol = 1e-6;
  double exact_tol = 1e-9;
  double reflection_tol = 1e-3;
  double grad_fraction = 0.05;
  double grad_tol = 1e-4;
  FrameMode mode = FrameMode::kFull;
};

/// Symmetry checks on both score networks plus a gradient check of the
/// total loss. Prints a table; returns true when every row passes.
bool cmd_check(const RunConfig &cfg, const CheckOptions &opts,
               std::ostream &log);

/// Runs `fn`, mapping ConfigError and missing inputs to kExitUsage and
/// other errors to kExitFailure, printing the message to `err`.
int run_command(const std::function<void()> &fn, std::ostream &err);

} // namespace msde

#endif // MSDE_COMMANDS_H_
