//
// SPDX-License-Identifier: Apache-2.0
//

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "msde/commands.h"
#include "msde/config.h"

namespace {
struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string seed;
  std::string corpus;
  std::string checkpoint;
  std::string output;
};

void add_common(CLI::App *cmd, Common &c) {
  cmd->add_option("-c,--config", c.config_file, "key = value config file");
  cmd->add_option("--set", c.overrides, "override, key=value (repeatable)");
  cmd->add_option("--seed", c.seed, "run seed");
  cmd->add_option("--corpus", c.corpus, "input corpus (paths.corpus)");
  cmd->add_option("--checkpoint", c.checkpoint,
                  "checkpoint file (paths.checkpoint)");
  cmd->add_option("-o,--out", c.output, "output path (paths.output)");
}

msde::RunConfig build_config(const Common &c) {
  msde::RunConfig cfg;
  if (!c.config_file.empty())
    msde::load_config(c.config_file, cfg);
  for (const std::string &o: c.overrides)
    msde::apply_override(o, cfg);
  if (!c.seed.empty())
    cfg.set("seed", c.seed);
  if (!c.corpus.empty())
    cfg.corpus = c.corpus;
  if (!c.checkpoint.empty())
    cfg.checkpoint = c.checkpoint;
  if (!c.output.empty())
    cfg.output = c.output;
  return cfg;
}
} // namespace

int main(int argc, char **argv) {
  CLI::App app { "Group-symmetric SDE pretraining between 2D molecular "
                 "topology and 3D conformation" };
  app.require_subcommand(1);

  int gen_n = 200;
  uint64_t gen_seed = 0;
  std::string gen_out;
  auto *gen = app.add_subcommand("gen-synthetic", "write a toy corpus");
  gen->add_option("-n,--n", gen_n, "number of molecules");
  gen->add_option("--seed", gen_seed, "generator seed")->required();
  gen->add_option("-o,--out", gen_out, "output corpus")->required();

  Common pre_c, conf_c, topo_c, eval_c, check_c;
  std::string loss_csv;
  auto *pre = app.add_subcommand("pretrain", "train all three objectives");
  add_common(pre, pre_c);
  pre->add_option("--loss-csv", loss_csv, "per-epoch loss CSV");

  auto *conf = app.add_subcommand("sample-conf", "generate conformations");
  add_common(conf, conf_c);
  int conf_k = 0;
  conf->add_option("-k,--k", conf_k, "conformations per molecule");

  auto *topo = app.add_subcommand("sample-topo", "generate topologies");
  add_common(topo, topo_c);

  auto *eval = app.add_subcommand("eval-covmat", "coverage / matching");
  add_common(eval, eval_c);
  std::string generated;
  eval->add_option("--generated", generated, "generated conformers")
      ->required();

  auto *check = app.add_subcommand("check", "symmetry and gradient report");
  add_common(check, check_c);
  msde::CheckOptions check_opts;
  check->add_option("--trials", check_opts.trials, "trials per check");
  check->add_option("--grad-fraction", check_opts.grad_fraction,
                    "parameter fraction for the gradient check");
  bool drop_axis = false;
  check->add_flag("--drop-pseudo-axis", drop_axis,
                  "negative control: discard the pseudo-vector frame axis");

  auto *keys = app.add_subcommand("config-keys", "list config keys");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? msde::kExitOk : msde::kExitUsage;
  }

  std::ostream &log = std::cout;
  std::ostream &err = std::cerr;
  bool check_ok = true;
  const int rc = msde::run_command(
      [&] {
        if (gen->parsed()) {
          msde::cmd_gen_synthetic(gen_n, gen_seed, gen_out);
        } else if (pre->parsed()) {
          msde::RunConfig cfg = build_config(pre_c);
          if (!loss_csv.empty())
            cfg.loss_csv = loss_csv;
          msde::cmd_pretrain(cfg, log);
        } else if (conf->parsed()) {
          msde::RunConfig cfg = build_config(conf_c);
          if (conf_k > 0)
            cfg.sample_k = conf_k;
          msde::cmd_sample_conf(cfg, log);
        } else if (topo->parsed()) {
          msde::cmd_sample_topo(build_config(topo_c), log);
        } else if (eval->parsed()) {
          msde::cmd_eval_covmat(build_config(eval_c), generated, log);
        } else if (check->parsed()) {
          if (drop_axis)
            check_opts.mode = msde::FrameMode::kDropPseudoAxis;
          check_ok = msde::cmd_check(build_config(check_c), check_opts, log);
        } else if (keys->parsed()) {
          std::cout << msde::dump_config(msde::RunConfig {});
        }
      },
      err);
  if (rc != msde::kExitOk)
    return rc;
  return check_ok ? msde::kExitOk : msde::kExitFailure;
}
