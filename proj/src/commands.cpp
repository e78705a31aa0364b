//
// SPDX-License-Identifier: Apache-2.0
//

#include "msde/commands.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>

#include "msde/checkpoint.h"
#include "msde/metrics.h"
#include "msde/synthetic.h"

namespace msde {
namespace {
  void require_seed(const RunConfig &cfg, const char *cmd) {
    if (!cfg.seed_set)
      throw ConfigError(std::string(cmd) + ": --seed is required");
  }

  void require_path(const std::string &value, const char *key) {
    if (value.empty())
      throw ConfigError(std::string("config key '") + key + "' is not set");
  }

  std::vector<MoleculePair> read_input_corpus(const std::string &path,
                                              const char *key) {
    require_path(path, key);
    if (!std::filesystem::exists(path))
      throw ConfigError(std::string("config key '") + key + "': " + path
                        + " does not exist");
    return read_corpus(path);
  }

  Model read_checkpoint(const std::string &path) {
    require_path(path, "paths.checkpoint");
    if (!std::filesystem::exists(path))
      throw ConfigError("config key 'paths.checkpoint': " + path
                        + " does not exist");
    return load_model(path);
  }

  SampleOptions sample_options(const RunConfig &cfg) {
    SampleOptions s = cfg.sample;
    s.steps = cfg.sched.steps;
    return s;
  }

  std::string fmt(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
  }

  std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3e", v);
    return buf;
  }
} // namespace

void cmd_gen_synthetic(int n, uint64_t seed, const std::filesystem::path &out) {
  if (n < 1)
    throw ConfigError("gen-synthetic: --n must be at least 1");
  write_corpus(out, generate_synthetic(n, seed));
}

Model init_model(const RunConfig &cfg) {
  return make_model(cfg.model, cfg.sched, derive_seed(cfg.seed, 0x1417));
}

Model load_model(const std::filesystem::path &path) {
  return model_from_arrays(load_checkpoint(path));
}

void save_model(const std::filesystem::path &path, const Model &model) {
  save_checkpoint(path, model_to_arrays(model));
}

void cmd_pretrain(const RunConfig &cfg, std::ostream &log) {
  require_seed(cfg, "pretrain");
  cfg.validate();
  require_path(cfg.checkpoint, "paths.checkpoint");
  const auto corpus = read_input_corpus(cfg.corpus, "paths.corpus");
  if (corpus.empty())
    throw ConfigError("config key 'paths.corpus': corpus is empty");

  Model model = init_model(cfg);
  check_compatible(model, corpus);
  const auto curve =
      train(model, corpus, cfg.train_config(), [&](const EpochRecord &r) {
        log << "epoch " << r.epoch << " loss " << fmt(r.mean.total)
            << " (contrastive " << fmt(r.mean.contrastive) << ", 2d3d "
            << fmt(r.mean.conf) << ", 3d2d " << fmt(r.mean.topo) << ")\n";
      });
  save_model(cfg.checkpoint, model);
  if (!cfg.loss_csv.empty())
    write_loss_csv(cfg.loss_csv, curve);
  log << "wrote " << cfg.checkpoint << '\n';
}

void cmd_sample_conf(const RunConfig &cfg, std::ostream &log) {
  require_seed(cfg, "sample-conf");
  cfg.validate();
  require_path(cfg.output, "paths.output");
  const Model model = read_checkpoint(cfg.checkpoint);
  const auto corpus = read_input_corpus(cfg.corpus, "paths.corpus");
  const auto out = sample_conformations(model, corpus, cfg.sample_k,
                                        sample_options(cfg), cfg.seed);
  write_corpus(cfg.output, out);
  log << "wrote " << out.size() << " conformations to " << cfg.output << '\n';
}

void cmd_sample_topo(const RunConfig &cfg, std::ostream &log) {
  require_seed(cfg, "sample-topo");
  cfg.validate();
  require_path(cfg.output, "paths.output");
  const Model model = read_checkpoint(cfg.checkpoint);
  const auto corpus = read_input_corpus(cfg.corpus, "paths.corpus");
  std::vector<Array> scores;
  const auto out = sample_topologies(model, corpus, sample_options(cfg),
                                     cfg.seed, &scores);
  write_corpus(cfg.output, out);
  log << "wrote " << out.size() << " topologies to " << cfg.output << '\n';

  std::vector<double> s;
  std::vector<int> y;
  for (size_t m = 0; m < corpus.size(); ++m) {
    const int n = corpus[m].num_atoms();
    std::vector<std::vector<int>> bonded(n, std::vector<int>(n, 0));
    for (const Bond &b: corpus[m].topo.bonds)
      bonded[b.i][b.j] = bonded[b.j][b.i] = 1;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        s.push_back(scores[m](i, j));
        y.push_back(bonded[i][j]);
      }
  }
  const bool has_pos = std::find(y.begin(), y.end(), 1) != y.end();
  const bool has_neg = std::find(y.begin(), y.end(), 0) != y.end();
  if (has_pos && has_neg)
    log << "bond-existence AUC against input bonds: " << fmt(roc_auc(s, y))
        << '\n';
}

CovMatSummary cmd_eval_covmat(const RunConfig &cfg,
                              const std::filesystem::path &generated,
                              std::ostream &log) {
  cfg.validate();
  const auto refs = read_input_corpus(cfg.corpus, "paths.corpus");
  const auto gens = read_input_corpus(generated.string(), "--generated");
  const CovMatSummary sum = cov_mat_by_id(refs, gens, cfg.delta, cfg.aggregate);

  if (!cfg.output.empty()) {
    std::ofstream out(cfg.output);
    if (!out)
      throw Error("cannot write " + cfg.output);
    out << "id,coverage,matching,delta\n";
    for (const CovMatGroup &g: sum.groups)
      out << g.id << ',' << fmt(g.report.coverage) << ','
          << fmt(g.report.matching) << ',' << fmt(cfg.delta) << '\n';
  }
  log << "COV " << fmt(sum.coverage) << " MAT " << fmt(sum.matching) << " ("
      << (sum.aggregate == Aggregate::kMean ? "mean" : "median") << " over "
      << sum.groups.size() << " molecules, delta " << fmt(cfg.delta) << ")\n";
  return sum;
}

bool cmd_check(const RunConfig &cfg, const CheckOptions &opts,
               std::ostream &log) {
  cfg.validate();
  const Model model =
      cfg.checkpoint.empty() ? init_model(cfg) : read_checkpoint(cfg.checkpoint);
  const std::vector<MoleculePair> mols =
      cfg.corpus.empty() ? generate_synthetic(30, cfg.seed)
                         : read_input_corpus(cfg.corpus, "paths.corpus");

  bool all = true;
  log << std::left << std::setw(14) << "net" << std::setw(13) << "check"
      << std::setw(8) << "trials" << std::setw(14) << "max_dev"
      << std::setw(14) << "min_dev" << "result\n";
  for (ScoreNet net: { ScoreNet::kConformation, ScoreNet::kTopology }) {
    for (SymmetryKind kind:
         { SymmetryKind::kRotation, SymmetryKind::kReflection,
           SymmetryKind::kPermutation, SymmetryKind::kTranslation }) {
      const double tol = kind == SymmetryKind::kReflection ? opts.reflection_tol
                         : kind == SymmetryKind::kRotation
                                 && net == ScoreNet::kConformation
                             ? opts.rotation_tol
                             : opts.exact_tol;
      const SymmetryReport r = check_symmetry(
          kind, net, model, mols, opts.trials, tol,
          derive_seed(cfg.seed, static_cast<uint64_t>(kind),
                      static_cast<uint64_t>(net)),
          opts.mode);
      all = all && r.passed;
      log << std::setw(14) << to_string(net) << std::setw(13) << to_string(kind)
          << std::setw(8) << r.trials << std::setw(14)
          << (r.applicable ? sci(r.max_deviation) : "-") << std::setw(14)
          << (r.applicable ? sci(r.min_deviation) : "-")
          << (r.applicable ? (r.passed ? "pass" : "FAIL") : "n/a") << '\n';
    }
  }

  Batch batch;
  batch.seed = derive_seed(cfg.seed, 0x6772);
  batch.mask_ratio = cfg.train.mask_ratio;
  for (size_t k = 0; k < std::min<size_t>(2, mols.size()); ++k)
    batch.items.push_back(mols[k]);
  LossWeights w = cfg.train.weights;
  if (batch.items.size() < 2)
    w.contrastive = 0;
  const GradientCheckReport g = gradient_check(
      model, batch, w, opts.grad_fraction, derive_seed(cfg.seed, 0x6763));
  const bool grad_ok = g.max_rel_error < opts.grad_tol;
  all = all && grad_ok;
  log << std::setw(14) << "total_loss" << std::setw(13) << "gradient"
      << std::setw(8) << g.checked << std::setw(14) << sci(g.max_rel_error)
      << std::setw(14) << "-" << (grad_ok ? "pass" : "FAIL") << '\n';
  return all;
}

int run_command(const std::function<void()> &fn, std::ostream &err) {
  try {
    fn();
    return kExitOk;
  } catch (const ConfigError &e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

} // namespace msde
