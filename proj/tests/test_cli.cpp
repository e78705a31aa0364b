//
// SPDX-License-Identifier: Apache-2.0
//

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "msde/commands.h"
#include "msde/config.h"
#include "msde/metrics.h"
#include "msde/synthetic.h"
#include "oracle_values.h"

namespace fs = std::filesystem;

namespace msde {
namespace {

fs::path scratch(const std::string &name) {
  const fs::path dir = fs::temp_directory_path() / "msde_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

std::string read_file(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string &args) {
  const std::string cmd = std::string(MSDE_CLI_PATH) + " " + args
      + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(ConfigTest, ParsesFileAndOverrides) {
  const fs::path p = scratch("a.cfg");
  std::ofstream(p) << "# comment\n\nsde.variant = vp\nmodel.width = 24\n"
                      "train.alpha_3d2d = 0.5\nseed = 9\n";
  RunConfig cfg;
  load_config(p, cfg);
  EXPECT_EQ(cfg.sched.variant, SdeVariant::kVP);
  EXPECT_EQ(cfg.model.width, 24);
  EXPECT_EQ(cfg.train.weights.topo, 0.5);
  EXPECT_TRUE(cfg.seed_set);
  apply_override("model.width=32", cfg);
  EXPECT_EQ(cfg.get("model.width"), "32");

  RunConfig again;
  std::ofstream(p) << dump_config(cfg);
  load_config(p, again);
  EXPECT_EQ(dump_config(again), dump_config(cfg));
}

TEST(ConfigTest, ErrorsNameKeyAndLine) {
  const fs::path p = scratch("b.cfg");
  std::ofstream(p) << "model.width = 8\nmodel.widht = 8\n";
  RunConfig cfg;
  try {
    load_config(p, cfg);
    FAIL();
  } catch (const ConfigError &e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(":2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("model.widht"), std::string::npos) << msg;
  }
  EXPECT_THROW(apply_override("train.lr=abc", cfg), ConfigError);
  EXPECT_THROW(apply_override("train.lr", cfg), ConfigError);
  RunConfig ranged;
  apply_override("mask.ratio=1", ranged);
  try {
    ranged.validate();
    FAIL();
  } catch (const ConfigError &e) {
    EXPECT_NE(std::string(e.what()).find("mask.ratio"), std::string::npos);
  }
  EXPECT_THROW(apply_override("sde.variant=sub-vp", cfg), ConfigError);
  EXPECT_EQ(config_keys().size(), 35u);
}

TEST(SyntheticTest, ValidAndDeterministic) {
  const auto a = generate_synthetic(200, 4);
  EXPECT_EQ(a, generate_synthetic(200, 4));
  EXPECT_NE(a, generate_synthetic(200, 5));
  for (const MoleculePair &m: a) {
    EXPECT_NO_THROW(m.validate()) << m.id;
    EXPECT_GE(m.num_atoms(), 3);
    EXPECT_LE(m.num_atoms(), 12);
    EXPECT_LT(centroid(m.geom.coords).norm(), 1e-12);
    for (const Bond &b: m.topo.bonds) {
      const double d = (m.geom.coords.row(b.i) - m.geom.coords.row(b.j)).norm();
      EXPECT_NEAR(d, kSyntheticBondLength, 2 * kSyntheticJitter);
    }
    EXPECT_EQ(parse_molecule(serialize_molecule(m)), m);
  }
}

std::vector<Molecule3D> random_conformers(int count, int n, Rng &rng,
                                          double spread) {
  Coords base(n, 3);
  for (int64_t i = 0; i < base.size(); ++i)
    base.data()[i] = 2 * standard_normal(rng);
  std::vector<Molecule3D> out;
  for (int c = 0; c < count; ++c) {
    Molecule3D m;
    m.atom_types.assign(n, 6);
    m.coords = base;
    for (int64_t i = 0; i < base.size(); ++i)
      m.coords.data()[i] += spread * standard_normal(rng);
    out.push_back(std::move(m));
  }
  return out;
}

TEST(MetricsTest, CovMatMatchesDoubleLoop) {
  Rng rng(40);
  const auto refs = random_conformers(10, 6, rng, 0.4);
  auto gens = random_conformers(10, 6, rng, 0.4);
  for (int c = 0; c < 10; ++c)
    gens[c].coords = refs[c].coords.array() + 0.3 * (c % 3);
  const double delta = 0.5;
  const CovMatReport r = cov_mat(refs, gens, delta);
  double covered = 0, matching = 0;
  for (const Molecule3D &ref: refs) {
    double best = std::numeric_limits<double>::infinity();
    for (const Molecule3D &gen: gens)
      best = std::min(best, kabsch_rmsd(gen.coords, ref.coords).rmsd);
    covered += best <= delta ? 1 : 0;
    matching += best;
  }
  EXPECT_EQ(r.coverage, covered / 10);
  EXPECT_EQ(r.matching, matching / 10);

  const CovMatReport same = cov_mat(refs, refs, delta);
  EXPECT_EQ(same.coverage, 1.0);
  EXPECT_EQ(same.matching, 0.0);
  EXPECT_THROW(cov_mat(refs, {}, delta), Error);
}

TEST(MetricsTest, AucMatchesReference) {
  const std::vector<double> scores(std::begin(oracle::kAucScores),
                                   std::end(oracle::kAucScores));
  const std::vector<int> labels(std::begin(oracle::kAucLabels),
                                std::end(oracle::kAucLabels));
  EXPECT_NEAR(roc_auc(scores, labels), oracle::kAuc[0], 1e-15);
  EXPECT_THROW(roc_auc({ 0.1, 0.2 }, { 1, 1 }), Error);
  EXPECT_EQ(parse_aggregate("median"), Aggregate::kMedian);
  EXPECT_THROW(parse_aggregate("max"), Error);
}

TEST(CommandTest, RunCommandMapsErrors) {
  std::ostringstream err;
  EXPECT_EQ(run_command([] { }, err), kExitOk);
  EXPECT_EQ(run_command([] { throw ConfigError("bad key"); }, err), kExitUsage);
  EXPECT_EQ(run_command([] { throw Error("boom"); }, err), kExitFailure);
  EXPECT_NE(err.str().find("boom"), std::string::npos);
}

TEST(CommandTest, PretrainRequiresSeedAndCorpus) {
  RunConfig cfg;
  std::ostringstream log;
  EXPECT_THROW(cmd_pretrain(cfg, log), ConfigError);
  cfg.seed_set = true;
  cfg.corpus = scratch("missing.txt").string();
  cfg.checkpoint = scratch("x.ckpt").string();
  EXPECT_THROW(cmd_pretrain(cfg, log), ConfigError);
}

TEST(CliTest, ExitCodes) {
  const fs::path corpus = scratch("c.txt");
  EXPECT_EQ(run_cli("gen-synthetic -n 4 --seed 1 -o " + corpus.string()), 0);
  EXPECT_EQ(run_cli("pretrain --seed 1 --corpus /nonexistent/c.txt "
                    "--checkpoint " + scratch("y.ckpt").string()),
            2);
  EXPECT_EQ(run_cli("pretrain --corpus " + corpus.string()), 2);
  EXPECT_EQ(run_cli("pretrain --seed 1 --set model.width=0 --corpus "
                    + corpus.string() + " --checkpoint "
                    + scratch("y.ckpt").string()),
            2);
  EXPECT_EQ(run_cli("no-such-command"), 2);
}

TEST(CliTest, EndToEndIsReproducible) {
  const fs::path corpus = scratch("e.txt");
  ASSERT_EQ(run_cli("gen-synthetic -n 1 --seed 0 -o " + corpus.string()), 0);
  EXPECT_EQ(read_corpus(corpus).size(), 1u);
  ASSERT_EQ(run_cli("gen-synthetic -n 6 --seed 3 -o " + corpus.string()), 0);
  const std::string small = "--set model.width=8 --set model.encoder_layers=1 "
                            "--set model.gcn_layers=1 --set train.epochs=1 "
                            "--set train.batch_size=3 --set sde.steps=10 ";
  std::string ckpt[2], samples[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path c = scratch("r" + std::to_string(run) + ".ckpt");
    const fs::path s = scratch("s" + std::to_string(run) + ".txt");
    ASSERT_EQ(run_cli("pretrain --seed 5 " + small + "--corpus "
                      + corpus.string() + " --checkpoint " + c.string()
                      + " --loss-csv " + scratch("l.csv").string()),
              0);
    ASSERT_EQ(run_cli("sample-conf --seed 6 -k 2 " + small + "--corpus "
                      + corpus.string() + " --checkpoint " + c.string()
                      + " -o " + s.string()),
              0);
    ckpt[run] = read_file(c);
    samples[run] = read_file(s);
  }
  EXPECT_EQ(ckpt[0], ckpt[1]);
  EXPECT_EQ(samples[0], samples[1]);
  EXPECT_EQ(read_corpus(scratch("s0.txt")).size(), 12u);
  EXPECT_EQ(run_cli("eval-covmat --corpus " + corpus.string()
                    + " --generated " + scratch("s0.txt").string()),
            0);
  EXPECT_EQ(read_file(scratch("l.csv")).substr(0, 6), "epoch,");
}

} // namespace
} // namespace msde
