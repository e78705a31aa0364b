//
// SPDX-License-Identifier: Apache-2.0
//

#include "msde/config.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace msde {
namespace {
  [[noreturn]] void bad_value(const std::string &key, const std::string &value,
                              const std::string &why) {
    throw ConfigError("config key '" + key + "': invalid value '" + value
                      + "' (" + why + ")");
  }

  template <class T>
  T parse_number(const std::string &key, const std::string &value) {
    T out {};
    const char *end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end)
      bad_value(key, value, "expected a number");
    if constexpr (std::is_floating_point_v<T>)
      if (!std::isfinite(out))
        bad_value(key, value, "must be finite");
    return out;
  }

  template <class T>
  std::string format(const T &v) {
    if constexpr (std::is_same_v<T, std::string>) {
      return v;
    } else {
      char buf[32];
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      return std::string(buf, ptr);
    }
  }

  struct KeyEntry {
    const char *key;
    const char *doc;
    std::function<void(RunConfig &, const std::string &)> set;
    std::function<std::string(const RunConfig &)> get;
  };

  template <class Ref>
  KeyEntry field(const char *key, const char *doc, Ref ref) {
    using T = std::remove_reference_t<decltype(ref(std::declval<RunConfig &>()))>;
    return { key, doc,
             [ref, key](RunConfig &c, const std::string &v) {
               if constexpr (std::is_same_v<T, std::string>)
                 ref(c) = v;
               else
                 ref(c) = parse_number<T>(key, v);
             },
             [ref](const RunConfig &c) {
               return format(ref(const_cast<RunConfig &>(c)));
             } };
  }

#define MSDE_REF(expr) [](RunConfig & c) -> auto & { return expr; }

  const std::vector<KeyEntry> &table() {
    static const std::vector<KeyEntry> kTable = {
      { "sde.variant", "ve or vp",
        [](RunConfig &c, const std::string &v) {
          try {
            c.sched.variant = parse_sde_variant(v);
          } catch (const Error &e) {
            bad_value("sde.variant", v, "expected ve or vp");
          }
        },
        [](const RunConfig &c) { return to_string(c.sched.variant); } },
      field("sde.sigma_min", "VE smallest noise scale",
            MSDE_REF(c.sched.sigma_min)),
      field("sde.sigma_max", "VE largest noise scale",
            MSDE_REF(c.sched.sigma_max)),
      field("sde.beta_min", "VP smallest beta", MSDE_REF(c.sched.beta_min)),
      field("sde.beta_max", "VP largest beta", MSDE_REF(c.sched.beta_max)),
      field("sde.steps", "reverse-time sampling steps",
            MSDE_REF(c.sched.steps)),
      field("model.width", "hidden width D", MSDE_REF(c.model.width)),
      field("model.encoder_layers", "layers in each encoder",
            MSDE_REF(c.model.encoder_layers)),
      field("model.attention_layers", "edge attention layers (2D->3D)",
            MSDE_REF(c.model.attention_layers)),
      field("model.gcn_layers", "dense graph conv layers (3D->2D)",
            MSDE_REF(c.model.gcn_layers)),
      field("model.time_freqs", "sinusoidal time frequencies",
            MSDE_REF(c.model.time_freqs)),
      field("model.rbf_centers", "radial basis centers K",
            MSDE_REF(c.model.rbf.centers)),
      field("model.rbf_cutoff", "radial basis cutoff",
            MSDE_REF(c.model.rbf.cutoff)),
      field("model.rbf_gamma", "radial basis width", MSDE_REF(c.model.rbf.gamma)),
      field("model.edge_cutoff", "2D->3D edge cutoff on diffused geometry",
            MSDE_REF(c.model.edge_cutoff)),
      field("model.encoder_cutoff", "3D encoder neighbor cutoff",
            MSDE_REF(c.model.encoder_cutoff)),
      field("train.epochs", "passes over the corpus", MSDE_REF(c.train.epochs)),
      field("train.batch_size", "molecules per step",
            MSDE_REF(c.train.batch_size)),
      field("train.lr", "Adam learning rate", MSDE_REF(c.train.adam.lr)),
      field("train.max_steps", "optimizer step cap, 0 = none",
            MSDE_REF(c.train.max_steps)),
      field("train.t_eps", "smallest training time", MSDE_REF(c.train.t_eps)),
      field("train.alpha_contrastive", "contrastive loss weight",
            MSDE_REF(c.train.weights.contrastive)),
      field("train.alpha_2d3d", "2D->3D loss weight",
            MSDE_REF(c.train.weights.conf)),
      field("train.alpha_3d2d", "3D->2D loss weight",
            MSDE_REF(c.train.weights.topo)),
      field("mask.ratio", "fraction of atoms masked per encoder",
            MSDE_REF(c.train.mask_ratio)),
      field("sample.corrector_steps", "Langevin steps per time step",
            MSDE_REF(c.sample.corrector_steps)),
      field("sample.snr", "corrector signal-to-noise ratio",
            MSDE_REF(c.sample.snr)),
      field("sample.k", "conformations per molecule", MSDE_REF(c.sample_k)),
      field("eval.delta", "coverage RMSD threshold", MSDE_REF(c.delta)),
      { "eval.aggregate", "mean or median across molecules",
        [](RunConfig &c, const std::string &v) {
          try {
            c.aggregate = parse_aggregate(v);
          } catch (const Error &e) {
            bad_value("eval.aggregate", v, "expected mean or median");
          }
        },
        [](const RunConfig &c) {
          return std::string(c.aggregate == Aggregate::kMean ? "mean"
                                                             : "median");
        } },
      { "seed", "run seed",
        [](RunConfig &c, const std::string &v) {
          c.seed = parse_number<uint64_t>("seed", v);
          c.seed_set = true;
        },
        [](const RunConfig &c) { return format(c.seed); } },
      field("paths.corpus", "input corpus", MSDE_REF(c.corpus)),
      field("paths.checkpoint", "checkpoint file", MSDE_REF(c.checkpoint)),
      field("paths.loss_csv", "per-epoch loss curve", MSDE_REF(c.loss_csv)),
      field("paths.output", "output corpus or report", MSDE_REF(c.output)),
    };
    return kTable;
  }

#undef MSDE_REF

  const KeyEntry &lookup(const std::string &key) {
    for (const KeyEntry &e: table())
      if (key == e.key)
        return e;
    throw ConfigError("unknown config key '" + key + "'");
  }

  std::string trim(const std::string &s) {
    const size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
      return {};
    const size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }
} // namespace

void RunConfig::set(const std::string &key, const std::string &value) {
  lookup(key).set(*this, value);
}

std::string RunConfig::get(const std::string &key) const {
  return lookup(key).get(*this);
}

void RunConfig::validate() const {
  auto rethrow = [](const char *key, auto &&fn) {
    try {
      fn();
    } catch (const ConfigError &) {
      throw;
    } catch (const Error &e) {
      throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
  };
  rethrow("sde.*", [&] { sched.validate(); });
  rethrow("model.*", [&] { model.validate(); });
  rethrow("train.*", [&] { train.validate(); });
  if (sample_k < 1)
    throw ConfigError("config key 'sample.k': must be positive");
  if (sample.corrector_steps < 0)
    throw ConfigError("config key 'sample.corrector_steps': must be >= 0");
  if (!(sample.snr > 0))
    throw ConfigError("config key 'sample.snr': must be positive");
  if (!(delta > 0))
    throw ConfigError("config key 'eval.delta': must be positive");
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t = train;
  t.seed = seed;
  return t;
}

std::vector<ConfigKeyInfo> config_keys() {
  std::vector<ConfigKeyInfo> out;
  for (const KeyEntry &e: table())
    out.push_back({ e.key, e.doc });
  return out;
}

void load_config(const std::filesystem::path &path, RunConfig &cfg) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos)
      line.resize(hash);
    line = trim(line);
    if (line.empty())
      continue;
    const size_t eq = line.find('=');
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected 'key = value'");
    try {
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError &e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
}

void apply_override(const std::string &assignment, RunConfig &cfg) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + assignment + "' is not key=value");
  cfg.set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string dump_config(const RunConfig &cfg) {
  std::ostringstream out;
  for (const KeyEntry &e: table())
    out << e.key << " = " << e.get(cfg) << "  # " << e.doc << '\n';
  return out.str();
}

} // namespace msde
