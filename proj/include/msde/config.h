//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MSDE_CONFIG_H_
#define MSDE_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "msde/array.h"
#include "msde/generate.h"
#include "msde/metrics.h"
#include "msde/objectives.h"
#include "msde/scorenets.h"
#include "msde/sde.h"

namespace msde {

/// Bad configuration or usage; the CLI maps it to exit code 2.
class ConfigError: public Error {
public:
  using Error::Error;
};

struct RunConfig {
  NoiseSchedule sched;
  ModelConfig model;
  TrainConfig train;
  SampleOptions sample;
  int sample_k = 1;
  double delta = 0.5;
  Aggregate aggregate = Aggregate::kMean;
  uint64_t seed = 0;
  bool seed_set = false;

  std::string corpus;
  std::string checkpoint;
  std::string loss_csv;
  std::string output;

  /// Sets one key from its text value. Throws ConfigError naming the key
  /// for unknown keys and unparsable or out-of-range values.
  void set(const std::string &key, const std::string &value);
  std::string get(const std::string &key) const;

  /// Cross-field checks; throws ConfigError.
  void validate() const;

  /// Training settings with the run seed applied.
  TrainConfig train_config() const;
};

struct ConfigKeyInfo {
  std::string key;
  std::string doc;
};

/// Every accepted key with its documentation, in file order.
std::vector<ConfigKeyInfo> config_keys();

/// Applies `key = value` lines. '#' starts a comment; blank lines are
/// ignored. Errors carry path:line.
void load_config(const std::filesystem::path &path, RunConfig &cfg);

/// Parses and applies one "key=value" override.
void apply_override(const std::string &assignment, RunConfig &cfg);

/// All keys with their current values, one `key = value` per line.
std::string dump_config(const RunConfig &cfg);

} // namespace msde

#endif // MSDE_CONFIG_H_
