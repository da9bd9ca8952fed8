#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "volt/adamw.hpp"
#include "volt/model.hpp"

namespace volt {

// Fully resolved settings of one CLI run. Resolution order, later wins:
// built-in defaults, --preset, --config file, explicit flags.
struct RunConfig {
  ModelConfig model;

  // optimizer / training
  double lr = 1e-4;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 8;
  std::size_t steps = 2000;
  std::size_t warmup = 0;  // linear lr warmup steps
  std::size_t train_views = 0;  // 0 = all generated views
  std::string train_split = "train";  // train | all
  std::uint64_t seed = 1;

  // dataset generation (gen uses `seed` as the generator seed)
  std::size_t objects = 64;
  std::size_t views = 24;
  std::size_t image_size = 16;
  std::uint64_t embedder_seed = 0;  // 0 = library default
  std::uint64_t data_fingerprint = 0;  // recorded by train, checked by eval

  // evaluation / diagnostics
  std::vector<std::size_t> eval_views{1, 2, 4, 8, 12, 16, 24};
  std::vector<double> thresholds{0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};
  std::string split = "val";  // train | val | all
  std::size_t diag_objects = 100;
  std::size_t diag_views = 24;
  std::size_t diag_export = 4;  // objects whose attention matrices are exported
  int diag_head = -1;           // -1 = head-averaged
  std::uint64_t shuffle_views = 0;  // nonzero: permute each object's views with this seed

  // paths
  std::string data = "data";
  std::string out = "out";
  std::string checkpoint;  // defaults to <out>/checkpoint.vltc

  std::string preset;

  // Applies one key = value pair. Throws ConfigError for unknown keys or
  // unparsable values.
  void set(std::string_view key, std::string_view value);
  void apply_preset(std::string_view name);
  // Throws ConfigError when any invariant fails.
  void validate() const;

  std::string variant() const { return model.enhance ? "evolt" : "volt"; }
  std::string checkpoint_path() const;
  AdamWConfig optimizer() const;

  // Every key, one `key = value` line each, in a fixed order.
  std::string to_text() const;
  static RunConfig from_text(std::string_view text);

  static std::vector<std::string> keys();
  static std::vector<std::string> presets();
};

// Parses a flat `key = value` file; '#' starts a comment.
std::map<std::string, std::string> parse_config_text(std::string_view text);
std::map<std::string, std::string> read_config_file(const std::string& path);

}  // namespace volt
