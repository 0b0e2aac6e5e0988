// SPDX-License-Identifier: Apache-2.0
#pragma once

// Flat key=value run configuration shared by every command. Lines are `key = value`;
// `#` starts a comment. Unknown keys and unparsable values are rejected.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "retain/data/pipeline.hpp"
#include "retain/train/training.hpp"

namespace retain::cli {

struct RunConfig {
  // Preprocessing.
  data::PipelineConfig pipeline;
  data::SplitSpec split;
  int fold = -1;            // -1: fixed split; otherwise the k-fold rotation index
  std::size_t folds = 5;

  // Models.
  std::size_t embed_dim = 64;
  std::size_t alpha_hidden = 128;
  std::size_t beta_hidden = 128;
  bool reverse_time = false;
  std::size_t std_hidden = 128;
  std::size_t lstm_hidden = 256;
  double lstm_l2 = 1e-4;

  // Optimisation; train.seed also seeds the synthetic cohort.
  train::TrainConfig train;

  // Synthetic cohort.
  std::size_t patients = 6;
  int days = 21;
  double missing_rate = 0.0;

  /// Sets one key from its text value. Throws ConfigurationError on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  /// Applies "key=value" assignments in order.
  void apply(const std::vector<std::string>& assignments);
  /// Cross-field checks. Throws ConfigurationError.
  void validate() const;
  /// Every key with its effective value, one `key = value` per line, in a fixed order.
  std::string to_text() const;

  static std::vector<std::string> keys();
  /// Throws MissingInputError when the file cannot be read and ConfigurationError on bad lines.
  static RunConfig from_file(const std::filesystem::path& path);
  static RunConfig from_text(const std::string& text, const std::string& origin = "config");
};

}  // namespace retain::cli
