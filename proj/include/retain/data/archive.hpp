// SPDX-License-Identifier: Apache-2.0
#pragma once

// On-disk layout of preprocessed samples: <dir>/{train,valid,test}.csv plus scaling.json.
// Each CSV row is the target timestamp, the window flattened variable-major and
// oldest-first (glucose_0..glucose_{L-1}, cho_0.., insulin_0..), then the target.

#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "retain/data/pipeline.hpp"

namespace retain::data {

struct ArchiveMeta {
  std::string patient_id;
  PipelineConfig pipeline;
  Scaling scaling;
};

void write_samples_csv(std::ostream& out, std::span<const Sample> samples, const PipelineConfig& cfg);
/// Throws IngestionError on a malformed header or row.
std::vector<Sample> read_samples_csv(std::istream& in, const PipelineConfig& cfg);

void write_archive(const std::filesystem::path& dir, const StandardizedSplits& data, const ArchiveMeta& meta);

struct Archive {
  ArchiveMeta meta;
  SplitSamples splits;
};

/// Throws MissingInputError when the directory or one of its files is absent.
Archive read_archive(const std::filesystem::path& dir);

}  // namespace retain::data
