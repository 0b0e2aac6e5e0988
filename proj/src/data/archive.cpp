// SPDX-License-Identifier: Apache-2.0
#include "retain/data/archive.hpp"

#include <fstream>
#include <string_view>

#include "retain/errors.hpp"

namespace retain::data {

namespace {

const char* kPrefixes[kVariables] = {"glucose", "cho", "insulin"};
const char* kSplitNames[3] = {"train", "valid", "test"};

std::string header(const PipelineConfig& cfg) {
  std::string h = "timestamp";
  for (const char* prefix : kPrefixes) {
    for (std::size_t i = 0; i < cfg.seq_len; ++i) h += "," + std::string(prefix) + "_" + std::to_string(i);
  }
  return h + ",target";
}

std::ofstream open_for_writing(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigurationError("cannot write " + path.string());
  return out;
}

}  // namespace

void write_samples_csv(std::ostream& out, std::span<const Sample> samples, const PipelineConfig& cfg) {
  out << header(cfg) << '\n';
  for (const Sample& s : samples) {
    if (s.x.rows() != cfg.seq_len || s.x.cols() != kVariables) {
      throw DimensionError("write_samples_csv: window " + s.x.shape_string() + " does not match seq_len " +
                           std::to_string(cfg.seq_len));
    }
    out << format_timestamp(s.target_time);
    for (std::size_t j = 0; j < kVariables; ++j)
      for (std::size_t i = 0; i < cfg.seq_len; ++i) out << ',' << format_double(s.x(i, j));
    out << ',' << format_double(s.y) << '\n';
  }
}

std::vector<Sample> read_samples_csv(std::istream& in, const PipelineConfig& cfg) {
  std::string line;
  if (!std::getline(in, line)) throw IngestionError("sample archive is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header(cfg)) {
    throw IngestionError("sample archive header does not match seq_len " + std::to_string(cfg.seq_len));
  }
  const std::size_t fields = 2 + kVariables * cfg.seq_len;
  const Minutes lead = static_cast<Minutes>(cfg.ph_steps) * cfg.period;
  std::vector<Sample> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    while (true) {
      const std::size_t comma = rest.find(',');
      f.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    const std::string where = "sample archive line " + std::to_string(line_no);
    if (f.size() != fields) {
      throw IngestionError(where + ": expected " + std::to_string(fields) + " fields, got " + std::to_string(f.size()));
    }
    Sample s;
    s.target_time = parse_timestamp(f[0]);
    s.anchor_time = s.target_time - lead;
    s.x = Matrix(cfg.seq_len, kVariables);
    std::size_t k = 1;
    for (std::size_t j = 0; j < kVariables; ++j)
      for (std::size_t i = 0; i < cfg.seq_len; ++i) s.x(i, j) = parse_double(f[k++], where);
    s.y = parse_double(f[k], where);
    out.push_back(std::move(s));
  }
  return out;
}

void write_archive(const std::filesystem::path& dir, const StandardizedSplits& data, const ArchiveMeta& meta) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigurationError("cannot create " + dir.string() + ": " + ec.message());
  const std::vector<Sample>* parts[3] = {&data.splits.train, &data.splits.valid, &data.splits.test};
  for (int k = 0; k < 3; ++k) {
    auto out = open_for_writing(dir / (std::string(kSplitNames[k]) + ".csv"));
    write_samples_csv(out, *parts[k], meta.pipeline);
  }
  const nlohmann::json doc = {{"patient", meta.patient_id},
                              {"seq_len", meta.pipeline.seq_len},
                              {"ph_steps", meta.pipeline.ph_steps},
                              {"period_min", meta.pipeline.period},
                              {"spike_threshold", meta.pipeline.spike_threshold},
                              {"variables", {"glucose", "CHO", "insulin"}},
                              {"scaling", to_json(data.scaling)}};
  auto out = open_for_writing(dir / "scaling.json");
  out << doc.dump(2) << '\n';
}

Archive read_archive(const std::filesystem::path& dir) {
  const auto meta_path = dir / "scaling.json";
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw MissingInputError("no preprocessed data at " + dir.string() + " (missing scaling.json)");
  Archive a;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(meta_in);
    a.meta.patient_id = doc.at("patient").get<std::string>();
    a.meta.pipeline.seq_len = doc.at("seq_len").get<std::size_t>();
    a.meta.pipeline.ph_steps = doc.at("ph_steps").get<std::size_t>();
    a.meta.pipeline.period = doc.at("period_min").get<Minutes>();
    a.meta.pipeline.spike_threshold = doc.at("spike_threshold").get<double>();
    a.meta.scaling = scaling_from_json(doc.at("scaling"));
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(meta_path.string() + ": " + e.what());
  }
  std::vector<Sample>* parts[3] = {&a.splits.train, &a.splits.valid, &a.splits.test};
  for (int k = 0; k < 3; ++k) {
    const auto path = dir / (std::string(kSplitNames[k]) + ".csv");
    std::ifstream in(path);
    if (!in) throw MissingInputError("missing " + path.string());
    *parts[k] = read_samples_csv(in, a.meta.pipeline);
  }
  return a;
}

}  // namespace retain::data
