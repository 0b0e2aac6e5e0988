// SPDX-License-Identifier: Apache-2.0
#include "retain/cli/commands.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "retain/baseline/baselines.hpp"
#include "retain/core/retain.hpp"
#include "retain/data/archive.hpp"
#include "retain/errors.hpp"
#include "retain/synth/generator.hpp"

namespace retain::cli {

namespace fs = std::filesystem;
using data::Sample;
using num::Matrix;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ConfigurationError("cannot create output directory " + dir.string() + (ec ? ": " + ec.message() : ""));
  }
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigurationError("cannot write " + path.string());
  out << content;
  if (!out) throw ConfigurationError("failed writing " + path.string());
}

void echo_config(const fs::path& dir, const RunConfig& cfg) { write_file(dir / "run_config.txt", cfg.to_text()); }

struct CommonOptions {
  std::string config_file;
  std::vector<std::string> sets;
  std::string out_dir;

  RunConfig load() const {
    RunConfig c = config_file.empty() ? RunConfig{} : RunConfig::from_file(config_file);
    c.apply(sets);
    return c;
  }
};

void add_common(CLI::App* cmd, CommonOptions& o, bool needs_out = true) {
  cmd->add_option("--config", o.config_file, "key=value run configuration file");
  cmd->add_option("--set", o.sets, "override a config key, e.g. --set lr_source=0.001")->allow_extra_args(false);
  auto* out = cmd->add_option("--out", o.out_dir, "output directory");
  if (needs_out) out->required();
}

std::string csv_header(std::size_t seq_len, const std::string& lead) {
  std::string h = lead;
  for (const char* v : {"glucose", "cho", "insulin"})
    for (std::size_t i = 0; i < seq_len; ++i) h += "," + std::string(v) + "_" + std::to_string(i);
  return h;
}

// ---------------------------------------------------------------------------
// Predictors

class ModelPredictor final : public Predictor {
 public:
  explicit ModelPredictor(std::unique_ptr<Model> m) : model_(std::move(m)) {}
  std::string format() const override { return model_->format(); }
  std::vector<double> predict(std::span<const Sample> samples) const override {
    std::vector<const Matrix*> windows;
    windows.reserve(samples.size());
    for (const Sample& s : samples) windows.push_back(&s.x);
    return retain::predict(*model_, windows);
  }
  const Model* model() const override { return model_.get(); }

 private:
  std::unique_ptr<Model> model_;
};

class StubPredictor final : public Predictor {
 public:
  explicit StubPredictor(std::string kind) : kind_(std::move(kind)) {}
  std::string format() const override { return "stub-v1:" + kind_; }
  std::vector<double> predict(std::span<const Sample> samples) const override {
    std::vector<double> out;
    out.reserve(samples.size());
    // Standardized targets: the training mean is 0.
    for (const Sample& s : samples) out.push_back(kind_ == "oracle" ? s.y : 0.0);
    return out;
  }

 private:
  std::string kind_;
};

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
  CommonOptions common;
  std::string patients, days, seed, missing_rate;
};

int cmd_synth(const SynthOptions& o, std::ostream& out) {
  RunConfig cfg = o.common.load();
  if (!o.patients.empty()) cfg.set("patients", o.patients);
  if (!o.days.empty()) cfg.set("days", o.days);
  if (!o.seed.empty()) cfg.set("seed", o.seed);
  if (!o.missing_rate.empty()) cfg.set("missing_rate", o.missing_rate);
  cfg.validate();
  const fs::path dir = o.common.out_dir;
  ensure_dir(dir);
  nlohmann::json manifest = {{"seed", cfg.train.seed}, {"days", cfg.days}, {"patients", nlohmann::json::array()}};
  for (std::size_t i = 0; i < cfg.patients; ++i) {
    synth::PatientProfile p = synth::make_profile(i, cfg.train.seed);
    p.missing_rate = cfg.missing_rate;
    const auto series = synth::generate_patient(p, cfg.days, synth::default_start());
    std::ostringstream csv;
    data::write_series_csv(csv, series);
    write_file(dir / (p.id + ".csv"), csv.str());
    manifest["patients"].push_back(synth::to_json(p));
    out << "wrote " << (dir / (p.id + ".csv")).string() << " (" << series.size() << " readings)\n";
  }
  write_file(dir / "profiles.json", manifest.dump(2) + "\n");
  echo_config(dir, cfg);
  return kOk;
}

// ---------------------------------------------------------------------------
// preprocess

struct PreprocessOptions {
  CommonOptions common;
  std::string input;
};

int cmd_preprocess(const PreprocessOptions& o, std::ostream& out) {
  const RunConfig cfg = o.common.load();
  cfg.validate();
  const fs::path in_dir = o.input;
  if (!fs::is_directory(in_dir)) throw MissingInputError("input directory " + in_dir.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(in_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw MissingInputError("no patient CSV files in " + in_dir.string());
  const fs::path dir = o.common.out_dir;
  ensure_dir(dir);
  for (const fs::path& f : files) {
    const auto series = data::load_series(f);
    const auto samples = data::prepare_samples(series, cfg.pipeline);
    data::SplitSamples parts;
    try {
      parts = cfg.fold < 0 ? data::split(samples, cfg.split)
                           : data::kfold_splits(samples, cfg.split, cfg.folds)[static_cast<std::size_t>(cfg.fold)];
    } catch (const ConfigurationError& e) {
      throw ConfigurationError("patient " + series.patient_id + ": " + e.what());
    }
    const auto standardized = data::standardize(parts);
    data::write_archive(dir / series.patient_id, standardized, {series.patient_id, cfg.pipeline, standardized.scaling});
    out << series.patient_id << ": train " << parts.train.size() << ", valid " << parts.valid.size() << ", test "
        << parts.test.size() << "\n";
  }
  echo_config(dir, cfg);
  return kOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  CommonOptions common;
  std::string data_dir, target, model = "retain";
  std::vector<std::string> sources;
};

train::PatientData patient_data(const data::Archive& a) {
  train::PatientData p;
  for (const Sample& s : a.splits.train) p.train.add(s.x, s.y);
  for (const Sample& s : a.splits.valid) p.valid.add(s.x, s.y);
  return p;
}

nlohmann::json result_json(const train::TrainResult& r) {
  return {{"epochs", r.history.size()},
          {"initial_valid_mse", r.initial_valid_mse},
          {"best_valid_mse", r.best_valid_mse},
          {"best_epoch", r.best_epoch}};
}

int cmd_train(const TrainOptions& o, std::ostream& out) {
  const RunConfig cfg = o.common.load();
  cfg.validate();
  const fs::path root = o.data_dir;
  const data::Archive target = data::read_archive(root / o.target);
  std::vector<data::Archive> sources;
  for (const std::string& s : o.sources) {
    if (s == o.target) throw ConfigurationError("target patient " + s + " is also listed as a source");
    sources.push_back(data::read_archive(root / s));
  }
  const std::size_t seq_len = target.meta.pipeline.seq_len;
  for (const auto& s : sources) {
    if (s.meta.pipeline.seq_len != seq_len) {
      throw DimensionError("patient " + s.meta.patient_id + " was preprocessed with a different seq_len");
    }
  }
  auto model = make_model(o.model, cfg, seq_len, data::kVariables, sources.size());

  std::vector<train::EpochRecord> history;
  nlohmann::json summary = {{"model", model->format()}, {"target", o.target}, {"sources", o.sources}};
  const train::PatientData target_data = patient_data(target);
  if (sources.empty()) {
    const auto r = train::train_supervised(*model, std::span(&target_data, 1), cfg.train, cfg.train.lr_source,
                                           cfg.train.patience_source, "target");
    history = r.history;
    summary["target_only"] = result_json(r);
  } else {
    std::vector<train::PatientData> src;
    for (const auto& s : sources) src.push_back(patient_data(s));
    const auto rs = train::train_source(*model, src, cfg.train);
    const auto rf = train::finetune(*model, target_data, cfg.train);
    history = rs.history;
    history.insert(history.end(), rf.history.begin(), rf.history.end());
    summary["source"] = result_json(rs);
    summary["finetune"] = result_json(rf);
  }

  const fs::path dir = o.common.out_dir;
  ensure_dir(dir);
  write_file(dir / "model.json", model_to_json(*model).dump(1) + "\n");
  std::ostringstream h;
  train::write_history_csv(h, history);
  write_file(dir / "history.csv", h.str());
  write_file(dir / "train_summary.json", summary.dump(2) + "\n");
  echo_config(dir, cfg);
  out << "trained " << model->format() << " for " << o.target << " (" << history.size() << " epochs), wrote "
      << (dir / "model.json").string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOptions {
  CommonOptions common;
  std::string model_file, data_dir, split = "test";
};

const std::vector<Sample>& pick_split(const data::Archive& a, const std::string& name) {
  if (name == "train") return a.splits.train;
  if (name == "valid") return a.splits.valid;
  if (name == "test") return a.splits.test;
  throw ConfigurationError("unknown split '" + name + "'");
}

int cmd_evaluate(const EvaluateOptions& o, std::ostream& out) {
  const RunConfig cfg = o.common.load();
  const auto predictor = load_predictor(o.model_file);
  const data::Archive archive = data::read_archive(o.data_dir);
  const auto& samples = pick_split(archive, o.split);
  const Evaluation e = evaluate_samples(*predictor, samples, archive.meta.scaling);

  const fs::path dir = o.common.out_dir;
  ensure_dir(dir);
  const nlohmann::json metrics = {{"patient", archive.meta.patient_id}, {"split", o.split},
                                  {"model", predictor->format()},      {"n", e.series.size()},
                                  {"rmse", e.rmse},                    {"mape", e.mape},
                                  {"cgega", eval::to_json(e.cgega)}};
  write_file(dir / "metrics.json", metrics.dump(2) + "\n");
  write_file(dir / "cgega.json", eval::to_json(e.cgega).dump(2) + "\n");
  std::ostringstream points;
  eval::write_points_csv(points, e.cgega);
  write_file(dir / "points.csv", points.str());
  echo_config(dir, cfg);
  const auto ap = e.cgega.overall.rate(eval::CgClass::AP);
  out << archive.meta.patient_id << " " << o.split << ": RMSE " << e.rmse << " mg/dL, MAPE " << e.mape
      << " %, AP " << (ap ? *ap * 100.0 : 0.0) << " %\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// explain

struct ExplainOptions {
  CommonOptions common;
  std::string model_file, data_dir, split = "test", event;
  long sample = -1;
  std::size_t max_offset = 12;
};

std::string matrix_rows_csv(const Matrix& m, data::Minutes period, const std::string& lead_header) {
  std::ostringstream out;
  out << lead_header << ",minutes_before_last,glucose,CHO,insulin\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    out << i << ',' << static_cast<data::Minutes>(m.rows() - 1 - i) * period;
    for (std::size_t j = 0; j < m.cols(); ++j) out << ',' << data::format_double(m(i, j));
    out << '\n';
  }
  return out.str();
}

int cmd_explain(const ExplainOptions& o, std::ostream& out) {
  const RunConfig cfg = o.common.load();
  const auto predictor = load_predictor(o.model_file);
  const auto* retain_model = dynamic_cast<const core::RetainModel*>(predictor->model());
  if (retain_model == nullptr) {
    throw CapabilityError("model is not attributable: " + predictor->format() +
                          " has no additive contribution decomposition");
  }
  const data::Archive archive = data::read_archive(o.data_dir);
  const auto& samples = pick_split(archive, o.split);
  if (samples.empty()) throw MissingInputError("split '" + o.split + "' has no samples");
  if (o.sample >= static_cast<long>(samples.size())) {
    throw ArgumentError("--sample " + std::to_string(o.sample) + " is out of range (split has " +
                        std::to_string(samples.size()) + " samples)");
  }
  std::size_t event_column = 0;
  if (!o.event.empty()) {
    if (o.event == "cho") event_column = data::kCho;
    else if (o.event == "insulin") event_column = data::kInsulin;
    else throw ArgumentError("--event must be cho or insulin");
  }

  const auto& params = retain_model->params();
  const auto& rc = retain_model->config();
  const data::Minutes period = archive.meta.pipeline.period;
  const fs::path dir = o.common.out_dir;
  ensure_dir(dir);

  std::vector<Matrix> normalized, raw;
  std::vector<std::size_t> kept;
  std::ostringstream norm_csv;
  norm_csv << csv_header(rc.seq_len, "sample,timestamp") << '\n';
  std::size_t degenerate = 0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const Matrix& x = samples[k].x;
    const auto trace = core::forward(x, params, rc);
    const auto cmap = core::contributions(x, trace, params);
    if (static_cast<long>(k) == o.sample) {
      std::ostringstream c;
      c << "step,minutes_before_last,glucose,CHO,insulin\n";
      for (std::size_t i = 0; i < cmap.omega.rows(); ++i) {
        c << i << ',' << static_cast<data::Minutes>(cmap.omega.rows() - 1 - i) * period;
        for (std::size_t j = 0; j < cmap.omega.cols(); ++j) c << ',' << data::format_double(cmap.omega(i, j));
        c << '\n';
      }
      c << "bias,," << data::format_double(cmap.bias) << ",,\n";
      write_file(dir / ("contributions_" + std::to_string(k) + ".csv"), c.str());
      const nlohmann::json info = {
          {"sample", k},
          {"timestamp", data::format_timestamp(samples[k].target_time)},
          {"y_hat_standardized", trace.y_hat},
          {"y_hat_mgdl", data::destandardize_target(trace.y_hat, archive.meta.scaling)},
          {"y_true_mgdl", data::destandardize_target(samples[k].y, archive.meta.scaling)},
          {"bias", cmap.bias},
          {"alphas", std::vector<double>(trace.alphas.values().begin(), trace.alphas.values().end())}};
      write_file(dir / ("sample_" + std::to_string(k) + ".json"), info.dump(2) + "\n");
    }
    Matrix n;
    try {
      n = core::normalized_contributions(cmap);
    } catch (const DegenerateAttributionError&) {
      ++degenerate;
      continue;
    }
    norm_csv << k << ',' << data::format_timestamp(samples[k].target_time);
    for (std::size_t j = 0; j < n.cols(); ++j)
      for (std::size_t i = 0; i < n.rows(); ++i) norm_csv << ',' << data::format_double(n(i, j));
    norm_csv << '\n';
    normalized.push_back(std::move(n));
    raw.push_back(data::destandardize_window(x, archive.meta.scaling));
    kept.push_back(k);
  }
  if (degenerate > 0) spdlog::warn("{} samples have all-zero contributions and were left out", degenerate);
  if (normalized.empty()) throw EvaluationError("no sample has a non-degenerate contribution map");

  write_file(dir / "normalized.csv", norm_csv.str());
  write_file(dir / "aggregate_mean.csv",
             matrix_rows_csv(core::aggregate_attributions(normalized, core::Aggregate::Mean), period, "step"));
  write_file(dir / "aggregate_max.csv",
             matrix_rows_csv(core::aggregate_attributions(normalized, core::Aggregate::Max), period, "step"));

  if (!o.event.empty()) {
    // Raw event sizes are recovered from standardized windows, so allow for rounding.
    constexpr double kEventThreshold = 1e-6;
    const auto profile =
        core::event_conditioned_attributions(normalized, raw, event_column, o.max_offset, kEventThreshold);
    const Matrix background = core::event_free_background(normalized, raw, event_column, kEventThreshold);
    std::ostringstream e;
    e << "offset_steps,offset_minutes,count,event_row_glucose,event_row_CHO,event_row_insulin,"
         "background_row_glucose,background_row_CHO,background_row_insulin\n";
    for (const auto& off : profile.offsets) {
      const std::size_t row = rc.seq_len - 1 - off.offset_steps;
      e << off.offset_steps << ',' << static_cast<data::Minutes>(off.offset_steps) * period << ',' << off.count;
      for (std::size_t j = 0; j < data::kVariables; ++j) e << ',' << data::format_double(off.mean(row, j));
      for (std::size_t j = 0; j < data::kVariables; ++j) {
        e << ',';
        if (!background.empty()) e << data::format_double(background(row, j));
      }
      e << '\n';
    }
    write_file(dir / ("event_" + o.event + ".csv"), e.str());
    if (profile.offsets.empty()) spdlog::warn("no {} events found in the {} split", o.event, o.split);
  }
  echo_config(dir, cfg);
  out << "explained " << normalized.size() << " samples of " << archive.meta.patient_id << " into " << dir.string()
      << "\n";
  return kOk;
}

}  // namespace

// ---------------------------------------------------------------------------

std::unique_ptr<Model> make_model(const std::string& kind, const RunConfig& cfg, std::size_t seq_len,
                                  std::size_t input_dim, std::size_t n_classes) {
  num::Rng rng(cfg.train.seed);
  if (kind == "retain") {
    core::RetainConfig c;
    c.seq_len = seq_len;
    c.input_dim = input_dim;
    c.embed_dim = cfg.embed_dim;
    c.alpha_hidden = cfg.alpha_hidden;
    c.beta_hidden = cfg.beta_hidden;
    c.n_classes = n_classes;
    c.reverse_time = cfg.reverse_time;
    return std::make_unique<core::RetainModel>(c, rng);
  }
  if (kind == "stdattn") {
    return std::make_unique<baseline::StdAttnModel>(baseline::StdAttnConfig{seq_len, input_dim, cfg.std_hidden}, rng);
  }
  if (kind == "lstm") {
    return std::make_unique<baseline::LstmRegModel>(
        baseline::LstmRegConfig{seq_len, input_dim, cfg.lstm_hidden, n_classes, cfg.lstm_l2}, rng);
  }
  throw ConfigurationError("unknown model kind '" + kind + "' (expected retain, stdattn or lstm)");
}

std::unique_ptr<Predictor> model_predictor(std::unique_ptr<Model> model) {
  return std::make_unique<ModelPredictor>(std::move(model));
}

std::unique_ptr<Predictor> load_predictor(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("model file " + path.string() + " does not exist");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError("model file " + path.string() + " is not valid JSON: " + e.what());
  }
  const std::string format = doc.value("format", "");
  try {
    if (format == "retain-v1") return model_predictor(std::make_unique<core::RetainModel>(core::RetainModel::from_json(doc)));
    if (format == "stdattn-v1") {
      return model_predictor(std::make_unique<baseline::StdAttnModel>(baseline::StdAttnModel::from_json(doc)));
    }
    if (format == "lstmreg-v1") {
      return model_predictor(std::make_unique<baseline::LstmRegModel>(baseline::LstmRegModel::from_json(doc)));
    }
    if (format == "stub-v1") {
      const std::string kind = doc.value("kind", "");
      if (kind != "oracle" && kind != "mean") throw IngestionError("stub model kind must be oracle or mean");
      return std::make_unique<StubPredictor>(kind);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError("model file " + path.string() + ": " + e.what());
  }
  throw IngestionError("model file " + path.string() + " has unknown format '" + format + "'");
}

Evaluation evaluate_samples(const Predictor& predictor, std::span<const Sample> samples, const data::Scaling& scaling) {
  const auto preds = predictor.predict(samples);
  std::vector<eval::TimedValue> p, t;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (!std::isfinite(preds[k])) throw EvaluationError("non-finite prediction for sample " + std::to_string(k));
    p.push_back({samples[k].target_time, preds[k]});
    t.push_back({samples[k].target_time, samples[k].y});
  }
  Evaluation e;
  e.series = eval::reconstruct(p, t, scaling);
  e.rmse = eval::rmse(e.series);
  e.mape = eval::mape(e.series);
  e.cgega = eval::cg_ega_report(e.series);
  return e;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const CapabilityError*>(&e)) return kCapability;
  if (dynamic_cast<const TrainingError*>(&e) || dynamic_cast<const EvaluationError*>(&e)) return kNumericFailure;
  if (dynamic_cast<const MissingInputError*>(&e) || dynamic_cast<const IngestionError*>(&e) ||
      dynamic_cast<const DimensionError*>(&e)) {
    return kMissingInput;
  }
  if (dynamic_cast<const ConfigurationError*>(&e) || dynamic_cast<const ArgumentError*>(&e)) return kUsage;
  return 1;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"RETAIN glucose prediction toolkit: synth, preprocess, train, evaluate, explain", "retain"};
  app.require_subcommand(1);

  SynthOptions synth_o;
  auto* synth = app.add_subcommand("synth", "generate a synthetic patient cohort");
  add_common(synth, synth_o.common);
  synth->add_option("--patients", synth_o.patients, "number of patients");
  synth->add_option("--days", synth_o.days, "days per patient");
  synth->add_option("--seed", synth_o.seed, "cohort seed");
  synth->add_option("--missing-rate", synth_o.missing_rate, "probability of dropping a glucose reading");

  PreprocessOptions pre_o;
  auto* pre = app.add_subcommand("preprocess", "clean, resample, window, split and standardize patient CSVs");
  add_common(pre, pre_o.common);
  pre->add_option("--input", pre_o.input, "directory of patient CSV files")->required();

  TrainOptions train_o;
  auto* trn = app.add_subcommand("train", "train on source patients, then finetune on the target");
  add_common(trn, train_o.common);
  trn->add_option("--data", train_o.data_dir, "preprocessed data root")->required();
  trn->add_option("--target", train_o.target, "target patient id")->required();
  trn->add_option("--sources", train_o.sources, "comma-separated source patient ids")->delimiter(',');
  trn->add_option("--model", train_o.model, "retain, stdattn or lstm")
      ->check(CLI::IsMember({"retain", "stdattn", "lstm"}));

  EvaluateOptions eval_o;
  auto* evl = app.add_subcommand("evaluate", "RMSE, MAPE and CG-EGA on one patient's split");
  add_common(evl, eval_o.common);
  evl->add_option("--model", eval_o.model_file, "model JSON file")->required();
  evl->add_option("--data", eval_o.data_dir, "preprocessed patient directory")->required();
  evl->add_option("--split", eval_o.split, "train, valid or test")->check(CLI::IsMember({"train", "valid", "test"}));

  ExplainOptions expl_o;
  auto* expl = app.add_subcommand("explain", "contribution maps and their aggregates for a RETAIN model");
  add_common(expl, expl_o.common);
  expl->add_option("--model", expl_o.model_file, "RETAIN model JSON file")->required();
  expl->add_option("--data", expl_o.data_dir, "preprocessed patient directory")->required();
  expl->add_option("--split", expl_o.split, "train, valid or test")->check(CLI::IsMember({"train", "valid", "test"}));
  expl->add_option("--sample", expl_o.sample, "write the contribution map of this sample index")
      ->check(CLI::NonNegativeNumber);
  expl->add_option("--event", expl_o.event, "event-conditioned contributions for cho or insulin")
      ->check(CLI::IsMember({"cho", "insulin"}));
  expl->add_option("--max-offset", expl_o.max_offset, "largest event offset in 5-minute steps");

  std::vector<std::string> argv_store{"retain"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_o, out);
    if (pre->parsed()) return cmd_preprocess(pre_o, out);
    if (trn->parsed()) return cmd_train(train_o, out);
    if (evl->parsed()) return cmd_evaluate(eval_o, out);
    if (expl->parsed()) return cmd_explain(expl_o, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kUsage;
}

}  // namespace retain::cli
