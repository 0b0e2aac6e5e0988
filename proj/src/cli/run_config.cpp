// SPDX-License-Identifier: Apache-2.0
#include "retain/cli/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "retain/errors.hpp"

namespace retain::cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
T parse_integer(const std::string& key, const std::string& text) {
  T v{};
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || r.ec != std::errc{} || r.ptr != text.data() + text.size()) {
    throw ConfigurationError("config key '" + key + "': '" + text + "' is not a valid integer");
  }
  return v;
}

double parse_real(const std::string& key, const std::string& text) {
  try {
    return data::parse_double(text, "config key '" + key + "'");
  } catch (const IngestionError& e) {
    throw ConfigurationError(e.what());
  }
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigurationError("config key '" + key + "': expected true or false, got '" + text + "'");
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define RETAIN_INT_FIELD(NAME, MEMBER, TYPE)                                                          \
  Field {                                                                                             \
    NAME, [](RunConfig& c, const std::string& v) { c.MEMBER = parse_integer<TYPE>(NAME, v); },        \
        [](const RunConfig& c) { return std::to_string(c.MEMBER); }                                   \
  }
#define RETAIN_REAL_FIELD(NAME, MEMBER)                                                               \
  Field {                                                                                             \
    NAME, [](RunConfig& c, const std::string& v) { c.MEMBER = parse_real(NAME, v); },                 \
        [](const RunConfig& c) { return data::format_double(c.MEMBER); }                              \
  }
#define RETAIN_BOOL_FIELD(NAME, MEMBER)                                                               \
  Field {                                                                                             \
    NAME, [](RunConfig& c, const std::string& v) { c.MEMBER = parse_bool(NAME, v); },                 \
        [](const RunConfig& c) { return std::string(c.MEMBER ? "true" : "false"); }                   \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      RETAIN_INT_FIELD("seq_len", pipeline.seq_len, std::size_t),
      RETAIN_INT_FIELD("ph_steps", pipeline.ph_steps, std::size_t),
      RETAIN_INT_FIELD("period_min", pipeline.period, data::Minutes),
      RETAIN_REAL_FIELD("spike_threshold", pipeline.spike_threshold),
      RETAIN_REAL_FIELD("test_days", split.test_days),
      RETAIN_REAL_FIELD("valid_fraction", split.valid_fraction),
      RETAIN_INT_FIELD("fold", fold, int),
      RETAIN_INT_FIELD("folds", folds, std::size_t),
      RETAIN_INT_FIELD("embed_dim", embed_dim, std::size_t),
      RETAIN_INT_FIELD("alpha_hidden", alpha_hidden, std::size_t),
      RETAIN_INT_FIELD("beta_hidden", beta_hidden, std::size_t),
      RETAIN_BOOL_FIELD("reverse_time", reverse_time),
      RETAIN_INT_FIELD("std_hidden", std_hidden, std::size_t),
      RETAIN_INT_FIELD("lstm_hidden", lstm_hidden, std::size_t),
      RETAIN_REAL_FIELD("lstm_l2", lstm_l2),
      RETAIN_INT_FIELD("batch_size", train.batch_size, std::size_t),
      RETAIN_REAL_FIELD("lr_source", train.lr_source),
      RETAIN_REAL_FIELD("lr_finetune", train.lr_finetune),
      RETAIN_INT_FIELD("patience_source", train.patience_source, std::size_t),
      RETAIN_INT_FIELD("patience_finetune", train.patience_finetune, std::size_t),
      RETAIN_REAL_FIELD("lambda", train.lambda),
      RETAIN_INT_FIELD("max_epochs", train.max_epochs, std::size_t),
      RETAIN_INT_FIELD("seed", train.seed, std::uint64_t),
      RETAIN_INT_FIELD("patients", patients, std::size_t),
      RETAIN_INT_FIELD("days", days, int),
      RETAIN_REAL_FIELD("missing_rate", missing_rate),
  };
  return all;
}

#undef RETAIN_INT_FIELD
#undef RETAIN_REAL_FIELD
#undef RETAIN_BOOL_FIELD

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (f.key == key) {
      f.set(*this, trim(value));
      return;
    }
  }
  throw ConfigurationError("unknown config key '" + key + "'");
}

void RunConfig::apply(const std::vector<std::string>& assignments) {
  for (const std::string& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw ConfigurationError("expected key=value, got '" + a + "'");
    set(trim(a.substr(0, eq)), a.substr(eq + 1));
  }
}

void RunConfig::validate() const {
  pipeline.validate();
  split.validate();
  train.validate();
  if (folds < 2) throw ConfigurationError("folds must be at least 2");
  if (fold < -1 || (fold >= 0 && static_cast<std::size_t>(fold) >= folds)) {
    throw ConfigurationError("fold must be -1 or in [0, folds)");
  }
  if (embed_dim < 1 || alpha_hidden < 1 || beta_hidden < 1 || std_hidden < 1 || lstm_hidden < 1) {
    throw ConfigurationError("model sizes must be positive");
  }
  if (!(lstm_l2 >= 0.0)) throw ConfigurationError("lstm_l2 must be non-negative");
  if (patients < 1) throw ConfigurationError("patients must be at least 1");
  if (days < 1) throw ConfigurationError("days must be at least 1");
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) throw ConfigurationError("missing_rate must be in [0, 1)");
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  for (const Field& f : fields()) out << f.key << " = " << f.get(*this) << '\n';
  return out.str();
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> k;
  for (const Field& f : fields()) k.push_back(f.key);
  return k;
}

RunConfig RunConfig::from_text(const std::string& text, const std::string& origin) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigurationError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      c.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigurationError& e) {
      throw ConfigurationError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return c;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str(), path.string());
}

}  // namespace retain::cli
