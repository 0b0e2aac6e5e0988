// SPDX-License-Identifier: Apache-2.0
#include "retain/data/series.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "retain/errors.hpp"

namespace retain::data {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

int parse_int(std::string_view s, std::string_view whole) {
  int v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
    throw IngestionError("malformed timestamp '" + std::string(whole) + "'");
  }
  return v;
}

}  // namespace

Minutes parse_timestamp(std::string_view text) {
  const std::string_view s = trim(text);
  // YYYY-MM-DD?HH:MM[:SS]
  if (s.size() < 16 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':') {
    throw IngestionError("malformed timestamp '" + std::string(text) + "'");
  }
  const int year = parse_int(s.substr(0, 4), text);
  const int month = parse_int(s.substr(5, 2), text);
  const int day = parse_int(s.substr(8, 2), text);
  const int hour = parse_int(s.substr(11, 2), text);
  const int minute = parse_int(s.substr(14, 2), text);
  if (s.size() > 16) {
    if (s[16] != ':' || s.size() < 19) throw IngestionError("malformed timestamp '" + std::string(text) + "'");
    const int second = parse_int(s.substr(17, 2), text);
    std::string_view rest = s.substr(19);
    if (!rest.empty() && rest.front() == '.') {
      rest.remove_prefix(1);
      for (char ch : rest) {
        if (ch < '0' || ch > '9') throw IngestionError("malformed timestamp '" + std::string(text) + "'");
      }
      rest = {};
    }
    if (!rest.empty() || second > 59) throw IngestionError("malformed timestamp '" + std::string(text) + "'");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                                        std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59) {
    throw IngestionError("invalid calendar timestamp '" + std::string(text) + "'");
  }
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  return static_cast<Minutes>(days) * 1440 + hour * 60 + minute;
}

std::string format_timestamp(Minutes t) {
  Minutes days = t / 1440;
  Minutes rem = t % 1440;
  if (rem < 0) {
    rem += 1440;
    days -= 1;
  }
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:00", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 60),
                static_cast<int>(rem % 60));
  return buf;
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(std::string_view field, const std::string& what) {
  const std::string_view s = trim(field);
  double v = 0.0;
  const char* begin = s.data();
  if (!s.empty() && s.front() == '+') ++begin;
  const auto r = std::from_chars(begin, s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
    throw IngestionError("cannot parse " + what + " from '" + std::string(field) + "'");
  }
  return v;
}

void GlucoseSeries::push_back(Minutes t, double g, double c, double i) {
  time.push_back(t);
  glucose.push_back(g);
  cho.push_back(c);
  insulin.push_back(i);
}

void GlucoseSeries::validate() const {
  const std::size_t n = time.size();
  if (glucose.size() != n || cho.size() != n || insulin.size() != n) {
    throw IngestionError("series " + patient_id + ": column lengths differ");
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0 && time[k] <= time[k - 1]) {
      throw IngestionError("series " + patient_id + ": timestamps not strictly increasing at " +
                           format_timestamp(time[k]));
    }
    if (!is_missing(glucose[k]) && !(glucose[k] > 0.0 && glucose[k] < 600.0)) {
      throw IngestionError("series " + patient_id + ": glucose " + format_double(glucose[k]) +
                           " outside (0, 600) at " + format_timestamp(time[k]));
    }
    if (!(cho[k] >= 0.0) || !std::isfinite(cho[k]) || !(insulin[k] >= 0.0) || !std::isfinite(insulin[k])) {
      throw IngestionError("series " + patient_id + ": negative or non-finite event at " + format_timestamp(time[k]));
    }
  }
}

bool GlucoseSeries::operator==(const GlucoseSeries& other) const {
  if (patient_id != other.patient_id || time != other.time || cho != other.cho || insulin != other.insulin ||
      glucose.size() != other.glucose.size()) {
    return false;
  }
  for (std::size_t k = 0; k < glucose.size(); ++k) {
    const bool a = is_missing(glucose[k]);
    const bool b = is_missing(other.glucose[k]);
    if (a != b || (!a && glucose[k] != other.glucose[k])) return false;
  }
  return true;
}

GlucoseSeries read_series_csv(std::istream& in, const std::string& patient_id) {
  std::string line;
  if (!std::getline(in, line)) throw IngestionError("series " + patient_id + ": empty file");
  const auto header = split_fields(line);
  if (header.size() != 4 || header[0] != "datetime" || header[1] != "glucose" || header[2] != "CHO" ||
      header[3] != "insulin") {
    throw IngestionError("series " + patient_id + ": expected header datetime,glucose,CHO,insulin");
  }
  GlucoseSeries s;
  s.patient_id = patient_id;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_fields(line);
    const std::string where = patient_id + " line " + std::to_string(line_no);
    if (f.size() != 4) throw IngestionError(where + ": expected 4 fields, got " + std::to_string(f.size()));
    const Minutes t = parse_timestamp(f[0]);
    const double g = f[1].empty() ? kMissing : parse_double(f[1], "glucose at " + where);
    const double c = f[2].empty() ? 0.0 : parse_double(f[2], "CHO at " + where);
    const double i = f[3].empty() ? 0.0 : parse_double(f[3], "insulin at " + where);
    if (!s.time.empty() && t <= s.time.back()) {
      throw IngestionError(where + ": duplicate or out-of-order timestamp " + format_timestamp(t));
    }
    s.push_back(t, g, c, i);
  }
  s.validate();
  return s;
}

GlucoseSeries load_series(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path.string());
  return read_series_csv(in, path.stem().string());
}

void write_series_csv(std::ostream& out, const GlucoseSeries& series) {
  out << "datetime,glucose,CHO,insulin\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    out << format_timestamp(series.time[k]) << ',';
    if (!is_missing(series.glucose[k])) out << format_double(series.glucose[k]);
    out << ',' << format_double(series.cho[k]) << ',' << format_double(series.insulin[k]) << '\n';
  }
}

}  // namespace retain::data
