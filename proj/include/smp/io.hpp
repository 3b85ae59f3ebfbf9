#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "smp/errors.hpp"
#include "smp/info.hpp"
#include "smp/trace.hpp"

namespace smp::io {

using json = nlohmann::ordered_json;

// ---- trace CSV -------------------------------------------------------------
// Header: slot,load_kw[,res_kw][,app_<name>...]  one row per slot.

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline LoadTrace read_trace_csv(std::istream& in, double slot_hours,
                                const std::string& origin = "trace") {
  std::string line;
  if (!std::getline(in, line))
    throw ParseError(origin + ": empty file");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "slot" || header[1] != "load_kw")
    throw ParseError(origin + " line 1: header must start with 'slot,load_kw'");
  int res_col = -1;
  std::vector<int> app_cols;
  LoadTrace trace;
  trace.slot_hours = slot_hours;
  for (std::size_t c = 2; c < header.size(); ++c) {
    if (header[c] == "res_kw") {
      if (res_col >= 0 || !app_cols.empty())
        throw ParseError(origin + " line 1: res_kw must come right after load_kw");
      res_col = int(c);
    } else if (header[c].rfind("app_", 0) == 0) {
      app_cols.push_back(int(c));
      trace.appliance_names.push_back(header[c].substr(4));
    } else {
      throw ParseError(origin + " line 1: unknown column '" + header[c] + "'");
    }
  }
  trace.appliance_kw.resize(app_cols.size());

  auto parse_double = [&](const std::string& s, int lineno, const std::string& field) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ParseError(origin + " line " + std::to_string(lineno) + ": bad " + field +
                       " value '" + s + "'");
    }
  };

  int lineno = 1;
  int expected_slot = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError(origin + " line " + std::to_string(lineno) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(cells.size()));
    const double slot = parse_double(cells[0], lineno, "slot");
    if (int(slot) != expected_slot)
      throw ParseError(origin + " line " + std::to_string(lineno) + ": slot " +
                       cells[0] + " out of order (expected " +
                       std::to_string(expected_slot) + ")");
    ++expected_slot;
    trace.load_kw.push_back(parse_double(cells[1], lineno, "load_kw"));
    if (res_col >= 0) trace.res_kw.push_back(parse_double(cells[res_col], lineno, "res_kw"));
    for (std::size_t a = 0; a < app_cols.size(); ++a)
      trace.appliance_kw[a].push_back(
          parse_double(cells[app_cols[a]], lineno, header[app_cols[a]]));
  }
  try {
    trace.validate();
  } catch (const ModelError& e) {
    throw ParseError(origin + ": " + e.what());
  }
  return trace;
}

inline LoadTrace read_trace_csv(const std::string& path, double slot_hours) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace file: " + path);
  return read_trace_csv(in, slot_hours, path);
}

inline void write_trace_csv(std::ostream& out, const LoadTrace& trace) {
  out << "slot,load_kw";
  if (trace.has_res()) out << ",res_kw";
  for (const auto& name : trace.appliance_names) out << ",app_" << name;
  out << "\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.9g", v);
    out << ',' << buf;
  };
  for (int t = 0; t < trace.size(); ++t) {
    out << t;
    put(trace.load_kw[t]);
    if (trace.has_res()) put(trace.res_kw[t]);
    for (const auto& a : trace.appliance_kw) put(a[t]);
    out << "\n";
  }
}

// ---- structured-text configs -------------------------------------------------

inline json parse_json(std::istream& in, const std::string& origin) {
  try {
    return json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(origin + ": " + e.what());
  }
}

inline json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file: " + path);
  return parse_json(in, path);
}

template <typename T>
T get_field(const json& j, const std::string& key, const std::string& context) {
  if (!j.contains(key))
    throw ConfigError(context + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(context + ": field '" + key + "' has the wrong type");
  }
}

template <typename T>
T get_field_or(const json& j, const std::string& key, const T& fallback,
               const std::string& context) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(context + ": field '" + key + "' has the wrong type");
  }
}

// Tariff file: {"periods": [{"start_slot":0,"end_slot":24,"price":0.1}, ...]}
inline TariffSchedule tariff_from_json(const json& j, const std::string& origin) {
  TariffSchedule tariff;
  const json& periods = j.contains("periods") ? j.at("periods") : j;
  if (!periods.is_array()) throw ParseError(origin + ": expected an array of periods");
  for (std::size_t i = 0; i < periods.size(); ++i) {
    const std::string ctx = origin + " period " + std::to_string(i);
    const json& p = periods[i];
    tariff.periods.push_back({get_field<int>(p, "start_slot", ctx),
                              get_field<int>(p, "end_slot", ctx),
                              get_field<double>(p, "price", ctx)});
  }
  return tariff;
}

inline TariffSchedule read_tariff_json(const std::string& path) {
  return tariff_from_json(parse_json_file(path), path);
}

// Pmfs and channels as plain matrices.
inline info::Pmf pmf_from_json(const json& j, const std::string& context) {
  info::Pmf p;
  p.values = get_field<std::vector<double>>(j, "values", context);
  p.probs = get_field<std::vector<double>>(j, "probs", context);
  try {
    p.validate();
  } catch (const ModelError& e) {
    throw ConfigError(context + ": " + e.what());
  }
  return p;
}

inline info::ChannelMatrix channel_from_json(const json& j, const std::string& context) {
  info::ChannelMatrix c;
  c.in_values = get_field<std::vector<double>>(j, "in_values", context);
  c.out_values = get_field<std::vector<double>>(j, "out_values", context);
  c.rows = get_field<std::vector<std::vector<double>>>(j, "rows", context);
  try {
    c.validate();
  } catch (const ModelError& e) {
    throw ConfigError(context + ": " + e.what());
  }
  return c;
}

// ---- result records -----------------------------------------------------------
// A record is an ordered list of named cells. Doubles are rounded to 6
// significant digits at record-build time so CSV and JSON emissions carry
// exactly the same values.

struct Record {
  using Value = std::variant<double, long long, std::string, bool>;
  std::vector<std::pair<std::string, Value>> cells;

  static double round6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::strtod(buf, nullptr);
  }

  void add(const std::string& key, double v) { cells.emplace_back(key, round6(v)); }
  void add(const std::string& key, long long v) { cells.emplace_back(key, v); }
  void add(const std::string& key, int v) { cells.emplace_back(key, (long long)v); }
  void add(const std::string& key, const std::string& v) { cells.emplace_back(key, v); }
  void add(const std::string& key, bool v) { cells.emplace_back(key, v); }

  const Value* find(const std::string& key) const {
    for (const auto& [k, v] : cells)
      if (k == key) return &v;
    return nullptr;
  }
};

inline std::string format_cell(const Record::Value& v) {
  char buf[64];
  if (std::holds_alternative<double>(v)) {
    std::snprintf(buf, sizeof buf, "%.6g", std::get<double>(v));
    return buf;
  }
  if (std::holds_alternative<long long>(v)) return std::to_string(std::get<long long>(v));
  if (std::holds_alternative<bool>(v)) return std::get<bool>(v) ? "true" : "false";
  return std::get<std::string>(v);
}

// Column order: first-seen order across all records.
inline std::vector<std::string> record_columns(const std::vector<Record>& records) {
  std::vector<std::string> cols;
  for (const auto& r : records)
    for (const auto& [k, v] : r.cells) {
      bool seen = false;
      for (const auto& c : cols) seen = seen || c == k;
      if (!seen) cols.push_back(k);
    }
  return cols;
}

inline void write_records_csv(std::ostream& out, const std::vector<Record>& records,
                              const std::vector<std::string>& header_hint = {}) {
  const std::vector<std::string> cols =
      records.empty() ? header_hint : record_columns(records);
  for (std::size_t c = 0; c < cols.size(); ++c)
    out << (c ? "," : "") << cols[c];
  out << "\n";
  for (const auto& r : records) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) out << ',';
      if (const auto* v = r.find(cols[c])) out << format_cell(*v);
    }
    out << "\n";
  }
}

inline json records_to_json(const std::vector<Record>& records) {
  json arr = json::array();
  for (const auto& r : records) {
    json obj = json::object();
    for (const auto& [k, v] : r.cells) {
      if (std::holds_alternative<double>(v))
        obj[k] = std::get<double>(v);
      else if (std::holds_alternative<long long>(v))
        obj[k] = std::get<long long>(v);
      else if (std::holds_alternative<bool>(v))
        obj[k] = std::get<bool>(v);
      else
        obj[k] = std::get<std::string>(v);
    }
    arr.push_back(obj);
  }
  return arr;
}

inline void write_records_json(std::ostream& out, const std::vector<Record>& records) {
  out << records_to_json(records).dump(2) << "\n";
}

inline std::vector<Record> records_from_json(const json& arr, const std::string& origin) {
  if (!arr.is_array()) throw ParseError(origin + ": expected an array of records");
  std::vector<Record> out;
  for (const auto& obj : arr) {
    Record r;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      const auto& v = it.value();
      if (v.is_boolean())
        r.add(it.key(), v.get<bool>());
      else if (v.is_number_integer())
        r.add(it.key(), v.get<long long>());
      else if (v.is_number())
        r.add(it.key(), v.get<double>());
      else
        r.add(it.key(), v.get<std::string>());
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace smp::io
