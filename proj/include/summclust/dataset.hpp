#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace summclust {

struct Column {
  enum class Kind { numeric, categorical };
  Kind kind = Kind::numeric;
  std::vector<double> values;        // numeric payload
  std::vector<int> codes;            // categorical payload
  std::vector<std::string> levels;   // level labels, first-appearance order

  std::size_t size() const {
    return kind == Kind::numeric ? values.size() : codes.size();
  }
  bool is_numeric() const { return kind == Kind::numeric; }
  const std::string& label(std::size_t row) const { return levels[codes[row]]; }
};

struct Dataset {
  std::vector<std::string> names;
  std::vector<Column> columns;
  std::size_t dropped_missing = 0;  // rows removed by listwise deletion at load

  std::size_t n_rows() const { return columns.empty() ? 0 : columns.front().size(); }

  bool has_column(const std::string& name) const {
    for (const auto& n : names)
      if (n == name) return true;
    return false;
  }

  const Column& column(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return columns[i];
    throw std::invalid_argument("missing column '" + name + "'");
  }
};

namespace detail {

inline bool is_missing_token(const std::string& s) {
  return s.empty() || s == "." || s == "NA";
}

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline bool parse_double(const std::string& s, double* out) {
  if (s.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') return false;
  *out = v;
  return true;
}

// One record of an RFC-4180 style stream; handles quoted fields with ""
// escapes and embedded newlines. Returns false at end of input.
inline bool read_csv_record(std::istream& in, std::vector<std::string>* fields) {
  fields->clear();
  std::string field;
  bool in_quotes = false;
  bool saw_any = false;
  int c;
  while ((c = in.get()) != EOF) {
    saw_any = true;
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(static_cast<char>(c));
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields->push_back(field);
      field.clear();
    } else if (c == '\n') {
      break;
    } else if (c != '\r') {
      field.push_back(static_cast<char>(c));
    }
  }
  if (!saw_any) return false;
  fields->push_back(field);
  return true;
}

}  // namespace detail

// Loads the named columns from a CSV file (header row required). Rows with a
// missing value in any used column are dropped and counted. A column whose
// non-missing entries all parse as numbers becomes numeric; one with no
// numeric entries becomes categorical; a mix is an error.
inline Dataset load_csv(const std::string& path,
                        const std::vector<std::string>& used_columns) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file '" + path + "'");

  std::vector<std::string> header;
  if (!detail::read_csv_record(in, &header)) {
    throw std::runtime_error("empty file '" + path + "'");
  }
  for (auto& h : header) h = detail::trim(h);

  std::vector<int> want(header.size(), -1);
  Dataset data;
  for (const auto& name : used_columns) {
    bool found = false;
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) {
        if (want[i] >= 0) { found = true; break; }  // duplicate request
        want[i] = static_cast<int>(data.names.size());
        data.names.push_back(name);
        found = true;
        break;
      }
    }
    if (!found && !data.has_column(name)) {
      throw std::invalid_argument("missing column '" + name + "'");
    }
  }

  const std::size_t n_used = data.names.size();
  std::vector<std::vector<std::string>> raw(n_used);
  std::vector<std::string> fields;
  while (detail::read_csv_record(in, &fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != header.size()) {
      throw std::runtime_error("row with " + std::to_string(fields.size()) +
                               " fields, expected " + std::to_string(header.size()));
    }
    bool missing = false;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (want[i] >= 0 && detail::is_missing_token(detail::trim(fields[i]))) {
        missing = true;
        break;
      }
    }
    if (missing) {
      ++data.dropped_missing;
      continue;
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (want[i] >= 0) raw[want[i]].push_back(detail::trim(fields[i]));
    }
  }

  data.columns.resize(n_used);
  for (std::size_t c = 0; c < n_used; ++c) {
    const auto& cells = raw[c];
    std::size_t numeric_count = 0;
    double v;
    for (const auto& cell : cells) {
      if (detail::parse_double(cell, &v)) ++numeric_count;
    }
    Column& col = data.columns[c];
    if (numeric_count == cells.size()) {
      col.kind = Column::Kind::numeric;
      col.values.reserve(cells.size());
      for (const auto& cell : cells) {
        detail::parse_double(cell, &v);
        col.values.push_back(v);
      }
    } else if (numeric_count == 0) {
      col.kind = Column::Kind::categorical;
      std::unordered_map<std::string, int> seen;
      col.codes.reserve(cells.size());
      for (const auto& cell : cells) {
        auto it = seen.find(cell);
        if (it == seen.end()) {
          it = seen.emplace(cell, static_cast<int>(col.levels.size())).first;
          col.levels.push_back(cell);
        }
        col.codes.push_back(it->second);
      }
    } else {
      throw std::runtime_error("non-numeric value in numeric column '" +
                               data.names[c] + "'");
    }
  }
  return data;
}

inline Dataset subset_rows(const Dataset& data, const std::vector<int>& rows) {
  Dataset out;
  out.names = data.names;
  out.dropped_missing = data.dropped_missing;
  out.columns.reserve(data.columns.size());
  for (const auto& col : data.columns) {
    Column c;
    c.kind = col.kind;
    if (col.is_numeric()) {
      c.values.reserve(rows.size());
      for (int r : rows) c.values.push_back(col.values[r]);
    } else {
      // re-code so levels keep first-appearance order within the subset
      std::unordered_map<int, int> remap;
      c.codes.reserve(rows.size());
      for (int r : rows) {
        const int old_code = col.codes[r];
        auto it = remap.find(old_code);
        if (it == remap.end()) {
          it = remap.emplace(old_code, static_cast<int>(c.levels.size())).first;
          c.levels.push_back(col.levels[old_code]);
        }
        c.codes.push_back(it->second);
      }
    }
    out.columns.push_back(std::move(c));
  }
  return out;
}

// Level codes for a column used as a grouping variable. Categorical columns
// keep their codes; numeric columns get one level per distinct value, in
// first-appearance order.
struct GroupCodes {
  std::vector<int> codes;
  std::vector<std::string> labels;
  int n_levels() const { return static_cast<int>(labels.size()); }
};

inline GroupCodes group_codes(const Dataset& data, const std::string& name) {
  const Column& col = data.column(name);
  GroupCodes out;
  if (!col.is_numeric()) {
    out.codes = col.codes;
    out.labels = col.levels;
    return out;
  }
  std::unordered_map<double, int> seen;
  out.codes.reserve(col.values.size());
  for (double v : col.values) {
    auto it = seen.find(v);
    if (it == seen.end()) {
      it = seen.emplace(v, static_cast<int>(out.labels.size())).first;
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%g", v);
      out.labels.emplace_back(buf);
    }
    out.codes.push_back(it->second);
  }
  return out;
}

}  // namespace summclust
