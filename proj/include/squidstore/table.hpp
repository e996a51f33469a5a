#pragma once

// Homogeneous result tables written as CSV or JSON.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "squidstore/quantum.hpp"

namespace squidstore {

using Cell = std::variant<double, std::int64_t, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size())
      throw std::invalid_argument("Table: row has " + std::to_string(row.size()) + " cells, expected " +
                                  std::to_string(columns.size()));
    rows.push_back(std::move(row));
  }
};

enum class TableFormat { csv, json };

class OutputError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline std::string csv_cell(const Cell& c) {
  if (const double* d = std::get_if<double>(&c)) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", *d);
    return buf;
  }
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  const std::string& s = std::get<std::string>(c);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

/// Rounds to 9 significant digits so CSV and JSON carry the same numbers.
inline double round9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::strtod(buf, nullptr);
}

}  // namespace detail

inline void write_table(const Table& t, TableFormat fmt, std::ostream& os) {
  if (fmt == TableFormat::csv) {
    for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
    os << '\n';
    for (const auto& row : t.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << detail::csv_cell(row[i]);
      os << '\n';
    }
    return;
  }
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& row : t.rows) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < row.size(); ++i)
      std::visit(
          [&](const auto& v) {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, double>)
              obj[t.columns[i]] = std::isfinite(v) ? nlohmann::ordered_json(detail::round9(v))
                                                   : nlohmann::ordered_json(nullptr);
            else
              obj[t.columns[i]] = v;
          },
          row[i]);
    arr.push_back(std::move(obj));
  }
  os << arr.dump(2) << '\n';
}

inline std::string table_to_string(const Table& t, TableFormat fmt) {
  std::ostringstream os;
  write_table(t, fmt, os);
  return os.str();
}

/// Writes to `path`, or to `fallback` when the path is empty.
inline void emit_table(const Table& t, TableFormat fmt, const std::string& path, std::ostream& fallback) {
  if (path.empty()) {
    write_table(t, fmt, fallback);
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw OutputError("cannot open `" + path + "` for writing");
  write_table(t, fmt, f);
  f.flush();
  if (!f) throw OutputError("write to `" + path + "` failed");
}

}  // namespace squidstore
