#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pdsqkd/core.hpp"

namespace pdsqkd::io {

using json = nlohmann::json;

/// Figure data is written with 10 significant digits.
inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

inline void write_csv(std::ostream& out, const Table& table) {
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out << ',';
    out << table.columns[c];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      out << format_number(row[c]);
    }
    out << '\n';
  }
}

inline void write_csv_file(const std::filesystem::path& path,
                           const Table& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  write_csv(out, table);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

/// All JSON reports share one top-level layout.
inline json make_report(json config, json rows, json summary) {
  json report;
  report["config"] = std::move(config);
  report["rows"] = std::move(rows);
  report["summary"] = std::move(summary);
  return report;
}

inline void write_json_file(const std::filesystem::path& path,
                            const json& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << report.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline json table_to_json(const Table& table) {
  json rows = json::array();
  for (const auto& row : table.rows) {
    json obj;
    for (std::size_t c = 0; c < row.size(); ++c) {
      obj[table.columns[c]] = row[c];
    }
    rows.push_back(std::move(obj));
  }
  return rows;
}

}  // namespace pdsqkd::io
