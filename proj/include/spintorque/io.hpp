#pragma once

// CSV and manifest output. Numbers use the shortest round-trip representation,
// so identical inputs give byte-identical files. Files are written to a
// temporary name and renamed into place.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spintorque/errors.hpp"

namespace spintorque {

inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

struct CsvTable {
  std::vector<std::pair<std::string, std::string>> meta;  // written as `# key: value`
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> r) { rows.push_back(std::move(r)); }

  std::string str() const {
    std::string s;
    for (const auto& [k, v] : meta) s += "# " + k + ": " + v + "\n";
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t k = 0; k < cells.size(); ++k) s += (k ? "," : "") + cells[k];
      s += "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return s;
  }
};

/// Write `content` to `path` via a temporary file and rename.
inline void write_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

struct CsvData {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t column(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return k;
    throw ConfigError("CSV has no column '" + name + "'");
  }
  const std::vector<double>& operator[](const std::string& name) const { return columns[column(name)]; }
  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
};

/// Numeric CSV reader: skips `#` lines, one header line, all cells numeric.
inline CsvData read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  CsvData d;
  std::string line;
  bool have_header = false;
  for (int n = 1; std::getline(in, line); ++n) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!have_header) {
      d.header = cells;
      d.columns.resize(cells.size());
      have_header = true;
      continue;
    }
    if (cells.size() != d.header.size())
      throw ConfigError(path.string() + ":" + std::to_string(n) + ": expected " + std::to_string(d.header.size()) +
                        " cells");
    for (std::size_t k = 0; k < cells.size(); ++k) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cells[k].data(), cells[k].data() + cells[k].size(), v);
      if (ec != std::errc{} || ptr != cells[k].data() + cells[k].size())
        throw ConfigError(path.string() + ":" + std::to_string(n) + ": non-numeric cell '" + cells[k] + "'");
      d.columns[k].push_back(v);
    }
  }
  if (!have_header) throw ConfigError(path.string() + ": no header line");
  return d;
}

/// Flat `key: value` manifest, one entry per line, in insertion order.
struct Manifest {
  std::vector<std::pair<std::string, std::string>> entries;

  void add(std::string key, std::string value) { entries.emplace_back(std::move(key), std::move(value)); }
  std::string str() const {
    std::string s;
    for (const auto& [k, v] : entries) s += k + ": " + v + "\n";
    return s;
  }
};

}  // namespace spintorque
