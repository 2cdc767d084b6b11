#pragma once
// Minimal CSV support: header-addressed reading and row-oriented writing.
// The formats in play (panel bars, forecasts, surfaces, traces) are plain
// numeric tables without quoting or embedded separators, so a small strict
// parser is preferable to dragging in a general one.

#include <map>
#include <string>
#include <vector>

namespace vollab {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name; throws SchemaError when absent.
  std::size_t col(const std::string& name) const;
  bool has_col(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  ~CsvWriter();
  void row(const std::vector<std::string>& cells);
  void close();

 private:
  struct Impl;
  Impl* impl_;
};

// Canonical numeric formatting for artifacts: shortest round-trip form so
// rewritten files hash identically across runs.
std::string fmt_double(double x);

}  // namespace vollab
