#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "subkam/hjsolver.hpp"
#include "subkam/measures.hpp"

namespace subkam {

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

/// Comma-separated table; numbers are written with format_double. Throws kIo.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  void row(const std::vector<double>& values);
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t width_;
};

/// Makes the directory (and parents); throws kIo if it is not a writable directory.
void ensure_output_dir(const std::filesystem::path& dir);

void write_text(const std::filesystem::path& path, const std::string& text);

/// Node coordinates and value, one row per node.
void write_grid_csv(const std::filesystem::path& path, const GridFunction& f, const std::string& value_name);
/// Support of the measure: x..., u..., weight (zero weights skipped).
void write_measure_csv(const std::filesystem::path& path, const DiscreteMeasure& mu);

std::vector<std::string> axis_names(const std::string& prefix, int n);

}  // namespace subkam
