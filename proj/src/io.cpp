#include "subkam/io.hpp"

#include <charconv>

#include "subkam/core.hpp"

namespace subkam {

std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, p);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : path_(path), out_(path, std::ios::out | std::ios::trunc), width_(header.size()) {
  if (!out_) throw Error(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
  out_ << '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
  if (values.size() != width_) throw Error(ErrorKind::kInvalidArgument, "CSV row width does not match the header");
  for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_double(values[i]);
  out_ << '\n';
  if (!out_) throw Error(ErrorKind::kIo, "write failed on " + path_.string());
}

void CsvWriter::close() {
  out_.close();
  if (out_.fail()) throw Error(ErrorKind::kIo, "close failed on " + path_.string());
}

void ensure_output_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  if (std::filesystem::exists(dir, ec) && !std::filesystem::is_directory(dir, ec))
    throw Error(ErrorKind::kIo, "output path " + dir.string() + " exists and is not a directory");
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create output directory " + dir.string() + ": " + ec.message());
  const auto probe = dir / ".subkam-write-test";
  {
    std::ofstream f(probe);
    if (!f) throw Error(ErrorKind::kIo, "output directory " + dir.string() + " is not writable");
  }
  std::filesystem::remove(probe, ec);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::out | std::ios::trunc);
  if (!f) throw Error(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  f << text;
  f.close();
  if (f.fail()) throw Error(ErrorKind::kIo, "write failed on " + path.string());
}

std::vector<std::string> axis_names(const std::string& prefix, int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i + 1));
  return out;
}

void write_grid_csv(const std::filesystem::path& path, const GridFunction& f, const std::string& value_name) {
  auto header = axis_names("x", f.d());
  header.push_back(value_name);
  CsvWriter w(path, header);
  std::vector<double> row(f.d() + 1);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Vec x = f.node(i);
    for (int k = 0; k < f.d(); ++k) row[k] = x[k];
    row[f.d()] = f[i];
    w.row(row);
  }
  w.close();
}

void write_measure_csv(const std::filesystem::path& path, const DiscreteMeasure& mu) {
  const int d = mu.grid().d(), m = mu.grid().m();
  auto header = axis_names("x", d);
  for (auto& s : axis_names("u", m)) header.push_back(s);
  header.push_back("weight");
  CsvWriter w(path, header);
  const auto& xs = mu.state_nodes();
  const auto& us = mu.control_nodes();
  std::vector<double> row(d + m + 1);
  for (std::size_t s = 0; s < xs.size(); ++s)
    for (std::size_t c = 0; c < us.size(); ++c) {
      const double wt = mu.weight(s, c);
      if (wt == 0.0) continue;
      for (int k = 0; k < d; ++k) row[k] = xs[s][k];
      for (int k = 0; k < m; ++k) row[d + k] = us[c][k];
      row[d + m] = wt;
      w.row(row);
    }
  w.close();
}

}  // namespace subkam
