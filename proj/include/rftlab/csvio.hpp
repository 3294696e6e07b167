#pragma once

#include <string>
#include <vector>

namespace rftlab::csv {

/// 17-significant-digit formatting: lossless round-trip for 64-bit reals.
std::string format_real(double v);

std::vector<std::string> split_line(const std::string& line);

/// Minimal deterministic CSV writer: "\n" line endings, no quoting (the lab
/// never emits commas inside fields).
class Writer {
 public:
  explicit Writer(std::string path);

  void header(const std::vector<std::string>& names);
  void row(const std::vector<std::string>& fields);
  void write();  // flush to disk

 private:
  std::string path_;
  std::string buffer_;
};

/// Whole-file reader; returns rows of fields, header included.
std::vector<std::vector<std::string>> read_rows(const std::string& path);

}  // namespace rftlab::csv
