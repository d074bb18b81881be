#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "tcn/common.hpp"

namespace tcn {

// Fixed float formatting so repeated runs emit byte-identical files.
inline std::string fmt_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string fmt_f6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// CSV with a leading comment naming the producing config hash and a one-line
// header.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, uint64_t config_hash, const std::string& header)
      : out_(path) {
    check(out_.good(), "csv: cannot open '" + path + "' for writing");
    out_ << "# config " << hex64(config_hash) << "\n" << header << "\n";
  }

  void row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  void close() {
    out_.close();
    check(out_.good(), "csv: write failed on close");
  }

 private:
  std::ofstream out_;
};

}  // namespace tcn
