#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace evolyap::tools {

// Small deterministic CSV writer: one schema-declaring header line, '\n' line
// endings, %.17g number formatting (byte-identical across runs).
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open " + path);
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) out_ << ',';
      out_ << columns[i];
    }
    out_ << '\n';
    ncols_ = columns.size();
  }

  void row(const std::vector<double>& values) {
    if (values.size() != ncols_) throw std::runtime_error("csv row arity mismatch");
    char buf[32];
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out_ << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", values[i]);
      out_ << buf;
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
  std::size_t ncols_ = 0;
};

}  // namespace evolyap::tools
