#include "imclab/harness.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace imclab::harness {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& columns,
                     std::uint64_t cfg_hash, std::uint64_t seed)
    : path_(path), n_columns_(columns.size()) {
  char meta[96];
  std::snprintf(meta, sizeof(meta), "# config_hash=%016llx seed=%llu\n",
                static_cast<unsigned long long>(cfg_hash),
                static_cast<unsigned long long>(seed));
  buffer_ = meta;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) buffer_ += ',';
    buffer_ += columns[i];
  }
  buffer_ += '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != n_columns_) throw std::runtime_error("CSV row arity mismatch");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) buffer_ += ',';
    buffer_ += cells[i];
  }
  buffer_ += '\n';
}

void CsvWriter::close() {
  if (closed_) return;
  std::ofstream os(path_, std::ios::trunc | std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path_);
  os.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
  if (!os) throw std::runtime_error("write failed: " + path_);
  closed_ = true;
}

}  // namespace imclab::harness
