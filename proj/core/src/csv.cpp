#include "blochsim/csv.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "blochsim/errors.hpp"
#include "blochsim/version.hpp"

namespace blochsim {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

CsvWriter::CsvWriter(std::vector<std::string> columns, std::string config_hash,
                     std::uint64_t seed)
    : columns_(std::move(columns)) {
  meta_.emplace_back("artifact", std::string(kArtifactName) + " " + kVersion);
  meta_.emplace_back("config_hash", std::move(config_hash));
  meta_.emplace_back("seed", std::to_string(seed));
}

void CsvWriter::add_meta(const std::string& key, const std::string& value) {
  meta_.emplace_back(key, value);
}

void CsvWriter::add_row(const std::vector<double>& values) {
  if (values.size() != columns_.size())
    throw DomainError("CsvWriter: row width does not match header");
  rows_.push_back(values);
}

std::string CsvWriter::str() const {
  std::ostringstream out;
  for (const auto& [k, v] : meta_) out << "# " << k << "=" << v << "\n";
  for (std::size_t i = 0; i < columns_.size(); ++i)
    out << columns_[i] << (i + 1 < columns_.size() ? "," : "\n");
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << format_double(row[i]) << (i + 1 < row.size() ? "," : "\n");
  }
  return out.str();
}

void CsvWriter::write(const std::string& path) const {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("CsvWriter: cannot open " + path);
  file << str();
  if (!file) throw IoError("CsvWriter: write failed for " + path);
}

ProfileCsv read_profile_csv(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw IoError("read_profile_csv: cannot open " + path);
  ProfileCsv out;
  std::string line;
  bool header_seen = false;
  int line_no = 0;
  while (std::getline(file, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line.rfind("x_um", 0) != 0)
        throw IoError("read_profile_csv: expected header starting with x_um at line " +
                      std::to_string(line_no));
      header_seen = true;
      continue;
    }
    std::istringstream row(line);
    std::string cell;
    double vals[2];
    for (int c = 0; c < 2; ++c) {
      if (!std::getline(row, cell, ','))
        throw IoError("read_profile_csv: short row at line " + std::to_string(line_no));
      try {
        vals[c] = std::stod(cell);
      } catch (const std::exception&) {
        throw IoError("read_profile_csv: bad number at line " + std::to_string(line_no));
      }
    }
    out.x_um.push_back(vals[0]);
    out.density.push_back(vals[1]);
  }
  if (out.x_um.empty()) throw IoError("read_profile_csv: no data rows in " + path);
  return out;
}

}  // namespace blochsim
