#ifndef BLOCHSIM_CSV_HPP
#define BLOCHSIM_CSV_HPP

#include <string>
#include <vector>

namespace blochsim {

// Deterministic CSV writer: provenance comment lines, a header row, then
// %.12g-formatted numeric rows.  Identical inputs produce identical bytes.
class CsvWriter {
 public:
  CsvWriter(std::vector<std::string> columns, std::string config_hash,
            std::uint64_t seed);

  void add_meta(const std::string& key, const std::string& value);
  void add_row(const std::vector<double>& values);
  void write(const std::string& path) const;
  std::string str() const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::pair<std::string, std::string>> meta_;
  std::vector<std::vector<double>> rows_;
};

std::string format_double(double v);

// Reads a two-column profile CSV (x_um, density); `#` lines are comments.
// Extra columns are ignored so externally produced files can be loaded.
struct ProfileCsv {
  std::vector<double> x_um;
  std::vector<double> density;
};
ProfileCsv read_profile_csv(const std::string& path);

}  // namespace blochsim

#endif
