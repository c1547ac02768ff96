#ifndef MMC_XYZ_HPP
#define MMC_XYZ_HPP

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mmc/types.hpp"

namespace mmc {

/// Parse whitespace-separated XYZ text: one point per line, blank lines
/// ignored. Throws IoError with the offending line number on malformed input.
template <typename Scalar = double>
PointMatrix<Scalar> read_xyz(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open point file: " + path);
  std::vector<Eigen::Matrix<Scalar, 1, 3>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    double x, y, z;
    if (!(ls >> x)) {
      if (ls.eof()) continue;  // blank line
      throw IoError(path + ":" + std::to_string(lineno) + ": malformed point line");
    }
    if (!(ls >> y >> z))
      throw IoError(path + ":" + std::to_string(lineno) + ": malformed point line");
    std::string rest;
    if (ls >> rest)
      throw IoError(path + ":" + std::to_string(lineno) + ": trailing data on point line");
    rows.emplace_back(static_cast<Scalar>(x), static_cast<Scalar>(y), static_cast<Scalar>(z));
  }
  if (rows.empty()) throw IoError(path + ": no points");
  PointMatrix<Scalar> out(static_cast<Index>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = rows[i];
  return out;
}

template <typename Scalar>
void write_xyz(const std::string& path, const PointMatrix<Scalar>& cloud) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write point file: " + path);
  char buf[96];
  for (Index i = 0; i < cloud.rows(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", static_cast<double>(cloud(i, 0)),
                  static_cast<double>(cloud(i, 1)), static_cast<double>(cloud(i, 2)));
    out << buf;
  }
  if (!out) throw IoError("error while writing: " + path);
}

}  // namespace mmc

#endif  // MMC_XYZ_HPP
