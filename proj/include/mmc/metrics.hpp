#ifndef MMC_METRICS_HPP
#define MMC_METRICS_HPP

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "mmc/types.hpp"

namespace mmc {

struct CategoryMetrics {
  double mean_cd_e3 = 0.0;  // Chamfer distance scaled by 1e3
  double fscore = 0.0;
  int n = 0;
};

/// Per-category completion quality plus an unweighted mean row.
struct MetricReport {
  std::map<std::string, CategoryMetrics> per_category;
  CategoryMetrics mean;                   // average over categories; n = total samples
  std::string normalization = "gt-unit";  // metric-space convention, echoed in the CSV header
};

/// Accumulates per-sample metrics and finalizes category means.
class MetricAccumulator {
 public:
  void add(const std::string& category, double cd, double fs) {
    auto& s = sums_[category];
    s.cd += cd;
    s.fs += fs;
    s.n += 1;
  }

  MetricReport finalize(const std::string& normalization = "gt-unit") const {
    MetricReport report;
    report.normalization = normalization;
    if (sums_.empty()) throw EmptyInput("metric accumulator: no samples");
    double cd_sum = 0.0, fs_sum = 0.0;
    int total = 0;
    for (const auto& [cat, s] : sums_) {
      CategoryMetrics m;
      m.mean_cd_e3 = 1e3 * s.cd / s.n;
      m.fscore = s.fs / s.n;
      m.n = s.n;
      report.per_category[cat] = m;
      cd_sum += m.mean_cd_e3;
      fs_sum += m.fscore;
      total += s.n;
    }
    const double k = static_cast<double>(report.per_category.size());
    report.mean.mean_cd_e3 = cd_sum / k;
    report.mean.fscore = fs_sum / k;
    report.mean.n = total;
    return report;
  }

 private:
  struct Sums {
    double cd = 0.0, fs = 0.0;
    int n = 0;
  };
  std::map<std::string, Sums> sums_;
};

inline std::string to_csv(const MetricReport& report) {
  std::ostringstream out;
  out << "# normalization: " << report.normalization << "\n";
  out << "category,mean_cd_e3,fscore,n\n";
  char buf[128];
  const auto row = [&](const std::string& name, const CategoryMetrics& m) {
    std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%d\n", name.c_str(), m.mean_cd_e3,
                  m.fscore, m.n);
    out << buf;
  };
  for (const auto& [cat, m] : report.per_category) row(cat, m);
  row("mean", report.mean);
  return out.str();
}

inline void write_csv(const std::string& path, const MetricReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report: " + path);
  out << to_csv(report);
}

inline MetricReport report_from_csv(const std::string& text) {
  MetricReport report;
  std::istringstream in(text);
  std::string line;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("normalization:");
      if (pos != std::string::npos) {
        std::string v = line.substr(pos + 14);
        while (!v.empty() && v.front() == ' ') v.erase(v.begin());
        report.normalization = v;
      }
      continue;
    }
    if (!saw_header) {
      if (line != "category,mean_cd_e3,fscore,n")
        throw IoError("metric csv: unexpected header: " + line);
      saw_header = true;
      continue;
    }
    std::istringstream ls(line);
    std::string cat, cd, fs, n;
    if (!std::getline(ls, cat, ',') || !std::getline(ls, cd, ',') ||
        !std::getline(ls, fs, ',') || !std::getline(ls, n))
      throw IoError("metric csv: malformed row: " + line);
    CategoryMetrics m{std::stod(cd), std::stod(fs), std::stoi(n)};
    if (cat == "mean")
      report.mean = m;
    else
      report.per_category[cat] = m;
  }
  if (!saw_header) throw IoError("metric csv: missing header");
  return report;
}

}  // namespace mmc

#endif  // MMC_METRICS_HPP
