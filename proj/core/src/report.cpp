#include "nmar/report.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace nmar {

namespace {

const char* kHeader =
    "estimator,truth,n_replicates,n_failures,n_se,bias,sd,rmse,se,cvp_percent,"
    "bias_x100,sd_x100,rmse_x100,se_x100,flagged";

std::string num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_opt(const std::string& cell) {
  if (cell.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::stod(cell);
}

}  // namespace

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  if (rows.empty()) throw ConfigError("no metric rows to report");
  out << kHeader << '\n';
  for (const auto& r : rows) {
    out << r.label << ',' << num(r.truth) << ',' << r.n_replicates << ',' << r.n_failures << ','
        << r.n_se << ',' << num(r.bias) << ',' << num(r.sd) << ',' << num(r.rmse) << ','
        << num(r.se) << ',' << num(r.cvp) << ',' << num(100.0 * r.bias) << ','
        << num(100.0 * r.sd) << ',' << num(100.0 * r.rmse) << ',' << num(100.0 * r.se) << ','
        << (r.flagged ? 1 : 0) << '\n';
  }
}

void write_metrics_text(std::ostream& out, const std::vector<MetricsRow>& rows) {
  if (rows.empty()) throw ConfigError("no metric rows to report");
  out << std::left << std::setw(16) << "estimator" << std::right << std::setw(10) << "bias*100"
      << std::setw(10) << "sd*100" << std::setw(10) << "rmse*100" << std::setw(10) << "se*100"
      << std::setw(8) << "cvp%" << std::setw(7) << "reps" << std::setw(7) << "fails" << '\n';
  out << std::string(78, '-') << '\n';
  auto cell = [](double v) {
    if (!std::isfinite(v)) return std::string("--");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    out << std::left << std::setw(16) << r.label << std::right << std::setw(10)
        << cell(100.0 * r.bias) << std::setw(10) << cell(100.0 * r.sd) << std::setw(10)
        << cell(100.0 * r.rmse) << std::setw(10) << cell(100.0 * r.se) << std::setw(8)
        << cell(r.cvp) << std::setw(7) << r.n_replicates << std::setw(7) << r.n_failures
        << (r.flagged ? "  !" : "") << '\n';
  }
}

std::string metrics_csv_string(const std::vector<MetricsRow>& rows) {
  std::ostringstream ss;
  write_metrics_csv(ss, rows);
  return ss.str();
}

std::string metrics_text_string(const std::vector<MetricsRow>& rows) {
  std::ostringstream ss;
  write_metrics_text(ss, rows);
  return ss.str();
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("metrics file is empty");
  if (line != kHeader) throw DataError("metrics header does not match");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    while (cells.size() < 15) cells.push_back("");
    MetricsRow r;
    r.label = cells[0];
    r.truth = parse_opt(cells[1]);
    r.n_replicates = std::stoi(cells[2]);
    r.n_failures = std::stoi(cells[3]);
    r.n_se = std::stoi(cells[4]);
    r.bias = parse_opt(cells[5]);
    r.sd = parse_opt(cells[6]);
    r.rmse = parse_opt(cells[7]);
    r.se = parse_opt(cells[8]);
    r.cvp = parse_opt(cells[9]);
    r.flagged = cells[14] == "1";
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace nmar
