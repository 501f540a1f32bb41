#include "nmar/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace nmar {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA"; }

double parse_cell(const std::string& cell, int row, const std::string& col) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  double value = 0.0;
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end) {
    throw DataError("row " + std::to_string(row) + ", column '" + col +
                    "': cannot parse value '" + cell + "'");
  }
  return value;
}

int find_column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == name) return static_cast<int>(j);
  }
  throw DataError("column '" + name + "' not found in header");
}

}  // namespace

LoadedSample load_sample_csv(const std::string& path, const ColumnMapping& mapping) {
  if (mapping.ycol.empty()) throw ConfigError("no outcome column named");
  if (mapping.ucols.empty()) throw ConfigError("no propensity-side covariate columns named");
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
  const std::vector<std::string> header = split_line(line);

  const int yj = find_column(header, mapping.ycol);
  const int rj = mapping.rcol.empty() ? -1 : find_column(header, mapping.rcol);
  std::vector<int> uj, zj;
  for (const auto& c : mapping.ucols) uj.push_back(find_column(header, c));
  for (const auto& c : mapping.zcols) zj.push_back(find_column(header, c));

  LoadedSample out;
  out.sample.u_cols.resize(uj.size());
  out.sample.z_cols.resize(zj.size());
  for (std::size_t k = 0; k < uj.size(); ++k) out.sample.u_cols[k] = static_cast<int>(k);
  for (std::size_t k = 0; k < zj.size(); ++k)
    out.sample.z_cols[k] = static_cast<int>(uj.size() + k);

  int row = 1;  // header was row 1
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_line(line);
    auto cell_at = [&](int j, const std::string& col) -> const std::string& {
      if (j >= static_cast<int>(cells.size()))
        throw DataError("row " + std::to_string(row) + ": missing cell for column '" + col + "'");
      return cells[j];
    };

    Observation o;
    o.x.resize(static_cast<int>(uj.size() + zj.size()));
    for (std::size_t k = 0; k < uj.size(); ++k) {
      const auto& cell = cell_at(uj[k], mapping.ucols[k]);
      if (is_missing(cell))
        throw DataError("row " + std::to_string(row) + ", column '" + mapping.ucols[k] +
                        "': covariate cell is missing");
      o.x[static_cast<int>(k)] = parse_cell(cell, row, mapping.ucols[k]);
    }
    for (std::size_t k = 0; k < zj.size(); ++k) {
      const auto& cell = cell_at(zj[k], mapping.zcols[k]);
      if (is_missing(cell))
        throw DataError("row " + std::to_string(row) + ", column '" + mapping.zcols[k] +
                        "': covariate cell is missing");
      o.x[static_cast<int>(uj.size() + k)] = parse_cell(cell, row, mapping.zcols[k]);
    }

    const std::string& ycell = cell_at(yj, mapping.ycol);
    const bool y_missing = is_missing(ycell);
    if (rj >= 0) {
      const std::string& rcell = cell_at(rj, mapping.rcol);
      if (rcell == "1") {
        o.r = 1;
      } else if (rcell == "0") {
        o.r = 0;
      } else {
        throw DataError("row " + std::to_string(row) + ", column '" + mapping.rcol +
                        "': indicator must be 0 or 1, got '" + rcell + "'");
      }
      if (o.r == 1 && y_missing)
        throw DataError("row " + std::to_string(row) +
                        ": respondent row with a missing outcome cell");
    } else {
      o.r = y_missing ? 0 : 1;
    }
    if (o.r == 1) o.y_raw = parse_cell(ycell, row, mapping.ycol);

    out.stats.n_rows += 1;
    out.stats.n_respondents += o.r;
    out.stats.n_missing += 1 - o.r;
    out.sample.obs.push_back(std::move(o));
  }
  if (out.sample.obs.empty()) throw DataError("'" + path + "' has a header but no data rows");
  out.sample.validate();
  return out;
}

void save_sample_csv(const std::string& path, const Sample& sample,
                     const ColumnMapping& mapping) {
  sample.validate();
  if (mapping.ucols.size() != sample.u_cols.size() ||
      mapping.zcols.size() != sample.z_cols.size())
    throw ConfigError("column names do not match the sample layout");
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");

  out << mapping.ycol;
  if (!mapping.rcol.empty()) out << ',' << mapping.rcol;
  for (const auto& c : mapping.ucols) out << ',' << c;
  for (const auto& c : mapping.zcols) out << ',' << c;
  out << '\n';

  char buf[64];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const auto& o : sample.obs) {
    if (o.r == 1) out << fmt(o.y());
    if (!mapping.rcol.empty()) out << ',' << o.r;
    for (int c : sample.u_cols) out << ',' << fmt(o.x[c]);
    for (int c : sample.z_cols) out << ',' << fmt(o.x[c]);
    out << '\n';
  }
}

}  // namespace nmar
