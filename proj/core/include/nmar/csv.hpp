#pragma once

#include <string>
#include <vector>

#include "nmar/model.hpp"

namespace nmar {

// Column selection for loading a dataset from delimited text. When rcol is
// empty the response indicator is inferred: rows whose outcome cell is empty
// or "NA" are nonrespondents.
struct ColumnMapping {
  std::string ycol;
  std::string rcol;
  std::vector<std::string> ucols;
  std::vector<std::string> zcols;
};

struct LoadStats {
  int n_rows = 0;
  int n_respondents = 0;
  int n_missing = 0;
};

struct LoadedSample {
  Sample sample;
  LoadStats stats;
};

// Strict CSV loader: a malformed covariate or indicator cell aborts with a
// DataError naming the row and column; no row is ever silently dropped.
LoadedSample load_sample_csv(const std::string& path, const ColumnMapping& mapping);

// Writes a sample using the same conventions the loader expects; outcome
// cells on nonrespondent rows are left empty.
void save_sample_csv(const std::string& path, const Sample& sample,
                     const ColumnMapping& mapping);

}  // namespace nmar
