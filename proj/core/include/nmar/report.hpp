#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nmar/simlab.hpp"

namespace nmar {

// Machine-readable report: one row per estimator, full-precision values plus
// the conventional x100 columns. NaN cells are written empty.
void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);

// Human-readable table with the x100 values at two decimals.
void write_metrics_text(std::ostream& out, const std::vector<MetricsRow>& rows);

std::string metrics_csv_string(const std::vector<MetricsRow>& rows);
std::string metrics_text_string(const std::vector<MetricsRow>& rows);

// Parses what write_metrics_csv produced.
std::vector<MetricsRow> read_metrics_csv(std::istream& in);

}  // namespace nmar
