#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ossl/bilevel.hpp"

namespace ossl {

struct ReportCell {
  std::optional<double> percent;  // mean final accuracy in percent, rounded to 2 decimals
  bool is_max = false;            // largest value in its column (ties all flagged)
};

struct ReportRow {
  TrainMode mode = TrainMode::ossl;
  std::string method;  // L_ch, L_ch+L_rh, OSSL
  std::size_t runs = 0;
  std::vector<ReportCell> cells;
};

struct ReportTable {
  std::vector<std::string> columns;  // test-set names in first-seen order
  std::vector<ReportRow> rows;       // one per mode present, in mode order
};

std::string method_label(TrainMode mode);

/// Averages each run's last evaluated accuracy per test set over runs of the
/// same mode. Throws ValueError for an empty input.
ReportTable report_table(const std::vector<TrainRunRecord>& records);

/// method,runs,<col>,<col>_max,...
std::string render_csv(const ReportTable& table);

/// Aligned columns; column maxima are marked with '*'.
std::string render_text(const ReportTable& table);

}  // namespace ossl
