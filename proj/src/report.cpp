#include "ossl/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace ossl {

std::string method_label(TrainMode mode) {
  switch (mode) {
    case TrainMode::baseline_ch: return "L_ch";
    case TrainMode::baseline_ch_rh: return "L_ch+L_rh";
    case TrainMode::ossl: return "OSSL";
  }
  return "unknown";
}

namespace {

std::optional<double> final_accuracy(const TrainRunRecord& r, std::size_t test_index) {
  for (auto it = r.epochs.rbegin(); it != r.epochs.rend(); ++it) {
    if (test_index < it->test_acc.size() && it->test_acc[test_index]) return it->test_acc[test_index];
  }
  return std::nullopt;
}

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

ReportTable report_table(const std::vector<TrainRunRecord>& records) {
  if (records.empty()) throw ValueError("report needs at least one run record");
  ReportTable table;
  for (const auto& r : records) {
    for (const auto& name : r.test_names) {
      if (std::find(table.columns.begin(), table.columns.end(), name) == table.columns.end()) {
        table.columns.push_back(name);
      }
    }
  }
  const std::array<TrainMode, 3> modes = {TrainMode::baseline_ch, TrainMode::baseline_ch_rh, TrainMode::ossl};
  for (TrainMode mode : modes) {
    ReportRow row;
    row.mode = mode;
    row.method = method_label(mode);
    std::vector<double> sums(table.columns.size(), 0.0);
    std::vector<std::size_t> counts(table.columns.size(), 0);
    for (const auto& r : records) {
      if (r.mode != mode) continue;
      ++row.runs;
      for (std::size_t t = 0; t < r.test_names.size(); ++t) {
        const auto acc = final_accuracy(r, t);
        if (!acc) continue;
        const auto c = static_cast<std::size_t>(
            std::find(table.columns.begin(), table.columns.end(), r.test_names[t]) - table.columns.begin());
        sums[c] += *acc;
        ++counts[c];
      }
    }
    if (row.runs == 0) continue;
    row.cells.resize(table.columns.size());
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      if (counts[c] == 0) continue;
      const double pct = 100.0 * sums[c] / static_cast<double>(counts[c]);
      row.cells[c].percent = std::round(pct * 100.0) / 100.0;
    }
    table.rows.push_back(std::move(row));
  }
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    std::optional<double> best;
    for (const auto& row : table.rows) {
      if (row.cells[c].percent && (!best || *row.cells[c].percent > *best)) best = row.cells[c].percent;
    }
    for (auto& row : table.rows) row.cells[c].is_max = best && row.cells[c].percent == best;
  }
  return table;
}

std::string render_csv(const ReportTable& table) {
  std::ostringstream out;
  out << "method,runs";
  for (const auto& c : table.columns) out << ',' << c << ',' << c << "_max";
  out << '\n';
  for (const auto& row : table.rows) {
    out << row.method << ',' << row.runs;
    for (const auto& cell : row.cells) {
      out << ',' << (cell.percent ? fixed2(*cell.percent) : "") << ',' << (cell.is_max ? 1 : 0);
    }
    out << '\n';
  }
  return out.str();
}

std::string render_text(const ReportTable& table) {
  std::vector<std::vector<std::string>> grid;
  grid.push_back({"method"});
  for (const auto& c : table.columns) grid.back().push_back(c);
  for (const auto& row : table.rows) {
    grid.push_back({row.method});
    for (const auto& cell : row.cells) {
      grid.back().push_back(cell.percent ? fixed2(*cell.percent) + (cell.is_max ? "*" : " ") : "-");
    }
  }
  std::vector<std::size_t> width(grid.front().size(), 0);
  for (const auto& line : grid) {
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
  }
  std::ostringstream out;
  for (const auto& line : grid) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i == 0) {
        out << line[i] << std::string(width[i] - line[i].size(), ' ');
      } else {
        out << "  " << std::string(width[i] - line[i].size(), ' ') << line[i];
      }
    }
    out << '\n';
  }
  out << "(* = column maximum; accuracy in %)\n";
  return out.str();
}

}  // namespace ossl
