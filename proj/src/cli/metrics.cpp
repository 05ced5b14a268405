#include <cstdio>
#include <fstream>
#include <sstream>

#include "ossl/cli.hpp"

namespace ossl::cli {

namespace {

constexpr const char* kAccSuffix = "_acc";

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string metrics_header(const std::vector<std::string>& test_names) {
  std::string h = "epoch,L_ch,L_rh,L_ah,train_acc";
  for (const auto& n : test_names) h += "," + n + kAccSuffix;
  return h + ",wall_ms";
}

std::string metrics_row(const EpochRecord& e) {
  std::string r = std::to_string(e.epoch) + "," + opt(e.L_ch) + "," + opt(e.L_rh) + "," + opt(e.L_ah) + "," +
                  num(e.train_acc);
  for (const auto& a : e.test_acc) r += "," + opt(a);
  if (e.wall_ms) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", *e.wall_ms);
    r += std::string(",") + buf;
  } else {
    r += ",";
  }
  return r;
}

void write_metrics_csv(const fs::path& path, const TrainRunRecord& record) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << metrics_header(record.test_names) << '\n';
  for (const auto& e : record.epochs) out << metrics_row(e) << '\n';
  if (!out) throw IoError(path.string(), "write failed");
}

TrainRunRecord read_metrics_csv(const fs::path& path, TrainMode mode) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  TrainRunRecord rec;
  rec.mode = mode;
  std::string line;
  std::size_t offset = 0;
  if (!std::getline(in, line)) throw FormatError(path.string(), 0, "empty metrics file");
  const auto header = split(line, ',');
  const std::vector<std::string> lead = {"epoch", "L_ch", "L_rh", "L_ah", "train_acc"};
  if (header.size() < lead.size() + 1 || !std::equal(lead.begin(), lead.end(), header.begin()) ||
      header.back() != "wall_ms") {
    throw FormatError(path.string(), 0, "unexpected metrics header '" + line + "'");
  }
  for (std::size_t i = lead.size(); i + 1 < header.size(); ++i) {
    const std::string& h = header[i];
    const std::string suffix = kAccSuffix;
    if (h.size() <= suffix.size() || h.compare(h.size() - suffix.size(), suffix.size(), suffix) != 0) {
      throw FormatError(path.string(), 0, "test-set column '" + h + "' must end in _acc");
    }
    rec.test_names.push_back(h.substr(0, h.size() - suffix.size()));
  }
  offset += line.size() + 1;
  const auto parse = [&](const std::string& cell) -> std::optional<double> {
    if (cell.empty()) return std::nullopt;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != cell.size()) throw FormatError(path.string(), offset, "bad number '" + cell + "'");
    return v;
  };
  while (std::getline(in, line)) {
    if (line.empty()) {
      offset += 1;
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw FormatError(path.string(), offset, "row has " + std::to_string(cells.size()) + " fields, header has " +
                                                   std::to_string(header.size()));
    }
    EpochRecord e;
    const auto epoch = parse(cells[0]);
    if (!epoch) throw FormatError(path.string(), offset, "missing epoch number");
    e.epoch = static_cast<std::size_t>(*epoch);
    if (e.epoch != rec.epochs.size() + 1) throw FormatError(path.string(), offset, "epochs must be contiguous from 1");
    e.L_ch = parse(cells[1]);
    e.L_rh = parse(cells[2]);
    e.L_ah = parse(cells[3]);
    e.train_acc = parse(cells[4]).value_or(0.0);
    for (std::size_t i = lead.size(); i + 1 < cells.size(); ++i) e.test_acc.push_back(parse(cells[i]));
    e.wall_ms = parse(cells.back());
    rec.epochs.push_back(e);
    offset += line.size() + 1;
  }
  return rec;
}

}  // namespace ossl::cli
