#include "aggrisk/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "aggrisk/errors.hpp"
#include "aggrisk/text.hpp"

namespace aggrisk {

namespace {

void require_nonempty(std::span<const double> losses, const char* what) {
  if (losses.empty()) throw ParamError(std::string(what) + " requires a nonempty loss list");
}

void require_confidence(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw ParamError("confidence level must lie in (0,1), got " + format_double(p));
  }
}

// Order-statistic rank ceil(p*N), 1-based. The tiny backoff keeps exact
// decimal products (0.75*4 = 3) from being pushed to the next rank by
// floating-point round-up.
std::size_t quantile_rank(double p, std::size_t n) {
  const double raw = std::ceil(p * static_cast<double>(n) - 1e-9);
  const auto k = static_cast<std::size_t>(std::max(raw, 1.0));
  return std::min(k, n);
}

}  // namespace

std::vector<std::pair<double, double>> ep_curve(std::span<const double> sorted_losses,
                                                std::span<const double> thresholds) {
  std::vector<std::pair<double, double>> out;
  out.reserve(thresholds.size());
  const double n = static_cast<double>(sorted_losses.size());
  for (double v : thresholds) {
    const auto it = std::upper_bound(sorted_losses.begin(), sorted_losses.end(), v);
    const auto exceeding = static_cast<double>(sorted_losses.end() - it);
    out.emplace_back(v, n == 0.0 ? 0.0 : exceeding / n);
  }
  return out;
}

double value_at_risk(std::span<const double> sorted_losses, double confidence) {
  require_nonempty(sorted_losses, "value_at_risk");
  require_confidence(confidence);
  return sorted_losses[quantile_rank(confidence, sorted_losses.size()) - 1];
}

double tail_value_at_risk(std::span<const double> sorted_losses, double confidence) {
  require_nonempty(sorted_losses, "tail_value_at_risk");
  require_confidence(confidence);
  const std::size_t n = sorted_losses.size();
  const std::size_t tail = quantile_rank(1.0 - confidence, n);
  double sum = 0.0;
  for (std::size_t i = n - tail; i < n; ++i) sum += sorted_losses[i];
  return sum / static_cast<double>(tail);
}

SummaryStats summary_stats(std::span<const double> losses) {
  require_nonempty(losses, "summary_stats");
  SummaryStats out;

  double sum = 0.0;
  for (double v : losses) sum += v;
  const auto n = static_cast<double>(losses.size());
  out.mean = sum / n;

  if (losses.size() > 1) {
    double sq = 0.0;
    for (double v : losses) sq += (v - out.mean) * (v - out.mean);
    out.variance = sq / (n - 1.0);
  }

  std::vector<double> sorted(losses.begin(), losses.end());
  std::sort(sorted.begin(), sorted.end());
  out.min = sorted.front();
  out.max = sorted.back();
  out.q50 = sorted[quantile_rank(0.5, sorted.size()) - 1];
  out.q90 = sorted[quantile_rank(0.9, sorted.size()) - 1];
  out.q99 = sorted[quantile_rank(0.99, sorted.size()) - 1];
  return out;
}

LossReport assemble_report(std::vector<ReportRow> rows,
                           std::vector<std::pair<std::string, std::string>> metadata) {
  std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    if (a.group_key != b.group_key) return a.group_key < b.group_key;
    if (a.statistic != b.statistic) return a.statistic < b.statistic;
    const double ax = a.x.value_or(-std::numeric_limits<double>::infinity());
    const double bx = b.x.value_or(-std::numeric_limits<double>::infinity());
    return ax < bx;
  });
  LossReport report;
  report.rows = std::move(rows);
  report.metadata = std::move(metadata);
  return report;
}

std::string report_to_csv(const LossReport& report) {
  std::string out;
  for (const auto& [key, value] : report.metadata) {
    out += "# ";
    out += key;
    out += ": ";
    out += value;
    out += '\n';
  }
  out += "group_key,statistic,x,value\n";
  for (const ReportRow& row : report.rows) {
    out += row.group_key;
    out += ',';
    out += row.statistic;
    out += ',';
    if (row.x) out += format_double(*row.x);
    out += ',';
    out += format_double(row.value);
    out += '\n';
  }
  return out;
}

void write_report_csv(const std::string& path, const LossReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError(DataError::Kind::MissingFile, path, 0, "cannot open for writing");
  }
  out << report_to_csv(report);
  if (!out) {
    throw DataError(DataError::Kind::MissingFile, path, 0, "write failed");
  }
}

LossReport read_report_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError(DataError::Kind::MissingFile, path, 0, "file not found");
  }
  LossReport report;
  std::string line;
  long line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = line.substr(1);
      if (!body.empty() && body.front() == ' ') body.erase(0, 1);
      const std::size_t colon = body.find(": ");
      if (colon == std::string::npos) {
        throw DataError(DataError::Kind::MalformedRow, path, line_no, "malformed metadata line");
      }
      report.metadata.emplace_back(body.substr(0, colon), body.substr(colon + 2));
      continue;
    }
    if (!saw_header) {
      if (line != "group_key,statistic,x,value") {
        throw DataError(DataError::Kind::MalformedRow, path, line_no, "unexpected header");
      }
      saw_header = true;
      continue;
    }
    const auto fields = split(line, ',');
    if (fields.size() != 4) {
      throw DataError(DataError::Kind::MalformedRow, path, line_no, "expected 4 fields");
    }
    ReportRow row;
    row.group_key = std::string(fields[0]);
    row.statistic = std::string(fields[1]);
    if (!fields[2].empty()) {
      double x;
      if (!parse_double(fields[2], x)) {
        throw DataError(DataError::Kind::MalformedRow, path, line_no, "invalid x value");
      }
      row.x = x;
    }
    if (!parse_double(fields[3], row.value)) {
      throw DataError(DataError::Kind::MalformedRow, path, line_no, "invalid value");
    }
    report.rows.push_back(std::move(row));
  }
  if (!saw_header) {
    throw DataError(DataError::Kind::MalformedRow, path, 0, "missing header");
  }
  return report;
}

}  // namespace aggrisk
