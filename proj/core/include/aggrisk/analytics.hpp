#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aggrisk {

/// One output row: a statistic of one group, with an x-value where the
/// statistic is a curve (EP threshold, quantile level, distribution rank).
struct ReportRow {
  std::string group_key;
  std::string statistic;
  std::optional<double> x;
  double value = 0.0;

  bool operator==(const ReportRow&) const = default;
};

/// Final per-group statistics plus report metadata. Rows are sorted by
/// (group_key, statistic, x); metadata keys keep insertion order.
struct LossReport {
  std::vector<ReportRow> rows;
  std::vector<std::pair<std::string, std::string>> metadata;

  bool operator==(const LossReport&) const = default;
};

/// EP curve: for each threshold v, |{losses > v}| / N. Losses must be sorted
/// ascending; thresholds strictly increasing.
std::vector<std::pair<double, double>> ep_curve(std::span<const double> sorted_losses,
                                                std::span<const double> thresholds);

/// Value-at-risk at confidence p: the ceil(p*N)-th smallest loss.
/// Throws ParamError on an empty list or p outside (0,1).
double value_at_risk(std::span<const double> sorted_losses, double confidence);

/// Tail value-at-risk at confidence p: mean of the ceil((1-p)*N) largest
/// losses. Always >= value_at_risk at the same confidence.
double tail_value_at_risk(std::span<const double> sorted_losses, double confidence);

struct SummaryStats {
  double mean = 0.0;
  double variance = 0.0;  // unbiased (N-1); 0 by convention when N == 1
  double min = 0.0;
  double max = 0.0;
  double q50 = 0.0;
  double q90 = 0.0;
  double q99 = 0.0;
};

/// Mean/variance are accumulated in the order given (ascending trial id);
/// quantiles use the order-statistic convention above.
SummaryStats summary_stats(std::span<const double> losses);

/// Assembles rows + metadata into a report with deterministic row order.
LossReport assemble_report(std::vector<ReportRow> rows,
                           std::vector<std::pair<std::string, std::string>> metadata);

/// CSV form: '#'-prefixed metadata lines, a header, then one line per row.
/// Doubles are printed shortest-round-trip, so emission is lossless.
std::string report_to_csv(const LossReport& report);
void write_report_csv(const std::string& path, const LossReport& report);

/// Parses a CSV produced by report_to_csv (used by tests and tooling).
LossReport read_report_csv(const std::string& path);

}  // namespace aggrisk
