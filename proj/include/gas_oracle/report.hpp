#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gas_oracle/evaluation.hpp"

namespace gas_oracle {

/// Machine-readable report: {oracle, config, alphas[], records[][], aggregates{}, ...}.
/// Wei amounts are decimal strings. Timing is left out unless asked for, so
/// identical runs serialize byte-identically.
nlohmann::json report_to_json(const BacktestReport& report, bool include_timing = false);
BacktestReport report_from_json(const nlohmann::json& j);

/// Human label, e.g. "gs-express (200)".
std::string oracle_label(const BacktestReport& report);

/// Success rate / average cost / IPW per alpha, one row per report.
std::string render_summary_table(std::span<const BacktestReport> reports);
/// Minimum short-term success rate for m = 25, 50, 100, one column group per report.
std::string render_short_term_table(std::span<const BacktestReport> reports);
/// Same numbers as render_summary_table as CSV (full precision).
std::string summary_csv(std::span<const BacktestReport> reports);

struct PlotRow {
  BlockNumber block_number = 0;
  double actual_gwei = 0.0;
  std::string oracle;
  double alpha = 0.0;
  double predicted_gwei = 0.0;

  bool operator==(const PlotRow&) const = default;
};

inline constexpr std::string_view kPlotCsvHeader = "block_number,actual_gwei,oracle,alpha,predicted_gwei";

/// One row per (report, alpha, target). `alpha` filters to a single level when set.
std::vector<PlotRow> plot_rows(std::span<const BacktestReport> reports, std::optional<double> alpha = std::nullopt);
/// Gwei columns are written with 3 decimals.
void write_plot_csv(std::ostream& out, std::span<const PlotRow> rows);
std::vector<PlotRow> read_plot_csv(std::istream& in);

}  // namespace gas_oracle
