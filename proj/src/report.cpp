#include "gas_oracle/report.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "gas_oracle/error.hpp"

namespace gas_oracle {

namespace {

using nlohmann::json;

std::string alpha_key(double alpha) { return fmt::format("{}", alpha); }

std::string fixed3(double v) { return fmt::format("{:.3f}", v); }

std::string cell(const std::optional<double>& v) { return v ? fixed3(*v) : std::string("-"); }

// Left-aligned first column, right-aligned others, widths from content.
std::string render_grid(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& r : rows) {
    if (widths.size() < r.size()) widths.resize(r.size(), 0);
    for (std::size_t c = 0; c < r.size(); ++c) widths[c] = std::max(widths[c], r[c].size());
  }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c == 0)
        line += fmt::format("{:<{}}", r[c], widths[c]);
      else
        line += fmt::format("  {:>{}}", r[c], widths[c]);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + '\n';
  }
  return out;
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

json report_to_json(const BacktestReport& report, bool include_timing) {
  json records = json::array();
  for (const auto& per_alpha : report.records) {
    json arr = json::array();
    for (const auto& r : per_alpha) {
      arr.push_back({{"target_index", r.target_index},
                     {"block_number", r.block_number},
                     {"predicted_price_wei", r.predicted_price.to_string()},
                     {"actual_y_wei", r.actual_y.to_string()},
                     {"success", r.success}});
    }
    records.push_back(std::move(arr));
  }

  json aggregates = json::object();
  for (const auto& a : report.aggregates) {
    json short_term = json::object();
    for (const auto& [m, v] : a.min_short_term) short_term[std::to_string(m)] = v;
    aggregates[alpha_key(a.alpha)] = {{"success_rate", a.long_run_success_rate},
                                      {"average_cost_gwei", a.average_cost_gwei},
                                      {"ipw", a.ipw ? json(*a.ipw) : json(nullptr)},
                                      {"min_short_term", std::move(short_term)}};
  }

  json j = {{"oracle", report.oracle},
            {"config", report.config},
            {"alphas", report.alphas},
            {"train_size", report.train_size},
            {"target_range",
             {{"first", report.first_target}, {"last", report.last_target}, {"count", report.target_count()}}},
            {"records", std::move(records)},
            {"aggregates", std::move(aggregates)},
            {"invariant_violations", report.invariant_violations},
            {"notes", report.notes}};
  if (include_timing)
    j["timing"] = {{"wall_seconds", report.timing.wall_seconds},
                   {"seconds_per_prediction", report.timing.seconds_per_prediction}};
  return j;
}

BacktestReport report_from_json(const json& j) {
  try {
    BacktestReport r;
    r.oracle = j.at("oracle").get<std::string>();
    r.config = j.value("config", json::object());
    r.alphas = j.at("alphas").get<std::vector<double>>();
    r.train_size = j.value("train_size", std::size_t{0});
    if (j.contains("target_range")) {
      r.first_target = j["target_range"].at("first").get<std::size_t>();
      r.last_target = j["target_range"].at("last").get<std::size_t>();
    }
    const auto& recs = j.at("records");
    if (recs.size() != r.alphas.size()) throw SchemaError("report: records must have one array per alpha");
    for (std::size_t a = 0; a < recs.size(); ++a) {
      std::vector<PredictionRecord> per_alpha;
      for (const auto& rec : recs[a]) {
        per_alpha.push_back({rec.at("target_index").get<std::size_t>(), rec.at("block_number").get<BlockNumber>(),
                             r.alphas[a], Wei::parse_decimal(rec.at("predicted_price_wei").get<std::string>()),
                             Wei::parse_decimal(rec.at("actual_y_wei").get<std::string>()),
                             rec.at("success").get<bool>()});
      }
      r.records.push_back(std::move(per_alpha));
    }
    r.invariant_violations = j.value("invariant_violations", std::vector<std::string>{});
    r.notes = j.value("notes", std::vector<std::string>{});
    compute_aggregates(r);
    return r;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed report JSON: ") + e.what());
  } catch (const PreconditionError& e) {
    throw SchemaError(std::string("malformed report JSON: ") + e.what());
  }
}

std::string oracle_label(const BacktestReport& report) {
  return fmt::format("{} ({})", report.oracle, report.train_size);
}

std::string render_summary_table(std::span<const BacktestReport> reports) {
  if (reports.empty()) return {};
  const auto& alphas = reports.front().alphas;
  std::vector<std::vector<std::string>> rows;

  std::vector<std::string> groups{""}, header{"Method"};
  for (const char* g : {"Success rate", "Average cost (Gwei)", "IPW"}) {
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      groups.push_back(i == 0 ? g : "");
      header.push_back("P" + alpha_key(alphas[i]));
    }
  }
  rows.push_back(groups);
  rows.push_back(header);
  for (const auto& r : reports) {
    std::vector<std::string> row{oracle_label(r)};
    for (const auto& a : r.aggregates) row.push_back(fixed3(a.long_run_success_rate));
    for (const auto& a : r.aggregates) row.push_back(fixed3(a.average_cost_gwei));
    for (const auto& a : r.aggregates) row.push_back(cell(a.ipw));
    rows.push_back(std::move(row));
  }
  return render_grid(rows);
}

std::string render_short_term_table(std::span<const BacktestReport> reports) {
  if (reports.empty()) return {};
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> groups{""}, header{"m"};
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < r.alphas.size(); ++i) {
      groups.push_back(i == 0 ? oracle_label(r) : "");
      header.push_back("P" + alpha_key(r.alphas[i]));
    }
  }
  rows.push_back(groups);
  rows.push_back(header);
  for (auto m : kShortTermWindows) {
    std::vector<std::string> row{std::to_string(m)};
    for (const auto& r : reports) {
      for (const auto& a : r.aggregates) {
        auto it = a.min_short_term.find(m);
        row.push_back(it == a.min_short_term.end() ? "-" : fmt::format("{:.2f}", it->second));
      }
    }
    rows.push_back(std::move(row));
  }
  return render_grid(rows);
}

std::string summary_csv(std::span<const BacktestReport> reports) {
  std::string out = "oracle,train_size,first_target,last_target,alpha,success_rate,average_cost_gwei,ipw";
  for (auto m : kShortTermWindows) out += fmt::format(",min_short_term_{}", m);
  out += '\n';
  for (const auto& r : reports) {
    for (const auto& a : r.aggregates) {
      out += fmt::format("{},{},{},{},{},{},{},{}", r.oracle, r.train_size, r.first_target, r.last_target, a.alpha,
                         a.long_run_success_rate, a.average_cost_gwei, a.ipw ? fmt::format("{}", *a.ipw) : "");
      for (auto m : kShortTermWindows) {
        auto it = a.min_short_term.find(m);
        out += it == a.min_short_term.end() ? "," : fmt::format(",{}", it->second);
      }
      out += '\n';
    }
  }
  return out;
}

std::vector<PlotRow> plot_rows(std::span<const BacktestReport> reports, std::optional<double> alpha) {
  std::vector<PlotRow> rows;
  for (const auto& r : reports) {
    const auto label = oracle_label(r);
    for (std::size_t a = 0; a < r.alphas.size(); ++a) {
      if (alpha && r.alphas[a] != *alpha) continue;
      for (const auto& rec : r.records[a])
        rows.push_back({rec.block_number, rec.actual_y.gwei(), label, r.alphas[a], rec.predicted_price.gwei()});
    }
  }
  return rows;
}

void write_plot_csv(std::ostream& out, std::span<const PlotRow> rows) {
  out << kPlotCsvHeader << '\n';
  for (const auto& r : rows) {
    if (r.oracle.find_first_of(",\"\n") != std::string::npos)
      throw PreconditionError("oracle label must not contain commas, quotes or newlines");
    out << fmt::format("{},{:.3f},{},{},{:.3f}\n", r.block_number, r.actual_gwei, r.oracle, r.alpha, r.predicted_gwei);
  }
}

std::vector<PlotRow> read_plot_csv(std::istream& in) {
  std::vector<PlotRow> rows;
  std::string line;
  if (!std::getline(in, line)) return rows;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kPlotCsvHeader) throw SchemaError("plot CSV header must be '" + std::string(kPlotCsvHeader) + "'");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split(line, ',');
    if (f.size() != 5) throw ParseError("expected 5 fields", lineno);
    try {
      rows.push_back({std::stoull(f[0]), std::stod(f[1]), f[2], std::stod(f[3]), std::stod(f[4])});
    } catch (const std::exception&) {
      throw ParseError("invalid number", lineno);
    }
  }
  return rows;
}

}  // namespace gas_oracle
