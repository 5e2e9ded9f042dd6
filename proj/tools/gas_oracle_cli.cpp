// gas-oracle: ingest, preprocess, backtest, compare, quote and plot-data.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 invariant violation.
// Option precedence: command line > --config TOML > environment > defaults.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <fmt/ranges.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "gas_oracle/baseline_oracles.hpp"
#include "gas_oracle/data_ingest.hpp"
#include "gas_oracle/error.hpp"
#include "gas_oracle/evaluation.hpp"
#include "gas_oracle/gp_regression.hpp"
#include "gas_oracle/hybrid_oracle.hpp"
#include "gas_oracle/preprocess.hpp"
#include "gas_oracle/report.hpp"

namespace fs = std::filesystem;
using namespace gas_oracle;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kDataError = 3, kInvariantViolation = 4 };

/// Bad flag values or combinations the parser cannot catch.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::string format = "table";
  fs::path out_dir = ".";
  unsigned threads = 1;
  bool quiet = false;
};

struct GpOptions {
  std::vector<double> length_scales{2.0, 10.0, 50.0};
  std::vector<double> sigma_f{1.0};
  std::vector<double> sigma_n{0.1, 0.5};
  std::vector<double> length_scale_bounds{0.5, 500.0};
  std::vector<double> sigma_f_bounds{1e-3, 1e3};
  std::vector<double> sigma_n_bounds{1e-4, 1e3};
  std::vector<double> jitter{kDefaultJitterLadder.begin(), kDefaultJitterLadder.end()};
  int max_iterations = 100;
  std::size_t refit_every = 1;
  bool no_normalize = false;

  FitConfig to_fit_config() const {
    auto bounds = [](const std::vector<double>& v, const char* what) {
      if (v.size() != 2) throw ConfigError(fmt::format("--{} takes two values LOWER,UPPER", what));
      return Bounds{v[0], v[1]};
    };
    FitConfig c;
    c.start_length_scales = length_scales;
    c.start_sigma_f = sigma_f;
    c.start_sigma_n = sigma_n;
    c.length_scale_bounds = bounds(length_scale_bounds, "gp-length-scale-bounds");
    c.sigma_f_bounds = bounds(sigma_f_bounds, "gp-sigma-f-bounds");
    c.sigma_n_bounds = bounds(sigma_n_bounds, "gp-sigma-n-bounds");
    c.jitter_ladder = jitter;
    c.max_iterations = max_iterations;
    c.refit_every = refit_every;
    c.normalize = !no_normalize;
    c.validate();
    return c;
  }
};

struct HybridOptions {
  std::size_t n_gs = 30;
  std::size_t n_gp = 200;
  double e = 0.1;

  /// e >= 1 is read as percentage points (10 means 0.1).
  double band() const { return e >= 1.0 ? e / 100.0 : e; }
};

void add_gp_options(CLI::App* cmd, GpOptions& gp) {
  const char* group = "GP fitting";
  cmd->add_option("--gp-length-scales", gp.length_scales, "Start grid for the length scale")
      ->delimiter(',')->capture_default_str()->group(group);
  cmd->add_option("--gp-sigma-f", gp.sigma_f, "Start grid for the signal std (normalized units)")
      ->delimiter(',')->capture_default_str()->group(group);
  cmd->add_option("--gp-sigma-n", gp.sigma_n, "Start grid for the noise std (normalized units)")
      ->delimiter(',')->capture_default_str()->group(group);
  cmd->add_option("--gp-length-scale-bounds", gp.length_scale_bounds, "LOWER,UPPER")
      ->delimiter(',')->capture_default_str()->group(group);
  cmd->add_option("--gp-sigma-f-bounds", gp.sigma_f_bounds, "LOWER,UPPER")->delimiter(',')->capture_default_str()->group(group);
  cmd->add_option("--gp-sigma-n-bounds", gp.sigma_n_bounds, "LOWER,UPPER")->delimiter(',')->capture_default_str()->group(group);
  cmd->add_option("--gp-jitter", gp.jitter, "Jitter ladder, multiples of sigma_f^2")
      ->delimiter(',')->capture_default_str()->group(group);
  cmd->add_option("--gp-max-iterations", gp.max_iterations, "BFGS iterations per start")
      ->check(CLI::PositiveNumber)->capture_default_str()->group(group);
  cmd->add_option("--gp-refit-every", gp.refit_every, "Refit hyperparameters every k targets")
      ->check(CLI::PositiveNumber)->capture_default_str()->group(group);
  cmd->add_flag("--gp-no-normalize", gp.no_normalize, "Fit raw wei instead of standardized prices")->group(group);
}

void add_hybrid_options(CLI::App* cmd, HybridOptions& h) {
  const char* group = "Hybrid";
  cmd->add_option("--n-gs", h.n_gs, "GS-Express window of the hybrid")->check(CLI::PositiveNumber)->capture_default_str()->group(group);
  cmd->add_option("--n-gp", h.n_gp, "GP window of the hybrid")->check(CLI::PositiveNumber)->capture_default_str()->group(group);
  cmd->add_option("--e", h.e, "Error band around alpha (0.1, or 10 for ten points)")
      ->check(CLI::PositiveNumber)->capture_default_str()->group(group);
}

// "A:B" with either side optional, 1-based and inclusive.
std::pair<std::size_t, std::size_t> parse_range(const std::string& text, const char* flag) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError(fmt::format("{} expects A:B, got '{}'", flag, text));
  auto side = [&](std::string s) -> std::size_t {
    if (s.empty()) return 0;
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != s.size()) throw ConfigError(fmt::format("{} expects A:B with integers, got '{}'", flag, text));
    return static_cast<std::size_t>(v);
  };
  const auto a = side(text.substr(0, colon));
  const auto b = side(text.substr(colon + 1));
  if (a != 0 && b != 0 && b < a) throw ConfigError(fmt::format("{} is empty: {}", flag, text));
  return {a, b};
}

std::vector<ProcessedBlock> select_blocks(std::vector<ProcessedBlock> series, const std::string& blocks) {
  if (blocks.empty()) return series;
  const auto [first, last] = parse_range(blocks, "--blocks");
  std::erase_if(series, [&](const ProcessedBlock& b) {
    return (first && b.block_number < first) || (last && b.block_number > last);
  });
  if (series.empty()) throw InsufficientHistory("no processed blocks inside --blocks " + blocks);
  return series;
}

BacktestOptions backtest_options(const std::vector<double>& alphas, const std::string& range, unsigned threads) {
  BacktestOptions opt;
  opt.alphas = alphas;
  opt.threads = threads;
  if (!range.empty()) {
    const auto [a, b] = parse_range(range, "--range");
    opt.first_target = a;
    if (b) {
      if (!a) throw ConfigError("--range needs a start when it has an end");
      opt.count = b - a + 1;
    }
  }
  return opt;
}

/// "gs-express", "geth:100", "gp:200", "hybrid". Window defaults follow the oracle.
std::unique_ptr<Oracle> make_oracle(const std::string& spec, std::optional<std::size_t> window, const GpOptions& gp,
                                    const HybridOptions& hybrid) {
  std::string name = spec;
  if (const auto colon = spec.find(':'); colon != std::string::npos) {
    name = spec.substr(0, colon);
    try {
      window = std::stoul(spec.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad window in oracle spec '" + spec + "'");
    }
  }
  if (name == "gs-express") return PercentileOracle::gs_express(window.value_or(200));
  if (name == "geth") return PercentileOracle::geth(window.value_or(100));
  if (name == "gp") return std::make_unique<GpOracle>(window.value_or(200), gp.to_fit_config());
  if (name == "hybrid") {
    HybridConfig c;
    c.n_gs = hybrid.n_gs;
    c.n_gp = window.value_or(hybrid.n_gp);
    c.e = hybrid.band();
    c.gp = gp.to_fit_config();
    c.validate();
    return std::make_unique<HybridOracle>(c);
  }
  throw ConfigError("unknown oracle '" + name + "' (expected gp, gs-express, geth or hybrid)");
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

fs::path in_out_dir(const GlobalOptions& g, const fs::path& explicit_path, const std::string& fallback) {
  return explicit_path.empty() ? g.out_dir / fallback : explicit_path;
}

void log_gp_time(const Oracle& oracle, const BacktestReport& report, bool quiet) {
  if (quiet) return;
  if (const auto* gp = dynamic_cast<const GpOracle*>(&oracle); gp && gp->predictions()) {
    fmt::print(stderr, "gp: {} predictions, {:.3f} s per prediction (refit every {})\n", gp->predictions(),
               gp->seconds_spent() / static_cast<double>(gp->predictions()), gp->fit_config().refit_every);
  }
  fmt::print(stderr, "{}: {} targets in {:.2f} s\n", oracle_label(report), report.target_count(),
             report.timing.wall_seconds);
}

// Defaults of list options come out as a quoted "[a,b]" string while parsed
// values come out as a TOML array; print both the way parsed values look so a
// rerun from the echo reproduces it exactly.
std::string canonical_list(const std::string& line) {
  static const std::regex quoted_list(R"re(^([^=]+)="\[(.*)\]"$)re");
  std::smatch m;
  if (!std::regex_match(line, m, quoted_list)) return line;
  std::vector<std::string> items;
  std::stringstream ss(m[2].str());
  for (std::string item; std::getline(ss, item, ',');) {
    char* end = nullptr;
    std::strtod(item.c_str(), &end);
    const bool number = !item.empty() && *end == '\0';
    items.push_back(number ? item : "\"" + item + "\"");
  }
  if (items.size() == 1) return m[1].str() + "=" + items[0];
  return fmt::format("{}=[{}]", m[1].str(), fmt::join(items, ", "));
}

/// TOML of the global options and the chosen subcommand; loadable with --config.
std::string config_echo(const CLI::App& app, const CLI::App& sub) {
  std::istringstream lines(app.config_to_str(true, false));
  const std::string prefix = sub.get_name() + ".";
  std::string out;
  for (std::string line; std::getline(lines, line);) {
    const auto key_end = line.find('=');
    const bool global = key_end != std::string::npos && line.substr(0, key_end).find('.') == std::string::npos;
    if (global || line.starts_with(prefix)) out += canonical_list(line) + '\n';
  }
  return out;
}

int report_violations(const std::vector<BacktestReport>& reports) {
  int code = kOk;
  for (const auto& r : reports) {
    for (const auto& v : r.invariant_violations) {
      fmt::print(stderr, "invariant violation ({}): {}\n", oracle_label(r), v);
      code = kInvariantViolation;
    }
  }
  return code;
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  std::string rpc;
  fs::path in;
  fs::path out;
  BlockNumber start = 0;
  BlockNumber end = 0;
  unsigned concurrency = 4;
  unsigned retries = 4;
  std::size_t batch = 64;
  bool resume = false;
};

int run_ingest(const IngestArgs& a, const GlobalOptions& g) {
  const fs::path out = in_out_dir(g, a.out, "raw.csv");
  if (!a.in.empty()) {
    const auto ds = load_blocks(a.in, format_from_path(a.in));
    save_blocks(ds, out);
    if (!g.quiet) fmt::print(stderr, "ingest: {} blocks from {} -> {}\n", ds.blocks.size(), a.in.string(), out.string());
    return kOk;
  }
  if (a.rpc.empty()) throw ConfigError("ingest needs --in FILE or --rpc URL (or GAS_ORACLE_RPC_URL)");
  if (a.start == 0 && a.end == 0) throw ConfigError("ingest --rpc needs --start and --end");

  RpcOptions rpc;
  rpc.concurrency = a.concurrency;
  rpc.max_retries = a.retries;
  rpc.batch_size = a.batch;

  BlockNumber start = a.start;
  const bool csv = format_from_path(out) == DataFormat::csv;
  bool have_header = false;
  if (a.resume && fs::exists(out)) {
    if (!csv) throw ConfigError("--resume needs a CSV output");
    const auto done = load_blocks(out, DataFormat::csv);
    have_header = true;
    if (!done.blocks.empty()) start = std::max(start, done.blocks.back().block_number + 1);
    if (!g.quiet) fmt::print(stderr, "ingest: resuming at block {}\n", start);
    if (start > a.end) return kOk;
  }

  if (!csv) {
    const auto ds = fetch_block_range(a.rpc, start, a.end, rpc);
    save_blocks(ds, out);
    return kOk;
  }

  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream file(out, have_header ? std::ios::binary | std::ios::app : std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot write " + out.string());
  rpc.keep_blocks = false;
  std::size_t fetched = 0;
  fetch_block_range(a.rpc, start, a.end, rpc, [&](std::span<const RawBlock> batch) {
    write_blocks_csv(file, batch, !have_header);
    have_header = true;
    file.flush();
    fetched += batch.size();
    if (!g.quiet) fmt::print(stderr, "\ringest: {} / {} blocks", fetched, a.end - start + 1);
  });
  if (!g.quiet) fmt::print(stderr, "\n");
  return kOk;
}

struct PreprocessArgs {
  fs::path in;
  fs::path out;
};

int run_preprocess(const PreprocessArgs& a, const GlobalOptions& g) {
  const auto ds = load_blocks(a.in, format_from_path(a.in));
  const auto processed = preprocess_chain(ds);
  const fs::path out = in_out_dir(g, a.out, "processed.csv");
  save_processed(processed, out);
  if (g.format == "json") {
    fmt::print("{}\n", json{{"raw_blocks", ds.blocks.size()}, {"processed_blocks", processed.size()}, {"out", out.string()}}.dump(2));
  } else if (!g.quiet) {
    fmt::print(stderr, "preprocess: {} raw blocks -> {} processed blocks -> {}\n", ds.blocks.size(), processed.size(),
               out.string());
  }
  return kOk;
}

struct BacktestArgs {
  fs::path data;
  std::string oracle = "gs-express";
  std::optional<std::size_t> window;
  std::vector<double> alphas{50.0, 75.0, 84.0, 95.0};
  std::string range;
  std::string blocks;
  fs::path out;
  fs::path summary_csv;
  bool timing = false;
  GpOptions gp;
  HybridOptions hybrid;
};

void emit_reports(const std::vector<BacktestReport>& reports, const GlobalOptions& g, const std::string& run_config,
                  bool timing) {
  if (g.format == "json") {
    json all = json::array();
    for (const auto& r : reports) {
      auto j = report_to_json(r, timing);
      j["run_config"] = run_config;
      all.push_back(std::move(j));
    }
    fmt::print("{}\n", (reports.size() == 1 ? all.front() : all).dump(2));
  } else if (g.format == "csv") {
    fmt::print("{}", summary_csv(reports));
  } else {
    fmt::print("{}\n{}", render_summary_table(reports), render_short_term_table(reports));
  }
}

void save_report(const BacktestReport& r, const fs::path& path, const std::string& run_config, bool timing) {
  auto j = report_to_json(r, timing);
  j["run_config"] = run_config;
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

int run_backtest(const BacktestArgs& a, const GlobalOptions& g, const std::string& run_config) {
  const auto series = select_blocks(load_processed(a.data), a.blocks);
  auto oracle = make_oracle(a.oracle, a.window, a.gp, a.hybrid);
  const auto opt = backtest_options(a.alphas, a.range, g.threads);
  const std::vector<BacktestReport> reports{backtest(*oracle, series, opt)};
  log_gp_time(*oracle, reports.front(), g.quiet);

  save_report(reports.front(), in_out_dir(g, a.out, "report-" + oracle->name() + ".json"), run_config, a.timing);
  if (!a.summary_csv.empty()) open_output(a.summary_csv) << summary_csv(reports);
  emit_reports(reports, g, run_config, a.timing);
  return report_violations(reports);
}

struct CompareArgs {
  fs::path data;
  std::vector<std::string> oracles{"gs-express:200", "geth:100", "gp:200"};
  std::vector<double> alphas{50.0, 75.0, 84.0, 95.0};
  std::string range;
  std::string blocks;
  fs::path summary_csv;
  bool timing = false;
  GpOptions gp;
  HybridOptions hybrid;
};

int run_compare(const CompareArgs& a, const GlobalOptions& g, const std::string& run_config) {
  const auto series = select_blocks(load_processed(a.data), a.blocks);
  std::vector<std::unique_ptr<Oracle>> oracles;
  for (const auto& spec : a.oracles) oracles.push_back(make_oracle(spec, std::nullopt, a.gp, a.hybrid));

  // Every oracle is scored on the same targets: the first one all of them can quote.
  auto opt = backtest_options(a.alphas, a.range, g.threads);
  if (opt.first_target == 0) {
    std::size_t need = 0;
    for (const auto& o : oracles) need = std::max(need, o->history_required());
    opt.first_target = need + 1;
  }

  std::vector<BacktestReport> reports;
  for (std::size_t i = 0; i < oracles.size(); ++i) {
    reports.push_back(backtest(*oracles[i], series, opt));
    log_gp_time(*oracles[i], reports.back(), g.quiet);
    save_report(reports.back(), g.out_dir / fmt::format("report-{}-{}.json", i + 1, oracles[i]->name()), run_config,
                a.timing);
  }
  if (!a.summary_csv.empty()) open_output(a.summary_csv) << summary_csv(reports);
  emit_reports(reports, g, run_config, a.timing);
  return report_violations(reports);
}

struct QuoteArgs {
  fs::path history;
  std::string oracle = "hybrid";
  std::optional<std::size_t> window;
  std::vector<double> alphas{75.0};
  GpOptions gp;
  HybridOptions hybrid;
};

int run_quote(const QuoteArgs& a, const GlobalOptions& g, const std::string& run_config) {
  const auto series = load_processed(a.history);
  if (series.empty()) throw InsufficientHistory("history file has no blocks");
  const auto prices = min_prices(series);
  const auto next_block = series.back().block_number + 1;

  json quotes = json::array();
  std::string table = fmt::format("next block after {} ({} blocks of history)\n", series.back().block_number, series.size());
  const auto start = std::chrono::steady_clock::now();

  if (a.oracle == "hybrid") {
    for (double alpha : a.alphas) {
      HybridConfig c;
      c.alpha = alpha;
      c.n_gs = a.hybrid.n_gs;
      c.n_gp = a.window.value_or(a.hybrid.n_gp);
      c.e = a.hybrid.band();
      c.gp = a.gp.to_fit_config();
      c.validate();
      HybridState state(c);
      for (const auto& b : series) state.advance(b);
      if (!state.ready())
        throw InsufficientHistory(fmt::format("hybrid needs {} blocks of history, got {}",
                                              std::max(c.n_gp, 2 * c.n_gs), series.size()));
      const auto d = hybrid_quote(state);
      json q{{"alpha", alpha},          {"price_wei", d.price.to_string()}, {"price_gwei", d.price.to_double() / 1e9},
             {"case", to_string(d.regime)}, {"instant_rate", d.instant_rate}, {"alpha_used", d.alpha_used},
             {"gs_price_wei", d.gs_price.to_string()}};
      if (d.gp_price) q["gp_price_wei"] = d.gp_price->to_string();
      quotes.push_back(q);
      table += fmt::format("  P{:<5g} {:>12.3f} Gwei  {} wei  [{}, R = {:.3f}, alpha' = {:g}]\n", alpha,
                           d.price.to_double() / 1e9, d.price.to_string(), to_string(d.regime), d.instant_rate,
                           d.alpha_used);
    }
  } else {
    auto oracle = make_oracle(a.oracle, a.window, a.gp, a.hybrid);
    if (prices.size() < oracle->history_required())
      throw InsufficientHistory(fmt::format("{} needs {} blocks of history, got {}", oracle->name(),
                                            oracle->history_required(), prices.size()));
    // Quoting the position just past the end only reads prices[target - n, target).
    const auto q = oracle->quote(prices, prices.size(), a.alphas);
    for (std::size_t i = 0; i < q.size(); ++i) {
      quotes.push_back({{"alpha", a.alphas[i]}, {"price_wei", q[i].to_string()}, {"price_gwei", q[i].to_double() / 1e9}});
      table += fmt::format("  P{:<5g} {:>12.3f} Gwei  {} wei\n", a.alphas[i], q[i].to_double() / 1e9, q[i].to_string());
    }
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!g.quiet && (a.oracle == "hybrid" || a.oracle.starts_with("gp")))
    fmt::print(stderr, "quote: {:.3f} s for {} alpha level(s)\n", seconds, a.alphas.size());

  if (g.format == "json") {
    fmt::print("{}\n", json{{"oracle", a.oracle}, {"next_block", next_block}, {"quotes", quotes}, {"run_config", run_config}}
                           .dump(2));
  } else if (g.format == "csv") {
    fmt::print("oracle,next_block,alpha,price_wei\n");
    for (const auto& q : quotes)
      fmt::print("{},{},{},{}\n", a.oracle, next_block, q["alpha"].get<double>(), q["price_wei"].get<std::string>());
  } else {
    fmt::print("{}", table);
  }
  return kOk;
}

struct PlotArgs {
  std::vector<fs::path> reports;
  std::optional<double> alpha = 75.0;
  bool all_alphas = false;
  fs::path out;
};

int run_plot_data(const PlotArgs& a, const GlobalOptions& g) {
  std::vector<BacktestReport> reports;
  for (const auto& path : a.reports) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    try {
      reports.push_back(report_from_json(json::parse(in)));
    } catch (const json::exception& e) {
      throw SchemaError(path.string() + ": " + e.what());
    }
  }
  const auto rows = plot_rows(reports, a.all_alphas ? std::nullopt : a.alpha);
  if (a.out.empty()) {
    write_plot_csv(std::cout, rows);
  } else {
    auto out = open_output(a.out);
    write_plot_csv(out, rows);
    if (!g.quiet) fmt::print(stderr, "plot-data: {} rows -> {}\n", rows.size(), a.out.string());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gas price oracles: GP regression, GS-Express, Geth and the hybrid, with backtesting"};
  app.name("gas-oracle");
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML file with option values (command line wins)");
  app.option_defaults()->always_capture_default();

  GlobalOptions g;
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"table", "json", "csv"}))->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "Directory for generated files")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for stateless backtests")
      ->envname("GAS_ORACLE_THREADS")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_flag("-q,--quiet", g.quiet, "No progress or timing on stderr");

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Fetch raw blocks over JSON-RPC, or convert a raw block file");
  ingest_cmd->add_option("--rpc", ingest.rpc, "JSON-RPC endpoint")->envname("GAS_ORACLE_RPC_URL");
  ingest_cmd->add_option("--in", ingest.in, "Raw block file to convert instead of fetching")->check(CLI::ExistingFile);
  ingest_cmd->add_option("--out", ingest.out, "Raw block file (.csv or .json); default OUT_DIR/raw.csv");
  ingest_cmd->add_option("--start", ingest.start, "First block number");
  ingest_cmd->add_option("--end", ingest.end, "Last block number (inclusive)");
  ingest_cmd->add_option("--concurrency", ingest.concurrency, "Requests in flight")->check(CLI::PositiveNumber)->capture_default_str();
  ingest_cmd->add_option("--retries", ingest.retries, "Retries per block")->capture_default_str();
  ingest_cmd->add_option("--batch", ingest.batch, "Blocks per write")->check(CLI::PositiveNumber)->capture_default_str();
  ingest_cmd->add_flag("--resume", ingest.resume, "Continue after the last block already in --out");

  PreprocessArgs pre;
  auto* pre_cmd = app.add_subcommand("preprocess", "Filter small blocks and trim low-fee outliers");
  pre_cmd->add_option("--in", pre.in, "Raw block file")->required()->check(CLI::ExistingFile);
  pre_cmd->add_option("--out", pre.out, "Processed CSV; default OUT_DIR/processed.csv");

  BacktestArgs bt;
  auto* bt_cmd = app.add_subcommand("backtest", "Roll one oracle over a processed series");
  bt_cmd->add_option("--data", bt.data, "Processed CSV")->required()->check(CLI::ExistingFile);
  bt_cmd->add_option("--oracle", bt.oracle, "gp, gs-express, geth or hybrid (NAME:WINDOW also works)")->capture_default_str();
  bt_cmd->add_option("--train-size,--window", bt.window, "Training window n (default per oracle: 200, 100, 200, n_gp)");
  bt_cmd->add_option("--alphas,--alpha", bt.alphas, "Percent levels")->delimiter(',')->capture_default_str();
  bt_cmd->add_option("--range", bt.range, "Targets A:B, 1-based positions in the processed series, inclusive");
  bt_cmd->add_option("--blocks", bt.blocks, "Keep only block numbers A:B before backtesting");
  bt_cmd->add_option("--out", bt.out, "Report JSON; default OUT_DIR/report-ORACLE.json");
  bt_cmd->add_option("--summary-csv", bt.summary_csv, "Also write the summary table as CSV");
  bt_cmd->add_flag("--timing", bt.timing, "Include wall time in JSON (breaks byte-identical reruns)");
  add_gp_options(bt_cmd, bt.gp);
  add_hybrid_options(bt_cmd, bt.hybrid);

  CompareArgs cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "Backtest several oracles on the same targets");
  cmp_cmd->add_option("--data", cmp.data, "Processed CSV")->required()->check(CLI::ExistingFile);
  cmp_cmd->add_option("--oracles,--oracle", cmp.oracles, "NAME[:WINDOW] list")->delimiter(',')->capture_default_str();
  cmp_cmd->add_option("--alphas,--alpha", cmp.alphas, "Percent levels")->delimiter(',')->capture_default_str();
  cmp_cmd->add_option("--range", cmp.range, "Targets A:B, 1-based positions in the processed series, inclusive");
  cmp_cmd->add_option("--blocks", cmp.blocks, "Keep only block numbers A:B before backtesting");
  cmp_cmd->add_option("--summary-csv", cmp.summary_csv, "Also write the summary table as CSV");
  cmp_cmd->add_flag("--timing", cmp.timing, "Include wall time in JSON (breaks byte-identical reruns)");
  add_gp_options(cmp_cmd, cmp.gp);
  add_hybrid_options(cmp_cmd, cmp.hybrid);

  QuoteArgs quote;
  auto* quote_cmd = app.add_subcommand("quote", "Quote the next block from a processed history");
  quote_cmd->add_option("--history", quote.history, "Processed CSV")->required()->check(CLI::ExistingFile);
  quote_cmd->add_option("--oracle", quote.oracle, "gp, gs-express, geth or hybrid")->capture_default_str();
  quote_cmd->add_option("--window,--train-size", quote.window, "Training window (n_gp for the hybrid)");
  quote_cmd->add_option("--alphas,--alpha", quote.alphas, "Percent levels")->delimiter(',')->capture_default_str();
  add_gp_options(quote_cmd, quote.gp);
  add_hybrid_options(quote_cmd, quote.hybrid);

  PlotArgs plot;
  auto* plot_cmd = app.add_subcommand("plot-data", "Tidy CSV of actual vs predicted prices from report JSON files");
  plot_cmd->add_option("--report,--reports", plot.reports, "Report JSON files")->required()->check(CLI::ExistingFile);
  plot_cmd->add_option("--alpha", plot.alpha, "Percent level to export")->capture_default_str();
  plot_cmd->add_flag("--all-alphas", plot.all_alphas, "Export every alpha level");
  plot_cmd->add_option("--out", plot.out, "CSV path; stdout when omitted");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    const std::string run_config = config_echo(app, *app.get_subcommands().front());
    if (!g.quiet && g.format == "table") {
      std::istringstream lines(run_config);
      for (std::string line; std::getline(lines, line);)
        if (!line.empty()) fmt::print(stderr, "# {}\n", line);
    }
    if (*ingest_cmd) return run_ingest(ingest, g);
    if (*pre_cmd) return run_preprocess(pre, g);
    if (*bt_cmd) return run_backtest(bt, g, run_config);
    if (*cmp_cmd) return run_compare(cmp, g, run_config);
    if (*quote_cmd) return run_quote(quote, g, run_config);
    if (*plot_cmd) return run_plot_data(plot, g);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfigError;
  } catch (const InsufficientHistory& e) {
    fmt::print(stderr, "data error: {}\n", e.what());
    return kDataError;
  } catch (const PreconditionError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfigError;
  } catch (const Error& e) {
    fmt::print(stderr, "data error: {}\n", e.what());
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    fmt::print(stderr, "data error: {}\n", e.what());
    return kDataError;
  }
  return kOk;
}
