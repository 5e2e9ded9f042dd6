#include <pybind11/functional.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <string>

#include "gas_oracle/baseline_oracles.hpp"
#include "gas_oracle/data_ingest.hpp"
#include "gas_oracle/error.hpp"
#include "gas_oracle/evaluation.hpp"
#include "gas_oracle/gp_regression.hpp"
#include "gas_oracle/hybrid_oracle.hpp"
#include "gas_oracle/normal.hpp"
#include "gas_oracle/preprocess.hpp"
#include "gas_oracle/report.hpp"

namespace py = pybind11;
using namespace gas_oracle;

// Wei travels as a plain Python int (arbitrary precision, no rounding).
namespace pybind11::detail {
template <>
struct type_caster<Wei> {
  PYBIND11_TYPE_CASTER(Wei, const_name("int"));

  bool load(handle src, bool) {
    if (!src || !PyLong_Check(src.ptr()) || PyBool_Check(src.ptr())) return false;
    if (PyObject_RichCompareBool(src.ptr(), pybind11::int_(0).ptr(), Py_LT) == 1)
      throw value_error("wei amounts cannot be negative");
    value = Wei::parse_decimal(std::string(pybind11::str(src)));
    return true;
  }

  static handle cast(const Wei& w, return_value_policy, handle) {
    return PyLong_FromString(w.to_string().c_str(), nullptr, 10);
  }
};
}  // namespace pybind11::detail

namespace {

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

py::dict decision_dict(const HybridDecision& d) {
  py::dict out;
  out["price"] = py::cast(d.price);
  out["case"] = to_string(d.regime);
  out["instant_rate"] = d.instant_rate;
  out["alpha_used"] = d.alpha_used;
  out["gs_price"] = py::cast(d.gs_price);
  out["gp_price"] = d.gp_price ? py::cast(*d.gp_price) : py::none();
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Gas price oracles: GP regression, percentile baselines, hybrid switching, backtests";

  auto base = py::register_exception<Error>(m, "GasOracleError", PyExc_RuntimeError);
  auto precondition = py::register_exception<PreconditionError>(m, "PreconditionError", base);
  py::register_exception<InsufficientHistory>(m, "InsufficientHistory", precondition);
  auto parse = py::register_exception<ParseError>(m, "ParseError", base);
  py::register_exception<OrderingError>(m, "OrderingError", parse);
  py::register_exception<SchemaError>(m, "SchemaError", base);
  py::register_exception<IoError>(m, "IoError", base);
  py::register_exception<FetchError>(m, "FetchError", base);
  py::register_exception<NumericalError>(m, "NumericalError", base);
  py::register_exception<FitError>(m, "FitError", base);
  py::register_exception<StateError>(m, "StateError", base);

  // -- blocks and files
  py::class_<RawBlock>(m, "RawBlock")
      .def(py::init<>())
      .def(py::init([](BlockNumber n, std::vector<Wei> prices) { return RawBlock{n, std::move(prices)}; }),
           py::arg("block_number"), py::arg("gas_prices"))
      .def_readwrite("block_number", &RawBlock::block_number)
      .def_readwrite("gas_prices", &RawBlock::gas_prices)
      .def(py::self == py::self)
      .def("__repr__", [](const RawBlock& b) {
        return "RawBlock(" + std::to_string(b.block_number) + ", " + std::to_string(b.gas_prices.size()) + " txs)";
      });

  py::class_<ProcessedBlock>(m, "ProcessedBlock")
      .def(py::init([](BlockNumber n, Wei y) { return ProcessedBlock{n, y, {}}; }), py::arg("block_number"),
           py::arg("min_gas_price"))
      .def_readwrite("block_number", &ProcessedBlock::block_number)
      .def_readwrite("min_gas_price", &ProcessedBlock::min_gas_price)
      .def_readonly("surviving_tx_count", &ProcessedBlock::surviving_tx_count)
      .def("__repr__", [](const ProcessedBlock& b) {
        return "ProcessedBlock(" + std::to_string(b.block_number) + ", " + b.min_gas_price.to_string() + ")";
      });

  m.def("load_blocks", [](const std::filesystem::path& p) { return load_blocks(p, format_from_path(p)).blocks; },
        py::arg("path"), "Raw blocks from a CSV or JSON file (format from the extension).");
  m.def("save_blocks", [](const std::vector<RawBlock>& blocks, const std::filesystem::path& p) {
    save_blocks(Dataset{blocks, p.string()}, p);
  }, py::arg("blocks"), py::arg("path"));
  m.def("load_processed", &load_processed, py::arg("path"));
  m.def("save_processed", [](const std::vector<ProcessedBlock>& b, const std::filesystem::path& p) { save_processed(b, p); },
        py::arg("blocks"), py::arg("path"));
  m.def("fetch_block_range", [](const std::string& endpoint, BlockNumber start, BlockNumber end, unsigned concurrency) {
    RpcOptions opt;
    opt.concurrency = concurrency;
    py::gil_scoped_release release;
    return fetch_block_range(endpoint, start, end, opt).blocks;
  }, py::arg("endpoint"), py::arg("start"), py::arg("end"), py::arg("concurrency") = 4);

  // -- preprocessing
  m.def("filter_small_blocks", [](const std::vector<RawBlock>& b) { return filter_small_blocks(b); }, py::arg("blocks"));
  m.def("low_fee_threshold", [](const std::vector<Wei>& p) { return low_fee_threshold(p); }, py::arg("prices"));
  m.def("trim_block", &trim_block, py::arg("block"));
  m.def("preprocess_chain", [](const std::vector<RawBlock>& b) { return preprocess_chain(b); }, py::arg("blocks"));

  // -- GP regression
  py::class_<GpHyperparams>(m, "GpHyperparams")
      .def(py::init([](double sf, double l, double sn) { return GpHyperparams{sf, l, sn}; }), py::arg("sigma_f") = 1.0,
           py::arg("length_scale") = 10.0, py::arg("sigma_n") = 0.1)
      .def_readwrite("sigma_f", &GpHyperparams::sigma_f)
      .def_readwrite("length_scale", &GpHyperparams::length_scale)
      .def_readwrite("sigma_n", &GpHyperparams::sigma_n)
      .def("__repr__", [](const GpHyperparams& h) {
        return "GpHyperparams(sigma_f=" + std::to_string(h.sigma_f) + ", length_scale=" + std::to_string(h.length_scale) +
               ", sigma_n=" + std::to_string(h.sigma_n) + ")";
      });

  py::class_<FitConfig>(m, "FitConfig")
      .def(py::init<>())
      .def_readwrite("start_length_scales", &FitConfig::start_length_scales)
      .def_readwrite("start_sigma_f", &FitConfig::start_sigma_f)
      .def_readwrite("start_sigma_n", &FitConfig::start_sigma_n)
      .def_property("length_scale_bounds", [](const FitConfig& c) { return std::pair(c.length_scale_bounds.lower, c.length_scale_bounds.upper); },
                    [](FitConfig& c, std::pair<double, double> b) { c.length_scale_bounds = {b.first, b.second}; })
      .def_property("sigma_f_bounds", [](const FitConfig& c) { return std::pair(c.sigma_f_bounds.lower, c.sigma_f_bounds.upper); },
                    [](FitConfig& c, std::pair<double, double> b) { c.sigma_f_bounds = {b.first, b.second}; })
      .def_property("sigma_n_bounds", [](const FitConfig& c) { return std::pair(c.sigma_n_bounds.lower, c.sigma_n_bounds.upper); },
                    [](FitConfig& c, std::pair<double, double> b) { c.sigma_n_bounds = {b.first, b.second}; })
      .def_readwrite("jitter_ladder", &FitConfig::jitter_ladder)
      .def_readwrite("max_iterations", &FitConfig::max_iterations)
      .def_readwrite("normalize", &FitConfig::normalize)
      .def_readwrite("refit_every", &FitConfig::refit_every);

  py::class_<PredictiveDistribution>(m, "PredictiveDistribution")
      .def(py::init([](double mean, double std) { return PredictiveDistribution{mean, std}; }), py::arg("mean"), py::arg("std"))
      .def_readwrite("mean", &PredictiveDistribution::mean)
      .def_readwrite("std", &PredictiveDistribution::std)
      .def("__repr__", [](const PredictiveDistribution& d) {
        return "PredictiveDistribution(mean=" + std::to_string(d.mean) + ", std=" + std::to_string(d.std) + ")";
      });

  py::class_<GpModel>(m, "GpModel")
      .def(py::init([](const std::vector<Wei>& prices, const GpHyperparams& hp, bool normalize) {
             return GpModel(TrainingSeries::from_prices(prices, normalize), hp);
           }),
           py::arg("prices"), py::arg("hyperparams"), py::arg("normalize") = true)
      .def_property_readonly("hyperparams", &GpModel::hyperparams)
      .def_property_readonly("log_marginal_likelihood", &GpModel::log_marginal_likelihood)
      .def("predict", &GpModel::predict, py::arg("x_star"), "Predictive in wei at input x (the window is x = 1..n).")
      .def("predict_next", &GpModel::predict_next);

  m.def("fit", [](const std::vector<Wei>& prices, const FitConfig& cfg) {
    return fit(TrainingSeries::from_prices(prices, cfg.normalize), cfg);
  }, py::arg("prices"), py::arg("config") = FitConfig{}, py::call_guard<py::gil_scoped_release>());
  m.def("fit_and_predict_next", [](const std::vector<Wei>& w, const FitConfig& cfg) { return fit_and_predict_next(w, cfg); },
        py::arg("window"), py::arg("config") = FitConfig{}, py::call_guard<py::gil_scoped_release>());
  m.def("percentile_value", &percentile_value, py::arg("dist"), py::arg("alpha"));
  m.def("percentile_price", &percentile_price, py::arg("dist"), py::arg("alpha"));
  m.def("inverse_normal_cdf", &inverse_normal_cdf, py::arg("p"));
  m.def("normal_cdf", &normal_cdf, py::arg("z"));

  // -- percentile baselines and metrics
  m.def("empirical_percentile_price", [](const std::vector<Wei>& w, double a) { return empirical_percentile_price(w, a); },
        py::arg("window"), py::arg("alpha"));
  m.def("gs_express_quote", [](const std::vector<Wei>& h, std::size_t at, double a, std::size_t window) {
    return gs_express_quote(h, at, PercentileOracleConfig::gs_express(window), a);
  }, py::arg("history"), py::arg("at"), py::arg("alpha") = 50.0, py::arg("window") = 200);
  m.def("geth_quote", [](const std::vector<Wei>& h, std::size_t at, std::size_t window) {
    return geth_quote(h, at, PercentileOracleConfig::geth(window));
  }, py::arg("history"), py::arg("at"), py::arg("window") = 100);

  m.def("success_rate", [](const std::vector<std::uint8_t>& t) { return success_rate(t); }, py::arg("indicators"));
  m.def("average_cost", [](const std::vector<Wei>& p) { return average_cost(p); }, py::arg("predicted_prices"));
  m.def("ipw", &ipw, py::arg("avg_cost_gwei"), py::arg("rate"));
  m.def("min_short_term_success", [](const std::vector<std::uint8_t>& t, std::size_t w) { return min_short_term_success(t, w); },
        py::arg("indicators"), py::arg("m"));

  // -- oracles and backtests
  py::class_<Oracle>(m, "Oracle")
      .def_property_readonly("name", &Oracle::name)
      .def_property_readonly("history_required", &Oracle::history_required)
      .def_property_readonly("config", [](const Oracle& o) { return to_python(o.config()); })
      .def("quote", [](Oracle& o, const std::vector<Wei>& prices, std::size_t target, const std::vector<double>& alphas) {
        return o.quote(prices, target, alphas);
      }, py::arg("prices"), py::arg("target"), py::arg("alphas"),
         "Quotes for prices[target] from prices[:target], one per alpha.");

  py::class_<PercentileOracle, Oracle>(m, "PercentileOracle")
      .def_static("gs_express", [](std::size_t w) { return PercentileOracle(*PercentileOracle::gs_express(w)); },
                  py::arg("window") = 200)
      .def_static("geth", [](std::size_t w) { return PercentileOracle(*PercentileOracle::geth(w)); }, py::arg("window") = 100);

  py::class_<GpOracle, Oracle>(m, "GpOracle")
      .def(py::init<std::size_t, FitConfig>(), py::arg("window") = 200, py::arg("config") = FitConfig{})
      .def_property_readonly("seconds_spent", &GpOracle::seconds_spent)
      .def_property_readonly("predictions", &GpOracle::predictions);

  py::class_<HybridConfig>(m, "HybridConfig")
      .def(py::init([](double alpha, std::size_t n_gs, std::size_t n_gp, double e, const FitConfig& gp) {
             HybridConfig c{alpha, n_gs, n_gp, e, gp};
             c.validate();
             return c;
           }),
           py::arg("alpha") = 75.0, py::arg("n_gs") = 30, py::arg("n_gp") = 200, py::arg("e") = 0.1,
           py::arg("gp") = FitConfig{})
      .def_readwrite("alpha", &HybridConfig::alpha)
      .def_readwrite("n_gs", &HybridConfig::n_gs)
      .def_readwrite("n_gp", &HybridConfig::n_gp)
      .def_readwrite("e", &HybridConfig::e)
      .def_readwrite("gp", &HybridConfig::gp);

  py::class_<HybridOracle, Oracle>(m, "HybridOracle").def(py::init<HybridConfig>(), py::arg("config") = HybridConfig{});

  py::class_<HybridState>(m, "HybridState")
      .def(py::init<HybridConfig>(), py::arg("config"))
      .def("advance", py::overload_cast<Wei>(&HybridState::advance), py::arg("y"))
      .def_property_readonly("ready", &HybridState::ready)
      .def_property_readonly("history_size", &HybridState::history_size)
      .def("instant_success_rate", &HybridState::instant_success_rate)
      .def("retrospective_success_rate", &HybridState::retrospective_success_rate, py::arg("alpha"))
      .def("find_alpha_prime", &HybridState::find_alpha_prime)
      .def("gs_quote", &HybridState::gs_quote, py::arg("alpha"))
      .def("quote", [](const HybridState& s) { return decision_dict(hybrid_quote(s)); },
           "Switching-rule decision for the next block, as a dict.");

  m.def("backtest", [](Oracle& oracle, const std::vector<ProcessedBlock>& series, std::vector<double> alphas,
                       std::size_t first_target, std::size_t count, unsigned threads) {
    BacktestOptions opt{std::move(alphas), first_target, count, threads};
    BacktestReport report;
    {
      py::gil_scoped_release release;
      report = backtest(oracle, series, opt);
    }
    return to_python(report_to_json(report));
  }, py::arg("oracle"), py::arg("series"), py::arg("alphas") = std::vector<double>{50.0, 75.0, 84.0, 95.0},
     py::arg("first_target") = 0, py::arg("count") = 0, py::arg("threads") = 1,
     "Rolling backtest; returns the report as a dict (same schema as the CLI's JSON).");
}
