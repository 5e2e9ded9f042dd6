import json
import math
import random

import pytest

import gas_oracle as go

GWEI = 10**9


def series(n, seed=3):
    rng = random.Random(seed)
    return [go.ProcessedBlock(1000 + i, int(rng.lognormvariate(math.log(100), 0.2) * GWEI)) for i in range(n)]


def test_wei_is_a_python_int():
    big = 2**100 + 7
    block = go.RawBlock(1, [big, 0])
    assert block.gas_prices == [big, 0]
    assert isinstance(block.gas_prices[0], int)
    with pytest.raises(ValueError):
        go.RawBlock(1, [-1])
    with pytest.raises(TypeError):
        go.RawBlock(1, [1.5])


def test_preprocess():
    blocks = [go.RawBlock(1, list(range(1, 8))), go.RawBlock(2, [5] * 6), go.RawBlock(3, [9] * 8)]
    out = go.preprocess_chain(blocks)
    assert [b.block_number for b in out] == [1, 3]
    assert [b.min_gas_price for b in out] == [2, 9]
    assert out[0].surviving_tx_count == 6
    assert go.low_fee_threshold(list(range(1, 8))) == pytest.approx(1.15)


def test_file_round_trip(tmp_path):
    blocks = [go.RawBlock(10, [3 * GWEI, 2**70]), go.RawBlock(11, [1])]
    go.save_blocks(blocks, tmp_path / "raw.csv")
    assert go.load_blocks(tmp_path / "raw.csv") == blocks
    processed = series(5)
    go.save_processed(processed, tmp_path / "p.csv")
    back = go.load_processed(tmp_path / "p.csv")
    assert [b.min_gas_price for b in back] == [b.min_gas_price for b in processed]
    with pytest.raises(go.GasOracleError):
        go.load_processed(tmp_path / "missing.csv")


def test_percentile_and_normal():
    assert go.inverse_normal_cdf(0.5) == 0.0
    assert go.inverse_normal_cdf(0.95) == pytest.approx(1.6448536, abs=1e-7)
    d = go.PredictiveDistribution(100.0 * GWEI, 10.0 * GWEI)
    assert go.percentile_price(d, 50) == 100 * GWEI
    assert go.percentile_price(d, 75) == math.ceil(go.percentile_value(d, 75))
    assert go.empirical_percentile_price(list(range(1, 201)), 50) == 101
    with pytest.raises(go.PreconditionError):
        go.empirical_percentile_price([], 50)


def test_gp_fit_and_predict():
    prices = [b.min_gas_price for b in series(60)]
    model = go.fit(prices)
    hp = model.hyperparams
    assert 0.5 <= hp.length_scale <= 500
    direct = go.GpModel(prices, hp).predict_next()
    quick = go.fit_and_predict_next(prices)
    assert direct.mean == pytest.approx(quick.mean, rel=1e-12)
    assert quick.std > 0
    assert 50 * GWEI < quick.mean < 200 * GWEI


def test_metrics():
    assert go.ipw(168.3, 0.744) == pytest.approx(226.21, abs=0.01)
    assert go.success_rate([1, 0, 1, 1]) == 0.75
    assert go.min_short_term_success([1, 1, 0, 0, 1, 1], 2) == 0.0
    assert go.average_cost([100 * GWEI, 200 * GWEI]) == pytest.approx(150.0)


def test_backtest_report_dict():
    s = series(260)
    report = go.backtest(go.PercentileOracle.gs_express(200), s, alphas=[50, 95])
    assert report["oracle"] == "gs-express"
    assert report["target_range"] == {"first": 201, "last": 260, "count": 60}
    assert len(report["records"][0]) == 60
    assert report["invariant_violations"] == []
    assert len(report["aggregates"]) == 2
    rates = [a["success_rate"] for a in report["aggregates"].values()]
    assert sorted(rates) == rates
    json.dumps(report)

    prices = [b.min_gas_price for b in s]
    assert go.gs_express_quote(prices, 200, 50) == go.PercentileOracle.gs_express().quote(prices, 200, [50])[0]
    assert go.geth_quote(prices, 200) == go.PercentileOracle.geth().quote(prices, 200, [60])[0]


def test_hybrid_state():
    cfg = go.HybridConfig(alpha=75, n_gs=30, n_gp=60, e=0.1)
    state = go.HybridState(cfg)
    for b in series(100):
        state.advance(b.min_gas_price)
    assert state.ready
    d = state.quote()
    assert d["case"] in ("below_band", "in_band", "above_band")
    assert d["price"] > 0
    with pytest.raises(go.PreconditionError):
        go.HybridConfig(alpha=100)
