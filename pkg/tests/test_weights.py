import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdca.weights import (Constant, Power, SubExponential, WeightAccumulator, accumulate,
                          aggregates, parse_schedule, verify_conditions, weight)

# Frozen values from 40-digit arithmetic (direct summation of the definitions).
SUBEXP_ALPHA = {1: 1.3519298650210721708, 10: 0.64488968558254143476, 1000: 0.77706699912165444749}
SUBEXP_A = {10: 9.4620790755615583334, 1000: 603.02421323854299681}
SUBEXP_BETA_1000 = 31.184173402578322357
POWER_HALF = (21098.455887480735355, 29.822784986827801382)     # A_1000, beta_1000
POWER_MHALF = (62.801008765243232338, 21.559001692225106434)


def test_constant_aggregates():
    acc = WeightAccumulator(Constant())
    for k in range(100):
        r = acc.accumulate(k)
        assert r == pytest.approx(1.0 / (k + 1), rel=1e-15)
    assert acc.A == 100.0 and acc.S == 100.0
    assert acc.beta == pytest.approx(10.0, rel=1e-14)


@pytest.mark.parametrize("k, expected", sorted(SUBEXP_ALPHA.items()))
def test_subexp_weight_oracle(k, expected):
    assert weight(SubExponential(5, 0.2), k) == pytest.approx(expected, rel=1e-12)


def test_subexp_alpha0_and_totals():
    s = SubExponential(5, 0.2)
    assert s.weight(0) == 1.0
    agg = aggregates(s, 1000)
    for K, A in SUBEXP_A.items():
        assert agg["A"][K] == pytest.approx(A, rel=1e-12)
        assert math.exp(s.log_total(K)) == pytest.approx(A, rel=1e-12)
    assert agg["beta"][1000] == pytest.approx(SUBEXP_BETA_1000, rel=1e-11)


@pytest.mark.parametrize("sched, oracle", [(Power(0.5), POWER_HALF), (Power(-0.5), POWER_MHALF)])
def test_power_totals_oracle(sched, oracle):
    agg = aggregates(sched, 1000)
    assert agg["A"][1000] == pytest.approx(oracle[0], rel=1e-12)
    assert agg["beta"][1000] == pytest.approx(oracle[1], rel=1e-12)


def test_subexp_log_domain_no_overflow():
    s = SubExponential(5, 0.2)
    la = s.log_weight(10**16)
    assert math.isfinite(la) and la > 710  # exp(la) itself would overflow
    acc = WeightAccumulator(s)
    for k in range(5):
        acc.accumulate(k)
    assert math.isfinite(acc.log_A)


def test_accumulator_matches_vectorized():
    for sched in (Constant(), Power(0.5), Power(-0.5), SubExponential(5, 0.2)):
        agg = aggregates(sched, 500)
        acc = WeightAccumulator(sched)
        for k in range(501):
            acc, r = accumulate(acc, sched, k)
            assert r == pytest.approx(agg["ratio"][k], rel=1e-12, abs=1e-15)
        assert acc.log_A == pytest.approx(agg["log_A"][500], rel=1e-13)
        assert acc.beta == pytest.approx(agg["beta"][500], rel=1e-12)
        assert acc.normalized_weights().sum() == pytest.approx(1.0, rel=1e-12)


def test_accumulate_out_of_order():
    acc = WeightAccumulator(Constant())
    acc.accumulate(0)
    with pytest.raises(ValueError, match="out-of-order"):
        acc.accumulate(2)
    with pytest.raises(ValueError):
        accumulate(acc, Power(0.5), 1)


@pytest.mark.parametrize("bad", [lambda: Power(-0.6), lambda: SubExponential(1.0, 0.2),
                                 lambda: SubExponential(5, 0.25), lambda: SubExponential(5, 0.0)])
def test_schedule_validation(bad):
    with pytest.raises(ValueError):
        bad()


def test_parse_schedule():
    assert parse_schedule("constant") == Constant()
    assert parse_schedule("power:-0.5") == Power(-0.5)
    assert parse_schedule("subexp:5,0.2") == SubExponential(5.0, 0.2)
    for bad in ("power", "subexp:5", "linear:1", "power:x"):
        with pytest.raises(ValueError):
            parse_schedule(bad)
    assert str(parse_schedule(str(SubExponential(5, 0.2)))) == "subexp:5,0.2"


@given(st.floats(-0.5, 2.0), st.integers(1, 300))
@settings(max_examples=40, deadline=None)
def test_ratio_recurrence_reproduces_average(e, K):
    """Incremental y = (1-r) y + r z equals the direct weighted average."""
    sched = Power(e)
    z = np.sin(np.arange(K + 1) * 0.7)
    acc, y = WeightAccumulator(sched), 0.0
    for k in range(K + 1):
        r = acc.accumulate(k)
        y = (1 - r) * y + r * z[k]
    w = sched.weights(K)
    assert y == pytest.approx((w @ z) / w.sum(), rel=1e-10, abs=1e-12)


@given(st.floats(1.1, 20.0), st.floats(0.01, 0.24))
@settings(max_examples=30, deadline=None)
def test_subexp_telescoping(a, e):
    s = SubExponential(a, e)
    K = 200
    direct = np.log(np.cumsum(np.exp(s.log_weights(K))))
    assert np.allclose(s.log_totals(K), direct, rtol=1e-11, atol=1e-12)


def test_verify_rejects_short_horizon():
    with pytest.raises(ValueError):
        verify_conditions(Constant(), 999)


@pytest.mark.parametrize("sched, K", [(Constant(), 10**5), (Power(-0.5), 10**5), (Power(0.5), 10**5),
                                      (SubExponential(5, 0.2), 10**4)])
def test_verify_conditions_pass(sched, K):
    rep = verify_conditions(sched, K)
    assert rep.passed, rep.summary()
    assert rep.divergence == "consistent" and rep.series == "consistent"


def test_constant_report_values():
    rep = verify_conditions(Constant(), 10**5)
    # S/A^2 = 1/(k+1): the fitted exponent is ~1 and beta grows like sqrt(k)
    assert rep.gamma_hat == pytest.approx(1.0, abs=1e-3)
    assert rep.beta_slope == pytest.approx(0.5, abs=1e-3)
    assert rep.branches == ["gamma>1/2", "quotient-limit"]


def test_subexp_beta_slope_matches_direct_fit():
    # oracle: log-log slope of beta_k from direct summation on [K/10, K]
    K = 10**4
    s = SubExponential(5, 0.2)
    w = s.weights(K)
    beta = np.cumsum(w) / np.sqrt(np.cumsum(w * w))
    k = np.unique(np.geomspace(K // 10, K, 200).astype(int))
    slope = np.polyfit(np.log(k), np.log(beta[k]), 1)[0]
    assert verify_conditions(s, K).beta_slope == pytest.approx(slope, abs=1e-6)


def test_report_csv_columns():
    rep = verify_conditions(Power(0.5), 1000)
    buf = io.StringIO()
    rep.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "k,alpha_k,A_k,beta_k,cond_c_partial_sum"
    assert len(lines) == 1002
    assert lines[1].startswith("0,1.0,1.0,1.0,0.0")
    assert "overall" in rep.summary()
