import math

import mpmath
import numpy as np
import pytest

from fxpbs.datapath import PRESET_FORMATS
from fxpbs.fft import FftPlan
from fxpbs.noise import (
    NoFeasibleWidth,
    NoiseBudget,
    SweepPoint,
    UniformFftWorkload,
    ZeroFftWorkload,
    log2_erfc,
    measure_variance,
    overflow_probability_log2,
    points_from_csv,
    select_fractional_bits,
    select_msb,
    sweep_lsb,
    total_budget,
)
from fxpbs.params import SET_I


def test_select_msb_examples():
    assert select_msb(1.0, 2.0**-64) == 5
    assert select_msb(1.0, 1.0) == -64
    with pytest.raises(ValueError):
        select_msb(0.0)
    with pytest.raises(ValueError):
        select_msb(-1.0)


def test_select_msb_doubling():
    base = select_msb(0.37, 2.0**-64)
    for k in range(1, 11):
        assert select_msb(0.37 * 2**k, 2.0**-64) == base + k


def test_select_msb_monotone(rng):
    sig = np.sort(rng.uniform(1e-6, 1e3, 200))
    ps = [select_msb(s) for s in sig]
    assert all(b >= a for a, b in zip(ps, ps[1:]))
    ts = [2.0**-e for e in range(1, 129, 7)]
    pt = [select_msb(1.0, t) for t in ts]
    assert all(b >= a for a, b in zip(pt, pt[1:]))


def test_select_msb_is_smallest():
    for sigma in (1e-3, 0.7, 5.0, 123.0):
        for t in (2.0**-32, 2.0**-64, 2.0**-128):
            p = select_msb(sigma, t)
            assert overflow_probability_log2(p, sigma) <= math.log2(t)
            assert overflow_probability_log2(p - 1, sigma) > math.log2(t)


def test_log_erfc_against_mpmath():
    for x in (0.1, 1.0, 4.0, 6.47, 9.3, 12.0):
        ref = float(mpmath.log(mpmath.erfc(x), 2))
        assert abs(log2_erfc(x) - ref) <= 1e-9 * abs(ref) + 1e-12


def test_budget_split():
    b = NoiseBudget(6.0)
    assert b.approx == 3.0 and math.isclose(b.per_source, 1.0)
    with pytest.raises(ValueError):
        NoiseBudget(1.0, approx_fraction=0)


def erfcinv(t):
    """Independent inversion of erfc by root finding at high precision."""
    with mpmath.workdps(40):
        t = mpmath.mpf(t)
        return float(mpmath.findroot(lambda x: mpmath.log(mpmath.erfc(x) / t), (mpmath.mpf("1e-6"), 30), solver="illinois"))


def test_total_budget():
    half = erfcinv(0.5)
    assert math.isclose(math.sqrt(total_budget(SET_I, 0.5).sigma2_total), (1 / 16) / (math.sqrt(2) * half))
    x32 = erfcinv(mpmath.mpf(2) ** -32)
    s = math.sqrt(total_budget(SET_I).sigma2_total)
    assert math.isclose(s, (1 / 16) / (math.sqrt(2) * x32), rel_tol=1e-12)
    s2 = math.sqrt(total_budget(SET_I, message_bits=2).sigma2_total)
    assert math.isclose(s2, s / 2)


def test_zero_workload_variance():
    rep = measure_variance("fft.stage3", ZeroFftWorkload(SET_I), 100)
    assert rep.variance == 0 and rep.count > 0


def test_uniform_input_variance():
    rep = measure_variance("fft.input", UniformFftWorkload(SET_I), 400)
    assert rep.ci_low <= 1 / 12 <= rep.ci_high
    with pytest.raises(KeyError):
        measure_variance("fft.nowhere", UniformFftWorkload(SET_I), 100)
    with pytest.raises(ValueError):
        measure_variance("fft.input", UniformFftWorkload(SET_I), 10)


def test_unscaled_stage_growth():
    plan = FftPlan(SET_I.N)
    w = UniformFftWorkload(SET_I, plan=plan)
    v = [measure_variance(f"fft.stage{s}", w, 100).variance for s in range(plan.stages)]
    assert all(b >= a for a, b in zip(v, v[1:]))
    assert math.isclose(v[-1] / v[0], 2 ** (plan.stages - 1), rel_tol=0.1)


def test_pairing_cancels(set_i_lab):
    m = set_i_lab.measure_output_noise(None, 100, against=None)
    assert m.variance == 0
    m = set_i_lab.measure_output_noise(set_i_lab.base(53), 100)
    assert m.variance < 1e-18


def test_bk_slope(set_i_lab):
    base = set_i_lab.base(53)
    v = [set_i_lab.measure_output_noise(base.with_fractional(bk=f), 200).variance for f in (16, 17, 18)]
    assert 3.0 < v[0] / v[1] < 5.0 and 3.0 < v[1] / v[2] < 5.0


def test_preset_within_budget(set_i_lab):
    m = set_i_lab.measure_output_noise(PRESET_FORMATS["I"], 300)
    assert m.variance <= 3 * total_budget(SET_I).per_source


def test_sources_add_independently(set_i_lab):
    base = set_i_lab.base(53)
    t3 = PRESET_FORMATS["I"]
    parts = [set_i_lab.measure_output_noise(base.with_fractional(**{k: getattr(t3, k).fractional_bits}), 300)
             .variance for k in ("bk", "fft", "ifft")]
    combined = set_i_lab.measure_output_noise(t3, 300).variance
    assert abs(combined / sum(parts) - 1) < 0.2


def test_phase_and_pbs_methods(set_i_lab):
    m = set_i_lab.measure_output_noise(PRESET_FORMATS["I"], 100, method="cmux", metric="phase")
    assert m.variance > 0
    with pytest.raises(ValueError):
        set_i_lab.measure_output_noise(PRESET_FORMATS["I"], 10, method="pbs", metric="coefficient")
    with pytest.raises(ValueError):
        set_i_lab.measure_output_noise(PRESET_FORMATS["I"], 10, method="other")


def test_sweep_selection_rules(set_i_lab):
    res = sweep_lsb(set_i_lab, "ifft", range(4, 8), float("inf"), trials=100, floor_trials=0)
    assert res.selected == 4
    with pytest.raises(NoFeasibleWidth):
        sweep_lsb(set_i_lab, "ifft", range(2, 4), 1e-12, trials=100, floor_trials=0)
    with pytest.raises(ValueError):
        sweep_lsb(set_i_lab, "ifft", [], trials=100)
    with pytest.raises(ValueError):
        sweep_lsb(set_i_lab, "twiddle", [3], trials=100)


def test_sweep_csv_roundtrip(set_i_lab):
    b = total_budget(SET_I)
    res = sweep_lsb(set_i_lab, "bk", range(17, 22), b, trials=100, floor_trials=0)
    pts = points_from_csv(res.to_csv())
    assert [p.fractional_bits for p in pts] == list(range(17, 22))
    assert select_fractional_bits(pts, b.per_source) == res.selected
    assert res.is_monotone()
    assert '"selected_fractional_bits"' in res.to_json()


def test_selection_is_pure():
    pts = [SweepPoint("bk", f, v, v, v, 10) for f, v in [(10, 9.0), (11, 3.0), (12, 1.0), (13, 0.5)]]
    assert select_fractional_bits(pts, 3.0) == 11
    assert select_fractional_bits(list(reversed(pts)), 3.0) == 11
    # a noisy bump above the budget stops the descent
    bumpy = pts + [SweepPoint("bk", 9, 2.0, 2.0, 2.0, 10)]
    assert select_fractional_bits(bumpy, 3.0) == 11
