import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lcasep.bss_eval import (ClipScores, MetricSet, aggregate, bss_eval, decompose, nsdr,
                             score_clip, weighted_mean)
from lcasep.errors import AggregationError, DegenerateSourceError, ShapeError
from oracles import bss_oracle

seeds = st.integers(0, 2**32 - 1)


def _basis(n=8):
    return np.eye(n)


def test_perfect_estimate():
    r = np.random.default_rng(0)
    s = r.standard_normal((2, 64))
    d = decompose(s[0], s, 0)
    assert np.allclose(d.e_interf, 0, atol=1e-12) and np.allclose(d.e_artif, 0, atol=1e-12)
    e = _basis()
    assert bss_eval(e[0], e[:2], 0) == (200.0, 200.0, 200.0)


def test_twenty_db_sir_case():
    e = _basis()
    s1, s2 = e[0], e[1]
    sdr, sir, sar = bss_eval(s1 + 0.1 * s2, [s1, s2], 0)
    assert sir == pytest.approx(20.0, abs=1e-12)
    # e_artif is zero, so SDR = 10 log10(1 / 0.01) as well
    assert sdr == pytest.approx(20.0, abs=1e-12)
    assert sar == 200.0
    d = decompose(s1 + 0.1 * s2, [s1, s2], 0)
    assert not d.e_artif.any()


def test_twenty_db_sir_case_random_orthonormal():
    q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((50, 3)))
    s1, s2 = q[:, 0], q[:, 1]
    sdr, sir, _ = bss_eval(s1 + 0.1 * s2, [s1, s2], 0)
    assert sir == pytest.approx(20.0, abs=1e-9) and sdr == pytest.approx(20.0, abs=1e-9)


def test_artifact_only_case():
    e = _basis()
    s1, s2, noise = e[0], e[1], 0.1 * e[2]
    sdr, sir, sar = bss_eval(s1 + noise, [s1, s2], 0)
    assert sir == 200.0
    assert sar == pytest.approx(20.0, abs=1e-12)


def test_orthogonal_estimate_is_floor():
    e = _basis()
    assert bss_eval(e[2], [e[0], e[1]], 0)[0] == -200.0


def test_nsdr_examples():
    r = np.random.default_rng(2)
    s = r.standard_normal((2, 100))
    mix = 0.5 * (s[0] + s[1])
    assert nsdr(mix, s, 0, mix) == 0.0
    expected = 200.0 - bss_eval(mix, s, 0)[0]
    assert nsdr(s[0], s, 0, mix) == pytest.approx(expected, abs=1e-9)


def test_errors():
    with pytest.raises(DegenerateSourceError):
        decompose(np.ones(4), [np.zeros(4), np.ones(4)], 0)
    with pytest.raises(ShapeError):
        decompose(np.ones(5), [np.ones(4)], 0)
    with pytest.raises(AggregationError):
        aggregate([])


def test_rank_deficient_sources_use_pseudo_inverse():
    r = np.random.default_rng(3)
    s1 = r.standard_normal(32)
    est = s1 + 0.3 * r.standard_normal(32)
    d = decompose(est, [s1, 2 * s1], 0)
    assert np.allclose(d.s_target + d.e_interf + d.e_artif, est)
    assert np.allclose(d.e_interf, 0, atol=1e-9)


@given(seeds, st.integers(1, 3), st.integers(8, 64))
def test_matches_normal_equation_oracle(seed, n_src, n):
    r = np.random.default_rng(seed)
    S = r.standard_normal((n_src, n))
    est = r.standard_normal(n_src) @ S + 0.3 * r.standard_normal(n)
    j = int(r.integers(n_src))
    got, want = bss_eval(est, S, j), bss_oracle(est, S, j)
    assert np.allclose(got, want, rtol=0, atol=1e-6)


@given(seeds, st.integers(1, 3))
def test_decomposition_properties(seed, n_src):
    r = np.random.default_rng(seed)
    S = r.standard_normal((n_src, 48))
    est = r.standard_normal(48) + S.sum(axis=0)
    d = decompose(est, S, 0)
    assert np.linalg.norm(d.s_target + d.e_interf + d.e_artif - est) <= 1e-9 * np.linalg.norm(est)
    scale = np.linalg.norm(S, axis=1) * np.linalg.norm(d.e_artif)
    assert np.all(np.abs(S @ d.e_artif) <= 1e-9 * max(scale.max(), 1))
    # s_target in span{target}; s_target + e_interf in span{sources}
    t = S[0] / np.linalg.norm(S[0])
    assert np.linalg.norm(d.s_target - (d.s_target @ t) * t) < 1e-9 * np.linalg.norm(est)
    proj = S.T @ np.linalg.lstsq(S.T, d.s_target + d.e_interf, rcond=None)[0]
    assert np.linalg.norm(proj - d.s_target - d.e_interf) < 1e-9 * np.linalg.norm(est)


@given(seeds, st.floats(1e-3, 1e3))
def test_gain_invariance_of_sir(seed, alpha):
    r = np.random.default_rng(seed)
    S = r.standard_normal((2, 40))
    est = S[0] + 0.5 * S[1] + 0.2 * r.standard_normal(40)
    assert abs(bss_eval(alpha * est, S, 0)[1] - bss_eval(est, S, 0)[1]) < 1e-9


def _clip(cid, length, value):
    m = MetricSet(value, value, value, value)
    return ClipScores(cid, length, m, m)


def test_aggregate_weighting():
    agg = aggregate([_clip("a", 16000, 0.0), _clip("b", 48000, 10.0)])
    assert agg.means["vocal", "sdr"] == pytest.approx(7.5)
    assert agg.spreads["vocal", "sdr"] == pytest.approx(5.0)
    equal = aggregate([_clip("a", 32000, 1.0), _clip("b", 32000, 4.0), _clip("c", 32000, 7.0)])
    assert equal.means["accomp", "nsdr"] == pytest.approx(4.0)
    assert weighted_mean([0, 10], [1, 3]) == 7.5
    row = equal.table_row("vocal")
    assert set(row) == {"GSIR", "GSAR", "GNSDR"} and row["GSIR"][0] == pytest.approx(4.0)


def test_score_clip():
    r = np.random.default_rng(4)
    v, a = r.standard_normal((2, 256))
    mix = 0.5 * v + 0.5 * a
    c = score_clip("x", 0.5 * v, 0.5 * a, v, a, mix)
    assert c.length == 256
    assert c.vocal.sdr == 200.0 and c.accomp.sdr == 200.0
    assert c.vocal.nsdr == pytest.approx(200.0 - bss_eval(mix, [v, a], 0)[0])
