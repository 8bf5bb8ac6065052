import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ndtsim import smallnet
from ndtsim.ndt import waterfill
from ndtsim.smallnet import (OrderingError, TwoUserInstance, aic_capacity, bound_comparison, co_mimo_capacity,
                             copt_capacity, mimo_dedicated_rate, ndt_capacity, symmetric_geometry, random_instance,
                             sum_rate_tin)


def swapped(inst):
    """Relabel the UEs together with their receivers."""
    perm = [1, 0]
    return TwoUserInstance(H=inst.H[np.ix_(perm, perm)], g_r=inst.g_b[perm], g_b=inst.g_r[perm], n_d=inst.n_d,
                           n_a=inst.n_a, W_d=inst.W_d, W_a=inst.W_a, P_max=inst.P_max[perm])


def brute(objective, P_max, points):
    x = np.linspace(0, P_max[0], points)
    y = np.linspace(0, P_max[1], points)
    X, Y = np.meshgrid(x, y, indexing="ij")
    return float(np.max(objective(X, Y)))


def test_zero_channel_gives_zero_dedicated_rate():
    inst = TwoUserInstance(H=np.zeros((2, 2)), g_r=[0, 0], g_b=[0, 0], n_d=1.0, n_a=1.0)
    for f in (co_mimo_capacity, aic_capacity, copt_capacity):
        assert f(inst) == 0.0
    assert mimo_dedicated_rate(inst, 1.0, 1.0) == 0.0


def test_validation():
    with pytest.raises(ValueError):
        TwoUserInstance(H=np.eye(2), g_r=[-1, 0], g_b=[0, 0], n_d=1.0, n_a=1.0)
    with pytest.raises(ValueError):
        TwoUserInstance(H=np.eye(2), g_r=[0, 0], g_b=[0, 0], n_d=0.0, n_a=1.0)
    with pytest.raises(ValueError):
        TwoUserInstance.from_dict({"H": np.eye(2).tolist(), "g_r": 0, "g_b": 0, "n_d": 1, "n_a": 1, "x": 2})
    with pytest.raises(ValueError):
        co_mimo_capacity(symmetric_geometry(), resolution=0)


def test_dict_round_trip(tmp_path):
    inst = random_instance(np.random.default_rng(3))
    back = TwoUserInstance.from_dict(json.loads(json.dumps(inst.to_dict())))
    assert np.array_equal(back.H, inst.H) and np.array_equal(back.g_r, inst.g_r)
    path = tmp_path / "inst.json"
    path.write_text(json.dumps({"g": inst.g.tolist(), "g_r": inst.g_r.tolist(), "g_b": inst.g_b.tolist(),
                                "n_d": inst.n_d, "n_a": inst.n_a}))
    loaded = TwoUserInstance.load(path)
    assert np.allclose(loaded.g, inst.g, rtol=1e-14)


def test_equal_power_mimo_rate_factors_over_singular_values():
    rng = np.random.default_rng(0)
    for _ in range(20):
        H = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        inst = TwoUserInstance(H=H, g_r=[1, 1], g_b=[1, 1], n_d=0.3, n_a=1.0, W_d=1.0)
        s = np.linalg.svd(H, compute_uv=False)
        p = rng.random()
        expected = np.sum(np.log2(1 + p * s ** 2 / 0.3))
        assert mimo_dedicated_rate(inst, p, p) == pytest.approx(expected, rel=1e-12)


def test_mimo_rate_matches_log_det():
    rng = np.random.default_rng(1)
    for _ in range(20):
        H = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        inst = TwoUserInstance(H=H, g_r=[1, 1], g_b=[1, 1], n_d=0.5, n_a=1.0, W_d=1.0)
        p = rng.random(2)
        G = H.T
        det = np.linalg.det(np.eye(2) + G @ np.diag(p) @ G.conj().T / 0.5).real
        assert mimo_dedicated_rate(inst, *p) == pytest.approx(np.log2(det), rel=1e-12)


def test_mimo_rate_invariant_to_receiver_rotation():
    rng = np.random.default_rng(2)
    H = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    U, _ = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    a = TwoUserInstance(H=H, g_r=[1, 1], g_b=[1, 1], n_d=0.5, n_a=1.0)
    b = TwoUserInstance(H=H @ U.T, g_r=[1, 1], g_b=[1, 1], n_d=0.5, n_a=1.0)
    for p in ([0.2, 0.9], [1.0, 0.0], [0.5, 0.5]):
        assert mimo_dedicated_rate(a, *p) == pytest.approx(mimo_dedicated_rate(b, *p), rel=1e-12)


def test_relabelling_ues_keeps_symmetric_bounds():
    for seed in range(5):
        inst = random_instance(np.random.default_rng(seed))
        sw = swapped(inst)
        assert co_mimo_capacity(sw) == pytest.approx(co_mimo_capacity(inst), rel=1e-9)
        assert copt_capacity(sw) == pytest.approx(copt_capacity(inst), rel=1e-9)


def test_symmetric_instance_ordering():
    inst = symmetric_geometry()
    rep = bound_comparison(inst)
    assert rep.co_mimo > rep.aic > rep.copt >= rep.ndt * (1 - 1e-6)
    assert rep.ndt_converged
    assert 0 <= rep.gap < 0.1
    d = rep.to_dict()
    assert set(d["ratios"]) == {"aic", "copt", "ndt"}


def test_without_cross_links_aic_equals_copt():
    inst = symmetric_geometry()
    H = np.diag(np.diag(inst.H))
    inst = TwoUserInstance(H=H, g_r=inst.g_r, g_b=inst.g_b, n_d=inst.n_d, n_a=inst.n_a, W_d=inst.W_d,
                           W_a=inst.W_a)
    assert aic_capacity(inst) == pytest.approx(copt_capacity(inst), rel=1e-12)


def test_search_beats_finer_brute_force():
    inst = random_instance(np.random.default_rng(7))
    g, W_d, W_a, n_d, n_a = inst.g, inst.W_d, inst.W_a, inst.n_d, inst.n_a
    best = np.maximum(inst.g_r, inst.g_b)

    def tin(p0, p1):
        ded = (W_d * np.log2(1 + g[0, 0] * p0 / (n_d + g[1, 0] * p1))
               + W_d * np.log2(1 + g[1, 1] * p1 / (n_d + g[0, 1] * p0)))
        return ded + W_a * np.log2(1 + (1 - p0) * best[0] / n_a) + W_a * np.log2(1 + (1 - p1) * best[1] / n_a)

    fine = brute(tin, inst.P_max, 2001)
    assert copt_capacity(inst) >= fine * (1 - 1e-9)
    assert copt_capacity(inst) <= fine * (1 + 1e-4)


def test_copt_dominates_every_poa_choice():
    inst = random_instance(np.random.default_rng(11))
    c = copt_capacity(inst)
    rng = np.random.default_rng(0)
    for _ in range(200):
        P_d = rng.random(2)
        a = rng.integers(0, 2, 2)
        assert sum_rate_tin(inst, P_d, a) <= c * (1 + 1e-12)


def test_ordering_on_random_instances():
    rng = np.random.default_rng(5)
    for _ in range(10):
        bound_comparison(random_instance(rng))


def test_ordering_violation_raises(monkeypatch):
    monkeypatch.setattr(smallnet, "ndt_capacity", lambda inst, full_output=False: (1e12, type("T", (), {
        "converged": True})()))
    with pytest.raises(OrderingError):
        bound_comparison(symmetric_geometry())
    rep = bound_comparison(symmetric_geometry(), check=False)
    assert rep.ndt == 1e12


def test_noise_dominated_bounds_agree():
    inst = symmetric_geometry().scaled_noise(1e6)
    rep = bound_comparison(inst)
    assert rep.ndt >= 0.95 * rep.co_mimo


def test_gap_shrinks_with_noise():
    inst = symmetric_geometry()
    gaps = [bound_comparison(inst.scaled_noise(f)).gap for f in (1, 10, 100, 1000)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_bounds_grow_with_power_budget():
    inst = symmetric_geometry()
    values = []
    for p in (0.25, 0.5, 1.0, 2.0):
        scaled = TwoUserInstance(H=inst.H, g_r=inst.g_r, g_b=inst.g_b, n_d=inst.n_d, n_a=inst.n_a,
                                 W_d=inst.W_d, W_a=inst.W_a, P_max=[p, p])
        values.append((co_mimo_capacity(scaled), copt_capacity(scaled)))
    for (c0, t0), (c1, t1) in zip(values, values[1:]):
        assert c1 > c0 and t1 > t0


def test_silent_ue_reduces_to_single_user_waterfilling():
    inst = random_instance(np.random.default_rng(4))
    inst = TwoUserInstance(H=inst.H, g_r=inst.g_r, g_b=inst.g_b, n_d=inst.n_d, n_a=inst.n_a, W_d=inst.W_d,
                           W_a=inst.W_a, P_max=[1.0, 0.0])
    g = inst.g
    E_d = inst.n_d / np.sum(g[0])
    E_x = inst.n_a / (inst.g_r[0] + inst.g_b[0])
    P_d = waterfill(np.array([1.0]), inst.W_d, inst.W_a, np.array([E_d]), np.array([E_x]))[0][0]
    expected = inst.W_d * np.log2(1 + P_d / E_d) + inst.W_a * np.log2(1 + (1 - P_d) / E_x)
    assert co_mimo_capacity(inst) == pytest.approx(expected, rel=1e-9)


def test_ndt_rate_is_a_tin_rate():
    inst = random_instance(np.random.default_rng(9))
    eta, trace = ndt_capacity(inst, full_output=True)
    # the engine's network columns are [relay, BS]
    a = trace.a[-1]
    assert eta == pytest.approx(sum_rate_tin(inst, trace.P_d[-1], a), rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.integers(0, 2 ** 32 - 1))
def test_mimo_rate_dominates_tin_dedicated(p0, p1, seed):
    inst = random_instance(np.random.default_rng(seed))
    g, n_d, W_d = inst.g, inst.n_d, inst.W_d
    tin = (W_d * np.log2(1 + g[0, 0] * p0 / (n_d + g[1, 0] * p1))
           + W_d * np.log2(1 + g[1, 1] * p1 / (n_d + g[0, 1] * p0)))
    assert mimo_dedicated_rate(inst, p0, p1) >= tin * (1 - 1e-12)
