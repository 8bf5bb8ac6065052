"""
Comparison schemes: greedy per-UE maximization, single-PoA waterfilling
(SP-WF) and BS-PoA waterfilling (BS-WF).
"""

import enum

import numpy as np

from . import ratecalc
from .ndt import CASE_GREEDY, CASE_WF_BS, CASE_WF_RELAY, iterate, ndt_update, waterfill
from .numerics import golden_or_grid_maximize
from .ratecalc import initial_state


class SchemeId(str, enum.Enum):
    NDT = "NDT"
    GREEDY = "GREEDY"
    SP_WF = "SP_WF"
    BS_WF = "BS_WF"


GREEDY_RESOLUTION = 1e-3  # fraction of P_max


def greedy_update(state, realization, params, resolution=GREEDY_RESOLUTION):
    """
    Every UE jumps to the maximizer of its own objective, others fixed.

    For each choice of adaptive PoA the dedicated power is searched over
    ``[0, P_max]`` on a grid of ``resolution * P_max`` with golden
    refinement. The larger value wins; ties go to ``a = 1``, then to the
    smaller power.
    """
    E_d, E_b, E_r = ratecalc.effective_interference(state, realization)
    rates = ratecalc.link_rates(state, realization)
    V = ratecalc.rate_differential(state, realization, rates)
    q = ratecalc.relayed_rate(state, realization, rates)
    avail = ratecalc.available_capacity(V, q, realization)
    ra = realization.relay_attached
    W_d, W_a = realization.W_d, realization.W_a

    n = realization.n
    P_d = np.empty(n)
    a = np.empty(n, dtype=int)
    for i in range(n):
        P_max = realization.P_max[i]
        best = None
        choices = (1, 0) if realization.has_relay_candidate[i] else (1,)
        for choice in choices:
            def f(x, choice=choice):
                return ratecalc.objective_values(choice, x, P_max, E_d[i], E_b[i], E_r[i], avail[i],
                                                 ra[i], W_d, W_a)
            x, fx = golden_or_grid_maximize(f, 0.0, P_max, resolution * P_max, vectorized=True)
            if best is None or fx > best[2]:
                best = (choice, x, fx)
        a[i], P_d[i] = best[0], best[1]
    return P_d, realization.P_max - P_d, a, np.full(n, CASE_GREEDY)


def fixed_attachment(realization):
    """Single-PoA indicator: relay-attached UEs stay on the relay."""
    return np.where(realization.relay_attached & realization.has_relay_candidate, 0, 1)


def spwf_update(state, realization, params):
    a = fixed_attachment(realization)
    E_d, E_b, E_r = ratecalc.effective_interference(state, realization)
    P_d, P_a = waterfill(realization.P_max, realization.W_d, realization.W_a, E_d, np.where(a == 0, E_r, E_b))
    return P_d, P_a, a, np.where(a == 0, CASE_WF_RELAY, CASE_WF_BS)


def bswf_update(state, realization, params):
    E_d, E_b, _ = ratecalc.effective_interference(state, realization)
    P_d, P_a = waterfill(realization.P_max, realization.W_d, realization.W_a, E_d, E_b)
    n = realization.n
    return P_d, P_a, np.ones(n, dtype=int), np.full(n, CASE_WF_BS)


def greedy_step(state, realization, params=None):
    P_d, P_a, a, _ = greedy_update(state, realization, params)
    return ratecalc.NetworkState(P_d=P_d, P_a=P_a, a=a, k=state.k + 1)


def greedy_run(realization, params, initial=None):
    return iterate(greedy_update, realization, params, initial, scheme=SchemeId.GREEDY.value)


def spwf_run(realization, params, initial=None):
    """Single-PoA waterfilling; the attachment never changes."""
    if initial is None:
        initial = initial_state(realization, a=fixed_attachment(realization))
    return iterate(spwf_update, realization, params, initial, scheme=SchemeId.SP_WF.value)


def bswf_run(realization, params, initial=None):
    """Relay-attached UEs split over relay and BS, the rest use the BS only."""
    if initial is None:
        initial = initial_state(realization, a=1)
    return iterate(bswf_update, realization, params, initial, scheme=SchemeId.BS_WF.value)


def run_scheme(scheme, realization, params, initial=None):
    scheme = SchemeId(scheme)
    if scheme is SchemeId.NDT:
        return iterate(ndt_update, realization, params, initial, scheme=scheme.value)
    if scheme is SchemeId.GREEDY:
        return greedy_run(realization, params, initial)
    if scheme is SchemeId.SP_WF:
        return spwf_run(realization, params, initial)
    return bswf_run(realization, params, initial)
