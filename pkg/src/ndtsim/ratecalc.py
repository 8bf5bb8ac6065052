"""
Interference, SINR, link rates, relay load and the end-to-end capacity of
a network state.

All functions are vectorized over UEs and take a :class:`NetworkState`
plus a :class:`~ndtsim.scenario.ChannelRealization`.
"""

from dataclasses import dataclass, replace

import numpy as np

#: Relay traffic of a BS-attached UE on its adaptive link. ``"complement"``
#: counts ``(1 - a_i) W_a eta(gamma_r)``, which agrees with the relay load
#: and capacity bookkeeping; ``"literal"`` counts ``a_i W_a eta(gamma_r)``.
BS_ATTACHED_RELAY_TERM = "complement"


@dataclass
class NetworkState:
    """Per-UE power split, adaptive-link PoA indicator and iteration index."""

    P_d: np.ndarray
    P_a: np.ndarray
    a: np.ndarray
    k: int = 0

    def __post_init__(self):
        self.P_d = np.asarray(self.P_d, dtype=float)
        self.P_a = np.asarray(self.P_a, dtype=float)
        self.a = np.asarray(self.a, dtype=int)

    def check(self, P_max):
        if np.any(self.P_d < 0) or np.any(self.P_a < 0):
            raise ValueError("negative transmit power")
        if np.any(self.P_d + self.P_a > P_max + 1e-12):
            raise ValueError("power budget exceeded")
        if not np.all((self.a == 0) | (self.a == 1)):
            raise ValueError("a must be 0 or 1")

    def copy(self, **changes):
        new = replace(self, P_d=self.P_d.copy(), P_a=self.P_a.copy(), a=self.a.copy())
        return replace(new, **changes) if changes else new


def initial_state(realization, a=1, P_d=None):
    """State with ``P_a = P_max - P_d``; defaults to ``A(0) = I`` and an even split."""
    P_max = realization.P_max
    P_d = P_max / 2.0 if P_d is None else np.clip(np.asarray(P_d, dtype=float), 0.0, P_max)
    a = np.broadcast_to(np.asarray(a, dtype=int), P_max.shape).copy()
    a[~realization.has_relay_candidate] = 1
    return NetworkState(P_d=P_d.copy(), P_a=P_max - P_d, a=a, k=0)


@dataclass
class RateReport:
    """Everything derived from one state; rates in bps."""

    E_d: np.ndarray
    E_b: np.ndarray
    E_r: np.ndarray
    gamma_d: np.ndarray
    gamma_b: np.ndarray
    gamma_r: np.ndarray
    R_d: np.ndarray
    R_b: np.ndarray
    R_r: np.ndarray
    V: np.ndarray
    q: np.ndarray
    eta_N: float


def eta(gamma):
    """Spectral efficiency ``log2(1 + gamma)``."""
    return np.log2(1.0 + gamma)


def effective_interference(state, realization):
    """
    Noise plus interference normalized by the own-link gain, per link.

    Returns ``(E_d, E_b, E_r)`` with ``E_d = D_d + F P_d``; ``E_r`` is
    ``inf`` for a UE without a candidate relay.
    """
    E_d = realization.D_d + realization.F @ state.P_d
    return E_d, realization.D_b, realization.D_r


def sinr(state, realization):
    E_d, E_b, E_r = effective_interference(state, realization)
    return state.P_d / E_d, state.P_a / E_b, state.P_a / E_r


def link_rates(state, realization):
    """Dedicated, adaptive-to-BS and adaptive-to-relay rates in bps."""
    g_d, g_b, g_r = sinr(state, realization)
    return realization.W_d * eta(g_d), realization.W_a * eta(g_b), realization.W_a * eta(g_r)


def relay_load(state, realization, rates=None):
    """Aggregate incoming rate at each relay."""
    R_d, _, R_r = link_rates(state, realization) if rates is None else rates
    N_r = realization.N_r
    ra = realization.relay_attached
    load = np.bincount(realization.poa[ra], weights=R_d[ra], minlength=N_r)[:N_r]
    via = realization.has_relay_candidate & (state.a == 0)
    load = load + np.bincount(realization.adaptive_relay[via], weights=R_r[via], minlength=N_r)[:N_r]
    return load


def rate_differential(state, realization, rates=None):
    """Spare backhaul capacity ``V_r = eta_r - load_r`` at every relay."""
    return realization.eta_r - relay_load(state, realization, rates)


def relayed_rate(state, realization, rates=None):
    """
    Rate each UE pushes through a relay.

    Relay-attached UEs send their dedicated rate plus, when ``a_i = 0``,
    their adaptive rate. BS-attached UEs contribute only through the
    adaptive link, see :data:`BS_ATTACHED_RELAY_TERM`.
    """
    R_d, _, R_r = link_rates(state, realization) if rates is None else rates
    via = (state.a == 0)
    q_relay = R_d + np.where(via, R_r, 0.0)
    if BS_ATTACHED_RELAY_TERM == "literal":
        bs_via = (state.a == 1)
    else:
        bs_via = via
    q_bs = np.where(bs_via & realization.has_relay_candidate, R_r, 0.0)
    return np.where(realization.relay_attached, q_relay, q_bs)


def relayed_rate_of(state, realization, i):
    return float(relayed_rate(state, realization)[i])


def available_capacity(V, q, realization):
    """``V + q`` at the relay each UE would load; ``-inf`` with no relay."""
    target = np.where(realization.relay_attached, realization.poa, realization.adaptive_relay)
    out = np.full(realization.n, -np.inf)
    has = target >= 0
    out[has] = V[target[has]] + q[has]
    return out


def network_capacity(state, realization, rates=None):
    """
    End-to-end sum rate with interference treated as noise.

    Relay traffic counts up to the backhaul capacity; direct UE-to-BS
    traffic counts in full.
    """
    if rates is None:
        rates = link_rates(state, realization)
    R_d, R_b, _ = rates
    load = relay_load(state, realization, rates)
    relayed = float(np.sum(np.minimum(realization.eta_r, load)))
    direct_adaptive = float(np.sum(np.where(state.a == 1, R_b, 0.0)))
    direct_dedicated = float(np.sum(R_d[~realization.relay_attached]))
    return relayed + direct_adaptive + direct_dedicated


def objective_values(a, P_d, P_max, E_d, E_b, E_r, avail, relay_attached, W_d, W_a):
    """
    Per-UE objective for candidate ``(a, P_d)``; broadcasts elementwise.

    ``avail`` is ``V + q`` at the UE's relay, clamped at zero here. The
    adaptive power is the remainder ``P_max - P_d``.
    """
    P_a = P_max - P_d
    R_d = W_d * eta(P_d / E_d)
    R_b = W_a * eta(P_a / E_b)
    R_r = W_a * eta(P_a / E_r)
    cap = np.maximum(avail, 0.0)
    relay_side = np.where(a == 0, np.minimum(cap, R_d + R_r), R_b + np.minimum(cap, R_d))
    bs_side = np.where(a == 0, np.minimum(cap, R_r), R_b) + R_d
    return np.where(relay_attached, relay_side, bs_side)


def objective_f(state, realization, i=None):
    """
    Each UE's own end-to-end rate given everyone else's current load.

    Returns the vector over UEs, or a single value when ``i`` is given.
    """
    rates = link_rates(state, realization)
    V = rate_differential(state, realization, rates)
    q = relayed_rate(state, realization, rates)
    avail = available_capacity(V, q, realization)
    E_d, E_b, E_r = effective_interference(state, realization)
    f = objective_values(state.a, state.P_d, state.P_d + state.P_a, E_d, E_b, E_r, avail,
                         realization.relay_attached, realization.W_d, realization.W_a)
    return f if i is None else float(f[i])


def evaluate(state, realization):
    """Full :class:`RateReport` for a state."""
    E_d, E_b, E_r = effective_interference(state, realization)
    g_d, g_b, g_r = state.P_d / E_d, state.P_a / E_b, state.P_a / E_r
    rates = (realization.W_d * eta(g_d), realization.W_a * eta(g_b), realization.W_a * eta(g_r))
    V = rate_differential(state, realization, rates)
    q = relayed_rate(state, realization, rates)
    return RateReport(E_d=E_d, E_b=E_b, E_r=E_r, gamma_d=g_d, gamma_b=g_b, gamma_r=g_r,
                      R_d=rates[0], R_b=rates[1], R_r=rates[2], V=V, q=q,
                      eta_N=network_capacity(state, realization, rates))
