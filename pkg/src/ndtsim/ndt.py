"""
Network state-based Distributed Transmission (NDT).

Each iteration every UE reads the current effective interference and the
rate differential of its relay, picks the receiver of its adaptive link
by comparing peak rates against the available backhaul, and then either
waterfills its power budget, holds its dedicated-link power, or backs it
off by a factor ``z`` while the relay stays overloaded. All UEs update
synchronously from the same iteration-k snapshot.

This module also hosts the iteration engine and trace type shared by the
baseline schemes.
"""

import csv
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import ratecalc
from .ratecalc import NetworkState, initial_state

CASE_WF_RELAY, CASE_WF_BS, CASE_HOLD, CASE_BACKOFF, CASE_GREEDY = range(5)
CASE_NAMES = ("wf_relay", "wf_bs", "hold", "backoff", "greedy")

#: Switching rule for BS-attached UEs. ``"corrected"`` keeps the BS while
#: the relay route has no rate advantage (``tau_br <= tau_bb``), mirroring
#: the relay-attached rule. ``"literal"`` uses ``tau_bb <= tau_br``, under
#: which the switch to the relay can never fire.
BS_ATTACHED_SWITCH_RULE = "corrected"

_SNAP = 1e-15


@dataclass
class NDTParams:
    """Algorithm constants. ``tol_p=None`` means ``1e-9 * max(P_max)``."""

    z: float = 0.8
    V_hat: float = 5e6
    iterations: int = 50
    tol_p: Optional[float] = None
    window: int = 3

    @classmethod
    def from_config(cls, config, **overrides):
        values = dict(z=config.z, V_hat=config.V_hat, iterations=config.iterations)
        values.update(overrides)
        return cls(**values)

    def tolerance(self, P_max):
        return 1e-9 * float(np.max(P_max)) if self.tol_p is None else self.tol_p


def waterfill(P_max, W_d, W_a, E_d, E_x):
    """
    Rate-maximizing split of ``P_max`` over the dedicated link and one
    adaptive link with effective interferences ``E_d`` and ``E_x``.

    ``P_d = min(P_max, ((W_d P_max + W_d E_x - W_a E_d) / (W_a + W_d))^+)``
    and ``P_a = P_max - P_d``. Works elementwise.
    """
    P_max = np.asarray(P_max, dtype=float)
    E_x = np.asarray(E_x, dtype=float)
    with np.errstate(invalid="ignore"):
        level = (W_d * P_max + W_d * E_x - W_a * np.asarray(E_d, dtype=float)) / (W_a + W_d)
    level = np.where(np.isinf(E_x), P_max, level)
    P_d = np.minimum(P_max, np.maximum(level, 0.0))
    P_d = _snap(P_d, P_max)
    return P_d, P_max - P_d


def two_link_rate(P_d, P_a, W_d, W_a, E_d, E_x):
    return W_d * ratecalc.eta(P_d / E_d) + W_a * ratecalc.eta(P_a / E_x)


def _snap(P_d, P_max):
    P_d = np.where(np.abs(P_d) <= _SNAP, 0.0, P_d)
    return np.where(np.abs(P_max - P_d) <= _SNAP, P_max, P_d)


@dataclass
class PeakRates:
    """
    Waterfilled peak rates per UE.

    ``tau_rr`` is defined for relay-attached UEs and ``tau_bb`` for
    BS-attached ones (``nan`` elsewhere); ``tau_br`` for both. ``P_d_bs``
    and ``P_d_relay`` are the waterfilled dedicated powers when the
    adaptive link goes to the BS or to the relay.
    """

    tau_rr: np.ndarray
    tau_br: np.ndarray
    tau_bb: np.ndarray
    P_d_bs: np.ndarray
    P_d_relay: np.ndarray


def peak_rates(state, realization, E_d=None):
    if E_d is None:
        E_d, _, _ = ratecalc.effective_interference(state, realization)
    P_max, W_d, W_a = realization.P_max, realization.W_d, realization.W_a
    E_b, E_r = realization.D_b, realization.D_r
    pd_b, pa_b = waterfill(P_max, W_d, W_a, E_d, E_b)
    pd_r, pa_r = waterfill(P_max, W_d, W_a, E_d, E_r)
    tau_b = two_link_rate(pd_b, pa_b, W_d, W_a, E_d, E_b)
    tau_r = two_link_rate(pd_r, pa_r, W_d, W_a, E_d, E_r)
    ra = realization.relay_attached
    return PeakRates(
        tau_rr=np.where(ra, tau_r, np.nan),
        tau_br=np.where(ra, tau_b, tau_r),
        tau_bb=np.where(ra, np.nan, tau_b),
        P_d_bs=pd_b, P_d_relay=pd_r)


def select_poa_relay_attached(a_prev, tau_rr, tau_br, avail, V_hat):
    """
    Adaptive-link PoA for a UE whose dedicated link goes to a relay.

    Move to the BS when the relay route has no rate advantage or the
    backhaul is short by more than ``V_hat``; stay on the relay when the
    backhaul can carry ``tau_br`` and the relay route is strictly better;
    otherwise keep the previous choice. The BS rule wins when both hold.
    """
    to_bs = (tau_rr <= tau_br) | (avail <= tau_br - V_hat)
    to_relay = (avail >= tau_br) & (tau_rr > tau_br)
    return np.where(to_bs, 1, np.where(to_relay, 0, a_prev)).astype(int)


def select_poa_bs_attached(a_prev, tau_bb, tau_br, avail, V_hat):
    """
    Adaptive-link PoA for a UE whose dedicated link goes to the BS.

    Switch the adaptive link to the relay only with more than ``V_hat`` of
    spare backhaul and a strictly better relay route; fall back to the BS
    when the route loses its advantage or the backhaul is short by more
    than ``V_hat``.
    """
    if BS_ATTACHED_SWITCH_RULE == "literal":
        no_gain = tau_bb <= tau_br
    else:
        no_gain = tau_br <= tau_bb
    to_bs = no_gain | (avail <= -V_hat)
    to_relay = (avail > V_hat) & (tau_br > tau_bb)
    return np.where(to_bs, 1, np.where(to_relay, 0, a_prev)).astype(int)


def power_update(P_d, P_max, W_d, W_a, E_d, E_b, E_r, a_next, V_own, relay_attached, V_hat, z):
    """
    Dedicated-link power for the next iteration and the rule applied.

    ``a_next = 0``: waterfill against the relay link. ``a_next = 1``:
    waterfill against the BS link while the relay has spare capacity
    (always, for BS-attached UEs); hold the power while the overload is
    within ``V_hat``; otherwise scale it by ``z``. The adaptive link gets
    the rest of the budget.

    Returns
    -------
    P_d_next, P_a_next, case : ndarray
    """
    wf_r, _ = waterfill(P_max, W_d, W_a, E_d, E_r)
    wf_b, _ = waterfill(P_max, W_d, W_a, E_d, E_b)
    relay_attached = np.asarray(relay_attached, dtype=bool)
    to_relay = a_next == 0
    spare = ~relay_attached | (V_own >= 0)
    hold = relay_attached & (V_own >= -V_hat) & (V_own < 0)
    case = np.select([to_relay, spare, hold], [CASE_WF_RELAY, CASE_WF_BS, CASE_HOLD], CASE_BACKOFF)
    new = np.select([case == CASE_WF_RELAY, case == CASE_WF_BS, case == CASE_HOLD],
                    [wf_r, wf_b, P_d], z * P_d)
    new = _snap(np.clip(new, 0.0, P_max), P_max)
    return new, P_max - new, case


def ndt_update(state, realization, params):
    """NDT decisions for every UE from the iteration-k snapshot."""
    E_d, E_b, E_r = ratecalc.effective_interference(state, realization)
    rates = (realization.W_d * ratecalc.eta(state.P_d / E_d),
             realization.W_a * ratecalc.eta(state.P_a / E_b),
             realization.W_a * ratecalc.eta(state.P_a / E_r))
    V = ratecalc.rate_differential(state, realization, rates)
    q = ratecalc.relayed_rate(state, realization, rates)
    avail = ratecalc.available_capacity(V, q, realization)
    peaks = peak_rates(state, realization, E_d)

    ra = realization.relay_attached
    a_relay = select_poa_relay_attached(state.a, peaks.tau_rr, peaks.tau_br, avail, params.V_hat)
    a_bs = select_poa_bs_attached(state.a, peaks.tau_bb, peaks.tau_br, avail, params.V_hat)
    a_next = np.where(ra, a_relay, a_bs)
    a_next[~realization.has_relay_candidate] = 1

    V_own = np.zeros(realization.n)
    V_own[ra] = V[realization.poa[ra]]
    P_d, P_a, case = power_update(state.P_d, realization.P_max, realization.W_d, realization.W_a,
                                  E_d, E_b, E_r, a_next, V_own, ra, params.V_hat, params.z)
    return P_d, P_a, a_next, case


@dataclass
class IterationTrace:
    """
    Per-iteration record of a run; row ``k`` holds the state after update
    ``k`` and the capacity and rate differentials evaluated on it.
    """

    scheme: str
    initial: NetworkState
    P_d: np.ndarray
    P_a: np.ndarray
    a: np.ndarray
    case: np.ndarray
    V: np.ndarray
    eta_N: np.ndarray
    stable: np.ndarray
    window: int = 3
    meta: dict = field(default_factory=dict)

    @property
    def iterations(self):
        return len(self.eta_N)

    @property
    def k_converged(self):
        """Iteration at which the final stable streak reached the window, or None."""
        streak = 0
        for flag in self.stable[::-1]:
            if not flag:
                break
            streak += 1
        if streak < self.window:
            return None
        return self.iterations - streak + self.window

    @property
    def converged(self):
        return self.k_converged is not None

    @property
    def final_state(self):
        return NetworkState(P_d=self.P_d[-1].copy(), P_a=self.P_a[-1].copy(), a=self.a[-1].copy(),
                            k=self.iterations)

    @property
    def final_eta_N(self):
        return float(self.eta_N[-1])

    def converged_by(self):
        """Running convergence flag per row."""
        out = np.zeros(self.iterations, dtype=bool)
        streak = 0
        for k, flag in enumerate(self.stable):
            streak = streak + 1 if flag else 0
            out[k] = streak >= self.window
        return out

    def header(self):
        n = self.P_d.shape[1]
        cols = ["scheme", "k"]
        cols += ["P_d_%d" % i for i in range(n)] + ["P_a_%d" % i for i in range(n)]
        cols += ["a_%d" % i for i in range(n)] + ["case_%d" % i for i in range(n)]
        cols += ["V_%d" % r for r in range(self.V.shape[1])] + ["eta_N", "converged"]
        return cols

    def rows(self):
        conv = self.converged_by()
        for k in range(self.iterations):
            row = [self.scheme, k + 1]
            row += [repr(float(x)) for x in self.P_d[k]] + [repr(float(x)) for x in self.P_a[k]]
            row += [int(x) for x in self.a[k]] + [CASE_NAMES[int(c)] for c in self.case[k]]
            row += [repr(float(x)) for x in self.V[k]] + [repr(float(self.eta_N[k])), int(conv[k])]
            yield row

    def write_csv(self, fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(self.header())
        writer.writerows(self.rows())

    def to_csv(self):
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def iterate(update, realization, params, initial=None, scheme="NDT", mask=None):
    """
    Drive ``update(state, realization, params) -> (P_d, P_a, a, case)``.

    Decisions are made on ``realization`` (possibly estimated gains);
    capacity and rate differentials are recorded on the exact channel.
    ``mask(k)``, when given, returns which UEs apply their update at
    iteration ``k``; the others keep their previous state.
    """
    state = initial_state(realization) if initial is None else initial.copy()
    state.check(realization.P_max)
    actual = realization.actual
    K, n, N_r = params.iterations, realization.n, realization.N_r
    tol = params.tolerance(realization.P_max)
    P_d = np.empty((K, n))
    P_a = np.empty((K, n))
    a = np.empty((K, n), dtype=int)
    case = np.empty((K, n), dtype=int)
    V = np.empty((K, N_r))
    eta_N = np.empty(K)
    stable = np.empty(K, dtype=bool)
    initial_copy = state.copy()
    for k in range(K):
        new_P_d, new_P_a, new_a, new_case = update(state, realization, params)
        if mask is not None:
            m = mask(k + 1)
            new_P_d = np.where(m, new_P_d, state.P_d)
            new_P_a = np.where(m, new_P_a, state.P_a)
            new_a = np.where(m, new_a, state.a)
            new_case = np.where(m, new_case, case[k - 1] if k else CASE_HOLD)
        stable[k] = (np.max(np.abs(new_P_d - state.P_d), initial=0.0) <= tol) and np.array_equal(new_a, state.a)
        state = NetworkState(P_d=new_P_d, P_a=new_P_a, a=new_a, k=k + 1)
        rates = ratecalc.link_rates(state, actual)
        P_d[k], P_a[k], a[k], case[k] = new_P_d, new_P_a, new_a, new_case
        V[k] = ratecalc.rate_differential(state, actual, rates)
        eta_N[k] = ratecalc.network_capacity(state, actual, rates)
    return IterationTrace(scheme=scheme, initial=initial_copy, P_d=P_d, P_a=P_a, a=a, case=case, V=V,
                          eta_N=eta_N, stable=stable, window=params.window)


def step(state, realization, params):
    """
    One synchronous NDT round.

    Returns the next state and a one-row :class:`IterationTrace`.
    """
    one = NDTParams(z=params.z, V_hat=params.V_hat, iterations=1, tol_p=params.tol_p, window=params.window)
    trace = iterate(ndt_update, realization, one, state, scheme="NDT")
    nxt = trace.final_state
    nxt.k = state.k + 1
    return nxt, trace


def run(realization, params, initial=None):
    """Run NDT for ``params.iterations`` rounds."""
    return iterate(ndt_update, realization, params, initial, scheme="NDT")
