"""
Convergence theory for NDT under non-binding backhaul.

With every relay backhaul large enough the rate differentials never go
negative, so each UE waterfills every round and the dedicated powers
follow the affine map ``P_d <- N - M P_d`` (as long as no clamp binds).
Its fixed point, the spectral condition that makes the asynchronous map a
contraction, and the adaptive PoA the iteration settles on are computed
here in closed form and checked against simulation.
"""

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from . import ndt
from .ndt import NDTParams, iterate, ndt_update
from .numerics import solve_linear, spectral_radius
from .ratecalc import initial_state
from .scenario import ASYNC, rng_stream

#: Backhaul used for the theory checks; large enough to never bind.
HIGH_BACKHAUL = 1e15
THEORY_ITERATIONS = 200


@dataclass
class ConvergenceReport:
    rho_F: float
    rho_M: float
    rho_condition: bool
    fixed_point_P_d: np.ndarray
    fixed_point_valid: bool
    predicted_A_star: np.ndarray
    empirical_converged: bool
    gap_inf_norm: float

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["fixed_point_P_d"] = [float(x) for x in self.fixed_point_P_d]
        out["predicted_A_star"] = [int(x) for x in self.predicted_A_star]
        for key in ("rho_F", "rho_M", "gap_inf_norm"):
            out[key] = float(out[key])
        for key in ("rho_condition", "fixed_point_valid", "empirical_converged"):
            out[key] = bool(out[key])
        return out

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


def predict_poa_high_backhaul(realization):
    """
    Adaptive PoA indicator reached when backhaul never binds.

    ``a_i = 1`` exactly when the BS adaptive link is strictly less noisy
    than the relay one; ties go to the relay.
    """
    return (realization.D_b < realization.D_r).astype(int)


def _weights(realization):
    W_d, W_a = realization.W_d, realization.W_a
    return W_a / (W_a + W_d), W_d / (W_a + W_d)


def iteration_matrix(realization):
    """``M = W_a / (W_a + W_d) * F``."""
    w_a, _ = _weights(realization)
    return w_a * realization.F


def offset_vector(realization, A_star):
    """Constant term ``N`` of the waterfilling map for a fixed attachment."""
    w_a, w_d = _weights(realization)
    A = np.asarray(A_star, dtype=int)
    # the relay noise is infinite for UEs without a candidate; they have a = 1
    noise_a = np.where(A == 1, realization.D_b, 0.0)
    via = A == 0
    noise_a[via] = realization.D_r[via]
    return w_d * realization.P_max - w_a * realization.D_d + w_d * noise_a


def fixed_point(realization, A_star=None):
    """
    Closed-form limit of the dedicated powers.

    Solves ``(I + M) P = N``. The result is not clamped; the returned flag
    says whether it lies inside ``[0, P_max]``, which is when the closed
    form is the actual limit. Raises ``SingularMatrixError`` if ``I + M``
    is singular.

    Returns
    -------
    P_d_star, valid
    """
    if A_star is None:
        A_star = predict_poa_high_backhaul(realization)
    M = iteration_matrix(realization)
    N = offset_vector(realization, A_star)
    P = solve_linear(np.eye(realization.n) + M, N)
    valid = bool(np.all(P >= 0.0) and np.all(P <= realization.P_max))
    return P, valid


def convergence_predicate(realization):
    """True when ``rho(F) < (W_a + W_d) / W_a``, i.e. ``rho(M) < 1``."""
    W_d, W_a = realization.W_d, realization.W_a
    return bool(spectral_radius(realization.F) < (W_a + W_d) / W_a)


def max_single_ue_rate(realization):
    """Largest rate any UE could reach alone with its full budget on each link."""
    P = realization.P_max
    best = np.minimum(realization.D_b, realization.D_r)
    r = realization.W_d * np.log2(1 + P / realization.D_d) + realization.W_a * np.log2(1 + P / best)
    return float(np.max(r))


def large_v_hat(realization, factor=10.0):
    """Threshold large enough that NDT never switches or backs off on overload."""
    return factor * max_single_ue_rate(realization)


def async_run(realization, params, update_probability, seed=0, trial_index=0, initial=None):
    """
    NDT where each UE applies its update in a round only with the given
    probability, independently per UE and round.
    """
    if not 0.0 < update_probability <= 1.0:
        raise ValueError("update_probability must be in (0, 1]")
    if update_probability == 1.0:
        return iterate(ndt_update, realization, params, initial, scheme="NDT")
    rng = np.random.default_rng(rng_stream(seed, trial_index, ASYNC))
    n = realization.n

    def mask(k):
        return rng.random(n) < update_probability

    trace = iterate(ndt_update, realization, params, initial, scheme="NDT", mask=mask)
    trace.meta["update_probability"] = update_probability
    return trace


def theory_params(realization, iterations=THEORY_ITERATIONS, **overrides):
    values = dict(V_hat=large_v_hat(realization), iterations=iterations)
    values.update(overrides)
    return NDTParams(**values)


def convergence_report(realization, params=None, initial=None):
    """
    Compare the closed-form fixed point with a simulated NDT run.

    The run uses ``HIGH_BACKHAUL`` on every relay and, unless ``params``
    is given, ``THEORY_ITERATIONS`` rounds with a large ``V_hat``.
    """
    real = realization.with_backhaul(HIGH_BACKHAUL)
    if params is None:
        params = theory_params(real)
    W_d, W_a = real.W_d, real.W_a
    rho_F = spectral_radius(real.F)
    A_star = predict_poa_high_backhaul(real)
    P_star, valid = fixed_point(real, A_star)
    trace = ndt.run(real, params, initial if initial is not None else initial_state(real))
    gap = float(np.max(np.abs(trace.P_d[-1] - P_star)))
    return ConvergenceReport(
        rho_F=rho_F,
        rho_M=rho_F * W_a / (W_a + W_d),
        rho_condition=bool(rho_F < (W_a + W_d) / W_a),
        fixed_point_P_d=P_star,
        fixed_point_valid=valid,
        predicted_A_star=A_star,
        empirical_converged=trace.converged,
        gap_inf_norm=gap,
    )
