"""
Two-UE, one-relay network and the sum-rate bounds NDT is compared with.

UE 0 sends its dedicated link to the BS (receiver 0) and UE 1 to the relay
(receiver 1), on the same channel. Each UE also owns an exclusive adaptive
channel it can point at either receiver. Backhaul is never limiting.

Three benchmarks are computed by exhaustive search over the two dedicated
powers, with the adaptive power taking the rest of each budget:

* CO-MIMO: both UEs and both receivers form a virtual 2x2 MIMO link on
  the dedicated channel; adaptive links are diversity combined.
* AIC: the BS cancels the relay-bound UE's interference, the relay does not.
* C-OPT: interference is treated as noise; the best PoA pair is chosen.
"""

import dataclasses
import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import ndt
from .analysis import HIGH_BACKHAUL, large_v_hat
from .numerics import grid_maximize_2d, svd_singular_values
from .scenario import build_realization

DEFAULT_RESOLUTION = 1.0 / 200  # 201 x 201 grid
ORDER_RTOL = 1e-6


class OrderingError(AssertionError):
    """Bounds came out in the wrong order beyond the search tolerance."""


@dataclass
class TwoUserInstance:
    """
    ``H[j, i]`` is the dedicated-channel coefficient from UE ``j`` to
    receiver ``i`` (0 = BS, 1 = relay). ``g_r`` and ``g_b`` are the
    adaptive-channel power gains to the relay and the BS.
    """

    H: np.ndarray
    g_r: np.ndarray
    g_b: np.ndarray
    n_d: float
    n_a: float
    W_d: float = 5e6
    W_a: float = 2.5e6
    P_max: np.ndarray = dataclasses.field(default_factory=lambda: np.ones(2))

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=complex).reshape(2, 2)
        self.g_r = np.broadcast_to(np.asarray(self.g_r, dtype=float), (2,)).copy()
        self.g_b = np.broadcast_to(np.asarray(self.g_b, dtype=float), (2,)).copy()
        self.P_max = np.broadcast_to(np.asarray(self.P_max, dtype=float), (2,)).copy()
        if np.any(self.g_r < 0) or np.any(self.g_b < 0):
            raise ValueError("adaptive gains must be nonnegative")
        if np.any(self.P_max < 0) or self.n_d <= 0 or self.n_a <= 0:
            raise ValueError("powers must be nonnegative and noise positive")

    @property
    def g(self):
        """Dedicated power gains ``|H|^2``."""
        return np.abs(self.H) ** 2

    def scaled_noise(self, factor):
        return dataclasses.replace(self, n_d=self.n_d * factor, n_a=self.n_a * factor)

    def to_dict(self):
        return {
            "H_real": self.H.real.tolist(), "H_imag": self.H.imag.tolist(),
            "g_r": self.g_r.tolist(), "g_b": self.g_b.tolist(),
            "n_d": self.n_d, "n_a": self.n_a, "W_d": self.W_d, "W_a": self.W_a,
            "P_max": self.P_max.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        known = {"H", "H_real", "H_imag", "g", "g_r", "g_b", "n_d", "n_a", "W_d", "W_a", "P_max"}
        unknown = set(data) - known
        if unknown:
            raise ValueError("unknown instance fields: %s" % ", ".join(sorted(unknown)))
        if "H_real" in data:
            H = np.asarray(data.pop("H_real"), dtype=float) + 1j * np.asarray(data.pop("H_imag", 0.0))
        elif "g" in data:
            H = np.sqrt(np.asarray(data.pop("g"), dtype=float))
        else:
            H = np.asarray(data.pop("H"), dtype=float)
        return cls(H=H, **data)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _log_rate(W, snr):
    return W * np.log2(1.0 + snr)


def _search(objective, instance, resolution):
    """
    Maximize ``objective(P_d0, P_d1)`` over the power square.

    Grid scan, one local grid refinement, then a bounded quasi-Newton
    polish from the best node that is kept only if it improves.
    """
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    hi = instance.P_max
    points = int(round(1.0 / resolution)) + 1
    (x, y), best = grid_maximize_2d(objective, np.zeros(2), hi, points=points)
    if np.any(hi > 0):
        # a zero budget pins that coordinate
        scale = np.where(hi > 0, hi, 1.0)
        res = minimize(lambda u: -float(objective(u[0] * scale[0], u[1] * scale[1])),
                       x0=[x / scale[0], y / scale[1]], method="L-BFGS-B",
                       bounds=[(0, 1 if h > 0 else 0) for h in hi])
        if res.success and -res.fun > best:
            best = float(-res.fun)
    return float(best)


def _adaptive_choice(instance, P_a0, P_a1, W_a):
    """Best of the two adaptive receivers for each UE."""
    best_g = np.maximum(instance.g_r, instance.g_b)
    return _log_rate(W_a, P_a0 * best_g[0] / instance.n_a) + _log_rate(W_a, P_a1 * best_g[1] / instance.n_a)


def mimo_dedicated_rate(instance, p0, p1):
    """
    Joint-decoding rate of the dedicated channel seen as a 2x2 MIMO link.

    ``W_d log2 det(I + G diag(p) G^H / n_d)`` with ``G = H^T``, written
    through the singular values: the determinant is
    ``1 + (p0 |h_0|^2 + p1 |h_1|^2) / n_d + p0 p1 s1^2 s2^2 / n_d^2``.
    With equal powers it factors into ``prod_i (1 + p s_i^2 / n_d)``.
    """
    s1, s2 = svd_singular_values(instance.H)
    rows = np.sum(instance.g, axis=1)
    n_d = instance.n_d
    det = 1.0 + (p0 * rows[0] + p1 * rows[1]) / n_d + p0 * p1 * (s1 * s2 / n_d) ** 2
    return instance.W_d * np.log2(det)


def co_mimo_capacity(instance, resolution=DEFAULT_RESOLUTION):
    """Virtual-MIMO dedicated rate plus diversity-combined adaptive rates."""
    W_a = instance.W_a
    comb = (instance.g_r + instance.g_b) / instance.n_a
    P = instance.P_max

    def objective(p0, p1):
        ada = _log_rate(W_a, (P[0] - p0) * comb[0]) + _log_rate(W_a, (P[1] - p1) * comb[1])
        return mimo_dedicated_rate(instance, p0, p1) + ada

    return _search(objective, instance, resolution)


def aic_capacity(instance, resolution=DEFAULT_RESOLUTION):
    """BS cancels interference from UE 1; the relay treats UE 0 as noise."""
    g = instance.g
    W_d, W_a, n_d, P = instance.W_d, instance.W_a, instance.n_d, instance.P_max

    def objective(p0, p1):
        ded = _log_rate(W_d, g[0, 0] * p0 / n_d) + _log_rate(W_d, g[1, 1] * p1 / (n_d + g[0, 1] * p0))
        return ded + _adaptive_choice(instance, P[0] - p0, P[1] - p1, W_a)

    return _search(objective, instance, resolution)


def sum_rate_tin(instance, P_d, a):
    """Interference-as-noise sum rate at dedicated powers ``P_d`` and PoAs ``a``."""
    g = instance.g
    W_d, W_a, n_d, n_a, P = instance.W_d, instance.W_a, instance.n_d, instance.n_a, instance.P_max
    p0, p1 = P_d
    ded = _log_rate(W_d, g[0, 0] * p0 / (n_d + g[1, 0] * p1)) + _log_rate(W_d, g[1, 1] * p1 / (n_d + g[0, 1] * p0))
    gains = np.where(np.asarray(a) == 1, instance.g_b, instance.g_r)
    return ded + _log_rate(W_a, (P[0] - p0) * gains[0] / n_a) + _log_rate(W_a, (P[1] - p1) * gains[1] / n_a)


def copt_capacity(instance, resolution=DEFAULT_RESOLUTION):
    """
    Interference-as-noise optimum over both dedicated powers and PoAs.

    For fixed powers each adaptive rate depends only on its own receiver,
    so the four PoA pairs collapse to taking the better receiver per UE.
    """
    g = instance.g
    W_d, W_a, n_d, P = instance.W_d, instance.W_a, instance.n_d, instance.P_max

    def objective(p0, p1):
        ded = _log_rate(W_d, g[0, 0] * p0 / (n_d + g[1, 0] * p1)) + _log_rate(W_d, g[1, 1] * p1 / (n_d + g[0, 1] * p0))
        return ded + _adaptive_choice(instance, P[0] - p0, P[1] - p1, W_a)

    return _search(objective, instance, resolution)


def to_realization(instance, eta_r=HIGH_BACKHAUL):
    """The instance as a one-relay network for the NDT engine (relay = PoA 0)."""
    g = instance.g
    # PoA columns are [relay, BS]; receiver 0 of the instance is the BS
    g_ded = np.column_stack([g[:, 1], g[:, 0]])
    g_ad = np.column_stack([instance.g_r, instance.g_b])
    return build_realization(g_ded, g_ad, poa=[1, 0], channel=[0, 0], W_d=instance.W_d, W_a=instance.W_a,
                             n_d=instance.n_d, n_a=instance.n_a, eta_r=eta_r, P_max=instance.P_max,
                             adaptive_relay=[0, 0], groups=1)


def ndt_capacity(instance, iterations=200, full_output=False):
    """Sum rate NDT reaches on the instance with infinite backhaul."""
    real = to_realization(instance)
    params = ndt.NDTParams(V_hat=large_v_hat(real), iterations=iterations)
    trace = ndt.run(real, params)
    return (trace.final_eta_N, trace) if full_output else trace.final_eta_N


@dataclass
class BoundReport:
    co_mimo: float
    aic: float
    copt: float
    ndt: float
    ndt_converged: bool

    @property
    def ratios(self):
        return {"aic": self.aic / self.co_mimo, "copt": self.copt / self.co_mimo,
                "ndt": self.ndt / self.co_mimo}

    @property
    def gap(self):
        """Relative shortfall of NDT against the MIMO bound."""
        return (self.co_mimo - self.ndt) / self.co_mimo

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["ratios"] = self.ratios
        return out


def bound_comparison(instance, resolution=DEFAULT_RESOLUTION, rtol=ORDER_RTOL, check=True):
    """
    All four sum rates for one instance.

    With ``check`` the chain CO-MIMO >= AIC >= C-OPT >= NDT is verified up
    to ``rtol`` relative slack and :class:`OrderingError` raised otherwise.
    """
    a = co_mimo_capacity(instance, resolution)
    b = aic_capacity(instance, resolution)
    c = copt_capacity(instance, resolution)
    d, trace = ndt_capacity(instance, full_output=True)
    report = BoundReport(co_mimo=a, aic=b, copt=c, ndt=d, ndt_converged=trace.converged)
    if check:
        slack = rtol * max(a, 1.0)
        names = ("co_mimo", "aic", "copt", "ndt")
        values = (a, b, c, d)
        for k in range(3):
            if values[k] < values[k + 1] - slack:
                raise OrderingError("%s = %.9g below %s = %.9g" % (names[k], values[k], names[k + 1], values[k + 1]))
    return report


def symmetric_geometry(separation=2000.0, R_L=250.0, alpha=4.0, noise_psd=-200.0, W_s=10e6, beta=0.5,
                   P_max=1.0):
    """
    Deterministic instance: BS at the origin, relay ``separation`` away,
    each UE ``R_L`` from its PoA perpendicular to the BS-relay line.
    Gains are pure path loss.
    """
    rx = np.array([[0.0, 0.0], [separation, 0.0]])
    ue = np.array([[0.0, R_L], [separation, R_L]])
    return _from_positions(ue, rx, alpha, noise_psd, W_s, beta, P_max, fading=None)


def random_instance(rng, separation=2000.0, R_L=250.0, alpha=4.0, noise_psd=-200.0, W_s=10e6, beta=0.5,
                    P_max=1.0):
    """Instance with UEs uniform in disks of radius ``R_L`` and Rayleigh fading."""
    rx = np.array([[0.0, 0.0], [separation, 0.0]])
    r = R_L * np.sqrt(rng.random(2))
    phi = 2 * np.pi * rng.random(2)
    ue = rx + np.column_stack([r * np.cos(phi), r * np.sin(phi)])
    return _from_positions(ue, rx, alpha, noise_psd, W_s, beta, P_max, fading=rng)


def _from_positions(ue, rx, alpha, noise_psd, W_s, beta, P_max, fading):
    d = np.maximum(np.linalg.norm(ue[:, None, :] - rx[None, :, :], axis=2), 1.0)
    amp = d ** (-alpha / 2.0)

    def draw():
        if fading is None:
            return amp.astype(complex)
        mag = np.sqrt(fading.exponential(1.0, size=(2, 2)))
        return amp * mag * np.exp(2j * np.pi * fading.random((2, 2)))

    H = draw()
    g_ad = np.abs(draw()) ** 2
    W_d = W_s / (1 + 2 * beta)
    W_a = beta * W_d
    psd = 10.0 ** (noise_psd / 10.0)
    return TwoUserInstance(H=H, g_r=g_ad[:, 1], g_b=g_ad[:, 0], n_d=psd * W_d, n_a=psd * W_a,
                           W_d=W_d, W_a=W_a, P_max=np.full(2, float(P_max)))
