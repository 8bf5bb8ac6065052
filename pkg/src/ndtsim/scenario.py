"""
Network topologies, channel realizations and backhaul capacities.

PoAs are indexed ``0 .. N_r-1`` for the relays and ``N_r`` for the base
station, which sits at the origin of a square region. Relays are dropped
uniformly with non-overlapping clusters of radius ``R_L``; UEs are spread
uniformly over the clusters in round-robin order.

Every random draw comes from a stream keyed by ``(seed, trial_index,
purpose)``, so a realization is a pure function of the configuration and
the trial index.
"""

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

# stream purposes
GEOMETRY, FADING, BACKHAUL, CSIT, INITIAL, ASYNC = range(6)

REUSE_POLICIES = ("full_reuse", "per_poa_orthogonal")
PLACEMENT_ATTEMPTS = 10_000
MIN_DISTANCE = 1.0  # m, keeps d**-alpha finite


class ConfigError(ValueError):
    """Invalid or malformed configuration."""


class ScenarioError(RuntimeError):
    """A scenario could not be generated from a valid configuration."""


def rng_stream(seed, trial_index, purpose):
    """Independent generator for one (seed, trial, purpose) triple."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial_index), int(purpose)]))


@dataclass
class ScenarioConfig:
    """
    Physical and algorithmic parameters of one experiment.

    ``P_max`` is a scalar or one value per UE. ``eta_r_model`` is a fixed
    backhaul capacity in bps or a two-element ``[low, high]`` range from
    which each relay draws uniformly. Powers are in W, bandwidths in Hz,
    rates in bps, ``noise_psd`` in dBW/Hz.
    """

    n: int = 8
    N_r: int = 4
    region_side: float = 2000.0
    R_L: float = 250.0
    alpha: float = 4.0
    P_max: Union[float, list] = 1.0
    W_s: float = 10e6
    beta: float = 0.5
    noise_psd: float = -200.0
    z: float = 0.8
    V_hat: float = 5e6
    eta_r_model: Union[float, list] = field(default_factory=lambda: [10e6, 50e6])
    iterations: int = 50
    seed: int = 0
    csit_error_std: float = 0.0
    reuse_policy: str = "per_poa_orthogonal"

    def __post_init__(self):
        self.validate()

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        for name in ("n", "N_r", "iterations", "seed"):
            v = getattr(self, name)
            need(isinstance(v, (int, np.integer)) and not isinstance(v, bool),
                 "%s must be an integer, got %r" % (name, v))
        need(self.n >= 1, "n must be >= 1")
        need(self.N_r >= 0, "N_r must be >= 0")
        need(self.iterations >= 1, "iterations must be >= 1")
        need(0 <= self.seed < 2 ** 64, "seed must be a 64-bit unsigned integer")
        for name in ("region_side", "R_L", "W_s", "beta", "alpha"):
            v = getattr(self, name)
            need(_is_real(v) and v > 0, "%s must be a positive number, got %r" % (name, v))
        need(_is_real(self.noise_psd), "noise_psd must be a number")
        need(_is_real(self.z) and 0 < self.z < 1, "z must lie in (0, 1)")
        need(_is_real(self.V_hat) and self.V_hat >= 0, "V_hat must be >= 0")
        need(_is_real(self.csit_error_std) and self.csit_error_std >= 0, "csit_error_std must be >= 0")
        need(self.reuse_policy in REUSE_POLICIES,
             "reuse_policy must be one of %s, got %r" % (REUSE_POLICIES, self.reuse_policy))

        p = np.atleast_1d(np.asarray(self.P_max, dtype=object))
        need(p.ndim == 1 and all(_is_real(x) and x > 0 for x in p), "P_max entries must be positive numbers")
        need(p.size in (1, self.n), "P_max must be a scalar or have n=%d entries" % self.n)

        eta = self.eta_r_model
        if isinstance(eta, (list, tuple)):
            need(len(eta) == 2 and all(_is_real(x, allow_inf=True) for x in eta),
                 "eta_r_model range must be [low, high]")
            need(0 <= eta[0] <= eta[1], "eta_r_model range must satisfy 0 <= low <= high")
        else:
            need(_is_real(eta, allow_inf=True) and eta >= 0, "eta_r_model must be a nonnegative number or [low, high]")

    def p_max_vector(self):
        return np.broadcast_to(np.asarray(self.P_max, dtype=float), (self.n,)).copy()

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        if isinstance(d["eta_r_model"], tuple):
            d["eta_r_model"] = list(d["eta_r_model"])
        return d

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("scenario must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError("unknown scenario fields: %s" % ", ".join(unknown))
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("invalid JSON: %s" % exc) from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


def _is_real(x, allow_inf=False):
    if isinstance(x, bool) or not isinstance(x, (int, float, np.integer, np.floating)):
        return False
    return bool(np.isfinite(x)) or (allow_inf and x == np.inf)


@dataclass
class ChannelRealization:
    """
    One channel draw and everything derived from it.

    ``g_dedicated[j, p]`` is the power gain from UE ``j`` to PoA ``p`` on
    UE ``j``'s dedicated channel; ``g_adaptive[j, p]`` the same on its
    exclusive adaptive channel. ``F``, ``D_d``, ``D_b`` and ``D_r`` are the
    normalized cross-gain matrix and noise vectors. ``truth`` holds the
    exact realization when this one carries estimated gains.
    """

    g_dedicated: np.ndarray
    g_adaptive: np.ndarray
    poa: np.ndarray
    adaptive_relay: np.ndarray
    channel: np.ndarray
    groups: int
    W_d: float
    W_a: float
    n_d: float
    n_a: float
    F: np.ndarray
    D_d: np.ndarray
    D_b: np.ndarray
    D_r: np.ndarray
    eta_r: np.ndarray
    P_max: np.ndarray
    h_dedicated: Optional[np.ndarray] = None
    h_adaptive: Optional[np.ndarray] = None
    ue_pos: Optional[np.ndarray] = None
    poa_pos: Optional[np.ndarray] = None
    distance: Optional[np.ndarray] = None
    truth: Optional["ChannelRealization"] = None

    @property
    def n(self):
        return len(self.poa)

    @property
    def N_r(self):
        return self.g_dedicated.shape[1] - 1

    @property
    def bs(self):
        return self.N_r

    @property
    def relay_attached(self):
        return self.poa < self.N_r

    @property
    def has_relay_candidate(self):
        return self.adaptive_relay >= 0

    @property
    def actual(self):
        """Realization used to evaluate achieved rates."""
        return self.truth if self.truth is not None else self

    def with_backhaul(self, eta):
        """Copy with every relay backhaul set to ``eta`` bps."""
        eta_r = np.full(self.N_r, float(eta))
        truth = None if self.truth is None else dataclasses.replace(self.truth, eta_r=eta_r)
        return dataclasses.replace(self, eta_r=eta_r, truth=truth)


def assign_bandwidth(config, n, groups):
    """
    Split the UE spectrum into dedicated and adaptive channels.

    ``groups`` dedicated channels of width ``W_d`` and ``n`` exclusive
    adaptive channels of width ``W_a = beta * W_d`` exhaust ``W_s``.
    """
    if groups < 1:
        raise ValueError("need at least one dedicated channel group")
    W_d = config.W_s / (groups + config.beta * n)
    return W_d, config.beta * W_d


def assign_channels(poa, policy, n_poa):
    """Dedicated channel id per UE and the number of channel groups."""
    poa = np.asarray(poa)
    if policy == "full_reuse":
        return np.zeros(len(poa), dtype=int), 1
    if policy != "per_poa_orthogonal":
        raise ConfigError("unknown reuse policy %r" % policy)
    channel = np.zeros(len(poa), dtype=int)
    for p in range(n_poa):
        members = np.flatnonzero(poa == p)
        channel[members] = np.arange(len(members))
    groups = max(int(np.max(np.bincount(poa, minlength=n_poa))), 1)
    return channel, groups


def gain_matrix(g_dedicated, poa, channel):
    """
    Normalized cross-link gain matrix.

    ``F[i, j] = g[j, r_i] / g[i, r_i]`` for distinct co-channel UEs, zero
    otherwise.
    """
    g = np.asarray(g_dedicated, dtype=float)
    poa = np.asarray(poa)
    channel = np.asarray(channel)
    n = len(poa)
    own = g[np.arange(n), poa]
    if np.any(own <= 0):
        raise ValueError("own dedicated link gain must be positive")
    F = g[:, poa].T / own[:, None]
    F[channel[:, None] != channel[None, :]] = 0.0
    np.fill_diagonal(F, 0.0)
    return F


def build_gain_matrix(realization):
    return gain_matrix(realization.g_dedicated, realization.poa, realization.channel)


def noise_vectors(g_dedicated, g_adaptive, poa, adaptive_relay, bs, n_d, n_a):
    """Normalized noise ``D_d``, ``D_b``, ``D_r`` (``inf`` without a relay)."""
    idx = np.arange(len(poa))
    D_d = n_d / g_dedicated[idx, poa]
    D_b = n_a / g_adaptive[:, bs]
    D_r = np.full(len(poa), np.inf)
    has = adaptive_relay >= 0
    D_r[has] = n_a / g_adaptive[idx[has], adaptive_relay[has]]
    return D_d, D_b, D_r


def build_realization(g_dedicated, g_adaptive, poa, channel, W_d, W_a, n_d, n_a, eta_r, P_max,
                      adaptive_relay=None, **extra):
    """
    Assemble a realization from power gains and an attachment.

    When ``adaptive_relay`` is omitted it defaults to the dedicated PoA for
    relay-attached UEs and to the strongest relay for BS-attached ones.
    """
    g_dedicated = np.asarray(g_dedicated, dtype=float)
    g_adaptive = np.asarray(g_adaptive, dtype=float)
    poa = np.asarray(poa, dtype=int)
    channel = np.asarray(channel, dtype=int)
    n, n_poa = g_dedicated.shape
    N_r = n_poa - 1
    if np.any(g_dedicated <= 0) or np.any(g_adaptive <= 0):
        raise ValueError("power gains must be positive")
    if adaptive_relay is None:
        adaptive_relay = candidate_relays(g_dedicated, poa)
    adaptive_relay = np.asarray(adaptive_relay, dtype=int)
    eta_r = np.broadcast_to(np.asarray(eta_r, dtype=float), (N_r,)).copy()
    P_max = np.broadcast_to(np.asarray(P_max, dtype=float), (n,)).copy()
    F = gain_matrix(g_dedicated, poa, channel)
    D_d, D_b, D_r = noise_vectors(g_dedicated, g_adaptive, poa, adaptive_relay, N_r, n_d, n_a)
    groups = int(extra.pop("groups", len(np.unique(channel))))
    return ChannelRealization(
        g_dedicated=g_dedicated, g_adaptive=g_adaptive, poa=poa, adaptive_relay=adaptive_relay,
        channel=channel, groups=groups, W_d=float(W_d), W_a=float(W_a), n_d=float(n_d), n_a=float(n_a),
        F=F, D_d=D_d, D_b=D_b, D_r=D_r, eta_r=eta_r, P_max=P_max, **extra)


def candidate_relays(g_dedicated, poa):
    """Relay used on the adaptive link when ``a_i = 0``."""
    g_dedicated = np.asarray(g_dedicated)
    N_r = g_dedicated.shape[1] - 1
    poa = np.asarray(poa)
    if N_r == 0:
        return np.full(len(poa), -1, dtype=int)
    strongest = np.argmax(g_dedicated[:, :N_r], axis=1)
    return np.where(poa < N_r, poa, strongest).astype(int)


def place_relays(config, rng):
    """Relay coordinates with pairwise and BS separation of at least ``2 R_L``."""
    half = config.region_side / 2.0
    min_sep = 2.0 * config.R_L
    relays = []
    attempts = 0
    while len(relays) < config.N_r:
        if attempts >= PLACEMENT_ATTEMPTS:
            raise ScenarioError("could not place %d non-overlapping clusters of radius %g m in a %g m region"
                                % (config.N_r, config.R_L, config.region_side))
        attempts += 1
        cand = rng.uniform(-half, half, size=2)
        if np.hypot(*cand) < min_sep:
            continue
        if any(np.hypot(*(cand - r)) < min_sep for r in relays):
            continue
        relays.append(cand)
    return np.array(relays).reshape(config.N_r, 2)


def _disk_points(rng, centers, radius):
    u = rng.random(len(centers))
    theta = rng.uniform(0.0, 2.0 * np.pi, len(centers))
    rad = radius * np.sqrt(u)
    return centers + np.column_stack([rad * np.cos(theta), rad * np.sin(theta)])


def rayleigh_coefficients(rng, distance, alpha):
    """Complex coefficients with exponential power, uniform phase and path loss."""
    kappa = rng.exponential(1.0, size=distance.shape)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=distance.shape)
    return np.sqrt(kappa) * np.exp(1j * phase) * distance ** (-alpha / 2.0)


def backhaul_capacities(config, rng):
    model = config.eta_r_model
    if isinstance(model, (list, tuple)):
        return rng.uniform(float(model[0]), float(model[1]), size=config.N_r)
    return np.full(config.N_r, float(model))


def generate(config, trial_index=0):
    """
    Draw the realization for one trial.

    Each UE attaches its dedicated link to the PoA with the strongest
    received pilot, measured on its dedicated channel.
    """
    rng_geo = rng_stream(config.seed, trial_index, GEOMETRY)
    relays = place_relays(config, rng_geo)
    poa_pos = np.vstack([relays, np.zeros((1, 2))])
    if config.N_r > 0:
        centers = relays[np.arange(config.n) % config.N_r]
    else:
        centers = np.zeros((config.n, 2))
    ue_pos = _disk_points(rng_geo, centers, config.R_L)
    distance = np.maximum(np.linalg.norm(ue_pos[:, None, :] - poa_pos[None, :, :], axis=2), MIN_DISTANCE)

    rng_fad = rng_stream(config.seed, trial_index, FADING)
    h_ded = rayleigh_coefficients(rng_fad, distance, config.alpha)
    h_ad = rayleigh_coefficients(rng_fad, distance, config.alpha)
    g_ded = np.abs(h_ded) ** 2
    g_ad = np.abs(h_ad) ** 2

    poa = np.argmax(g_ded, axis=1)
    channel, groups = assign_channels(poa, config.reuse_policy, config.N_r + 1)
    W_d, W_a = assign_bandwidth(config, config.n, groups)
    psd = 10.0 ** (config.noise_psd / 10.0)
    eta_r = backhaul_capacities(config, rng_stream(config.seed, trial_index, BACKHAUL))

    return build_realization(
        g_ded, g_ad, poa, channel, W_d, W_a, psd * W_d, psd * W_a, eta_r, config.p_max_vector(),
        groups=groups, h_dedicated=h_ded, h_adaptive=h_ad, ue_pos=ue_pos, poa_pos=poa_pos,
        distance=distance)


def perturb_csit(realization, csit_error_std, seed=0, trial_index=0):
    """
    Realization as seen through imperfect channel estimates.

    Every power gain is multiplied by ``exp(e)`` with ``e ~ N(0, std^2)``,
    and ``F`` and the noise vectors are rebuilt from the estimates. The
    attachment is kept and the exact realization is stored in ``truth``.
    """
    if csit_error_std < 0:
        raise ValueError("csit_error_std must be >= 0")
    base = realization.actual
    if csit_error_std == 0:
        return dataclasses.replace(base)
    rng = rng_stream(seed, trial_index, CSIT)
    e_ded = rng.normal(0.0, csit_error_std, size=base.g_dedicated.shape)
    e_ad = rng.normal(0.0, csit_error_std, size=base.g_adaptive.shape)
    g_ded = base.g_dedicated * np.exp(e_ded)
    g_ad = base.g_adaptive * np.exp(e_ad)
    F = gain_matrix(g_ded, base.poa, base.channel)
    D_d, D_b, D_r = noise_vectors(g_ded, g_ad, base.poa, base.adaptive_relay, base.N_r, base.n_d, base.n_a)
    h_ded = None if base.h_dedicated is None else base.h_dedicated * np.exp(e_ded / 2.0)
    h_ad = None if base.h_adaptive is None else base.h_adaptive * np.exp(e_ad / 2.0)
    return dataclasses.replace(base, g_dedicated=g_ded, g_adaptive=g_ad, F=F, D_d=D_d, D_b=D_b, D_r=D_r,
                               h_dedicated=h_ded, h_adaptive=h_ad, truth=base)
