"""
Monte Carlo sweeps over one scenario parameter.

An experiment runs every scheme on the same channel draw for each
(sweep value, trial) pair, writes one CSV row per run, optional per-run
traces, and an aggregate JSON with mean, median and a 95% confidence
interval per sweep value and scheme. Trial ``t`` always uses the RNG
streams keyed by ``(seed, t)``, so outputs do not depend on how trials
are scheduled across threads.
"""

import csv
import dataclasses
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .baselines import SchemeId, run_scheme
from .ndt import NDTParams
from .numerics import spectral_radius
from .scenario import ConfigError, ScenarioConfig, generate, perturb_csit

#: Sweep variable -> scenario field.
SWEEP_FIELDS = {
    "n": "n",
    "eta_r": "eta_r_model",
    "alpha": "alpha",
    "R_L": "R_L",
    "N_r": "N_r",
    "beta": "beta",
    "V_hat": "V_hat",
    "noise_psd": "noise_psd",
}
_INTEGER_SWEEPS = ("n", "N_r")

TRIAL_COLUMNS = ["sweep_value", "trial", "scheme", "eta_N_bps", "converged", "k_converged", "rho_F",
                 "rho_condition"]


@dataclass
class ExperimentSpec:
    base: ScenarioConfig = field(default_factory=ScenarioConfig)
    sweep_variable: str = "n"
    sweep_values: list = field(default_factory=lambda: [8])
    schemes: list = field(default_factory=lambda: [s.value for s in SchemeId])
    trials: int = 1
    output_dir: str = "results"
    write_traces: bool = True

    def __post_init__(self):
        if isinstance(self.base, dict):
            self.base = ScenarioConfig.from_dict(self.base)
        self.validate()

    def validate(self):
        if self.sweep_variable not in SWEEP_FIELDS:
            raise ConfigError("sweep_variable must be one of %s, got %r"
                              % (sorted(SWEEP_FIELDS), self.sweep_variable))
        if not isinstance(self.sweep_values, (list, tuple)) or len(self.sweep_values) == 0:
            raise ConfigError("sweep_values must be a non-empty list")
        if not isinstance(self.trials, int) or isinstance(self.trials, bool) or self.trials < 1:
            raise ConfigError("trials must be an integer >= 1")
        if not isinstance(self.schemes, (list, tuple)) or len(self.schemes) == 0:
            raise ConfigError("schemes must be a non-empty list")
        try:
            self.schemes = [SchemeId(s).value for s in self.schemes]
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not isinstance(self.output_dir, str) or not self.output_dir:
            raise ConfigError("output_dir must be a non-empty string")
        if not isinstance(self.write_traces, bool):
            raise ConfigError("write_traces must be true or false")
        for v in self.sweep_values:
            self.config_for(v)

    def config_for(self, value):
        """Scenario for one sweep point; raises ConfigError if it is invalid."""
        if self.sweep_variable in _INTEGER_SWEEPS:
            if isinstance(value, float) and value.is_integer():
                value = int(value)
        return self.base.replace(**{SWEEP_FIELDS[self.sweep_variable]: value})

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["base"] = self.base.to_dict()
        return d

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("experiment spec must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError("unknown experiment fields: %s" % ", ".join(unknown))
        data = dict(data)
        data["base"] = ScenarioConfig.from_dict(data.get("base", {}))
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError("invalid JSON: %s" % exc) from exc
        return cls.from_dict(data)


@dataclass
class TrialResult:
    sweep_value: object
    trial: int
    scheme: str
    eta_N_bps: float
    converged: bool
    k_converged: object
    rho_F: float
    rho_condition: bool
    trace: object = None

    def row(self):
        return [_fmt(self.sweep_value), self.trial, self.scheme, repr(float(self.eta_N_bps)),
                int(self.converged), "" if self.k_converged is None else self.k_converged,
                repr(float(self.rho_F)), int(self.rho_condition)]


def _fmt(value):
    if isinstance(value, (list, tuple)):
        return json.dumps([float(v) for v in value])
    if isinstance(value, float):
        return repr(value)
    return str(value)


def trial_realization(config, trial):
    """Channel draw for a trial, seen through the configured CSIT error."""
    real = generate(config, trial)
    if config.csit_error_std > 0:
        real = perturb_csit(real, config.csit_error_std, seed=config.seed, trial_index=trial)
    return real


def run_trial(config, trial, schemes, sweep_value=None, keep_trace=False):
    """Run every scheme on one channel draw."""
    real = trial_realization(config, trial)
    params = NDTParams.from_config(config)
    F = real.actual.F
    rho = spectral_radius(F)
    cond = bool(rho < (real.W_a + real.W_d) / real.W_a)
    out = []
    for scheme in schemes:
        tr = run_scheme(scheme, real, params)
        out.append(TrialResult(sweep_value=sweep_value, trial=trial, scheme=SchemeId(scheme).value,
                               eta_N_bps=tr.final_eta_N, converged=tr.converged, k_converged=tr.k_converged,
                               rho_F=rho, rho_condition=cond, trace=tr if keep_trace else None))
    return out


def confidence_halfwidth(values, level=0.95):
    """Half-width of the two-sided Student-t interval for the mean."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 0.0
    sem = float(np.std(values, ddof=1)) / math.sqrt(values.size)
    return float(stats.t.ppf(0.5 + level / 2.0, values.size - 1) * sem)


def summarize(values):
    values = np.asarray(values, dtype=float)
    return {"mean": float(np.mean(values)), "median": float(np.median(values)),
            "ci95": confidence_halfwidth(values), "count": int(values.size)}


def aggregate(results, sweep_values, schemes):
    """Per sweep value and scheme statistics, keyed by the formatted sweep value."""
    out = {}
    for value in sweep_values:
        key = _fmt(value)
        point = {}
        rows = [r for r in results if _fmt(r.sweep_value) == key]
        for scheme in schemes:
            mine = [r for r in rows if r.scheme == scheme]
            if not mine:
                continue
            entry = summarize([r.eta_N_bps for r in mine])
            conv = [r.converged for r in mine]
            entry["converged_fraction"] = float(np.mean(conv))
            held = [r.converged for r in mine if r.rho_condition]
            entry["converged_fraction_rho_condition"] = float(np.mean(held)) if held else None
            entry["rho_condition_fraction"] = float(np.mean([r.rho_condition for r in mine]))
            ks = [r.k_converged for r in mine if r.k_converged is not None]
            entry["mean_k_converged"] = float(np.mean(ks)) if ks else None
            point[scheme] = entry
        out[key] = point
    return out


def write_trials_csv(results, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRIAL_COLUMNS)
        for r in results:
            writer.writerow(r.row())


def read_trials_csv(path):
    """Trial rows back as ``TrialResult`` (without traces)."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            value = row["sweep_value"]
            out.append(TrialResult(
                sweep_value=json.loads(value) if value.startswith("[") else value,
                trial=int(row["trial"]), scheme=row["scheme"], eta_N_bps=float(row["eta_N_bps"]),
                converged=bool(int(row["converged"])),
                k_converged=int(row["k_converged"]) if row["k_converged"] else None,
                rho_F=float(row["rho_F"]), rho_condition=bool(int(row["rho_condition"]))))
    return out


def run_experiment(spec, threads=1):
    """
    Run a sweep and write ``trials.csv``, ``aggregate.json`` and, when
    enabled, ``traces/<point>_<trial>_<scheme>.csv`` under ``output_dir``.

    Returns the list of :class:`TrialResult` in sweep, trial, scheme order.
    """
    spec.validate()
    os.makedirs(spec.output_dir, exist_ok=True)
    trace_dir = os.path.join(spec.output_dir, "traces")
    if spec.write_traces:
        os.makedirs(trace_dir, exist_ok=True)

    tasks = [(p, value, spec.config_for(value), t)
             for p, value in enumerate(spec.sweep_values) for t in range(spec.trials)]

    def work(task):
        p, value, config, t = task
        return p, run_trial(config, t, spec.schemes, sweep_value=value, keep_trace=spec.write_traces)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            done = list(pool.map(work, tasks))
    else:
        done = [work(task) for task in tasks]

    results = []
    for p, rows in done:
        for r in rows:
            if r.trace is not None:
                name = "%d_%d_%s.csv" % (p, r.trial, r.scheme)
                with open(os.path.join(trace_dir, name), "w", newline="") as fh:
                    r.trace.write_csv(fh)
                r.trace = None
            results.append(r)

    write_trials_csv(results, os.path.join(spec.output_dir, "trials.csv"))
    agg = {"sweep_variable": spec.sweep_variable, "trials": spec.trials,
           "points": aggregate(results, spec.sweep_values, spec.schemes)}
    with open(os.path.join(spec.output_dir, "aggregate.json"), "w") as fh:
        json.dump(agg, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return results
