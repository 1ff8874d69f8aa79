"""Experiment drivers: tail scans, exponential-inequality checks, clustering.

Each driver simulates ensembles of the centered process, reduces them to
frequency estimates with Wilson 95% intervals, and compares against the
relevant decay bound.  The iterated-logarithm bound exp(-2R loglog(1/eps))
is evaluated in the equivalent power form log(1/eps)^(-2R), which
reproduces tabulated values exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .action import LimitSetSpec, certificate_dictionary, min_action_to_terminal
from .coefficients import EPS_LIL_STRICT, DeviationScale, ScaleError
from .dynamics import Model
from .ensemble import run_ensemble
from .noise import ControlPath

__all__ = [
    "wilson_interval",
    "loglog_bound",
    "TailEstimate",
    "TailScanReport",
    "mdp_tail_scan",
    "FwReport",
    "fw_check",
    "LilReport",
    "lil_cluster_check",
    "ModulusReport",
    "modulus_tail_check",
]

_Z95 = 1.959963984540054


def wilson_interval(hits: int, n: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion; sane at zero counts."""
    if n < 1:
        raise ValueError("need at least one trial")
    phat = hits / n
    denom = 1.0 + z * z / n
    center = phat + z * z / (2 * n)
    half = z * math.sqrt(phat * (1.0 - phat) / n + z * z / (4 * n * n))
    lo = 0.0 if hits == 0 else max(0.0, (center - half) / denom)
    hi = 1.0 if hits == n else min(1.0, (center + half) / denom)
    return lo, hi


def loglog_bound(epsilon: float, rate: float) -> float:
    """exp(-2 R loglog(1/eps)) evaluated as log(1/eps)^(-2R)."""
    return math.log(1.0 / epsilon) ** (-2.0 * rate)


def _scale_for(eps: float, scale_cfg) -> DeviationScale:
    if isinstance(scale_cfg, DeviationScale):
        return scale_cfg
    if scale_cfg is None or scale_cfg.get("mode") == "lil":
        return DeviationScale.lil(eps)
    return DeviationScale.power(eps, scale_cfg.get("exponent", 0.25))


@dataclass
class TailEstimate:
    """One cell of a tail scan."""

    epsilon: float
    rho: float
    paths: int
    hits: int
    speed: float
    phat: float = field(init=False)
    ci_low: float = field(init=False)
    ci_high: float = field(init=False)
    censored: bool = field(init=False)

    def __post_init__(self):
        self.phat = self.hits / self.paths
        self.ci_low, self.ci_high = wilson_interval(self.hits, self.paths)
        self.censored = self.hits == 0

    def as_dict(self) -> dict:
        return {"epsilon": self.epsilon, "rho": self.rho, "paths": self.paths,
                "hits": self.hits, "phat": self.phat, "ci_low": self.ci_low,
                "ci_high": self.ci_high, "speed": self.speed,
                "censored": self.censored}


@dataclass
class TailScanReport:
    estimates: list
    slope: float | None
    intercept: float | None
    oracle_rate: float | None
    status: str
    verdict: str | None
    blowups: int
    slope_tolerance: float

    def as_dict(self) -> dict:
        return {"estimates": [e.as_dict() for e in self.estimates],
                "slope": self.slope, "intercept": self.intercept,
                "oracle_rate": self.oracle_rate, "status": self.status,
                "verdict": self.verdict, "blowups": self.blowups,
                "slope_tolerance": self.slope_tolerance}


def _sup_ball_rate(model: Model, rho: float) -> float | None:
    """inf of the rate over {sup-norm >= rho} by a scaled ray search.

    The rate is quadratic, so one unit-terminal solve per retained mode
    suffices; the infimum over the ray through z scales by rho^2.
    """
    best = None
    for j in range(model.basis.mode_count):
        z = np.zeros(model.basis.mode_count, dtype=complex)
        z[j] = 1.0
        res = min_action_to_terminal(model, z)
        if res.converged and res.residual < 1e-6:
            val = res.value * rho ** 2
            best = val if best is None else min(best, val)
    return best


def mdp_tail_scan(model: Model, *, epsilons, rho: float, paths: int,
                  scale_cfg=None, seed: int, threads: int = 1,
                  slope_tolerance: float = 0.25) -> TailScanReport:
    """Estimate P(sup_t ||Z^eps|| >= rho) per epsilon and fit the decay slope.

    Fits log(phat) against -speed over uncensored cells and compares the
    slope with the minimum-action rate of leaving the sup-norm ball.
    Zero-hit cells are censored (upper interval only) and never enter the
    fit; with fewer than three uncensored cells the fit aborts.
    """
    if len(epsilons) < 4:
        raise ValueError("tail scan needs at least 4 epsilon points")
    estimates = []
    blowups = 0
    for i, eps in enumerate(sorted(epsilons, reverse=True)):
        scale = _scale_for(eps, scale_cfg)
        stats = run_ensemble(model, scale, n_paths=paths,
                             master_seed=seed + 1000003 * i, threads=threads)
        ok = stats.ok
        blowups += int(np.sum(~ok))
        hits = int(np.sum(stats.sup_norm[ok] >= rho))
        estimates.append(TailEstimate(eps, rho, int(np.sum(ok)), hits, scale.speed))
    if model.noise.is_zero:
        return TailScanReport(estimates, None, None, None,
                              status="deterministic", verdict=None,
                              blowups=blowups, slope_tolerance=slope_tolerance)
    usable = [e for e in estimates if not e.censored]
    if all(e.hits == 0 for e in estimates):
        return TailScanReport(estimates, None, None, None,
                              status="deterministic", verdict=None,
                              blowups=blowups, slope_tolerance=slope_tolerance)
    if len(usable) < 3:
        return TailScanReport(estimates, None, None, None,
                              status="insufficient_uncensored_cells", verdict="FAIL",
                              blowups=blowups, slope_tolerance=slope_tolerance)
    x = np.array([-e.speed for e in usable])
    y = np.log([e.phat for e in usable])
    slope, intercept = np.polyfit(x, y, 1)
    oracle = _sup_ball_rate(model, rho)
    verdict = None
    if oracle is not None and oracle > 0:
        verdict = "PASS" if abs(slope / oracle - 1.0) <= slope_tolerance else "FAIL"
    return TailScanReport(estimates, float(slope), float(intercept),
                          oracle, status="ok", verdict=verdict,
                          blowups=blowups, slope_tolerance=slope_tolerance)


@dataclass
class FwReport:
    rows: list
    passed: bool
    starved: list
    monotone: bool
    formula_check: dict
    blowups: int

    def as_dict(self) -> dict:
        return {"rows": self.rows, "passed": self.passed, "starved": self.starved,
                "monotone": self.monotone, "formula_check": self.formula_check,
                "blowups": self.blowups}


def formula_check_value(c: float = math.e, j: int = 10, rate: float = 1.0) -> float:
    """Decay bound at eps = c^-j: exp(-2R loglog(c^j)) = (j log c)^(-2R)."""
    return (j * math.log(c)) ** (-2.0 * rate)


def fw_check(model: Model, *, epsilons, rho: float, eta: float | None,
             rate: float, paths: int, control: ControlPath | None = None,
             rho_factor: float = 1.5, seed: int, threads: int = 1) -> FwReport:
    """Joint deviation/conditioning frequencies against the exponential bound.

    Per epsilon, estimates P(||Z^eps - X^h|| >= rho, |a(eps)W - h|_{0,sup} < eta)
    and passes when every Wilson upper bound sits below loglog_bound(eps, R).
    eta = None drops the conditioning (marginal tail).  A second threshold
    rho_factor * rho is tallied to assert monotonicity in rho.
    """
    skeleton = model.evolve_skeleton(control) if control is not None else None
    rows = []
    passed = True
    monotone = True
    starved = []
    blowups = 0
    for i, eps in enumerate(sorted(epsilons, reverse=True)):
        scale = DeviationScale.lil(eps)
        stats = run_ensemble(model, scale, n_paths=paths,
                             master_seed=seed + 2000003 * i, threads=threads,
                             reference=skeleton, conditioning=control,
                             track_noise=True)
        ok = stats.ok
        blowups += int(np.sum(~ok))
        n = int(np.sum(ok))
        dev = stats.sup_deviation[ok] if skeleton is not None else stats.sup_norm[ok]
        qualify = (stats.noise_distance[ok] < eta) if eta is not None \
            else np.ones(n, dtype=bool)
        joint = int(np.sum((dev >= rho) & qualify))
        joint_wide = int(np.sum((dev >= rho_factor * rho) & qualify))
        if joint_wide > joint:
            monotone = False
        n_qualify = int(np.sum(qualify))
        if eta is not None and n_qualify == 0:
            starved.append({"epsilon": eps, "qualifying": 0})
        _, upper = wilson_interval(joint, n)
        bound = loglog_bound(eps, rate)
        ok_cell = upper <= bound
        passed = passed and ok_cell
        rows.append({"epsilon": eps, "speed": scale.speed, "paths": n,
                     "qualifying": n_qualify, "joint_hits": joint,
                     "joint_hits_wide": joint_wide,
                     "phat": joint / n, "ci_upper": upper, "bound": bound,
                     "ok": bool(ok_cell)})
    formula = {"c": math.e, "j": 10, "R": 1.0,
               "value": formula_check_value(math.e, 10, 1.0)}
    return FwReport(rows=rows, passed=passed, starved=starved, monotone=monotone,
                    formula_check=formula, blowups=blowups)


@dataclass
class LilReport:
    c: float
    j_values: list
    rows: list
    recurrence_counts: list
    escape_count: int
    delta_rec: float
    delta_esc: float
    hull_scale: float
    certificates: int

    def as_dict(self) -> dict:
        return {"c": self.c, "j_values": self.j_values, "rows": self.rows,
                "recurrence_counts": self.recurrence_counts,
                "escape_count": self.escape_count,
                "recurrence_frequency_zero":
                    self.recurrence_counts[0] / len(self.j_values),
                "escape_frequency": self.escape_count / len(self.j_values),
                "delta_rec": self.delta_rec, "delta_esc": self.delta_esc,
                "hull_scale": self.hull_scale, "certificates": self.certificates}


def lil_cluster_check(model: Model, *, c: float, j_min: int, j_max: int,
                      budget: float, certificates: int = 5,
                      delta_rec: float | None = None,
                      delta_esc: float | None = None,
                      seed: int) -> LilReport:
    """Clustering of Z^{1/c^j} around the finite certificate dictionary.

    One path per j from a common master seed (independent substreams).
    Recurrence tallies the j with sup-distance to a certificate below
    delta_rec; escapes tally the j whose distance from every certificate
    is at least delta_esc.  The default deltas are a quarter of the
    certificate hull's sup-norm scale.
    """
    if c <= 1:
        raise ValueError("need c > 1")
    j_values = list(range(j_min, j_max + 1))
    eps_values = [c ** (-j) for j in j_values]
    if any(eps >= EPS_LIL_STRICT for eps in eps_values):
        raise ScaleError(
            f"subsequence leaves the admissible range: need eps < {EPS_LIL_STRICT:.3e}"
        )
    pairs = certificate_dictionary(model, LimitSetSpec(budget), certificates)
    hull_scale = max(traj.sup_h_norm() for _, traj in pairs)
    d_rec = 0.25 * hull_scale if delta_rec is None else delta_rec
    d_esc = 0.25 * hull_scale if delta_esc is None else delta_esc
    rows = []
    rec_counts = [0] * len(pairs)
    escapes = 0
    for j, eps in zip(j_values, eps_values):
        traj = model.evolve_moderate(eps, model.new_stream(seed, path_index=j),
                                     scale_mode="lil")
        dists = [traj.sup_distance(cert_traj) for _, cert_traj in pairs]
        hull_dist = min(dists)
        for idx, d in enumerate(dists):
            if d <= d_rec:
                rec_counts[idx] += 1
        # strict: sitting on the hull is not an escape (matters at delta = 0)
        escaped = hull_dist > d_esc
        if escaped:
            escapes += 1
        rows.append({"j": j, "epsilon": eps, "a": DeviationScale.lil(eps).a,
                     "dist_zero": dists[0], "hull_dist": hull_dist,
                     "recurrent_zero": bool(dists[0] <= d_rec),
                     "escaped": bool(escaped)})
    return LilReport(c=c, j_values=j_values, rows=rows,
                     recurrence_counts=rec_counts, escape_count=escapes,
                     delta_rec=d_rec, delta_esc=d_esc, hull_scale=hull_scale,
                     certificates=len(pairs))


@dataclass
class ModulusReport:
    level: int
    threshold: float
    rows: list
    largest_rate_sustained: float
    blowups: int

    def as_dict(self) -> dict:
        return {"level": self.level, "threshold": self.threshold, "rows": self.rows,
                "largest_rate_sustained": self.largest_rate_sustained,
                "blowups": self.blowups}


def modulus_tail_check(model: Model, *, level: int, epsilons, threshold: float,
                       rate: float, paths: int,
                       control: ControlPath | None = None, seed: int,
                       threads: int = 1) -> ModulusReport:
    """Tail of the dyadic coarsening modulus against the exponential bound.

    Estimates P(modulus(Z~^eps, n) > threshold) per epsilon and reports the
    largest R with every Wilson upper bound below loglog_bound(eps, R).
    """
    blocks = 2 ** level
    if blocks > model.steps or model.steps % blocks:
        raise ValueError(f"level {level} does not tile the {model.steps}-step grid")
    rows = []
    sustained = math.inf
    blowups = 0
    for i, eps in enumerate(sorted(epsilons, reverse=True)):
        scale = DeviationScale.lil(eps)
        stats = run_ensemble(model, scale, n_paths=paths,
                             master_seed=seed + 3000017 * i, threads=threads,
                             girsanov_control=control, dyadic_level=level)
        ok = stats.ok
        blowups += int(np.sum(~ok))
        n = int(np.sum(ok))
        hits = int(np.sum(stats.modulus[ok] > threshold))
        _, upper = wilson_interval(hits, n)
        loglog = math.log(math.log(1.0 / eps))
        r_cell = -math.log(upper) / (2.0 * loglog) if upper < 1.0 else 0.0
        sustained = min(sustained, r_cell)
        rows.append({"epsilon": eps, "paths": n, "hits": hits, "phat": hits / n,
                     "ci_upper": upper, "bound": loglog_bound(eps, rate),
                     "ok": bool(upper <= loglog_bound(eps, rate)),
                     "rate_sustained": r_cell})
    return ModulusReport(level=level, threshold=threshold, rows=rows,
                         largest_rate_sustained=float(sustained), blowups=blowups)
