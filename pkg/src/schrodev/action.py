"""Rate functional, minimum-action solves, and the compact limit set.

The rate of a path v charges half the smallest control energy that drives
the deterministic skeleton through v.  On the grid this is exact linear
algebra: the integrator's step relation is affine in the forcing, so two
consecutive states determine the per-step forcing residual r_k, and the
control solves B_k h'_k = r_k in the minimum covariance-weighted norm
(regularized least squares; tiny singular values are truncated).  A step
whose residual cannot be matched within tolerance sends the rate to
infinity, the empty-infimum convention.

Terminal hitting minimizes the same energy subject to X(T) = z.  The
terminal map is linear in the control, so the minimum-norm solution solves
the normal equations F F* mu = z by conjugate gradients, with the adjoint
F* computed by a backward propagator sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import Model, Trajectory
from .noise import ControlPath, cameron_martin_energy
from .spectral import GridShapeError, h_norm

__all__ = [
    "ActionResult",
    "LimitSetSpec",
    "MembershipResult",
    "path_rate",
    "min_action_to_terminal",
    "limit_set_membership",
    "certificate_dictionary",
    "terminal_map",
    "terminal_map_adjoint",
]

TAU_FEAS = 1e-6
TAU_SING = 1e-10


@dataclass
class ActionResult:
    """Value of the rate functional with the recovered minimum-norm control."""

    value: float
    control: ControlPath | None
    residual: float
    iterations: int
    converged: bool = True

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.value)

    def as_dict(self) -> dict:
        return {
            "value": None if not self.feasible else float(self.value),
            "feasible": self.feasible,
            "residual": float(self.residual),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
        }


@dataclass(frozen=True)
class LimitSetSpec:
    """Energy budget M defining the cluster set {rate <= M/2}."""

    budget: float
    tolerance: float = 1e-9

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")

    @property
    def threshold(self) -> float:
        return self.budget / 2.0


@dataclass
class MembershipResult:
    member: bool
    margin: float
    rate: ActionResult


def _control_operator(model: Model, k: int):
    """(matrix C = B diag(sqrt(lambda)), scalar alpha) for step k; one is None."""
    mult = model.control_multiplier(k)
    if mult is None:
        return None, complex(model.noise.alpha)
    bmat = model.basis.multiplication_matrix(mult)
    return bmat * np.sqrt(model.spectrum.eigenvalues), None


def _min_norm_solve(cmat: np.ndarray, sqrt_lam: np.ndarray, r: np.ndarray):
    """Minimum-|.|_0 solution of B h' = r via truncated SVD of B diag(sqrt lam)."""
    u, s, vh = np.linalg.svd(cmat)
    keep = s > TAU_SING * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
    w = vh.conj().T[:, keep] @ ((u.conj().T[keep] @ r) / s[keep])
    hdot = sqrt_lam * w
    defect = float(np.linalg.norm(cmat @ w - r))
    return hdot, defect


def path_rate(model: Model, v: Trajectory, tau_feas: float = TAU_FEAS) -> ActionResult:
    """Rate functional of a grid path v with v(0) = 0.

    Inverts the integrator's step relation for the per-step forcing
    residual, then recovers the cheapest control producing it through the
    control operator g(t, u0(t)).  Any step whose residual defect exceeds
    tau_feas * ||r|| flags the path unreachable (value = +inf).
    """
    if float(h_norm(v.states[0])) != 0.0:
        raise ValueError("path rate requires v(0) = 0")
    if v.states.shape != (model.steps + 1, model.basis.mode_count):
        raise GridShapeError("trajectory does not match the model grid")
    if abs(v.dt - model.dt) > 1e-12 * model.dt:
        raise GridShapeError("trajectory dt does not match the model")
    sqrt_lam = np.sqrt(model.spectrum.eigenvalues)
    dt = model.dt
    K = model.steps
    values = np.empty((K, model.basis.mode_count), dtype=complex)
    worst = 0.0
    feasible = True
    static = None
    if model.noise.is_state_independent and model.noise.alpha_is_scalar:
        static = complex(model.noise.alpha)
    for k in range(K):
        r = model.invert_step(v.states[k], v.states[k + 1], k) / dt
        rnorm = float(np.linalg.norm(r))
        if static is not None:
            if static == 0:
                values[k] = 0.0
                defect = rnorm
            else:
                values[k] = r / static
                defect = 0.0
        else:
            cmat, _ = _control_operator(model, k)
            values[k], defect = _min_norm_solve(cmat, sqrt_lam, r)
        if rnorm > 0 and defect > tau_feas * rnorm:
            feasible = False
        worst = max(worst, defect / rnorm if rnorm > 0 else 0.0)
    control = ControlPath(values, dt, model.spectrum)
    value = cameron_martin_energy(control) / 2.0 if feasible else math.inf
    return ActionResult(value=value, control=control, residual=worst, iterations=0)


def terminal_map(model: Model, h: ControlPath, steps: int | None = None) -> np.ndarray:
    """X^h(T): terminal state of the skeleton driven by h."""
    K = model.steps if steps is None else steps
    z = np.zeros(model.basis.mode_count, dtype=complex)
    u0_states = model.u0().states
    for k in range(K):
        f = model.dt * model._g_forcing(model.noise, model.times[k],
                                        u0_states[k], h.values[k])
        z = model.step_states(z, f, k)
    return z


def terminal_map_adjoint(model: Model, mu: np.ndarray,
                         steps: int | None = None) -> ControlPath:
    """Adjoint of the terminal map w.r.t. the control's weighted inner product.

    Backward sweep with the conjugate-transposed step operators; the
    covariance weighting makes the returned object a control derivative.
    """
    K = model.steps if steps is None else steps
    J = model.basis.mode_count
    lam = model.spectrum.eigenvalues
    rot_conj = np.conj(model.rot_half)
    values = np.empty((K, J), dtype=complex)
    w = np.asarray(mu, dtype=complex).copy()
    for k in range(K - 1, -1, -1):
        # adjoint of v -> rot*((rot*v) @ fwd.T + f) @ inv.T applied to w
        ops = model.potential_ops(k)
        if ops is None:
            s_adj = rot_conj * w
            t_adj = rot_conj * s_adj
        else:
            fwd, inv = ops
            s_adj = inv.conj().T @ (rot_conj * w)
            t_adj = rot_conj * (fwd.conj().T @ s_adj)
        mult = model.control_multiplier(k)
        if mult is None:
            b_adj = np.conj(model.noise.alpha) * s_adj
        else:
            b_adj = model.basis.apply_multiplier(np.conj(mult), s_adj)
        # the step's dt and the control quadrature's dt cancel in the pairing
        values[k] = lam * b_adj
        w = t_adj
    return ControlPath(values, model.dt, model.spectrum)


def min_action_to_terminal(model: Model, z, horizon: float | None = None,
                           tol: float = 1e-12, max_iterations: int | None = None
                           ) -> ActionResult:
    """Cheapest control steering the skeleton from 0 to z at the horizon.

    Conjugate gradients on the normal equations F F* mu = z; the minimizer
    is h' = F* mu.  A stagnating solve returns converged=False carrying the
    best iterate instead of raising.
    """
    z = np.asarray(getattr(z, "coeffs", z), dtype=complex)
    if horizon is None:
        steps = model.steps
    else:
        steps = int(round(horizon / model.dt))
        if not 1 <= steps <= model.steps:
            raise ValueError("horizon must lie on the model grid")
    znorm = float(np.linalg.norm(z))
    if znorm == 0.0:
        control = ControlPath.zero(steps, model.spectrum, model.dt)
        return ActionResult(0.0, control, 0.0, 0)
    if max_iterations is None:
        max_iterations = 20 * model.basis.mode_count + 50

    def gram(mu):
        return terminal_map(model, terminal_map_adjoint(model, mu, steps), steps)

    mu = np.zeros_like(z)
    r = z - gram(mu)
    p = r.copy()
    rs = float(np.vdot(r, r).real)
    best_mu, best_res = mu.copy(), math.sqrt(rs)
    iterations = 0
    converged = False
    for iterations in range(1, max_iterations + 1):
        ap = gram(p)
        denom = float(np.vdot(p, ap).real)
        if denom <= 0.0:
            break
        alpha = rs / denom
        mu = mu + alpha * p
        r = r - alpha * ap
        rs_new = float(np.vdot(r, r).real)
        res = math.sqrt(rs_new)
        if res < best_res:
            best_res, best_mu = res, mu.copy()
        if res <= tol * znorm:
            converged = True
            break
        p = r + (rs_new / rs) * p
        rs = rs_new
    control = terminal_map_adjoint(model, best_mu, steps)
    value = cameron_martin_energy(control) / 2.0
    residual = float(np.linalg.norm(terminal_map(model, control, steps) - z)) / znorm
    return ActionResult(value=value, control=control, residual=residual,
                        iterations=iterations, converged=converged)


def limit_set_membership(model: Model, v: Trajectory,
                         spec: LimitSetSpec) -> MembershipResult:
    """Is v inside the cluster set {rate <= budget/2}?  Infinite rate never is."""
    rate = path_rate(model, v)
    if not rate.feasible:
        return MembershipResult(member=False, margin=-math.inf, rate=rate)
    margin = spec.threshold - rate.value
    return MembershipResult(member=rate.value <= spec.threshold + spec.tolerance,
                            margin=margin, rate=rate)


def certificate_dictionary(model: Model, spec: LimitSetSpec,
                           count: int) -> list[tuple[ControlPath, Trajectory]]:
    """Deterministic (control, skeleton path) pairs inside the limit set.

    The first certificate is the zero pair; the rest cycle the low modes
    with phase-locked constant-modulus derivatives at energies M/4 and
    M/2 * (1 - 1e-6), all strictly inside the budget.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    K, dt = model.steps, model.dt
    lam = model.spectrum.eigenvalues
    mu = model.basis.eigenvalues
    horizon = model.horizon
    pairs = [(ControlPath.zero(K, model.spectrum, dt),
              model.evolve_skeleton(ControlPath.zero(K, model.spectrum, dt)))]
    mids = (np.arange(K) + 0.5) * dt
    for i in range(1, count):
        mode = (i - 1) % model.basis.mode_count
        target = spec.budget / 4.0 if i % 2 == 1 else spec.budget / 2.0 * (1.0 - 1e-6)
        amp = math.sqrt(2.0 * lam[mode] * target / horizon)
        values = np.zeros((K, model.basis.mode_count), dtype=complex)
        # phase-locked to the mode's free rotation: the response grows linearly
        values[:, mode] = amp * np.exp(1j * mu[mode] * (horizon - mids))
        h = ControlPath(values, dt, model.spectrum)
        pairs.append((h, model.evolve_skeleton(h)))
    return pairs
