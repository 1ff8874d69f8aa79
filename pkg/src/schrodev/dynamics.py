"""Time integration of the five evolution problems.

One step map serves every equation.  With R = diag(exp(-i mu_j dt/2)) the
exact half-rotation of the free group, a step from v_k to v_{k+1} solves

    conj(R) v_{k+1} = R v_k + dt * U_mid m_k + f_k,
    m_k = (R v_k + conj(R) v_{k+1}) / 2,

where U_mid is the dealiased multiplication by the potential at the step
midpoint (implicit midpoint / Crank-Nicolson) and f_k collects the
explicit forcing evaluated at the left endpoint (Ito convention):

    original  u^eps : f_k = sqrt(eps) * g(t_k, u_k) dW_k
    centered  Z^eps : f_k = a(eps)   * g~(t_k, Z_k) dW_k
    shifted   Z~^eps: f_k = a(eps) * g~(t_k, Z_k) dW_k + dt * g~(t_k, Z_k) h'_k
    skeleton  X^h   : f_k = dt * g(t_k, u0(t_k)) h'_k

The free part is advanced exactly, so the scheme is unconditionally stable
and unitary when the potential vanishes; the midpoint treatment of the
potential and the mid-sandwich forcing weight make it second order.  The
step relation is affine in the forcing and therefore exactly invertible
given two consecutive states, which the rate-functional module exploits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coefficients import (DeviationScale, NoiseCoefficient, Potential,
                           ScaleError, make_shifted)
from .noise import (ControlPath, CovarianceSpectrum, WienerIncrementStream,
                    h0_norm_sq)
from .spectral import GridShapeError, SpectralBasis, SpectralField, h_norm, v_norm

__all__ = [
    "BlowUpError",
    "ResolutionError",
    "IntegratorConfig",
    "Trajectory",
    "DyadicMap",
    "Model",
    "dyadic_modulus",
    "moment_monitor",
    "MomentReport",
    "BLOWUP_NORM",
]

BLOWUP_NORM = 1.0e6


class BlowUpError(RuntimeError):
    """State escaped the blow-up guard; carries the offending step index."""

    def __init__(self, step: int, norm: float):
        super().__init__(f"state norm {norm:.3e} exceeded guard at step {step}")
        self.step = step
        self.norm = norm


class ResolutionError(ValueError):
    """Dyadic level finer than the stored time grid."""


@dataclass(frozen=True)
class IntegratorConfig:
    """Uniform-step integrator parameters."""

    dt: float
    horizon: float
    scheme: str = "crank_nicolson_splitting"
    solve_tol: float = 1e-12

    def __post_init__(self):
        if self.dt <= 0 or self.horizon <= 0:
            raise ValueError("dt and horizon must be positive")
        steps = self.horizon / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError(f"dt={self.dt} does not divide horizon={self.horizon}")
        if self.scheme != "crank_nicolson_splitting":
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.solve_tol > 1e-10:
            raise ValueError("linear-solve tolerance must be <= 1e-10")

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass
class Trajectory:
    """Time-indexed coefficient states of one evolution."""

    times: np.ndarray
    states: np.ndarray  # (steps+1, J) complex
    tag: str
    basis: SpectralBasis
    scale: DeviationScale | None = None

    @property
    def n_steps(self) -> int:
        return self.states.shape[0] - 1

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def field(self, k: int) -> SpectralField:
        return SpectralField(self.basis, self.states[k])

    def at(self, t: float) -> np.ndarray:
        """Linear interpolation of the coefficients at time t (no extrapolation)."""
        if t < self.times[0] - 1e-12 or t > self.times[-1] + 1e-12:
            raise ValueError(f"time {t} outside stored range [0, {self.times[-1]}]")
        pos = np.clip((t - self.times[0]) / self.dt, 0.0, self.n_steps)
        k = int(pos)
        if k == self.n_steps:
            return self.states[-1]
        w = pos - k
        return (1.0 - w) * self.states[k] + w * self.states[k + 1]

    def h_norms(self) -> np.ndarray:
        return h_norm(self.states)

    def sup_h_norm(self) -> float:
        return float(self.h_norms().max())

    def sup_v_norm(self) -> float:
        return float(v_norm(self.states, self.basis.eigenvalues).max())

    def sup_distance(self, other: "Trajectory") -> float:
        """Uniform-in-time L2 distance on the shared grid."""
        if other.states.shape != self.states.shape:
            raise GridShapeError("trajectories live on different grids")
        return float(h_norm(self.states - other.states).max())


@dataclass(frozen=True)
class DyadicMap:
    """Piecewise-constant time coarsening at resolution horizon * 2^-level."""

    level: int
    horizon: float

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("level must be nonnegative")

    @property
    def block(self) -> float:
        return self.horizon * 2.0 ** (-self.level)

    def map_time(self, s):
        """Block left endpoint containing s; the horizon maps to itself."""
        s = np.asarray(s, dtype=float)
        out = np.floor(s / self.block) * self.block
        return np.where(s >= self.horizon, self.horizon, out)

    def anchor_indices(self, n_steps: int) -> np.ndarray:
        """Anchor grid index for each grid index 1..K, right-closed blocks.

        Grid index i > 0 in block ((i-1) // m, with m grid steps per block)
        is compared against the block's left endpoint, so a block boundary
        closes the block it ends rather than opening the next one.
        """
        blocks = 2 ** self.level
        if blocks > n_steps or n_steps % blocks != 0:
            raise ResolutionError(
                f"2^{self.level} blocks do not tile a {n_steps}-step grid"
            )
        m = n_steps // blocks
        i = np.arange(1, n_steps + 1)
        return ((i - 1) // m) * m


def dyadic_modulus(traj: Trajectory, level: int) -> float:
    """sup over the grid of ||Z(s) - Z(psi_n(s))|| with right-closed blocks."""
    anchors = DyadicMap(level, traj.horizon).anchor_indices(traj.n_steps)
    return float(h_norm(traj.states[1:] - traj.states[anchors]).max())


class Model:
    """Spatial operators, coefficients, and integrator for one configuration.

    Bundles the precomputed step operators shared by the five evolutions and
    caches the deterministic path u0 started from ``gamma``.
    """

    def __init__(self, basis: SpectralBasis, spectrum: CovarianceSpectrum,
                 noise: NoiseCoefficient, potential: Potential,
                 integrator: IntegratorConfig, gamma=None):
        if spectrum.mode_count != basis.mode_count:
            raise GridShapeError("spectrum and basis disagree on mode count")
        self.basis = basis
        self.spectrum = spectrum
        self.noise = noise
        self.potential = potential
        self.integrator = integrator
        if gamma is None:
            gamma = np.zeros(basis.mode_count, dtype=complex)
        self.gamma = np.asarray(getattr(gamma, "coeffs", gamma), dtype=complex)
        if self.gamma.shape != (basis.mode_count,):
            raise GridShapeError("initial state has the wrong number of modes")

        self.dt = integrator.dt
        self.horizon = integrator.horizon
        self.steps = integrator.steps
        self.times = np.arange(self.steps + 1) * self.dt
        self.rot_half = np.exp(-0.5j * basis.eigenvalues * self.dt)
        self._alpha_grid = noise.alpha_grid(basis) if not noise.alpha_is_scalar else None
        self._pot_ops = None if potential.time_dependent else self._potential_ops(0.5 * self.dt)
        self._u0 = None

    # -- step operators ----------------------------------------------------

    def _potential_ops(self, t_mid: float):
        """(forward, inverse) Crank-Nicolson factors for the potential at t_mid."""
        if self.potential.is_zero:
            return None
        m = self.basis.multiplication_matrix(self.potential(t_mid, self.basis.grid))
        half = 0.5 * self.dt * m
        eye = np.eye(self.basis.mode_count)
        return eye + half, np.linalg.inv(eye - half)

    def potential_ops(self, k: int):
        if not self.potential.time_dependent:
            return self._pot_ops
        return self._potential_ops((k + 0.5) * self.dt)

    def step_states(self, states: np.ndarray, forcing: np.ndarray, k: int) -> np.ndarray:
        """Advance states (batched over leading axes) by one step."""
        a = self.rot_half * states
        ops = self.potential_ops(k)
        if ops is None:
            y = a + forcing
        else:
            fwd, inv = ops
            y = (a @ fwd.T + forcing) @ inv.T
        return self.rot_half * y

    def invert_step(self, v_k: np.ndarray, v_k1: np.ndarray, k: int) -> np.ndarray:
        """Exact forcing that carried v_k to v_k1 under the step relation."""
        a = self.rot_half * v_k
        y = np.conj(self.rot_half) * v_k1
        ops = self.potential_ops(k)
        if ops is None:
            return y - a
        fwd, inv = ops
        bwd = 2.0 * np.eye(self.basis.mode_count) - fwd  # I - dt/2 M
        return y @ bwd.T - a @ fwd.T

    # -- coefficient application -------------------------------------------

    def _g_forcing(self, g, t: float, state: np.ndarray, direction: np.ndarray,
                   u0_coeffs=None) -> np.ndarray:
        """g(t, state)(direction) for plain or shifted coefficients."""
        base = g.base if hasattr(g, "base") else g
        if base.is_state_independent and base.alpha_is_scalar:
            return base.alpha * direction
        if hasattr(g, "shift_ratio"):
            u = g.shift_ratio * state + (u0_coeffs if u0_coeffs is not None else g.u0_at(t))
        else:
            u = state
        u_grid = self.basis.from_coefficients(u)
        mult = base.multiplier(t, u_grid, alpha_grid=self._alpha_grid)
        return self.basis.apply_multiplier(mult, direction)

    # -- deterministic path --------------------------------------------------

    def u0(self) -> Trajectory:
        """Deterministic limit path from gamma, computed once and cached."""
        if self._u0 is None:
            self._u0 = self.evolve_original(self.gamma, 0.0, stream=None)
        return self._u0

    # -- single-path evolutions ----------------------------------------------

    def _check_stream(self, stream):
        if stream.steps < self.steps:
            raise GridShapeError("increment stream shorter than the time grid")
        if abs(stream.dt - self.dt) > 1e-12 * self.dt:
            raise GridShapeError("increment stream uses a different dt")

    def _evolve(self, init: np.ndarray, forcing_fn, tag: str,
                scale: DeviationScale | None = None) -> Trajectory:
        states = np.empty((self.steps + 1, self.basis.mode_count), dtype=complex)
        states[0] = init
        z = init.astype(complex, copy=True)
        for k in range(self.steps):
            f = forcing_fn(k, self.times[k], z)
            z = self.step_states(z, f, k)
            nrm = float(h_norm(z))
            if not math.isfinite(nrm) or nrm > BLOWUP_NORM:
                raise BlowUpError(k + 1, nrm)
            states[k + 1] = z
        return Trajectory(self.times.copy(), states, tag, self.basis, scale=scale)

    def evolve_original(self, gamma, epsilon: float,
                        stream: WienerIncrementStream | None) -> Trajectory:
        """One path of the original equation; epsilon = 0 gives the limit path."""
        gamma = np.asarray(getattr(gamma, "coeffs", gamma), dtype=complex)
        if not np.all(np.isfinite(gamma.view(float))):
            raise ValueError("initial state must be finite (and lie in V)")
        if not 0.0 <= epsilon < 1.0:
            raise ValueError(f"need 0 <= eps < 1, got {epsilon}")
        if epsilon == 0.0:
            return self._evolve(gamma, lambda k, t, z: 0.0, tag="original")
        self._check_stream(stream)
        root = math.sqrt(epsilon)
        inc = stream.increments

        def forcing(k, t, z):
            return root * self._g_forcing(self.noise, t, z, inc[k])

        return self._evolve(gamma, forcing, tag="original")

    def _resolve_scale(self, epsilon: float, scale_mode) -> DeviationScale:
        if isinstance(scale_mode, DeviationScale):
            return scale_mode
        if scale_mode == "lil":
            return DeviationScale.lil(epsilon)
        if scale_mode == "power":
            return DeviationScale.power(epsilon)
        raise ScaleError(f"unknown scale mode {scale_mode!r}")

    def shifted_coefficient(self, scale: DeviationScale):
        return make_shifted(self.noise, self.u0(),
                            scale, mode="lil" if scale.mode == "lil" else "mdp")

    def evolve_moderate(self, epsilon: float, stream: WienerIncrementStream,
                        scale_mode="lil") -> Trajectory:
        """One path of the centered, rescaled process started at zero."""
        return self.evolve_shifted(epsilon, None, stream, scale_mode=scale_mode)

    def evolve_shifted(self, epsilon: float, h: ControlPath | None,
                       stream: WienerIncrementStream, scale_mode="lil") -> Trajectory:
        """Centered process with an optional control drift (Girsanov shift).

        With h = None (or identically zero) this is exactly the centered
        process path, bit for bit, under the same stream.
        """
        scale = self._resolve_scale(epsilon, scale_mode)
        self._check_stream(stream)
        gt = self.shifted_coefficient(scale)
        u0_states = self.u0().states
        inc = stream.increments
        a = scale.a
        if h is not None and not np.any(h.values):
            h = None
        if h is not None and h.steps < self.steps:
            raise GridShapeError("control shorter than the time grid")
        zero = np.zeros(self.basis.mode_count, dtype=complex)

        def forcing(k, t, z):
            f = a * self._g_forcing(gt, t, z, inc[k], u0_coeffs=u0_states[k])
            if h is not None:
                f = f + self.dt * self._g_forcing(gt, t, z, h.values[k],
                                                  u0_coeffs=u0_states[k])
            return f

        tag = "moderate" if h is None else "shifted"
        return self._evolve(zero, forcing, tag=tag, scale=scale)

    def evolve_skeleton(self, h: ControlPath) -> Trajectory:
        """Deterministic controlled path X^h with control operator g(t, u0(t))."""
        if h.steps < self.steps:
            raise GridShapeError("control shorter than the time grid")
        u0_states = self.u0().states
        zero = np.zeros(self.basis.mode_count, dtype=complex)

        def forcing(k, t, z):
            return self.dt * self._g_forcing(self.noise, t, u0_states[k], h.values[k])

        return self._evolve(zero, forcing, tag="skeleton")

    def control_multiplier(self, k: int) -> np.ndarray | None:
        """Grid multiplier of the skeleton control operator at step k, or None if scalar."""
        if self.noise.is_state_independent and self.noise.alpha_is_scalar:
            return None
        u0_grid = self.basis.from_coefficients(self.u0().states[k])
        return self.noise.multiplier(self.times[k], u0_grid, alpha_grid=self._alpha_grid)

    def with_integrator(self, integrator: IntegratorConfig) -> "Model":
        return Model(self.basis, self.spectrum, self.noise, self.potential,
                     integrator, gamma=self.gamma)

    def new_stream(self, master_seed: int, path_index: int = 0) -> WienerIncrementStream:
        return WienerIncrementStream(self.spectrum, self.dt, self.steps,
                                     master_seed, path_index)


@dataclass
class MomentReport:
    """Empirical sup-norm moments with bootstrap intervals, per scale group."""

    groups: list
    nonuniform: bool
    n_paths: int

    def as_dict(self) -> dict:
        return {"groups": self.groups, "nonuniform": self.nonuniform,
                "n_paths": self.n_paths}


def moment_monitor(trajectories, p: int = 1, bootstrap: int = 500,
                   seed: int = 0) -> MomentReport:
    """E sup||.||^{2p} and E sup||.||_V^2 with bootstrap CIs, grouped by scale.

    Requires at least 30 paths overall; flags non-uniformity when the
    groupwise E sup||.||^2 spreads by 50% or more across an epsilon grid.
    """
    trajectories = list(trajectories)
    if len(trajectories) < 30:
        raise ValueError(f"need at least 30 paths, got {len(trajectories)}")
    rng = np.random.default_rng(seed)
    grouped: dict = {}
    for traj in trajectories:
        key = (traj.tag, None if traj.scale is None else traj.scale.epsilon)
        grouped.setdefault(key, []).append(traj)

    def boot_ci(values):
        if len(values) < 2:
            return [float(values[0]), float(values[0])]
        draws = rng.integers(0, len(values), size=(bootstrap, len(values)))
        means = np.asarray(values)[draws].mean(axis=1)
        lo, hi = np.percentile(means, [2.5, 97.5])
        return [float(lo), float(hi)]

    groups = []
    sup2_means = []
    for (tag, eps), trajs in sorted(grouped.items(), key=lambda kv: str(kv[0])):
        sup = np.array([t.sup_h_norm() for t in trajs])
        supv = np.array([t.sup_v_norm() for t in trajs])
        groups.append({
            "tag": tag,
            "epsilon": eps,
            "paths": len(trajs),
            "mean_sup_2p": float(np.mean(sup ** (2 * p))),
            "ci_sup_2p": boot_ci(sup ** (2 * p)),
            "mean_sup_v2": float(np.mean(supv ** 2)),
            "ci_sup_v2": boot_ci(supv ** 2),
            "mean_sup_2": float(np.mean(sup ** 2)),
        })
        if eps is not None:
            sup2_means.append(float(np.mean(sup ** 2)))
    nonuniform = False
    if len(sup2_means) >= 2:
        lo, hi = min(sup2_means), max(sup2_means)
        nonuniform = hi > 1.5 * lo if lo > 0 else hi > 0
    return MomentReport(groups=groups, nonuniform=nonuniform,
                        n_paths=len(trajectories))
