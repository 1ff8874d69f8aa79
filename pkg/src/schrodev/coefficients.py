"""Linear potential, affine multiplicative noise coefficient, and scalings.

The noise coefficient acts on a direction k by the dealiased pointwise
product (g(t,u)k)(x) = (alpha(x) + beta*u(x)) * k(x).  Shifted variants
recentre the state around the deterministic path u0 with the deviation
scaling sqrt(eps)/a(eps), which in the iterated-logarithm regime equals
sqrt(2*eps*loglog(1/eps)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .noise import CovarianceSpectrum, h0_norm_sq
from .spectral import SpectralBasis, h_norm, v_norm

__all__ = [
    "ScaleError",
    "Potential",
    "make_potential",
    "NoiseCoefficient",
    "ShiftedCoefficient",
    "DeviationScale",
    "lil_scale",
    "apply_potential",
    "apply_g",
    "hs_norm_sq",
    "make_shifted",
    "audit_conditions",
    "AuditResult",
]

EPS_LIL_MAX = 0.1
EPS_LIL_STRICT = 10.0 ** (-math.sqrt(10.0))


class ScaleError(ValueError):
    """Deviation scale outside its admissible range."""


class Potential:
    """Bounded complex potential with a declared gradient-inclusive bound.

    ``bound`` dominates |U(t,x)|^2 + |dU/dx(t,x)|^2 on [0,T] x (0,1).
    """

    def __init__(self, kind: str, amplitude: complex, evaluator, dx_evaluator,
                 bound: float, time_dependent: bool = False):
        self.kind = kind
        self.amplitude = complex(amplitude)
        self._evaluator = evaluator
        self._dx_evaluator = dx_evaluator
        self.bound = float(bound)
        self.time_dependent = time_dependent

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        return self._evaluator(t, np.asarray(x, dtype=float))

    def spatial_derivative(self, t: float, x: np.ndarray) -> np.ndarray:
        return self._dx_evaluator(t, np.asarray(x, dtype=float))

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.amplitude == 0

    def check_bound(self, t_grid=None, x_points: int = 2048) -> float:
        """Worst slack of the declared bound on a dense check grid (>= 0 ok)."""
        x = (np.arange(x_points) + 0.5) / x_points
        ts = np.atleast_1d(t_grid if t_grid is not None else [0.0])
        worst = np.inf
        for t in ts:
            val = np.abs(self(t, x)) ** 2 + np.abs(self.spatial_derivative(t, x)) ** 2
            worst = min(worst, self.bound - float(val.max()))
        return worst


def make_potential(kind: str, amplitude: complex = 0.5) -> Potential:
    """Built-in potentials: 'zero', 'imaginary_sine' (a*i*sin(pi x)), 'constant'."""
    amplitude = complex(amplitude)
    if kind == "zero":
        return Potential("zero", 0.0, lambda t, x: np.zeros_like(x, dtype=complex),
                         lambda t, x: np.zeros_like(x, dtype=complex), bound=0.0)
    if kind == "imaginary_sine":
        a = amplitude

        def ev(t, x):
            return 1j * a * np.sin(np.pi * x)

        def dev(t, x):
            return 1j * a * np.pi * np.cos(np.pi * x)

        return Potential("imaginary_sine", a, ev, dev,
                         bound=abs(a) ** 2 * (1.0 + np.pi ** 2))
    if kind == "constant":
        a = amplitude
        return Potential("constant", a,
                         lambda t, x: np.full_like(x, a, dtype=complex),
                         lambda t, x: np.zeros_like(x, dtype=complex),
                         bound=abs(a) ** 2)
    raise ValueError(f"unknown potential kind {kind!r}")


def apply_potential(basis: SpectralBasis, potential: Potential, t: float,
                    coeffs: np.ndarray) -> np.ndarray:
    """Dealiased pointwise product U(t,.) * u, returned as coefficients."""
    if potential.is_zero:
        return np.zeros_like(np.asarray(coeffs, dtype=complex))
    return basis.apply_multiplier(potential(t, basis.grid), coeffs)


class NoiseCoefficient:
    """Affine multiplicative coefficient (g(t,u)k)(x) = (alpha(x)+beta*u(x))k(x).

    alpha may be a complex scalar (constant profile) or a callable x -> C.
    """

    def __init__(self, alpha=1.0, beta=0.25):
        self.alpha = alpha if callable(alpha) else complex(alpha)
        self.beta = complex(beta)
        self.time_dependent = False

    @property
    def alpha_is_scalar(self) -> bool:
        return not callable(self.alpha)

    @property
    def is_state_independent(self) -> bool:
        return self.beta == 0

    @property
    def is_zero(self) -> bool:
        return self.beta == 0 and self.alpha_is_scalar and self.alpha == 0

    def alpha_grid(self, basis: SpectralBasis) -> np.ndarray:
        if self.alpha_is_scalar:
            return np.full(basis.quad_points, self.alpha, dtype=complex)
        return np.asarray(self.alpha(basis.grid), dtype=complex)

    def multiplier(self, t: float, state_grid: np.ndarray, alpha_grid=None) -> np.ndarray:
        """alpha + beta*u on the grid; state_grid may carry batch dimensions."""
        if alpha_grid is None and not self.alpha_is_scalar:
            raise ValueError("profile alpha needs a precomputed alpha_grid")
        base = self.alpha if alpha_grid is None else alpha_grid
        return base + self.beta * state_grid

    def declared_constants(self, basis: SpectralBasis,
                           spectrum: CovarianceSpectrum) -> dict:
        """Conservative growth/Lipschitz constants for the affine form.

        Finite for any retained band; the audit below verifies them with
        nonnegative slack on randomized states.
        """
        tr = spectrum.trace()
        lam_mu = float(np.sum(spectrum.eigenvalues * basis.eigenvalues))
        a_sup = abs(self.alpha) if self.alpha_is_scalar else float(
            np.max(np.abs(self.alpha_grid(basis))))
        b = abs(self.beta)
        modes = np.arange(1, basis.mode_count + 1)
        lam_j2 = float(np.sum(spectrum.eigenvalues * (1.0 + modes) ** 2))
        return {
            "k0": None,  # owned by the potential
            "k1": 2.0 * tr * max(a_sup ** 2, 2.0 * b ** 2),
            "k2": 4.0 * max(a_sup ** 2 * lam_mu, b ** 2 * (tr + lam_mu / np.pi ** 2)),
            "k3": 2.0 * b ** 2 * tr,
            "k4": 2.0 * b ** 2 * np.pi ** 2 * lam_j2,
            "k5": 0.0,
        }


def apply_g(basis: SpectralBasis, g: NoiseCoefficient, t: float,
            u_coeffs: np.ndarray, k_coeffs: np.ndarray) -> np.ndarray:
    """(alpha + beta*u) * k as a dealiased product in coefficient space."""
    u_grid = basis.from_coefficients(np.asarray(u_coeffs, dtype=complex))
    m = g.multiplier(t, u_grid, alpha_grid=None if g.alpha_is_scalar
                     else g.alpha_grid(basis))
    return basis.apply_multiplier(m, k_coeffs)


def hs_norm_sq(basis: SpectralBasis, spectrum: CovarianceSpectrum,
               g: NoiseCoefficient, t: float, u_coeffs: np.ndarray) -> float:
    """Hilbert-Schmidt norm squared sum_j lambda_j ||g(t,u) e_j||^2."""
    eye = np.eye(basis.mode_count, dtype=complex)
    images = apply_g(basis, g, t, u_coeffs, eye)  # row j = g e_j
    per_mode = np.sum(np.abs(images) ** 2, axis=-1)
    return float(np.sum(spectrum.eigenvalues * per_mode))


def lil_scale(eps: float) -> float:
    """a(eps) = 1/sqrt(2 loglog(1/eps)), defined for 0 < eps < 1/10."""
    if not 0.0 < eps < EPS_LIL_MAX:
        raise ScaleError(
            f"iterated-logarithm scale needs 0 < eps < {EPS_LIL_MAX}, got {eps}"
        )
    return 1.0 / math.sqrt(2.0 * math.log(math.log(1.0 / eps)))


@dataclass(frozen=True)
class DeviationScale:
    """Deviation scale pair (eps, a(eps)) with speed 1/a(eps)^2."""

    epsilon: float
    a: float
    mode: str = "custom"

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ScaleError(f"need 0 < eps < 1, got {self.epsilon}")
        if not 0.0 < self.a < 1.0:
            raise ScaleError(f"need 0 < a(eps) < 1, got {self.a}")
        if self.epsilon / self.a ** 2 >= 1.0:
            raise ScaleError(
                f"need eps/a(eps)^2 < 1, got {self.epsilon / self.a ** 2}"
            )

    @classmethod
    def lil(cls, eps: float) -> "DeviationScale":
        return cls(eps, lil_scale(eps), mode="lil")

    @classmethod
    def power(cls, eps: float, exponent: float = 0.25) -> "DeviationScale":
        return cls(eps, eps ** exponent, mode="power")

    @property
    def speed(self) -> float:
        return 1.0 / self.a ** 2

    @property
    def shift_ratio(self) -> float:
        """sqrt(eps)/a(eps): the factor recentring the state in the shifted coefficient."""
        if self.mode == "lil":
            return math.sqrt(2.0 * self.epsilon * math.log(math.log(1.0 / self.epsilon)))
        return math.sqrt(self.epsilon) / self.a


class ShiftedCoefficient:
    """g~(t, Z) = g(t, shift_ratio * Z + u0(t)) around a deterministic path."""

    def __init__(self, base: NoiseCoefficient, u0_at, scale: DeviationScale, mode: str):
        self.base = base
        self.u0_at = u0_at  # t -> coefficient vector of u0(t)
        self.scale = scale
        self.mode = mode
        self.shift_ratio = scale.shift_ratio
        self.time_dependent = True  # through u0

    def multiplier(self, t: float, z_grid: np.ndarray, u0_grid: np.ndarray,
                   alpha_grid=None) -> np.ndarray:
        return self.base.multiplier(t, self.shift_ratio * z_grid + u0_grid,
                                    alpha_grid=alpha_grid)

    def apply(self, basis: SpectralBasis, t: float, z_coeffs: np.ndarray,
              k_coeffs: np.ndarray) -> np.ndarray:
        u_coeffs = self.shift_ratio * np.asarray(z_coeffs, dtype=complex) + self.u0_at(t)
        return apply_g(basis, self.base, t, u_coeffs, k_coeffs)


def make_shifted(base: NoiseCoefficient, u0_trajectory, scale: DeviationScale,
                 mode: str = "mdp") -> ShiftedCoefficient:
    """Shifted/scaled coefficient for the centered process.

    mode 'mdp' uses sqrt(eps)/a(eps) with the scale's own a; mode 'lil'
    requires a scale constructed in the iterated-logarithm regime and uses
    sqrt(2 eps loglog(1/eps)) directly.  The u0 trajectory must cover the
    times the evaluator is asked for (it interpolates, never extrapolates).
    """
    if mode not in ("mdp", "lil"):
        raise ValueError(f"mode must be 'mdp' or 'lil', got {mode!r}")
    if mode == "lil" and scale.mode != "lil":
        raise ScaleError("lil-mode shift requires a lil deviation scale")
    eff = DeviationScale(scale.epsilon, scale.a, mode="lil" if mode == "lil" else "custom")
    return ShiftedCoefficient(base, u0_trajectory.at, eff, mode)


@dataclass
class AuditResult:
    """Outcome of the randomized coefficient-condition audit."""

    passed: bool
    slacks: dict
    constants: dict
    samples: int

    def as_dict(self) -> dict:
        return {
            "passed": bool(self.passed),
            "samples": self.samples,
            "slacks": {k: float(v) for k, v in self.slacks.items()},
            "constants": {k: (None if v is None else float(v))
                          for k, v in self.constants.items()},
        }


def _random_state(rng, basis) -> np.ndarray:
    decay = 1.0 / np.arange(1, basis.mode_count + 1)
    re = rng.standard_normal(basis.mode_count)
    im = rng.standard_normal(basis.mode_count)
    return (re + 1j * im) * decay * rng.uniform(0.1, 2.0)


def audit_conditions(basis: SpectralBasis, spectrum: CovarianceSpectrum,
                     g: NoiseCoefficient, potential: Potential,
                     samples: int = 1000, seed: int = 0,
                     horizon: float = 1.0) -> AuditResult:
    """Check the declared growth/Lipschitz/time constants on random states.

    Returns the worst slack per condition; any negative slack fails the
    audit and must abort experiments.
    """
    rng = np.random.default_rng(seed)
    consts = g.declared_constants(basis, spectrum)
    consts["k0"] = potential.bound
    mu = basis.eigenvalues
    eye = np.eye(basis.mode_count, dtype=complex)
    lam = spectrum.eigenvalues

    def hs_pair(t, u):
        images = apply_g(basis, g, t, u, eye)
        return (float(np.sum(lam * np.sum(np.abs(images) ** 2, axis=-1))),
                float(np.sum(lam * np.sum(mu * np.abs(images) ** 2, axis=-1))))

    slacks = {"k0": potential.check_bound(t_grid=np.linspace(0, horizon, 5)),
              "k1": np.inf, "k2": np.inf, "k3": np.inf, "k4": np.inf, "k5": np.inf}
    for _ in range(samples):
        t1, t2 = rng.uniform(0.0, horizon, size=2)
        u = _random_state(rng, basis)
        v = _random_state(rng, basis)
        hu = float(h_norm(u))
        vu = float(v_norm(u, mu))
        hs_h, hs_v = hs_pair(t1, u)
        slacks["k1"] = min(slacks["k1"], consts["k1"] * (1 + hu ** 2) - hs_h)
        slacks["k2"] = min(slacks["k2"], consts["k2"] * (1 + vu ** 2) - hs_v)
        diff = apply_g(basis, g, t1, u, eye) - apply_g(basis, g, t1, v, eye)
        d_h = float(np.sum(lam * np.sum(np.abs(diff) ** 2, axis=-1)))
        d_v = float(np.sum(lam * np.sum(mu * np.abs(diff) ** 2, axis=-1)))
        slacks["k3"] = min(slacks["k3"], consts["k3"] * float(h_norm(u - v)) ** 2 - d_h)
        slacks["k4"] = min(slacks["k4"], consts["k4"] * float(v_norm(u - v, mu)) ** 2 - d_v)
        tdiff = apply_g(basis, g, t1, u, eye) - apply_g(basis, g, t2, u, eye)
        t_h = float(np.sum(lam * np.sum(np.abs(tdiff) ** 2, axis=-1)))
        slacks["k5"] = min(slacks["k5"], consts["k5"] * abs(t1 - t2) ** 2 - t_h)
    slacks = {k: float(v) for k, v in slacks.items()}
    passed = all(v >= 0.0 for v in slacks.values())
    return AuditResult(passed=passed, slacks=slacks, constants=consts, samples=samples)
