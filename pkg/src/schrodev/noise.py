"""Trace-class Q-Wiener increments, the covariance-weighted norm, controls.

The driving noise is W(t) = sum_j sqrt(lambda_j) beta_j(t) e_j where each
mode carries a complex Brownian motion: the per-mode increment over a step
of length dt is a complex Gaussian whose real and imaginary parts are
independent one-dimensional N(0, lambda_j dt) draws.  The state space is
complex, and so are the admissible shift directions; matching the noise's
degrees of freedom to the complex controls is what makes half the control
energy the exponential rate actually observed in the tails (a real-only
noise would double every decay exponent relative to the complex-control
action).

Directions k carry the covariance-weighted norm
|k|_0^2 = sum_j |k_j|^2 / lambda_j (the natural norm on the image of the
covariance square root); controls are square-integrable in that norm.

Seeding is frozen: path p of master seed s draws from
``PCG64(SeedSequence(entropy=s, spawn_key=(p,)))``, real components before
imaginary, so any path can be regenerated bit-identically by any worker in
any order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "InfeasibleDirectionError",
    "CovarianceSpectrum",
    "WienerIncrementStream",
    "ControlPath",
    "substream",
    "sample_increments",
    "h0_norm_sq",
    "cameron_martin_energy",
    "trace",
]


class InfeasibleDirectionError(ValueError):
    """Direction has mass on a mode the covariance annihilates."""


class CovarianceSpectrum:
    """Eigenvalues lambda_j of the noise covariance on the retained band."""

    def __init__(self, eigenvalues, law: str = "explicit", params: dict | None = None):
        eigenvalues = np.asarray(eigenvalues, dtype=float)
        if eigenvalues.ndim != 1 or eigenvalues.size < 1:
            raise ValueError("eigenvalues must be a non-empty 1-d array")
        if np.any(eigenvalues < 0):
            raise ValueError("covariance eigenvalues must be nonnegative")
        if np.any(np.diff(eigenvalues) > 0):
            raise ValueError("covariance eigenvalues must be nonincreasing")
        self.eigenvalues = eigenvalues
        self.law = law
        self.params = dict(params or {})

    @classmethod
    def power(cls, mode_count: int, exponent: float = 2.0, scale: float = 1.0):
        """lambda_j = scale * j**(-exponent); exponent > 1 keeps the trace summable."""
        if exponent <= 1.0:
            raise ValueError(f"power-law exponent must exceed 1, got {exponent}")
        if scale <= 0.0:
            raise ValueError(f"power-law scale must be positive, got {scale}")
        modes = np.arange(1, mode_count + 1, dtype=float)
        return cls(scale * modes ** (-exponent), law="power",
                   params={"exponent": exponent, "scale": scale})

    @property
    def mode_count(self) -> int:
        return self.eigenvalues.size

    @property
    def positive(self) -> np.ndarray:
        return self.eigenvalues > 0.0

    def trace(self) -> float:
        return float(np.sum(self.eigenvalues))

    def __repr__(self):
        return f"CovarianceSpectrum(law={self.law!r}, modes={self.mode_count})"


def trace(spectrum: CovarianceSpectrum) -> float:
    """Total variance sum_j lambda_j carried by the retained modes."""
    return spectrum.trace()


def substream(master_seed: int, path_index: int) -> np.random.Generator:
    """Per-path generator; the (seed, path) -> stream map is part of the contract."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(path_index),))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class WienerIncrementStream:
    """Reproducible per-mode increments of one noise path.

    ``increments[k, j]`` is the complex mode-j increment over
    [k*dt, (k+1)*dt); its real and imaginary parts are independent real
    Gaussians of variance lambda_j * dt, generated lazily from the frozen
    (master_seed, path_index) substream.
    """

    spectrum: CovarianceSpectrum
    dt: float
    steps: int
    master_seed: int
    path_index: int = 0
    _increments: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")

    @property
    def increments(self) -> np.ndarray:
        if self._increments is None:
            rng = substream(self.master_seed, self.path_index)
            raw = rng.standard_normal((2, self.steps, self.spectrum.mode_count))
            self._increments = ((raw[0] + 1j * raw[1])
                                * np.sqrt(self.spectrum.eigenvalues * self.dt))
        return self._increments

    @classmethod
    def from_array(cls, spectrum, dt, increments):
        """Wrap explicit increments (coupling experiments, oracles)."""
        increments = np.asarray(increments, dtype=complex)
        stream = cls(spectrum, dt, increments.shape[0], master_seed=0)
        stream._increments = increments
        return stream

    def path(self) -> np.ndarray:
        """Cumulative W(t_k) on the step grid, shape (steps+1, J)."""
        out = np.zeros((self.steps + 1, self.spectrum.mode_count), dtype=complex)
        np.cumsum(self.increments, axis=0, out=out[1:])
        return out


def sample_increments(stream: WienerIncrementStream, k: int) -> np.ndarray:
    """Per-mode increments for step k; reproducible from (seed, path, k)."""
    if not 0 <= k < stream.steps:
        raise IndexError(f"step {k} outside 0..{stream.steps - 1}")
    return stream.increments[k]


def _coeffs_of(direction) -> np.ndarray:
    return np.asarray(getattr(direction, "coeffs", direction))


def h0_norm_sq(direction, spectrum: CovarianceSpectrum) -> np.ndarray:
    """|k|_0^2 = sum_j |k_j|^2 / lambda_j over the trailing mode axis.

    Raises InfeasibleDirectionError when the direction has mass on a mode
    with lambda_j = 0 (such directions are unreachable by the noise).
    """
    coeffs = _coeffs_of(direction)
    lam = spectrum.eigenvalues
    mass = np.abs(coeffs) ** 2
    dead = ~spectrum.positive
    if np.any(dead):
        if np.any(mass[..., dead] > 0.0):
            raise InfeasibleDirectionError(
                "direction has mass on a zero-eigenvalue covariance mode"
            )
        mass = mass[..., ~dead]
        lam = lam[~dead]
    return np.sum(mass / lam, axis=-1)


@dataclass
class ControlPath:
    """Piecewise-constant control derivative on the uniform step grid.

    ``values[k]`` holds the complex mode coefficients of the derivative on
    [k*dt, (k+1)*dt); the energy is the exact quadrature
    dt * sum_k |values[k]|_0^2, which is invariant under grid refinement
    for piecewise-constant derivatives.
    """

    values: np.ndarray
    dt: float
    spectrum: CovarianceSpectrum
    _energy: float | None = field(default=None, repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.ndim != 2:
            raise ValueError("control values must have shape (steps, modes)")
        if values.shape[1] != self.spectrum.mode_count:
            raise ValueError(
                f"control has {values.shape[1]} modes, spectrum has {self.spectrum.mode_count}"
            )
        self.values = values

    @classmethod
    def zero(cls, steps: int, spectrum: CovarianceSpectrum, dt: float):
        return cls(np.zeros((steps, spectrum.mode_count), dtype=complex), dt, spectrum)

    @classmethod
    def from_function(cls, fn, steps: int, spectrum: CovarianceSpectrum, dt: float):
        """Sample a smooth derivative t -> (J,) coefficients at step midpoints."""
        mids = (np.arange(steps) + 0.5) * dt
        values = np.array([np.asarray(fn(t), dtype=complex) for t in mids])
        return cls(values, dt, spectrum)

    @property
    def steps(self) -> int:
        return self.values.shape[0]

    @property
    def horizon(self) -> float:
        return self.steps * self.dt

    def energy(self) -> float:
        if self._energy is None:
            self._energy = float(np.sum(h0_norm_sq(self.values, self.spectrum)) * self.dt)
        return self._energy

    def cumulative(self) -> np.ndarray:
        """h(t_k) = integral of the derivative up to t_k, shape (steps+1, J)."""
        out = np.zeros((self.steps + 1, self.spectrum.mode_count), dtype=complex)
        np.cumsum(self.values * self.dt, axis=0, out=out[1:])
        return out

    def __add__(self, other: "ControlPath") -> "ControlPath":
        if other.steps != self.steps or other.dt != self.dt:
            raise ValueError("control paths live on different grids")
        return ControlPath(self.values + other.values, self.dt, self.spectrum)

    def __mul__(self, scalar) -> "ControlPath":
        return ControlPath(self.values * scalar, self.dt, self.spectrum)

    __rmul__ = __mul__


def cameron_martin_energy(h: ControlPath) -> float:
    """Grid quadrature of the squared control norm, integral |h'(s)|_0^2 ds.

    The rate functional charges half this value.
    """
    return h.energy()
