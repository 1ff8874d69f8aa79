"""Dirichlet sine basis on (0,1): transforms, norms, pointwise products.

All state downstream lives as complex coefficient vectors in the eigenbasis
e_j(x) = sqrt(2) sin(j pi x) of the negative Laplacian with Dirichlet
boundary conditions.  The quadrature rule is a composite midpoint rule on
P points; for P >= 2J+1 the rule integrates every product of two retained
modes exactly, so analysis/synthesis round-trips are exact (to roundoff)
for band-limited fields.  Pointwise products are dealiased by truncating
back to the retained band.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModeIndexError",
    "GridShapeError",
    "SpectralBasis",
    "SpectralField",
    "h_norm",
    "v_norm",
]


class ModeIndexError(IndexError):
    """Mode index outside the retained band 1..J."""


class GridShapeError(ValueError):
    """Array shape does not match the declared quadrature grid or band."""


class SpectralBasis:
    """Retained sine modes plus the midpoint quadrature grid.

    Parameters
    ----------
    mode_count : int
        Number of retained modes J (>= 1).
    quad_points : int, optional
        Interior quadrature points P; defaults to 4*J and must satisfy
        P >= 2J+1 so retained-mode products integrate exactly.
    """

    def __init__(self, mode_count: int, quad_points: int | None = None):
        mode_count = int(mode_count)
        if mode_count < 1:
            raise ValueError(f"mode_count must be >= 1, got {mode_count}")
        if quad_points is None:
            quad_points = 4 * mode_count
        quad_points = int(quad_points)
        if quad_points < 2 * mode_count + 1:
            raise ValueError(
                f"need quad_points >= 2*mode_count+1, got {quad_points} < {2 * mode_count + 1}"
            )
        self.mode_count = mode_count
        self.quad_points = quad_points
        modes = np.arange(1, mode_count + 1)
        self.eigenvalues = (np.pi * modes) ** 2
        self.grid = (np.arange(quad_points) + 0.5) / quad_points
        # synthesis matrix: (P, J), real
        self._synth = np.sqrt(2.0) * np.sin(np.pi * np.outer(self.grid, modes))

    def dirichlet_eigenvalue(self, j: int) -> float:
        """Eigenvalue (j*pi)^2 of the retained mode j (1-based)."""
        if not 1 <= j <= self.mode_count:
            raise ModeIndexError(f"mode {j} outside 1..{self.mode_count}")
        return float(self.eigenvalues[j - 1])

    def to_coefficients(self, samples: np.ndarray) -> np.ndarray:
        """Quadrature projection of grid samples onto the retained modes.

        Accepts any leading batch shape; the trailing axis must equal P.
        """
        samples = np.asarray(samples)
        if samples.shape[-1] != self.quad_points:
            raise GridShapeError(
                f"expected {self.quad_points} grid samples, got {samples.shape[-1]}"
            )
        return samples @ self._synth / self.quad_points

    def from_coefficients(self, coeffs: np.ndarray) -> np.ndarray:
        """Synthesize grid samples sum_j c_j e_j(x_p); batched like to_coefficients."""
        coeffs = np.asarray(coeffs)
        if coeffs.shape[-1] != self.mode_count:
            raise GridShapeError(
                f"expected {self.mode_count} coefficients, got {coeffs.shape[-1]}"
            )
        return coeffs @ self._synth.T

    def evaluate(self, coeffs: np.ndarray, x) -> np.ndarray:
        """Pointwise synthesis at arbitrary locations x in [0,1]."""
        coeffs = np.asarray(coeffs)
        x = np.asarray(x, dtype=float)
        modes = np.arange(1, self.mode_count + 1)
        basis = np.sqrt(2.0) * np.sin(np.pi * np.multiply.outer(x, modes))
        return coeffs @ np.moveaxis(basis, -1, 0) if x.ndim else coeffs @ basis

    def apply_multiplier(self, multiplier: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
        """Dealiased pointwise product: project m(x) * u(x) back onto the band."""
        return self.to_coefficients(multiplier * self.from_coefficients(coeffs))

    def multiplication_matrix(self, multiplier: np.ndarray) -> np.ndarray:
        """(J, J) matrix of the dealiased multiplication operator u -> P_J(m u)."""
        multiplier = np.asarray(multiplier)
        if multiplier.shape != (self.quad_points,):
            raise GridShapeError(
                f"multiplier must be sampled on the {self.quad_points}-point grid"
            )
        return (self._synth.T * multiplier) @ self._synth / self.quad_points

    def __eq__(self, other):
        return (
            isinstance(other, SpectralBasis)
            and other.mode_count == self.mode_count
            and other.quad_points == self.quad_points
        )

    def __hash__(self):
        return hash((self.mode_count, self.quad_points))

    def __repr__(self):
        return f"SpectralBasis(mode_count={self.mode_count}, quad_points={self.quad_points})"


def h_norm(coeffs: np.ndarray) -> np.ndarray:
    """L2 norm from coefficients; reduces over the trailing mode axis."""
    coeffs = np.asarray(coeffs)
    return np.sqrt(np.sum(np.abs(coeffs) ** 2, axis=-1))


def v_norm(coeffs: np.ndarray, eigenvalues: np.ndarray) -> np.ndarray:
    """H^1_0 norm sqrt(sum mu_j |c_j|^2); reduces over the trailing mode axis."""
    coeffs = np.asarray(coeffs)
    return np.sqrt(np.sum(eigenvalues * np.abs(coeffs) ** 2, axis=-1))


@dataclass(frozen=True)
class SpectralField:
    """Complex state as coefficients in the retained sine band."""

    basis: SpectralBasis
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=complex)
        if coeffs.shape != (self.basis.mode_count,):
            raise GridShapeError(
                f"expected shape ({self.basis.mode_count},), got {coeffs.shape}"
            )
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def h_norm(self) -> float:
        return float(h_norm(self.coeffs))

    @property
    def v_norm(self) -> float:
        return float(v_norm(self.coeffs, self.basis.eigenvalues))

    def norms(self) -> tuple[float, float]:
        """(L2 norm, H^1_0 norm)."""
        return self.h_norm, self.v_norm

    def samples(self) -> np.ndarray:
        return self.basis.from_coefficients(self.coeffs)
