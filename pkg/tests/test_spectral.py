import numpy as np
import pytest

from schrodev import (GridShapeError, ModeIndexError, SpectralBasis,
                      SpectralField)


def test_eigenvalues():
    basis = SpectralBasis(8)
    assert basis.dirichlet_eigenvalue(1) == pytest.approx(np.pi ** 2)
    assert basis.dirichlet_eigenvalue(3) == pytest.approx(9 * np.pi ** 2)
    assert np.all(np.diff(basis.eigenvalues) > 0)


def test_eigenvalue_out_of_range():
    basis = SpectralBasis(4)
    with pytest.raises(ModeIndexError):
        basis.dirichlet_eigenvalue(5)
    with pytest.raises(ModeIndexError):
        basis.dirichlet_eigenvalue(0)


def test_quadrature_grid_floor():
    with pytest.raises(ValueError):
        SpectralBasis(4, quad_points=8)  # below 2J+1
    SpectralBasis(4, quad_points=9)  # minimum allowed


def test_orthonormality():
    basis = SpectralBasis(16)
    samples = basis._synth.T  # rows = e_j on the grid
    gram = basis.to_coefficients(samples)
    assert np.abs(gram - np.eye(16)).max() < 1e-12


def test_to_coefficients_picks_out_modes():
    basis = SpectralBasis(6)
    e2 = np.sqrt(2) * np.sin(2 * np.pi * basis.grid)
    c = basis.to_coefficients(e2)
    expected = np.zeros(6)
    expected[1] = 1.0
    assert np.abs(c - expected).max() < 1e-12

    assert np.all(basis.to_coefficients(np.zeros(basis.quad_points)) == 0)

    mix = (np.sqrt(2) * np.sin(np.pi * basis.grid)
           + np.sqrt(2) * np.sin(3 * np.pi * basis.grid))
    c = basis.to_coefficients(mix)
    expected = np.zeros(6)
    expected[0] = expected[2] = 1.0
    assert np.abs(c - expected).max() < 1e-12


def test_to_coefficients_shape_error():
    basis = SpectralBasis(4)
    with pytest.raises(GridShapeError):
        basis.to_coefficients(np.zeros(basis.quad_points + 1))


def test_synthesis_pointwise_values():
    # x = 1/2 sits on an odd grid; x = 1/4 on P = 6
    basis = SpectralBasis(1, quad_points=3)
    vals = basis.from_coefficients(np.array([1.0 + 0j]))
    mid = np.where(np.isclose(basis.grid, 0.5))[0]
    assert vals[mid[0]] == pytest.approx(np.sqrt(2))

    basis = SpectralBasis(2, quad_points=6)
    vals = basis.from_coefficients(np.array([0.0, 1.0 + 0j]))
    quarter = np.where(np.isclose(basis.grid, 0.25))[0]
    # oracle: direct formula sqrt(2) sin(2 pi x) at x = 1/4
    assert vals[quarter[0]] == pytest.approx(np.sqrt(2) * np.sin(2 * np.pi * 0.25))

    assert np.all(basis.from_coefficients(np.zeros(2)) == 0)


def test_evaluate_arbitrary_points():
    basis = SpectralBasis(3)
    coeffs = np.array([1.0, 0.5j, -0.25])
    x = np.array([0.1, 0.25, 0.5])
    direct = sum(coeffs[j] * np.sqrt(2) * np.sin((j + 1) * np.pi * x)
                 for j in range(3))
    assert np.abs(basis.evaluate(coeffs, x) - direct).max() < 1e-14


def test_round_trip_band_limited(rng):
    basis = SpectralBasis(12)
    coeffs = rng.standard_normal(12) + 1j * rng.standard_normal(12)
    back = basis.to_coefficients(basis.from_coefficients(coeffs))
    assert np.abs(back - coeffs).max() < 1e-12


def test_norms_single_mode():
    basis = SpectralBasis(4)
    f = SpectralField(basis, [1, 0, 0, 0])
    h, v = f.norms()
    assert h == pytest.approx(1.0)
    assert v == pytest.approx(np.pi)

    zero = SpectralField(basis, np.zeros(4))
    assert zero.norms() == (0.0, 0.0)


def test_norms_two_modes():
    basis = SpectralBasis(2)
    f = SpectralField(basis, [1, 1])
    h, v = f.norms()
    # direct sums: h = sqrt(2), v = sqrt(pi^2 + 4 pi^2) = pi sqrt(5)
    assert h == pytest.approx(np.sqrt(2))
    assert v == pytest.approx(np.pi * np.sqrt(5))


def test_poincare_inequality(rng):
    basis = SpectralBasis(8)
    for _ in range(20):
        f = SpectralField(basis, rng.standard_normal(8) + 1j * rng.standard_normal(8))
        h, v = f.norms()
        assert v >= np.pi * h - 1e-12


def test_parseval(rng):
    basis = SpectralBasis(10)
    for _ in range(10):
        a = rng.standard_normal(10) + 1j * rng.standard_normal(10)
        b = rng.standard_normal(10) + 1j * rng.standard_normal(10)
        grid_inner = np.sum(basis.from_coefficients(a)
                            * np.conj(basis.from_coefficients(b))) / basis.quad_points
        coeff_inner = np.sum(a * np.conj(b))
        assert abs(grid_inner - coeff_inner) < 1e-10


def test_norm_monotone_in_modes(rng):
    basis = SpectralBasis(6)
    c = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    c[-1] = 0.0
    base = SpectralField(basis, c)
    extended = c.copy()
    extended[-1] = 0.7
    grown = SpectralField(basis, extended)
    assert grown.h_norm >= base.h_norm
    assert grown.v_norm >= base.v_norm


def test_multiplication_matrix_matches_apply(rng):
    basis = SpectralBasis(5)
    mult = np.exp(1j * basis.grid) * (1 + basis.grid)
    mat = basis.multiplication_matrix(mult)
    c = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    assert np.abs(mat @ c - basis.apply_multiplier(mult, c)).max() < 1e-12
