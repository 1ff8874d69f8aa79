import numpy as np
import pytest

from schrodev import (ControlPath, CovarianceSpectrum, InfeasibleDirectionError,
                      WienerIncrementStream, cameron_martin_energy, h0_norm_sq,
                      sample_increments, trace)


def make_stream(J=1, dt=0.01, steps=100, seed=7, path=0, q=2.0, s=1.0):
    spec = CovarianceSpectrum.power(J, exponent=q, scale=s)
    return WienerIncrementStream(spec, dt, steps, master_seed=seed, path_index=path)


def test_power_law_validation():
    with pytest.raises(ValueError):
        CovarianceSpectrum.power(4, exponent=1.0)
    with pytest.raises(ValueError):
        CovarianceSpectrum.power(4, scale=0.0)
    spec = CovarianceSpectrum.power(4, exponent=2.0, scale=3.0)
    assert np.allclose(spec.eigenvalues, 3.0 / np.arange(1, 5) ** 2)


def test_trace_partial_sum():
    spec = CovarianceSpectrum.power(64, exponent=2.0, scale=1.0)
    # partial sum of j^-2 up to 64 sits within 0.016 of pi^2/6
    assert abs(trace(spec) - np.pi ** 2 / 6) < 0.016
    assert trace(CovarianceSpectrum([0.0, 0.0])) == 0.0
    assert trace(CovarianceSpectrum([1.0, 1.0])) == 2.0


def test_degenerate_spectrum_zero_increments():
    spec = CovarianceSpectrum([0.0, 0.0])
    stream = WienerIncrementStream(spec, 0.01, 50, master_seed=1)
    assert np.all(stream.increments == 0)


def test_stream_determinism():
    a = make_stream(seed=7, path=0)
    b = make_stream(seed=7, path=0)
    assert np.array_equal(a.increments, b.increments)
    c = make_stream(seed=7, path=1)
    assert not np.array_equal(a.increments, c.increments)
    d = make_stream(seed=8, path=0)
    assert not np.array_equal(a.increments, d.increments)


def test_sample_increments_indexing():
    stream = make_stream(steps=10)
    assert np.array_equal(sample_increments(stream, 3), stream.increments[3])
    with pytest.raises(IndexError):
        sample_increments(stream, 10)


def test_increment_variance_monte_carlo():
    # 1e5 draws of mode 1, lambda=1, dt=0.01: per-component sample variance
    stream = make_stream(J=1, dt=0.01, steps=100000, seed=123)
    for comp in (stream.increments[:, 0].real, stream.increments[:, 0].imag):
        var = comp.var()
        assert 0.0097 < var < 0.0103


def test_increments_uncorrelated_across_steps():
    stream = make_stream(J=1, dt=0.01, steps=100001, seed=5)
    x = stream.increments[:-1, 0].real
    y = stream.increments[1:, 0].real
    corr = np.corrcoef(x, y)[0, 1]
    assert abs(corr) < 4.0 / np.sqrt(x.size)


def test_h0_norm_examples():
    spec = CovarianceSpectrum([0.25])
    assert h0_norm_sq(np.array([1.0 + 0j]), spec) == pytest.approx(4.0)
    spec2 = CovarianceSpectrum.power(2)
    assert h0_norm_sq(np.zeros(2, dtype=complex), spec2) == 0.0
    # k = e1 + e2 with lambda_j = j^-2: 1 + 4 = 5
    assert h0_norm_sq(np.array([1.0, 1.0 + 0j]), spec2) == pytest.approx(5.0)


def test_h0_norm_equals_h_norm_for_unit_covariance(rng):
    spec = CovarianceSpectrum(np.ones(6))
    k = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    assert h0_norm_sq(k, spec) == pytest.approx(float(np.sum(np.abs(k) ** 2)))


def test_h0_infeasible_direction():
    spec = CovarianceSpectrum([1.0, 0.0])
    with pytest.raises(InfeasibleDirectionError):
        h0_norm_sq(np.array([0.0, 1.0 + 0j]), spec)


def test_h0_inverts_covariance_root(rng):
    # |Q^(1/2) k|_0 recovers ||k|| exactly
    spec = CovarianceSpectrum.power(8)
    k = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    rooted = np.sqrt(spec.eigenvalues) * k
    assert abs(h0_norm_sq(rooted, spec) - np.sum(np.abs(k) ** 2)) < 1e-12


def test_energy_examples():
    spec = CovarianceSpectrum.power(1)
    steps, dt = 1000, 1e-3
    zero = ControlPath.zero(steps, spec, dt)
    assert cameron_martin_energy(zero) == 0.0

    c = 0.7 + 0.2j
    const = ControlPath(np.full((steps, 1), c), dt, spec)
    assert cameron_martin_energy(const) == pytest.approx(abs(c) ** 2 * 1.0)


def test_energy_quadrature_converges():
    # hdot(t) = t on [0,1], lambda=1 -> integral t^2 = 1/3
    spec = CovarianceSpectrum(np.ones(1))
    errs = []
    for steps in (64, 128, 256):
        h = ControlPath.from_function(lambda t: np.array([t]), steps, spec, 1.0 / steps)
        errs.append(abs(cameron_martin_energy(h) - 1.0 / 3.0))
    assert errs[0] < 1e-3
    # order >= 1 under refinement
    assert errs[0] / errs[1] > 2.0 and errs[1] / errs[2] > 2.0


def test_energy_refinement_exact_for_piecewise_constant(rng):
    spec = CovarianceSpectrum.power(2)
    coarse_vals = rng.standard_normal((10, 2)) + 1j * rng.standard_normal((10, 2))
    coarse = ControlPath(coarse_vals, 0.1, spec)
    fine = ControlPath(np.repeat(coarse_vals, 4, axis=0), 0.025, spec)
    assert cameron_martin_energy(fine) == pytest.approx(cameron_martin_energy(coarse),
                                                        rel=1e-12)


def test_control_cumulative_starts_at_zero():
    spec = CovarianceSpectrum.power(1)
    h = ControlPath(np.ones((4, 1), dtype=complex), 0.25, spec)
    cum = h.cumulative()
    assert np.all(cum[0] == 0)
    assert cum[-1, 0] == pytest.approx(1.0)
