import numpy as np
import pytest

from schrodev import (CovarianceSpectrum, IntegratorConfig, Model,
                      NoiseCoefficient, SpectralBasis, make_potential)


def build_model(J=1, dt=1e-3, T=1.0, alpha=1.0, beta=0.0, potential="zero",
                pot_amplitude=0.5, q=2.0, s=1.0, gamma=None, P=None):
    basis = SpectralBasis(J, P)
    spectrum = CovarianceSpectrum.power(J, exponent=q, scale=s)
    noise = NoiseCoefficient(alpha=alpha, beta=beta)
    pot = make_potential(potential, pot_amplitude)
    integ = IntegratorConfig(dt=dt, horizon=T)
    return Model(basis, spectrum, noise, pot, integ, gamma=gamma)


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


@pytest.fixture
def single_mode_model():
    return build_model(J=1, dt=1e-3, T=1.0)
