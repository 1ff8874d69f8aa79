"""Desk-scale lab for small-noise asymptotics of a stochastic linear
Schrodinger equation: spectral simulation of the centered and shifted
processes, the minimum-action rate functional, and statistical checks of
the exponential deviation bounds and compact-cluster behavior."""

__version__ = "0.1.0"

from .action import (ActionResult, LimitSetSpec, certificate_dictionary,
                     limit_set_membership, min_action_to_terminal, path_rate)
from .coefficients import (DeviationScale, NoiseCoefficient, Potential,
                           ScaleError, apply_g, apply_potential,
                           audit_conditions, hs_norm_sq, lil_scale,
                           make_potential, make_shifted)
from .dynamics import (BlowUpError, DyadicMap, IntegratorConfig, Model,
                       ResolutionError, Trajectory, dyadic_modulus,
                       moment_monitor)
from .ensemble import run_ensemble
from .noise import (ControlPath, CovarianceSpectrum, InfeasibleDirectionError,
                    WienerIncrementStream, cameron_martin_energy, h0_norm_sq,
                    sample_increments, substream, trace)
from .runner import run
from .spectral import (GridShapeError, ModeIndexError, SpectralBasis,
                       SpectralField, h_norm, v_norm)

__all__ = [
    "__version__",
    "ActionResult", "LimitSetSpec", "certificate_dictionary",
    "limit_set_membership", "min_action_to_terminal", "path_rate",
    "DeviationScale", "NoiseCoefficient", "Potential", "ScaleError",
    "apply_g", "apply_potential", "audit_conditions", "hs_norm_sq",
    "lil_scale", "make_potential", "make_shifted",
    "BlowUpError", "DyadicMap", "IntegratorConfig", "Model",
    "ResolutionError", "Trajectory", "dyadic_modulus", "moment_monitor",
    "run_ensemble",
    "ControlPath", "CovarianceSpectrum", "InfeasibleDirectionError",
    "WienerIncrementStream", "cameron_martin_energy", "h0_norm_sq",
    "sample_increments", "substream", "trace",
    "run",
    "GridShapeError", "ModeIndexError", "SpectralBasis", "SpectralField",
    "h_norm", "v_norm",
]
