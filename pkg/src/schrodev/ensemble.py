"""Vectorized path ensembles with reproducible per-path substreams.

Every path owns its increments (frozen seed-splitting in ``noise``), and
every observable is accumulated per path, so neither the worker count nor
the internal batching can change any number: ensembles are reduced in path
order after all workers return.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .coefficients import DeviationScale
from .dynamics import BLOWUP_NORM, DyadicMap, Model, Trajectory
from .noise import ControlPath, substream

__all__ = ["EnsembleStats", "run_ensemble"]

# increments buffer budget, in complex entries, per internal batch
_BLOCK_BUDGET = 1 << 22


@dataclass
class EnsembleStats:
    """Per-path summaries of one ensemble, ordered by path index."""

    sup_norm: np.ndarray
    terminal: np.ndarray
    blown: np.ndarray
    sup_deviation: np.ndarray | None = None
    noise_distance: np.ndarray | None = None
    modulus: np.ndarray | None = None

    @property
    def n_paths(self) -> int:
        return self.sup_norm.shape[0]

    @property
    def ok(self) -> np.ndarray:
        return ~self.blown

    @staticmethod
    def concatenate(parts: list["EnsembleStats"]) -> "EnsembleStats":
        def cat(name):
            arrays = [getattr(p, name) for p in parts]
            return None if arrays[0] is None else np.concatenate(arrays)

        return EnsembleStats(
            sup_norm=cat("sup_norm"), terminal=cat("terminal"), blown=cat("blown"),
            sup_deviation=cat("sup_deviation"), noise_distance=cat("noise_distance"),
            modulus=cat("modulus"),
        )


def _simulate_range(model: Model, scale: DeviationScale, master_seed: int,
                    paths: np.ndarray, girsanov_control: ControlPath | None,
                    reference: Trajectory | None,
                    conditioning: ControlPath | None, track_noise: bool,
                    dyadic_level: int | None) -> EnsembleStats:
    basis = model.basis
    K, J, dt = model.steps, basis.mode_count, model.dt
    a = scale.a
    gt = model.shifted_coefficient(scale)
    fast = model.noise.is_state_independent and model.noise.alpha_is_scalar
    alpha = model.noise.alpha if fast else None
    synth = basis._synth
    u0_grid = None if fast else model.u0().states @ synth.T  # (K+1, P)
    alpha_grid = None if model.noise.alpha_is_scalar else model.noise.alpha_grid(basis)
    ref_states = None if reference is None else reference.states
    lam = model.spectrum.eigenvalues
    lam_pos = lam > 0
    h_cum = None if conditioning is None else conditioning.cumulative()
    hvals = None if girsanov_control is None else girsanov_control.values
    root_var = np.sqrt(lam * dt)
    anchors_due = None
    if dyadic_level is not None:
        m = K // (2 ** dyadic_level)
        DyadicMap(dyadic_level, model.horizon).anchor_indices(K)  # validates
        anchors_due = m

    n = paths.size
    block = max(1, min(n, _BLOCK_BUDGET // max(K * J, 1)))
    out_sup = np.empty(n)
    out_term = np.empty((n, J), dtype=complex)
    out_blown = np.zeros(n, dtype=bool)
    out_dev = np.empty(n) if reference is not None else None
    out_noise = np.empty(n) if track_noise else None
    out_mod = np.empty(n) if dyadic_level is not None else None

    for lo in range(0, n, block):
        idx = paths[lo:lo + block]
        b = idx.size
        inc = np.empty((b, K, J), dtype=complex)
        for i, p in enumerate(idx):
            raw = substream(master_seed, int(p)).standard_normal((2, K, J))
            inc[i] = raw[0] + 1j * raw[1]
        inc *= root_var
        z = np.zeros((b, J), dtype=complex)
        sup2 = np.zeros(b)
        dev2 = np.zeros(b) if reference is not None else None
        nd2 = None
        wsum = None
        if track_noise:
            # W(0) = 0 and h(0) = 0, so the tracked distance starts at zero
            wsum = np.zeros((b, J), dtype=complex)
            nd2 = np.zeros(b)
        mod2 = np.zeros(b) if dyadic_level is not None else None
        anchor = z.copy() if dyadic_level is not None else None
        blown = np.zeros(b, dtype=bool)

        for k in range(K):
            dW = inc[:, k, :]
            if fast:
                gdW = alpha * dW
                drift = None if hvals is None else alpha * hvals[k]
            else:
                zgrid = z @ synth.T
                mult = gt.multiplier(model.times[k], zgrid, u0_grid[k],
                                     alpha_grid=alpha_grid)
                gdW = ((mult * (dW @ synth.T)) @ synth) / basis.quad_points
                drift = None
                if hvals is not None:
                    hgrid = hvals[k] @ synth.T
                    drift = ((mult * hgrid) @ synth) / basis.quad_points
            forcing = a * gdW
            if drift is not None:
                forcing = forcing + dt * drift
            if dyadic_level is not None and k % anchors_due == 0:
                anchor = z.copy()
            z = model.step_states(z, forcing, k)
            nrm2 = np.sum(np.abs(z) ** 2, axis=-1)
            bad = ~np.isfinite(nrm2) | (nrm2 > BLOWUP_NORM ** 2)
            if bad.any():
                blown |= bad
                z = np.where(bad[:, None], 0.0, z)
            np.maximum(sup2, nrm2, out=sup2)
            if ref_states is not None:
                d = np.sum(np.abs(z - ref_states[k + 1]) ** 2, axis=-1)
                np.maximum(dev2, d, out=dev2)
            if track_noise:
                wsum += dW
                target = a * wsum - (h_cum[k + 1] if h_cum is not None else 0.0)
                d = np.sum(np.abs(target) ** 2 / np.where(lam_pos, lam, 1.0)
                           * lam_pos, axis=-1)
                np.maximum(nd2, d, out=nd2)
            if dyadic_level is not None:
                d = np.sum(np.abs(z - anchor) ** 2, axis=-1)
                np.maximum(mod2, d, out=mod2)

        sl = slice(lo, lo + b)
        out_sup[sl] = np.sqrt(sup2)
        out_term[sl] = z
        out_blown[sl] = blown
        if out_dev is not None:
            out_dev[sl] = np.sqrt(dev2)
        if out_noise is not None:
            out_noise[sl] = np.sqrt(nd2)
        if out_mod is not None:
            out_mod[sl] = np.sqrt(mod2)

    return EnsembleStats(sup_norm=out_sup, terminal=out_term, blown=out_blown,
                         sup_deviation=out_dev, noise_distance=out_noise,
                         modulus=out_mod)


def run_ensemble(model: Model, scale: DeviationScale, *, n_paths: int,
                 master_seed: int, path_offset: int = 0, threads: int = 1,
                 girsanov_control: ControlPath | None = None,
                 reference: Trajectory | None = None,
                 conditioning: ControlPath | None = None,
                 track_noise: bool = False,
                 dyadic_level: int | None = None) -> EnsembleStats:
    """Simulate n_paths of the centered (optionally shifted) process.

    Returns per-path summaries in path-index order regardless of the worker
    count.  ``girsanov_control`` adds the control drift to the dynamics;
    ``conditioning`` only recentres the tracked noise distance.
    """
    if girsanov_control is not None and not np.any(girsanov_control.values):
        girsanov_control = None
    if reference is not None and reference.states.shape != (model.steps + 1,
                                                            model.basis.mode_count):
        raise ValueError("reference trajectory does not match the model grid")
    track = track_noise or conditioning is not None
    paths = np.arange(path_offset, path_offset + n_paths)
    model.u0()  # materialize before the workers fork
    if threads <= 1 or n_paths == 1:
        return _simulate_range(model, scale, master_seed, paths, girsanov_control,
                               reference, conditioning, track, dyadic_level)
    ranges = np.array_split(paths, threads)
    ranges = [r for r in ranges if r.size]
    with ThreadPoolExecutor(max_workers=len(ranges)) as pool:
        parts = list(pool.map(
            lambda r: _simulate_range(model, scale, master_seed, r, girsanov_control,
                                      reference, conditioning, track, dyadic_level),
            ranges))
    return EnsembleStats.concatenate(parts)
