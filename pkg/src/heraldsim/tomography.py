"""Stimulated emission tomography: seed the idler, record signal spectra, stack them.

The stimulated signal spectrum for a monochromatic seed is proportional to
the joint spectral intensity along the seed's idler column, so the phase of
the amplitude never enters.  Purity inferred from a reconstruction is
therefore an upper bound.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .errors import DegenerateInputError, DomainError
from .jsa import FrequencyGrid, JointSpectralAmplitude


def stimulated_spectrum(jsa: JointSpectralAmplitude, seed_omega: float) -> np.ndarray:
    """Signal spectrum |f(omega_s, seed)|^2 on the signal axis, linear between idler columns."""
    axis = jsa.grid.idler_axis
    if not axis[0] <= seed_omega <= axis[-1]:
        raise DomainError(f"seed {seed_omega:.6e} rad/s outside idler span [{axis[0]:.6e}, {axis[-1]:.6e}]")
    inten = jsa.intensity
    x = (seed_omega - axis[0]) / jsa.grid.idler_step
    k = min(int(np.floor(x)), axis.size - 2)
    f = x - k
    # snap to the column when the seed sits on it, so grid-aligned sweeps are exact
    if abs(f) < 1e-9:
        return inten[:, k].copy()
    if abs(1.0 - f) < 1e-9:
        return inten[:, k + 1].copy()
    return (1.0 - f) * inten[:, k] + f * inten[:, k + 1]


@dataclass(frozen=True, eq=False)
class Reconstruction:
    """Stacked stimulated spectra: ``intensity[j, m]`` at signal ``signal_axis[j]``, seed ``seeds[m]``."""

    signal_axis: np.ndarray
    seeds: np.ndarray
    intensity: np.ndarray
    osa_resolution: float = 0.0

    def as_jsa(self) -> JointSpectralAmplitude:
        """Real amplitude sqrt(JSI) on the seed grid (seeds must be uniformly spaced)."""
        d = np.diff(self.seeds)
        if not np.allclose(d, d[0], rtol=1e-9, atol=0.0):
            raise ValueError("as_jsa needs a uniformly spaced seed sweep")
        grid = FrequencyGrid.from_axes(self.signal_axis, self.seeds)
        return JointSpectralAmplitude.from_intensity(grid, self.intensity, {"source": "stimulated emission tomography"})

    def on_idler_axis(self, idler_axis) -> np.ndarray:
        """Linear interpolation of every signal row onto ``idler_axis`` (zero outside the sweep)."""
        x = np.asarray(idler_axis, dtype=float)
        return np.array([np.interp(x, self.seeds, row, left=0.0, right=0.0) for row in self.intensity])

    def peak(self) -> tuple[float, float]:
        """(signal, idler) frequency of the brightest reconstructed point."""
        j, m = np.unravel_index(int(np.argmax(self.intensity)), self.intensity.shape)
        return float(self.signal_axis[j]), float(self.seeds[m])

    def metadata(self) -> dict:
        return {
            "seeds_rad_s": [float(s) for s in self.seeds],
            "seed_count": int(self.seeds.size),
            "osa_resolution_rad_s": self.osa_resolution,
        }


def _sweep_step(seeds: np.ndarray) -> np.ndarray:
    """Quadrature weights along the sweep (trapezoid rule with full end cells).

    For a uniform sweep every weight equals the spacing, matching the grid
    cell area used by the generative amplitude.
    """
    d = np.diff(seeds)
    w = np.empty(seeds.size)
    w[0], w[-1] = d[0], d[-1]
    w[1:-1] = 0.5 * (d[:-1] + d[1:])
    return w


def reconstruct_jsi(jsa: JointSpectralAmplitude, seeds, osa_resolution: float = 0.0) -> Reconstruction:
    """Sweep the seed over ``seeds`` and stack the spectra, normalised to unit mass.

    ``osa_resolution`` (rad/s, RMS) optionally smooths each spectrum along the
    signal axis with a Gaussian, standing in for a finite analyser resolution.
    """
    s = np.asarray(seeds, dtype=float)
    if s.size == 0:
        raise ValueError("empty seed sweep")
    if s.size < 2:
        raise ValueError("a sweep needs at least two seed points")
    d = np.diff(s)
    if np.all(d < 0):
        s = s[::-1]
    elif not np.all(d > 0):
        raise ValueError("seed sweep must be strictly monotone")
    cols = [stimulated_spectrum(jsa, w) for w in s]
    stack = np.column_stack(cols)
    if osa_resolution > 0:
        stack = gaussian_filter1d(stack, osa_resolution / jsa.grid.signal_step, axis=0, mode="constant")
    mass = float(np.sum(stack * _sweep_step(s)[None, :]) * jsa.grid.signal_step)
    if mass <= 0:
        raise DegenerateInputError("stimulated spectra are all zero over the sweep")
    return Reconstruction(jsa.grid.signal_axis, s, stack / mass, float(osa_resolution))


def reconstruction_error(jsa: JointSpectralAmplitude, rec: Reconstruction) -> float:
    """Relative L2 distance between the reconstruction (interpolated onto the idler axis) and |A|^2."""
    truth = jsa.normalized().intensity
    est = rec.on_idler_axis(jsa.grid.idler_axis)
    return float(np.linalg.norm(est - truth) / np.linalg.norm(truth))


def grid_aligned_seeds(jsa: JointSpectralAmplitude, stride: int = 1) -> np.ndarray:
    """Every ``stride``-th idler grid frequency, starting at the first."""
    return jsa.grid.idler_axis[::stride].copy()


def random_phase(jsa: JointSpectralAmplitude, rng: np.random.Generator) -> JointSpectralAmplitude:
    """The same amplitude magnitudes with independent uniform random phases."""
    ph = np.exp(2j * np.pi * rng.random(jsa.amplitude.shape))
    return JointSpectralAmplitude(jsa.grid, jsa.amplitude * ph, dict(jsa.metadata))
