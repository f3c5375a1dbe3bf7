"""Joint spectral amplitude of four-wave-mixing photon pairs on a frequency grid."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dispersion import (
    DispersionModel,
    check_window,
    phase_mismatch_2d,
    phase_mismatch_gradient,
    recentred,
    sideband_detunings,
)
from .errors import DegenerateInputError

_SINC_SERIES_LIMIT = 1e-4


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform signal x idler angular-frequency grid (rad/s)."""

    signal_center: float
    signal_span: float
    signal_points: int
    idler_center: float
    idler_span: float
    idler_points: int

    def __post_init__(self):
        if self.signal_points < 2 or self.idler_points < 2:
            raise ValueError("grid needs at least two points per axis")
        if not (self.signal_span > 0 and self.idler_span > 0):
            raise ValueError("grid spans must be positive")

    @property
    def signal_axis(self) -> np.ndarray:
        h = 0.5 * self.signal_span
        return np.linspace(self.signal_center - h, self.signal_center + h, self.signal_points)

    @property
    def idler_axis(self) -> np.ndarray:
        h = 0.5 * self.idler_span
        return np.linspace(self.idler_center - h, self.idler_center + h, self.idler_points)

    @property
    def signal_step(self) -> float:
        return self.signal_span / (self.signal_points - 1)

    @property
    def idler_step(self) -> float:
        return self.idler_span / (self.idler_points - 1)

    @property
    def cell_area(self) -> float:
        return self.signal_step * self.idler_step

    @property
    def shape(self) -> tuple[int, int]:
        return (self.signal_points, self.idler_points)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.signal_axis, self.idler_axis, indexing="ij")

    def transposed(self) -> "FrequencyGrid":
        return FrequencyGrid(
            self.idler_center, self.idler_span, self.idler_points,
            self.signal_center, self.signal_span, self.signal_points,
        )

    def to_dict(self) -> dict:
        return {
            "signal_center_rad_s": self.signal_center,
            "signal_span_rad_s": self.signal_span,
            "signal_points": self.signal_points,
            "idler_center_rad_s": self.idler_center,
            "idler_span_rad_s": self.idler_span,
            "idler_points": self.idler_points,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FrequencyGrid":
        return cls(
            float(d["signal_center_rad_s"]), float(d["signal_span_rad_s"]), int(d["signal_points"]),
            float(d["idler_center_rad_s"]), float(d["idler_span_rad_s"]), int(d["idler_points"]),
        )

    @classmethod
    def from_axes(cls, signal_axis, idler_axis) -> "FrequencyGrid":
        """Rebuild a grid from explicit (uniform) axes, e.g. read back from a file."""
        s = np.asarray(signal_axis, dtype=float)
        i = np.asarray(idler_axis, dtype=float)
        for ax in (s, i):
            if ax.size < 2 or np.any(np.diff(ax) <= 0):
                raise ValueError("axes must be strictly increasing with at least two points")
        return cls(
            0.5 * (s[0] + s[-1]), s[-1] - s[0], s.size,
            0.5 * (i[0] + i[-1]), i[-1] - i[0], i.size,
        )


@dataclass(frozen=True)
class PumpEnvelope:
    """Pump spectrum: ``rms_bandwidth`` is the RMS width of the pump intensity in rad/s."""

    center: float
    rms_bandwidth: float
    shape: str = "gaussian"

    def __post_init__(self):
        if not self.rms_bandwidth > 0:
            raise ValueError("pump bandwidth must be positive")
        if self.shape != "gaussian":
            raise NotImplementedError(f"pump shape {self.shape!r} is not implemented")

    @property
    def two_photon_bandwidth(self) -> float:
        # two identical Gaussian amplitudes convolve to sqrt(2) the width
        return np.sqrt(2.0) * self.rms_bandwidth


def pump_envelope_value(pump: PumpEnvelope, omega_s, omega_i):
    """Two-photon pump envelope; depends on omega_s + omega_i only."""
    u = np.asarray(omega_s, dtype=float) + np.asarray(omega_i, dtype=float) - 2.0 * pump.center
    s = pump.two_photon_bandwidth
    return np.exp(-(u * u) / (4.0 * s * s)).astype(complex)


def sinc(x):
    """sin(x)/x with a series branch near zero."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SINC_SERIES_LIMIT
    safe = np.where(small, 1.0, x)
    x2 = x * x
    return np.where(small, 1.0 - x2 / 6.0 + x2 * x2 / 120.0, np.sin(safe) / safe)


def phasematching_value(model: DispersionModel, omega_s, omega_i):
    """sinc(dk L / 2) exp(i dk L / 2) with dk from :func:`phase_mismatch_2d`."""
    x = 0.5 * model.length * phase_mismatch_2d(model, omega_s, omega_i)
    return sinc(x) * np.exp(1j * x)


@dataclass(frozen=True, eq=False)
class JointSpectralAmplitude:
    """Complex amplitude ``A[j, k]`` at (signal_axis[j], idler_axis[k])."""

    grid: FrequencyGrid
    amplitude: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.asarray(self.amplitude)
        if a.shape != self.grid.shape:
            raise ValueError(f"amplitude shape {a.shape} does not match grid {self.grid.shape}")

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2

    @property
    def mass(self) -> float:
        """Integrated intensity, sum |A|^2 * cell area."""
        return float(np.sum(self.intensity) * self.grid.cell_area)

    def normalized(self) -> "JointSpectralAmplitude":
        m = self.mass
        if not m > 0:
            raise DegenerateInputError("cannot normalise an all-zero joint spectrum")
        return JointSpectralAmplitude(self.grid, self.amplitude / np.sqrt(m), dict(self.metadata))

    def magnitude(self) -> "JointSpectralAmplitude":
        """The phase-free amplitude |A| (what an intensity measurement can recover)."""
        return JointSpectralAmplitude(self.grid, np.abs(self.amplitude), dict(self.metadata))

    def transposed(self) -> "JointSpectralAmplitude":
        return JointSpectralAmplitude(self.grid.transposed(), self.amplitude.T.copy(), dict(self.metadata))

    @classmethod
    def from_intensity(cls, grid: FrequencyGrid, intensity, metadata: dict | None = None):
        inten = np.asarray(intensity, dtype=float)
        if np.any(inten < 0):
            raise ValueError("joint spectral intensity must be non-negative")
        return cls(grid, np.sqrt(inten), dict(metadata or {}))


def build_jsa(model: DispersionModel, pump: PumpEnvelope, grid: FrequencyGrid,
              normalize: bool = True) -> JointSpectralAmplitude:
    """Pump envelope times phasematching on ``grid``, optionally normalised to unit mass."""
    check_window(model, grid.signal_axis, "signal axis")
    check_window(model, grid.idler_axis, "idler axis")
    ws, wi = grid.mesh()
    amp = pump_envelope_value(pump, ws, wi) * phasematching_value(model, ws, wi)
    jsa = JointSpectralAmplitude(grid, amp)
    return jsa.normalized() if normalize else jsa


def operating_point(model: DispersionModel, pump_omega: float) -> tuple[float, float]:
    """(signal, idler) angular frequencies of the outer phasematched sideband pair.

    The signal is the high-frequency (short-wavelength) member.
    """
    check_window(model, pump_omega, "pump frequency")
    roots = [d for d in sideband_detunings(model, pump_omega) if d > 0]
    if not roots:
        raise DegenerateInputError("no phasematched sideband for this pump frequency")
    d = roots[-1]
    return pump_omega + d, pump_omega - d


def phasematching_bandwidth(model: DispersionModel, omega_s: float, omega_i: float) -> float:
    """Idler detuning to the first phasematching zero, 2 pi / (L |d dk / d omega_i|)."""
    _, slope_i = phase_mismatch_gradient(model, omega_s, omega_i)
    if slope_i == 0.0:
        return np.inf
    return 2.0 * np.pi / (model.length * abs(slope_i))


def default_grid(model: DispersionModel, pump: PumpEnvelope, points: int = 256,
                 signal_factor: float = 5.0, idler_factor: float = 5.0,
                 signal_points: int | None = None, idler_points: int | None = None) -> FrequencyGrid:
    """Grid centred on the operating point.

    The idler half-span is ``idler_factor`` phasematching bandwidths.  Along
    the signal axis the joint spectrum is the pump envelope shifted by the
    idler detuning, so the half-span is ``signal_factor`` times the sum of the
    two-photon pump bandwidth and the phasematching bandwidth.  Both spans
    are clipped to the dispersion validity window.
    """
    ws0, wi0 = operating_point(model, pump.center)
    w_pm = phasematching_bandwidth(model, ws0, wi0)
    if not np.isfinite(w_pm):
        raise DegenerateInputError("phasematching is flat along the idler axis; pass an explicit grid")
    lo, hi = model.window
    # clip to the dispersion window; the 810 nm side of the reference model sits close to it
    room_s = (1.0 - 1e-12) * min(ws0 - lo, hi - ws0)
    room_i = (1.0 - 1e-12) * min(wi0 - lo, hi - wi0)
    half_s = min(signal_factor * (pump.two_photon_bandwidth + w_pm), room_s)
    half_i = min(idler_factor * w_pm, room_i)
    return FrequencyGrid(
        ws0, 2.0 * half_s, signal_points or points,
        wi0, 2.0 * half_i, idler_points or points,
    )


@dataclass(frozen=True, eq=False)
class PhasematchingContour:
    """One connected piece of the dk = 0 set traced over a pump scan.

    ``signal`` and ``idler`` hold the sideband frequencies at each ``pump``
    sample.  A closed piece starts and ends where the inner and outer
    sidebands merge, so its first and last points coincide.
    """

    pump: np.ndarray
    signal: np.ndarray
    idler: np.ndarray
    closed: bool


def _root_pair(model, wp):
    b2p, _, b4p = recentred(model, wp)
    return sideband_detunings(model, wp), b2p, b4p


def _merge_point(model, inside, outside, iters=200):
    """Bisect between a pump frequency with two sideband roots and one without."""
    for _ in range(iters):
        mid = 0.5 * (inside + outside)
        if mid == inside or mid == outside:
            break
        if len(sideband_detunings(model, mid)) >= 2:
            inside = mid
        else:
            outside = mid
    return inside


def phasematching_contour(model: DispersionModel, pump_omegas) -> list[PhasematchingContour]:
    """Trace the degenerate-pump phasematching solutions across a pump scan.

    For each pump frequency the non-negative detunings with zero mismatch are
    found in closed form.  Runs of pump samples with an inner and an outer
    solution are joined into loops (outer branch forward, inner branch back)
    whose ends are refined onto the pump frequency where the two solutions
    merge.  Runs with a single solution are returned as open pieces.
    """
    wps = np.sort(np.asarray(pump_omegas, dtype=float))
    lo, hi = model.window
    wps = wps[(wps >= lo) & (wps <= hi)]
    roots = [sideband_detunings(model, w) for w in wps]
    counts = np.array([min(len(r), 2) for r in roots])
    out: list[PhasematchingContour] = []

    j = 0
    n = len(wps)
    while j < n:
        c = counts[j]
        k = j
        while k + 1 < n and counts[k + 1] == c:
            k += 1
        if c == 2:
            pumps = list(wps[j:k + 1])
            outer = [roots[m][-1] for m in range(j, k + 1)]
            inner = [roots[m][0] for m in range(j, k + 1)]
            closed_left = j > 0 and counts[j - 1] == 0
            closed_right = k < n - 1 and counts[k + 1] == 0
            if closed_left:
                wm = _merge_point(model, wps[j], wps[j - 1])
                b2p, _, b4p = recentred(model, wm)
                d = float(np.sqrt(max(-6.0 * b2p / b4p, 0.0)))
                pumps.insert(0, wm)
                outer.insert(0, d)
                inner.insert(0, d)
            if closed_right:
                wm = _merge_point(model, wps[k], wps[k + 1])
                b2p, _, b4p = recentred(model, wm)
                d = float(np.sqrt(max(-6.0 * b2p / b4p, 0.0)))
                pumps.append(wm)
                outer.append(d)
                inner.append(d)
            closed = closed_left and closed_right
            p = np.array(pumps + pumps[::-1])
            dd = np.array(outer + inner[::-1])
            if closed:
                # the merge point appears twice at each end; keep one copy per end
                keep = np.ones(p.size, dtype=bool)
                half = len(pumps)
                keep[half] = False
                p, dd = p[keep], dd[keep]
            out.append(PhasematchingContour(p, p + dd, p - dd, closed))
        elif c == 1:
            p = wps[j:k + 1]
            dd = np.array([roots[m][0] for m in range(j, k + 1)])
            out.append(PhasematchingContour(p.copy(), p + dd, p - dd, False))
        j = k + 1
    return out
