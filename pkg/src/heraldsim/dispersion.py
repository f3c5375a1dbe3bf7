"""Taylor-expanded fibre dispersion with two zero-dispersion wavelengths.

The propagation constant is expanded to fourth order about a reference
angular frequency ``omega0``.  Constant and linear terms never enter a
degenerate-pump four-wave-mixing phase mismatch, so they are not stored.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError

SPEED_OF_LIGHT = 299_792_458.0


def wavelength_to_omega(wavelength):
    """Vacuum wavelength (m) to angular frequency (rad/s)."""
    return 2.0 * np.pi * SPEED_OF_LIGHT / np.asarray(wavelength, dtype=float)


def omega_to_wavelength(omega):
    return 2.0 * np.pi * SPEED_OF_LIGHT / np.asarray(omega, dtype=float)


def bandwidth_nm_to_omega(bandwidth_nm: float, wavelength_nm: float) -> float:
    """Convert a (small) wavelength bandwidth to angular-frequency units."""
    lam = wavelength_nm * 1e-9
    return 2.0 * np.pi * SPEED_OF_LIGHT * bandwidth_nm * 1e-9 / lam**2


def bandwidth_omega_to_nm(bandwidth: float, wavelength_nm: float) -> float:
    lam = wavelength_nm * 1e-9
    return bandwidth * lam**2 / (2.0 * np.pi * SPEED_OF_LIGHT) * 1e9


@dataclass(frozen=True)
class DispersionModel:
    """Fibre dispersion and nonlinearity.

    Attributes
    ----------
    omega0 : reference angular frequency (rad/s)
    beta2, beta3, beta4 : Taylor coefficients about ``omega0`` (s^2/m, s^3/m, s^4/m)
    gamma : nonlinear coefficient (1/(W m))
    length : fibre length (m)
    peak_power : pump peak power (W)
    window_fraction : the expansion is trusted for |omega - omega0| <= window_fraction * omega0
    """

    omega0: float
    beta2: float
    beta3: float
    beta4: float
    gamma: float
    length: float
    peak_power: float = 0.0
    window_fraction: float = 0.4

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")
        if not self.length > 0:
            raise ValueError("fibre length must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.peak_power < 0:
            raise ValueError("peak power must be non-negative")
        if not 0 < self.window_fraction < 1:
            raise ValueError("window_fraction must lie in (0, 1)")

    @property
    def window(self) -> tuple[float, float]:
        half = self.window_fraction * self.omega0
        return self.omega0 - half, self.omega0 + half

    @property
    def nonlinear_phase(self) -> float:
        """2*gamma*P, the self/cross-phase contribution to the mismatch (1/m)."""
        return 2.0 * self.gamma * self.peak_power

    def with_length(self, length: float) -> "DispersionModel":
        return replace(self, length=length)

    def with_peak_power(self, peak_power: float) -> "DispersionModel":
        return replace(self, peak_power=peak_power)


def check_window(model: DispersionModel, omega, what: str = "frequency") -> None:
    lo, hi = model.window
    w = np.asarray(omega, dtype=float)
    if w.size and (np.min(w) < lo or np.max(w) > hi or not np.all(np.isfinite(w))):
        raise DomainError(
            f"{what} outside the dispersion validity window "
            f"[{lo:.6e}, {hi:.6e}] rad/s "
            f"({omega_to_wavelength(hi) * 1e9:.1f}-{omega_to_wavelength(lo) * 1e9:.1f} nm)"
        )


def relative_beta(model: DispersionModel, omega):
    """Propagation constant with its value and slope at omega0 removed (1/m)."""
    d = np.asarray(omega, dtype=float) - model.omega0
    return d * d * (model.beta2 / 2.0 + d * (model.beta3 / 6.0 + d * model.beta4 / 24.0))


def relative_group_delay(model: DispersionModel, omega):
    """Inverse group velocity minus its value at omega0 (s/m)."""
    d = np.asarray(omega, dtype=float) - model.omega0
    return d * (model.beta2 + d * (model.beta3 / 2.0 + d * model.beta4 / 6.0))


def beta2(model: DispersionModel, omega):
    """Group-velocity dispersion (s^2/m) at ``omega``."""
    check_window(model, omega)
    d = np.asarray(omega, dtype=float) - model.omega0
    out = model.beta2 + d * (model.beta3 + 0.5 * model.beta4 * d)
    return float(out) if np.ndim(out) == 0 else out


def recentred(model: DispersionModel, pump_omega: float) -> tuple[float, float, float]:
    """(beta2, beta3, beta4) re-expanded about ``pump_omega``."""
    d = pump_omega - model.omega0
    return (
        model.beta2 + model.beta3 * d + 0.5 * model.beta4 * d * d,
        model.beta3 + model.beta4 * d,
        model.beta4,
    )


def _quadratic_roots(a: float, b: float, c: float) -> list[float]:
    """Real roots of a*x^2 + b*x + c without cancellation."""
    if a == 0.0:
        if b == 0.0:
            return []
        return [-c / b]
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return []
    sq = np.sqrt(disc)
    q = -0.5 * (b + np.copysign(sq, b))
    if q == 0.0:
        return [0.0, 0.0]
    return sorted([q / a, c / q])


def zero_dispersion_frequencies(model: DispersionModel) -> list[float]:
    """Angular frequencies inside the validity window where beta2 changes sign, ascending."""
    lo, hi = model.window
    a, b, c = 0.5 * model.beta4, model.beta3, model.beta2
    scale = max(abs(a), abs(b), abs(c))
    if scale == 0.0:
        return []
    a, b, c = a / scale, b / scale, c / scale  # keeps the discriminant clear of underflow
    if a != 0.0 and b * b - 4.0 * a * c <= 0.0:
        return []  # no root, or a double root where beta2 touches zero without changing sign
    roots = [model.omega0 + r for r in _quadratic_roots(a, b, c)]
    if len(roots) == 2 and roots[0] == roots[1]:
        return []  # two crossings closer than float resolution cancel out
    return sorted(float(w) for w in roots if lo <= w <= hi)


def zero_dispersion_wavelengths(model: DispersionModel) -> list[float]:
    """Zero-dispersion wavelengths (m), ascending."""
    return sorted(float(omega_to_wavelength(w)) for w in zero_dispersion_frequencies(model))


def phase_mismatch(model: DispersionModel, detuning, pump_omega: float | None = None):
    """Degenerate-pump phase mismatch (1/m) for sidebands at pump +/- ``detuning``.

    ``-(b2 * d**2 + b4 * d**4 / 12) - 2 gamma P`` with b2, b4 taken about the
    pump.  Odd orders cancel, so the result is even in the detuning.
    """
    wp = model.omega0 if pump_omega is None else float(pump_omega)
    d = np.abs(np.asarray(detuning, dtype=float))
    check_window(model, wp, "pump frequency")
    check_window(model, [wp - np.max(d, initial=0.0), wp + np.max(d, initial=0.0)], "sideband")
    b2p, _, b4p = recentred(model, wp)
    d2 = d * d
    out = -(b2p * d2 + b4p * d2 * d2 / 12.0) - model.nonlinear_phase
    return float(out) if np.ndim(out) == 0 else out


def phase_mismatch_2d(model: DispersionModel, omega_s, omega_i):
    """Phase mismatch at an arbitrary (signal, idler) pair.

    Both pump photons are placed at the mean frequency (omega_s + omega_i)/2,
    i.e. ``2 beta(mean) - beta(omega_s) - beta(omega_i) - 2 gamma P``.  For a
    quartic propagation constant this equals the degenerate expression
    re-centred on the mean, which is what is evaluated here.
    """
    ws = np.asarray(omega_s, dtype=float)
    wi = np.asarray(omega_i, dtype=float)
    check_window(model, ws, "signal frequency")
    check_window(model, wi, "idler frequency")
    mean = 0.5 * (ws + wi)
    half = 0.5 * (ws - wi)
    d = mean - model.omega0
    b2 = model.beta2 + d * (model.beta3 + 0.5 * model.beta4 * d)
    h2 = half * half
    return -(b2 * h2 + model.beta4 * h2 * h2 / 12.0) - model.nonlinear_phase


def phase_mismatch_gradient(model: DispersionModel, omega_s: float, omega_i: float) -> tuple[float, float]:
    """Partial derivatives of :func:`phase_mismatch_2d` (s/m) with respect to signal and idler."""
    mean = 0.5 * (omega_s + omega_i)
    tau_mean = relative_group_delay(model, mean)
    return (
        float(tau_mean - relative_group_delay(model, omega_s)),
        float(tau_mean - relative_group_delay(model, omega_i)),
    )


def sideband_detunings(model: DispersionModel, pump_omega: float | None = None) -> list[float]:
    """Non-negative detunings where the degenerate phase mismatch vanishes, ascending.

    A detuning of zero is included when the nonlinear phase is zero.  Roots
    whose sidebands fall outside the validity window are dropped.
    """
    wp = model.omega0 if pump_omega is None else float(pump_omega)
    b2p, _, b4p = recentred(model, wp)
    lo, hi = model.window
    out = []
    for x in _quadratic_roots(b4p / 12.0, b2p, model.nonlinear_phase):
        if x < 0.0:
            continue
        d = float(np.sqrt(x))
        if lo <= wp - d and wp + d <= hi:
            out.append(d)
    return sorted(set(out))


def fit_reference_model(
    pump_wavelength: float,
    signal_wavelength: float,
    beta4: float,
    gamma: float,
    length: float,
    peak_power: float,
    window_fraction: float = 0.4,
    reference_wavelength: float | None = None,
) -> DispersionModel:
    """Fit beta2 and beta3 about the pump so the outer sideband lands on ``signal_wavelength``.

    Two conditions fix the two unknowns: the phase mismatch vanishes at the
    signal detuning, and the signal travels at the pump group velocity (the
    phasematching ridge then runs parallel to the signal axis).  ``beta4``
    sets the overall dispersion scale; only ``beta4 * length`` affects the
    shape of the joint spectrum.

    The fit is done about the pump; the coefficients are then re-expanded
    (exactly) about ``reference_wavelength`` when one is given, which moves
    the validity window.
    """
    wp = float(wavelength_to_omega(pump_wavelength))
    d = float(wavelength_to_omega(signal_wavelength)) - wp
    nl = 2.0 * gamma * peak_power
    b2 = -beta4 * d * d / 12.0 - nl / (d * d)
    # group-delay match: b2 d + b3 d^2/2 + b4 d^3/6 = 0
    b3 = -2.0 * b2 / d - beta4 * d / 3.0
    w0 = wp if reference_wavelength is None else float(wavelength_to_omega(reference_wavelength))
    shift = w0 - wp
    return DispersionModel(
        omega0=w0,
        beta2=b2 + b3 * shift + 0.5 * beta4 * shift * shift,
        beta3=b3 + beta4 * shift,
        beta4=beta4,
        gamma=gamma,
        length=length,
        peak_power=peak_power,
        window_fraction=window_fraction,
    )
