"""Coincidence-to-accidentals ratios and second-order coherences from raw counts.

Errors use first-order propagation with every raw count treated as an
independent Poisson variable.  No background subtraction is performed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EstimatorError
from .multiplex import MuxRunRecord

DEFAULT_DURATION_S = 900.0


@dataclass(frozen=True)
class Estimate:
    value: float
    error: float

    def sigmas_from(self, other: "Estimate | float") -> float:
        """Distance to ``other`` in units of the combined standard error."""
        if isinstance(other, Estimate):
            return abs(self.value - other.value) / np.hypot(self.error, other.error)
        return abs(self.value - other) / self.error


@dataclass(frozen=True, eq=False)
class CountSummary:
    """Raw counts accumulated over ``duration`` seconds at repetition rate ``rep_rate``.

    Counts are stored (not rates) so both are recoverable exactly; counts may
    be non-integer expected values when built from an exact distribution.
    Keys follow :meth:`MuxRunRecord.named_counts`.
    """

    counts: dict
    rep_rate: float
    duration: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("integration time must be positive")
        if not self.rep_rate > 0:
            raise ValueError("repetition rate must be positive")
        for k, v in self.counts.items():
            if v < 0:
                raise ValueError(f"negative count for {k}")

    @classmethod
    def from_record(cls, record: MuxRunRecord, rep_rate: float) -> "CountSummary":
        return cls(record.named_counts(), rep_rate, record.pulses / rep_rate)

    @classmethod
    def from_rates(cls, rates: dict, rep_rate: float, duration: float = DEFAULT_DURATION_S) -> "CountSummary":
        return cls({k: v * duration for k, v in rates.items()}, rep_rate, duration)

    @property
    def n_sources(self) -> int:
        k = 0
        while f"H{k + 1}" in self.counts:
            k += 1
        return k

    def count(self, key: str) -> float:
        try:
            return float(self.counts[key])
        except KeyError:
            raise EstimatorError(f"summary has no {key!r} count") from None

    def rate(self, key: str) -> float:
        return self.count(key) / self.duration

    def rates(self) -> dict:
        return {k: v / self.duration for k, v in self.counts.items()}

    def to_dict(self) -> dict:
        return {"rep_rate_hz": self.rep_rate, "duration_s": self.duration,
                "counts": dict(self.counts), "rates_per_s": self.rates()}


def _ratio(c: CountSummary, num: list[str], den: list[str], scale: float) -> Estimate:
    """``scale * prod(num rates) / prod(den rates)`` with Poisson errors.

    An empty numerator count gives value 0 with the error of a single count.
    """
    for k in den:
        if c.count(k) <= 0:
            raise EstimatorError(f"estimator undefined: {k} count is zero")
    counts = {k: c.count(k) for k in num + den}
    t = c.duration

    def value_of(cs):
        return scale * np.prod([cs[k] / t for k in num]) / np.prod([cs[k] / t for k in den])

    value = value_of(counts)
    if value == 0.0:
        return Estimate(0.0, float(value_of({k: max(v, 1.0) for k, v in counts.items()})))
    # exponents are all +-1, so the relative variance is sum(1/N)
    rel2 = sum(1.0 / counts[k] for k in num + den)
    return Estimate(float(value), float(abs(value) * np.sqrt(rel2)))


def car_single(c: CountSummary, herald: str = "H") -> Estimate:
    """CAR = Rp * N_c / (N_H * N_I) for one herald channel."""
    return _ratio(c, [f"{herald}I"], [herald, "I"], c.rep_rate)


def car_multiplexed(c: CountSummary) -> Estimate:
    """CAR of several sources sharing one output, accidentals corrected for double counting.

    Two sources: N_c = N_H1I + N_H2I - N_H1H2I and
    A_c = (N_H1 + N_H2) N_I / Rp - N_H1 N_H2 N_I / Rp^2.  For more sources the
    same construction generalises to N_c = N_HI (any herald) and
    A_c = N_I * (1 - prod_k (1 - N_Hk / Rp)), which equals the two-source
    expression for N = 2.
    """
    n = c.n_sources
    rp, t = c.rep_rate, c.duration
    ri = c.rate("I")
    if n == 2:
        nc_count = c.count("H1I") + c.count("H2I") - c.count("H1H2I")
    elif n >= 1:
        nc_count = c.count("HI")
    else:
        raise EstimatorError("summary has no per-source herald counts")
    h = np.array([c.rate(f"H{k + 1}") for k in range(n)])
    frac = h / rp
    acc = ri * -np.expm1(np.sum(np.log1p(-frac)))  # 1 - prod(1 - frac) without cancellation
    if acc <= 0.0:
        raise EstimatorError("accidental coincidence rate is zero")
    value = nc_count / t / acc
    # d acc / d h_k = ri * prod_{j != k}(1 - frac_j) / rp
    grad_h = np.array([ri * np.prod(np.delete(1.0 - frac, k)) / rp for k in range(n)])
    var_acc = (acc / ri) ** 2 * c.count("I") / t**2 + np.sum(grad_h**2 * h / t)
    var = value**2 * ((1.0 / nc_count if nc_count > 0 else 0.0) + var_acc / acc**2)
    if nc_count == 0:
        var = (1.0 / t / acc) ** 2
    return Estimate(float(value), float(np.sqrt(var)))


def g2_marginal(c: CountSummary) -> Estimate:
    """g2_m(0) = N_I1I2 * Rp / (N_I1 * N_I2)."""
    return _ratio(c, ["I1I2"], ["I1", "I2"], c.rep_rate)


def g2_heralded(c: CountSummary, normalise_by: str = "herald") -> Estimate:
    """Heralded second-order coherence of the output.

    ``normalise_by="herald"`` (default) gives N_HI1I2 * N_H / (N_HI1 * N_HI2),
    the conditional coherence that vanishes for a perfect single photon.
    ``"repetition_rate"`` multiplies by Rp instead of N_H.
    """
    if normalise_by == "herald":
        return _ratio(c, ["HI1I2", "H"], ["HI1", "HI2"], 1.0)
    if normalise_by == "repetition_rate":
        return _ratio(c, ["HI1I2"], ["HI1", "HI2"], c.rep_rate)
    raise ValueError(f"unknown normalisation {normalise_by!r}")


def heralded_rate(c: CountSummary) -> float:
    """Heralded output (herald-signal coincidence) rate, counts/s."""
    return c.rate("HI")


def metrics(c: CountSummary) -> dict:
    """JSON-ready metrics with errors; estimators that are undefined are reported as None."""
    out = {}
    car = car_multiplexed if c.n_sources >= 2 else car_single
    for name, fn in (("car", car), ("g2m", g2_marginal), ("g2h", g2_heralded)):
        try:
            e = fn(c)
            out[name], out[f"{name}_err"] = e.value, e.error
        except EstimatorError:
            out[name], out[f"{name}_err"] = None, None
    out["rates"] = c.rates()
    return out
