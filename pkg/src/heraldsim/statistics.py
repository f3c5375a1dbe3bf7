"""Photon-pair statistics of one source: thermal sampling, loss, binary detection.

Monte Carlo pulses are processed in fixed-size chunks.  Each (chunk, stream)
pair owns an independent Philox generator derived from the master seed, so a
run is reproducible bit-exactly and chunks can be sampled in any order.

Sampling is sparse: only pulses carrying at least one pair or a background
click are materialised.  Click patterns are bit masks over four detectors:
the herald detector ``H``, an unsplit signal detector ``I`` and the two
outputs ``I1``/``I2`` of a 50:50 splitter on the signal arm.  ``I`` and the
split pair are parallel views of the same signal photons, which lets one run
feed both the CAR and the g2 estimators.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

H, I, I1, I2 = 1, 2, 4, 8
N_PATTERNS = 16
SIGNAL_BITS = I | I1 | I2
CHUNK_PULSES = 1 << 20
TIEBREAK_STREAM = 1 << 16


@dataclass(frozen=True, eq=False)
class SourceModel:
    """One heralded source.

    ``weights`` are Schmidt weights (renormalised to unit sum); the mean pair
    number of mode j is ``weights[j] * mean_pairs``.  Backgrounds are click
    probabilities per pulse; ``signal_background`` applies to each signal
    detector separately.
    """

    weights: np.ndarray
    mean_pairs: float
    herald_efficiency: float = 1.0
    signal_transmission: float = 1.0
    herald_background: float = 0.0
    signal_background: float = 0.0
    rep_rate: float = 10e6

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if w.size == 0 or np.any(w < 0) or not w.sum() > 0:
            raise ValueError("weights must be non-negative with a positive sum")
        object.__setattr__(self, "weights", w / w.sum())
        if not self.mean_pairs >= 0:
            raise ValueError("mean_pairs must be non-negative")
        for name in ("herald_efficiency", "signal_transmission"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("herald_background", "signal_background"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")
        if not self.rep_rate > 0:
            raise ValueError("rep_rate must be positive")

    @property
    def mode_means(self) -> np.ndarray:
        return self.weights * self.mean_pairs

    @property
    def purity(self) -> float:
        return float(np.sum(self.weights**2))

    def with_mean_pairs(self, mean_pairs: float) -> "SourceModel":
        return replace(self, mean_pairs=mean_pairs)

    def attenuate_signal(self, transmission: float) -> "SourceModel":
        return replace(self, signal_transmission=self.signal_transmission * transmission)


def db_to_transmission(loss_db: float) -> float:
    return 10.0 ** (-loss_db / 10.0)


def single_pair_probability(mu):
    """Probability of exactly one pair from a single thermal mode of mean ``mu``."""
    mu = np.asarray(mu, dtype=float)
    out = mu / (1.0 + mu) ** 2
    return float(out) if out.ndim == 0 else out


def mean_pairs_for_single_pair_probability(p1: float) -> float:
    """Low-mean root of mu / (1 + mu)^2 = p1, for 0 <= p1 <= 1/4."""
    if not 0.0 <= p1 <= 0.25:
        raise ValueError("p1 must lie in [0, 0.25]")
    if p1 == 0.0:
        return 0.0
    # 2p / ((1 - 2p) + sqrt(1 - 4p)) avoids cancellation for small p
    return 2.0 * p1 / ((1.0 - 2.0 * p1) + np.sqrt(1.0 - 4.0 * p1))


def delivery_probability(herald_efficiency: float, signal_transmission: float, p1: float) -> float:
    return herald_efficiency * signal_transmission * p1


def n_source_delivery(n: int, herald_efficiency: float, signal_transmission: float, p1: float) -> float:
    """Probability that all of ``n`` independent sources deliver a photon in one pulse."""
    return delivery_probability(herald_efficiency, signal_transmission, p1) ** n


def no_photon_probability(mode_means, transmission: float) -> float:
    """P(no photon survives) for multimode thermal light thinned by ``transmission``.

    Uses the thermal generating function: prod_j 1 / (1 + mu_j * eta).
    """
    m = np.asarray(mode_means, dtype=float)
    return float(np.exp(-np.sum(np.log1p(m * transmission))))


def herald_probability(source: SourceModel) -> float:
    """Closed-form herald click probability per pulse."""
    silent = no_photon_probability(source.mode_means, source.herald_efficiency)
    return 1.0 - (1.0 - source.herald_background) * silent


def mean_pairs_for_herald_probability(source: SourceModel, p_herald: float) -> float:
    """Mean pair number giving a herald click probability of ``p_herald``."""
    if not source.herald_background <= p_herald < 1.0:
        raise ValueError("p_herald must lie in [herald background, 1)")
    if source.herald_efficiency == 0.0:
        raise ValueError("herald efficiency is zero")

    def f(mu):
        return herald_probability(source.with_mean_pairs(mu)) - p_herald

    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
    return brentq(f, 0.0, hi, xtol=1e-15, rtol=1e-14)


# ---------------------------------------------------------------------------
# Monte Carlo


def chunk_rng(seed: int, chunk: int, stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(chunk, stream))
    return np.random.Generator(np.random.Philox(ss))


def chunk_sizes(pulses: int, chunk: int = CHUNK_PULSES) -> list[int]:
    full, rest = divmod(int(pulses), chunk)
    return [chunk] * full + ([rest] if rest else [])


def bernoulli_positions(rng: np.random.Generator, n: int, p: float) -> np.ndarray:
    """Sorted indices in ``range(n)`` of Bernoulli(p) successes, via geometric gaps."""
    if p <= 0.0 or n == 0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(n, dtype=np.int64)
    parts = []
    pos = -1
    batch = int(n * p + 6.0 * np.sqrt(n * p) + 16)
    while pos < n:
        gaps = rng.geometric(p, size=batch)
        # tiny p overflows int64; any gap past n ends the sweep, so clamping is exact
        gaps = np.where(gaps <= 0, n + 1, np.minimum(gaps, n + 1))
        idx = pos + np.cumsum(gaps)
        pos = int(idx[-1])
        parts.append(idx)
    idx = np.concatenate(parts)
    return idx[idx < n]


@dataclass(frozen=True, eq=False)
class PairSample:
    """Sparse per-mode pair numbers: entry k is ``counts[k]`` pairs in ``mode[k]`` at ``pulse[k]``."""

    pulses: int
    n_modes: int
    pulse: np.ndarray
    mode: np.ndarray
    counts: np.ndarray

    def totals(self) -> tuple[np.ndarray, np.ndarray]:
        """(pulse indices with pairs, total pairs there), pulse indices ascending."""
        if self.pulse.size == 0:
            return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
        idx, inv = np.unique(self.pulse, return_inverse=True)
        return idx, np.bincount(inv, weights=self.counts, minlength=idx.size).astype(np.int64)

    def mode_moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-mode sample mean and variance over all pulses."""
        s1 = np.bincount(self.mode, weights=self.counts, minlength=self.n_modes)
        s2 = np.bincount(self.mode, weights=self.counts.astype(float) ** 2, minlength=self.n_modes)
        mean = s1 / self.pulses
        return mean, s2 / self.pulses - mean * mean

    def dense(self) -> np.ndarray:
        """(pulses, modes) array; only sensible for small runs."""
        out = np.zeros((self.pulses, self.n_modes), dtype=np.int64)
        out[self.pulse, self.mode] = self.counts
        return out


def thermal_pair_sample(source: SourceModel, pulses: int, rng: np.random.Generator) -> PairSample:
    """Independent thermal pair numbers per Schmidt mode for ``pulses`` pulses.

    Pulses with n_j >= 1 are located with geometric gaps (success probability
    mu_j / (1 + mu_j)); given n_j >= 1, n_j is geometric on {1, 2, ...} with
    success probability 1 / (1 + mu_j), by memorylessness of the thermal law.
    """
    pulse_parts, mode_parts, count_parts = [], [], []
    for j, mu in enumerate(source.mode_means):
        if mu <= 0.0:
            continue
        pos = bernoulli_positions(rng, pulses, mu / (1.0 + mu))
        if pos.size == 0:
            continue
        pulse_parts.append(pos)
        mode_parts.append(np.full(pos.size, j, dtype=np.int64))
        count_parts.append(rng.geometric(1.0 / (1.0 + mu), size=pos.size).astype(np.int64))
    if not pulse_parts:
        empty = np.empty(0, dtype=np.int64)
        return PairSample(pulses, source.weights.size, empty, empty, empty)
    return PairSample(
        pulses,
        source.weights.size,
        np.concatenate(pulse_parts),
        np.concatenate(mode_parts),
        np.concatenate(count_parts),
    )


@dataclass(frozen=True, eq=False)
class PulseBatch:
    """Detection outcome of a block of pulses, stored sparsely.

    Pulses absent from ``index`` produced no pairs and no clicks.  For listed
    pulses: total pairs, surviving herald photons, surviving signal photons
    and how many of those took splitter output 1, plus the click bit mask.
    """

    pulses: int
    index: np.ndarray
    pairs: np.ndarray
    herald_photons: np.ndarray
    signal_photons: np.ndarray
    split_photons: np.ndarray
    pattern: np.ndarray

    def pattern_counts(self) -> np.ndarray:
        counts = np.bincount(self.pattern, minlength=N_PATTERNS).astype(np.int64)
        counts[0] += self.pulses - self.index.size
        return counts

    def clicks(self, detector: int) -> np.ndarray:
        out = np.zeros(self.pulses, dtype=bool)
        out[self.index] = (self.pattern & detector) != 0
        return out

    def rows(self, limit: int = 100_000):
        """Per-pulse debug rows (pulse, pairs, herald, signal, split, H, I, I1, I2) for listed pulses."""
        n = min(limit, self.index.size)
        p = self.pattern[:n]
        return np.column_stack([
            self.index[:n], self.pairs[:n], self.herald_photons[:n], self.signal_photons[:n],
            self.split_photons[:n], (p & H) > 0, (p & I) > 0, (p & I1) > 0, (p & I2) > 0,
        ]).astype(np.int64)


def detect_pulses(source: SourceModel, sample: PairSample, rng: np.random.Generator) -> PulseBatch:
    """Apply channel loss, the signal splitter, backgrounds and binary detection.

    Each photon draws its own uniforms (herald survival, signal survival,
    splitter port), so outcomes are monotone in the efficiencies for a fixed
    random stream.
    """
    idx, totals = sample.totals()
    n_ph = int(totals.sum())
    owner = np.repeat(np.arange(idx.size), totals)
    u = rng.random((n_ph, 3))
    h_ok = u[:, 0] < source.herald_efficiency
    s_ok = u[:, 1] < source.signal_transmission
    to1 = s_ok & (u[:, 2] < 0.5)
    herald = np.bincount(owner, weights=h_ok, minlength=idx.size).astype(np.int64)
    signal = np.bincount(owner, weights=s_ok, minlength=idx.size).astype(np.int64)
    split = np.bincount(owner, weights=to1, minlength=idx.size).astype(np.int64)
    pattern = (
        np.where(herald > 0, H, 0)
        | np.where(signal > 0, I, 0)
        | np.where(split > 0, I1, 0)
        | np.where(signal - split > 0, I2, 0)
    ).astype(np.uint8)

    # background clicks, independently per detector
    bg_idx, bg_bits = [], []
    for det, b in ((H, source.herald_background), (I, source.signal_background),
                   (I1, source.signal_background), (I2, source.signal_background)):
        pos = bernoulli_positions(rng, sample.pulses, b)
        bg_idx.append(pos)
        bg_bits.append(np.full(pos.size, det, dtype=np.uint8))
    bg_idx = np.concatenate(bg_idx)
    if bg_idx.size:
        bg_bits = np.concatenate(bg_bits)
        all_idx = np.union1d(idx, bg_idx)
        merged = np.zeros(all_idx.size, dtype=np.uint8)
        at = np.searchsorted(all_idx, idx)
        merged[at] = pattern
        np.bitwise_or.at(merged, np.searchsorted(all_idx, bg_idx), bg_bits)

        def spread(x):
            out = np.zeros(all_idx.size, dtype=np.int64)
            out[at] = x
            return out

        idx, totals, herald, signal, split = all_idx, spread(totals), spread(herald), spread(signal), spread(split)
        pattern = merged
    return PulseBatch(sample.pulses, idx, totals, herald, signal, split, pattern)


def simulate_chunk(source: SourceModel, pulses: int, seed: int, chunk: int, stream: int = 0) -> PulseBatch:
    rng = chunk_rng(seed, chunk, stream)
    return detect_pulses(source, thermal_pair_sample(source, pulses, rng), rng)


def simulate_source(source: SourceModel, pulses: int, seed: int, stream: int = 0,
                    workers: int = 1) -> np.ndarray:
    """Monte Carlo click-pattern histogram (length 16) of one source."""
    sizes = chunk_sizes(pulses)

    def job(c):
        return simulate_chunk(source, sizes[c], seed, c, stream).pattern_counts()

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(job, range(len(sizes))))
    else:
        parts = [job(c) for c in range(len(sizes))]
    return np.sum(parts, axis=0) if parts else np.zeros(N_PATTERNS, dtype=np.int64)


# ---------------------------------------------------------------------------
# Truncated-Fock oracle


def thermal_pmf(mu: float, cutoff: int) -> np.ndarray:
    """Thermal probabilities P(n) for n = 0..cutoff (not renormalised)."""
    n = np.arange(cutoff + 1)
    return (1.0 / (1.0 + mu)) * (mu / (1.0 + mu)) ** n


def total_pair_pmf(mode_means, cutoff: int) -> np.ndarray:
    """Distribution of the total pair number, exact for n <= cutoff.

    Each mode is truncated at ``cutoff``; since a total of n <= cutoff needs
    every n_j <= cutoff, the convolution is exact on that range.
    """
    out = np.zeros(cutoff + 1)
    out[0] = 1.0
    for mu in np.asarray(mode_means, dtype=float):
        if mu <= 0.0:
            continue
        out = np.convolve(out, thermal_pmf(mu, cutoff))[: cutoff + 1]
    return out


@dataclass(frozen=True, eq=False)
class ClickDistribution:
    """Exact per-pulse probabilities of the 16 click patterns of one source."""

    probabilities: np.ndarray
    truncated_mass: float = 0.0
    meta: dict = field(default_factory=dict)

    def probability(self, require: int, forbid: int = 0) -> float:
        """P(all detectors in ``require`` click and none in ``forbid`` click)."""
        pats = np.arange(N_PATTERNS)
        sel = ((pats & require) == require) & ((pats & forbid) == 0)
        return float(self.probabilities[sel].sum())


def _silent_pair_factor(silent: int, eta_h: float, eta_s: float) -> float:
    """Probability that one pair leaves every detector in ``silent`` dark."""
    f = (1.0 - eta_h) if silent & H else 1.0
    if silent & I or (silent & I1 and silent & I2):
        f *= 1.0 - eta_s
    elif silent & (I1 | I2):
        f *= 1.0 - 0.5 * eta_s
    return f


def _background_factor(silent: int, b_h: float, b_s: float) -> float:
    f = (1.0 - b_h) if silent & H else 1.0
    for det in (I, I1, I2):
        if silent & det:
            f *= 1.0 - b_s
    return f


def silent_probabilities(source: SourceModel, pair_pmf: np.ndarray) -> np.ndarray:
    """P(every detector in mask S is dark), for all 16 masks S."""
    n = np.arange(pair_pmf.size)
    eh, es = source.herald_efficiency, source.signal_transmission
    out = np.empty(N_PATTERNS)
    for s in range(N_PATTERNS):
        q = _silent_pair_factor(s, eh, es)
        out[s] = _background_factor(s, source.herald_background, source.signal_background) * np.sum(pair_pmf * q**n)
    return out


def patterns_from_silent(silent: np.ndarray) -> np.ndarray:
    """Exact pattern probabilities from silent-set probabilities by inclusion-exclusion."""
    full = N_PATTERNS - 1
    out = np.zeros(N_PATTERNS)
    for fired in range(N_PATTERNS):
        dark = full & ~fired
        total = 0.0
        sub = fired
        while True:
            sign = -1.0 if bin(sub).count("1") % 2 else 1.0
            total += sign * silent[dark | sub]
            if sub == 0:
                break
            sub = (sub - 1) & fired
        out[fired] = total
    return np.clip(out, 0.0, None)


def exact_click_distribution(source: SourceModel, cutoff: int = 12) -> ClickDistribution:
    """Click-pattern probabilities from the thermal law truncated at ``cutoff`` total pairs."""
    if cutoff < 1:
        raise ValueError("cutoff must be at least 1")
    pmf = total_pair_pmf(source.mode_means, cutoff)
    probs = patterns_from_silent(silent_probabilities(source, pmf))
    return ClickDistribution(probs, float(max(0.0, 1.0 - pmf.sum())), {"cutoff": cutoff})


def generating_function_distribution(source: SourceModel) -> ClickDistribution:
    """Untruncated pattern probabilities via the thermal generating function.

    Independent of :func:`exact_click_distribution` (no Fock enumeration);
    used to cross-check it.
    """
    eh, es = source.herald_efficiency, source.signal_transmission
    silent = np.empty(N_PATTERNS)
    for s in range(N_PATTERNS):
        thin = 1.0 - _silent_pair_factor(s, eh, es)
        silent[s] = _background_factor(s, source.herald_background, source.signal_background) * \
            no_photon_probability(source.mode_means, thin)
    return ClickDistribution(patterns_from_silent(silent))
