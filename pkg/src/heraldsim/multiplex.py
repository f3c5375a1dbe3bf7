"""Spatial multiplexing of heralded sources through a tree of 2x1 switches.

Every pulse, all sources are sampled; the herald clicks decide which source's
signal arm the switch tree connects to the output.  Results are kept as a
joint histogram over (herald bit mask, output signal pattern), from which all
named coincidence counts follow.  When no source heralds the switches stay
in their idle state, which connects source 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import ConfigError, EstimatorError
from .statistics import (
    CHUNK_PULSES, H, I, I1, I2, N_PATTERNS, SIGNAL_BITS, TIEBREAK_STREAM,
    SourceModel, chunk_rng, chunk_sizes, db_to_transmission, exact_click_distribution,
    simulate_chunk,
)

POLICIES = ("priority", "random")


@dataclass(frozen=True)
class SwitchNetwork:
    """Binary tree of 2x1 switches in front of a single output.

    Losses are in dB and apply to the signal arm of whichever source is
    routed: ``stages`` switch passes, one delay line and one polariser.
    ``priority``: the highest-index heralding source is transmitted.
    ``random``: ties are broken uniformly at random.
    """

    n_sources: int = 2
    switch_loss_db: float = 1.0
    delay_loss_db: float = 0.0
    polariser_loss_db: float = 1.0
    policy: str = "priority"
    path_stages: int | None = None  # switch passes on the signal path; default log2(n_sources)

    def __post_init__(self):
        n = self.n_sources
        if n < 1 or n & (n - 1):
            raise ConfigError(f"source count must be a power of two, got {n}")
        for name in ("switch_loss_db", "delay_loss_db", "polariser_loss_db"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0 dB")
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown routing policy {self.policy!r}; expected one of {POLICIES}")

    @property
    def stages(self) -> int:
        if self.path_stages is not None:
            return self.path_stages
        return int(self.n_sources).bit_length() - 1

    @property
    def loss_db(self) -> float:
        return self.stages * self.switch_loss_db + self.delay_loss_db + self.polariser_loss_db

    @property
    def transmission(self) -> float:
        return db_to_transmission(self.loss_db)

    def single_path(self) -> "SwitchNetwork":
        """A one-source view with the same path loss as the full tree."""
        return SwitchNetwork(1, self.switch_loss_db, self.delay_loss_db, self.polariser_loss_db,
                             self.policy, self.stages)


def route_priority(heralds: np.ndarray) -> np.ndarray:
    """Routed source per pulse from herald bit masks: highest set bit, else 0."""
    h = np.asarray(heralds, dtype=np.int64)
    out = np.zeros(h.shape, dtype=np.int64)
    nz = h > 0
    out[nz] = np.floor(np.log2(h[nz])).astype(np.int64)
    return out


def _popcount(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    c = np.zeros(x.shape, dtype=np.int64)
    while np.any(x):
        c += x & 1
        x = x >> 1
    return c


def route_random(heralds: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Uniform choice among heralding sources, driven by uniforms ``u`` in [0, 1)."""
    h = np.asarray(heralds, dtype=np.int64)
    out = route_priority(h)
    k = _popcount(h)
    multi = np.nonzero(k > 1)[0]
    for p in multi:
        bits = [b for b in range(int(h[p]).bit_length()) if h[p] >> b & 1]
        out[p] = bits[int(u[p] * len(bits))]
    return out


@dataclass(frozen=True, eq=False)
class MuxRunRecord:
    """Joint histogram ``counts[herald_mask, signal_pattern]`` of a (multiplexed) run.

    ``herald_mask`` has bit k set when source k heralded; ``signal_pattern``
    holds the I/I1/I2 bits of the output detectors (shifted down by one, so
    I=1, I1=2, I2=4).  Counts may be expected values (floats) when the record
    comes from an exact distribution.
    """

    pulses: float
    n_sources: int
    counts: np.ndarray

    def __post_init__(self):
        if self.counts.shape != (1 << self.n_sources, 8):
            raise ValueError("histogram shape does not match the source count")

    def total(self, herald_any_of: int | None = None, herald_all_of: int = 0, signal: int = 0) -> float:
        """Pulses whose herald mask contains ``herald_all_of`` (and meets ``herald_any_of``)
        and whose output fired every detector in ``signal`` (I/I1/I2 bit values)."""
        masks = np.arange(1 << self.n_sources)
        sel_h = (masks & herald_all_of) == herald_all_of
        if herald_any_of is not None:
            sel_h &= (masks & herald_any_of) != 0
        sig = signal >> 1
        sel_s = (np.arange(8) & sig) == sig
        return float(self.counts[np.ix_(sel_h, sel_s)].sum())

    def named_counts(self) -> dict:
        """Counts named after the coincidence-counting quantities.

        ``H`` means "at least one source heralded".  Per-source herald singles
        and herald-output coincidences are ``H<k>`` and ``H<k>I`` (1-based),
        and ``H1H2I`` is the two-source triple.
        """
        n = self.n_sources
        anyh = (1 << n) - 1
        c = {
            "H": self.total(herald_any_of=anyh),
            "I": self.total(signal=I),
            "I1": self.total(signal=I1),
            "I2": self.total(signal=I2),
            "I1I2": self.total(signal=I1 | I2),
            "HI": self.total(herald_any_of=anyh, signal=I),
            "HI1": self.total(herald_any_of=anyh, signal=I1),
            "HI2": self.total(herald_any_of=anyh, signal=I2),
            "HI1I2": self.total(herald_any_of=anyh, signal=I1 | I2),
        }
        for k in range(n):
            c[f"H{k + 1}"] = self.total(herald_all_of=1 << k)
            c[f"H{k + 1}I"] = self.total(herald_all_of=1 << k, signal=I)
        if n >= 2:
            c["H1H2I"] = self.total(herald_all_of=3, signal=I)
        return c

    def merge(self, other: "MuxRunRecord") -> "MuxRunRecord":
        if other.n_sources != self.n_sources:
            raise ValueError("cannot merge records with different source counts")
        return MuxRunRecord(self.pulses + other.pulses, self.n_sources, self.counts + other.counts)

    def to_dict(self) -> dict:
        return {
            "pulses": self.pulses,
            "n_sources": self.n_sources,
            "histogram": self.counts.tolist(),
            "counts": self.named_counts(),
        }


def _record_from_patterns(heralds: np.ndarray, signal: np.ndarray, n: int, pulses, dtype) -> MuxRunRecord:
    flat = heralds.astype(np.int64) * 8 + (signal.astype(np.int64) >> 1)
    counts = np.bincount(flat, minlength=(1 << n) * 8).astype(dtype).reshape(1 << n, 8)
    return MuxRunRecord(pulses, n, counts)


def _mux_chunk(sources, network, size, seed, chunk, streams):
    n = len(sources)
    batches = [simulate_chunk(s, size, seed, chunk, stream) for s, stream in zip(sources, streams)]
    idx = np.unique(np.concatenate([b.index for b in batches]))
    pats = np.zeros((n, idx.size), dtype=np.int64)
    for k, b in enumerate(batches):
        pats[k, np.searchsorted(idx, b.index)] = b.pattern
    heralds = np.zeros(idx.size, dtype=np.int64)
    for k in range(n):
        heralds |= (pats[k] & H) << k
    if network.policy == "random":
        u = np.zeros(idx.size)
        multi = np.nonzero(_popcount(heralds) > 1)[0]
        u[multi] = chunk_rng(seed, chunk, TIEBREAK_STREAM).random(multi.size)
        routed = route_random(heralds, u)
    else:
        routed = route_priority(heralds)
    signal = pats[routed, np.arange(idx.size)] & SIGNAL_BITS
    rec = _record_from_patterns(heralds, signal, n, size, np.int64)
    rec.counts[0, 0] += size - idx.size
    return rec


def run_multiplexed(sources: list[SourceModel], network: SwitchNetwork, pulses: int, seed: int,
                    streams: list[int] | None = None) -> MuxRunRecord:
    """Monte Carlo of ``len(sources)`` sources behind ``network``.

    Source k draws from random stream ``streams[k]`` (default k), so a
    single-source run on the same stream sees identical photons.
    """
    if len(sources) != network.n_sources:
        raise ConfigError(f"{len(sources)} sources configured for a {network.n_sources}-input switch network")
    if pulses < 1:
        raise ValueError("pulses must be >= 1")
    streams = list(range(len(sources))) if streams is None else list(streams)
    t = network.transmission
    routed = [s.attenuate_signal(t) for s in sources]
    rec = None
    for c, size in enumerate(chunk_sizes(pulses, CHUNK_PULSES)):
        part = _mux_chunk(routed, network, size, seed, c, streams)
        rec = part if rec is None else rec.merge(part)
    return rec


def run_single_source(source: SourceModel, network: SwitchNetwork, pulses: int, seed: int,
                      stream: int = 0) -> MuxRunRecord:
    """One source through the same signal path loss as the multiplexed output."""
    return run_multiplexed([source], network.single_path(), pulses, seed, [stream])


def exact_mux_distribution(sources: list[SourceModel], network: SwitchNetwork, cutoff: int = 12,
                           pulses: float = 1.0) -> MuxRunRecord:
    """Expected histogram (probabilities times ``pulses``) from per-source exact distributions."""
    if len(sources) != network.n_sources:
        raise ConfigError(f"{len(sources)} sources configured for a {network.n_sources}-input switch network")
    t = network.transmission
    dists = [exact_click_distribution(s.attenuate_signal(t), cutoff).probabilities for s in sources]
    n = len(sources)
    # split each source's table into (herald bit, signal bits)
    tables = []
    for p in dists:
        tab = np.zeros((2, 8))
        for pat in range(N_PATTERNS):
            tab[pat & H, (pat & SIGNAL_BITS) >> 1] += p[pat]
        tables.append(tab)
    counts = np.zeros((1 << n, 8))
    for hbits in product((0, 1), repeat=n):
        mask = sum(b << k for k, b in enumerate(hbits))
        if network.policy == "random" and sum(hbits) > 1:
            choices = [k for k in range(n) if hbits[k]]
        else:
            choices = [int(route_priority(np.array([mask]))[0])]
        for r in choices:
            rest = np.prod([tables[k][hbits[k]].sum() for k in range(n) if k != r])
            counts[mask] += rest * tables[r][hbits[r]] / len(choices)
    return MuxRunRecord(pulses, n, counts * pulses)


def enhancement_factor(mux: MuxRunRecord, single: MuxRunRecord) -> float:
    """Heralded output rate of the multiplexed run over that of the single source."""
    if mux.pulses != single.pulses:
        raise ValueError("records must cover the same number of pulses")
    den = single.named_counts()["HI"]
    if den == 0:
        raise EstimatorError("single-source run has no heralded output counts")
    return mux.named_counts()["HI"] / den


def ideal_enhancement(p_herald: float, n_sources: int) -> float:
    """(1 - (1 - p)^N) / p for lossless identical sources."""
    return (1.0 - (1.0 - p_herald) ** n_sources) / p_herald
