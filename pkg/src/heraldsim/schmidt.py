"""Schmidt decomposition of joint spectra, purity and spectral overlap."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateInputError, GridMismatchError
from .jsa import JointSpectralAmplitude

WEIGHT_CUTOFF = 1e-12
_RANK_RTOL = 1e-13


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Tournament schedule pairing every column with every other once; n even."""
    idx = list(range(n))
    rounds = []
    for _ in range(n - 1):
        top = np.array(idx[: n // 2])
        bottom = np.array(idx[n // 2:][::-1])
        rounds.append((top, bottom))
        idx = [idx[0], idx[-1]] + idx[1:-1]
    return rounds


def jacobi_svd(a, tol: float | None = None, max_sweeps: int = 60):
    """One-sided (Hestenes) Jacobi SVD of a tall or square matrix.

    Column pairs are orthogonalised in parallel rounds of a round-robin
    schedule; each round is a single vectorised update.  Returns ``(u, s, v)``
    with ``a = u @ diag(s) @ v.conj().T``, singular values descending.  The
    rotation order depends only on the shape, so results are deterministic.
    """
    w = np.array(a, dtype=complex)
    m, n = w.shape
    if m < n:
        v, s, u = jacobi_svd(w.conj().T, tol, max_sweeps)
        return u, s, v
    if tol is None:
        tol = max(m, n) * np.finfo(float).eps
    pad = n % 2
    if pad:
        w = np.hstack([w, np.zeros((m, 1), dtype=complex)])
    nn = w.shape[1]
    v = np.eye(nn, dtype=complex)
    rounds = _round_robin(nn)
    for _ in range(max_sweeps):
        rotated = False
        for p, q in rounds:
            wp, wq = w[:, p], w[:, q]
            alpha = np.einsum("ij,ij->j", wp.conj(), wp).real
            beta = np.einsum("ij,ij->j", wq.conj(), wq).real
            g = np.einsum("ij,ij->j", wp.conj(), wq)
            ag = np.abs(g)
            act = ag > tol * np.sqrt(alpha * beta)
            if not act.any():
                continue
            rotated = True
            if not act.all():
                p, q, wp, wq = p[act], q[act], wp[:, act], wq[:, act]
                alpha, beta, g, ag = alpha[act], beta[act], g[act], ag[act]
            phase = g / ag
            zeta = (beta - alpha) / (2.0 * ag)
            t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            sn = c * t
            w[:, p] = c * wp - sn * phase.conj() * wq
            w[:, q] = sn * phase * wp + c * wq
            vp, vq = v[:, p], v[:, q]
            v[:, p] = c * vp - sn * phase.conj() * vq
            v[:, q] = sn * phase * vp + c * vq
        if not rotated:
            break
    s = np.linalg.norm(w, axis=0)
    if pad:
        w, v, s = w[:, :n], v[:n, :n], s[:n]
    order = np.argsort(-s, kind="stable")
    s = s[order]
    w, v = w[:, order], v[:, order]
    nz = s > 0
    u = np.zeros_like(w)
    u[:, nz] = w[:, nz] / s[nz]
    return u, s, v


def truncated_svd(a):
    """Rank-revealing SVD: pivoted QR, then Jacobi on the significant rows of R.

    Rows of R below ``1e-13`` of the leading diagonal entry are dropped, which
    keeps near-null directions (numerical noise) out of the Jacobi sweeps.
    """
    a = np.asarray(a, dtype=complex)
    q, r, piv = scipy.linalg.qr(a, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    if d.size == 0 or d[0] == 0.0:
        raise DegenerateInputError("matrix is identically zero")
    rank = int(np.sum(d > _RANK_RTOL * d[0]))
    # r1 = y s x^H  =>  a[:, piv] = (q y) s x^H
    x, s, y = jacobi_svd(r[:rank, :].conj().T)
    u = q[:, :rank] @ y
    v = np.empty_like(x)
    v[piv, :] = x
    return u, s, v


@dataclass(frozen=True, eq=False)
class SchmidtDecomposition:
    """Schmidt weights and mode functions sampled on the JSA grid.

    Mode functions are normalised so that ``sum |xi|^2 * d_omega = 1``.
    """

    weights: np.ndarray
    signal_modes: np.ndarray  # (n_signal, n_modes)
    idler_modes: np.ndarray  # (n_idler, n_modes)
    signal_step: float
    idler_step: float
    norm: float = 1.0  # sqrt of the input's integrated intensity

    def reconstruct(self) -> np.ndarray:
        return self.norm * (self.signal_modes * np.sqrt(self.weights)) @ self.idler_modes.T

    def gram_deviation(self) -> float:
        dev = 0.0
        for modes, step in ((self.signal_modes, self.signal_step), (self.idler_modes, self.idler_step)):
            g = modes.conj().T @ modes * step
            dev = max(dev, float(np.max(np.abs(g - np.eye(g.shape[0])))))
        return dev


def schmidt_decompose(jsa: JointSpectralAmplitude) -> SchmidtDecomposition:
    """Schmidt-decompose a joint spectral amplitude.

    The amplitude is weighted by the square root of the grid cell area so the
    discrete SVD matches the continuous inner product.  Weights are squared
    singular values renormalised to unit sum.
    """
    g = jsa.grid
    a = np.asarray(jsa.amplitude, dtype=complex)
    if not np.any(a):
        raise DegenerateInputError("joint spectral amplitude is identically zero")
    m = a * np.sqrt(g.cell_area)
    u, s, v = truncated_svd(m)
    total = float(np.sum(s * s))
    lam = s * s / total
    xi = u / np.sqrt(g.signal_step)
    zeta = v.conj() / np.sqrt(g.idler_step)
    return SchmidtDecomposition(lam, xi, zeta, g.signal_step, g.idler_step, float(np.sqrt(total)))


def cooperativity(d: SchmidtDecomposition, cutoff: float = WEIGHT_CUTOFF) -> float:
    """Effective number of Schmidt modes, 1 / sum(weights^2), ignoring weights below ``cutoff``."""
    w = d.weights[d.weights >= cutoff]
    w = w / w.sum()
    return float(1.0 / np.sum(w * w))


def heralded_purity(d: SchmidtDecomposition, cutoff: float = WEIGHT_CUTOFF) -> float:
    return 1.0 / cooperativity(d, cutoff)


def predicted_g2m(d: SchmidtDecomposition, cutoff: float = WEIGHT_CUTOFF) -> float:
    """Marginal second-order coherence 1 + 1/K of either photon."""
    return 1.0 + heralded_purity(d, cutoff)


def reconstruction_error(jsa: JointSpectralAmplitude, d: SchmidtDecomposition) -> float:
    a = np.asarray(jsa.amplitude, dtype=complex)
    return float(np.linalg.norm(d.reconstruct() - a) / np.linalg.norm(a))


def spectral_overlap(a: JointSpectralAmplitude, b: JointSpectralAmplitude) -> float:
    """Normalised inner product of two joint-spectrum magnitudes on the same grid.

    ``(sum |A||B| dA)^2 / (sum |A|^2 dA * sum |B|^2 dA)``; 1 for identical
    spectra, 0 for disjoint support.
    """
    if a.grid != b.grid:
        raise GridMismatchError("spectral overlap needs identical grids")
    ma, mb = np.abs(a.amplitude), np.abs(b.amplitude)
    da = a.grid.cell_area
    num = (np.sum(ma * mb) * da) ** 2
    den = np.sum(ma * ma) * da * np.sum(mb * mb) * da
    if den == 0:
        raise DegenerateInputError("overlap of an all-zero spectrum")
    return float(num / den)


def schmidt_report(jsa: JointSpectralAmplitude, n_weights: int = 16) -> dict:
    """JSON-ready summary: purity from the complex amplitude, from |f| and from |f|^2.

    Intensity-only measurements cannot see the spectral phase, so the
    magnitude-based figures are upper bounds on the true purity.
    """
    d = schmidt_decompose(jsa)
    k = cooperativity(d)
    report = {
        "weights": [float(x) for x in d.weights[:n_weights]],
        "K": k,
        "purity": 1.0 / k,
        "g2m_predicted": 1.0 + 1.0 / k,
        "reconstruction_error": reconstruction_error(jsa, d),
    }
    a = jsa.amplitude
    # an amplitude read back from a JSI file is already |f|; skip the duplicate decomposition
    phaseless = not np.iscomplexobj(a) or not np.any(a.imag)
    phaseless = phaseless and bool(np.all(a.real >= 0))
    for label, amp in (("magnitude", np.abs(a)), ("intensity", np.abs(a) ** 2)):
        if label == "magnitude" and phaseless:
            km = k
        else:
            km = cooperativity(schmidt_decompose(JointSpectralAmplitude(jsa.grid, amp)))
        report[f"K_{label}"] = km
        report[f"purity_{label}"] = 1.0 / km
        report[f"purity_{label}_is_upper_bound"] = True
    return report
