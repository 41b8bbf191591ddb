"""Dense surface operators on panelized curves: Hilbert transform, arc-length
derivative and the Laplace double layer.

The Hilbert kernel K^H(x, y) = (x - y).tau(y) / (pi |x - y|^2) is split as

    K^H = P(s_x - s_y) + [K^H - P],    P(sigma) = (1/L) cot(pi sigma / L),

where P is the periodized Cauchy kernel in arc length.  P acts on Fourier
modes exp(2 pi i m s / L) as the multiplier -i sign(m); it is applied on an
equispaced arc-length grid with twice as many points as panel nodes.  The
remainder is bounded, vanishes on the diagonal and is integrated with the
panel weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import Panelization

OVERSAMPLE = 2


@dataclass(frozen=True)
class SurfaceOperator:
    """Node-to-node matrix, block diagonal over components."""

    matrix: np.ndarray
    tag: str
    blocks: tuple[slice, ...]

    def __matmul__(self, other):
        if isinstance(other, SurfaceOperator):
            return SurfaceOperator(self.matrix @ other.matrix, f"{self.tag}*{other.tag}", self.blocks)
        return self.matrix @ other


def _parts(p) -> list[Panelization]:
    if isinstance(p, Panelization):
        return [p]
    parts = list(p)
    if not parts or not all(isinstance(q, Panelization) for q in parts):
        raise TypeError("expected a Panelization or a sequence of them")
    return parts


def _block_diag(mats: Sequence[np.ndarray], tag: str) -> SurfaceOperator:
    n = sum(m.shape[0] for m in mats)
    out = np.zeros((n, n), dtype=mats[0].dtype)
    blocks, i = [], 0
    for m in mats:
        sl = slice(i, i + m.shape[0])
        out[sl, sl] = m
        blocks.append(sl)
        i += m.shape[0]
    return SurfaceOperator(out, tag, tuple(blocks))


def _spectral(p: Panelization, multiplier) -> np.ndarray:
    """Nodes -> equispaced grid -> Fourier multiplier -> nodes."""
    M = OVERSAMPLE * p.n
    sg = p.length * np.arange(M) / M
    theta = p.param_at_arclength(sg)
    theta[0] = 0.0
    E = p.interp_matrix(theta)
    m = np.fft.fftfreq(M, 1.0 / M)
    mult = multiplier(m)
    if M % 2 == 0:
        mult[M // 2] = 0.0
    coef = np.fft.fft(E, axis=0) / M
    phase = np.exp(2j * np.pi * np.outer(p.s, m) / p.length)
    return ((phase * mult[None, :]) @ coef).real


def _self_chords(p: Panelization) -> np.ndarray:
    t = p.t
    return p.curve.chord(np.repeat(t, t.size), np.tile(t, t.size)).reshape(t.size, t.size, 2)


def _hilbert_block(p: Panelization) -> np.ndarray:
    L = p.length
    spec = _spectral(p, lambda m: -1j * np.sign(m))
    r = _self_chords(p)
    R2 = np.sum(r * r, axis=-1)
    np.fill_diagonal(R2, 1.0)
    kh = np.sum(r * p.tau[None, :, :], axis=-1) / (np.pi * R2)
    sig = p.s[:, None] - p.s[None, :]
    with np.errstate(divide="ignore"):
        cauchy = 1.0 / (L * np.tan(np.pi * sig / L))
    rem = kh - cauchy
    np.fill_diagonal(rem, 0.0)
    return spec + rem * p.weights[None, :]


def hilbert_matrix(p) -> SurfaceOperator:
    """Principal-value Hilbert transform, one block per component."""
    return _block_diag([_hilbert_block(q) for q in _parts(p)], "H")


def dds_matrix(p) -> SurfaceOperator:
    """Arc-length derivative by spectral differentiation per component."""
    mats = [_spectral(q, lambda m, L=q.length: 2j * np.pi * m / L) for q in _parts(p)]
    return _block_diag(mats, "dds")


def _dlp_block(p: Panelization) -> np.ndarray:
    r = _self_chords(p)
    R2 = np.sum(r * r, axis=-1)
    np.fill_diagonal(R2, 1.0)
    k = np.sum(r * p.nrm[None, :, :], axis=-1) / (2.0 * np.pi * R2)
    np.fill_diagonal(k, -p.kappa / (4.0 * np.pi))
    return k * p.weights[None, :]


def laplace_dlp_matrix(p) -> SurfaceOperator:
    """On-surface Laplace double layer with kernel (x - y).n(y) / (2 pi |x - y|^2).

    Only the self-interaction of each component is assembled, matching the
    per-component use in the free-plate system.
    """
    return _block_diag([_dlp_block(q) for q in _parts(p)], "D")
