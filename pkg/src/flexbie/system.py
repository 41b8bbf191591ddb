"""Nystrom assembly and solution of the 2x2 boundary system.

Unknowns are interleaved per node, (rho1, rho2), and ordered component by
component.  Within a component every pair of nodes uses the self-interaction
kernels; the source panel holding the target and its two neighbours are
integrated with the log product rule, other panels closer than one panel
length are upsampled, and the rest use the panel weights.  Pairs across
components use the raw kernels with the same near/far rule.

The free plate assembles, per component,

    A11 = (-+1/2 +- beta^2/2) I + K11a + beta_pm (K11b + (beta/2) K^H) H - 2 beta beta_pm D^2
    A12 = K12
    A21 = (K21a - (beta/2) K^H') + beta_pm K21b H
    A22 = +-1/2 I + K22

with H the Hilbert transform and D the Laplace double layer of the source
component.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg
from scipy.linalg import lapack
from scipy.sparse.linalg import LinearOperator, gmres

from .geometry import Panelization, check_disjoint
from .kernels import (
    BOUNDARY_NAMES,
    COMBINED,
    BCKind,
    DerivedCoefficients,
    KernelEvaluator,
    MaterialParams,
    PairGeometry,
    Side,
    frames_at,
    frames_of,
    gap_interpolate,
    jump_matrix,
    pair_geometry,
    raw_kernels,
)
from .quadrature import lagrange_matrix, log_weights
from .surfaceops import hilbert_matrix, laplace_dlp_matrix

PAIR_CHUNK = 40000
MAX_UPSAMPLE = 64


class SolverFailure(RuntimeError):
    """The linear system could not be solved to the requested accuracy."""


def default_threads() -> int:
    env = os.environ.get("FLEXBIE_THREADS")
    if env:
        return max(1, int(env))
    return 1


@dataclass(frozen=True)
class BVProblem:
    parts: tuple[Panelization, ...]
    bc: BCKind
    side: Side
    mp: MaterialParams
    rhs: np.ndarray

    def __post_init__(self):
        parts = tuple(self.parts)
        object.__setattr__(self, "parts", parts)
        object.__setattr__(self, "bc", BCKind(self.bc))
        object.__setattr__(self, "side", Side(self.side))
        check_disjoint(parts)
        self.mp.check(self.bc)
        rhs = np.asarray(self.rhs, dtype=complex)
        if rhs.shape != (2 * self.n,):
            raise ValueError(f"rhs must have length 2N = {2 * self.n}, got {rhs.shape}")
        object.__setattr__(self, "rhs", rhs)

    @property
    def n(self) -> int:
        return sum(p.n for p in self.parts)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum([p.n for p in self.parts])])


@dataclass(frozen=True)
class DensitySolution:
    rho1: tuple[np.ndarray, ...]
    rho2: tuple[np.ndarray, ...]
    residual: float
    condition: float | None
    iterations: int | None = None
    x: np.ndarray = field(default=None, repr=False)


def interleave(f1: np.ndarray, f2: np.ndarray) -> np.ndarray:
    out = np.empty(2 * len(f1), dtype=complex)
    out[0::2], out[1::2] = f1, f2
    return out


def split_density(x: np.ndarray, parts: Sequence[Panelization]):
    off = np.concatenate([[0], np.cumsum([p.n for p in parts])])
    r1 = tuple(x[0::2][off[i]:off[i + 1]].copy() for i in range(len(parts)))
    r2 = tuple(x[1::2][off[i]:off[i + 1]].copy() for i in range(len(parts)))
    return r1, r2


# ---------------------------------------------------------------------------
# Quadrature for one (target set, source component) block


def _neighbour_panels(p: Panelization, panel: int) -> list[int]:
    return sorted({(panel - 1) % p.n_panels, panel, (panel + 1) % p.n_panels})


def _panel_distance(xt: np.ndarray, p: Panelization) -> np.ndarray:
    """Minimum node distance from each target to each panel, (n_targets, n_panels)."""
    d = np.linalg.norm(xt[:, None, :] - p.pts[None, :, :], axis=-1)
    return d.reshape(len(xt), p.n_panels, p.order).min(axis=-1)


def _log_coefficients(p: Panelization, i: int, panel: int) -> tuple[np.ndarray, np.ndarray]:
    """(source indices, c) with sum_j c_j q_j ~ int_panel q ln|y - x_i| ds_y."""
    a, b = p.panel_bounds[panel], p.panel_bounds[panel + 1]
    mid = 0.5 * (a + b)
    theta0 = mid + (p.t[i] - mid + np.pi) % (2.0 * np.pi) - np.pi
    t0 = (2.0 * theta0 - (a + b)) / (b - a)
    src = np.arange(panel * p.order, (panel + 1) * p.order)
    on = src == i
    if on.any():
        # snap to the node so the parameter wrap cannot leave a tiny offset
        t0 = float(p.ref_nodes[on][0])
    wl = log_weights(t0, p.order)
    dt = np.abs(p.ref_nodes - t0)
    chord = p.curve.chord(p.t[src], np.full(p.order, p.t[i]))
    ratio = np.empty(p.order)
    ratio[~on] = np.linalg.norm(chord[~on], axis=1) / dt[~on]
    ratio[on] = p.speed[i] * 0.5 * (b - a)
    half = 0.5 * (b - a) * p.speed[src]
    return src, half * (wl + p.ref_weights * np.log(ratio))


class _Block:
    """Integral operators from one source component to a set of targets."""

    def __init__(self, names, targets, source: Panelization, mp: MaterialParams, same: bool,
                 threads: int = 1):
        self.names = list(names)
        self.xf = targets
        self.p = source
        self.mp = mp
        self.same = same
        self.threads = threads

    def _kernels(self, pg: PairGeometry, split: bool = False, stable: bool = True):
        if self.same:
            ev = KernelEvaluator(pg, self.mp, split, stable)
            return {n: ev(n) for n in self.names}
        base = {n: COMBINED.get(n, (n,))[0] for n in self.names}
        ks = raw_kernels(sorted(set(base.values())), pg, self.mp)
        return {n: ks[base[n]] for n in self.names}

    def assemble(self) -> dict[str, np.ndarray]:
        p, nt = self.p, len(self.xf.pts)
        out = {n: np.zeros((nt, p.n), dtype=complex) for n in self.names}
        rows_per = max(1, PAIR_CHUNK // p.n)
        chunks = [np.arange(s, min(nt, s + rows_per)) for s in range(0, nt, rows_per)]
        yf = frames_of(p)

        def far(rows):
            ii = np.repeat(rows, p.n)
            jj = np.tile(np.arange(p.n), len(rows))
            ok = ~(self.same & (ii == jj))
            pg = pair_geometry(self.xf.take(ii[ok]), yf.take(jj[ok]))
            ks = self._kernels(pg)
            for n in self.names:
                out[n][ii[ok], jj[ok]] = ks[n] * p.weights[jj[ok]]

        if self.threads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(self.threads) as ex:
                list(ex.map(far, chunks))
        else:
            for rows in chunks:
                far(rows)
        dist = _panel_distance(self.xf.pts, p)
        if self.same:
            self._singular(out)
        self._upsampled(out, dist)
        return out

    def _singular(self, out):
        """Self and adjacent panels: psi with panel weights plus phi with log weights."""
        p = self.p
        tgt, src, coef = [], [], []
        for i in range(p.n):
            for q in _neighbour_panels(p, p.panel_of[i]):
                s, c = _log_coefficients(p, i, q)
                tgt.append(np.full(s.size, i))
                src.append(s)
                coef.append(c)
        tgt, src, coef = np.concatenate(tgt), np.concatenate(src), np.concatenate(coef)
        off = tgt != src
        yf = frames_of(p)
        pg = pair_geometry(self.xf.take(tgt[off]), yf.take(src[off]))
        ks = self._kernels(pg, split=True)

        def both(q):
            ev = self._kernels(q, split=True, stable=False)
            return np.stack([np.stack([ev[n][1], ev[n][2]]) for n in self.names])

        diag = gap_interpolate(both, p.curve, p.t, np.zeros(p.n))
        for k, n in enumerate(self.names):
            K, phi, psi = ks[n]
            full_psi = np.empty(tgt.size, dtype=complex)
            full_phi = np.empty(tgt.size, dtype=complex)
            full_psi[off], full_phi[off] = psi, phi
            full_phi[~off] = diag[k, 0][tgt[~off]]
            full_psi[~off] = diag[k, 1][tgt[~off]]
            out[n][tgt, src] = p.weights[src] * full_psi + coef * full_phi

    def _upsampled(self, out, dist):
        """Targets within one panel length of a non-adjacent source panel."""
        p = self.p
        for i in range(len(self.xf.pts)):
            skip = set(_neighbour_panels(p, p.panel_of[i])) if self.same else set()
            for q in np.nonzero(dist[i] < p.panel_lengths)[0]:
                if q in skip:
                    continue
                nsub = int(min(MAX_UPSAMPLE, max(2, np.ceil(2.0 * p.panel_lengths[q] / dist[i, q]))))
                a, b = p.panel_bounds[q], p.panel_bounds[q + 1]
                edges = np.linspace(a, b, nsub + 1)
                h = edges[1] - edges[0]
                th = (edges[:-1, None] + 0.5 * h * (p.ref_nodes[None, :] + 1.0)).ravel()
                yq = frames_at(p.curve, th)
                sp = np.abs(p.curve.zderivs(th, 1)[1])
                w = np.tile(p.ref_weights, nsub) * 0.5 * h * sp
                L = lagrange_matrix(p.ref_nodes, (2.0 * th - (a + b)) / (b - a))
                pg = pair_geometry(self.xf.take(np.full(th.size, i)), yq)
                ks = self._kernels(pg)
                cols = p.panel_slice(q)
                for n in self.names:
                    out[n][i, cols] = (ks[n] * w) @ L


# ---------------------------------------------------------------------------
# System assembly


def _block_matrices(bc: BCKind, side: Side, mp: MaterialParams, target: Panelization,
                    source: Panelization, same: bool, threads: int, H=None, D=None):
    """The four (nt, ns) blocks A11, A12, A21, A22 for one component pair."""
    names = BOUNDARY_NAMES[bc.value]
    if bc is BCKind.FREE and not same:
        names = ("fr11a", "fr11b", "fr12", "fr21a", "fr21b", "fr22")
    K = _Block(names, frames_of(target), source, mp, same, threads).assemble()
    if bc is not BCKind.FREE:
        a, b, c, d = (K[n] for n in names)
        if same:
            D11, D12, D21, D22 = jump_matrix(bc, mp, side, target.kappa)
            a = a + np.diag(D11)
            c = c + np.diag(D21)
            d = d + np.diag(D22)
        return a, b, c, d
    dc = DerivedCoefficients.from_params(mp, side)
    beta, bpm = dc.beta, dc.beta_pm
    if same:
        D11, _, _, D22 = jump_matrix(bc, mp, side, target.kappa)
        a11 = np.diag(D11) + K["fr11a"] + bpm * K["fr11bH"] @ H - 2.0 * beta * bpm * (D @ D)
        a21 = K["fr21aHp"] + bpm * K["fr21b"] @ H
        return a11, K["fr12"], a21, np.diag(D22) + K["fr22"]
    a11 = K["fr11a"] + bpm * K["fr11b"] @ H
    a21 = K["fr21a"] + bpm * K["fr21b"] @ H
    return a11, K["fr12"], a21, K["fr22"]


def assemble(problem: BVProblem, threads: int | None = None) -> np.ndarray:
    """Dense 2N x 2N Nystrom matrix with interleaved unknowns."""
    threads = default_threads() if threads is None else threads
    parts, off = problem.parts, problem.offsets
    n = problem.n
    A = np.zeros((2 * n, 2 * n), dtype=complex)
    Hs = Ds = [None] * len(parts)
    if problem.bc is BCKind.FREE:
        Hs = [hilbert_matrix(p).matrix for p in parts]
        Ds = [laplace_dlp_matrix(p).matrix for p in parts]
    for i, pt in enumerate(parts):
        for j, ps in enumerate(parts):
            blocks = _block_matrices(problem.bc, problem.side, problem.mp, pt, ps, i == j, threads,
                                     Hs[j], Ds[j])
            ri = slice(2 * off[i], 2 * off[i + 1])
            cj = slice(2 * off[j], 2 * off[j + 1])
            sub = A[ri, cj]
            sub[0::2, 0::2], sub[0::2, 1::2] = blocks[0], blocks[1]
            sub[1::2, 0::2], sub[1::2, 1::2] = blocks[2], blocks[3]
    return A


# ---------------------------------------------------------------------------
# Solvers


def _relres(A, x, b) -> float:
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(A @ x - b) / nb) if nb > 0 else float(np.linalg.norm(A @ x))


def solve_dense(A: np.ndarray, rhs: np.ndarray, parts: Sequence[Panelization] | None = None,
                hint: str = "") -> DensitySolution:
    """LU solve with a LAPACK 1-norm condition estimate."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    rhs = np.asarray(rhs, dtype=complex)
    with warnings.catch_warnings():
        # exact singularity is reported below through rcond
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        lu, piv = linalg.lu_factor(A.astype(complex), check_finite=True)
    anorm = np.linalg.norm(A, 1)
    rcond, info = lapack.zgecon(lu, anorm, norm="1")
    if info != 0 or not rcond > np.finfo(float).eps:
        raise SolverFailure(f"matrix is numerically singular (rcond = {rcond:.2e}). {hint}".strip())
    x = linalg.lu_solve((lu, piv), rhs)
    r1, r2 = split_density(x, parts) if parts is not None else ((x[0::2],), (x[1::2],))
    return DensitySolution(r1, r2, _relres(A, x, rhs), float(1.0 / rcond), None, x)


def solve_iterative(A: np.ndarray, rhs: np.ndarray, tol: float = 1e-12, max_iter: int = 500,
                    parts: Sequence[Panelization] | None = None) -> DensitySolution:
    """Restarted GMRES on the dense matvec."""
    if tol < 1e-13:
        raise ValueError("tol must be >= 1e-13")
    A = np.asarray(A)
    rhs = np.asarray(rhs, dtype=complex)
    split = (lambda x: split_density(x, parts)) if parts is not None else (lambda x: ((x[0::2],), (x[1::2],)))
    if not np.any(rhs):
        r1, r2 = split(np.zeros_like(rhs))
        return DensitySolution(r1, r2, 0.0, None, 0, np.zeros_like(rhs))
    count = [0]

    def cb(_):
        count[0] += 1

    op = LinearOperator(A.shape, matvec=lambda v: A @ v, dtype=complex)
    restart = min(A.shape[0], 200)
    x, info = gmres(op, rhs, rtol=tol, atol=0.0, restart=restart, maxiter=max_iter,
                    callback=cb, callback_type="pr_norm")
    res = _relres(A, x, rhs)
    if info != 0 and res > tol:
        raise SolverFailure(f"GMRES stopped after {count[0]} iterations with residual {res:.2e}")
    r1, r2 = split(x)
    return DensitySolution(r1, r2, res, None, count[0], x)


def solve(problem: BVProblem, method: str = "dense", tol: float = 1e-12, threads: int | None = None):
    """Assemble and solve; returns (matrix, DensitySolution)."""
    A = assemble(problem, threads)
    hint = ""
    if problem.bc is BCKind.SUPPORTED:
        hint = "The supported plate needs nu outside {-1, 3}."
    elif problem.bc is BCKind.FREE:
        hint = "The free plate needs beta^2 != 1."
    if method == "dense":
        return A, solve_dense(A, problem.rhs, problem.parts, hint)
    if method == "gmres":
        return A, solve_iterative(A, problem.rhs, tol, parts=problem.parts)
    raise ValueError(f"unknown method {method!r}")
