"""Boundary data, off-surface evaluation, far fields and jump probes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import Panelization, closest_parameter, inside
from .greens import GreensDerivs, greens_from_r
from .kernels import (
    BCKind,
    DerivedCoefficients,
    MaterialParams,
    PairGeometry,
    Side,
    _B1,
    _B2,
    contract,
    frames_at,
    frames_of,
    jump_matrix,
    pair_geometry,
    point_targets,
    raw_kernels,
    rep_kernels,
)
from .quadrature import adaptive_panel_integrate, lagrange_matrix
from .surfaceops import hilbert_matrix
from .system import DensitySolution

NEAR_TOL = 1e-12
EVAL_CHUNK = 40000

# boundary operators applied at x, as term tables in x directions
TRACES = {
    "clamped": ([(1.0, "")], [(1.0, "nx")]),
    "supported": ([(1.0, "")], list(_B1)),
    "free": (list(_B1), list(_B2)),
}


@dataclass(frozen=True)
class BoundaryData:
    f1: np.ndarray
    f2: np.ndarray
    kind: str

    def rhs(self) -> np.ndarray:
        out = np.empty(2 * len(self.f1), dtype=complex)
        out[0::2], out[1::2] = self.f1, self.f2
        return out


@dataclass(frozen=True)
class FarField:
    theta: np.ndarray
    f: np.ndarray
    R: float

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.f)

    @property
    def phase(self) -> np.ndarray:
        """Two-argument arctangent, in (-pi, pi]."""
        return np.angle(self.f)


def _parts(p) -> list[Panelization]:
    return [p] if isinstance(p, Panelization) else list(p)


def _node_frames(parts):
    pts = np.concatenate([q.pts for q in parts])
    return (pts, np.concatenate([q.nrm for q in parts]), np.concatenate([q.tau for q in parts]),
            np.concatenate([q.kappa for q in parts]))


def _apply_traces(bc: BCKind, mp: MaterialParams, P: GreensDerivs, nrm, tau, kappa):
    n = len(kappa)
    nan = np.full((n, 2), np.nan)
    pg = PairGeometry(P.r, np.sum(P.r**2, -1), *(np.zeros(n),) * 4, nrm, tau, nan, nan, kappa,
                      np.zeros(n), np.zeros(n))
    env = dict(nu=mp.nu, kx=kappa)
    t1, t2 = TRACES[BCKind(bc).value]
    return contract(P, t1, pg, env), contract(P, t2, pg, env)


def point_source_data(bc: BCKind, mp: MaterialParams, source, p, side: Side = Side.EXTERIOR) -> BoundaryData:
    """Boundary traces of G(., source); the source must lie off the solution domain."""
    bc, side = BCKind(bc), Side(side)
    mp.check(bc)
    parts = _parts(p)
    source = np.asarray(source, dtype=float)
    ins = bool(inside(parts, source[None, :])[0])
    if side is Side.EXTERIOR and not ins:
        raise ValueError("for the exterior problem the point source must lie inside a component")
    if side is Side.INTERIOR and ins:
        raise ValueError("for the interior problem the point source must lie outside the domain")
    pts, nrm, tau, kappa = _node_frames(parts)
    P = greens_from_r(pts - source[None, :], mp.k, 3)
    f1, f2 = _apply_traces(bc, mp, P, nrm, tau, kappa)
    return BoundaryData(f1, f2, "point_source")


def plane_wave_partials(k: float, direction, x: np.ndarray, nmax: int = 3) -> GreensDerivs:
    d = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(d) - 1.0) > 1e-12:
        raise ValueError("plane-wave direction must be a unit vector")
    u = np.exp(1j * k * (x @ d))
    P = np.zeros((nmax + 1, nmax + 1) + u.shape, dtype=complex)
    for i in range(nmax + 1):
        for j in range(nmax + 1 - i):
            P[i, j] = (1j * k * d[0]) ** i * (1j * k * d[1]) ** j * u
    return GreensDerivs(np.zeros_like(x), P)


def plane_wave(k: float, direction, x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return plane_wave_partials(k, direction, x, 0).value


def plane_wave_data(bc: BCKind, mp: MaterialParams, direction, p) -> BoundaryData:
    """Negative traces of exp(i k d.x), the scattering right-hand side."""
    bc = BCKind(bc)
    mp.check(bc)
    pts, nrm, tau, kappa = _node_frames(_parts(p))
    P = plane_wave_partials(mp.k, direction, pts)
    f1, f2 = _apply_traces(bc, mp, P, nrm, tau, kappa)
    return BoundaryData(-f1, -f2, "plane_wave")


# ---------------------------------------------------------------------------
# Layer potentials off the boundary


@dataclass(frozen=True)
class LayerDensities:
    """Per-component densities fed to each representation kernel."""

    parts: tuple[Panelization, ...]
    weights: dict  # kernel name -> tuple of node arrays, one per component


def layer_densities(bc: BCKind, mp: MaterialParams, side: Side, parts, rho1, rho2) -> LayerDensities:
    bc, side = BCKind(bc), Side(side)
    parts = tuple(_parts(parts))
    if bc is BCKind.FREE:
        bpm = DerivedCoefficients.from_params(mp, side).beta_pm
        hr = tuple(bpm * (hilbert_matrix(q).matrix @ r) for q, r in zip(parts, rho1))
        return LayerDensities(parts, {"K1a": tuple(rho1), "K1b": hr, "K2": tuple(rho2)})
    return LayerDensities(parts, {"K1": tuple(rho1), "K2": tuple(rho2)})


class _Evaluator:
    """Sum of layer potentials at targets, with adaptive near-panel integration.

    With ``kernels`` set (name -> TERMS key) the x-frame of each target is
    used, so the result is a boundary operator applied to the potential.
    """

    def __init__(self, bc, mp, dens: LayerDensities, kernels: dict | None = None, tol: float = NEAR_TOL):
        self.bc, self.mp, self.dens, self.kernels, self.tol = BCKind(bc), mp, dens, kernels, tol

    def _eval(self, pg: PairGeometry) -> dict:
        if self.kernels is None:
            return rep_kernels(self.bc, pg, self.mp)
        ks = raw_kernels(sorted(set(self.kernels.values())), pg, self.mp)
        return {n: ks[key] for n, key in self.kernels.items()}

    def _density_map(self):
        if self.kernels is None:
            return {n: n for n in self.dens.weights}
        return {n: n.split("_")[0] for n in self.kernels}

    def __call__(self, xf) -> np.ndarray:
        x = xf.pts
        dmap = self._density_map()
        total = np.zeros(len(x), dtype=complex)
        for c, p in enumerate(self.dens.parts):
            yf = frames_of(p)
            rows_per = max(1, EVAL_CHUNK // p.n)
            for s in range(0, len(x), rows_per):
                rows = np.arange(s, min(len(x), s + rows_per))
                ii = np.repeat(rows, p.n)
                jj = np.tile(np.arange(p.n), len(rows))
                pg = pair_geometry(xf.take(ii), yf.take(jj))
                ks = self._eval(pg)
                acc = 0.0
                for n, K in ks.items():
                    acc = acc + K * (self.dens.weights[dmap[n]][c] * p.weights)[jj]
                total[rows] += acc.reshape(len(rows), p.n).sum(axis=1)
            d = np.linalg.norm(x[:, None, :] - p.pts[None], axis=-1).reshape(len(x), p.n_panels, p.order)
            dmin = d.min(axis=-1)
            if np.any(dmin == 0.0):
                raise ValueError("evaluation point lies on the boundary")
            for i, q in zip(*np.nonzero(dmin < p.panel_lengths[None, :])):
                total[i] += self._near(xf, i, p, c, q, dmap) - self._plain(xf, i, p, c, q, dmap)
        return total

    def _plain(self, xf, i, p, c, q, dmap):
        cols = np.arange(q * p.order, (q + 1) * p.order)
        pg = pair_geometry(xf.take(np.full(cols.size, i)), frames_of(p).take(cols))
        ks = self._eval(pg)
        return sum(np.sum(K * self.dens.weights[dmap[n]][c][cols] * p.weights[cols]) for n, K in ks.items())

    def _near(self, xf, i, p, c, q, dmap):
        a, b = p.panel_bounds[q], p.panel_bounds[q + 1]
        cols = slice(q * p.order, (q + 1) * p.order)
        xi = xf.pts[i:i + 1]
        j0 = np.argmin(np.linalg.norm(p.pts[cols] - xi, axis=1))
        t_star = closest_parameter(p.curve, p.t[cols][j0:j0 + 1], xi)
        g_star = p.curve.position(t_star)
        d0 = xi - g_star

        def integrand(th):
            yq = frames_at(p.curve, th)
            r = d0 + p.curve.chord(np.full(th.size, t_star[0]), th)
            pg = pair_geometry(xf.take(np.full(th.size, i)), yq, r=r)
            ks = self._eval(pg)
            L = lagrange_matrix(p.ref_nodes, (2.0 * th - (a + b)) / (b - a))
            sp = np.abs(p.curve.zderivs(th, 1)[1])
            return sum(K * (L @ self.dens.weights[dmap[n]][c][cols]) for n, K in ks.items()) * sp

        return adaptive_panel_integrate(integrand, (a, b), tol=self.tol, order=16).value


def eval_field(solution: DensitySolution, bc: BCKind, mp: MaterialParams, side: Side, parts, points,
               tol: float = NEAR_TOL) -> np.ndarray:
    """u = K1[rho1] + K2[rho2] at points off the boundary."""
    parts = tuple(_parts(parts))
    dens = layer_densities(bc, mp, side, parts, solution.rho1, solution.rho2)
    return _Evaluator(bc, mp, dens, tol=tol)(point_targets(points))


def far_field(solution: DensitySolution, bc: BCKind, mp: MaterialParams, side: Side, parts,
              n_theta: int = 360, R: float = 1000.0) -> FarField:
    """f(theta) = sqrt(R) exp(-i k R) u_s(R cos theta, R sin theta)."""
    if Side(side) is not Side.EXTERIOR:
        raise ValueError("far fields are defined for the exterior problem only")
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    pts = R * np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    u = eval_field(solution, bc, mp, side, parts, pts)
    return FarField(theta, np.sqrt(R) * np.exp(-1j * mp.k * R) * u, R)


# ---------------------------------------------------------------------------
# Jump probes

PROBE_KERNELS = {
    # row -> kernel name -> TERMS key; names carry their density after "_"
    "clamped": ({"K1_": "cl11", "K2_": "cl12"}, {"K1_": "cl21", "K2_": "cl22"}),
    "supported": ({"K1_": "sp11", "K2_": "sp12"}, {"K1_": "sp21", "K2_": "sp22"}),
    "free": ({"K1a_": "fr11a", "K1b_": "fr11b", "K2_": "fr12"},
             {"K1a_": "fr21a", "K1b_": "fr21b", "K2_": "fr22"}),
}


class ExtrapolationFailure(RuntimeError):
    """Richardson estimates from successive triples disagree."""


EXTRAP_RTOL = 1e-3


def richardson(values: Sequence[float], ratio: float = 2.0) -> complex:
    """Three-point Richardson extrapolation to h -> 0 of values at h, h/r, h/r^2."""
    v0, v1, v2 = values[-3:]
    r1 = (ratio * v1 - v0) / (ratio - 1.0)
    r2 = (ratio * v2 - v1) / (ratio - 1.0)
    return (ratio**2 * r2 - r1) / (ratio**2 - 1.0)


def boundary_trace_limit(bc: BCKind, mp: MaterialParams, side: Side, p: Panelization, rho1, rho2,
                         node: int, row: int, which: str, h_sequence=None) -> tuple[complex, np.ndarray]:
    """Limit at x0 + h n(x0), h -> 0 on ``side``, of one boundary trace.

    ``row`` selects the first or second boundary operator, ``which`` the
    layer potential ("K1" or "K2").  Returns (extrapolated value, samples).
    """
    bc, side = BCKind(bc), Side(side)
    if h_sequence is None:
        h_sequence = [2.0 ** -j * float(p.panel_lengths.mean()) for j in range(3, 11)]
    h_sequence = np.asarray(h_sequence, dtype=float)
    if h_sequence.size < 4 or np.any(h_sequence <= 0) or np.any(np.diff(h_sequence) >= 0):
        raise ValueError("h_sequence must hold at least 4 positive, decreasing distances")
    h = side.sign * h_sequence
    dens = layer_densities(bc, mp, side, (p,), (np.asarray(rho1),), (np.asarray(rho2),))
    names = {n: key for n, key in PROBE_KERNELS[bc.value][row].items() if n.startswith(which)}
    if bc is BCKind.FREE and which == "K1":
        names = {n: key for n, key in names.items() if n.startswith(("K1a", "K1b"))}
    ev = _Evaluator(bc, mp, dens, kernels={n.rstrip("_"): key for n, key in names.items()})
    x0, n0 = p.pts[node], p.nrm[node]
    samples = []
    for hh in h:
        xf = frames_of(p).take(np.array([node]))
        xf = type(xf)(x0[None, :] + hh * n0[None, :], xf.tau, xf.nrm, xf.kappa, xf.dkappa)
        samples.append(ev(xf)[0])
    samples = np.asarray(samples)
    est, prev = richardson(samples), richardson(samples[:-1])
    if abs(est - prev) > EXTRAP_RTOL * max(1.0, abs(est)):
        raise ExtrapolationFailure(
            f"extrapolated limits {prev:.6g} and {est:.6g} disagree; samples: {np.array2string(samples, precision=6)}")
    return est, samples


def on_surface_values(bc: BCKind, mp: MaterialParams, side: Side, p: Panelization, sigma) -> dict:
    """On-surface (principal value) boundary operators applied to ``sigma``.

    Keys are (row, layer) with row 0/1 the boundary operator and layer
    "K1"/"K2".  Jump terms are not included.
    """
    from .kernels import BOUNDARY_NAMES
    from .system import _Block

    bc, side = BCKind(bc), Side(side)
    names = BOUNDARY_NAMES[bc.value]
    K = _Block(names, frames_of(p), p, mp, True).assemble()
    sigma = np.asarray(sigma, dtype=complex)
    if bc is not BCKind.FREE:
        k11, k12, k21, k22 = (K[n] @ sigma for n in names)
        return {(0, "K1"): k11, (0, "K2"): k12, (1, "K1"): k21, (1, "K2"): k22}
    dc = DerivedCoefficients.from_params(mp, side)
    H = hilbert_matrix(p).matrix
    hs = H @ sigma
    row0 = K["fr11a"] @ sigma + dc.beta_pm * (K["fr11bH"] @ hs - 0.5 * dc.beta * (H @ hs))
    row1 = K["fr21aHp"] @ sigma + dc.beta_pm * (K["fr21b"] @ hs)
    return {(0, "K1"): row0, (0, "K2"): K["fr12"] @ sigma, (1, "K1"): row1, (1, "K2"): K["fr22"] @ sigma}


def expected_jumps(bc: BCKind, mp: MaterialParams, side: Side, kappa) -> dict:
    """Jump coefficients (limit minus on-surface value, per unit density)."""
    bc, side = BCKind(bc), Side(side)
    sg = side.sign
    kappa = np.asarray(kappa, dtype=float)
    if bc is BCKind.FREE:
        return {(0, "K1"): -0.5 * sg + 0 * kappa, (0, "K2"): 0 * kappa,
                (1, "K1"): 0 * kappa, (1, "K2"): 0.5 * sg + 0 * kappa}
    D11, D12, D21, D22 = jump_matrix(bc, mp, side, kappa)
    return {(0, "K1"): D11, (0, "K2"): D12, (1, "K1"): D21, (1, "K2"): D22}


def jump_probe(bc: BCKind, mp: MaterialParams, p: Panelization, sigma, node: int, h_sequence=None) -> dict:
    """Measured and expected jumps at one node, both sides, all four traces.

    Returns {(side, row, layer): (measured, expected)} where measured is the
    extrapolated boundary limit minus the on-surface value, divided by
    sigma at the node.
    """
    bc = BCKind(bc)
    sigma = np.asarray(sigma, dtype=complex)
    zero = np.zeros_like(sigma)
    out = {}
    for side in (Side.EXTERIOR, Side.INTERIOR):
        onv = on_surface_values(bc, mp, side, p, sigma)
        exp = expected_jumps(bc, mp, side, p.kappa[node])
        for row in (0, 1):
            for layer in ("K1", "K2"):
                r1, r2 = (sigma, zero) if layer == "K1" else (zero, sigma)
                lim, _ = boundary_trace_limit(bc, mp, side, p, r1, r2, node, row, layer, h_sequence)
                out[(side.value, row, layer)] = ((lim - onv[(row, layer)][node]) / sigma[node],
                                                 float(exp[(row, layer)]))
    return out
