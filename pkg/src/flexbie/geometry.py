"""Smooth closed curves and their panel discretizations.

Curves are stored in complex form z(t) = x(t) + i y(t) on t in [0, 2pi),
traversed counterclockwise.  The outward normal is n = -i tau and the
curvature is signed so that a circle of radius r has kappa = +1/r.  With
these conventions the arc-length Taylor expansion reads

    gamma(t + s) = gamma + s tau - (s^2/2) kappa n - (s^3/6)(kappa' n + kappa^2 tau) + O(s^4).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .quadrature import cumulative_matrix, lagrange_matrix, smooth_rule

TWO_PI = 2.0 * np.pi


def _as_xy(z: np.ndarray) -> np.ndarray:
    return np.stack([z.real, z.imag], axis=-1)


class ParametricCurve:
    """A closed curve given by a callable returning z and its t-derivatives.

    Parameters
    ----------
    zfun : callable
        ``zfun(t, order)`` returns a complex array of shape (order+1, len(t))
        holding z, z', ..., z^(order).
    component_id : int
        Label of the boundary component this curve bounds.
    """

    max_order = 4

    def __init__(self, zfun: Callable[[np.ndarray, int], np.ndarray], component_id: int = 0):
        self._zfun = zfun
        self.component_id = int(component_id)

    def zderivs(self, t, order: int = 4) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if order > self.max_order:
            raise ValueError(f"derivatives available up to order {self.max_order}")
        return np.asarray(self._zfun(t, order), dtype=complex)

    def position(self, t) -> np.ndarray:
        return _as_xy(self.zderivs(t, 0)[0])

    def derivatives(self, t, order: int = 4) -> np.ndarray:
        """Array of shape (order+1, len(t), 2) holding gamma, gamma', ..."""
        return _as_xy(self.zderivs(t, order))

    def zchord(self, t1, t2) -> np.ndarray:
        t1 = np.atleast_1d(np.asarray(t1, dtype=float))
        t2 = np.atleast_1d(np.asarray(t2, dtype=float))
        return self.zderivs(t1, 0)[0] - self.zderivs(t2, 0)[0]

    def chord(self, t1, t2) -> np.ndarray:
        """gamma(t1) - gamma(t2), without cancellation where the curve allows."""
        return _as_xy(self.zchord(t1, t2))


class TrigCurve(ParametricCurve):
    """Curve with z(t) = sum_m c_m exp(i m t) for finitely many integer m."""

    max_order = 8

    def __init__(self, coeffs: dict[int, complex], component_id: int = 0):
        self.modes = np.array(sorted(coeffs), dtype=int)
        self.coeffs = np.array([coeffs[m] for m in self.modes], dtype=complex)
        super().__init__(self._eval, component_id)

    def _eval(self, t, order):
        ph = np.exp(1j * np.outer(self.modes, t))
        im = 1j * self.modes
        return np.stack([(self.coeffs * im**p) @ ph for p in range(order + 1)])

    def zchord(self, t1, t2):
        t1 = np.atleast_1d(np.asarray(t1, dtype=float))
        t2 = np.atleast_1d(np.asarray(t2, dtype=float))
        mid, half = 0.5 * (t1 + t2), 0.5 * (t1 - t2)
        m = self.modes[:, None]
        terms = np.exp(1j * m * mid) * 2j * np.sin(m * half)
        return self.coeffs @ terms

    def dzchord(self, t1, t2):
        """z'(t1) - z'(t2) without cancellation."""
        t1 = np.atleast_1d(np.asarray(t1, dtype=float))
        t2 = np.atleast_1d(np.asarray(t2, dtype=float))
        mid, half = 0.5 * (t1 + t2), 0.5 * (t1 - t2)
        m = self.modes[:, None]
        terms = np.exp(1j * m * mid) * 2j * np.sin(m * half)
        return (self.coeffs * 1j * self.modes) @ terms

    def transformed(self, rotate: float = 0.0, translate=(0.0, 0.0), scale: float = 1.0,
                    component_id: int | None = None) -> "TrigCurve":
        """z -> translate + scale * exp(i rotate) * z."""
        if not scale > 0:
            raise ValueError("scale must be positive (orientation is fixed counterclockwise)")
        c = dict(zip(self.modes.tolist(), scale * np.exp(1j * rotate) * self.coeffs))
        c[0] = c.get(0, 0.0) + complex(translate[0], translate[1])
        cid = self.component_id if component_id is None else component_id
        return TrigCurve(c, cid)


def curve_circle(radius: float = 1.0, center=(0.0, 0.0), component_id: int = 0) -> TrigCurve:
    if not radius > 0:
        raise ValueError("radius must be positive")
    return TrigCurve({0: complex(*center), 1: radius}, component_id)


def curve_droplet(component_id: int = 0) -> TrigCurve:
    """x = 2 cos t, y = sin t - 0.4 cos^2 t."""
    # 2cos t + i(sin t - 0.2 - 0.2cos 2t) in exponentials
    return TrigCurve({1: 1.5, -1: 0.5, 0: -0.2j, 2: -0.1j, -2: -0.1j}, component_id)


def curve_starfish(A: float = 0.3, n_arms: int = 3, rotation: float = 0.0, center=(0.0, 0.0),
                   scale: float = 1.0, component_id: int = 0) -> TrigCurve:
    """(1 + A cos(n t)) (cos t, sin t), then rotated, scaled and translated."""
    if abs(A) >= 1:
        raise ValueError(f"|A| must be < 1 for a regular starfish, got {A}")
    if n_arms < 1:
        raise ValueError("n_arms must be >= 1")
    c = {1: 1.0 + 0j}
    c[n_arms + 1] = c.get(n_arms + 1, 0) + 0.5 * A
    c[1 - n_arms] = c.get(1 - n_arms, 0) + 0.5 * A
    return TrigCurve(c).transformed(rotation, center, scale, component_id)


def frenet_from_zderivs(zd: np.ndarray):
    """Position, tau, n, kappa, kappa', kappa'' and speed from z-derivatives.

    ``kappa'`` and ``kappa''`` are arc-length derivatives; kappa'' needs
    order 4 input and is NaN otherwise.
    """
    z1, z2 = zd[1], zd[2]
    sp = np.abs(z1)
    tau = z1 / sp
    cross = (np.conj(z1) * z2).imag
    kappa = cross / sp**3
    dkappa = np.full_like(kappa, np.nan)
    ddkappa = np.full_like(kappa, np.nan)
    if zd.shape[0] > 3:
        z3 = zd[3]
        dot12 = (np.conj(z1) * z2).real
        dcross = (np.conj(z1) * z3).imag
        # dk/dt = dcross/sp^3 - 3 cross dot12 / sp^5
        dk_dt = dcross / sp**3 - 3.0 * cross * dot12 / sp**5
        dkappa = dk_dt / sp
        if zd.shape[0] > 4:
            z4 = zd[4]
            ddot12 = (np.conj(z2) * z2).real + (np.conj(z1) * z3).real
            ddcross = (np.conj(z2) * z3).imag + (np.conj(z1) * z4).imag
            dsp = dot12 / sp
            d2k_dt2 = (ddcross / sp**3 - 3.0 * dcross * dot12 / sp**5
                       - 3.0 * (dcross * dot12 + cross * ddot12) / sp**5
                       + 15.0 * cross * dot12**2 / sp**7)
            ddkappa = (d2k_dt2 - dk_dt * dsp / sp) / sp**2
    nrm = -1j * tau
    return zd[0], tau, nrm, kappa, dkappa, ddkappa, sp


def frenet_at(curve: ParametricCurve, t):
    """(position, tau, n, kappa, kappa') at parameters ``t`` as real arrays."""
    pos, tau, nrm, kappa, dkappa, _, _ = frenet_from_zderivs(curve.zderivs(t, 3))
    return _as_xy(pos), _as_xy(tau), _as_xy(nrm), kappa, dkappa


@dataclass(frozen=True)
class Panelization:
    """Gauss-Legendre panel discretization of one closed curve.

    Node arrays have length N = n_panels * order and are ordered panel by
    panel.  ``weights`` are arc-length weights, ``speed`` is |dgamma/dt|.
    """

    curve: ParametricCurve
    n_panels: int
    order: int
    panel_bounds: np.ndarray
    ref_nodes: np.ndarray
    ref_weights: np.ndarray
    t: np.ndarray
    panel_of: np.ndarray
    pts: np.ndarray
    tau: np.ndarray
    nrm: np.ndarray
    kappa: np.ndarray
    dkappa: np.ndarray
    ddkappa: np.ndarray
    speed: np.ndarray
    weights: np.ndarray
    s: np.ndarray
    panel_lengths: np.ndarray
    length: float
    component_id: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.t.size

    def panel_slice(self, j: int) -> slice:
        return slice(j * self.order, (j + 1) * self.order)

    def arclength_at(self, theta) -> np.ndarray:
        """Arc length from t=0 to parameters ``theta`` in [0, 2pi]."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        j = np.clip(np.searchsorted(self.panel_bounds, theta, side="right") - 1, 0, self.n_panels - 1)
        a = self.panel_bounds[j]
        start = np.concatenate([[0.0], np.cumsum(self.panel_lengths)])[j]
        tq, wq = smooth_rule(self.order)
        nodes = a[:, None] + (tq[None, :] + 1.0) * 0.5 * (theta - a)[:, None]
        sp = np.abs(self.curve.zderivs(nodes.ravel(), 1)[1]).reshape(nodes.shape)
        return start + (sp @ wq) * 0.5 * (theta - a)

    def param_at_arclength(self, s_target) -> np.ndarray:
        """Invert s(t) by Newton iteration."""
        s_target = np.atleast_1d(np.asarray(s_target, dtype=float))
        theta = s_target * (TWO_PI / self.length)
        for _ in range(50):
            sp = np.abs(self.curve.zderivs(theta, 1)[1])
            step = (self.arclength_at(theta) - s_target) / sp
            theta = np.clip(theta - step, 0.0, TWO_PI)
            if np.max(np.abs(step)) < 1e-15:
                break
        return theta

    def interp_matrix(self, theta) -> np.ndarray:
        """Matrix mapping node values to the panel interpolants at ``theta``."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float)) % TWO_PI
        out = np.zeros((theta.size, self.n))
        j = np.clip(np.searchsorted(self.panel_bounds, theta, side="right") - 1, 0, self.n_panels - 1)
        for pj in np.unique(j):
            rows = np.nonzero(j == pj)[0]
            a, b = self.panel_bounds[pj], self.panel_bounds[pj + 1]
            u = (2.0 * theta[rows] - (a + b)) / (b - a)
            out[np.ix_(rows, np.arange(pj * self.order, (pj + 1) * self.order))] = lagrange_matrix(
                self.ref_nodes, u)
        return out


def _validate_curve(curve: ParametricCurve) -> None:
    tt = np.linspace(0.0, TWO_PI, 2049)
    zd = curve.zderivs(tt, 4)
    scale = np.max(np.abs(zd[0] - zd[0].mean())) + np.max(np.abs(zd[1]))
    for i in range(5):
        gap = np.abs(zd[i][0] - zd[i][-1])
        if gap > 1e-10 * max(scale, np.max(np.abs(zd[i]))):
            raise ValueError(f"curve is not closed: derivative {i} differs by {gap:.3e} between t=0 and t=2pi")
    sp = np.abs(zd[1])
    if sp.min() <= 1e-8 * sp.max():
        k = int(np.argmin(sp))
        raise ValueError(f"degenerate curve: |gamma'| = {sp[k]:.3e} near t = {tt[k]:.6f}")
    z = zd[0][:-1]
    area = 0.5 * np.sum((np.conj(z) * zd[1][:-1]).imag) * (TWO_PI / 2048)
    if area <= 0:
        raise ValueError("curve must be traversed counterclockwise")


def build_panelization(curve: ParametricCurve, n_panels: int, order: int = 16) -> Panelization:
    """Split [0, 2pi) into equal parameter panels with ``order`` GL nodes each."""
    if n_panels < 2:
        raise ValueError("n_panels must be >= 2")
    if order < 4:
        raise ValueError("order must be >= 4")
    _validate_curve(curve)
    tref, wref = smooth_rule(order)
    bounds = np.linspace(0.0, TWO_PI, n_panels + 1)
    h = np.diff(bounds)
    t = (bounds[:-1, None] + (tref[None, :] + 1.0) * 0.5 * h[:, None]).ravel()
    panel_of = np.repeat(np.arange(n_panels), order)
    pos, tau, nrm, kappa, dkappa, ddkappa, sp = frenet_from_zderivs(curve.zderivs(t, 4))
    jac = 0.5 * h[panel_of]
    weights = np.tile(wref, n_panels) * jac * sp
    plen = weights.reshape(n_panels, order).sum(axis=1)
    cum = cumulative_matrix(order)
    local = (sp * jac).reshape(n_panels, order) @ cum.T
    s = (np.concatenate([[0.0], np.cumsum(plen)[:-1]])[:, None] + local).ravel()
    return Panelization(
        curve=curve, n_panels=n_panels, order=order, panel_bounds=bounds,
        ref_nodes=tref, ref_weights=wref, t=t, panel_of=panel_of,
        pts=_as_xy(pos), tau=_as_xy(tau), nrm=_as_xy(nrm), kappa=kappa, dkappa=dkappa,
        ddkappa=ddkappa, speed=sp, weights=weights, s=s, panel_lengths=plen,
        length=float(plen.sum()),
        component_id=np.full(t.size, curve.component_id, dtype=int),
    )


def check_disjoint(parts: Sequence[Panelization]) -> None:
    """Reject components whose discretizations touch or overlap."""
    for i in range(len(parts)):
        for j in range(i + 1, len(parts)):
            d = np.linalg.norm(parts[i].pts[:, None, :] - parts[j].pts[None, :, :], axis=2)
            if d.min() <= 0.0 or _inside(parts[i], parts[j].pts[:1]) or _inside(parts[j], parts[i].pts[:1]):
                raise ValueError(f"components {i} and {j} overlap")


def closest_parameter(curve: ParametricCurve, t_init, x) -> np.ndarray:
    """Parameter of the nearest curve point to each row of ``x``, by Newton on (gamma - x).gamma'."""
    t = np.array(t_init, dtype=float)
    xc = x[:, 0] + 1j * x[:, 1]
    for _ in range(30):
        zd = curve.zderivs(t, 2)
        dz = zd[0] - xc
        g = (np.conj(dz) * zd[1]).real
        gp = np.abs(zd[1]) ** 2 + (np.conj(dz) * zd[2]).real
        # gp <= 0 away from a minimum (e.g. the centre of a circle): take a bounded descent step
        safe = gp > 0.0
        step = np.where(safe, g / np.where(safe, gp, 1.0), 0.2 * np.sign(g))
        t = t - np.clip(step, -0.2, 0.2)
        if np.max(np.abs(step), initial=0.0) < 1e-15:
            break
    return t


def _inside(p: Panelization, x: np.ndarray) -> np.ndarray:
    """Winding-number test via the discretized Gauss integral; near points by projection."""
    r = p.pts[None, :, :] - x[:, None, :]
    R2 = np.sum(r * r, axis=2)
    flux = np.sum(r * p.nrm[None], axis=2) / R2
    res = (flux @ p.weights) / TWO_PI > 0.5
    d = np.sqrt(R2)
    j = np.argmin(d, axis=1)
    near = d[np.arange(len(x)), j] < p.panel_lengths[p.panel_of[j]]
    if np.any(near):
        t = closest_parameter(p.curve, p.t[j[near]], x[near])
        pos, _, nrm, *_ = frenet_from_zderivs(p.curve.zderivs(t, 4))
        off = (x[near, 0] + 1j * x[near, 1]) - pos
        res[near] = (np.conj(nrm) * off).real < 0.0
    return res


def inside(parts: Panelization | Sequence[Panelization], x) -> np.ndarray:
    """True where points lie strictly inside any component."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if isinstance(parts, Panelization):
        parts = [parts]
    res = np.zeros(len(x), dtype=bool)
    for p in parts:
        res |= _inside(p, x)
    return res
