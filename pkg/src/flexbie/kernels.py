"""Plate kernels for the clamped, supported and free boundary conditions.

Boundary kernels are directional derivatives of the flexural Green's function
G, written as short term tables over the 28 tabulated biharmonic symbols.
Near the diagonal each kernel is split as

    K = D[G - G^B] + K^B,    K^B = c ln|r|^2 + N(a, b, e, f) / (pi |r|^{2n}),

where D[G - G^B] is bounded (series path) and K^B has been reduced offline to
a single fraction whose numerator is a polynomial in the pair invariants

    a = r.n(y),  b = r.tau(y),  e = n(x).n(y),  f = n(x).tau(y),   r = x - y.

Summing the fraction once, instead of the individual singular terms, is what
keeps the combined kernels accurate as y -> x.  With ``split=True`` the kernel
is returned as (K, phi, psi) with K = psi + phi ln|r|, for product quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .geometry import Panelization, ParametricCurve, frenet_from_zderivs
from .greens import (
    GB_TABLE_NAMES,
    THRESHOLD,
    gb_closed_form,
    g_minus_gb_from_r,
    greens_from_r,
    logcoef_from_r,
    parse_dirs,
)
from .quadrature import smooth_rule

ACCURATE_WINDOW = 0.5  # parameter gap below which pair invariants use the curve series
_GL_T, _GL_W = smooth_rule(20)


class BCKind(str, Enum):
    CLAMPED = "clamped"
    SUPPORTED = "supported"
    FREE = "free"


class Side(str, Enum):
    INTERIOR = "interior"
    EXTERIOR = "exterior"

    @property
    def sign(self) -> int:
        """+1 exterior, -1 interior: the upper/lower sign of the jump relations."""
        return 1 if self is Side.EXTERIOR else -1


@dataclass(frozen=True)
class MaterialParams:
    """Wavenumber k > 0 and Poisson ratio nu.

    nu = -1 is accepted only for the free plate, where beta = 0 is harmless.
    """

    k: float
    nu: float

    def __post_init__(self):
        if not (np.isfinite(self.k) and self.k > 0):
            raise ValueError(f"k must be finite and positive, got {self.k}")
        if not (np.isfinite(self.nu) and -1.0 <= self.nu < 0.5):
            raise ValueError(f"nu must lie in [-1, 1/2), got {self.nu}")

    def check(self, bc: BCKind) -> None:
        bc = BCKind(bc)
        if self.nu == -1.0 and bc is not BCKind.FREE:
            raise ValueError("nu = -1 is only admissible for the free plate")
        if bc is BCKind.SUPPORTED and self.nu in (-1.0, 3.0):
            raise ValueError("supported plate requires nu not in {-1, 3}")
        if bc is BCKind.FREE and abs(((1.0 + self.nu) / 2.0) ** 2 - 1.0) < 1e-14:
            raise ValueError("free plate requires beta^2 != 1")


@dataclass(frozen=True)
class DerivedCoefficients:
    al1: float
    al2: float
    al3: float
    c0: float
    beta: float
    beta_pm: float

    @classmethod
    def from_params(cls, mp: MaterialParams, side: Side = Side.EXTERIOR) -> "DerivedCoefficients":
        nu = mp.nu
        al1 = 2.0 - nu
        al2 = (nu - 1.0) * (7.0 + nu) / (3.0 - nu)
        al3 = (1.0 - nu) * (3.0 + nu) / (1.0 + nu) if nu != -1.0 else np.inf
        c0 = (nu - 1.0) * (nu + 3.0) * (2.0 * nu - 1.0) / (2.0 * (3.0 - nu))
        beta = (1.0 + nu) / 2.0
        return cls(al1, al2, al3, c0, beta, Side(side).sign * beta)


# ---------------------------------------------------------------------------
# Geometry of point sets and pairs


@dataclass(frozen=True)
class PointFrames:
    """Points with unit tangent/normal, curvature and its arc-length derivative.

    ``t`` and ``curve`` are set for points on a parametrized curve; they let
    pair invariants be computed without cancellation.
    """

    pts: np.ndarray
    tau: np.ndarray
    nrm: np.ndarray
    kappa: np.ndarray
    dkappa: np.ndarray
    t: np.ndarray | None = None
    curve: ParametricCurve | None = None

    def take(self, idx) -> "PointFrames":
        return PointFrames(self.pts[idx], self.tau[idx], self.nrm[idx], self.kappa[idx],
                           self.dkappa[idx], None if self.t is None else self.t[idx], self.curve)


def frames_of(p: Panelization) -> PointFrames:
    return PointFrames(p.pts, p.tau, p.nrm, p.kappa, p.dkappa, p.t, p.curve)


def frames_at(curve: ParametricCurve, t) -> PointFrames:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    pos, tau, nrm, kappa, dkappa, _, _ = frenet_from_zderivs(curve.zderivs(t, 3))
    xy = lambda z: np.stack([z.real, z.imag], axis=-1)
    return PointFrames(xy(pos), xy(tau), xy(nrm), kappa, dkappa, t, curve)


def point_targets(x) -> PointFrames:
    """Off-surface targets: positions only."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    nan = np.full(x.shape, np.nan)
    return PointFrames(x, nan, nan, np.full(len(x), np.nan), np.full(len(x), np.nan))


@dataclass(frozen=True)
class PairGeometry:
    r: np.ndarray
    R2: np.ndarray
    a: np.ndarray
    b: np.ndarray
    e: np.ndarray
    f: np.ndarray
    nx: np.ndarray
    tx: np.ndarray
    ny: np.ndarray
    ty: np.ndarray
    kx: np.ndarray
    ky: np.ndarray
    dky: np.ndarray
    t_x: np.ndarray | None = None
    t_y: np.ndarray | None = None
    curve: ParametricCurve | None = None

    @property
    def d(self) -> np.ndarray:
        """r . tau(x)."""
        return self.e * self.b - self.f * self.a

    def take(self, m) -> "PairGeometry":
        vals = {k: getattr(self, k) for k in self.__dataclass_fields__}
        for k, v in vals.items():
            if isinstance(v, np.ndarray):
                vals[k] = v[m]
        return PairGeometry(**vals)

    @property
    def gap(self) -> np.ndarray | None:
        """Wrapped parameter gap t_y - t_x for pairs on one curve."""
        if self.curve is None:
            return None
        return _wrap(self.t_y - self.t_x)


def _wrap(dt):
    return (dt + np.pi) % (2.0 * np.pi) - np.pi


def _accurate_af(curve, tx, ty):
    """(r, a, f) for two points of one curve, free of cancellation as tx -> ty."""
    dt = _wrap(tx - ty)
    r = curve.zchord(ty + dt, ty)
    z1x = curve.zderivs(tx, 1)[1]
    z1y = curve.zderivs(ty, 1)[1]
    u = ty[:, None] + 0.5 * dt[:, None] * (_GL_T[None, :] + 1.0)
    dz = curve.dzchord(u.ravel(), np.repeat(ty, _GL_T.size)).reshape(u.shape)
    im = (np.conj(z1y)[:, None] * dz).imag @ _GL_W * 0.5 * dt
    a = -im / np.abs(z1y)
    f = -(np.conj(z1x) * curve.dzchord(ty, tx)).imag / (np.abs(z1x) * np.abs(z1y))
    return np.stack([r.real, r.imag], axis=-1), a, f


def pair_geometry(xf: PointFrames, yf: PointFrames, r: np.ndarray | None = None) -> PairGeometry:
    """Invariants for aligned pairs (xf[i], yf[i]).

    Pairs on the same curve closer than ACCURATE_WINDOW in parameter use the
    curve's series for r, a and f.  ``r`` overrides x - y (e.g. for targets
    placed by a normal offset from a boundary point).
    """
    if r is None:
        r = xf.pts - yf.pts
    r = np.array(r, dtype=float)
    a = np.sum(r * yf.nrm, axis=-1)
    b = np.sum(r * yf.tau, axis=-1)
    e = np.sum(xf.nrm * yf.nrm, axis=-1)
    f = np.sum(xf.nrm * yf.tau, axis=-1)
    same = (xf.curve is not None and xf.curve is yf.curve
            and xf.t is not None and yf.t is not None)
    if same and hasattr(xf.curve, "dzchord"):
        m = np.abs(_wrap(xf.t - yf.t)) < ACCURATE_WINDOW
        if np.any(m):
            rr, aa, ff = _accurate_af(xf.curve, xf.t[m], yf.t[m])
            r[m], a[m], f[m] = rr, aa, ff
            b[m] = np.sum(rr * yf.tau[m], axis=-1)
    R2 = np.sum(r * r, axis=-1)
    extra = (xf.t, yf.t, xf.curve) if same else (None, None, None)
    return PairGeometry(r, R2, a, b, e, f, xf.nrm, xf.tau, yf.nrm, yf.tau, xf.kappa, yf.kappa,
                        yf.dkappa, *extra)


# ---------------------------------------------------------------------------
# Kernel term tables.  A term is (coefficient, direction string); coefficients
# are numbers or callables of the environment (nu, alphas, curvatures).

Term = tuple[object, str]


def _coef(c, env):
    return c(env) if callable(c) else c


def _compose(op: Sequence[Term], base: Sequence[Term]) -> list[Term]:
    out = []
    for c1, d1 in op:
        for c2, d2 in base:
            out.append((lambda v, c1=c1, c2=c2: _coef(c1, v) * _coef(c2, v), d1 + d2))
    return out


_B1 = [(1.0, "nxnx"), (lambda v: v["nu"], "txtx")]
_B2 = [
    (1.0, "nxnxnx"),
    (lambda v: 2.0 - v["nu"], "nxtxtx"),
    (lambda v: (1.0 - v["nu"]) * v["kx"], "txtx"),
    (lambda v: -(1.0 - v["nu"]) * v["kx"], "nxnx"),
]
_SP1 = [
    (1.0, "nynyny"),
    (lambda v: v["al1"], "nytyty"),
    (lambda v: v["al2"] * v["ky"], "nyny"),
    (lambda v: v["al3"] * v["dky"], "ty"),
]

TERMS: dict[str, list[Term]] = {
    "cl11": [(1.0, "nynyny"), (3.0, "nytyty")],
    "cl12": [(-1.0, "nyny"), (1.0, "tyty")],
    "cl21": [(1.0, "nxnynyny"), (3.0, "nxnytyty")],
    "cl22": [(-1.0, "nxnyny"), (1.0, "nxtyty")],
    "sp11": _SP1,
    "sp12": [(1.0, "ny")],
    "sp21": _compose(_B1, _SP1),
    "sp22": _compose(_B1, [(1.0, "ny")]),
    "fr11a": _compose(_B1, [(1.0, "ny")]),
    "fr11b": _compose(_B1, [(1.0, "ty")]),
    "fr12": list(_B1),
    "fr21a": _compose(_B2, [(1.0, "ny")]),
    "fr21b": _compose(_B2, [(1.0, "ty")]),
    "fr22": list(_B2),
}

# continuous combinations: (base kernel, multiple of beta/2, Hilbert piece)
COMBINED = {"fr11bH": ("fr11b", 1.0, "H"), "fr21aHp": ("fr21a", -1.0, "Hp")}

REP_TERMS: dict[str, dict[str, list[Term]]] = {
    "clamped": {"K1": TERMS["cl11"], "K2": TERMS["cl12"]},
    "supported": {"K1": TERMS["sp11"], "K2": TERMS["sp12"]},
    "free": {"K1a": [(1.0, "ny")], "K1b": [(1.0, "ty")], "K2": [(1.0, "")]},
}

# names used in a component's self-interaction, in block order (11, 12, 21, 22)
BOUNDARY_NAMES = {
    "clamped": ("cl11", "cl12", "cl21", "cl22"),
    "supported": ("sp11", "sp12", "sp21", "sp22"),
    "free": ("fr11a", "fr11bH", "fr12", "fr21aHp", "fr21b", "fr22"),
}


def table_symbols() -> set[str]:
    """Every directional symbol used by the boundary kernel tables."""
    return {d for terms in TERMS.values() for _, d in terms if d}


assert table_symbols() == set(GB_TABLE_NAMES)


# ---------------------------------------------------------------------------
# Biharmonic parts, reduced offline to one fraction each (numerators times pi)

def _kb_cl11(a, b, e, f, nu, al1, al2, al3, kx, ky, dky):
    num = (
        -a**3
    )
    return 0, num, 2


def _kb_cl12(a, b, e, f, nu, al1, al2, al3, kx, ky, dky):
    num = (
        -0.25*a**2 + 0.25*b**2
    )
    return 0, num, 1


def _kb_cl21(a, b, e, f, nu, al1, al2, al3, kx, ky, dky):
    num = (
        a**4*e + 4*a**3*b*f - 3*a**2*b**2*e
    )
    return 0, num, 3


def _kb_cl22(a, b, e, f, nu, al1, al2, al3, kx, ky, dky):
    num = (
        a**2*b*f - a*b**2*e
    )
    return 0, num, 2


def _kb_sp11(a, b, e, f, nu, al1, al2, al3, kx, ky, dky):
    num = (
        0.375*a**4*al2*ky - 0.125*a**4*al3*b*dky - 0.25*a**3*al1 - 0.25*a**3 + 0.5*a**2*al2*b**2*ky
        - 0.25*a**2*al3*b**3*dky + 0.25*a*al1*b**2 - 0.75*a*b**2 + 0.125*al2*b**4*ky -
        0.125*al3*b**5*dky
    )
    return 0.125*al2*ky - 0.125*al3*b*dky, num, 2


def _kb_sp12(a, b, e, f, nu, al1, al2, al3, kx, ky, dky):
    num = (
        -0.125*a
    )
    return -0.125*a, num, 0


def _kb_sp21(a, b, e, f, nu, al1, al2, al3, kx, ky, dky):
    num = (
        0.5*a**7*al3*dky*e*f*nu - 0.5*a**7*al3*dky*e*f - 0.25*a**6*al2*ky*nu - 0.25*a**6*al2*ky +
        a**6*al3*b*dky*f**2*nu - a**6*al3*b*dky*f**2 - 0.75*a**6*al3*b*dky*nu +
        0.25*a**6*al3*b*dky - 2*a**5*al1*f**2*nu + 2*a**5*al1*f**2 + 1.5*a**5*al1*nu -
        0.5*a**5*al1 - a**5*al2*b*e*f*ky*nu + a**5*al2*b*e*f*ky +
        0.5*a**5*al3*b**2*dky*e*f*nu - 0.5*a**5*al3*b**2*dky*e*f - 0.5*a**5*nu - 0.5*a**5 +
        9*a**4*al1*b*e*f*nu - 9*a**4*al1*b*e*f - 3*a**4*al2*b**2*f**2*ky*nu +
        3*a**4*al2*b**2*f**2*ky + 1.25*a**4*al2*b**2*ky*nu - 1.75*a**4*al2*b**2*ky +
        2*a**4*al3*b**3*dky*f**2*nu - 2*a**4*al3*b**3*dky*f**2 - 1.75*a**4*al3*b**3*dky*nu +
        0.25*a**4*al3*b**3*dky - 3*a**4*b*e*f*nu + 3*a**4*b*e*f + 16*a**3*al1*b**2*f**2*nu -
        16*a**3*al1*b**2*f**2 - 9*a**3*al1*b**2*nu + 7*a**3*al1*b**2 +
        2*a**3*al2*b**3*e*f*ky*nu - 2*a**3*al2*b**3*e*f*ky - 0.5*a**3*al3*b**4*dky*e*f*nu +
        0.5*a**3*al3*b**4*dky*e*f - 12*a**3*b**2*f**2*nu + 12*a**3*b**2*f**2 +
        7*a**3*b**2*nu - 5*a**3*b**2 - 14*a**2*al1*b**3*e*f*nu + 14*a**2*al1*b**3*e*f -
        2*a**2*al2*b**4*f**2*ky*nu + 2*a**2*al2*b**4*f**2*ky + 1.25*a**2*al2*b**4*ky*nu -
        0.75*a**2*al2*b**4*ky + a**2*al3*b**5*dky*f**2*nu - a**2*al3*b**5*dky*f**2 -
        1.25*a**2*al3*b**5*dky*nu - 0.25*a**2*al3*b**5*dky + 18*a**2*b**3*e*f*nu -
        18*a**2*b**3*e*f - 6*a*al1*b**4*f**2*nu + 6*a*al1*b**4*f**2 + 1.5*a*al1*b**4*nu -
        4.5*a*al1*b**4 + 3*a*al2*b**5*e*f*ky*nu - 3*a*al2*b**5*e*f*ky -
        0.5*a*al3*b**6*dky*e*f*nu + 0.5*a*al3*b**6*dky*e*f + 12*a*b**4*f**2*nu -
        12*a*b**4*f**2 - 4.5*a*b**4*nu + 7.5*a*b**4 + al1*b**5*e*f*nu - al1*b**5*e*f +
        al2*b**6*f**2*ky*nu - al2*b**6*f**2*ky - 0.25*al2*b**6*ky*nu + 0.75*al2*b**6*ky -
        0.25*al3*b**7*dky*nu - 0.25*al3*b**7*dky - 3*b**5*e*f*nu + 3*b**5*e*f
    )
    return 0, num, 4


def _kb_sp22(a, b, e, f, nu, al1, al2, al3, kx, ky, dky):
    num = (
        -0.25*a**3*nu - 0.25*a**3 - 0.5*a**2*b*e*f*nu + 0.5*a**2*b*e*f - a*b**2*f**2*nu +
        a*b**2*f**2 + 0.25*a*b**2*nu - 0.75*a*b**2 + 0.5*b**3*e*f*nu - 0.5*b**3*e*f
    )
    return 0, num, 2


def _kb_fr11a(a, b, e, f, nu, al1, al2, al3, kx, ky, dky):
    num = (
        -0.25*a**3*nu - 0.25*a**3 - 0.5*a**2*b*e*f*nu + 0.5*a**2*b*e*f - a*b**2*f**2*nu +
        a*b**2*f**2 + 0.25*a*b**2*nu - 0.75*a*b**2 + 0.5*b**3*e*f*nu - 0.5*b**3*e*f
    )
    return 0, num, 2


def _kb_fr11bH(a, b, e, f, nu, al1, al2, al3, kx, ky, dky):
    num = (
        0.5*a**3*e*f*nu - 0.5*a**3*e*f + a**2*b*f**2*nu - a**2*b*f**2 - 0.5*a**2*b*nu + 0.5*a**2*b -
        0.5*a*b**2*e*f*nu + 0.5*a*b**2*e*f
    )
    return 0, num, 2


def _kb_fr12(a, b, e, f, nu, al1, al2, al3, kx, ky, dky):
    num = (
        0.25*a**2*f**2*nu - 0.25*a**2*f**2 + 0.125*a**2*nu + 0.375*a**2 - 0.5*a*b*e*f*nu +
        0.5*a*b*e*f - 0.25*b**2*f**2*nu + 0.25*b**2*f**2 + 0.375*b**2*nu + 0.125*b**2
    )
    return 0.125*e**2*nu + 0.125*e**2 + 0.125*f**2*nu + 0.125*f**2, num, 1


def _kb_fr21aHp(a, b, e, f, nu, al1, al2, al3, kx, ky, dky):
    num = (
        a**4*b*e*f*kx*nu - a**4*b*e*f*kx - 0.25*a**4*e**3*nu + 0.75*a**4*e**3 + 0.25*a**4*e*f**2*nu
        + 0.25*a**4*e*f**2 - 0.25*a**4*e*nu - 0.25*a**4*e + 2*a**3*b**2*f**2*kx*nu -
        2*a**3*b**2*f**2*kx - a**3*b**2*kx*nu + a**3*b**2*kx + 3*a**3*b*f**3*nu -
        3*a**3*b*f**3 - 3*a**3*b*f*nu + 3*a**3*b*f + 1.5*a**2*b**2*e**3*nu -
        1.5*a**2*b**2*e**3 - 4.5*a**2*b**2*e*f**2*nu + 4.5*a**2*b**2*e*f**2 +
        2*a*b**4*f**2*kx*nu - 2*a*b**4*f**2*kx - a*b**4*kx*nu + a*b**4*kx - 5*a*b**3*f**3*nu
        + 5*a*b**3*f**3 + 3*a*b**3*f*nu - 3*a*b**3*f - b**5*e*f*kx*nu + b**5*e*f*kx -
        0.25*b**4*e**3*nu - 0.25*b**4*e**3 + 1.25*b**4*e*f**2*nu - 1.75*b**4*e*f**2 +
        0.25*b**4*e*nu + 0.25*b**4*e
    )
    return 0, num, 3


def _kb_fr21b(a, b, e, f, nu, al1, al2, al3, kx, ky, dky):
    num = (
        -a**5*e*f*kx*nu + a**5*e*f*kx - 2*a**4*b*f**2*kx*nu + 2*a**4*b*f**2*kx + a**4*b*kx*nu -
        a**4*b*kx - 1.5*a**4*f**3*nu + 1.5*a**4*f**3 + 1.25*a**4*f*nu - 1.75*a**4*f -
        1.5*a**3*b*e**3*nu + 2.5*a**3*b*e**3 + 3.5*a**3*b*e*f**2*nu - 2.5*a**3*b*e*f**2 -
        2*a**2*b**3*f**2*kx*nu + 2*a**2*b**3*f**2*kx + a**2*b**3*kx*nu - a**2*b**3*kx +
        6*a**2*b**2*f**3*nu - 6*a**2*b**2*f**3 - 4.5*a**2*b**2*f*nu + 4.5*a**2*b**2*f +
        a*b**4*e*f*kx*nu - a*b**4*e*f*kx + 0.5*a*b**3*e**3*nu + 0.5*a*b**3*e**3 -
        2.5*a*b**3*e*f**2*nu + 3.5*a*b**3*e*f**2 - 0.5*b**4*f**3*nu + 0.5*b**4*f**3 +
        0.25*b**4*f*nu + 0.25*b**4*f
    )
    return 0, num, 3


def _kb_fr22(a, b, e, f, nu, al1, al2, al3, kx, ky, dky):
    num = (
        -0.5*a**4*f**2*kx*nu + 0.5*a**4*f**2*kx + 0.25*a**4*kx*nu - 0.25*a**4*kx + a**3*b*e*f*kx*nu
        - a**3*b*e*f*kx - 0.25*a**3*e**3*nu + 0.75*a**3*e**3 + 0.25*a**3*e*f**2*nu +
        0.25*a**3*e*f**2 + 1.5*a**2*b*f**3*nu - 1.5*a**2*b*f**3 - 1.25*a**2*b*f*nu +
        1.75*a**2*b*f + a*b**3*e*f*kx*nu - a*b**3*e*f*kx + 0.25*a*b**2*e**3*nu +
        0.25*a*b**2*e**3 - 1.25*a*b**2*e*f**2*nu + 1.75*a*b**2*e*f**2 + 0.5*b**4*f**2*kx*nu
        - 0.5*b**4*f**2*kx - 0.25*b**4*kx*nu + 0.25*b**4*kx - 0.5*b**3*f**3*nu +
        0.5*b**3*f**3 + 0.25*b**3*f*nu + 0.25*b**3*f
    )
    return 0, num, 2


_KB = {name.removeprefix("_kb_"): fn for name, fn in list(globals().items()) if name.startswith("_kb_")}


# Fractions whose singular terms cancel to O(1) only at third or fourth order.
# For parameter gaps below STIFF_GAP they are interpolated in the gap from
# Chebyshev samples that stay clear of the diagonal.
STIFF = ("sp21", "fr21aHp", "fr21b")
STIFF_GAP = 0.02
CHEB_HALFWIDTH = 0.12
CHEB_POINTS = 24


def _cheb():
    j = np.arange(CHEB_POINTS)
    th = (2 * j + 1) * np.pi / (2 * CHEB_POINTS)
    return CHEB_HALFWIDTH * np.cos(th), (-1.0) ** j * np.sin(th)


def gap_interpolate(evaluate: Callable[[PairGeometry], np.ndarray], curve: ParametricCurve,
                    t_x: np.ndarray, gap: np.ndarray) -> np.ndarray:
    """Interpolate g(delta) = evaluate(pair(t_x, t_x + delta)) at ``gap``.

    g is sampled at Chebyshev points in [-CHEB_HALFWIDTH, CHEB_HALFWIDTH]
    (none closer to 0 than about 0.6% of the half-width) and evaluated by the
    barycentric formula.  Valid for any g analytic in delta, e.g. the
    diagonal limit of a continuous kernel at gap = 0.  ``evaluate`` may
    return leading axes in front of the pair axis.
    """
    t_x = np.atleast_1d(np.asarray(t_x, dtype=float))
    gap = np.broadcast_to(np.asarray(gap, dtype=float), t_x.shape)
    nodes, w = _cheb()
    tx = np.repeat(t_x, nodes.size)
    ty = tx + np.tile(nodes, t_x.size)
    pg = pair_geometry(frames_at(curve, tx), frames_at(curve, ty))
    vals = np.asarray(evaluate(pg))
    vals = vals.reshape(vals.shape[:-1] + (t_x.size, nodes.size))
    diff = gap[:, None] - nodes[None, :]
    hit = diff == 0.0
    diff[hit] = 1.0
    c = w[None, :] / diff
    c = np.where(hit.any(axis=1, keepdims=True), hit.astype(float), c)
    return (c * vals).sum(axis=-1) / c.sum(axis=1)


def _env(pg: PairGeometry, mp: MaterialParams) -> dict:
    dc = DerivedCoefficients.from_params(mp)
    return dict(nu=mp.nu, al1=dc.al1, al2=dc.al2, al3=dc.al3, beta=dc.beta,
                kx=pg.kx, ky=pg.ky, dky=pg.dky)


def _kb_args(pg, env):
    return (pg.a, pg.b, pg.e, pg.f, env["nu"], env["al1"], env["al2"], env["al3"],
            env["kx"], env["ky"], env["dky"])


def biharmonic_part(name: str, pg: PairGeometry, mp: MaterialParams, stable: bool = True):
    """(log coefficient c, rational part) with K^B = c ln|r|^2 + rational.

    With ``stable`` the STIFF fractions are interpolated in the parameter gap
    for same-curve pairs closer than STIFF_GAP.
    """
    env = _env(pg, mp)
    c, num, n = _KB[name](*_kb_args(pg, env))
    rat = np.array(num / (np.pi * pg.R2**n), dtype=float)
    if stable and name in STIFF and pg.curve is not None:
        close = np.abs(pg.gap) < STIFF_GAP
        if np.any(close):
            rat[close] = gap_interpolate(lambda q: biharmonic_part(name, q, mp, False)[1],
                                         pg.curve, pg.t_x[close], pg.gap[close])
    return np.broadcast_to(c / np.pi, pg.R2.shape), rat


def naive_biharmonic(name: str, pg: PairGeometry, mp: MaterialParams) -> np.ndarray:
    """K^B by summing the tabulated singular terms one by one.

    Kept as the uncancelled reference path; it loses accuracy as y -> x.
    """
    env = _env(pg, mp)
    base, sgn, piece = COMBINED.get(name, (name, 0.0, None))
    out = sum(_coef(c, env) * gb_closed_form(d, pg.r, pg.nx, pg.tx, pg.ny, pg.ty) for c, d in TERMS[base])
    if piece is not None:
        out = out + sgn * 0.5 * env["beta"] * _hilbert_piece(piece, pg)
    return np.broadcast_to(out, pg.R2.shape)


def _hilbert_piece(piece: str, pg: PairGeometry) -> np.ndarray:
    if piece == "H":
        return pg.b / (np.pi * pg.R2)
    return pg.e / (np.pi * pg.R2) - 2.0 * pg.d * pg.b / (np.pi * pg.R2**2)


def _dirs(pg: PairGeometry, d: str):
    xs, ys = parse_dirs(d) if d else ([], [])
    vec = {"nx": pg.nx, "tx": pg.tx, "ny": pg.ny, "ty": pg.ty}
    return [vec[t] for t in xs], [vec[t] for t in ys]


def contract(P, terms: Sequence[Term], pg: PairGeometry, env: dict) -> np.ndarray:
    """sum of coefficient * directional derivative over a term table."""
    out = 0.0
    for c, d in terms:
        xs, ys = _dirs(pg, d)
        out = out + _coef(c, env) * P.d(xs, ys)
    return out


class KernelEvaluator:
    """Shares Green's-function partials across the kernels of one pair set."""

    def __init__(self, pg: PairGeometry, mp: MaterialParams, split: bool = False, stable: bool = True):
        if np.any(pg.R2 == 0.0):
            raise ValueError("boundary kernels are not defined at x = y")
        self.pg, self.mp, self.split, self.stable = pg, mp, split, stable
        self.small = mp.k * np.sqrt(pg.R2) < THRESHOLD
        self.lnr = 0.5 * np.log(pg.R2)
        self.ps = pg.take(self.small)
        self.pl = pg.take(~self.small)
        self.es, self.el = _env(self.ps, mp), _env(self.pl, mp)
        k = mp.k
        self.Pd = g_minus_gb_from_r(self.ps.r, k, check=False) if self.small.any() else None
        self.Pg = greens_from_r(self.pl.r, k) if (~self.small).any() else None
        if split:
            self.Lfull = logcoef_from_r(pg.r, k)
            self.Ldrop = logcoef_from_r(self.ps.r, k, drop_gb=True) if self.small.any() else None
            self.env = _env(pg, mp)

    def __call__(self, name: str):
        """K, or (K, phi, psi) with K = psi + phi ln|r| when splitting."""
        base, sgn, piece = COMBINED.get(name, (name, 0.0, None))
        terms = TERMS[base]
        small = self.small
        K = np.empty(self.pg.R2.shape, dtype=complex)
        psi = np.empty_like(K) if self.split else None
        if self.Pd is not None:
            ps = self.ps
            smooth = contract(self.Pd, terms, ps, self.es)
            c, rat = biharmonic_part(name, ps, self.mp, self.stable)
            K[small] = smooth + c * np.log(ps.R2) + rat
            if self.split:
                phi3 = contract(self.Ldrop, terms, ps, self.es)
                psi[small] = smooth - phi3 * self.lnr[small] + rat
        if self.Pg is not None:
            val = contract(self.Pg, terms, self.pl, self.el)
            if piece is not None:
                val = val + sgn * 0.5 * self.el["beta"] * _hilbert_piece(piece, self.pl)
            K[~small] = val
        if not self.split:
            return K
        phi = contract(self.Lfull, terms, self.pg, self.env) * np.ones(K.shape)
        psi[~small] = K[~small] - phi[~small] * self.lnr[~small]
        return K, phi, psi


def boundary_kernel(name: str, pg: PairGeometry, mp: MaterialParams, split: bool = False,
                    stable: bool = True):
    """One boundary kernel on pairs x != y; see :class:`KernelEvaluator`."""
    return KernelEvaluator(pg, mp, split, stable)(name)


def boundary_kernels(bc: BCKind, pg: PairGeometry, mp: MaterialParams, split: bool = False) -> dict:
    """All self-interaction kernels for a boundary condition, keyed by name."""
    bc = BCKind(bc)
    mp.check(bc)
    return {n: boundary_kernel(n, pg, mp, split) for n in BOUNDARY_NAMES[bc.value]}


def raw_kernel(name: str, pg: PairGeometry, mp: MaterialParams) -> np.ndarray:
    """Plain contraction of G derivatives, for well-separated pairs."""
    return raw_kernels([name], pg, mp)[name]


def raw_kernels(names, pg: PairGeometry, mp: MaterialParams) -> dict:
    """Several plain kernels sharing one evaluation of the G derivatives."""
    P = greens_from_r(pg.r, mp.k)
    env = _env(pg, mp)
    return {n: contract(P, TERMS[n], pg, env) for n in names}


def rep_kernels(bc: BCKind, pg: PairGeometry, mp: MaterialParams) -> dict:
    """Layer-potential kernels for off-surface targets.

    Only the source frame (ny, ty, ky, dky) of ``pg`` is used.  The free plate
    returns K1a and K1b separately; the potential is K1a + beta^+- K1b H.
    """
    bc = BCKind(bc)
    mp.check(bc)
    if np.any(pg.R2 == 0.0):
        raise ValueError("target coincides with a source point")
    P = greens_from_r(pg.r, mp.k)
    env = _env(pg, mp)
    return {n: contract(P, t, pg, env) for n, t in REP_TERMS[bc.value].items()}


# ---------------------------------------------------------------------------
# Jumps and diagonal limits


def jump_matrix(bc: BCKind, mp: MaterialParams, side: Side, kappa) -> tuple[np.ndarray, ...]:
    """(D11, D12, D21, D22) per node.

    The free plate uses the form in which the d/ds H jump is absorbed into the
    combined kernel K21a - (beta/2) K^H'.
    """
    bc, side = BCKind(bc), Side(side)
    mp.check(bc)
    kappa = np.asarray(kappa, dtype=float)
    sg = side.sign
    one = np.ones_like(kappa)
    zero = np.zeros_like(kappa)
    if bc is BCKind.CLAMPED:
        return -0.5 * sg * one, zero, sg * kappa, -0.5 * sg * one
    if bc is BCKind.SUPPORTED:
        c0 = DerivedCoefficients.from_params(mp).c0
        return -0.5 * sg * one, zero, sg * c0 * kappa**2, -0.5 * sg * one
    beta = (1.0 + mp.nu) / 2.0
    return sg * (-0.5 + 0.5 * beta**2) * one, zero, zero, 0.5 * sg * one


def on_surface_limits(bc: BCKind, mp: MaterialParams, kappa, dkappa=0.0, ddkappa=0.0) -> dict:
    """Limits of the biharmonic parts K^B of the continuous kernels as y -> x."""
    bc = BCKind(bc)
    nu, pi = mp.nu, np.pi
    kappa, dkappa, ddkappa = (np.asarray(v, dtype=float) for v in (kappa, dkappa, ddkappa))
    if bc is BCKind.CLAMPED:
        return {"cl11": 0.0 * kappa, "cl12": 1.0 / (4 * pi) + 0.0 * kappa,
                "cl21": -3.0 * kappa**2 / (4 * pi), "cl22": kappa / (2 * pi)}
    if bc is BCKind.SUPPORTED:
        sp21 = (nu - 1) * (12 * kappa**3 * (nu**2 - nu + 4) + ddkappa * (-5 * nu**2 + 4 * nu + 33)) / (
            48 * pi * (nu - 3))
        return {"sp12": 0.0 * kappa, "sp21": sp21, "sp22": (3 * nu - 1) * kappa / (8 * pi)}
    return {
        "fr11a": (3 * nu - 1) * kappa / (8 * pi),
        "fr11bH": 0.0 * kappa,
        "fr21aHp": (1 - nu) * kappa**2 / (8 * pi),
        "fr21b": (1 + nu) * dkappa / (24 * pi),
        "fr22": (3 - nu) * kappa / (8 * pi),
    }


PRINTED_LIMITS = {
    # competing constants for two limits; small-s evaluation decides between them
    "fr21b": lambda mp, kappa, dkappa: (1 + mp.nu) / 2 * (1 + mp.nu) * dkappa / (24 * np.pi),
    "fr22": lambda mp, kappa, dkappa: (3 - mp.nu) * kappa / 8,
}


@dataclass(frozen=True)
class LimitRow:
    bc: str
    name: str
    analytic: float
    estimate: float  # Richardson extrapolation from s = h, h/2
    tiny: float      # direct value at s = 1e-8
    error: float


def kernel_limit_table(mp: MaterialParams, curve: ParametricCurve, t0: float = 0.7,
                       h: float = 1e-4, bcs=tuple(BCKind)) -> list[LimitRow]:
    """Compare each entry of on_surface_limits with small-s evaluation of K^B.

    ``s`` is the parameter offset of the source point.  K^B - limit is O(s),
    so the two-point extrapolation 2 v(h/2) - v(h) removes the leading term.
    """
    zd = curve.zderivs(np.array([t0]), 4)
    _, _, _, kap, dk, ddk, _ = frenet_from_zderivs(zd)
    fx = frames_at(curve, np.array([t0]))

    def value(name, s):
        pg = pair_geometry(fx, frames_at(curve, np.array([t0 + s])))
        c, rat = biharmonic_part(name, pg, mp)
        return float(np.real(c * np.log(pg.R2) + rat)[0])

    rows = []
    for bc in bcs:
        bc = BCKind(bc)
        if bc is BCKind.SUPPORTED and mp.nu == -1.0:
            continue
        for name, lim in on_surface_limits(bc, mp, kap, dk, ddk).items():
            lim = float(np.asarray(lim).ravel()[0])
            est = 2.0 * value(name, 0.5 * h) - value(name, h)
            rows.append(LimitRow(bc.value, name, lim, est, value(name, 1e-8), abs(est - lim)))
    return rows
