"""Flexural Green's function, its biharmonic singular part and derivatives.

G(x, y) = (1/2k^2) [ (i/4) H0(kr) - (1/2pi) K0(kr) ],   r = |x - y|,
G^B(x, y) = (1/8pi) r^2 ln r = (1/16pi) r^2 ln r^2.

Everything is treated as a function f(q) of q = r^2.  Cartesian partials
d^i/dX^i d^j/dY^j f(q) with X = x1 - y1, Y = x2 - y2 follow from the
q-derivatives by Faa di Bruno, and directional derivatives are contractions
of those partials with the requested directions.

For small kr the function is summed as a power series in w = k^2 r^2 / 4,

    G = (1/2k^2) sum_m [(i/4)(-1)^m + [m odd] (gamma_E - H_m)/pi] w^m/(m!)^2
        + (1/4pi k^2) sum_{m odd} w^m/(m!)^2 ln w,

with H_m the harmonic numbers.  The m = 1 log term is G^B plus a multiple of
r^2, so dropping it gives G - G^B without cancellation.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy import special

MAX_ORDER = 5
THRESHOLD = 1.0  # k r below this uses the series path
EULER_GAMMA = np.euler_gamma


def special_functions(z):
    """(H0^(1), H1^(1), K0, K1) at real z > 0."""
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ValueError("special_functions requires z > 0")
    return special.hankel1(0, z), special.hankel1(1, z), special.k0(z), special.k1(z)


def _as_pairs(x, y):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    return np.broadcast_arrays(x, y)


def _harmonic(m: int) -> float:
    return float(sum(1.0 / j for j in range(1, m + 1)))


def _n_terms(wmax: float) -> int:
    """Smallest M with w^m/(m!)^2 negligible (1e-17 relative) for m >= M."""
    m, term, peak = 0, 1.0, 1.0
    while True:
        m += 1
        term *= wmax / (m * m)
        peak = max(peak, term)
        if m > MAX_ORDER + 2 and term * m**MAX_ORDER < 1e-18 * peak:
            return m + 1


def _wpow_derivs(w: np.ndarray, m: int, nmax: int, with_log: bool) -> np.ndarray:
    """d^n/dw^n of w^m (or w^m ln w) for n = 0..nmax."""
    out = np.zeros((nmax + 1,) + w.shape)
    lw = np.log(w) if with_log else None
    for n in range(nmax + 1):
        if n <= m:
            fall = factorial(m) / factorial(m - n)
            base = fall * w ** (m - n)
            if with_log:
                out[n] = base * (lw + _harmonic(m) - _harmonic(m - n))
            else:
                out[n] = base
        elif with_log:
            out[n] = factorial(m) * (-1.0) ** (n - m - 1) * factorial(n - m - 1) * w ** float(m - n)
    return out


def _series_q_derivs(q: np.ndarray, k: float, nmax: int, drop_gb: bool) -> np.ndarray:
    """q-derivatives of G (or G - G^B) on the series path."""
    w = 0.25 * k * k * q
    M = _n_terms(float(np.max(w)) if w.size else 0.0)
    g = np.zeros((nmax + 1,) + q.shape, dtype=complex)
    pref = 1.0 / (2.0 * k * k)
    lpref = 1.0 / (4.0 * np.pi * k * k)
    for m in range(M + 1):
        inv = 1.0 / factorial(m) ** 2
        a = pref * (0.25j * (-1.0) ** m)
        if m % 2 == 1:
            a += pref * (EULER_GAMMA - _harmonic(m)) / np.pi
        if drop_gb and m == 1:
            # G^B = (w/4pi k^2)(ln w + ln(4/k^2))
            a -= lpref * np.log(4.0 / (k * k))
        g += a * inv * _wpow_derivs(w, m, nmax, False)
        if m % 2 == 1 and not (drop_gb and m == 1):
            g += lpref * inv * _wpow_derivs(w, m, nmax, True)
    scale = (0.25 * k * k) ** np.arange(nmax + 1)
    return g * scale.reshape((-1,) + (1,) * q.ndim)


def _direct_q_derivs(q: np.ndarray, k: float, nmax: int) -> np.ndarray:
    r = np.sqrt(q)
    z = k * r
    # upward recurrence is stable for both H^(1)_n and K_n
    h = [special.j0(z) + 1j * special.y0(z), special.j1(z) + 1j * special.y1(z)]
    kv = [special.k0(z), special.k1(z)]
    for n in range(1, nmax):
        h.append(2.0 * n / z * h[n] - h[n - 1])
        kv.append(kv[n - 1] + 2.0 * n / z * kv[n])
    out = np.empty((nmax + 1,) + q.shape, dtype=complex)
    zpow = np.ones_like(z)
    for n in range(nmax + 1):
        c = (1.0 / (2.0 * k * k)) * (-0.5 * k * k) ** n
        out[n] = c * (0.25j * h[n] - kv[n] / (2.0 * np.pi)) / zpow
        zpow = zpow * z
    return out


def _gb_q_derivs(q: np.ndarray, nmax: int) -> np.ndarray:
    out = np.empty((nmax + 1,) + q.shape)
    c = 1.0 / (16.0 * np.pi)
    lq = np.log(q)
    out[0] = c * q * lq
    if nmax >= 1:
        out[1] = c * (lq + 1.0)
    for n in range(2, nmax + 1):
        out[n] = c * (-1.0) ** n * factorial(n - 2) / q ** (n - 1)
    return out


def _logcoef_q_derivs(q: np.ndarray, k: float, nmax: int, drop_gb: bool) -> np.ndarray:
    """q-derivatives of phi(q) with G = smooth + phi ln r; valid at any kr."""
    w = 0.25 * k * k * q
    M = _n_terms(float(np.max(w)) if w.size else 0.0)
    g = np.zeros((nmax + 1,) + q.shape)
    start = 3 if drop_gb else 1
    for m in range(start, M + 1, 2):
        g += _wpow_derivs(w, m, nmax, False) / factorial(m) ** 2
    g /= 2.0 * np.pi * k * k
    scale = (0.25 * k * k) ** np.arange(nmax + 1)
    return g * scale.reshape((-1,) + (1,) * q.ndim)


def _smooth_q_derivs(q: np.ndarray, k: float, nmax: int) -> np.ndarray:
    """q-derivatives of G - phi ln r (series path)."""
    w = 0.25 * k * k * q
    M = _n_terms(float(np.max(w)) if w.size else 0.0)
    g = np.zeros((nmax + 1,) + q.shape, dtype=complex)
    pref = 1.0 / (2.0 * k * k)
    for m in range(M + 1):
        a = pref * 0.25j * (-1.0) ** m
        if m % 2 == 1:
            a += pref * (EULER_GAMMA - _harmonic(m) + np.log(0.5 * k)) / np.pi
        g += a / factorial(m) ** 2 * _wpow_derivs(w, m, nmax, False)
    scale = (0.25 * k * k) ** np.arange(nmax + 1)
    return g * scale.reshape((-1,) + (1,) * q.ndim)


def cartesian_partials(r: np.ndarray, fq: np.ndarray, nmax: int = MAX_ORDER) -> np.ndarray:
    """P[i, j] = d^i/dX^i d^j/dY^j f(X^2 + Y^2) from q-derivatives ``fq``."""
    X, Y = r[..., 0], r[..., 1]
    px, py = [np.ones(X.shape)], [np.ones(Y.shape)]
    for _ in range(nmax):
        px.append(px[-1] * 2.0 * X)
        py.append(py[-1] * 2.0 * Y)
    P = np.zeros((nmax + 1, nmax + 1) + X.shape, dtype=fq.dtype)
    for i in range(nmax + 1):
        for j in range(nmax + 1 - i):
            acc = np.zeros(X.shape, dtype=fq.dtype)
            for l in range(i // 2 + 1):
                cx = factorial(i) / (factorial(l) * factorial(i - 2 * l))
                for m in range(j // 2 + 1):
                    cy = factorial(j) / (factorial(m) * factorial(j - 2 * m))
                    acc += (cx * cy) * (px[i - 2 * l] * py[j - 2 * m]) * fq[i - l + j - m]
            P[i, j] = acc
    return P


@dataclass(frozen=True)
class GreensDerivs:
    """Cartesian partials of a radial kernel in r = x - y, up to order 5.

    ``partials[i, j]`` is d^i/dx1^i d^j/dx2^j.  Use :meth:`d` for
    directional derivatives in x and y.
    """

    r: np.ndarray
    partials: np.ndarray

    @property
    def value(self) -> np.ndarray:
        return self.partials[0, 0]

    def d(self, xdirs=(), ydirs=()) -> np.ndarray:
        """Directional derivative along ``xdirs`` in x and ``ydirs`` in y.

        Each direction is an array broadcastable to r.shape.  A y-derivative
        of a function of x - y carries a factor -1.
        """
        dirs = list(xdirs) + list(ydirs)
        n = len(dirs)
        if n > self.partials.shape[0] - 1:
            raise ValueError("derivative order exceeds what was computed")
        shape = self.r.shape[:-1]
        poly = [np.ones(shape)]
        for u in dirs:
            u = np.broadcast_to(np.asarray(u, dtype=float), self.r.shape)
            new = [np.zeros(shape) for _ in range(len(poly) + 1)]
            for a, c in enumerate(poly):
                new[a + 1] = new[a + 1] + u[..., 0] * c
                new[a] = new[a] + u[..., 1] * c
            poly = new
        out = sum(poly[a] * self.partials[a, n - a] for a in range(n + 1))
        return (-1.0) ** len(ydirs) * out


class BiharmonicDerivs(GreensDerivs):
    """Derivative bundle of G^B plus the closed-form directional table."""

    def table(self, name: str, nx=None, tx=None, ny=None, ty=None) -> np.ndarray:
        return gb_closed_form(name, self.r, nx, tx, ny, ty)


def _r_of(x, y):
    x, y = _as_pairs(x, y)
    r = x - y
    if np.any(np.all(r == 0.0, axis=-1)):
        raise ValueError("x = y is a singular point")
    return r


def greens_from_r(r: np.ndarray, k: float, nmax: int = MAX_ORDER) -> GreensDerivs:
    """Full G derivatives, choosing the series or direct path per point."""
    q = np.sum(r * r, axis=-1)
    small = k * np.sqrt(q) < THRESHOLD
    P = np.empty((nmax + 1, nmax + 1) + q.shape, dtype=complex)
    if np.any(small):
        # G - G^B and G^B separately, so neither path loses digits to the other
        rs, qs = r[small], q[small]
        P[:, :, small] = (cartesian_partials(rs, _series_q_derivs(qs, k, nmax, True), nmax)
                          + cartesian_partials(rs, _gb_q_derivs(qs, nmax), nmax))
    if np.any(~small):
        P[:, :, ~small] = cartesian_partials(r[~small], _direct_q_derivs(q[~small], k, nmax), nmax)
    return GreensDerivs(r, P)


def eval_G(x, y, k: float, nmax: int = MAX_ORDER) -> GreensDerivs:
    """G and its partials; series path below kr = 1, Hankel/Bessel above."""
    if not k > 0:
        raise ValueError("k must be positive")
    return greens_from_r(_r_of(x, y), k, nmax)


def g_minus_gb_from_r(r: np.ndarray, k: float, nmax: int = MAX_ORDER, check: bool = True) -> GreensDerivs:
    q = np.sum(r * r, axis=-1)
    if check and np.any(k * np.sqrt(q) >= THRESHOLD):
        raise ValueError(f"k r >= {THRESHOLD}: use the direct path")
    return GreensDerivs(r, cartesian_partials(r, _series_q_derivs(q, k, nmax, True), nmax))


def eval_G_minus_GB(x, y, k: float, nmax: int = MAX_ORDER) -> GreensDerivs:
    """G - G^B by series; bounded derivatives to order 5 as r -> 0."""
    x, y = _as_pairs(x, y)
    return g_minus_gb_from_r(x - y, k, nmax)


def gb_from_r(r: np.ndarray, nmax: int = MAX_ORDER) -> BiharmonicDerivs:
    q = np.sum(r * r, axis=-1)
    return BiharmonicDerivs(r, cartesian_partials(r, _gb_q_derivs(q, nmax), nmax))


def eval_GB_derivs(x, y, nmax: int = MAX_ORDER) -> BiharmonicDerivs:
    return gb_from_r(_r_of(x, y), nmax)


def logcoef_from_r(r: np.ndarray, k: float, nmax: int = MAX_ORDER, drop_gb: bool = False) -> GreensDerivs:
    """Partials of phi where G = smooth + phi ln r.  Entire in x, y."""
    q = np.sum(r * r, axis=-1)
    return GreensDerivs(r, cartesian_partials(r, _logcoef_q_derivs(q, k, nmax, drop_gb), nmax))


def log_split(x, y, k: float, nmax: int = MAX_ORDER) -> tuple[GreensDerivs, GreensDerivs]:
    """(smooth, log_coefficient) with G = smooth + log_coefficient * ln r."""
    x, y = _as_pairs(x, y)
    r = x - y
    q = np.sum(r * r, axis=-1)
    if np.any(k * np.sqrt(q) >= THRESHOLD):
        raise ValueError(f"k r >= {THRESHOLD}: log split is only summed on the series path")
    smooth = GreensDerivs(r, cartesian_partials(r, _smooth_q_derivs(q, k, nmax), nmax))
    return smooth, logcoef_from_r(r, k, nmax)


# Closed-form G^B directional derivatives, transcribed term by term.
# Arguments: rn* = r . n(*), rt* = r . tau(*), dot products of frames, R2 = |r|^2.

def _gb_table(name, rnx, rtx, rny, rty, nxny, nxty, txny, txty, R2):
    pi = np.pi
    L = np.log(R2)
    R4, R6, R8 = R2 * R2, R2**3, R2**4
    T = {
        # clamped set
        "nyny": lambda: rny**2 / (4 * pi * R2) + L / (8 * pi) + 1 / (8 * pi),
        "tyty": lambda: rty**2 / (4 * pi * R2) + L / (8 * pi) + 1 / (8 * pi),
        "nxnyny": lambda: (rny * nxny / (2 * pi * R2) - rnx * rny**2 / (2 * pi * R4)
                           + rnx / (4 * pi * R2)),
        "nxtyty": lambda: (rty * nxty / (2 * pi * R2) - rnx * rty**2 / (2 * pi * R4)
                           + rnx / (4 * pi * R2)),
        "nynyny": lambda: -3 * rny / (4 * pi * R2) + rny**3 / (2 * pi * R4),
        "nytyty": lambda: rny * rty**2 / (2 * pi * R4) - rny / (4 * pi * R2),
        "nxnynyny": lambda: (-3 * nxny / (4 * pi * R2) + 3 * rny * rnx / (2 * pi * R4)
                             + 3 * rny**2 * nxny / (2 * pi * R4) - 2 * rny**3 * rnx / (pi * R6)),
        "nxnytyty": lambda: (nxny * rty**2 / (2 * pi * R4) + rny * rty * nxty / (pi * R4)
                             - 2 * rny * rty**2 * rnx / (pi * R6) - nxny / (4 * pi * R2)
                             + rny * rnx / (2 * pi * R4)),
        # supported set
        "ny": lambda: -rny * L / (8 * pi) - rny / (8 * pi),
        "ty": lambda: -rty * L / (8 * pi) - rty / (8 * pi),
        "nxnxny": lambda: (-rnx * nxny / (2 * pi * R2) + rny * rnx**2 / (2 * pi * R4)
                           - rny / (4 * pi * R2)),
        "txtxny": lambda: (-rtx * txny / (2 * pi * R2) + rny * rtx**2 / (2 * pi * R4)
                           - rny / (4 * pi * R2)),
        "nxnxty": lambda: (-rnx * nxty / (2 * pi * R2) + rty * rnx**2 / (2 * pi * R4)
                           - rty / (4 * pi * R2)),
        "txtxty": lambda: (-rtx * txty / (2 * pi * R2) + rty * rtx**2 / (2 * pi * R4)
                           - rty / (4 * pi * R2)),
        "nxnxnyny": lambda: (nxny**2 / (2 * pi * R2) - 2 * rnx * rny * nxny / (pi * R4)
                             + 1 / (4 * pi * R2) - rny**2 / (2 * pi * R4)
                             + 2 * rnx**2 * rny**2 / (pi * R6) - rnx**2 / (2 * pi * R4)),
        "txtxnyny": lambda: (txny**2 / (2 * pi * R2) - 2 * rtx * rny * txny / (pi * R4)
                             + 1 / (4 * pi * R2) - rny**2 / (2 * pi * R4)
                             + 2 * rtx**2 * rny**2 / (pi * R6) - rtx**2 / (2 * pi * R4)),
        "nxnxnynyny": lambda: (3 * rny / (2 * pi * R4) - 6 * rny * rnx**2 / (pi * R6)
                               + 3 * rny * nxny**2 / (pi * R4)
                               - 12 * rny**2 * rnx * nxny / (pi * R6) - 2 * rny**3 / (pi * R6)
                               + 12 * rny**3 * rnx**2 / (pi * R8) + 3 * rnx * nxny / (pi * R4)),
        "txtxnynyny": lambda: (3 * rny / (2 * pi * R4) - 6 * rny * rtx**2 / (pi * R6)
                               + 3 * rny * txny**2 / (pi * R4)
                               - 12 * rny**2 * rtx * txny / (pi * R6) - 2 * rny**3 / (pi * R6)
                               + 12 * rny**3 * rtx**2 / (pi * R8) + 3 * rtx * txny / (pi * R4)),
        "nxnxnytyty": lambda: (2 * nxny * nxty * rty / (pi * R4) - 4 * nxny * rty**2 * rnx / (pi * R6)
                               + rny * nxty**2 / (pi * R4) - 8 * rny * rty * rnx * nxty / (pi * R6)
                               - 2 * rny * rty**2 / (pi * R6) + 12 * rny * rty**2 * rnx**2 / (pi * R8)
                               + nxny * rnx / (pi * R4) + rny / (2 * pi * R4)
                               - 2 * rny * rnx**2 / (pi * R6)),
        "txtxnytyty": lambda: (2 * txny * txty * rty / (pi * R4) - 4 * txny * rty**2 * rtx / (pi * R6)
                               + rny * txty**2 / (pi * R4) - 8 * rny * rty * rtx * txty / (pi * R6)
                               - 2 * rny * rty**2 / (pi * R6) + 12 * rny * rty**2 * rtx**2 / (pi * R8)
                               + txny * rtx / (pi * R4) + rny / (2 * pi * R4)
                               - 2 * rny * rtx**2 / (pi * R6)),
        # free set
        "nxnx": lambda: rnx**2 / (4 * pi * R2) + L / (8 * pi) + 1 / (8 * pi),
        "txtx": lambda: rtx**2 / (4 * pi * R2) + L / (8 * pi) + 1 / (8 * pi),
        "nxnxnx": lambda: 3 * rnx / (4 * pi * R2) - rnx**3 / (2 * pi * R4),
        "nxtxtx": lambda: -rnx * rtx**2 / (2 * pi * R4) + rnx / (4 * pi * R2),
        "nxnxnxny": lambda: (-3 * nxny / (4 * pi * R2) + 3 * rny * rnx / (2 * pi * R4)
                             + 3 * rnx**2 * nxny / (2 * pi * R4) - 2 * rnx**3 * rny / (pi * R6)),
        "nxtxtxny": lambda: (rtx**2 * nxny / (2 * pi * R4) + rtx * txny * rnx / (pi * R4)
                             - 2 * rny * rnx * rtx**2 / (pi * R6) - nxny / (4 * pi * R2)
                             + rny * rnx / (2 * pi * R4)),
        "nxnxnxty": lambda: (-3 * nxty / (4 * pi * R2) + 3 * rnx * rty / (2 * pi * R4)
                             + 3 * rnx**2 * nxty / (2 * pi * R4) - 2 * rty * rnx**3 / (pi * R6)),
        "nxtxtxty": lambda: (rnx * rtx * txty / (pi * R4) + nxty * rtx**2 / (2 * pi * R4)
                             - 2 * rnx * rty * rtx**2 / (pi * R6) - nxty / (4 * pi * R2)
                             + rnx * rty / (2 * pi * R4)),
    }
    if name not in T:
        raise KeyError(f"no closed form for G^B_{name}")
    return T[name]()


GB_TABLE_NAMES = (
    "nyny", "tyty", "nxnyny", "nxtyty", "nynyny", "nytyty", "nxnynyny", "nxnytyty",
    "ny", "ty", "nxnxny", "txtxny", "nxnxty", "txtxty", "nxnxnyny", "txtxnyny",
    "nxnxnynyny", "txtxnynyny", "nxnxnytyty", "txtxnytyty",
    "nxnx", "txtx", "nxnxnx", "nxtxtx", "nxnxnxny", "nxtxtxny", "nxnxnxty", "nxtxtxty",
)


def gb_closed_form(name, r, nx=None, tx=None, ny=None, ty=None) -> np.ndarray:
    """Evaluate a tabulated closed-form G^B derivative, e.g. ``"nxnynyny"``."""
    r = np.asarray(r, dtype=float)
    zero = np.zeros_like(r)

    def dot(a, b):
        if a is None or b is None:
            return np.zeros(r.shape[:-1])
        return np.sum(np.asarray(a) * np.asarray(b), axis=-1)

    return _gb_table(
        name,
        dot(r, nx), dot(r, tx), dot(r, ny), dot(r, ty),
        dot(nx, ny), dot(nx, ty), dot(tx, ny), dot(tx, ty),
        np.sum(r * r, axis=-1),
    ) + 0.0 * zero[..., 0]


def parse_dirs(name: str):
    """Split ``"nxnxny"`` into (["nx","nx"], ["ny"]) x- and y-direction tokens."""
    toks = [name[i:i + 2] for i in range(0, len(name), 2)]
    if any(t not in ("nx", "tx", "ny", "ty") for t in toks):
        raise ValueError(f"bad direction string {name!r}")
    return [t for t in toks if t[1] == "x"], [t for t in toks if t[1] == "y"]
