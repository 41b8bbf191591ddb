"""Panel quadrature: Gauss-Legendre rules, log-singular product rules and
adaptive integration for targets close to a panel.

The log product rule is interpolatory.  Given a target parameter ``t0`` in the
reference coordinate of a panel, weights ``w_log`` satisfy

    sum_j w_log[j] q(t_j) = int_{-1}^{1} q(t) ln|t - t0| dt

for every polynomial ``q`` of degree < order.  The moments of the Legendre
polynomials against ``ln|t - t0|`` are obtained in closed form from the
Legendre functions of the second kind.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial import legendre as npleg

MAX_ORDER = 64
MAX_LOG_ORDER = 24
MAX_DEPTH = 40


def smooth_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    if not 2 <= order <= MAX_ORDER:
        raise ValueError(f"order must be in [2, {MAX_ORDER}], got {order}")
    return npleg.leggauss(order)


def barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    w = 1.0 / np.prod(diff * 2.0, axis=1)
    return w / np.max(np.abs(w))


def lagrange_matrix(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Matrix mapping values at ``nodes`` to the interpolant's values at ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    w = barycentric_weights(nodes)
    diff = x[:, None] - nodes[None, :]
    exact = diff == 0.0
    diff[exact] = 1.0
    terms = w[None, :] / diff
    mat = terms / terms.sum(axis=1, keepdims=True)
    hit = exact.any(axis=1)
    if hit.any():
        mat[hit] = exact[hit].astype(float)
    return mat


def cumulative_matrix(order: int) -> np.ndarray:
    """C[i, j] = int_{-1}^{t_i} l_j(t) dt for the Lagrange basis on GL nodes."""
    t, w = smooth_rule(order)
    # Legendre coefficients of each Lagrange basis polynomial
    k = np.arange(order)
    P = npleg.legvander(t, order - 1)
    coef = (P * w[:, None]).T * ((2 * k + 1) / 2.0)[:, None]
    Pext = npleg.legvander(t, order)
    integ = np.empty((order, order))
    integ[:, 0] = t + 1.0
    for kk in range(1, order):
        integ[:, kk] = (Pext[:, kk + 1] - Pext[:, kk - 1]) / (2 * kk + 1)
    return integ @ coef


def _legendre_q(t0: float, n: int) -> np.ndarray:
    """Q_0..Q_n at real t0 != +-1, with ln|(1+t)/(1-t)| on and off the cut."""
    if abs(t0) < 1.0:
        q = np.empty(n + 1)
        q[0] = 0.5 * np.log((1.0 + t0) / (1.0 - t0))
        if n >= 1:
            q[1] = t0 * q[0] - 1.0
        for m in range(1, n):
            q[m + 1] = ((2 * m + 1) * t0 * q[m] - m * q[m - 1]) / (m + 1)
        return q
    # minimal solution outside [-1, 1]: backward (Miller) recurrence
    x = abs(t0)
    rate = np.log(x + np.sqrt(x * x - 1.0))
    start = n + int(np.ceil(40.0 / max(rate, 1e-3))) + 10
    start = min(start, 20000)
    q = np.zeros(start + 2)
    q[start] = 1e-300
    for m in range(start, 0, -1):
        q[m - 1] = ((2 * m + 1) * x * q[m] - (m + 1) * q[m + 1]) / m
    q0 = 0.5 * np.log((x + 1.0) / (x - 1.0))
    q = q[: n + 1] * (q0 / q[0])
    if t0 < 0:
        q = q * (-1.0) ** (np.arange(n + 1) + 1)
    return q


def legendre_log_moments(t0: float, order: int) -> np.ndarray:
    """I_k = int_{-1}^{1} P_k(t) ln|t - t0| dt for k = 0..order-1."""
    if abs(abs(t0) - 1.0) < 1e-14:
        t0 = t0 * (1.0 + 1e-13)
    c = -2.0 * _legendre_q(t0, order)
    mom = np.empty(order)
    a, b = 1.0 - t0, 1.0 + t0
    mom[0] = a * np.log(abs(a)) + b * np.log(abs(b)) - 2.0
    for k in range(1, order):
        mom[k] = -(c[k + 1] - c[k - 1]) / (2 * k + 1)
    return mom


def log_weights(t0: float, order: int) -> np.ndarray:
    """Product weights for q(t) ln|t - t0| on the reference panel."""
    if order > MAX_LOG_ORDER:
        raise ValueError(f"log product rule is ill-conditioned above order {MAX_LOG_ORDER}")
    return _log_weights_cached(float(t0), int(order)).copy()


@lru_cache(maxsize=4096)
def _log_weights_cached(t0: float, order: int) -> np.ndarray:
    t, w = smooth_rule(order)
    mom = legendre_log_moments(t0, order)
    P = npleg.legvander(t, order - 1)
    k = np.arange(order)
    return w * (P @ (mom * (2 * k + 1) / 2.0))


@dataclass(frozen=True)
class LogProductRule:
    """Weights on one source panel for one target, in the panel's reference
    coordinate: ``w_smooth`` integrates q(t), ``w_log`` integrates
    q(t) ln|gamma(t) - x0|."""

    target_index: int
    source_panel: int
    t0: float
    w_smooth: np.ndarray
    w_log: np.ndarray
    near: bool


def build_log_rule(p, target_index: int, source_panel: int) -> LogProductRule:
    """Product rule for a panelization ``p`` (see :mod:`flexbie.geometry`)."""
    if p.order > MAX_LOG_ORDER:
        raise ValueError(f"log product rule is ill-conditioned above order {MAX_LOG_ORDER}")
    tref, wref = p.ref_nodes, p.ref_weights
    x0 = p.pts[target_index]
    a, b = p.panel_bounds[source_panel], p.panel_bounds[source_panel + 1]
    theta0 = p.t[target_index]
    # unwrap the target parameter next to the panel
    period = 2.0 * np.pi
    mid = 0.5 * (a + b)
    theta0 = mid + (theta0 - mid + np.pi) % period - np.pi
    t0 = (2.0 * theta0 - (a + b)) / (b - a)
    src = p.panel_slice(source_panel)
    on = np.arange(src.start, src.stop) == target_index
    if on.any():
        t0 = float(tref[on][0])
    dist = np.min(np.linalg.norm(p.pts[src] - x0, axis=1))
    near = p.panel_of[target_index] == source_panel or dist < p.panel_lengths[source_panel]
    if not near:
        return LogProductRule(target_index, source_panel, t0, wref.copy(), wref * np.log(
            np.linalg.norm(p.pts[src] - x0, axis=1)), False)
    wl = log_weights(t0, p.order)
    theta = a + (tref + 1.0) * 0.5 * (b - a)
    chord = p.curve.chord(theta, np.full_like(theta, p.t[target_index]))
    dt = np.abs(tref - t0)
    ratio = np.empty_like(tref)
    ratio[~on] = np.linalg.norm(chord[~on], axis=1) / dt[~on]
    ratio[on] = p.speed[target_index] * 0.5 * (b - a)
    return LogProductRule(target_index, source_panel, t0, wref.copy(), wl + wref * np.log(ratio), True)


class AdaptiveFailure(RuntimeError):
    """Adaptive bisection reached the depth limit."""


@dataclass
class AdaptiveResult:
    value: np.ndarray
    error: float
    subdivisions: int


def adaptive_panel_integrate(
    integrand: Callable[[np.ndarray], np.ndarray],
    interval: tuple[float, float],
    tol: float = 1e-12,
    order: int = 16,
    target_distance: Callable[[float, float], float] | None = None,
    panel_length: float | None = None,
) -> AdaptiveResult:
    """Integrate ``integrand(t) -> (..., len(t))`` over ``interval``.

    Bisects until the one-level and two-level GL estimates agree to
    ``tol`` relative to the running total.  If ``target_distance(a, b)``
    exceeds ``panel_length`` on the whole interval no check is done.
    """
    if tol < 1e-13:
        raise ValueError("tol must be >= 1e-13")
    tref, wref = smooth_rule(order)

    def gl(a, b):
        th = a + (tref + 1.0) * 0.5 * (b - a)
        return np.asarray(integrand(th)) @ (wref * 0.5 * (b - a))

    a0, b0 = interval
    whole = gl(a0, b0)
    if target_distance is not None and panel_length is not None:
        if target_distance(a0, b0) > panel_length:
            return AdaptiveResult(whole, 0.0, 0)
    scale = max(float(np.max(np.abs(whole))), 1e-300)
    total = np.zeros_like(whole)
    err_total = 0.0
    nsub = 0
    stack = [(a0, b0, whole, 0)]
    while stack:
        a, b, coarse, depth = stack.pop()
        m = 0.5 * (a + b)
        left, right = gl(a, m), gl(m, b)
        fine = left + right
        err = float(np.max(np.abs(fine - coarse)))
        scale = max(scale, float(np.max(np.abs(total + fine))))
        if err <= tol * scale:
            total = total + fine
            err_total += err
            continue
        if depth >= MAX_DEPTH:
            raise AdaptiveFailure(
                f"adaptive quadrature hit max depth {MAX_DEPTH} on [{a}, {b}], "
                f"local error {err:.3e} vs target {tol * scale:.3e}"
            )
        nsub += 1
        stack.append((a, m, left, depth + 1))
        stack.append((m, b, right, depth + 1))
    return AdaptiveResult(total, err_total, nsub)
