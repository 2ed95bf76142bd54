"""Dispersion function of the conditional-mean diffusion.

The conditional mean x = G(t, y) is, for each fixed t, a strictly increasing
bijection from the real observation levels y onto the open interval I between
the support bounds of the prior.  The dispersion function

    Psi(t, x) = H(t, G_t^{-1}(x))

re-expresses the posterior variance in the coordinate of the estimate itself;
it is simultaneously the local variance of the estimate process and the rate
at which estimation error is ground down.  This module inverts the bijection,
tabulates Psi on grids, and provides finite-difference residual diagnostics
for the three parabolic identities satisfied by G, H and Psi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .prior import QuadratureTable, posterior_mean_var

__all__ = [
    "InversionError",
    "PsiGrid",
    "PdeResiduals",
    "invertible_interval",
    "clamp_to_interior",
    "invert_G",
    "psi",
    "psi_grid",
    "pde_residuals",
]

# clamp clearance, relative to the width of the invertible node interval
_ENDPOINT_CLEARANCE = 1e-9


class InversionError(RuntimeError):
    """Raised when the observation level cannot be bracketed or refined."""


def invertible_interval(table: QuadratureTable) -> tuple[float, float]:
    """Open interval of posterior means reachable on this table.

    On a discrete table the posterior mean saturates at the extreme nodes (not
    at the underlying support bounds, which may lie further out or at
    infinity), so (nodes[0], nodes[-1]) is exactly where the inversion is
    well-posed.
    """
    return float(table.nodes[0]), float(table.nodes[-1])


def clamp_to_interior(table: QuadratureTable, x: float) -> tuple[float, bool]:
    """Pull x strictly inside the invertible interval, flagging when moved.

    The bijection maps the interval endpoints to infinite observation levels,
    so grid points must never sit exactly on them.  Points outside the closed
    support interval, or exactly on a finite support endpoint, are rejected;
    points between a support bound and the nearest node (possible for
    tail-truncated continuous families) are clamped inward with the flag set.
    """
    s_lo, s_hi = table.support_bounds
    x = float(x)
    if x < s_lo or x > s_hi:
        raise ValueError(f"x={x!r} lies outside the support interval [{s_lo!r}, {s_hi!r}]")
    if (x == s_lo and math.isfinite(s_lo)) or (x == s_hi and math.isfinite(s_hi)):
        raise ValueError(f"x={x!r} sits on a finite support endpoint; the inverse is infinite")
    lo, hi = invertible_interval(table)
    eps = _ENDPOINT_CLEARANCE * (hi - lo)
    if x < lo + eps:
        return lo + eps, True
    if x > hi - eps:
        return hi - eps, True
    return x, False


def invert_G(table: QuadratureTable, t: float, x: float, tol: float = 1e-10) -> float:
    """Observation level y with |G(t, y) - x| <= tol.

    Brackets the root by doubling expansion from |y| = 1, then refines with a
    bisection/secant hybrid (Illinois rule).  Deterministic for fixed inputs.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    x, _ = clamp_to_interior(table, x)

    def g(yy: float) -> float:
        gv, _ = posterior_mean_var(table, t, yy)
        return float(gv[0]) - x

    lo, hi = -1.0, 1.0
    flo, fhi = g(lo), g(hi)
    for _ in range(120):
        if flo <= 0.0:
            break
        lo *= 2.0
        flo = g(lo)
    else:
        raise InversionError(f"could not bracket x={x!r} from below (t={t!r})")
    for _ in range(120):
        if fhi >= 0.0:
            break
        hi *= 2.0
        fhi = g(hi)
    else:
        raise InversionError(f"could not bracket x={x!r} from above (t={t!r})")
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi

    # Illinois-damped regula falsi with a bisection safeguard
    side = 0
    y = 0.5 * (lo + hi)
    for _ in range(200):
        denom = fhi - flo
        if denom != 0.0:
            y = hi - fhi * (hi - lo) / denom
        if not (lo < y < hi):
            y = 0.5 * (lo + hi)
        fy = g(y)
        if abs(fy) <= tol:
            return y
        if fy > 0.0:
            hi, fhi = y, fy
            if side == +1:
                flo *= 0.5
            side = +1
        else:
            lo, flo = y, fy
            if side == -1:
                fhi *= 0.5
            side = -1
        if hi - lo <= 4.0 * np.finfo(float).eps * max(1.0, abs(lo), abs(hi)):
            y = 0.5 * (lo + hi)
            if abs(g(y)) <= tol:
                return y
            raise InversionError(
                f"bracket collapsed at y={y!r} without meeting tol={tol!r} (t={t!r}, x={x!r})"
            )
    raise InversionError(f"inversion did not converge for t={t!r}, x={x!r}")


def _invert_array(
    table: QuadratureTable,
    t: float,
    x: np.ndarray,
    tol: float,
    y0: np.ndarray | None = None,
) -> np.ndarray:
    """Vectorized inversion of G(t, .) at many x, Newton steps inside brackets.

    Warm starts from ``y0`` when given (previous grid row).  Falls back to
    bisection whenever a Newton step leaves the bracket, so termination only
    needs the bracket; the posterior variance is the exact spatial derivative
    of G, which makes the Newton updates quadratically convergent in practice.
    """

    def g_of(yy: np.ndarray, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        gv, hv = posterior_mean_var(table, t, yy)
        return gv - xs, hv

    k = x.size
    y = np.zeros(k) if y0 is None else np.array(y0, dtype=float)
    lo = y - 1.0
    hi = y + 1.0
    flo, _ = g_of(lo, x)
    fhi, _ = g_of(hi, x)
    step = 2.0
    for _ in range(140):
        need = flo > 0.0
        if not need.any():
            break
        lo = np.where(need, lo - step, lo)
        step *= 2.0
        flo, _ = g_of(lo, x)
    else:
        raise InversionError("could not bracket all grid points from below")
    step = 2.0
    for _ in range(140):
        need = fhi < 0.0
        if not need.any():
            break
        hi = np.where(need, hi + step, hi)
        step *= 2.0
        fhi, _ = g_of(hi, x)
    else:
        raise InversionError("could not bracket all grid points from above")

    y = 0.5 * (lo + hi)
    fy, dy = g_of(y, x)
    eps = np.finfo(float).eps
    for _ in range(200):
        done = np.abs(fy) <= tol
        if done.all():
            return y
        act = np.nonzero(~done)[0]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            newton = y[act] - fy[act] / dy[act]
        inside = np.isfinite(newton) & (newton > lo[act]) & (newton < hi[act])
        cand = np.where(inside, newton, 0.5 * (lo[act] + hi[act]))
        fc, dc = g_of(cand, x[act])
        pos = fc > 0.0
        hi[act] = np.where(pos, cand, hi[act])
        lo[act] = np.where(pos, lo[act], cand)
        y[act], fy[act], dy[act] = cand, fc, dc
        collapsed = (hi[act] - lo[act]) <= 4.0 * eps * np.maximum(1.0, np.abs(y[act]))
        if collapsed.all():
            still_bad = np.abs(fc) > tol
            if still_bad.any():
                j = int(act[np.nonzero(still_bad)[0][0]])
                raise InversionError(
                    f"bracket collapsed at x={x[j]!r} (t={t!r}) without meeting tol={tol!r}"
                )
            return y
    raise InversionError(f"vectorized inversion did not converge at t={t!r}")


def psi(table: QuadratureTable, t: float, x: float, tol: float = 1e-10) -> float:
    """Dispersion Psi(t, x): posterior variance at the inverted observation level."""
    y = invert_G(table, t, x, tol=tol)
    _, h = posterior_mean_var(table, t, y)
    return float(h[0])


@dataclass
class PsiGrid:
    """Tabulated dispersion surface with the inverted observation levels.

    ``values[i, j] = Psi(t_nodes[i], x_nodes[j])`` and ``y_nodes[i, j]`` is the
    observation level mapped to x_nodes[j] at time t_nodes[i].
    """

    t_nodes: np.ndarray
    x_nodes: np.ndarray
    values: np.ndarray
    y_nodes: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.t_nodes = np.asarray(self.t_nodes, dtype=float)
        self.x_nodes = np.asarray(self.x_nodes, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.y_nodes = np.asarray(self.y_nodes, dtype=float)
        if self.values.shape != (self.t_nodes.size, self.x_nodes.size):
            raise ValueError("values shape must be (len(t_nodes), len(x_nodes))")
        if self.y_nodes.shape != self.values.shape:
            raise ValueError("y_nodes shape must match values")

    def worst_time_monotonicity_violation(self) -> float:
        """Largest increase of Psi along the time axis (theory says none)."""
        if self.t_nodes.size < 2:
            return 0.0
        return float(np.max(np.diff(self.values, axis=0)))

    def to_csv(self, path) -> None:
        from .cli import format_float  # local import: formatting lives with the CLI

        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t," + ",".join(format_float(x) for x in self.x_nodes) + "\n")
            for ti, row in zip(self.t_nodes, self.values):
                fh.write(format_float(ti) + "," + ",".join(format_float(v) for v in row) + "\n")


def psi_grid(
    table: QuadratureTable,
    t_nodes,
    x_nodes,
    tol: float = 1e-10,
    t_offset: float = 0.0,
) -> PsiGrid:
    """Tabulate Psi over a (t, x) lattice, warm-starting inversions row by row.

    ``t_offset`` shifts the evaluation times (Psi is computed at t + offset but
    the grid keeps the unshifted labels); used for time-shift comparisons.
    """
    t_arr = np.asarray(t_nodes, dtype=float)
    x_arr = np.asarray(x_nodes, dtype=float)
    if t_arr.ndim != 1 or x_arr.ndim != 1:
        raise ValueError("t_nodes and x_nodes must be 1-d")
    if np.any(np.diff(t_arr) <= 0.0) or np.any(np.diff(x_arr) <= 0.0):
        raise ValueError("t_nodes and x_nodes must be strictly increasing")

    clamped = 0
    x_eval = np.empty_like(x_arr)
    for j, xv in enumerate(x_arr):
        x_eval[j], moved = clamp_to_interior(table, xv)
        clamped += int(moved)

    values = np.empty((t_arr.size, x_arr.size))
    y_nodes = np.empty_like(values)
    y_prev: np.ndarray | None = None
    for i, ti in enumerate(t_arr):
        y_row = _invert_array(table, float(ti + t_offset), x_eval, tol, y0=y_prev)
        _, h_row = posterior_mean_var(table, float(ti + t_offset), y_row)
        values[i] = h_row
        y_nodes[i] = y_row
        y_prev = y_row
    return PsiGrid(
        t_nodes=t_arr,
        x_nodes=x_arr,
        values=values,
        y_nodes=y_nodes,
        meta={"tol": tol, "t_offset": t_offset, "clamped_points": clamped},
    )


class PdeResiduals(NamedTuple):
    burgers: float
    variance_pde: float
    psi_pde: float


def pde_residuals(table: QuadratureTable, t: float, point: float, h: float) -> PdeResiduals:
    """Central-difference residuals of the three filtering identities.

    At (t, y=point): the backwards Burgers residual dG + (1/2) D2G + G*DG and
    the variance residual dH + (1/2) D2H + G*DH + H^2, stencils in y.  At
    (t, x=point): the dispersion residual dPsi + Psi^2 ((1/2) D2Psi + 1),
    stencil in x.  All three vanish analytically; the returned numbers decay
    at second order in h.
    """
    if h <= 0.0:
        raise ValueError("step h must be positive")
    if t - h <= 0.0:
        raise ValueError(f"stencil leaves the domain: t - h = {t - h!r} <= 0")

    y = float(point)
    g_c, h_c = posterior_mean_var(table, t, np.array([y - h, y, y + h]))
    g_tm, h_tm = posterior_mean_var(table, t - h, y)
    g_tp, h_tp = posterior_mean_var(table, t + h, y)

    dG = (g_tp[0] - g_tm[0]) / (2.0 * h)
    DG = (g_c[2] - g_c[0]) / (2.0 * h)
    D2G = (g_c[2] - 2.0 * g_c[1] + g_c[0]) / (h * h)
    burgers = dG + 0.5 * D2G + g_c[1] * DG

    dH = (h_tp[0] - h_tm[0]) / (2.0 * h)
    DH = (h_c[2] - h_c[0]) / (2.0 * h)
    D2H = (h_c[2] - 2.0 * h_c[1] + h_c[0]) / (h * h)
    variance = dH + 0.5 * D2H + g_c[1] * DH + h_c[1] ** 2

    x = float(point)
    lo, hi = invertible_interval(table)
    if not (lo < x - h and x + h < hi):
        raise ValueError(f"x stencil [{x - h!r}, {x + h!r}] leaves the invertible interval")
    p_c = psi(table, t, x)
    p_xm = psi(table, t, x - h)
    p_xp = psi(table, t, x + h)
    p_tm = psi(table, t - h, x)
    p_tp = psi(table, t + h, x)
    dPsi = (p_tp - p_tm) / (2.0 * h)
    D2Psi = (p_xp - 2.0 * p_c + p_xm) / (h * h)
    psi_res = dPsi + p_c**2 * (0.5 * D2Psi + 1.0)

    return PdeResiduals(burgers=float(burgers), variance_pde=float(variance), psi_pde=float(psi_res))
