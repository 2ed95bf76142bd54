"""Backward-in-time obstacle solver for the optimal stopping value function.

The estimate process diffuses with local variance Psi(t, x)^2 and the running
cost of continuing observation is c - Psi^2.  The value function v <= 0 solves
the parabolic variational inequality

    min( dv/dt + (1/2) Psi^2 d2v/dx2 + c - Psi^2,  -v ) = 0

backward from a horizon where stopping is known to be optimal.  Each implicit
Euler step is a tridiagonal linear complementarity problem solved either by
projected SOR (red-black sweeps) or by policy iteration with direct banded
solves.  Stopping regions are read off the solved grid and classified.

For priors whose dispersion never falls below sqrt(c) (time-homogeneous cases
such as two-point priors), the zero terminal condition is inexact at any
horizon; ``t_burnin`` extends the solve backward beyond the reported window so
the reported values have converged to the stationary solution.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import solve_banded

from .closed_form import bernoulli_solve
from .dispersion import PsiGrid, invertible_interval, psi_grid as build_psi_grid
from .prior import QuadratureTable

__all__ = [
    "SolverError",
    "SolverConfig",
    "ValueGrid",
    "BoundaryCurve",
    "HorizonResult",
    "MonotonicityReport",
    "OrderingReport",
    "RegionCheck",
    "choose_horizon",
    "default_domain",
    "solver_psi_grid",
    "solve_value",
    "extract_regions",
    "monotonicity_report",
    "compare_value_ordering",
    "bernoulli_comparison_check",
    "locally_good_check",
]

_SCHEMES = ("implicit_psor", "policy_iteration")
_BCS = ("neumann_zero", "dirichlet_zero")


class SolverError(RuntimeError):
    """Numerical failure inside the obstacle solver."""


@dataclass(frozen=True)
class SolverConfig:
    """Discretization and per-step solve parameters.

    ``x_lo``/``x_hi`` truncate the state space strictly inside the support
    interval; ``T_max`` is the reported horizon while ``t_burnin`` adds hidden
    backward time before it.  ``bc`` selects the lateral boundary condition:
    ``neumann_zero`` (reflecting, exact whenever the dispersion is flat in x
    near the truncation or the truncation lies in the stopping region) or
    ``dirichlet_zero`` (hard zero, flagged if the boundary rows are not in the
    stopping region).
    """

    n_t: int
    n_x: int
    T_max: float
    x_lo: float
    x_hi: float
    obstacle_tol: float = 1e-10
    scheme: str = "implicit_psor"
    bc: str = "neumann_zero"
    t_burnin: float = 0.0
    psor_omega: float = 1.5
    psor_max_sweeps: int = 10_000

    def __post_init__(self) -> None:
        if self.n_t < 8 or self.n_x < 8:
            raise ValueError("need n_t >= 8 and n_x >= 8")
        if not (self.T_max > 0.0):
            raise ValueError("T_max must be positive")
        if not (self.x_lo < self.x_hi):
            raise ValueError("x_lo must be below x_hi")
        if self.obstacle_tol <= 0.0:
            raise ValueError("obstacle_tol must be positive")
        if self.scheme not in _SCHEMES:
            raise ValueError(f"scheme must be one of {_SCHEMES}")
        if self.bc not in _BCS:
            raise ValueError(f"bc must be one of {_BCS}")
        if self.t_burnin < 0.0:
            raise ValueError("t_burnin must be >= 0")

    @property
    def dt(self) -> float:
        return self.T_max / self.n_t

    @property
    def n_burn(self) -> int:
        return int(round(self.t_burnin / self.dt)) if self.t_burnin > 0.0 else 0

    @property
    def zero_tol(self) -> float:
        # region classification must not chase solver noise
        return 10.0 * self.obstacle_tol

    def solve_times(self) -> np.ndarray:
        return np.arange(self.n_t + self.n_burn + 1) * self.dt

    def x_nodes(self) -> np.ndarray:
        return np.linspace(self.x_lo, self.x_hi, self.n_x)

    def to_dict(self) -> dict:
        return {
            "n_t": self.n_t,
            "n_x": self.n_x,
            "T_max": self.T_max,
            "x_lo": self.x_lo,
            "x_hi": self.x_hi,
            "obstacle_tol": self.obstacle_tol,
            "scheme": self.scheme,
            "bc": self.bc,
            "t_burnin": self.t_burnin,
            "psor_omega": self.psor_omega,
            "psor_max_sweeps": self.psor_max_sweeps,
        }

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def default_domain(table: QuadratureTable, n_sigmas: float = 6.0) -> tuple[float, float]:
    """Spatial truncation: prior mean +/- n_sigmas std, clipped inside the invertible range."""
    mean, var = table.mean(), table.variance()
    std = math.sqrt(var)
    lo_n, hi_n = invertible_interval(table)
    eps = 1e-6 * (hi_n - lo_n)
    x_lo = max(mean - n_sigmas * std, lo_n + eps)
    x_hi = min(mean + n_sigmas * std, hi_n - eps)
    return float(x_lo), float(x_hi)


def solver_psi_grid(table: QuadratureTable, config: SolverConfig, tol: float = 1e-10) -> PsiGrid:
    """Dispersion surface evaluated exactly on the solver's lattice (burn-in included)."""
    return build_psi_grid(table, config.solve_times(), config.x_nodes(), tol=tol)


class HorizonResult(NamedTuple):
    t_c: float | None
    horizon: float
    capped: bool


def choose_horizon(grid: PsiGrid, c: float) -> HorizonResult:
    """Smallest grid time where sup_x Psi^2 <= c, with a 10% safety margin.

    Beyond that time the whole spatial slice belongs to the stopping region,
    so truncating the solve there is exact.  When the scanned range never
    satisfies the condition the scan limit is returned with ``capped=True``.
    """
    if c <= 0.0:
        raise ValueError("cost rate c must be positive")
    sup_psi2 = np.max(grid.values**2, axis=1)
    hits = np.nonzero(sup_psi2 <= c)[0]
    if hits.size == 0:
        return HorizonResult(t_c=None, horizon=float(grid.t_nodes[-1]), capped=True)
    t_c = float(grid.t_nodes[hits[0]])
    return HorizonResult(t_c=t_c, horizon=1.1 * t_c, capped=False)


@dataclass
class ValueGrid:
    """Solved value surface on the reported window [0, T_max]."""

    t_nodes: np.ndarray
    x_nodes: np.ndarray
    values: np.ndarray
    psi_values: np.ndarray
    c: float
    config: SolverConfig
    meta: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        from .cli import format_float

        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t," + ",".join(format_float(x) for x in self.x_nodes) + "\n")
            for ti, row in zip(self.t_nodes, self.values):
                fh.write(format_float(ti) + "," + ",".join(format_float(v) for v in row) + "\n")


def _step_operator(psi_row: np.ndarray, dt: float, dx: float, bc: str):
    """Tridiagonal coefficients of the implicit step A v = rhs."""
    mu = 0.5 * dt * psi_row**2 / (dx * dx)
    n = psi_row.size
    diag = 1.0 + 2.0 * mu
    lower = -mu.copy()  # coefficient of v[j-1] in row j
    upper = -mu.copy()  # coefficient of v[j+1] in row j
    if bc == "dirichlet_zero":
        diag[0] = diag[-1] = 1.0
        lower[0] = lower[-1] = 0.0
        upper[0] = upper[-1] = 0.0
    else:  # reflecting ghost node: second difference uses the inner neighbor twice
        diag[0] = 1.0 + 2.0 * mu[0]
        upper[0] = -2.0 * mu[0]
        lower[0] = 0.0
        diag[-1] = 1.0 + 2.0 * mu[-1]
        lower[-1] = -2.0 * mu[-1]
        upper[-1] = 0.0
    return lower, diag, upper


def _neighbor_terms(v: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v)
    out[1:] += lower[1:] * v[:-1]
    out[:-1] += upper[:-1] * v[1:]
    return out


def _psor_step(
    v0: np.ndarray,
    rhs: np.ndarray,
    lower: np.ndarray,
    diag: np.ndarray,
    upper: np.ndarray,
    omega: float,
    tol: float,
    max_sweeps: int,
) -> tuple[np.ndarray, int]:
    """Projected SOR (obstacle v <= 0) with red-black ordering."""
    v = np.minimum(v0, 0.0)
    n = v.size
    red = np.arange(0, n, 2)
    black = np.arange(1, n, 2)
    for sweep in range(1, max_sweeps + 1):
        v_prev = v.copy()
        for idx in (red, black):
            nb = _neighbor_terms(v, lower, upper)
            gs = (rhs[idx] - nb[idx]) / diag[idx]
            v[idx] = np.minimum(0.0, v[idx] + omega * (gs - v[idx]))
        delta = float(np.max(np.abs(v - v_prev)))
        if delta <= tol:
            return v, sweep
    raise SolverError(
        f"projected SOR did not converge in {max_sweeps} sweeps (last delta {delta:.3e})"
    )


def _policy_step(
    rhs: np.ndarray,
    lower: np.ndarray,
    diag: np.ndarray,
    upper: np.ndarray,
    stopped0: np.ndarray,
    forced_stop: np.ndarray,
    max_iter: int = 100,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Exact LCP solve by policy iteration over the stopped set."""
    n = rhs.size
    stopped = stopped0 | forced_stop
    slack = 1e-13 * max(1.0, float(np.max(np.abs(rhs))))
    for it in range(1, max_iter + 1):
        ab = np.zeros((3, n))
        d = np.where(stopped, 1.0, diag)
        lo = np.where(stopped, 0.0, lower)
        up = np.where(stopped, 0.0, upper)
        b = np.where(stopped, 0.0, rhs)
        ab[0, 1:] = up[:-1]
        ab[1, :] = d
        ab[2, :-1] = lo[1:]
        v = solve_banded((1, 1), ab, b)
        # residual of the *original* rows decides admissibility of stopping
        resid = rhs - (diag * v + _neighbor_terms(v, lower, upper))
        new_stopped = np.where(stopped, resid >= -slack, v > slack) | forced_stop
        if np.array_equal(new_stopped, stopped):
            return np.minimum(v, 0.0), stopped, it
        stopped = new_stopped
    raise SolverError(f"policy iteration did not settle in {max_iter} iterations")


def solve_value(grid: PsiGrid, c: float, config: SolverConfig) -> ValueGrid:
    """Backward induction for the value surface.

    Parameters
    ----------
    grid : PsiGrid
        Dispersion surface covering [0, T_max + t_burnin] x [x_lo, x_hi].
        When its lattice matches the solver lattice the values are used
        directly, otherwise they are interpolated bilinearly (flagged).
    c : float
        Observation cost per unit time.
    config : SolverConfig

    The terminal slice is zero (exact once the horizon passes the time where
    sup_x Psi^2 <= c; approximate-but-converged beyond a burn-in window
    otherwise).  If c already dominates Psi^2 everywhere on the first slice,
    immediate stopping is optimal and the solve short-circuits to v = 0.
    """
    if c <= 0.0:
        raise ValueError("cost rate c must be positive")
    t_solve = config.solve_times()
    x = config.x_nodes()
    dx = float(x[1] - x[0])
    dt = config.dt
    flags: list[str] = []

    psi_mat, interpolated = _align_psi(grid, t_solve, x)
    if interpolated:
        flags.append("psi_interpolated")

    n_total = t_solve.size
    n_report = config.n_t + 1
    psi2 = psi_mat**2

    if config.bc == "dirichlet_zero" and np.any(psi2[:, [0, -1]] > c):
        flags.append("dirichlet_boundary_inconsistent")

    values = np.zeros((n_total, x.size))
    iterations = np.zeros(n_total - 1, dtype=int)

    if float(np.max(psi2[0])) <= c:
        flags.append("short_circuit_immediate_stop")
    else:
        forced = np.zeros(x.size, dtype=bool)
        if config.bc == "dirichlet_zero":
            forced[0] = forced[-1] = True
        stopped = None
        for k in range(n_total - 2, -1, -1):
            lower, diag, upper = _step_operator(psi_mat[k], dt, dx, config.bc)
            rhs = values[k + 1] + dt * (c - psi2[k])
            if config.bc == "dirichlet_zero":
                rhs[0] = rhs[-1] = 0.0
            if config.scheme == "implicit_psor":
                values[k], sweeps = _psor_step(
                    values[k + 1],
                    rhs,
                    lower,
                    diag,
                    upper,
                    config.psor_omega,
                    config.obstacle_tol,
                    config.psor_max_sweeps,
                )
                iterations[k] = sweeps
            else:
                init = stopped if stopped is not None else (rhs >= 0.0)
                values[k], stopped, iters = _policy_step(rhs, lower, diag, upper, init, forced)
                iterations[k] = iters

    meta = {
        "scheme": config.scheme,
        "bc": config.bc,
        "flags": flags,
        "n_burn": config.n_burn,
        "config_hash": config.digest(),
        "max_step_iterations": int(iterations.max()) if iterations.size else 0,
        "total_step_iterations": int(iterations.sum()),
    }
    return ValueGrid(
        t_nodes=t_solve[:n_report].copy(),
        x_nodes=x,
        values=values[:n_report],
        psi_values=psi_mat[:n_report],
        c=float(c),
        config=config,
        meta=meta,
    )


def _align_psi(grid: PsiGrid, t_solve: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, bool]:
    same_t = grid.t_nodes.size == t_solve.size and np.allclose(
        grid.t_nodes, t_solve, rtol=0.0, atol=1e-12 * max(1.0, float(t_solve[-1]))
    )
    same_x = grid.x_nodes.size == x.size and np.allclose(
        grid.x_nodes, x, rtol=0.0, atol=1e-12 * max(1.0, float(np.max(np.abs(x))))
    )
    if same_t and same_x:
        return grid.values.copy(), False
    t_tol = 1e-9 * max(1.0, float(t_solve[-1]))
    x_tol = 1e-9 * max(1.0, float(np.max(np.abs(x))))
    if grid.t_nodes[0] > t_solve[0] + t_tol or grid.t_nodes[-1] < t_solve[-1] - t_tol:
        raise ValueError(
            f"psi grid time range [{grid.t_nodes[0]!r}, {grid.t_nodes[-1]!r}] does not cover "
            f"the solve range [0, {t_solve[-1]!r}]"
        )
    if grid.x_nodes[0] > x[0] + x_tol or grid.x_nodes[-1] < x[-1] - x_tol:
        raise ValueError("psi grid spatial range does not cover the solver domain")
    # linear in t, then linear in x
    tmp = np.empty((t_solve.size, grid.x_nodes.size))
    for j in range(grid.x_nodes.size):
        tmp[:, j] = np.interp(t_solve, grid.t_nodes, grid.values[:, j])
    out = np.empty((t_solve.size, x.size))
    for i in range(t_solve.size):
        out[i] = np.interp(x, grid.x_nodes, tmp[i])
    return out, True


# ---------------------------------------------------------------------------
# region extraction and structural checks
# ---------------------------------------------------------------------------


@dataclass
class BoundaryCurve:
    """Per-slice stopping intervals with a shape classification.

    ``shape`` is one of ``all_stop``, ``one_sided_lower`` (stop at and below
    b(t)), ``one_sided_upper`` (stop at and above b(t)), ``two_sided_symmetric``
    (continue inside (-b(t), b(t))), or ``general``.  ``b`` uses +/-inf for
    slices where the stopping set is empty or everything in the convention of
    the detected shape.
    """

    t_nodes: np.ndarray
    intervals: list[list[tuple[float, float]]]
    shape: str
    b: np.ndarray
    zero_tol: float
    stop_mask: np.ndarray | None = None
    x_nodes: np.ndarray | None = None

    @classmethod
    def symmetric_threshold(cls, a: float) -> "BoundaryCurve":
        """Constant-in-time rule: stop as soon as |x| >= a."""
        a = float(a)
        return cls(
            t_nodes=np.array([0.0]),
            intervals=[[(-math.inf, -a), (a, math.inf)]],
            shape="two_sided_symmetric",
            b=np.array([a]),
            zero_tol=0.0,
        )

    @classmethod
    def stop_below(cls, b: float) -> "BoundaryCurve":
        """Constant-in-time rule: stop as soon as x <= b."""
        b = float(b)
        return cls(
            t_nodes=np.array([0.0]),
            intervals=[[(-math.inf, b)]],
            shape="one_sided_lower",
            b=np.array([b]),
            zero_tol=0.0,
        )

    def slice_index(self, t: float) -> int:
        i = int(np.searchsorted(self.t_nodes, t + 1e-15, side="right") - 1)
        return min(max(i, 0), self.t_nodes.size - 1)

    def contains(self, t: float, x) -> np.ndarray:
        """Is (t, x) in the stopping set?  Piecewise constant to the right in t."""
        segs = self.intervals[self.slice_index(t)]
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros(x_arr.shape, dtype=bool)
        for lo, hi in segs:
            out |= (x_arr >= lo) & (x_arr <= hi)
        return out

    def shifted(self, delta: float) -> "BoundaryCurve":
        """Move the stopping boundary outward (delta > 0 enlarges continuation).

        Supported for the threshold-style shapes used by policy perturbation.
        """
        if self.shape == "two_sided_symmetric":
            new_b = np.maximum(self.b + delta, 0.0)
            ivals = [
                [(-math.inf, -bb), (bb, math.inf)] if math.isfinite(bb) else []
                for bb in new_b
            ]
            return BoundaryCurve(
                t_nodes=self.t_nodes.copy(),
                intervals=ivals,
                shape=self.shape,
                b=new_b,
                zero_tol=self.zero_tol,
            )
        if self.shape == "one_sided_lower":
            new_b = self.b - delta
            ivals: list[list[tuple[float, float]]] = []
            for bb in new_b:
                if bb == math.inf:  # whole slice stops regardless of the shift
                    ivals.append([(-math.inf, math.inf)])
                elif bb == -math.inf:
                    ivals.append([])
                else:
                    ivals.append([(-math.inf, float(bb))])
            return BoundaryCurve(
                t_nodes=self.t_nodes.copy(),
                intervals=ivals,
                shape=self.shape,
                b=new_b,
                zero_tol=self.zero_tol,
            )
        raise ValueError(f"shift not supported for shape {self.shape!r}")

    def to_csv(self, path) -> None:
        from .cli import format_float

        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t,shape,b,intervals\n")
            for i, ti in enumerate(self.t_nodes):
                segs = ";".join(
                    f"{format_float(lo)}:{format_float(hi)}" for lo, hi in self.intervals[i]
                )
                fh.write(f"{format_float(ti)},{self.shape},{format_float(self.b[i])},{segs}\n")


def _crossing(x_stop: float, v_stop: float, x_cont: float, v_cont: float, ztol: float) -> float:
    # linear interpolation of v to the classification level -ztol
    denom = v_stop - v_cont
    if denom <= 0.0:
        return x_stop
    frac = (v_stop + ztol) / denom
    return float(x_stop + (x_cont - x_stop) * min(max(frac, 0.0), 1.0))


def extract_regions(grid: ValueGrid, zero_tol: float | None = None) -> BoundaryCurve:
    """Stopping set per time slice, merged into maximal intervals and classified."""
    ztol = grid.config.zero_tol if zero_tol is None else float(zero_tol)
    x = grid.x_nodes
    n_x = x.size
    mask = grid.values >= -ztol
    all_intervals: list[list[tuple[float, float]]] = []
    kinds: list[str] = []
    b_vals: list[float] = []
    centers: list[float] = []

    for i in range(grid.t_nodes.size):
        row = mask[i]
        v = grid.values[i]
        runs: list[tuple[int, int]] = []
        j = 0
        while j < n_x:
            if row[j]:
                j0 = j
                while j + 1 < n_x and row[j + 1]:
                    j += 1
                runs.append((j0, j))
            j += 1
        segs: list[tuple[float, float]] = []
        for j0, j1 in runs:
            lo = x[0] if j0 == 0 else _crossing(x[j0], v[j0], x[j0 - 1], v[j0 - 1], ztol)
            hi = x[-1] if j1 == n_x - 1 else _crossing(x[j1], v[j1], x[j1 + 1], v[j1 + 1], ztol)
            segs.append((float(lo), float(hi)))
        all_intervals.append(segs)

        if not runs:
            kinds.append("empty")
            b_vals.append(math.nan)
            centers.append(0.0)
        elif len(runs) == 1 and runs[0] == (0, n_x - 1):
            kinds.append("full")
            b_vals.append(math.nan)
            centers.append(0.0)
        elif len(runs) == 1 and runs[0][0] == 0:
            kinds.append("lower")
            b_vals.append(segs[0][1])
            centers.append(0.0)
        elif len(runs) == 1 and runs[0][1] == n_x - 1:
            kinds.append("upper")
            b_vals.append(segs[0][0])
            centers.append(0.0)
        elif len(runs) == 2 and runs[0][0] == 0 and runs[1][1] == n_x - 1:
            kinds.append("two_sided")
            b_vals.append(0.5 * (segs[1][0] - segs[0][1]))
            centers.append(0.5 * (segs[1][0] + segs[0][1]))
        else:
            kinds.append("other")
            b_vals.append(math.nan)
            centers.append(math.nan)

    dx = float(np.max(np.diff(x)))
    kind_set = set(kinds)
    sym_ok = all(
        k != "two_sided" or abs(ctr) <= 2.0 * dx for k, ctr in zip(kinds, centers)
    )
    if kind_set <= {"full"}:
        shape = "all_stop"
        b = np.full(len(kinds), -math.inf)
    elif "lower" in kind_set and kind_set <= {"empty", "full", "lower"}:
        shape = "one_sided_lower"
        b = np.array(
            [
                -math.inf if k == "empty" else (math.inf if k == "full" else bv)
                for k, bv in zip(kinds, b_vals)
            ]
        )
    elif "upper" in kind_set and kind_set <= {"empty", "full", "upper"}:
        shape = "one_sided_upper"
        b = np.array(
            [
                math.inf if k == "empty" else (-math.inf if k == "full" else bv)
                for k, bv in zip(kinds, b_vals)
            ]
        )
    elif kind_set <= {"empty", "full", "two_sided"} and sym_ok:
        shape = "two_sided_symmetric"
        b = np.array(
            [
                math.inf if k == "empty" else (0.0 if k == "full" else bv)
                for k, bv in zip(kinds, b_vals)
            ]
        )
    else:
        shape = "general"
        b = np.array(b_vals)

    return BoundaryCurve(
        t_nodes=grid.t_nodes.copy(),
        intervals=all_intervals,
        shape=shape,
        b=b,
        zero_tol=ztol,
        stop_mask=mask,
        x_nodes=x.copy(),
    )


@dataclass
class MonotonicityReport:
    passed: bool
    worst_value_violation: float
    nesting_violations: int
    value_tol: float
    zero_tol: float

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "worst_value_violation": self.worst_value_violation,
            "nesting_violations": self.nesting_violations,
            "value_tol": self.value_tol,
            "zero_tol": self.zero_tol,
        }


def monotonicity_report(
    grid: ValueGrid, zero_tol: float | None = None, value_tol: float | None = None
) -> MonotonicityReport:
    """Check that v is non-decreasing in t pointwise and stopping slices are nested."""
    ztol = grid.config.zero_tol if zero_tol is None else float(zero_tol)
    vtol = 10.0 * grid.config.obstacle_tol if value_tol is None else float(value_tol)
    diffs = grid.values[:-1] - grid.values[1:]  # positive entries violate monotonicity
    worst = float(max(np.max(diffs), 0.0)) if diffs.size else 0.0
    mask = grid.values >= -ztol
    nest_bad = int(np.sum(mask[:-1] & ~mask[1:]))
    return MonotonicityReport(
        passed=(worst <= vtol and nest_bad == 0),
        worst_value_violation=worst,
        nesting_violations=nest_bad,
        value_tol=vtol,
        zero_tol=ztol,
    )


class OrderingReport(NamedTuple):
    passed: bool
    worst_violation: float
    n_common_t: int
    n_common_x: int


def _common_indices(a: np.ndarray, b: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    ia, ib = [], []
    j = 0
    for i, av in enumerate(a):
        while j < b.size and b[j] < av - tol:
            j += 1
        if j < b.size and abs(b[j] - av) <= tol:
            ia.append(i)
            ib.append(j)
            j += 1
    return np.array(ia, dtype=int), np.array(ib, dtype=int)


def compare_value_ordering(
    grid1: ValueGrid, grid2: ValueGrid, tol: float = 1e-8, psi_tol: float = 1e-8
) -> OrderingReport:
    """Check v1 <= v2 on common nodes, given the dispersion ordering Psi1 >= Psi2.

    The dispersion premise is verified first on the common lattice and a
    violation is rejected with its location; the value comparison then runs
    pointwise.  Grids must overlap on at least a 2 x 2 sub-lattice.
    """
    t_tol = 1e-9 * max(1.0, float(grid1.t_nodes[-1]), float(grid2.t_nodes[-1]))
    x_scale = max(1.0, float(np.max(np.abs(grid1.x_nodes))), float(np.max(np.abs(grid2.x_nodes))))
    it1, it2 = _common_indices(grid1.t_nodes, grid2.t_nodes, t_tol)
    ix1, ix2 = _common_indices(grid1.x_nodes, grid2.x_nodes, 1e-9 * x_scale)
    if it1.size < 2 or ix1.size < 2:
        raise ValueError("grids do not share enough (t, x) nodes to compare")
    p1 = grid1.psi_values[np.ix_(it1, ix1)]
    p2 = grid2.psi_values[np.ix_(it2, ix2)]
    gap = p2 - p1
    if np.max(gap) > psi_tol:
        i, j = np.unravel_index(int(np.argmax(gap)), gap.shape)
        raise ValueError(
            "dispersion ordering premise fails at "
            f"(t={grid1.t_nodes[it1[i]]!r}, x={grid1.x_nodes[ix1[j]]!r}): "
            f"Psi1={p1[i, j]!r} < Psi2={p2[i, j]!r}"
        )
    v1 = grid1.values[np.ix_(it1, ix1)]
    v2 = grid2.values[np.ix_(it2, ix2)]
    worst = float(np.max(v1 - v2))
    return OrderingReport(
        passed=(worst <= tol), worst_violation=worst, n_common_t=int(it1.size), n_common_x=int(ix1.size)
    )


class RegionCheck(NamedTuple):
    passed: bool
    detail: str
    n_checked: int
    n_violations: int


def bernoulli_comparison_check(
    grid: ValueGrid, beta: float, table: QuadratureTable, zero_tol: float | None = None
) -> RegionCheck:
    """Compare the grid's continuation region against the two-point benchmark.

    Case (i): support inside [-beta, beta] implies continuation inside
    (-a(beta), a(beta)).  Case (ii): support outside (-beta, beta) on both
    sides implies continuation contains (-a(beta), a(beta)).  Rejected when
    neither support relationship applies.
    """
    ztol = grid.config.zero_tol if zero_tol is None else float(zero_tol)
    nodes = table.nodes
    inside = np.all(np.abs(nodes) <= beta + 1e-12)
    outside = (
        np.all(np.abs(nodes) >= beta - 1e-12)
        and np.any(nodes <= -beta + 1e-12)
        and np.any(nodes >= beta - 1e-12)
    )
    if not inside and not outside:
        raise ValueError(
            "support is neither contained in [-beta, beta] nor disjoint from (-beta, beta)"
        )
    sol = bernoulli_solve(beta, grid.c)
    a = sol.boundary_a
    dx = float(np.max(np.diff(grid.x_nodes)))
    x = grid.x_nodes

    if inside:
        a_val = 0.0 if a is None else a
        sel = np.abs(x) >= a_val + dx
        region = grid.values[:, sel]
        bad = int(np.sum(region < -ztol))
        return RegionCheck(
            passed=(bad == 0),
            detail=f"case (i): require stopping beyond |x| >= {a_val + dx!r}",
            n_checked=int(region.size),
            n_violations=bad,
        )
    if a is None:
        return RegionCheck(True, "case (ii) with no benchmark continuation: vacuous", 0, 0)
    sel = np.abs(x) <= a - dx
    region = grid.values[:, sel]
    bad = int(np.sum(region >= -ztol))
    return RegionCheck(
        passed=(bad == 0),
        detail=f"case (ii): require continuation inside |x| <= {a - dx!r}",
        n_checked=int(region.size),
        n_violations=bad,
    )


def locally_good_check(
    grid: ValueGrid,
    psi_grid: PsiGrid | None = None,
    c: float | None = None,
    zero_tol: float | None = None,
) -> RegionCheck:
    """Nodes where Psi^2 clearly exceeds c must lie in the continuation region.

    The margin is the dispersion-squared variation over one spatial cell, so
    only nodes robustly above the cost rate are required to continue.
    """
    ztol = grid.config.zero_tol if zero_tol is None else float(zero_tol)
    cc = grid.c if c is None else float(c)
    if psi_grid is not None:
        psi2, _ = _align_psi(psi_grid, grid.t_nodes, grid.x_nodes)
        psi2 = psi2**2
    else:
        psi2 = grid.psi_values**2
    margin = np.zeros_like(psi2)
    margin[:, 1:] = np.abs(psi2[:, 1:] - psi2[:, :-1])
    margin[:, :-1] = np.maximum(margin[:, :-1], np.abs(psi2[:, 1:] - psi2[:, :-1]))
    # absolute floor keeps exact-equality cases (Psi^2 == c to roundoff) out
    must_continue = psi2 > cc + margin + 1e-12 * (1.0 + cc)
    bad = int(np.sum(must_continue & (grid.values >= -ztol)))
    return RegionCheck(
        passed=(bad == 0),
        detail=f"nodes with Psi^2 > c + cell margin: {int(np.sum(must_continue))}",
        n_checked=int(np.sum(must_continue)),
        n_violations=bad,
    )
