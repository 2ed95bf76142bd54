"""Prior distributions of the unobservable drift and their posterior quantities.

The observation model is Y(t) = X*t + W(t) with W a standard Wiener process and
X a random drift with prior distribution mu.  Conditioning on the observation
level Y(t) = y reweights mu by exp(u*y - u^2*t/2); every quantity in this
module is an integral against that exponentially tilted measure, computed on a
discrete quadrature table with max-shifted (log-sum-exp) exponents so that no
intermediate overflows.

Functions named after the classical filtering objects:

* ``widder_F``        -- the normalizing integral F(t,y) (Widder transform of mu),
                         a positive solution of the backward heat equation.
* ``posterior_mean_G`` -- conditional mean G(t,y) of X given Y(t)=y.
* ``posterior_var_H``  -- conditional variance H(t,y), the spatial gradient of G.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from numpy.polynomial.hermite import hermgauss
from numpy.polynomial.legendre import leggauss
from scipy.special import erfcinv

__all__ = [
    "PriorError",
    "PriorSpec",
    "QuadratureTable",
    "WidderValue",
    "IntegrabilityResult",
    "build_quadrature",
    "widder_F",
    "posterior_mean_G",
    "posterior_var_H",
    "posterior_mean_var",
    "posterior_weights",
    "posterior_expectation",
    "posterior_measure",
    "check_integrability",
    "prior_moments",
    "heat_residual_F",
]

_FAMILIES = (
    "discrete_atoms",
    "gaussian",
    "symmetric_gaussian_mixture",
    "half_normal",
    "tabulated_density",
)

# Tail mass left outside the node range for truncated continuous families.
# Posterior reweighting multiplies the tail by exp(u*y), so the cut must be
# far deeper than the target quadrature accuracy.
_TAIL_MASS = 1e-26


class PriorError(ValueError):
    """Raised for invalid prior specifications or quadrature inputs."""


@dataclass(frozen=True)
class PriorSpec:
    """Declarative description of the drift's prior distribution.

    Exactly one parametric family is active, selected by ``kind``:

    * ``discrete_atoms``: ``atoms`` = sequence of (point, weight), weights > 0
      summing to 1.
    * ``gaussian``: mean ``m``, variance ``sigma2`` > 0.
    * ``symmetric_gaussian_mixture``: equal-weight mixture of N(m, sigma^2)
      and N(-m, sigma^2), with offset ``m`` > 0 and std ``sigma`` > 0.
    * ``half_normal``: |N(0, sigma2)|, i.e. the absolute value of a centered
      normal with variance ``sigma2``.
    * ``tabulated_density``: piecewise-linear density on a strictly increasing
      ``grid`` (>= 3 points) with nonnegative ``density_values``.

    One-point distributions are rejected: the estimation problem is trivial
    when the drift is deterministic.
    """

    kind: str
    atoms: tuple[tuple[float, float], ...] | None = None
    m: float | None = None
    sigma2: float | None = None
    sigma: float | None = None
    grid: tuple[float, ...] | None = None
    density_values: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in _FAMILIES:
            raise PriorError(f"unknown prior kind {self.kind!r}; expected one of {_FAMILIES}")
        getattr(self, f"_validate_{self.kind}")()

    # ---- constructors -------------------------------------------------

    @classmethod
    def discrete_atoms(cls, atoms: Sequence[tuple[float, float]]) -> "PriorSpec":
        return cls(kind="discrete_atoms", atoms=tuple((float(u), float(w)) for u, w in atoms))

    @classmethod
    def bernoulli(cls, beta: float, p: float = 0.5) -> "PriorSpec":
        """Two-point prior on {-beta, +beta} with P(X = beta) = p."""
        return cls.discrete_atoms([(-float(beta), 1.0 - float(p)), (float(beta), float(p))])

    @classmethod
    def gaussian(cls, m: float, sigma2: float) -> "PriorSpec":
        return cls(kind="gaussian", m=float(m), sigma2=float(sigma2))

    @classmethod
    def symmetric_gaussian_mixture(cls, m: float, sigma: float) -> "PriorSpec":
        return cls(kind="symmetric_gaussian_mixture", m=float(m), sigma=float(sigma))

    @classmethod
    def half_normal(cls, sigma2: float) -> "PriorSpec":
        return cls(kind="half_normal", sigma2=float(sigma2))

    @classmethod
    def tabulated_density(cls, grid: Sequence[float], density_values: Sequence[float]) -> "PriorSpec":
        return cls(
            kind="tabulated_density",
            grid=tuple(float(g) for g in grid),
            density_values=tuple(float(v) for v in density_values),
        )

    # ---- validation ----------------------------------------------------

    def _validate_discrete_atoms(self) -> None:
        if not self.atoms:
            raise PriorError("discrete_atoms requires a nonempty atom list")
        pts = [u for u, _ in self.atoms]
        wts = [w for _, w in self.atoms]
        if any(not math.isfinite(u) for u in pts):
            raise PriorError("atom points must be finite")
        if any(w <= 0.0 or not math.isfinite(w) for w in wts):
            raise PriorError("atom weights must be positive and finite")
        if abs(sum(wts) - 1.0) > 1e-12:
            raise PriorError(f"atom weights must sum to 1 within 1e-12, got {sum(wts)!r}")
        if len(set(pts)) < 2:
            raise PriorError("one-point priors are rejected: need at least two distinct atoms")

    def _validate_gaussian(self) -> None:
        if self.m is None or self.sigma2 is None:
            raise PriorError("gaussian prior requires fields m and sigma2")
        if not (self.sigma2 > 0.0) or not math.isfinite(self.sigma2):
            raise PriorError("gaussian sigma2 must be a positive real")

    def _validate_symmetric_gaussian_mixture(self) -> None:
        if self.m is None or self.sigma is None:
            raise PriorError("symmetric_gaussian_mixture requires fields m and sigma")
        if not (self.m > 0.0) or not (self.sigma > 0.0):
            raise PriorError("mixture requires m > 0 and sigma > 0")

    def _validate_half_normal(self) -> None:
        if self.sigma2 is None or not (self.sigma2 > 0.0):
            raise PriorError("half_normal requires sigma2 > 0")

    def _validate_tabulated_density(self) -> None:
        if self.grid is None or self.density_values is None:
            raise PriorError("tabulated_density requires fields grid and density_values")
        g = np.asarray(self.grid, dtype=float)
        f = np.asarray(self.density_values, dtype=float)
        if g.size < 3:
            raise PriorError("tabulated grid needs at least 3 points")
        if g.size != f.size:
            raise PriorError("grid and density_values must have the same length")
        if not np.all(np.diff(g) > 0.0):
            raise PriorError("tabulated grid must be strictly increasing")
        if np.any(f < 0.0) or not np.all(np.isfinite(f)):
            raise PriorError("density values must be nonnegative and finite")
        masses = 0.5 * (f[1:] + f[:-1]) * np.diff(g)
        if masses.sum() <= 0.0:
            raise PriorError("tabulated density carries no mass")
        if np.count_nonzero(masses > 0.0) < 2:
            raise PriorError("one-point priors are rejected: density mass in a single cell")
        # the second moment must be stable under refinement at the working
        # resolution (coarse declared grids are refined before quadrature)
        g1, f1 = _refine_to_cells(g, f, 128)
        g2, f2 = _refine_tabulated(g1, f1)
        m2, m2r = _tabulated_moment(g1, f1, 2), _tabulated_moment(g2, f2, 2)
        if not (math.isfinite(m2) and math.isfinite(m2r)) or abs(m2r - m2) > 0.01 * max(
            abs(m2), 1e-300
        ):
            raise PriorError(
                f"tabulated second moment not stable under refinement ({m2!r} vs {m2r!r})"
            )

    # ---- analytic facts -------------------------------------------------

    def mean(self) -> float:
        if self.kind == "discrete_atoms":
            return float(sum(u * w for u, w in self.atoms))
        if self.kind == "gaussian":
            return float(self.m)
        if self.kind == "symmetric_gaussian_mixture":
            return 0.0
        if self.kind == "half_normal":
            return float(math.sqrt(2.0 * self.sigma2 / math.pi))
        g = np.asarray(self.grid, dtype=float)
        f = np.asarray(self.density_values, dtype=float)
        return _tabulated_moment(g, f, 1)

    def variance(self) -> float:
        if self.kind == "discrete_atoms":
            m = self.mean()
            return float(sum(w * (u - m) ** 2 for u, w in self.atoms))
        if self.kind == "gaussian":
            return float(self.sigma2)
        if self.kind == "symmetric_gaussian_mixture":
            return float(self.sigma**2 + self.m**2)
        if self.kind == "half_normal":
            return float(self.sigma2 * (1.0 - 2.0 / math.pi))
        g = np.asarray(self.grid, dtype=float)
        f = np.asarray(self.density_values, dtype=float)
        return _tabulated_moment(g, f, 2) - _tabulated_moment(g, f, 1) ** 2

    def support(self) -> tuple[float, float]:
        """(inf, sup) of the support; endpoints may be infinite."""
        if self.kind == "discrete_atoms":
            pts = [u for u, _ in self.atoms]
            return (min(pts), max(pts))
        if self.kind in ("gaussian", "symmetric_gaussian_mixture"):
            return (-math.inf, math.inf)
        if self.kind == "half_normal":
            return (0.0, math.inf)
        return (self.grid[0], self.grid[-1])

    # ---- (de)serialization ----------------------------------------------

    @classmethod
    def from_dict(cls, doc: dict) -> "PriorSpec":
        if not isinstance(doc, dict):
            raise PriorError("prior document must be a JSON object")
        kind = doc.get("kind")
        if kind not in _FAMILIES:
            raise PriorError(f"prior field 'kind' must be one of {_FAMILIES}, got {kind!r}")
        try:
            if kind == "discrete_atoms":
                return cls.discrete_atoms([(float(u), float(w)) for u, w in doc["atoms"]])
            if kind == "gaussian":
                return cls.gaussian(doc["m"], doc["sigma2"])
            if kind == "symmetric_gaussian_mixture":
                return cls.symmetric_gaussian_mixture(doc["m"], doc["sigma"])
            if kind == "half_normal":
                return cls.half_normal(doc["sigma2"])
            return cls.tabulated_density(doc["grid"], doc["density_values"])
        except KeyError as exc:
            raise PriorError(f"prior of kind {kind!r} is missing field {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            if isinstance(exc, PriorError):
                raise
            raise PriorError(f"malformed prior of kind {kind!r}: {exc}") from exc

    def to_dict(self) -> dict:
        doc: dict = {"kind": self.kind}
        if self.kind == "discrete_atoms":
            doc["atoms"] = [[u, w] for u, w in self.atoms]
        elif self.kind == "gaussian":
            doc.update(m=self.m, sigma2=self.sigma2)
        elif self.kind == "symmetric_gaussian_mixture":
            doc.update(m=self.m, sigma=self.sigma)
        elif self.kind == "half_normal":
            doc.update(sigma2=self.sigma2)
        else:
            doc.update(grid=list(self.grid), density_values=list(self.density_values))
        return doc


def _tabulated_moment(g: np.ndarray, f: np.ndarray, k: int) -> float:
    mass = np.trapezoid(f, g)
    return float(np.trapezoid(f * g**k, g) / mass)


def _refine_tabulated(g: np.ndarray, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mids = 0.5 * (g[1:] + g[:-1])
    g2 = np.sort(np.concatenate([g, mids]))
    return g2, np.interp(g2, g, f)


def _refine_to_cells(g: np.ndarray, f: np.ndarray, n_cells: int) -> tuple[np.ndarray, np.ndarray]:
    while g.size - 1 < n_cells:
        g, f = _refine_tabulated(g, f)
    return g, f


class WidderValue(NamedTuple):
    """Linear and log values of the normalizing integral F(t, y)."""

    value: float
    log_value: float


class IntegrabilityResult(NamedTuple):
    passed: bool
    detail: str


@dataclass(frozen=True)
class QuadratureTable:
    """Discrete nodes/weights representing the prior (or a posterior).

    ``nodes`` are strictly increasing support points, ``weights`` sum to one,
    and ``support_bounds`` records (inf, sup) of the underlying distribution's
    support, possibly infinite.  All integrals downstream run on this table.
    """

    nodes: np.ndarray
    weights: np.ndarray
    support_bounds: tuple[float, float]
    log_weights: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if nodes.ndim != 1 or nodes.shape != weights.shape:
            raise PriorError("nodes and weights must be 1-d arrays of equal length")
        if nodes.size < 2:
            raise PriorError("quadrature table needs at least two nodes")
        if not np.all(np.diff(nodes) > 0.0):
            raise PriorError("quadrature nodes must be strictly increasing")
        if np.any(weights < 0.0):
            raise PriorError("quadrature weights must be nonnegative")
        total = weights.sum()
        if abs(total - 1.0) > 1e-12:
            raise PriorError(f"quadrature weights must sum to 1 within 1e-12, got {total!r}")
        if self.log_weights is None:
            with np.errstate(divide="ignore"):
                object.__setattr__(self, "log_weights", np.log(weights))
        nodes.setflags(write=False)
        weights.setflags(write=False)
        self.log_weights.setflags(write=False)

    @property
    def n(self) -> int:
        return int(self.nodes.size)

    def mean(self) -> float:
        return float(self.weights @ self.nodes)

    def variance(self) -> float:
        m = self.mean()
        return float(self.weights @ (self.nodes - m) ** 2)


def build_quadrature(prior: PriorSpec, n: int = 128, moment_rtol: float = 1e-8) -> QuadratureTable:
    """Discretize a prior into a quadrature table.

    Parameters
    ----------
    prior : PriorSpec
        Validated prior specification.
    n : int
        Target node count for continuous families (>= 2).  Discrete priors
        pass through exactly regardless of ``n``.
    moment_rtol : float
        For parametric families, the table's mean and variance must match the
        analytic moments to this relative tolerance.

    Node placement: Gauss-Hermite transformed to the family's location/scale
    for gaussian and mixture priors (moment-exact); Gauss-Legendre weighted by
    the density on a tail-truncated interval for the half-normal; midpoint
    atoms with trapezoid masses for tabulated densities.
    """
    if not isinstance(n, int) or isinstance(n, bool) or n < 2:
        raise PriorError(f"node count n must be an integer >= 2, got {n!r}")

    if prior.kind == "discrete_atoms":
        pts = np.array([u for u, _ in prior.atoms], dtype=float)
        wts = np.array([w for _, w in prior.atoms], dtype=float)
        order = np.argsort(pts)
        pts, wts = pts[order], wts[order]
        pts, wts = _merge_duplicate_nodes(pts, wts)
        wts = wts / wts.sum()
        table = QuadratureTable(pts, wts, prior.support())

    elif prior.kind == "gaussian":
        x, w = hermgauss(n)
        nodes = prior.m + math.sqrt(2.0 * prior.sigma2) * x
        weights = w / math.sqrt(math.pi)
        table = QuadratureTable(nodes, weights / weights.sum(), prior.support())

    elif prior.kind == "symmetric_gaussian_mixture":
        half = max(2, (n + 1) // 2)
        x, w = hermgauss(half)
        scale = math.sqrt(2.0) * prior.sigma
        nodes = np.concatenate([-prior.m + scale * x, prior.m + scale * x])
        weights = np.concatenate([w, w]) / (2.0 * math.sqrt(math.pi))
        order = np.argsort(nodes)
        nodes, weights = _merge_duplicate_nodes(nodes[order], weights[order])
        table = QuadratureTable(nodes, weights / weights.sum(), prior.support())

    elif prior.kind == "half_normal":
        sigma = math.sqrt(prior.sigma2)
        u_max = sigma * math.sqrt(2.0) * erfcinv(_TAIL_MASS)
        x, w = leggauss(n)
        nodes = 0.5 * (x + 1.0) * u_max
        dens = math.sqrt(2.0 / (math.pi * prior.sigma2)) * np.exp(-(nodes**2) / (2.0 * prior.sigma2))
        weights = 0.5 * u_max * w * dens
        table = QuadratureTable(nodes, weights / weights.sum(), prior.support())

    else:  # tabulated_density
        g, f = _refine_to_cells(
            np.asarray(prior.grid, dtype=float), np.asarray(prior.density_values, dtype=float), n
        )
        masses = 0.5 * (f[1:] + f[:-1]) * np.diff(g)
        nodes = 0.5 * (g[1:] + g[:-1])
        keep = masses > 0.0
        table = QuadratureTable(nodes[keep], masses[keep] / masses[keep].sum(), prior.support())

    if prior.kind != "tabulated_density":
        scale = max(abs(prior.mean()), math.sqrt(prior.variance()))
        if abs(table.mean() - prior.mean()) > moment_rtol * scale:
            raise PriorError(
                f"table mean {table.mean()!r} misses analytic mean {prior.mean()!r} "
                f"beyond relative tolerance {moment_rtol}"
            )
        if abs(table.variance() - prior.variance()) > moment_rtol * max(prior.variance(), scale**2):
            raise PriorError(
                f"table variance {table.variance()!r} misses analytic variance "
                f"{prior.variance()!r} beyond relative tolerance {moment_rtol}"
            )
    return table


def _merge_duplicate_nodes(nodes: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if np.all(np.diff(nodes) > 0.0):
        return nodes, weights
    out_n: list[float] = []
    out_w: list[float] = []
    for u, w in zip(nodes, weights):
        if out_n and u == out_n[-1]:
            out_w[-1] += w
        else:
            out_n.append(u)
            out_w.append(w)
    return np.array(out_n), np.array(out_w)


# ---------------------------------------------------------------------------
# posterior reweighting
# ---------------------------------------------------------------------------


def _check_time(t: float) -> float:
    t = float(t)
    if t < 0.0 or not math.isfinite(t):
        raise ValueError(f"time must be finite and >= 0, got {t!r}")
    return t


def _logit_matrix(table: QuadratureTable, t: float, y: np.ndarray) -> np.ndarray:
    """Unnormalized log posterior weights, one column per observation level y."""
    u = table.nodes[:, None]
    return table.log_weights[:, None] + u * y[None, :] - 0.5 * t * u * u


def _weight_matrix(table: QuadratureTable, t: float, y: np.ndarray) -> np.ndarray:
    logits = _logit_matrix(table, t, y)
    logits -= logits.max(axis=0)  # max shift: largest exponent becomes 0
    w = np.exp(logits)
    total = w.sum(axis=0)
    # the shifted maximum always contributes exp(0) = 1
    assert np.all(total >= 1.0), "posterior weights cannot underflow after max shift"
    return w / total


def posterior_weights(table: QuadratureTable, t: float, y: float) -> np.ndarray:
    """Normalized posterior node weights at observation level (t, y)."""
    t = _check_time(t)
    return _weight_matrix(table, t, np.array([float(y)]))[:, 0]


def posterior_mean_var(table: QuadratureTable, t: float, y) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized posterior mean and variance over an array of y values."""
    t = _check_time(t)
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    w = _weight_matrix(table, t, y_arr)
    u = table.nodes[:, None]
    g = (w * u).sum(axis=0)
    h = (w * (u - g[None, :]) ** 2).sum(axis=0)
    return g, h


def posterior_mean_G(table: QuadratureTable, t: float, y: float) -> float:
    """Conditional mean of the drift given the observation level Y(t) = y."""
    t = _check_time(t)
    w = _weight_matrix(table, t, np.array([float(y)]))
    return float((w * table.nodes[:, None]).sum(axis=0)[0])


def posterior_var_H(table: QuadratureTable, t: float, y: float) -> float:
    """Conditional variance of the drift; computed in centered form."""
    _, h = posterior_mean_var(table, t, y)
    return float(h[0])


def posterior_expectation(table: QuadratureTable, q: Callable[[float], float], t: float, y: float) -> float:
    """Posterior expectation of q(X) given the observation level (t, y).

    With q(u) = u this reproduces ``posterior_mean_G`` exactly, weight for
    weight.  Rejects q that is non-finite on any node carrying posterior mass.
    """
    t = _check_time(t)
    w = _weight_matrix(table, t, np.array([float(y)]))[:, 0]
    vals = np.array([float(q(u)) for u in table.nodes])
    bad = ~np.isfinite(vals) & (w > 0.0)
    if np.any(bad):
        idx = int(np.nonzero(bad)[0][0])
        raise ValueError(
            f"q is non-finite at node u={table.nodes[idx]!r} with posterior weight {w[idx]!r}"
        )
    vals = np.where(np.isfinite(vals), vals, 0.0)
    return float((w * vals).sum())


def posterior_measure(table: QuadratureTable, t: float, y: float) -> QuadratureTable:
    """The posterior as a new table: same nodes, exponentially tilted weights."""
    t = _check_time(t)
    w = _weight_matrix(table, t, np.array([float(y)]))[:, 0]
    return QuadratureTable(table.nodes.copy(), w / w.sum(), table.support_bounds)


def widder_F(table: QuadratureTable, t: float, y: float) -> WidderValue:
    """Normalizing integral F(t,y) = sum_i w_i exp(u_i y - u_i^2 t / 2).

    Returned in the log domain alongside the linear value; the log value stays
    finite for arbitrarily large exponents, while the linear value saturates
    to inf (overflow) or 0.0 (underflow) outside the representable range.
    """
    t = _check_time(t)
    logits = _logit_matrix(table, t, np.array([float(y)]))[:, 0]
    m = logits.max()
    log_value = float(m + math.log(np.exp(logits - m).sum()))
    with np.errstate(over="ignore"):
        value = float(math.exp(log_value)) if log_value < 709.0 else math.inf
    return WidderValue(value=value, log_value=log_value)


def prior_moments(table: QuadratureTable) -> tuple[float, float]:
    """Exact weighted mean and centered variance of the table."""
    return table.mean(), table.variance()


def check_integrability(prior: PriorSpec, a: float) -> IntegrabilityResult:
    """Decide whether integral of exp(a*u^2) d(mu) is finite.

    Analytic for parametric families (Gaussian-type tails converge iff
    a < 1/(2 sigma^2); finite atom sets always pass).  For tabulated priors the
    discretized integral is compared across two refinement levels and must be
    stable to 1% relative change.
    """
    a = float(a)
    if a <= 0.0:
        raise ValueError(f"integrability exponent a must be > 0, got {a!r}")
    if prior.kind == "discrete_atoms":
        return IntegrabilityResult(True, "finite atom set: integral is a finite sum")
    if prior.kind in ("gaussian", "symmetric_gaussian_mixture", "half_normal"):
        sigma2 = prior.sigma2 if prior.sigma2 is not None else prior.sigma**2
        bound = 1.0 / (2.0 * sigma2)
        ok = a < bound
        return IntegrabilityResult(
            ok, f"gaussian-type tail with variance {sigma2}: requires a < {bound!r}, got a = {a!r}"
        )
    g, f = _refine_to_cells(
        np.asarray(prior.grid, dtype=float), np.asarray(prior.density_values, dtype=float), 128
    )
    val = np.trapezoid(f * np.exp(a * g**2), g) / np.trapezoid(f, g)
    g2, f2 = _refine_tabulated(g, f)
    val2 = np.trapezoid(f2 * np.exp(a * g2**2), g2) / np.trapezoid(f2, g2)
    ok = bool(math.isfinite(val) and math.isfinite(val2) and abs(val2 - val) <= 0.01 * abs(val))
    return IntegrabilityResult(ok, f"discretized integral {val!r} vs refined {val2!r}")


def heat_residual_F(table: QuadratureTable, t: float, y: float, h: float) -> float:
    """Central-difference residual of dF/dt + (1/2) d2F/dy2, relative to F(t,y).

    Second-order accurate in the step h; F solves the backward heat equation
    exactly, so the residual measures pure stencil truncation error.
    """
    if h <= 0.0:
        raise ValueError("step h must be positive")
    if t - h < 0.0:
        raise ValueError(f"stencil leaves the domain: t - h = {t - h!r} < 0")
    ref = widder_F(table, t, y).log_value

    def rel(tt: float, yy: float) -> float:
        return math.exp(widder_F(table, tt, yy).log_value - ref)

    dt = (rel(t + h, y) - rel(t - h, y)) / (2.0 * h)
    dyy = (rel(t, y + h) - 2.0 + rel(t, y - h)) / (h * h)
    return dt + 0.5 * dyy
