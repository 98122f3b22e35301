"""Exact linear quantile regression with one covariate and an intercept.

The fit minimizes the total check loss

    sum_i rho_tau(y_i - b0 - b1 * x_i),   rho_tau(r) = r * (tau - 1{r < 0})

over (b0, b1).  As a linear program every vertex of the feasible region is a
line through two observations with distinct x, so the solver walks among
such pair-interpolating lines.  A step fixes one interpolated point as a
pivot and rotates the line around it; the loss along that rotation is a
weighted quantile problem in the slope and is minimized exactly in one
pass over the sorted breakpoints, which may cross many vertices at once.
A vertex is optimal once no rotation around any interpolated point lowers
the loss.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DegenerateDesignError, InvalidArgumentError, SizeLimitError

logger = logging.getLogger(__name__)

BRUTE_FORCE_MAX_N = 100
_LOSS_RTOL = 1e-12
_SLOPE_RTOL = 1e-12
_DEGENERACY_RTOL = 1e-13


@dataclass(frozen=True)
class Observation:
    """One regression point: x = ln(population), y = service jobs per inhabitant."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidArgumentError(f"non-finite observation ({self.x}, {self.y})")


@dataclass(frozen=True)
class QuantileFit:
    """Fitted quantile line with residual diagnostics.

    Fits rebuilt from published coefficients carry n = 0 and zero
    diagnostics.
    """

    tau: float
    intercept: float
    slope: float
    n: int = 0
    loss: float = 0.0
    n_neg: int = 0
    n_pos: int = 0
    n_zero: int = 0

    @property
    def small_sample(self) -> bool:
        """True when fewer than 1/tau points were used; the fit is then a minimum."""
        return 0 < self.n < 1.0 / self.tau

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "intercept": self.intercept,
            "slope": self.slope,
            "n": self.n,
            "loss": self.loss,
            "n_neg": self.n_neg,
            "n_pos": self.n_pos,
            "n_zero": self.n_zero,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QuantileFit":
        return cls(
            tau=float(d["tau"]),
            intercept=float(d["intercept"]),
            slope=float(d["slope"]),
            n=int(d.get("n", 0)),
            loss=float(d.get("loss", 0.0)),
            n_neg=int(d.get("n_neg", 0)),
            n_pos=int(d.get("n_pos", 0)),
            n_zero=int(d.get("n_zero", 0)),
        )


def _check_tau(tau: float) -> None:
    if not (isinstance(tau, (int, float)) and math.isfinite(tau) and 0.0 < tau < 1.0):
        raise InvalidArgumentError(f"tau must lie in (0, 1), got {tau!r}")


def _rho(r: np.ndarray, tau: float) -> np.ndarray:
    return np.where(r < 0, (tau - 1.0) * r, tau * r)


def check_loss(residuals, tau: float) -> float:
    """Total check loss of ``residuals`` at quantile ``tau``."""
    _check_tau(tau)
    r = np.asarray(residuals, dtype=float)
    if not np.all(np.isfinite(r)):
        raise InvalidArgumentError("residuals must be finite")
    return float(_rho(r, tau).sum())


def zero_tolerance(y: np.ndarray) -> np.ndarray:
    """Per-point threshold under which a residual counts as zero."""
    return 1e-9 * (1.0 + np.abs(y))


def _as_arrays(points) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(points, tuple) and len(points) == 2 and not isinstance(points[0], Observation):
        x, y = (np.asarray(a, dtype=float).ravel() for a in points)
        if x.shape != y.shape:
            raise InvalidArgumentError("x and y must have the same length")
    else:
        pts = list(points)
        x = np.fromiter((p.x for p in pts), dtype=float, count=len(pts))
        y = np.fromiter((p.y for p in pts), dtype=float, count=len(pts))
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InvalidArgumentError("observations must be finite")
    return x, y


def _check_design(x: np.ndarray) -> None:
    if x.size < 2:
        raise DegenerateDesignError(f"need at least 2 observations, got {x.size}")
    if np.all(x == x[0]):
        raise DegenerateDesignError("all x values are identical")


def _finalize_fit(x: np.ndarray, y: np.ndarray, tau: float, intercept: float, slope: float) -> QuantileFit:
    r = y - (intercept + slope * x)
    zero = np.abs(r) <= zero_tolerance(y)
    n = int(x.size)
    if n < 1.0 / tau:
        logger.warning(
            "only %d observations at tau=%g (< 1/tau): the fitted quantile is the minimum", n, tau
        )
    return QuantileFit(
        tau=float(tau),
        intercept=float(intercept),
        slope=float(slope),
        n=n,
        loss=check_loss(r, tau),
        n_neg=int(np.count_nonzero((r < 0) & ~zero)),
        n_pos=int(np.count_nonzero((r > 0) & ~zero)),
        n_zero=int(np.count_nonzero(zero)),
    )


def _rotate(x, y, tau, pivot):
    """Best slope for lines through point ``pivot``.

    Returns (slope, partner index, loss).  The slope is the smallest
    minimizer; the partner is the least-index point that defines it.
    """
    d = x - x[pivot]
    e = y - y[pivot]
    movable = np.flatnonzero(d != 0)
    dm = d[movable]
    b = e[movable] / dm
    w = np.abs(dm)
    # points above the line carry weight tau when d > 0, and 1 - tau when d < 0
    t = np.where(dm > 0, tau, 1.0 - tau)
    target = float(np.dot(w, t))
    order = np.lexsort((movable, b))
    cw = np.cumsum(w[order])
    k = int(np.searchsorted(cw, target - _LOSS_RTOL * cw[-1], side="left"))
    k = min(k, order.size - 1)
    j = order[k]
    slope = float(b[j])
    loss = float(_rho(e - slope * d, tau).sum())
    return slope, int(movable[j]), loss


def _interpolated(x, y, intercept, slope, first=None):
    """Points the line passes through, for degeneracy handling.

    Uses a tolerance far tighter than ``zero_tolerance`` so near-collinear
    clouds do not turn every point into a rotation candidate.
    """
    r = y - (intercept + slope * x)
    scale = np.abs(y) + np.abs(intercept) + np.abs(slope * x)
    idx = np.flatnonzero(np.abs(r) <= _DEGENERACY_RTOL * (1.0 + scale))
    # one representative per distinct point; duplicates give identical rotations
    _, keep = np.unique(np.column_stack((x[idx], y[idx])), axis=0, return_index=True)
    out = sorted(int(i) for i in idx[keep])
    if first is not None and first in out:
        out.remove(first)
        out.insert(0, first)
    return out


def fit_quantile_line(points, tau: float, max_iter: int | None = None) -> QuantileFit:
    """Fit the tau-quantile line minimizing total check loss.

    ``points`` is a sequence of :class:`Observation` or an ``(x, y)`` tuple
    of arrays.  Among equal-loss optima the line with the smallest slope is
    returned (then the smallest intercept).
    """
    _check_tau(tau)
    x, y = _as_arrays(points)
    _check_design(x)
    n = x.size
    if max_iter is None:
        max_iter = 10 * n + 100

    pivot = int(np.argsort(y, kind="stable")[min(int(tau * n), n - 1)])
    slope, partner, loss = _rotate(x, y, tau, pivot)
    intercept = y[pivot] - slope * x[pivot]

    # descent: strict loss decrease at every accepted exchange, so no cycling
    for _ in range(max_iter):
        moved = False
        for p in _interpolated(x, y, intercept, slope, first=partner):
            if p == pivot:
                continue
            s, q, l = _rotate(x, y, tau, p)
            if l < loss - _LOSS_RTOL * (1.0 + loss):
                pivot, partner, slope, loss = p, q, s, l
                intercept = y[p] - s * x[p]
                moved = True
                break
        if not moved:
            break
    else:
        raise RuntimeError(f"exchange iterations exceeded {max_iter}")

    # walk the optimal face towards its smallest slope
    for _ in range(max_iter):
        moved = False
        for p in _interpolated(x, y, intercept, slope):
            s, _, l = _rotate(x, y, tau, p)
            if s < slope - _SLOPE_RTOL * (1.0 + abs(slope)) and l <= loss + _LOSS_RTOL * (1.0 + loss):
                pivot, slope = p, s
                intercept = y[p] - s * x[p]
                moved = True
                break
        if not moved:
            break

    return _finalize_fit(x, y, tau, intercept, slope)


def brute_force_fit(points, tau: float) -> QuantileFit:
    """Reference fit by enumerating the line through every pair of points.

    Exact because an optimal line always interpolates two points with
    distinct x.  Limited to ``BRUTE_FORCE_MAX_N`` points.
    """
    _check_tau(tau)
    x, y = _as_arrays(points)
    _check_design(x)
    if x.size > BRUTE_FORCE_MAX_N:
        raise SizeLimitError(f"brute force is limited to {BRUTE_FORCE_MAX_N} points, got {x.size}")

    pairs = np.array([(i, j) for i, j in combinations(range(x.size), 2) if x[i] != x[j]])
    i, j = pairs[:, 0], pairs[:, 1]
    slopes = (y[j] - y[i]) / (x[j] - x[i])
    intercepts = y[i] - slopes * x[i]
    r = y[None, :] - (intercepts[:, None] + slopes[:, None] * x[None, :])
    losses = _rho(r, tau).sum(axis=1)
    best = losses.min()
    tied = np.flatnonzero(losses <= best + _LOSS_RTOL * (1.0 + best))
    k = tied[np.lexsort((intercepts[tied], slopes[tied]))[0]]
    return _finalize_fit(x, y, tau, intercepts[k], slopes[k])


def predict(fit: QuantileFit, population: float, clamp_nonnegative: bool = False) -> float:
    """Jobs per inhabitant predicted for a municipality of ``population`` inhabitants."""
    if not (math.isfinite(population) and population >= 1):
        raise InvalidArgumentError(f"population must be >= 1, got {population!r}")
    value = fit.intercept + fit.slope * math.log(population)
    if clamp_nonnegative and value < 0:
        return 0.0
    return value


def fits_equal(a: QuantileFit, b: QuantileFit, tol: float = 1e-9) -> bool:
    """Coefficient equality within an absolute tolerance, same tau."""
    return a.tau == b.tau and abs(a.intercept - b.intercept) <= tol and abs(a.slope - b.slope) <= tol

