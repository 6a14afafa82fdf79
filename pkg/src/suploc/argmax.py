"""Location of the supremum of a path over a window.

For phase-shift models the maximiser is found exactly by enumerating the
waveform knots inside the window together with the two window endpoints.
Sampled paths use a grid argmax, and two-wave paths refine the grid
argmax by bisection on the derivative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, RefinementError
from .models import (
    OrnsteinUhlenbeckModel,
    PhaseShiftModel,
    PiecewiseLinearWaveform,
    RngSpec,
    TwoWaveCoefficients,
    TwoWaveGaussianModel,
    BLOCK_SIZE,
    block_ranges,
    ou_grid,
)

#: Relative tolerance (times path amplitude) under which two values tie.
TIE_RTOL = 1e-12

SIDES = ("leftmost", "rightmost")


@dataclass(frozen=True)
class Window:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ParameterError(f"window needs a < b, got [{self.a}, {self.b}]")

    @property
    def length(self) -> float:
        return self.b - self.a


@dataclass(frozen=True)
class SupLocation:
    """A realised supremum location."""

    tau: float
    value: float
    at_left: bool
    at_right: bool
    near_tie: bool


@dataclass(frozen=True)
class LocalMaxRateEstimate:
    """Probability of a local maximum in ``(0, epsilon)``, divided by ``epsilon``.

    ``n == 0`` marks an exact computation; otherwise ``ci_lo``/``ci_hi``
    bound the rate at the stated level.
    """

    epsilon: float
    probability: float
    rate: float
    n: int
    ci_lo: float
    ci_hi: float


def _check_side(side: str) -> None:
    if side not in SIDES:
        raise ParameterError(f"side must be one of {SIDES}, got {side!r}")


# --------------------------------------------------------------------------
# exact argmax for phase-shift paths
# --------------------------------------------------------------------------


def phase_candidates_many(w: PiecewiseLinearWaveform, us, win: Window):
    """Candidate maximiser positions and values for many phases at once.

    Returns ``(positions, values, mask)`` of shape ``(len(us), m)``.  Column
    0 is the left endpoint, the last column the right endpoint, and the
    columns between are the knots strictly inside the window in increasing
    order (padded, with ``mask`` False on padding).
    """
    us = np.atleast_1d(np.asarray(us, dtype=float))
    P = w.period
    length = win.b - win.a
    lo = np.mod(win.a + us, P)
    hi = lo + length
    reps = int(math.ceil(length / P)) + 2
    Y = (w.times[None, :] + P * np.arange(reps)[:, None]).ravel()
    V = np.tile(w.values, reps)
    i0 = np.searchsorted(Y, lo, side="right")
    i1 = np.searchsorted(Y, hi, side="left")
    count = i1 - i0
    m = int(count.max()) if count.size else 0
    cols = np.arange(m)
    idx = i0[:, None] + cols[None, :]
    inner = cols[None, :] < count[:, None]
    idx = np.where(inner, idx, 0)
    kv = np.where(inner, V[idx], -np.inf)
    kp = np.where(inner, win.a + (Y[idx] - lo[:, None]), np.nan)
    n = us.size
    values = np.empty((n, m + 2))
    positions = np.empty((n, m + 2))
    values[:, 0] = w(lo)
    values[:, 1:-1] = kv
    values[:, -1] = w(hi)
    positions[:, 0] = win.a
    positions[:, 1:-1] = kp
    positions[:, -1] = win.b
    mask = np.ones((n, m + 2), dtype=bool)
    mask[:, 1:-1] = inner
    return positions, values, mask


def _pick(values: np.ndarray, mask: np.ndarray, tol: float, side: str):
    """Column of the extreme tied maximiser per row, plus the tie count."""
    vmax = np.max(np.where(mask, values, -np.inf), axis=1)
    ok = mask & (values >= vmax[:, None] - tol)
    if side == "leftmost":
        col = np.argmax(ok, axis=1)
    else:
        col = ok.shape[1] - 1 - np.argmax(ok[:, ::-1], axis=1)
    return col, ok.sum(axis=1)


def phase_argmax_many(w: PiecewiseLinearWaveform, us, win: Window, side: str = "leftmost"):
    """Vectorised exact argmax of ``t -> x(t + u)`` over ``win``.

    Returns arrays ``(tau, value, at_left, at_right, near_tie)``.
    """
    _check_side(side)
    positions, values, mask = phase_candidates_many(w, us, win)
    tol = TIE_RTOL * max(w.amplitude, 1.0)
    col, nties = _pick(values, mask, tol, side)
    rows = np.arange(col.size)
    tau = positions[rows, col]
    value = values[rows, col]
    last = values.shape[1] - 1
    return tau, value, col == 0, col == last, nties > 1


def exact_phase_argmax(w: PiecewiseLinearWaveform, u: float, win: Window, side: str = "leftmost") -> SupLocation:
    """Exact leftmost (or rightmost) maximiser of ``t -> x(t + u)`` on ``win``."""
    tau, value, left, right, tie = phase_argmax_many(w, [u], win, side)
    return SupLocation(float(tau[0]), float(value[0]), bool(left[0]), bool(right[0]), bool(tie[0]))


def phase_candidates(w: PiecewiseLinearWaveform, u: float, win: Window) -> tuple[np.ndarray, np.ndarray]:
    """Ordered candidate positions and values for a single phase."""
    positions, values, mask = phase_candidates_many(w, [u], win)
    keep = mask[0]
    return positions[0, keep], values[0, keep]


def detect_multiplicity(positions, values, tol: float = 1e-9, value_tol: float | None = None) -> bool:
    """True iff two points more than ``tol`` apart both attain the maximum.

    ``positions``/``values`` may be the candidate set of an exact path or
    the samples of a gridded path.  ``value_tol`` defaults to the package
    tie tolerance relative to the largest absolute value.
    """
    positions = np.asarray(positions, dtype=float)
    values = np.asarray(values, dtype=float)
    if positions.size == 0:
        return False
    if value_tol is None:
        value_tol = TIE_RTOL * max(float(np.max(np.abs(values))), 1.0)
    at_max = positions[values >= values.max() - value_tol]
    return bool(at_max.max() - at_max.min() > tol)


# --------------------------------------------------------------------------
# gridded paths
# --------------------------------------------------------------------------


def grid_argmax(values, times, win: Window | None = None, tie_tol: float = 0.0, side: str = "leftmost") -> SupLocation:
    """Argmax of a sampled path.

    The extreme grid index (leftmost or rightmost) whose value is within
    ``tie_tol`` of the maximum wins.  ``near_tie`` is set when any other
    index also lies within ``tie_tol``.  ``at_left``/``at_right`` mean the
    winner is the first/last grid node of the window.
    """
    _check_side(side)
    values = np.asarray(values, dtype=float)
    times = np.asarray(times, dtype=float)
    if values.size == 0:
        raise ParameterError("empty grid")
    if values.shape != times.shape:
        raise ParameterError("values and times must have the same shape")
    if win is None:
        win = Window(float(times[0]), float(times[-1]))
    step = float(np.min(np.diff(times))) if times.size > 1 else 0.0
    slack = 1e-9 * max(step, 1e-300)
    if times[0] > win.a + slack or times[-1] < win.b - slack:
        raise ParameterError("grid does not cover the window")
    inside = (times >= win.a - slack) & (times <= win.b + slack)
    t, v = times[inside], values[inside]
    ok = v >= v.max() - tie_tol
    j = int(np.argmax(ok)) if side == "leftmost" else int(v.size - 1 - np.argmax(ok[::-1]))
    return SupLocation(float(t[j]), float(v[j]), j == 0, j == v.size - 1, bool(ok.sum() > 1))


# --------------------------------------------------------------------------
# two-wave refinement
# --------------------------------------------------------------------------


def refine_two_wave_argmax(coeffs: TwoWaveCoefficients, model: TwoWaveGaussianModel, win: Window, bracket, atol: float = 1e-10) -> float:
    """Local maximiser inside ``bracket`` by bisection on ``X'``.

    Raises
    ------
    RefinementError
        If ``X'`` does not go from nonnegative to nonpositive across the
        bracket, or the root found is lower than a bracket end.
    """
    lo, hi = max(float(bracket[0]), win.a), min(float(bracket[1]), win.b)
    if not lo < hi:
        raise RefinementError("empty bracket")
    d_lo, d_hi = model.derivative(coeffs, lo), model.derivative(coeffs, hi)
    if d_lo == 0:
        tau = lo
    elif d_hi == 0:
        tau = hi
    elif not (d_lo > 0 > d_hi):
        raise RefinementError(f"no sign change of X' on [{lo}, {hi}]")
    else:
        a, b = lo, hi
        while b - a > atol / 4:
            mid = 0.5 * (a + b)
            if mid <= a or mid >= b:
                break
            if model.derivative(coeffs, mid) > 0:
                a = mid
            else:
                b = mid
        tau = 0.5 * (a + b)
    val = model.value(coeffs, tau)
    tol = TIE_RTOL * (abs(coeffs.A1) + model.amp2_scale * abs(coeffs.A2) + 1.0)
    if val < max(model.value(coeffs, lo), model.value(coeffs, hi)) - tol:
        raise RefinementError("bracket does not isolate a maximum")
    return float(tau)


def _bisect_many(model, coeffs, lo, hi, iters: int = 48):
    a, b = lo.copy(), hi.copy()
    for _ in range(iters):
        mid = 0.5 * (a + b)
        up = model.derivative(coeffs, mid) > 0
        a = np.where(up, mid, a)
        b = np.where(up, b, mid)
    return 0.5 * (a + b)


def _refine_one(model, c: TwoWaveCoefficients, grid: np.ndarray, j: int, win: Window) -> float:
    """Refine grid index ``j`` to a continuous local maximiser (or endpoint)."""
    m = grid.size
    if j == 0 and model.derivative(c, win.a) <= 0:
        return win.a
    if j == m - 1 and model.derivative(c, win.b) >= 0:
        return win.b
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, m - 1)]
    try:
        return refine_two_wave_argmax(c, model, win, (lo, hi))
    except RefinementError:
        return float(grid[j])


def two_wave_argmax_many(model: TwoWaveGaussianModel, coeffs: TwoWaveCoefficients, win: Window, grid_step: float = 1e-3, side: str = "leftmost"):
    """Argmax of many two-wave paths: grid search, then bisection refinement.

    Every grid local maximum whose value is within the discretisation error
    of the grid maximum is refined; when more than one survives, the
    refined values decide.
    """
    _check_side(side)
    m = int(math.ceil(win.length / grid_step - 1e-9)) + 1
    grid = np.linspace(win.a, win.b, m)
    G = model.gaussian_coefficients(coeffs)
    X = G @ model.basis(grid)
    n = X.shape[0]
    jmax = np.argmax(X, axis=1) if side == "leftmost" else m - 1 - np.argmax(X[:, ::-1], axis=1)
    rows = np.arange(n)
    vmax = X[rows, jmax]
    step = grid[1] - grid[0]
    margin = model.curvature_bound(coeffs) * step**2 / 4.0 + 1e-12
    # grid local maxima (endpoints count when higher than their neighbour)
    locmax = np.ones_like(X, dtype=bool)
    locmax[:, 1:] &= X[:, 1:] >= X[:, :-1]
    locmax[:, :-1] &= X[:, :-1] >= X[:, 1:]
    close = locmax & (X >= (vmax - margin)[:, None])
    ncand = close.sum(axis=1)

    tau = grid[jmax].astype(float)
    # vectorised refinement of the unambiguous rows
    simple = ncand <= 1
    interior = simple & (jmax > 0) & (jmax < m - 1)
    left_end = simple & (jmax == 0)
    right_end = simple & (jmax == m - 1)
    d_a = model.derivative(coeffs, win.a)
    d_b = model.derivative(coeffs, win.b)
    tau = np.where(left_end & (d_a <= 0), win.a, tau)
    tau = np.where(right_end & (d_b >= 0), win.b, tau)
    need = interior | (left_end & (d_a > 0)) | (right_end & (d_b < 0))
    lo = grid[np.clip(jmax - 1, 0, m - 1)]
    hi = grid[np.clip(jmax + 1, 0, m - 1)]
    d_lo = model.derivative(coeffs, lo)
    d_hi = model.derivative(coeffs, hi)
    bracketed = need & (d_lo > 0) & (d_hi < 0)
    if bracketed.any():
        sub = TwoWaveCoefficients(*(np.asarray(x)[bracketed] for x in coeffs.as_tuple()))
        tau[bracketed] = _bisect_many(model, sub, lo[bracketed], hi[bracketed])

    near_tie = np.zeros(n, dtype=bool)
    tol_rows = TIE_RTOL * (coeffs.A1 + model.amp2_scale * coeffs.A2 + 1.0)
    for i in np.flatnonzero(~simple):
        c = TwoWaveCoefficients(*(float(np.asarray(x)[i]) for x in coeffs.as_tuple()))
        cands = [_refine_one(model, c, grid, int(j), win) for j in np.flatnonzero(close[i])]
        vals = np.array([model.value(c, s) for s in cands])
        order = np.argsort(cands) if side == "leftmost" else np.argsort(cands)[::-1]
        best = vals.max()
        winners = [k for k in order if vals[k] >= best - tol_rows[i]]
        tau[i] = cands[winners[0]]
        near_tie[i] = len({round(cands[k], 9) for k in winners}) > 1
    value = model.value(coeffs, tau)
    return tau, value, tau == win.a, tau == win.b, near_tie


# --------------------------------------------------------------------------
# local-maximum rate
# --------------------------------------------------------------------------


def _arc_union_fraction(starts: np.ndarray, length: float, period: float) -> float:
    """Fraction of a circle of circumference ``period`` covered by equal arcs."""
    if starts.size == 0:
        return 0.0
    if length >= period:
        return 1.0
    s = np.sort(np.mod(starts, period))
    nxt = np.append(s[1:], s[0] + period)
    gaps = np.maximum(0.0, nxt - (s + length))
    return float(1.0 - gaps.sum() / period)


def estimate_local_max_rate(model, epsilon: float, n: int = 100_000, rng: RngSpec | None = None, grid_step: float | None = None, ci_level: float = 0.99) -> LocalMaxRateEstimate:
    """Estimate ``P(local maximum in (0, epsilon)) / epsilon``.

    Phase-shift models are computed exactly from the waveform's local
    maxima.  Two-wave models detect a ``+`` to ``-`` sign change of ``X'``
    on a fine sub-grid of ``(0, epsilon)``; OU paths look for an interior
    grid node higher than both neighbours at ``grid_step`` (default: the
    model's own step).
    """
    from .estimate import clopper_pearson

    if not epsilon > 0:
        raise ParameterError("epsilon must be positive")
    if isinstance(model, PhaseShiftModel):
        w = model.waveform
        peaks = w.local_max_times()
        p = _arc_union_fraction(peaks - epsilon, epsilon, w.period)
        return LocalMaxRateEstimate(epsilon, p, p / epsilon, 0, p / epsilon, p / epsilon)
    if rng is None:
        raise ParameterError("rng is required for Monte Carlo rate estimates")
    hits = 0
    if isinstance(model, TwoWaveGaussianModel):
        sub = np.linspace(0.0, epsilon, 65)
        for block, start, stop in block_ranges(n):
            c = model.draw_block(rng, block)
            c = TwoWaveCoefficients(*(np.asarray(x)[: stop - start, None] for x in c.as_tuple()))
            d = model.derivative(c, sub[None, :])
            hits += int(np.any((d[:, :-1] > 0) & (d[:, 1:] <= 0), axis=1).sum())
    elif isinstance(model, OrnsteinUhlenbeckModel):
        step = grid_step or model.grid_step
        ou = OrnsteinUhlenbeckModel(step)
        ou_grid(epsilon, step)
        for block, start, stop in block_ranges(n):
            for _, path in ou.simulate_block(epsilon, rng, block, rows=stop - start):
                mid = path[:, 1:-1]
                peak = (mid > path[:, :-2]) & (mid > path[:, 2:])
                hits += int(peak.any(axis=1).sum())
    else:
        raise ParameterError(f"unsupported model {model!r}")
    p = hits / n
    lo, hi = clopper_pearson(hits, n, ci_level)
    return LocalMaxRateEstimate(epsilon, p, p / epsilon, n, lo / epsilon, hi / epsilon)
