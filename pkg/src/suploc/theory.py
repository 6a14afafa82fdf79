"""Exact supremum-location laws, density bounds and inequality checkers.

For a phase-shift model ``X(t) = x(t + U)`` the supremum location is a
function of the phase ``u``.  On each phase interval where the winning
candidate (a knot, or a window endpoint) does not change, either the
location is constant (an endpoint atom) or it moves as ``t* - u``, which
spreads mass uniformly with density ``1 / period``.  Summing those pieces
gives the law exactly: atoms at ``0`` and ``T`` plus a piecewise-constant
interior density whose values are integer multiples of ``1 / period``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import _io
from .argmax import Window, phase_argmax_many, phase_candidates_many, _check_side
from .errors import DataError, ParameterError
from .estimate import DensityEstimate, clopper_pearson
from .models import PiecewiseLinearWaveform

#: Breakpoints closer than this (times the window length) are merged.
SNAP_RTOL = 1e-12
#: Slack allowed in exact (floating point) comparisons.
EXACT_TOL = 1e-12
#: Slack for probability-mass comparisons of exact laws.
MASS_TOL = 1e-10


@dataclass(frozen=True)
class ExactLaw:
    """Law of the supremum location on ``[a, a + T]``.

    ``pieces`` are ``(lo, hi, density)`` in absolute time, contiguous and
    covering the open window; the density on ``[lo, hi)`` is the piece
    value (right-continuous version).  ``tie_mass`` is the probability of
    phases whose maximum is attained at two or more points.
    """

    T: float
    atoms: tuple[tuple[float, float], ...]
    pieces: tuple[tuple[float, float, float], ...]
    a: float = 0.0
    side: str = "leftmost"
    tie_mass: float = 0.0
    waveform: PiecewiseLinearWaveform | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.pieces:
            raise DataError("law needs at least one piece")
        total = self.atom_mass + self.interior_mass
        if abs(total - 1.0) > 1e-10:
            raise DataError(f"law mass {total!r} != 1")
        if any(d < 0 for _, _, d in self.pieces):
            raise DataError("negative density")

    @property
    def b(self) -> float:
        return self.a + self.T

    @property
    def atom_mass(self) -> float:
        return float(sum(m for _, m in self.atoms))

    @property
    def interior_mass(self) -> float:
        return float(sum((hi - lo) * d for lo, hi, d in self.pieces))

    def atom_at(self, loc: float) -> float:
        return float(sum(m for x, m in self.atoms if x == loc))

    @property
    def atom_left(self) -> float:
        return self.atom_at(self.a)

    @property
    def atom_right(self) -> float:
        return self.atom_at(self.b)

    @property
    def assumption_u(self) -> bool:
        return self.tie_mass <= 0.0

    @property
    def breakpoints(self) -> np.ndarray:
        """Interior points where the density changes value."""
        return np.array([p[0] for p in self.pieces[1:]])

    @property
    def _lo(self):
        return np.array([p[0] for p in self.pieces])

    @property
    def _hi(self):
        return np.array([p[1] for p in self.pieces])

    @property
    def _dens(self):
        return np.array([p[2] for p in self.pieces])

    def density(self, t):
        """Right-continuous density ``f(t)``; scalars or arrays."""
        t = np.asarray(t, dtype=float)
        i = np.clip(np.searchsorted(self._lo, t, side="right") - 1, 0, len(self.pieces) - 1)
        out = self._dens[i]
        return float(out) if out.ndim == 0 else out

    def density_left(self, t):
        """Left limit ``f(t-)``."""
        t = np.asarray(t, dtype=float)
        i = np.clip(np.searchsorted(self._hi, t, side="left"), 0, len(self.pieces) - 1)
        out = self._dens[i]
        return float(out) if out.ndim == 0 else out

    @property
    def f0(self) -> float:
        """``f(0+)``."""
        return float(self.pieces[0][2])

    @property
    def fT(self) -> float:
        """``f(T-)``."""
        return float(self.pieces[-1][2])

    def integral(self, lo: float, hi: float) -> float:
        """Integral of the interior density over ``[lo, hi]``."""
        if hi <= lo:
            return 0.0
        L, H, D = self._lo, self._hi, self._dens
        overlap = np.clip(np.minimum(H, hi) - np.maximum(L, lo), 0.0, None)
        return float(np.dot(overlap, D))

    def mass(self, lo: float, hi: float) -> float:
        """Probability of the closed interval ``[lo, hi]`` (atoms included)."""
        m = self.integral(lo, hi)
        m += sum(mass for x, mass in self.atoms if lo <= x <= hi)
        return float(m)

    def shifted(self, delta: float) -> "ExactLaw":
        """Law of the same model on the window moved by ``delta``."""
        return replace(
            self,
            a=self.a + delta,
            atoms=tuple((x + delta, m) for x, m in self.atoms),
            pieces=tuple((lo + delta, hi + delta, d) for lo, hi, d in self.pieces),
        )

    def to_dict(self) -> dict:
        doc = {
            "T": self.T,
            "a": self.a,
            "side": self.side,
            "tie_mass": self.tie_mass,
            "atoms": [[x, m] for x, m in self.atoms],
            "pieces": [[lo, hi, d] for lo, hi, d in self.pieces],
        }
        if self.waveform is not None:
            doc["waveform"] = self.waveform.to_dict()
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ExactLaw":
        try:
            w = doc.get("waveform")
            return cls(
                T=float(doc["T"]),
                atoms=tuple((float(x), float(m)) for x, m in doc["atoms"]),
                pieces=tuple((float(lo), float(hi), float(d)) for lo, hi, d in doc["pieces"]),
                a=float(doc.get("a", 0.0)),
                side=str(doc.get("side", "leftmost")),
                tie_mass=float(doc.get("tie_mass", 0.0)),
                waveform=PiecewiseLinearWaveform.from_dict(w) if w is not None else None,
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            if isinstance(exc, DataError):
                raise
            raise DataError(f"malformed exact law: {exc}") from exc


# --------------------------------------------------------------------------
# exact law of a phase-shift model
# --------------------------------------------------------------------------


def _linear_root(u0, u1, f0, f1):
    """Root of the line through ``(u0, f0)``, ``(u1, f1)`` strictly inside ``(u0, u1)``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        s = f0 / (f0 - f1)
    ok = np.isfinite(s) & (s > 0) & (s < 1)
    return (u0 + s * (u1 - u0))[ok]


def _snap(points: np.ndarray, tol: float) -> np.ndarray:
    pts = np.sort(points)
    keep = np.concatenate([[True], np.diff(pts) > tol])
    return pts[keep]


def exact_tau_law_phase(w: PiecewiseLinearWaveform, T: float, side: str = "leftmost") -> ExactLaw:
    """Exact law of the supremum location of ``x(t + U)`` on ``[0, T]``.

    The phase circle is cut wherever a knot enters or leaves the window
    and wherever an endpoint value crosses the best interior knot value or
    the other endpoint value.  Inside each resulting phase interval the
    winner is fixed; it is identified at the interval midpoint.

    Raises
    ------
    ParameterError
        For ``T <= 0`` or a constant waveform.
    """
    _check_side(side)
    if not T > 0:
        raise ParameterError("T must be positive")
    if np.ptp(w.values) == 0:
        raise ParameterError("constant waveform: supremum location is not informative")
    P = w.period
    win = Window(0.0, T)

    # phases where the set of knots inside the window changes
    events = np.concatenate([[0.0, P], w.times, np.mod(w.times - T, P)])
    events = _snap(events[(events >= 0) & (events <= P)], SNAP_RTOL * P)
    e0, e1 = events[:-1], events[1:]
    keep = e1 - e0 > SNAP_RTOL * P
    e0, e1 = e0[keep], e1[keep]
    mid = 0.5 * (e0 + e1)

    # on each such interval the endpoint values are linear in u and the
    # best knot value is constant
    _, cand_vals, mask = phase_candidates_many(w, mid, win)
    inner = mask.copy()
    inner[:, 0] = inner[:, -1] = False
    best_knot = np.max(np.where(inner, cand_vals, -np.inf), axis=1)
    L0, L1 = w(e0), w(e1)
    R0, R1 = w(e0 + T), w(e1 + T)
    has_knot = np.isfinite(best_knot)
    bk = np.where(has_knot, best_knot, 0.0)
    cuts = [
        _linear_root(e0[has_knot], e1[has_knot], (L0 - bk)[has_knot], (L1 - bk)[has_knot]),
        _linear_root(e0[has_knot], e1[has_knot], (R0 - bk)[has_knot], (R1 - bk)[has_knot]),
        _linear_root(e0, e1, L0 - R0, L1 - R1),
    ]
    us = _snap(np.concatenate([events] + cuts), SNAP_RTOL * P)
    s0, s1 = us[:-1], us[1:]
    sm = 0.5 * (s0 + s1)
    tau, _, at_left, at_right, tie = phase_argmax_many(w, sm, win, side)
    length = s1 - s0

    tie_mass = float(length[tie].sum() / P)
    atom_left = float(length[at_left].sum() / P)
    atom_right = float(length[at_right].sum() / P)
    moving = ~at_left & ~at_right
    # knot at x-position y = tau + u wins for u in (s0, s1): tau runs over (y - s1, y - s0)
    y = tau[moving] + sm[moving]
    t_lo = np.clip(y - s1[moving], 0.0, T)
    t_hi = np.clip(y - s0[moving], 0.0, T)

    tol = SNAP_RTOL * max(T, 1.0)
    reps = _snap(np.concatenate([[0.0, T], t_lo, t_hi]), tol)
    reps[0], reps[-1] = 0.0, T
    reps = reps[(reps >= 0) & (reps <= T)]
    reps = np.concatenate([[0.0], reps[(reps > tol) & (reps < T - tol)], [T]])

    def index(x):
        return np.clip(np.searchsorted(reps, x + tol, side="right") - 1, 0, reps.size - 1)

    i_lo, i_hi = index(t_lo), index(t_hi)
    cover = np.zeros(reps.size, dtype=np.int64)
    np.add.at(cover, i_lo, 1)
    np.add.at(cover, i_hi, -1)
    counts = np.cumsum(cover)[:-1]

    pieces = []
    for j in range(counts.size):
        lo, hi, c = reps[j], reps[j + 1], int(counts[j])
        if pieces and pieces[-1][2] == c:
            pieces[-1][1] = hi
        else:
            pieces.append([lo, hi, c])
    interior = sum((hi - lo) * c for lo, hi, c in pieces) / P
    # slivers dropped by snapping: hand their (tiny) mass back to the atoms
    atoms = []
    drift = 1.0 - interior - atom_left - atom_right
    if atom_left > 0 or atom_right > 0:
        if atom_left >= atom_right:
            atom_left += drift
        else:
            atom_right += drift
    if atom_left > 0:
        atoms.append((0.0, float(atom_left)))
    if atom_right > 0:
        atoms.append((float(T), float(atom_right)))
    return ExactLaw(
        T=float(T),
        atoms=tuple(atoms),
        pieces=tuple((float(lo), float(hi), c / P) for lo, hi, c in pieces),
        side=side,
        tie_mass=tie_mass,
        waveform=w,
    )


def brute_force_law_masses(w: PiecewiseLinearWaveform, T: float, edges, n_phases: int = 10_000, dt: float = 1e-3, side: str = "leftmost"):
    """Independent oracle: grid argmax over an even grid of phases.

    Returns ``(atom_left, bin_masses, atom_right)`` for the interior bins
    given by ``edges``.  Ties within 1e-9 are resolved by position.
    """
    m = int(round(T / dt))
    t = np.linspace(0.0, T, m + 1)
    us = (np.arange(n_phases) + 0.5) / n_phases * w.period
    taus = np.empty(n_phases)
    for start in range(0, n_phases, 500):
        u = us[start : start + 500]
        X = w(t[None, :] + u[:, None])
        ok = X >= X.max(axis=1, keepdims=True) - 1e-9
        j = np.argmax(ok, axis=1) if side == "leftmost" else m - np.argmax(ok[:, ::-1], axis=1)
        taus[start : start + 500] = t[j]
    left = taus == 0.0
    right = taus == t[-1]
    inner = taus[~left & ~right]
    counts, _ = np.histogram(inner, bins=edges)
    return left.mean(), counts / n_phases, right.mean()


def law_bin_masses(law: ExactLaw, edges) -> np.ndarray:
    edges = np.asarray(edges, dtype=float)
    return np.array([law.integral(lo, hi) for lo, hi in zip(edges[:-1], edges[1:])])


# --------------------------------------------------------------------------
# density bounds
# --------------------------------------------------------------------------


def _check_t(t: float, T: float) -> None:
    if not 0 < t < T:
        raise ParameterError(f"need 0 < t < T, got t={t}, T={T}")


def general_bound(t: float, T: float) -> float:
    """Universal upper bound ``max(1/t, 1/(T-t))`` on the density."""
    _check_t(t, T)
    return max(1.0 / t, 1.0 / (T - t))


def symmetric_bound(t: float, T: float) -> float:
    """Sharper bound valid for time-reversible processes with a unique supremum."""
    _check_t(t, T)
    if t <= T / 3:
        return 1.0 / (2 * t)
    if t <= T / 2:
        return 1.0 / (T - t)
    if t <= 2 * T / 3:
        return 1.0 / t
    return 1.0 / (2 * (T - t))


def _log_ratio(hi: float, lo: float) -> float:
    if lo <= 0:
        return math.inf
    return math.log(hi / lo)


def general_bound_integral(lo: float, hi: float, T: float) -> float:
    """Integral of ``max(1/t, 1/(T-t))`` over ``[lo, hi]`` within ``[0, T]``."""
    lo, hi = max(lo, 0.0), min(hi, T)
    if hi <= lo:
        return 0.0
    h = T / 2
    total = 0.0
    if lo < h:
        total += _log_ratio(min(hi, h), lo)
    if hi > h:
        total += _log_ratio(T - max(lo, h), T - hi)
    return total


def symmetric_bound_integral(lo: float, hi: float, T: float) -> float:
    """Integral of :func:`symmetric_bound` over ``[lo, hi]`` within ``[0, T]``."""
    lo, hi = max(lo, 0.0), min(hi, T)
    if hi <= lo:
        return 0.0
    cuts = [0.0, T / 3, T / 2, 2 * T / 3, T]
    pieces = [
        lambda a, b: 0.5 * _log_ratio(b, a),
        lambda a, b: _log_ratio(T - a, T - b),
        lambda a, b: _log_ratio(b, a),
        lambda a, b: 0.5 * _log_ratio(T - a, T - b),
    ]
    total = 0.0
    for k in range(4):
        a, b = max(lo, cuts[k]), min(hi, cuts[k + 1])
        if b > a:
            total += pieces[k](a, b)
    return total


def _inf_general_bound(lo: float, hi: float, T: float) -> float:
    """Infimum of the general bound over ``[lo, hi)``."""
    h = T / 2
    if lo <= h <= hi:
        return 2.0 / T
    x = hi if hi < h else lo
    return max(1.0 / x, 1.0 / (T - x))


# --------------------------------------------------------------------------
# total variation
# --------------------------------------------------------------------------


VARIANTS = ("total", "positive", "negative")


def tv(law: ExactLaw, t1: float, t2: float, variant: str = "total") -> float:
    """Total, positive or negative variation of the density over ``(t1, t2)``."""
    if variant not in VARIANTS:
        raise ParameterError(f"variant must be one of {VARIANTS}")
    if not t1 < t2:
        raise ParameterError("need t1 < t2")
    bp = law.breakpoints
    if bp.size == 0:
        return 0.0
    d = law._dens
    jumps = d[1:] - d[:-1]
    inside = (bp > t1) & (bp < t2)
    j = jumps[inside]
    if variant == "total":
        return float(np.abs(j).sum())
    if variant == "positive":
        return float(np.clip(j, 0, None).sum())
    return float(np.clip(-j, 0, None).sum())


# --------------------------------------------------------------------------
# check reports
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one inequality ``lhs <= rhs``."""

    name: str
    inputs: dict
    lhs: float
    rhs: float
    passed: bool
    statistical: bool = False
    skipped: bool = False
    detail: str = ""

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def status(self) -> str:
        if self.skipped:
            return "SKIP"
        return "PASS" if self.passed else "FAIL"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "inputs": self.inputs,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "status": self.status,
            "statistical": self.statistical,
            "detail": self.detail,
        }


def _leq(name, inputs, lhs, rhs, tol=EXACT_TOL, statistical=False, detail="") -> CheckReport:
    scale = max(1.0, abs(lhs) if math.isfinite(lhs) else 1.0, abs(rhs) if math.isfinite(rhs) else 1.0)
    return CheckReport(name, inputs, float(lhs), float(rhs), bool(rhs - lhs >= -tol * scale), statistical, False, detail)


def _skip(name, inputs, detail) -> CheckReport:
    return CheckReport(name, inputs, math.nan, math.nan, True, False, True, detail)


def _worst(name, cases, tol=EXACT_TOL, statistical=False) -> CheckReport:
    """Summarise a family of ``(inputs, lhs, rhs)`` cases by the smallest slack."""
    if not cases:
        return _skip(name, {}, "no cases")
    inputs, lhs, rhs = min(cases, key=lambda c: c[2] - c[1])
    failing = sum(1 for _, l, r in cases if r - l < -tol * max(1.0, abs(l), abs(r) if math.isfinite(r) else 1.0))
    rep = _leq(name, inputs, lhs, rhs, tol, statistical, f"{len(cases)} cases, {failing} failing")
    return rep


def format_reports(reports: Sequence[CheckReport]) -> str:
    """One line per check: name, lhs, rhs, slack, status."""
    width = max([len(r.name) for r in reports] + [5])
    lines = [f"{'check':<{width}}  {'lhs':>14}  {'rhs':>14}  {'slack':>14}  status"]
    for r in reports:
        lines.append(f"{r.name:<{width}}  {r.lhs:>14.8g}  {r.rhs:>14.8g}  {r.slack:>14.8g}  {r.status}")
    return "\n".join(lines)


def reports_to_dict(reports: Sequence[CheckReport]) -> list[dict]:
    return [r.to_dict() for r in reports]


# --------------------------------------------------------------------------
# checkers on exact laws
# --------------------------------------------------------------------------


def _default_points(law: ExactLaw, grid: int = 16, max_breaks: int = 64) -> list[float]:
    pts = set(law.a + law.T * np.arange(1, grid) / grid)
    bp = law.breakpoints
    if bp.size > max_breaks:
        bp = bp[np.linspace(0, bp.size - 1, max_breaks).astype(int)]
    pts.update(bp.tolist())
    for lo, hi, _ in law.pieces[:max_breaks]:
        pts.add(0.5 * (lo + hi))
    return sorted(p for p in pts if law.a < p < law.b)


def _fmin(law: ExactLaw, t: float) -> float:
    return min(law.density(t), law.density_left(t))


def check_thm31(law, pairs: Iterable[tuple[float, float]] | None = None, eps: Iterable[float] | None = None, assumption_u: bool | None = None) -> list[CheckReport]:
    """Check the density bound, positivity and variation inequalities.

    ``law`` is an :class:`ExactLaw` or a :class:`DensityEstimate`.  For an
    estimate only the bound check (per-bin Clopper-Pearson lower mass vs
    the integrated bound) and positivity run; variation checks are skipped.
    Times are relative to the window start.
    """
    if isinstance(law, DensityEstimate):
        return _check_thm31_estimate(law, assumption_u)
    T, a = law.T, law.a
    if assumption_u is None:
        assumption_u = law.assumption_u
    reports = []

    cases = []
    for lo, hi, d in law.pieces:
        cases.append(({"piece": [lo - a, hi - a]}, d, _inf_general_bound(lo - a, hi - a, T)))
    reports.append(_worst("density_bound", cases))

    inf_density = min(d for _, _, d in law.pieces)
    if assumption_u:
        reports.append(
            CheckReport("positivity", {}, 0.0, inf_density, inf_density > 0, detail="inf of density over (0,T)")
        )
    else:
        reports.append(_skip("positivity", {"tie_mass": law.tie_mass}, "unique-supremum assumption fails"))

    points = _default_points(law)
    if pairs is None:
        pairs = [(p, q) for i, p in enumerate(points) for q in points[i + 1 :]]
    else:
        pairs = [(a + p, a + q) for p, q in pairs]
    cases = []
    for t1, t2 in pairs:
        lhs = tv(law, t1, t2)
        rhs = _fmin(law, t1) + _fmin(law, t2)
        cases.append(({"t1": t1 - a, "t2": t2 - a}, lhs, rhs))
    reports.append(_worst("tv_interior", cases))

    eps_list = [p - a for p in points] if eps is None else list(eps)
    pos, neg, left, right = [], [], [], []
    for e in eps_list:
        if not 0 < e < T:
            raise ParameterError(f"eps must lie in (0, T), got {e}")
        x, y = a + e, a + T - e
        pos.append(({"eps": e}, tv(law, a, x, "positive"), _fmin(law, x)))
        neg.append(({"eps": e}, tv(law, y, a + T, "negative"), _fmin(law, y)))
        left.append(({"eps": e}, tv(law, a, x), law.f0 + _fmin(law, x)))
        right.append(({"eps": e}, tv(law, y, a + T), _fmin(law, y) + law.fT))
    reports.append(_worst("tv_positive_left", pos))
    reports.append(_worst("tv_negative_right", neg))
    reports.append(_worst("tv_left_endpoint", left))
    reports.append(_worst("tv_right_endpoint", right))
    return reports


def _check_thm31_estimate(est: DensityEstimate, assumption_u: bool | None) -> list[CheckReport]:
    reports = check_bound_estimate(est, "general")
    worst = min(reports, key=lambda r: r.slack)
    summary = replace(worst, name="density_bound", detail=f"{len(reports)} bins, {sum(not r.passed for r in reports)} failing")
    out = [summary]
    if assumption_u:
        hi = min(b.ci_hi / b.width for b in est.bins)
        out.append(CheckReport("positivity", {}, 0.0, hi, hi > 0, statistical=True, detail="smallest upper CI density"))
    else:
        out.append(_skip("positivity", {}, "unique-supremum assumption not asserted"))
    for name in ("tv_interior", "tv_positive_left", "tv_negative_right", "tv_left_endpoint", "tv_right_endpoint"):
        out.append(_skip(name, {}, "variation checks need an exact law"))
    return out


def check_bound_estimate(est: DensityEstimate, bound: str = "general") -> list[CheckReport]:
    """Per-bin check: Clopper-Pearson lower bound of bin mass <= integrated bound."""
    integ = {"general": general_bound_integral, "symmetric": symmetric_bound_integral}
    if bound not in integ:
        raise ParameterError(f"unknown bound {bound!r}")
    f = integ[bound]
    out = []
    for b in est.bins:
        rhs = f(b.lo, b.hi, est.T)
        out.append(_leq(f"bound_{bound}", {"bin": [b.lo, b.hi]}, b.ci_lo, rhs, tol=0.0, statistical=True))
    return out


def check_thm32a(law) -> CheckReport:
    """Variation over the whole window is at most ``f(0+) + f(T-)``."""
    if isinstance(law, DensityEstimate):
        return _skip("tv_whole_window", {}, "variation checks need an exact law")
    lhs = tv(law, law.a, law.b)
    return _leq("tv_whole_window", {"T": law.T}, lhs, law.f0 + law.fT)


def _same_source(l1: ExactLaw, l2: ExactLaw) -> None:
    if l1.waveform is not None and l2.waveform is not None and l1.waveform != l2.waveform:
        raise ParameterError("laws come from different waveforms")
    if l1.side != l2.side:
        raise ParameterError("laws use different tie-breaking sides")


def check_key_lemma(lawT, lawS, delta: float, eps1: float, eps2: float) -> CheckReport:
    """Shortened-window comparison, pointwise and integrated.

    ``lawS`` is the law on a window shorter by ``Delta = T - S``.  Checks
    ``f_S(t) >= f_T(t + delta)`` at every piece midpoint of the common
    refinement of ``(0, S)``, and the integral inequality
    ``int_{e1}^{S-e2} (f_S(t) - f_T(t+delta)) dt <=
    int_{e1}^{e1+delta} f_T + int_{S-e2+delta}^{T-e2} f_T``.
    The report carries the tighter of the two.
    """
    if isinstance(lawT, DensityEstimate) or isinstance(lawS, DensityEstimate):
        return _skip("key_lemma", {}, "shifted density comparison needs exact laws")
    _same_source(lawT, lawS)
    if lawT.a != 0 or lawS.a != 0:
        raise ParameterError("laws must be anchored at 0")
    T, S = lawT.T, lawS.T
    Delta = T - S
    if not 0 <= Delta < T:
        raise ParameterError("need 0 <= Delta < T")
    if not -1e-15 <= delta <= Delta + 1e-15:
        raise ParameterError("need 0 <= delta <= Delta")
    if not (eps1 >= 0 and eps2 >= 0 and eps1 + eps2 < S):
        raise ParameterError("need eps1, eps2 >= 0 and eps1 + eps2 < T - Delta")
    inputs = {"T": T, "Delta": Delta, "delta": delta, "eps1": eps1, "eps2": eps2}

    cuts = np.concatenate([[0.0, S], lawS.breakpoints, lawT.breakpoints - delta])
    cuts = np.unique(cuts[(cuts >= 0) & (cuts <= S)])
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    mids = mids[np.diff(cuts) > 1e-12]
    fS = lawS.density(mids)
    fT = lawT.density(mids + delta)
    k = int(np.argmin(fS - fT))
    point = (float(fT[k]), float(fS[k]))

    lhs = lawS.integral(eps1, S - eps2) - lawT.integral(eps1 + delta, S - eps2 + delta)
    rhs = lawT.integral(eps1, eps1 + delta) + lawT.integral(S - eps2 + delta, T - eps2)
    pr = _leq("key_lemma", inputs, point[0], point[1])
    ir = _leq("key_lemma", inputs, lhs, rhs, tol=MASS_TOL)
    binding = pr if pr.slack <= ir.slack else ir
    part = "pointwise" if binding is pr else "integral"
    return replace(
        binding,
        passed=pr.passed and ir.passed,
        detail=f"binding={part}; pointwise slack {pr.slack:.3g} at t={mids[k]:.6g}; integral slack {ir.slack:.3g}",
    )


def check_window_monotonicity(lawBig, lawSmall, probes: Iterable[tuple[float, float]]) -> CheckReport:
    """Mass of each probe ``B`` within the small window is larger there.

    Probes are closed intervals in absolute time.  With density estimates
    the probes must be unions of bins; the check then compares the lower
    confidence bound of the large-window mass with the upper confidence
    bound of the small-window mass.
    """
    probes = list(probes)
    if isinstance(lawBig, DensityEstimate) or isinstance(lawSmall, DensityEstimate):
        if not (isinstance(lawBig, DensityEstimate) and isinstance(lawSmall, DensityEstimate)):
            raise ParameterError("mixing exact laws and estimates is not supported")
        cases = []
        for p, q in probes:
            big = lawBig.mass_interval(p, q)
            small = lawSmall.mass_interval(p, q)
            cases.append(({"probe": [p, q]}, big[1], small[2]))
        return _worst("window_monotonicity", cases, tol=0.0, statistical=True)
    _same_source(lawBig, lawSmall)
    c, d = lawSmall.a, lawSmall.b
    if not (lawBig.a <= c + 1e-12 and d <= lawBig.b + 1e-12):
        raise ParameterError("small window must lie inside the large one")
    cases = []
    for p, q in probes:
        if not (c - 1e-12 <= p <= q <= d + 1e-12):
            raise ParameterError(f"probe [{p}, {q}] outside the small window")
        cases.append(({"probe": [p, q]}, lawBig.mass(p, q), lawSmall.mass(p, q)))
    return _worst("window_monotonicity", cases, tol=MASS_TOL)


def is_symmetric(law: ExactLaw, probes: Iterable[tuple[float, float]], tol: float = 1e-10) -> bool:
    """``mass(B) == mass(T - B)`` for every probe interval."""
    return all(abs(law.mass(law.a + p, law.a + q) - law.mass(law.b - q, law.b - p)) <= tol for p, q in probes)
