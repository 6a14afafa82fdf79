"""Monte Carlo estimation of the supremum-location law.

The law on ``[0, T]`` is estimated as two endpoint atoms plus an
equal-width histogram of the interior, each bin carrying a
Clopper-Pearson interval for its probability mass.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _io
from .argmax import SupLocation, Window, phase_argmax_many, two_wave_argmax_many
from .errors import DataError, ParameterError
from .models import (
    OrnsteinUhlenbeckModel,
    PhaseShiftModel,
    RngSpec,
    TwoWaveCoefficients,
    TwoWaveGaussianModel,
    block_ranges,
    ou_grid,
)


@dataclass(frozen=True)
class TauSample:
    """Realised supremum locations of paths ``0..n-1``, in path order."""

    T: float
    tau: np.ndarray
    value: np.ndarray
    at_left: np.ndarray
    at_right: np.ndarray
    near_tie: np.ndarray
    grid_step: float = 0.0

    def __len__(self):
        return self.tau.size

    def __getitem__(self, i) -> SupLocation:
        return SupLocation(float(self.tau[i]), float(self.value[i]), bool(self.at_left[i]), bool(self.at_right[i]), bool(self.near_tie[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def _sample_block(model, T: float, rng: RngSpec, block: int, rows: int, side: str, grid_step: float | None):
    win = Window(0.0, T)
    if isinstance(model, PhaseShiftModel):
        us = model.sample_phases(rng, block)[:rows]
        return phase_argmax_many(model.waveform, us, win, side)
    if isinstance(model, TwoWaveGaussianModel):
        c = model.draw_block(rng, block)
        c = TwoWaveCoefficients(*(np.asarray(x)[:rows] for x in c.as_tuple()))
        return two_wave_argmax_many(model, c, win, grid_step or 1e-3, side)
    if isinstance(model, OrnsteinUhlenbeckModel):
        times = ou_grid(T, model.grid_step)
        out = [np.empty(rows) for _ in range(2)] + [np.zeros(rows, dtype=bool) for _ in range(3)]
        last = times.size - 1
        for start, path in model.simulate_block(T, rng, block, rows=rows):
            if side == "leftmost":
                j = np.argmax(path, axis=1)
            else:
                j = last - np.argmax(path[:, ::-1], axis=1)
            vmax = path[np.arange(j.size), j]
            stop = start + j.size
            out[0][start:stop] = times[j]
            out[1][start:stop] = vmax
            out[2][start:stop] = j == 0
            out[3][start:stop] = j == last
            out[4][start:stop] = (path == vmax[:, None]).sum(axis=1) > 1
        return tuple(out)
    raise ParameterError(f"unsupported model {model!r}")


def mc_tau_sample(model, T: float, n: int, rng: RngSpec, side: str = "leftmost", grid_step: float | None = None, threads: int = 1) -> TauSample:
    """Supremum locations of ``n`` independent paths on ``[0, T]``.

    Phase-shift models use the exact argmax, two-wave models a grid
    argmax (step ``grid_step``, default 1e-3) refined by bisection, OU
    paths the grid argmax on the model's own grid.  Blocks of paths may be
    computed on ``threads`` workers; the result is ordered by path index
    and independent of the worker count.
    """
    if n < 1:
        raise ParameterError("n must be >= 1")
    if not T > 0:
        raise ParameterError("T must be positive")
    if isinstance(model, TwoWaveGaussianModel) and model.common_period is not None and model.amp2_scale > 0 and model.common_period <= T:
        raise ParameterError("two-wave periods repeat within the window")
    jobs = block_ranges(n)

    def run(job):
        block, start, stop = job
        return _sample_block(model, T, rng, block, stop - start, side, grid_step)

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(job) for job in jobs]
    cols = [np.concatenate([np.asarray(p[i]) for p in parts]) for i in range(5)]
    if isinstance(model, OrnsteinUhlenbeckModel):
        step = model.grid_step
    elif isinstance(model, TwoWaveGaussianModel):
        step = grid_step or 1e-3
    else:
        step = 0.0
    return TauSample(float(T), cols[0].astype(float), cols[1].astype(float), cols[2].astype(bool), cols[3].astype(bool), cols[4].astype(bool), step)


# --------------------------------------------------------------------------
# intervals and tests
# --------------------------------------------------------------------------


def clopper_pearson(count, n, level: float = 0.99):
    """Exact binomial interval for ``count`` successes out of ``n``.

    Accepts scalars or arrays; returns ``(lo, hi)`` of matching shape.
    """
    if not 0 < level < 1:
        raise ParameterError("level must lie in (0, 1)")
    count = np.asarray(count, dtype=float)
    n = np.asarray(n, dtype=float)
    if np.any(count < 0) or np.any(count > n):
        raise ParameterError("need 0 <= count <= n")
    alpha = 1.0 - level
    with np.errstate(invalid="ignore"):
        lo = np.where(count > 0, stats.beta.ppf(alpha / 2, count, n - count + 1), 0.0)
        hi = np.where(count < n, stats.beta.ppf(1 - alpha / 2, count + 1, n - count), 1.0)
    if lo.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


@dataclass(frozen=True)
class KSResult:
    statistic: float
    critical: float
    pvalue: float
    alpha: float
    passed: bool


def ks_uniform(taus, T: float, alpha: float = 0.01) -> KSResult:
    """One-sample KS test of ``taus`` against Uniform(0, T).

    ``critical`` is the asymptotic Kolmogorov critical value
    ``K_{1-alpha} / sqrt(n)``.
    """
    x = np.asarray(getattr(taus, "tau", taus), dtype=float)
    if x.size < 1:
        raise DataError("need at least one sample")
    res = stats.kstest(x / T, "uniform")
    crit = float(stats.kstwobign.isf(alpha) / math.sqrt(x.size))
    return KSResult(float(res.statistic), crit, float(res.pvalue), alpha, bool(res.statistic <= crit))


# --------------------------------------------------------------------------
# histogram
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Bin:
    lo: float
    hi: float
    count: int
    p_hat: float
    ci_lo: float
    ci_hi: float

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class DensityEstimate:
    """Endpoint atoms plus interior bins of the estimated law."""

    T: float
    n: int
    atom_left: int
    atom_right: int
    bins: tuple[Bin, ...]
    ci_level: float

    def __post_init__(self):
        total = self.atom_left + self.atom_right + sum(b.count for b in self.bins)
        if total != self.n:
            raise DataError(f"counts sum to {total}, expected n={self.n}")

    @property
    def edges(self) -> np.ndarray:
        return np.array([b.lo for b in self.bins] + [self.bins[-1].hi])

    @property
    def counts(self) -> np.ndarray:
        return np.array([b.count for b in self.bins])

    def densities(self) -> np.ndarray:
        return np.array([b.p_hat / b.width for b in self.bins])

    def mass_interval(self, lo: float, hi: float) -> tuple[float, float, float]:
        """``(p_hat, ci_lo, ci_hi)`` for the union of bins inside ``[lo, hi]``.

        Both ends must be bin edges; atoms at 0 or T are included when the
        closed interval reaches them.
        """
        edges = self.edges
        tol = 1e-9 * self.T
        i = np.flatnonzero(np.abs(edges - lo) <= tol)
        j = np.flatnonzero(np.abs(edges - hi) <= tol)
        if i.size == 0 or j.size == 0 or j[0] < i[0]:
            raise ParameterError(f"[{lo}, {hi}] is not a union of bins")
        count = int(self.counts[i[0] : j[0]].sum())
        if i[0] == 0 and lo <= tol:
            count += self.atom_left
        if j[0] == len(self.bins) and hi >= self.T - tol:
            count += self.atom_right
        ci = clopper_pearson(count, self.n, self.ci_level)
        return count / self.n, ci[0], ci[1]

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "n": self.n,
            "ci_level": self.ci_level,
            "atom_left": self.atom_left,
            "atom_right": self.atom_right,
            "bins": [
                {"lo": b.lo, "hi": b.hi, "count": b.count, "p_hat": b.p_hat, "ci_lo": b.ci_lo, "ci_hi": b.ci_hi}
                for b in self.bins
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DensityEstimate":
        try:
            bins = tuple(
                Bin(float(b["lo"]), float(b["hi"]), int(b["count"]), float(b["p_hat"]), float(b["ci_lo"]), float(b["ci_hi"]))
                for b in doc["bins"]
            )
            return cls(float(doc["T"]), int(doc["n"]), int(doc["atom_left"]), int(doc["atom_right"]), bins, float(doc["ci_level"]))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, DataError):
                raise
            raise DataError(f"malformed density estimate: {exc}") from exc

    def csv_rows(self):
        atom = clopper_pearson([self.atom_left, self.atom_right], self.n, self.ci_level)
        yield ("atom_left", 0.0, 0.0, self.atom_left, self.atom_left / self.n, float(atom[0][0]), float(atom[1][0]))
        for b in self.bins:
            yield ("bin", b.lo, b.hi, b.count, b.p_hat, b.ci_lo, b.ci_hi)
        yield ("atom_right", self.T, self.T, self.atom_right, self.atom_right / self.n, float(atom[0][1]), float(atom[1][1]))

    def write(self, json_path, csv_path=None) -> None:
        _io.dump(self.to_dict(), json_path)
        if csv_path is not None:
            _io.write_csv(csv_path, ("kind", "lo", "hi", "count", "p_hat", "ci_lo", "ci_hi"), self.csv_rows())


def histogram(taus, T: float, bin_count: int, atom_tol: float = 0.0, ci_level: float = 0.99) -> DensityEstimate:
    """Bin supremum locations into endpoint atoms and equal-width interior bins.

    Locations within ``atom_tol`` of 0 or ``T`` count as atoms.

    Raises
    ------
    DataError
        On an empty sample or a location outside ``[0, T]``.
    """
    x = np.asarray(getattr(taus, "tau", taus), dtype=float).ravel()
    if bin_count < 1:
        raise ParameterError("bin_count must be >= 1")
    if x.size == 0:
        raise DataError("no samples")
    if np.any(x < 0) or np.any(x > T) or not np.all(np.isfinite(x)):
        raise DataError("sample outside [0, T]")
    left = x <= atom_tol
    right = ~left & (x >= T - atom_tol)
    inner = x[~left & ~right]
    edges = np.linspace(0.0, T, bin_count + 1)
    idx = np.clip(np.searchsorted(edges, inner, side="right") - 1, 0, bin_count - 1)
    counts = np.bincount(idx, minlength=bin_count)
    n = x.size
    lo, hi = clopper_pearson(counts, n, ci_level)
    lo, hi = np.atleast_1d(lo), np.atleast_1d(hi)
    bins = tuple(
        Bin(float(edges[i]), float(edges[i + 1]), int(counts[i]), float(counts[i] / n), float(lo[i]), float(hi[i]))
        for i in range(bin_count)
    )
    return DensityEstimate(float(T), int(n), int(left.sum()), int(right.sum()), bins, float(ci_level))


def local_density(taus, lo: float, hi: float, ci_level: float = 0.99) -> tuple[float, float, float]:
    """Density estimate on ``[lo, hi)`` with its Clopper-Pearson band."""
    x = np.asarray(getattr(taus, "tau", taus), dtype=float)
    k = int(((x >= lo) & (x < hi)).sum())
    c_lo, c_hi = clopper_pearson(k, x.size, ci_level)
    w = hi - lo
    return k / x.size / w, c_lo / w, c_hi / w
