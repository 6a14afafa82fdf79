"""Stationary processes whose supremum location we study.

Three families are provided:

* phase-shift models ``X(t) = x(t + U)`` built on a periodic, piecewise
  linear waveform ``x`` with ``U`` uniform over one period (triangle wave,
  sawtooth comb, or any user waveform);
* two-wave Gaussian models, a sum of two random-amplitude, random-phase
  cosines;
* the stationary Ornstein-Uhlenbeck process ``X(t) = exp(-t/2) B(exp(t))``
  sampled on a uniform time grid.

Randomness is organised in fixed-size blocks of paths.  Block ``j`` of a
run with seed ``s`` draws from its own generator seeded by ``(s, j)``, so
every path is a pure function of ``(seed, path_index)`` no matter which
worker produces it or how many paths are requested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import _io
from .errors import ConstructionError, ParameterError

#: Number of paths sharing one generator.
BLOCK_SIZE = 1024

TWO_PI = 2.0 * math.pi


# --------------------------------------------------------------------------
# random streams
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RngSpec:
    """Seed for a family of reproducible per-path random streams."""

    seed: int

    def __post_init__(self):
        if isinstance(self.seed, bool) or not float(self.seed).is_integer():
            raise ParameterError(f"seed must be an integer, got {self.seed!r}")
        object.__setattr__(self, "seed", int(self.seed) % 2**64)

    def block_generator(self, block: int) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed, int(block)])))

    @classmethod
    def from_entropy(cls) -> "RngSpec":
        return cls(int(np.random.SeedSequence().generate_state(1, dtype=np.uint64)[0]))


def block_ranges(n: int) -> list[tuple[int, int, int]]:
    """Split path indices ``0..n-1`` into ``(block, start, stop)`` triples."""
    out = []
    for block in range((n + BLOCK_SIZE - 1) // BLOCK_SIZE):
        start = block * BLOCK_SIZE
        out.append((block, start, min(n, start + BLOCK_SIZE)))
    return out


def _locate(path_index: int) -> tuple[int, int]:
    if path_index < 0:
        raise ParameterError("path_index must be nonnegative")
    return divmod(int(path_index), BLOCK_SIZE)


# --------------------------------------------------------------------------
# waveforms
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PiecewiseLinearWaveform:
    """Periodic continuous function given by knots over one period.

    Values between consecutive knots are interpolated linearly; the last
    knot connects to the first knot shifted by one period.
    """

    period: float
    knots: tuple[tuple[float, float], ...]

    def __post_init__(self):
        period = float(self.period)
        if not (period > 0 and math.isfinite(period)):
            raise ParameterError(f"period must be positive and finite, got {self.period!r}")
        knots = tuple((float(t), float(v)) for t, v in self.knots)
        if len(knots) < 2:
            raise ParameterError("a waveform needs at least 2 knots")
        times = [t for t, _ in knots]
        if times[0] < 0 or times[-1] >= period:
            raise ParameterError("knot times must lie in [0, period)")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ParameterError("knot times must be strictly increasing")
        if not all(math.isfinite(v) for _, v in knots):
            raise ParameterError("knot values must be finite")
        object.__setattr__(self, "period", period)
        object.__setattr__(self, "knots", knots)

    @cached_property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.knots])

    @cached_property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.knots])

    @property
    def amplitude(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __call__(self, t):
        """Evaluate ``x(t)`` for scalar or array ``t``."""
        s = np.mod(np.asarray(t, dtype=float), self.period)
        out = np.interp(s, self.times, self.values, period=self.period)
        return float(out) if np.ndim(out) == 0 else out

    def local_max_times(self) -> np.ndarray:
        """Knot times that are strict local maxima of the periodic function."""
        v = self.values
        prev, nxt = np.roll(v, 1), np.roll(v, -1)
        return self.times[(v > prev) & (v > nxt)]

    def reversed(self) -> "PiecewiseLinearWaveform":
        """The waveform ``s -> x(-s)``."""
        pairs = sorted(((-t) % self.period, v) for t, v in self.knots)
        return PiecewiseLinearWaveform(self.period, tuple(pairs))

    def to_dict(self) -> dict:
        return {"period": self.period, "knots": [[t, v] for t, v in self.knots]}

    @classmethod
    def from_dict(cls, doc: dict) -> "PiecewiseLinearWaveform":
        try:
            return cls(float(doc["period"]), tuple((float(t), float(v)) for t, v in doc["knots"]))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ParameterError):
                raise
            raise ParameterError(f"malformed waveform document: {exc}") from exc

    def to_json(self) -> str:
        return _io.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PiecewiseLinearWaveform":
        import json

        return cls.from_dict(json.loads(text))


def eval_phase(w: PiecewiseLinearWaveform, u: float, t):
    """Value ``x(t + u)`` of the phase-shifted path."""
    return w(np.asarray(t, dtype=float) + float(u) % w.period)


def build_triangle(period: float) -> PiecewiseLinearWaveform:
    """Triangle wave with maximum 1 at 0 and minimum -1 at half period."""
    if not period > 0:
        raise ParameterError(f"period must be positive, got {period!r}")
    return PiecewiseLinearWaveform(period, ((0.0, 1.0), (period / 2.0, -1.0)))


@dataclass(frozen=True)
class SawtoothCombParams:
    """Parameters of the sawtooth comb.

    ``k`` descending peaks ``k, k-1, ..., 0`` at spacing ``tau``, separated
    by troughs of depth ``-R``; a final long trough of length ``2T`` climbs
    back to ``k``.  ``R`` defaults to ``100 * k``.
    """

    t: float
    T: float
    tau: float
    r: float
    k: int
    R: float | None = None

    def __post_init__(self):
        if self.R is None:
            object.__setattr__(self, "R", 100.0 * self.k)
        if int(self.k) != self.k or self.k < 1:
            raise ParameterError(f"k must be an integer >= 1, got {self.k!r}")
        object.__setattr__(self, "k", int(self.k))
        if not self.T > 0:
            raise ParameterError("T must be positive")
        if not 0 < self.t < self.r < self.tau:
            raise ParameterError(f"need 0 < t < r < tau, got t={self.t}, r={self.r}, tau={self.tau}")
        if not self.R > 0:
            raise ParameterError("R must be positive")


def build_sawtooth_comb(params: SawtoothCombParams) -> PiecewiseLinearWaveform:
    """Build the comb and verify that every peak beats the point ``r`` before it.

    Raises
    ------
    ConstructionError
        If ``x(i tau) <= x(i tau - r)`` for some ``i`` (``R`` too small).
    """
    k, tau, T, R = params.k, params.tau, params.T, params.R
    knots = []
    for i in range(k):
        knots.append((i * tau, float(k - i)))
        knots.append(((i + 0.5) * tau, -R))
    knots.append((k * tau, 0.0))
    knots.append((k * tau + T, -R))
    w = PiecewiseLinearWaveform(k * tau + 2.0 * T, tuple(knots))
    i = np.arange(1, k + 1)
    peak = w(i * tau)
    before = w(i * tau - params.r)
    bad = np.flatnonzero(~(peak > before))
    if bad.size:
        j = int(i[bad[0]])
        raise ConstructionError(
            f"peak condition fails at i={j}: x({j}*tau)={peak[bad[0]]:g} <= x({j}*tau-r)={before[bad[0]]:g}; increase R"
        )
    return w


@dataclass(frozen=True)
class PhaseShiftModel:
    """``X(t) = x(t + U)`` with ``U`` uniform on ``[0, period)``."""

    waveform: PiecewiseLinearWaveform

    def sample_phases(self, rng: RngSpec, block: int) -> np.ndarray:
        return rng.block_generator(block).random(BLOCK_SIZE) * self.waveform.period

    def sample_phase(self, rng: RngSpec, path_index: int) -> float:
        block, offset = _locate(path_index)
        return float(self.sample_phases(rng, block)[offset])


# --------------------------------------------------------------------------
# two-wave Gaussian model
# --------------------------------------------------------------------------


def rational_common_period(period1: float, period2: float, max_denominator: int = 10**6) -> float | None:
    """Common period of two periods whose ratio is exactly rational in floating point.

    The ratio counts as rational when a fraction ``p/q`` with ``q <=
    max_denominator`` reproduces it to within a few ulps.  Returns ``None``
    for ratios that are not (numerically) rational.
    """
    ratio = period2 / period1
    frac = Fraction(ratio).limit_denominator(max_denominator)
    if abs(ratio - frac.numerator / frac.denominator) <= 8 * math.ulp(ratio):
        # period2 / period1 = p / q  =>  q * period2 = p * period1
        return frac.denominator * period2
    return None


@dataclass(frozen=True)
class TwoWaveCoefficients:
    """Amplitudes and phases of one two-wave path (scalars or arrays)."""

    A1: np.ndarray | float
    U1: np.ndarray | float
    A2: np.ndarray | float
    U2: np.ndarray | float

    def as_tuple(self):
        return (self.A1, self.U1, self.A2, self.U2)


@dataclass(frozen=True)
class TwoWaveGaussianModel:
    """``X(s) = A1 cos(2 pi s / p1 + U1) + c A2 cos(2 pi s / p2 + U2)``.

    ``A1, A2`` are Rayleigh(1) and ``U1, U2`` uniform on ``[0, 2 pi)``,
    equivalently four i.i.d. standard normal coefficients of the cosine and
    sine terms.  ``form`` selects which representation is sampled.

    A rational period ratio creates exact ties between maxima one common
    period apart.  Such ratios are rejected unless ``window`` is given and
    the common period exceeds it, in which case no window of that length
    sees a repeat.
    """

    period1: float
    period2: float
    amp2_scale: float = 1.0
    form: str = "gaussian"
    window: float | None = None
    common_period: float | None = field(default=None, init=False)

    def __post_init__(self):
        if not (self.period1 > 0 and self.period2 > 0):
            raise ParameterError("periods must be positive")
        if not self.amp2_scale >= 0:
            raise ParameterError("amp2_scale must be nonnegative")
        if self.form not in ("gaussian", "amplitude-phase"):
            raise ParameterError(f"unknown coefficient form {self.form!r}")
        common = rational_common_period(self.period1, self.period2)
        object.__setattr__(self, "common_period", common)
        if common is not None and self.amp2_scale > 0:
            if self.window is None or common <= self.window:
                raise ParameterError(
                    f"periods {self.period1} and {self.period2} are rationally dependent "
                    f"(common period {common:g}); supremum would not be unique"
                )

    @property
    def omega1(self) -> float:
        return TWO_PI / self.period1

    @property
    def omega2(self) -> float:
        return TWO_PI / self.period2

    @property
    def variance(self) -> float:
        return 1.0 + self.amp2_scale**2

    def draw_block(self, rng: RngSpec, block: int) -> TwoWaveCoefficients:
        gen = rng.block_generator(block)
        if self.form == "gaussian":
            G = gen.standard_normal((BLOCK_SIZE, 4))
            return gaussian_to_amplitude_phase(G)
        A1 = gen.rayleigh(1.0, BLOCK_SIZE)
        U1 = gen.uniform(0.0, TWO_PI, BLOCK_SIZE)
        A2 = gen.rayleigh(1.0, BLOCK_SIZE)
        U2 = gen.uniform(0.0, TWO_PI, BLOCK_SIZE)
        return TwoWaveCoefficients(A1, U1, A2, U2)

    def gaussian_coefficients(self, c: TwoWaveCoefficients) -> np.ndarray:
        """Columns ``(G1, G2, G3, G4)`` multiplying ``cos, sin`` of each wave."""
        return np.stack(
            [
                c.A1 * np.cos(c.U1),
                -c.A1 * np.sin(c.U1),
                c.A2 * np.cos(c.U2),
                -c.A2 * np.sin(c.U2),
            ],
            axis=-1,
        )

    def basis(self, s: np.ndarray) -> np.ndarray:
        """Rows ``cos(w1 s), sin(w1 s), c cos(w2 s), c sin(w2 s)``."""
        s = np.asarray(s, dtype=float)
        c = self.amp2_scale
        return np.stack(
            [np.cos(self.omega1 * s), np.sin(self.omega1 * s), c * np.cos(self.omega2 * s), c * np.sin(self.omega2 * s)]
        )

    def value(self, c: TwoWaveCoefficients, s):
        return c.A1 * np.cos(self.omega1 * s + c.U1) + self.amp2_scale * c.A2 * np.cos(self.omega2 * s + c.U2)

    def derivative(self, c: TwoWaveCoefficients, s):
        return -c.A1 * self.omega1 * np.sin(self.omega1 * s + c.U1) - self.amp2_scale * c.A2 * self.omega2 * np.sin(
            self.omega2 * s + c.U2
        )

    def curvature_bound(self, c: TwoWaveCoefficients):
        """Upper bound on ``|X''|`` along the whole path."""
        return c.A1 * self.omega1**2 + self.amp2_scale * c.A2 * self.omega2**2


def gaussian_to_amplitude_phase(G: np.ndarray) -> TwoWaveCoefficients:
    """Map ``G1 cos + G2 sin`` pairs to ``A cos(. + U)`` form."""
    G = np.asarray(G, dtype=float)
    A1 = np.hypot(G[..., 0], G[..., 1])
    U1 = np.mod(np.arctan2(-G[..., 1], G[..., 0]), TWO_PI)
    A2 = np.hypot(G[..., 2], G[..., 3])
    U2 = np.mod(np.arctan2(-G[..., 3], G[..., 2]), TWO_PI)
    return TwoWaveCoefficients(A1, U1, A2, U2)


def sample_two_wave(model: TwoWaveGaussianModel, rng: RngSpec, path_index: int) -> TwoWaveCoefficients:
    """Coefficients ``(A1, U1, A2, U2)`` of one path."""
    block, offset = _locate(path_index)
    c = model.draw_block(rng, block)
    return TwoWaveCoefficients(*(float(np.asarray(x)[offset]) for x in c.as_tuple()))


# --------------------------------------------------------------------------
# Ornstein-Uhlenbeck
# --------------------------------------------------------------------------


def ou_grid(T: float, grid_step: float) -> np.ndarray:
    if not grid_step > 0:
        raise ParameterError(f"grid_step must be positive, got {grid_step!r}")
    if not T > 0:
        raise ParameterError("T must be positive")
    m = int(round(T / grid_step))
    if m < 1 or abs(m * grid_step - T) > 1e-9 * max(T, 1.0):
        raise ParameterError(f"grid_step {grid_step} does not divide T={T}")
    return np.linspace(0.0, T, m + 1)


@dataclass(frozen=True)
class OrnsteinUhlenbeckModel:
    """Stationary OU process ``exp(-t/2) B(exp(t))`` on a uniform grid."""

    grid_step: float = 1e-3

    def __post_init__(self):
        if not self.grid_step > 0:
            raise ParameterError(f"grid_step must be positive, got {self.grid_step!r}")

    def simulate_block(self, T: float, rng: RngSpec, block: int, rows: int = BLOCK_SIZE, chunk: int = 128) -> Iterable[tuple[int, np.ndarray]]:
        """Yield ``(row_offset, values)`` chunks for the first ``rows`` paths of a block.

        ``B(1)`` is drawn for the whole block before any increment, so the
        value at ``t = 0`` does not depend on the grid.
        """
        times = ou_grid(T, self.grid_step)
        gen = rng.block_generator(block)
        b1 = gen.standard_normal(BLOCK_SIZE)
        et = np.exp(times)
        sd = np.sqrt(np.diff(et))
        scale = np.exp(-times / 2.0)
        for start in range(0, rows, chunk):
            stop = min(rows, start + chunk)
            z = gen.standard_normal((stop - start, times.size - 1))
            z *= sd
            path = np.empty((stop - start, times.size))
            path[:, 0] = b1[start:stop]
            np.cumsum(z, axis=1, out=path[:, 1:])
            path[:, 1:] += b1[start:stop, None]
            path *= scale
            yield start, path


def simulate_ou(T: float, grid_step: float, rng: RngSpec, path_index: int) -> tuple[np.ndarray, np.ndarray]:
    """Grid times and values of one OU path on ``[0, T]``."""
    times = ou_grid(T, grid_step)
    block, offset = _locate(path_index)
    model = OrnsteinUhlenbeckModel(grid_step)
    chunk = 128
    want = (offset // chunk) * chunk
    for start, path in model.simulate_block(T, rng, block, rows=offset + 1, chunk=chunk):
        if start == want:
            return times, path[offset - start].copy()
    raise AssertionError("unreachable")


def model_label(model) -> str:
    if isinstance(model, PhaseShiftModel):
        return "phase"
    if isinstance(model, TwoWaveGaussianModel):
        return "twowave"
    if isinstance(model, OrnsteinUhlenbeckModel):
        return "ou"
    raise ParameterError(f"unknown model {model!r}")


def waveform_from_knots(period: float, knots: Sequence[Sequence[float]]) -> PiecewiseLinearWaveform:
    return PiecewiseLinearWaveform(period, tuple((float(t), float(v)) for t, v in knots))
