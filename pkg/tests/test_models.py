import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from suploc import (
    ConstructionError,
    OrnsteinUhlenbeckModel,
    ParameterError,
    PhaseShiftModel,
    PiecewiseLinearWaveform,
    RngSpec,
    SawtoothCombParams,
    TwoWaveGaussianModel,
    build_sawtooth_comb,
    build_triangle,
    eval_phase,
    sample_two_wave,
    simulate_ou,
)
from suploc.models import BLOCK_SIZE, block_ranges, gaussian_to_amplitude_phase, ou_grid, rational_common_period


# --- waveforms -------------------------------------------------------------


def test_triangle_values_period_1():
    w = build_triangle(1.0)
    assert [float(w(t)) for t in (0.0, 0.25, 0.5, 0.75, 1.0)] == [1.0, 0.0, -1.0, 0.0, 1.0]


def test_triangle_period_2():
    w = build_triangle(2.0)
    assert float(w(0.5)) == 0.0
    assert float(w(1.0)) == -1.0


def test_triangle_rejects_nonpositive_period():
    with pytest.raises(ParameterError):
        build_triangle(0.0)
    with pytest.raises(ParameterError):
        build_triangle(-1.0)


@pytest.mark.parametrize(
    "knots",
    [
        ((0.0, 1.0),),  # too few
        ((0.0, 1.0), (0.0, 2.0)),  # not increasing
        ((0.0, 1.0), (1.0, 2.0)),  # outside [0, period)
        ((-0.1, 1.0), (0.5, 2.0)),
        ((0.0, 1.0), (0.5, float("nan"))),
    ],
)
def test_waveform_validation(knots):
    with pytest.raises(ParameterError):
        PiecewiseLinearWaveform(1.0, knots)


def test_waveform_wrap_segment():
    w = PiecewiseLinearWaveform(4.0, ((1.0, 0.0), (2.0, 2.0)))
    # wrap from (2, 2) to (1 + 4, 0): value at 3.5 is halfway
    assert float(w(3.5)) == pytest.approx(1.0)
    assert float(w(0.0)) == pytest.approx(2.0 / 3.0)


@given(
    t=st.floats(-1e3, 1e3, allow_nan=False),
    period=st.sampled_from([1.0, 2.0, 0.55, 216.0]),
)
def test_waveform_periodicity(t, period):
    w = build_triangle(period)
    assert abs(float(w(t)) - float(w(t + period))) <= 1e-12 * max(1.0, abs(t) / period)


def test_waveform_json_roundtrip():
    w = build_sawtooth_comb(SawtoothCombParams(t=1.0, T=2.0, tau=1.5, r=1.2, k=5, R=500.0))
    back = PiecewiseLinearWaveform.from_json(w.to_json())
    assert back == w
    assert '"period"' in w.to_json() and '"knots"' in w.to_json()


def test_reversed_waveform():
    w = build_sawtooth_comb(SawtoothCombParams(t=1.0, T=2.0, tau=1.5, r=1.2, k=5, R=500.0))
    r = w.reversed()
    t = np.linspace(-3, 20, 997)
    np.testing.assert_allclose(r(t), w(-t), atol=1e-9)


# --- sawtooth comb ---------------------------------------------------------


def test_sawtooth_k1_knots():
    w = build_sawtooth_comb(SawtoothCombParams(t=0.5, T=3.0, tau=2.0, r=0.6, k=1, R=10.0))
    assert w.period == 8.0
    assert [tuple(k) for k in w.knots] == [(0.0, 1.0), (1.0, -10.0), (2.0, 0.0), (5.0, -10.0)]


def test_sawtooth_k2_validator():
    w = build_sawtooth_comb(SawtoothCombParams(t=0.3, T=1.0, tau=1.0, r=0.4, k=2, R=1.0))
    assert float(w(1.0)) > float(w(0.6))


def test_sawtooth_k200_validator_passes():
    p = SawtoothCombParams(t=1.0, T=3.0, tau=1.05, r=1.02, k=200)
    assert p.R == 100 * 200
    w = build_sawtooth_comb(p)
    i = np.arange(1, 201)
    assert np.all(w(i * p.tau) > w(i * p.tau - p.r))
    assert float(w(w.period)) == float(w(0.0)) == 200.0


def test_sawtooth_construction_error_names_index():
    # with r close to tau, x(i tau - r) climbs towards the previous peak k-i+1
    p = SawtoothCombParams(t=0.5, T=1.0, tau=1.0, r=0.99, k=3, R=1.0)
    with pytest.raises(ConstructionError, match="i=1"):
        build_sawtooth_comb(p)


@pytest.mark.parametrize(
    "kw",
    [
        dict(t=1.0, T=2.0, tau=1.5, r=0.9, k=5),  # r < t
        dict(t=1.0, T=2.0, tau=1.1, r=1.2, k=5),  # r > tau
        dict(t=1.0, T=2.0, tau=1.5, r=1.2, k=0),
        dict(t=1.0, T=2.0, tau=1.5, r=1.2, k=2.5),
        dict(t=1.0, T=2.0, tau=1.5, r=1.2, k=5, R=-1.0),
        dict(t=1.0, T=0.0, tau=1.5, r=1.2, k=5),
    ],
)
def test_sawtooth_params_validation(kw):
    with pytest.raises(ParameterError):
        SawtoothCombParams(**kw)


def test_eval_phase_examples():
    tri = build_triangle(1.0)
    assert eval_phase(tri, 0.0, 0.0) == 1.0
    assert eval_phase(tri, 0.5, 0.5) == 1.0
    saw = build_sawtooth_comb(SawtoothCombParams(t=0.5, T=3.0, tau=2.0, r=0.6, k=1, R=10.0))
    # linear interpolation oracle between (0, 1) and (1, -10)
    assert eval_phase(saw, 0.0, 0.5) == pytest.approx(1 + (-10 - 1) * 0.5)


# --- RNG streams -----------------------------------------------------------


def test_block_ranges_cover():
    n = 3 * BLOCK_SIZE + 17
    ranges = block_ranges(n)
    assert ranges[0][1] == 0 and ranges[-1][2] == n
    assert all(a[2] == b[1] for a, b in zip(ranges, ranges[1:]))
    assert [r[0] for r in ranges] == list(range(len(ranges)))


def test_phase_sample_is_pure_function_of_seed_and_index():
    m = PhaseShiftModel(build_triangle(1.0))
    rng = RngSpec(7)
    block = m.sample_phases(rng, 1)
    assert m.sample_phase(rng, BLOCK_SIZE + 5) == block[5]
    assert m.sample_phase(RngSpec(7), 3) == m.sample_phase(RngSpec(7), 3)
    assert m.sample_phase(RngSpec(8), 3) != m.sample_phase(RngSpec(7), 3)
    assert np.all((block >= 0) & (block < 1.0))


def test_seed_must_be_integer():
    with pytest.raises(ParameterError):
        RngSpec(1.5)


# --- two-wave model --------------------------------------------------------


def test_rational_common_period():
    assert rational_common_period(0.55, 100.0) == pytest.approx(1100.0)
    assert rational_common_period(1.0, 2.0) == pytest.approx(2.0)
    assert rational_common_period(1.85, math.sqrt(2.0)) is None
    assert rational_common_period(1.0, math.pi) is None


def test_two_wave_rejects_rational_ratio():
    with pytest.raises(ParameterError):
        TwoWaveGaussianModel(1.0, 2.0)
    with pytest.raises(ParameterError):
        TwoWaveGaussianModel(0.55, 100.0, window=3000.0)
    TwoWaveGaussianModel(0.55, 100.0, window=3.0)
    TwoWaveGaussianModel(1.85, math.sqrt(2.0), 1e-3)
    TwoWaveGaussianModel(1.0, 2.0, 0.0)


@pytest.mark.parametrize("kw", [dict(period1=0.0, period2=1.5), dict(period1=1.0, period2=math.pi, amp2_scale=-1.0), dict(period1=1.0, period2=math.pi, form="other")])
def test_two_wave_parameter_errors(kw):
    with pytest.raises(ParameterError):
        TwoWaveGaussianModel(**kw)


def test_two_wave_draws_rayleigh_and_deterministic():
    m = TwoWaveGaussianModel(0.55, 100.0, form="amplitude-phase", window=3.0)
    a = sample_two_wave(m, RngSpec(7), 3)
    b = sample_two_wave(m, RngSpec(7), 3)
    assert a == b
    assert a.A1 > 0 and a.A2 > 0
    assert 0 <= a.U1 < 2 * math.pi and 0 <= a.U2 < 2 * math.pi


def test_two_wave_mean_A1_squared():
    m = TwoWaveGaussianModel(0.55, 100.0, form="amplitude-phase", window=3.0)
    rng = RngSpec(11)
    A1 = np.concatenate([m.draw_block(rng, b).A1[: e - s] for b, s, e in block_ranges(100_000)])
    x = A1**2
    se = x.std() / math.sqrt(x.size)
    assert abs(x.mean() - 2.0) < 4 * se


def test_gaussian_to_amplitude_phase_roundtrip():
    G = np.random.default_rng(3).standard_normal((50, 4))
    c = gaussian_to_amplitude_phase(G)
    m = TwoWaveGaussianModel(1.0, math.pi)
    np.testing.assert_allclose(m.gaussian_coefficients(c), G, atol=1e-12)


def _paths(m, c, s):
    return m.gaussian_coefficients(c) @ m.basis(np.asarray(s, dtype=float))


@pytest.mark.parametrize("form", ["gaussian", "amplitude-phase"])
def test_two_wave_stationarity(form):
    m = TwoWaveGaussianModel(1.0, math.pi, 0.7, form)
    rng = RngSpec(5)
    c = m.draw_block(rng, 0)
    for blk in range(1, 10):
        d = m.draw_block(rng, blk)
        c = type(c)(*(np.concatenate([x, y]) for x, y in zip(c.as_tuple(), d.as_tuple())))
    sd = math.sqrt(1 + 0.7**2)
    assert m.variance == pytest.approx(1 + 0.7**2)
    for s in (0.0, 0.37, 2.9):
        x = _paths(m, c, [s])[:, 0]
        assert stats.kstest(x / sd, "norm").pvalue > 0.01


def test_two_wave_forms_agree_in_moments():
    out = {}
    for form in ("gaussian", "amplitude-phase"):
        m = TwoWaveGaussianModel(1.0, math.pi, 1.0, form)
        rng = RngSpec(17 if form == "gaussian" else 18)
        xs = []
        for b, s, e in block_ranges(40_000):
            xs.append(_paths(m, m.draw_block(rng, b), [0.0, 0.4])[: e - s])
        X = np.concatenate(xs)
        out[form] = (X.var(axis=0), np.corrcoef(X.T)[0, 1])
    (va, ca), (vb, cb) = out.values()
    np.testing.assert_allclose(va, vb, atol=0.06)
    assert abs(ca - cb) < 0.03


def test_two_wave_derivative_matches_finite_difference():
    m = TwoWaveGaussianModel(0.55, 100.0, window=3.0)
    c = m.draw_block(RngSpec(1), 0)
    s = np.linspace(0, 3, 31)
    h = 1e-6
    for i in range(5):
        ci = type(c)(*(x[i] for x in c.as_tuple()))
        fd = (m.value(ci, s + h) - m.value(ci, s - h)) / (2 * h)
        np.testing.assert_allclose(m.derivative(ci, s), fd, atol=1e-4)
        np.testing.assert_allclose(m.value(ci, s), _paths(m, c, s)[i], atol=1e-12)


# --- Ornstein-Uhlenbeck ----------------------------------------------------


def test_ou_grid():
    g = ou_grid(1.0, 1e-2)
    assert g.size == 101 and g[0] == 0.0 and g[-1] == 1.0
    with pytest.raises(ParameterError):
        ou_grid(1.0, 0.3)
    with pytest.raises(ParameterError):
        OrnsteinUhlenbeckModel(0.0)


def _ou_paths(n, step, seed=3, T=1.0):
    m = OrnsteinUhlenbeckModel(step)
    rng = RngSpec(seed)
    out = []
    for block, s, e in block_ranges(n):
        for _, path in m.simulate_block(T, rng, block, rows=e - s):
            out.append(path)
    return np.concatenate(out)


def test_ou_variance_and_correlation():
    X = _ou_paths(100_000, 0.1)
    n = X.shape[0]
    v0 = X[:, 0].var()
    assert abs(v0 - 1.0) < 4 * math.sqrt(2.0 / n)
    assert np.all(np.abs(X.var(axis=0) - 1.0) < 4 * math.sqrt(2.0 / n))
    rho = np.corrcoef(X[:, 0], X[:, -1])[0, 1]
    se = (1 - math.exp(-1.0)) / math.sqrt(n)
    assert abs(rho - math.exp(-0.5)) < 4 * se


def test_ou_start_value_independent_of_grid():
    a = _ou_paths(50, 1e-2)[:, 0]
    b = _ou_paths(50, 1e-3)[:, 0]
    np.testing.assert_array_equal(a, b)


def test_simulate_ou_matches_block():
    t, x = simulate_ou(1.0, 1e-2, RngSpec(3), BLOCK_SIZE + 2)
    X = _ou_paths(BLOCK_SIZE + 3, 1e-2)
    assert t.size == 101
    np.testing.assert_array_equal(x, X[BLOCK_SIZE + 2])


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**63), idx=st.integers(0, 3 * BLOCK_SIZE))
def test_ou_path_deterministic(seed, idx):
    a = simulate_ou(0.5, 0.05, RngSpec(seed), idx)[1]
    b = simulate_ou(0.5, 0.05, RngSpec(seed), idx)[1]
    np.testing.assert_array_equal(a, b)
