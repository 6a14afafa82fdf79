import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from suploc import (
    DataError,
    DensityEstimate,
    OrnsteinUhlenbeckModel,
    ParameterError,
    PhaseShiftModel,
    RngSpec,
    SawtoothCombParams,
    TwoWaveGaussianModel,
    build_sawtooth_comb,
    build_triangle,
    clopper_pearson,
    exact_tau_law_phase,
    histogram,
    ks_uniform,
    mc_tau_sample,
)
from suploc.estimate import Bin, local_density
from suploc.theory import law_bin_masses

# Frozen by root-finding on the binomial tails (scipy.stats.binom), not Beta quantiles.
CP_5_10_95 = (0.18708602844740443, 0.8129139715525956)


# --- Clopper-Pearson -------------------------------------------------------


def test_clopper_pearson_examples():
    assert clopper_pearson(0, 17, 0.9)[0] == 0.0
    assert clopper_pearson(17, 17, 0.9)[1] == 1.0
    lo, hi = clopper_pearson(5, 10, 0.95)
    assert lo == pytest.approx(CP_5_10_95[0], abs=1e-9)
    assert hi == pytest.approx(CP_5_10_95[1], abs=1e-9)


def test_clopper_pearson_vectorised():
    lo, hi = clopper_pearson(np.array([0, 5, 10]), 10, 0.95)
    assert lo[0] == 0.0 and hi[2] == 1.0
    assert lo[1] == pytest.approx(CP_5_10_95[0], abs=1e-9)


@pytest.mark.parametrize("args", [(-1, 10, 0.9), (11, 10, 0.9), (5, 10, 1.0), (5, 10, 0.0)])
def test_clopper_pearson_errors(args):
    with pytest.raises(ParameterError):
        clopper_pearson(*args)


@settings(max_examples=100)
@given(n=st.integers(1, 10_000), frac=st.floats(0, 1), level=st.floats(0.5, 0.999))
def test_clopper_pearson_brackets_estimate(n, frac, level):
    k = int(round(frac * n))
    lo, hi = clopper_pearson(k, n, level)
    assert 0.0 <= lo <= k / n <= hi <= 1.0


# --- KS --------------------------------------------------------------------


def test_ks_examples():
    assert ks_uniform(np.full(100, 1.0), 2.0).statistic == pytest.approx(0.5)
    n = 250
    grid = 2.0 * (np.arange(1, n + 1) - 0.5) / n
    assert ks_uniform(grid, 2.0).statistic == pytest.approx(0.5 / n)


def test_ks_matches_direct_ecdf_formula():
    x = np.sort(np.random.default_rng(0).uniform(0, 3.0, 500))
    n = x.size
    F = x / 3.0
    d = max(np.max(np.arange(1, n + 1) / n - F), np.max(F - np.arange(n) / n))
    assert ks_uniform(x, 3.0).statistic == pytest.approx(d, abs=1e-15)


def test_ks_critical_value_scale():
    # asymptotic 1% Kolmogorov quantile is 1.6276
    res = ks_uniform(np.linspace(0.001, 0.999, 10_000), 1.0)
    assert res.critical * math.sqrt(10_000) == pytest.approx(1.6276, abs=1e-3)
    with pytest.raises(DataError):
        ks_uniform([], 1.0)


# --- sampling --------------------------------------------------------------


def test_triangle_period_1_taus_in_first_unit():
    s = mc_tau_sample(PhaseShiftModel(build_triangle(1.0)), 2.0, 10_000, RngSpec(1))
    assert len(s) == 10_000
    assert np.all((s.tau > 0) & (s.tau < 1))
    assert not s.at_left.any() and not s.at_right.any()
    assert s.near_tie.all()


def test_triangle_period_T_uniform():
    s = mc_tau_sample(PhaseShiftModel(build_triangle(2.0)), 2.0, 10_000, RngSpec(2))
    assert ks_uniform(s, 2.0).passed


def test_sample_indexing():
    s = mc_tau_sample(PhaseShiftModel(build_triangle(2.0)), 2.0, 10, RngSpec(2))
    locs = list(s)
    assert len(locs) == 10 and locs[3] == s[3] and locs[3].tau == s.tau[3]


MODELS = {
    "phase": (PhaseShiftModel(build_triangle(2.0)), 2.0, 5000),
    "twowave": (TwoWaveGaussianModel(0.55, 100.0, window=3.0), 3.0, 3000),
    "ou": (OrnsteinUhlenbeckModel(1e-2), 1.0, 3000),
}


@pytest.mark.parametrize("kind", sorted(MODELS))
def test_sampling_deterministic_and_thread_independent(kind):
    model, T, n = MODELS[kind]
    a = mc_tau_sample(model, T, n, RngSpec(99))
    b = mc_tau_sample(model, T, n, RngSpec(99), threads=4)
    c = mc_tau_sample(model, T, n, RngSpec(100))
    np.testing.assert_array_equal(a.tau, b.tau)
    np.testing.assert_array_equal(a.value, b.value)
    assert not np.array_equal(a.tau, c.tau)


def test_prefix_stability():
    # a path depends on (seed, index) only: a longer run extends a shorter one
    model = PhaseShiftModel(build_triangle(2.0))
    a = mc_tau_sample(model, 2.0, 1500, RngSpec(5))
    b = mc_tau_sample(model, 2.0, 3000, RngSpec(5))
    np.testing.assert_array_equal(a.tau, b.tau[:1500])


def test_sampling_errors():
    with pytest.raises(ParameterError):
        mc_tau_sample(PhaseShiftModel(build_triangle(2.0)), 2.0, 0, RngSpec(1))
    with pytest.raises(ParameterError):
        mc_tau_sample(PhaseShiftModel(build_triangle(2.0)), -1.0, 10, RngSpec(1))
    with pytest.raises(ParameterError):
        mc_tau_sample(TwoWaveGaussianModel(0.55, 100.0, window=3.0), 2000.0, 10, RngSpec(1))


def test_ou_endpoint_flags():
    s = mc_tau_sample(OrnsteinUhlenbeckModel(1e-2), 1.0, 2000, RngSpec(3))
    np.testing.assert_array_equal(s.at_left, s.tau == 0.0)
    np.testing.assert_array_equal(s.at_right, s.tau == 1.0)
    assert s.grid_step == 1e-2


# --- histogram -------------------------------------------------------------


def test_histogram_example():
    est = histogram([0.0, 2.0, 1.0], 2.0, 2)
    assert (est.atom_left, est.atom_right) == (1, 1)
    assert list(est.counts) == [0, 1]


def test_histogram_errors():
    with pytest.raises(DataError):
        histogram([], 1.0, 4)
    with pytest.raises(DataError):
        histogram([0.5, 1.5], 1.0, 4)
    with pytest.raises(DataError):
        histogram([-0.1], 1.0, 4)
    with pytest.raises(ParameterError):
        histogram([0.5], 1.0, 0)


def test_histogram_atom_tolerance():
    est = histogram([0.004, 0.5, 0.996], 1.0, 4, atom_tol=0.005)
    assert (est.atom_left, est.atom_right) == (1, 1)


def test_histogram_triangle_period_1():
    s = mc_tau_sample(PhaseShiftModel(build_triangle(1.0)), 2.0, 100_000, RngSpec(4))
    est = histogram(s, 2.0, 40)
    inner = [b for b in est.bins if b.hi <= 1.0]
    assert len(inner) == 20
    # 20 bins at 99% each: three or more misses has probability ~1e-3
    misses = sum(not (b.ci_lo <= 0.05 <= b.ci_hi) for b in inner)
    assert misses <= 2
    assert all(b.count == 0 for b in est.bins if b.lo >= 1.0)


@settings(max_examples=50, deadline=None)
@given(
    taus=st.lists(st.floats(0, 3.0), min_size=1, max_size=200),
    bins=st.integers(1, 30),
    atom_tol=st.sampled_from([0.0, 0.01]),
)
def test_histogram_invariants(taus, bins, atom_tol):
    est = histogram(taus, 3.0, bins, atom_tol)
    assert est.atom_left + est.atom_right + est.counts.sum() == len(taus)
    edges = est.edges
    assert edges[0] == 0.0 and edges[-1] == 3.0 and np.all(np.diff(edges) > 0)
    for b in est.bins:
        assert 0.0 <= b.ci_lo <= b.p_hat <= b.ci_hi <= 1.0


def test_density_estimate_mass_conservation():
    b = Bin(0.0, 1.0, 3, 0.3, 0.1, 0.6)
    with pytest.raises(DataError):
        DensityEstimate(1.0, 10, 1, 1, (b,), 0.99)


def test_density_estimate_roundtrip_and_csv(tmp_path):
    s = mc_tau_sample(OrnsteinUhlenbeckModel(1e-2), 1.0, 3000, RngSpec(3))
    est = histogram(s, 1.0, 10, atom_tol=0.005)
    est.write(tmp_path / "e.json", tmp_path / "e.csv")
    back = DensityEstimate.from_dict(json.loads((tmp_path / "e.json").read_text()))
    assert back == est
    rows = list(csv.reader(open(tmp_path / "e.csv", newline="")))
    assert rows[0] == ["kind", "lo", "hi", "count", "p_hat", "ci_lo", "ci_hi"]
    assert len(rows) == 1 + 10 + 2
    assert rows[1][0] == "atom_left" and rows[-1][0] == "atom_right"
    assert int(rows[1][3]) == est.atom_left


def test_density_estimate_from_dict_malformed():
    with pytest.raises(DataError):
        DensityEstimate.from_dict({"T": 1.0})


def test_mass_interval():
    est = histogram([0.0, 0.1, 0.3, 0.6, 0.9, 1.0], 1.0, 4)
    p, lo, hi = est.mass_interval(0.0, 0.5)
    assert p == pytest.approx(3 / 6)  # atom at 0 plus two interior
    assert est.mass_interval(0.0, 1.0)[0] == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        est.mass_interval(0.1, 0.5)


def test_local_density():
    d, lo, hi = local_density(np.linspace(0, 1, 1001)[:-1], 0.2, 0.3)
    assert d == pytest.approx(1.0)
    assert lo < d < hi


# --- statistical properties -----------------------------------------------


def test_ci_coverage():
    # uniform law on (0, 2): each of 10 bins has mass 0.1
    model = PhaseShiftModel(build_triangle(2.0))
    covered = np.zeros(10)
    runs = 200
    for run in range(runs):
        est = histogram(mc_tau_sample(model, 2.0, 500, RngSpec(1000 + run)), 2.0, 10)
        covered += [b.ci_lo <= 0.1 <= b.ci_hi for b in est.bins]
    assert np.all(covered / runs >= 0.99 - 0.03)


def test_estimator_consistency():
    w = build_sawtooth_comb(SawtoothCombParams(t=1.0, T=2.0, tau=1.5, r=1.2, k=5, R=500.0))
    law = exact_tau_law_phase(w, 2.0)
    edges = np.linspace(0, 2, 41)
    truth = law_bin_masses(law, edges)
    errors = []
    for n in (1_000, 10_000, 100_000):
        est = histogram(mc_tau_sample(PhaseShiftModel(w), 2.0, n, RngSpec(77)), 2.0, 40)
        errors.append(np.max(np.abs(est.counts / n - truth)))
    assert errors[0] > errors[1] > errors[2]
