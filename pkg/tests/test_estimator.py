import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from sspickands.errors import DivergenceError, ParameterError
from sspickands.estimator import (
    b2_functional_quadrature,
    convergence_report,
    discretization_exponents,
    estimate_functional,
    estimate_levels,
    estimate_pickands_curve,
    estimate_refined,
    exact_b2_functional,
    functional_from_batch,
    functional_from_paths,
    richardson_weights,
    summarize,
    sup_log_terms,
)
from sspickands.processes import ProcessSpec, variance
from sspickands.sampler import build_grid, grid_from_density, sample_paths

H_B2_1 = (1 + math.sqrt(2)) / 2


def spitzer_discrete_bm(R, delta, n):
    """``E exp(max_{0<=k<=n} sqrt(2) B(k delta) - (1+R) k delta)`` from
    Spitzer's identity for the random walk ``S`` with N(-(1+R) delta,
    2 delta) steps:

        sum_n z**n E e^{M_n} = exp(sum_k z**k E[e^{S_k^+}] / k),

    the coefficients being read off by the recurrence for exp of a series.
    """
    c = np.zeros(n + 1)
    for k in range(1, n + 1):
        m = -(1 + R) * k * delta
        v = 2 * k * delta
        sd = math.sqrt(v)
        c[k] = (math.exp(m + v / 2) * norm.cdf((m + v) / sd) + norm.cdf(-m / sd)) / k
    f = np.zeros(n + 1)
    f[0] = 1.0
    for j in range(1, n + 1):
        f[j] = sum(k * c[k] * f[j - k] for k in range(1, j + 1)) / j
    return float(f[n])


def test_grid_at_zero_only_gives_one():
    est = functional_from_paths(np.zeros((10, 1)), np.zeros(1), R=0.0)
    assert est.value == 1.0 and est.stderr == 0.0


def test_small_horizon_tends_to_one():
    est = estimate_functional(ProcessSpec.dual(1.0), 0.0, 1e-4, grid_n=5, n_paths=2000, seed=1)
    assert 1.0 <= est.value < 1.03


def test_terms_at_least_one():
    b = sample_paths(ProcessSpec.subfractional(0.6), build_grid(5.0, 41), 3000, seed=2)
    for R in (0.0, 1.0, 5.0):
        assert np.all(sup_log_terms(b.values, variance(b.spec, b.grid.points), R) >= 0)
        assert functional_from_batch(b, R).value >= 1.0


def test_log_domain_accumulation():
    lt = np.array([800.0, 801.0, 799.5])
    est = summarize(lt, 1.0, 0.0, 2)
    assert math.isinf(est.value) or est.value > 1e300
    assert est.log_mean == pytest.approx(800 + math.log(np.mean(np.exp(lt - 800))))


def test_exact_b2_examples():
    assert exact_b2_functional(1.0, 200.0) == pytest.approx(H_B2_1, abs=1e-12)
    assert exact_b2_functional(1.0, math.inf) == pytest.approx(H_B2_1, abs=1e-14)
    assert exact_b2_functional(0.7, 1e-9) == pytest.approx(1.0, abs=1e-8)
    v = exact_b2_functional(1.0, 0.5)
    assert 1.0 < v < H_B2_1
    Ts = [0.1, 0.5, 1.0, 2.0, 5.0]
    vals = [exact_b2_functional(1.0, T) for T in Ts]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    with pytest.raises(DivergenceError):
        exact_b2_functional(0.0, math.inf)
    assert exact_b2_functional(0.0, 3.0) == pytest.approx(0.5 + 3.0 / math.sqrt(math.pi) + 0.5, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 5.0), st.floats(0.01, 30.0))
def test_exact_b2_matches_quadrature(R, T):
    assert exact_b2_functional(R, T) == pytest.approx(b2_functional_quadrature(R, T), rel=1e-9)


@pytest.mark.parametrize("R,T", [(1.0, 5.0), (0.5, 5.0), (0.0, 2.0)])
def test_b2_estimate_matches_oracle(R, T):
    est = estimate_refined(ProcessSpec.fbm(2.0), R, T, n_paths=100_000, seed=3, density=16, levels=2)
    assert abs(est.value - exact_b2_functional(R, T)) < 3 * est.stderr


@settings(max_examples=6, deadline=None)
@given(st.sampled_from([0.5, 1.0, 2.0]), st.sampled_from([2.0, 4.0]), st.integers(0, 1000))
def test_discrete_bm_matches_spitzer(R, T, seed):
    n = int(T * 4)
    est = estimate_functional(ProcessSpec.fbm(1.0), R, T, grid_n=n + 1, n_paths=20_000, seed=seed)
    oracle = spitzer_discrete_bm(R, T / n, n)
    assert abs(est.value - oracle) < 4 * est.stderr


def test_pathwise_monotone_in_T_and_R():
    b = sample_paths(ProcessSpec.time_average(0.8), build_grid(6.0, 49), 2000, seed=4)
    sig = variance(b.spec, b.grid.points)
    prev = None
    for m in (9, 17, 33, 49):  # prefixes are nested horizons
        lt = sup_log_terms(b.values[:, :m], sig[:m], 0.5)
        if prev is not None:
            assert np.all(lt >= prev)
        prev = lt
    lo = sup_log_terms(b.values, sig, 0.2)
    hi = sup_log_terms(b.values, sig, 0.9)
    assert np.all(lo >= hi)


def test_refinement_never_lowers_the_plain_estimate():
    res = estimate_refined(ProcessSpec.fbm(1.0), 1.0, 8.0, n_paths=4000, seed=5, density=4, levels=3)
    v = [e.value for e in res.levels]
    assert v[0] <= v[1] <= v[2]
    assert res.value > v[2]  # extrapolation pushes past the finest grid


def test_richardson_weights():
    for kappa in (0.5, 1.0, 1.5, 2.0):
        exps = discretization_exponents(kappa)
        for n in (2, 3):
            w = richardson_weights(n, exps)
            assert w.sum() == pytest.approx(1.0)
            for j in range(n - 1):
                # annihilates c d**e for each exponent used
                d = np.array([2.0 ** -l for l in range(n)])
                assert w @ d ** exps[j] == pytest.approx(0.0, abs=1e-12)
    assert discretization_exponents(2.0) == (2.0, 4.0)
    assert discretization_exponents(1.0) == (0.5, 1.0)


@pytest.mark.parametrize(
    "spec",
    [ProcessSpec.fbm(1.0), ProcessSpec.dual(1.0), ProcessSpec.time_average(1.0), ProcessSpec.bifractional(1.4, 0.6)],
)
def test_tilted_agrees_with_plain(spec):
    g = build_grid(2.0, 33)
    p = estimate_levels(spec, g, [0.0, 1.0], 40_000, 6, method="plain")
    t = estimate_levels(spec, g, [0.0, 1.0], 40_000, 7, method="tilted")
    for R in (0.0, 1.0):
        a, b = p[R].value, t[R].value
        se = math.hypot(p[R].stderr, t[R].stderr)
        assert abs(a - b) < 4 * se, (R, a, b, se)


def test_workers_do_not_change_results():
    g = grid_from_density(5.0, 8)
    spec = ProcessSpec.subfractional(1.2)
    a = estimate_levels(spec, g, [0.5], 3000, 8, levels=2, method="tilted", workers=1)[0.5]
    b = estimate_levels(spec, g, [0.5], 3000, 8, levels=2, method="tilted", workers=4)[0.5]
    assert a.value == b.value and a.stderr == b.stderr


def test_bad_inputs():
    with pytest.raises(ParameterError):
        estimate_functional(ProcessSpec.fbm(1.0), -1.0, 2.0)
    with pytest.raises(ParameterError):
        estimate_functional(ProcessSpec.fbm(1.0), 1.0, 2.0, method="importance")
    with pytest.raises(ParameterError):
        estimate_functional(ProcessSpec.fbm(1.0), 1.0, 2.0, grid_n=9, density=4)
    with pytest.raises(ParameterError):
        estimate_pickands_curve(ProcessSpec.fbm(1.0), [4.0, 2.0])


def test_heavy_tail_flag_on_critical_drift():
    est = estimate_functional(ProcessSpec.fbm(1.0), 0.0, 40.0, n_paths=20_000, seed=9, density=4)
    assert est.second_moment_flag


def test_plain_pickands_curve_caps():
    curve = estimate_pickands_curve(ProcessSpec.fbm(1.0), [1.0, 60.0, 200.0], grid_density=2,
                                    n_paths=300, seed=1, method="plain", levels=1)
    assert len(curve.points) < 3 and curve.cap == curve.points[-1].T


def test_convergence_report_synthetic():
    T = [10.0, 20.0, 40.0, 80.0]
    flat = convergence_report([(t, 1.3, 0.01) for t in T])
    assert flat.log_slope == pytest.approx(0.0, abs=1e-12)
    assert flat.plateau == pytest.approx(1.3)
    dec = convergence_report([(t, 1 + 1 / t, 0.01) for t in T])
    assert dec.plateau == pytest.approx(1.0, rel=0.02)
    assert dec.excess > 0
    with pytest.raises(ParameterError):
        convergence_report([(10.0, 1.0, 0.1), (20.0, 1.0, 0.1)])
