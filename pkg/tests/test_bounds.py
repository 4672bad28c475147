import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sspickands.bounds import (
    Symbolic,
    check_lem10,
    compute_c1_c2,
    golden_section,
    pickands_closed_form,
    piterbarg_bounds,
    ratio_limit,
    sandwich_check,
    scan_cutoff,
    universal_lower,
    variogram_ratio,
)
from sspickands.errors import DomainError, ParameterError
from sspickands.processes import ProcessSpec

FAMILIES = [
    ProcessSpec.fbm(1.0),
    ProcessSpec.fbm(0.5),
    ProcessSpec.bifractional(1.25, 0.8),
    ProcessSpec.bifractional(1.0, 0.5),
    ProcessSpec.subfractional(1.0),
    ProcessSpec.subfractional(1.5),
    ProcessSpec.integrated(1.0, 1),
    ProcessSpec.integrated(0.6, 2),
    ProcessSpec.time_average(1.0),
    ProcessSpec.time_average(2.0),
    ProcessSpec.dual(1.0),
    ProcessSpec.dual(1.6),
]


def brute_force(spec, n=100_000):
    # past the cutoff V is a difference of nearly equal numbers and pure roundoff
    x = np.arange(n) / n
    x = x[x <= scan_cutoff(spec.triple.kappa)]
    f = np.asarray(variogram_ratio(spec, x))
    return float(f.min()), float(max(f.max(), ratio_limit(spec)))


def test_ratio_examples():
    x = np.linspace(0.0, 0.99, 50)
    assert variogram_ratio(ProcessSpec.time_average(0.7), 0.0) == pytest.approx(1.0)
    assert np.allclose(variogram_ratio(ProcessSpec.fbm(0.8), x), 1.0, rtol=1e-12)
    assert np.allclose(variogram_ratio(ProcessSpec.dual(1.0), x), (1 + x) ** 2 / (1 + x**2), rtol=1e-12)
    with pytest.raises(DomainError):
        variogram_ratio(ProcessSpec.fbm(1.0), 1.0)


def test_golden_section():
    x, fx = golden_section(lambda z: (z - 0.3) ** 2, 0.0, 1.0, tol=1e-12)
    assert x == pytest.approx(0.3, abs=1e-6) and fx < 1e-12
    x, _ = golden_section(lambda z: math.sin(math.pi * z), 0.0, 1.0, maximize=True)
    assert x == pytest.approx(0.5, abs=1e-6)


def test_dual_constants():
    k = compute_c1_c2(ProcessSpec.dual(1.0))
    assert k.c1 == pytest.approx(1.0, abs=1e-3) and k.c2 == pytest.approx(2.0, abs=1e-3)
    assert k.argmin_x == pytest.approx(0.0, abs=1e-6) and k.argmax_x == pytest.approx(1.0, abs=1e-6)
    for a in (0.5, 1.6):
        assert compute_c1_c2(ProcessSpec.dual(a)).c2 == pytest.approx(2 / a, rel=1e-6)


@pytest.mark.parametrize("a", [0.3, 1.0, 1.9])
def test_fbm_constants_exact(a):
    k = compute_c1_c2(ProcessSpec.fbm(a))
    assert (k.c1, k.c2) == (1.0, 1.0)


@pytest.mark.parametrize("spec", FAMILIES, ids=lambda s: s.label())
def test_constants_match_brute_force_scan(spec):
    k = compute_c1_c2(spec)
    lo, hi = brute_force(spec)
    # 1e-7 covers the ~1e-8 roundoff of the ratio near the cutoff
    assert k.c1 <= lo * (1 + 1e-7) and k.c1 == pytest.approx(lo, rel=1e-4)
    assert k.c2 >= hi * (1 - 1e-7) and k.c2 == pytest.approx(hi, rel=1e-4)


@pytest.mark.parametrize("spec", FAMILIES, ids=lambda s: s.label())
def test_invariants(spec):
    k = compute_c1_c2(spec)
    assert 0 < k.c1 <= 1.0 + 1e-12 and 1.0 - 1e-12 <= k.c2 < math.inf
    lim = ratio_limit(spec)
    assert k.c1 <= lim * (1 + 1e-9) and lim <= k.c2 * (1 + 1e-9)
    if spec.triple.kappa in (1.0, 2.0):
        for R in (0.3, 1.0, 4.0):
            rep = piterbarg_bounds(spec, R, k)
            assert rep.universal_lower <= rep.piterbarg_upper + 1e-12
            assert rep.piterbarg_lower <= rep.piterbarg_upper


def test_time_average_upper_at_alpha_2():
    rep = piterbarg_bounds(ProcessSpec.time_average(2.0), 1.0)
    assert rep.c2 == pytest.approx(1.0, abs=1e-6)
    assert rep.piterbarg_upper == pytest.approx((1 + math.sqrt(2)) / 2, abs=1e-5)
    assert rep.closed_form()


@pytest.mark.parametrize("a", [0.5, 1.0, 1.5])
def test_time_average_c2_numeric(a):
    # the scan gives the supremum at x -> 1, i.e. the limit c_Y (2/a)**2
    k = compute_c1_c2(ProcessSpec.time_average(a))
    assert k.c2 == pytest.approx(4 / a**2, rel=1e-6)


@pytest.mark.parametrize("a,R", [(1.0, 1.0), (1.6, 0.5), (0.5, 2.0)])
def test_dual_upper_formula(a, R):
    rep = piterbarg_bounds(ProcessSpec.dual(a), R)
    assert rep.piterbarg_upper == pytest.approx((1 + math.sqrt(1 + 2 / (R * a))) / 2, rel=1e-6)


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_f_alpha_lower(a):
    rep = piterbarg_bounds(ProcessSpec.time_average(a), 1 / (a + 1))
    assert rep.piterbarg_lower == pytest.approx((1 + math.sqrt(2 + a)) / 2, rel=1e-12)


def test_kappa_one_bounds():
    for R in (0.5, 1.0, 2.0):
        rep = piterbarg_bounds(ProcessSpec.fbm(1.0), R)
        assert rep.piterbarg_lower == rep.piterbarg_upper == pytest.approx(1 + 1 / R)
    rep = piterbarg_bounds(ProcessSpec.subfractional(1.0), 1.0)
    assert rep.piterbarg_lower == pytest.approx(2.0, rel=1e-6)


def test_symbolic_bounds_for_other_kappa():
    rep = piterbarg_bounds(ProcessSpec.bifractional(1.0, 0.5), 2.0)
    assert isinstance(rep.piterbarg_lower, Symbolic) and isinstance(rep.piterbarg_upper, Symbolic)
    assert rep.piterbarg_lower.R_arg == pytest.approx(2.0)
    assert rep.piterbarg_upper.R_arg == pytest.approx(2.0 / math.sqrt(2))
    assert not rep.closed_form()
    d = rep.to_dict()
    assert d["piterbarg_upper"].startswith("H_B0.5^")


def test_bounds_reject_nonpositive_R():
    for R in (0.0, -1.0):
        with pytest.raises(ParameterError):
            piterbarg_bounds(ProcessSpec.fbm(1.0), R)


def test_universal_lower_values():
    assert universal_lower(1.0) == pytest.approx((1 + math.sqrt(2)) / 2)
    assert universal_lower(1e9) == pytest.approx(1.0, abs=1e-9)


def test_pickands_closed_forms():
    assert pickands_closed_form(ProcessSpec.fbm(1.0)).value == 1.0
    assert pickands_closed_form(ProcessSpec.fbm(2.0)).value == pytest.approx(1 / math.sqrt(math.pi))
    assert pickands_closed_form(ProcessSpec.time_average(1.0)).value == pytest.approx(2 / math.sqrt(math.pi))
    assert pickands_closed_form(ProcessSpec.dual(1.0)).value == pytest.approx(math.sqrt(2 / math.pi))
    # k-fold integrated: kappa = 2, c_Y = k (a + 2k)(a + k - 1) / (a + 2k - 2)
    a, k = 0.6, 2
    alpha = a + 2 * k
    c = k * alpha * (a + k - 1) / (alpha - 2)
    pv = pickands_closed_form(ProcessSpec.integrated(a, k))
    assert pv.value == pytest.approx((2 / alpha) * math.sqrt(c / math.pi))
    # sub-fractional and bifractional keep kappa and scale by c_Y**(1/kappa)
    sub = pickands_closed_form(ProcessSpec.subfractional(1.5))
    assert sub.coefficient == pytest.approx((1 / (2 - 2**0.5)) ** (1 / 1.5))
    assert sub.value is None
    assert pickands_closed_form(ProcessSpec.subfractional(1.5), 0.8).value == pytest.approx(0.8 * sub.coefficient)
    bif = pickands_closed_form(ProcessSpec.bifractional(1.0, 0.5))
    assert bif.coefficient == pytest.approx(2.0)


def test_holder_bound_examples():
    c = check_lem10(ProcessSpec.fbm(1.0), 1.0)
    assert c.passed and c.C_hat == pytest.approx(1.0)
    c = check_lem10(ProcessSpec.dual(1.0), 1.0)
    assert c.passed and 1.0 <= c.C_hat * (1 + 1e-9) and c.C_hat <= 2.0
    for spec in FAMILIES:
        a, b = check_lem10(spec, 1.0), check_lem10(spec, 2.0)
        assert a.passed and b.passed, spec.label()
        assert b.C_hat <= 1.01 * a.C_hat
    with pytest.raises(ParameterError):
        check_lem10(ProcessSpec.fbm(1.0), 0.0)


def test_sandwich_examples():
    for spec in (ProcessSpec.fbm(1.0), ProcessSpec.dual(1.0)):
        k = compute_c1_c2(spec)
        assert sandwich_check(spec, k.c1, k.c2).passed
    k = compute_c1_c2(ProcessSpec.dual(1.0))
    bad = sandwich_check(ProcessSpec.dual(1.0), k.c1, k.c2 / 2)
    assert not bad.passed and bad.worst_pair is not None and bad.worst_excess > 0


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(FAMILIES), st.integers(0, 10_000))
def test_sandwich_holds_for_every_family(spec, seed):
    k = compute_c1_c2(spec)
    assert sandwich_check(spec, k.c1, k.c2, sample_pairs=500, seed=seed).passed
