import numpy as np
import pytest

from sspickands.processes import ProcessSpec
from sspickands.sampler import build_grid
from sspickands.verify import (
    check_s2,
    check_sandwich,
    check_scaling,
    check_spd,
    check_time_change,
    default_specs,
    run_checks,
    scaling_kernel_gap,
    scaling_terms,
    time_change_terms,
)

GRID = build_grid(2.0, 33)


@pytest.mark.parametrize("spec", default_specs(), ids=lambda s: s.label())
def test_scaling_identity(spec):
    assert scaling_kernel_gap(spec, 1.7, GRID) < 1e-12
    lhs, rhs = scaling_terms(spec, 1.7, GRID, R=1.0, seed=3, n_paths=64)
    assert lhs.shape == rhs.shape == (64,)
    assert np.allclose(lhs, rhs, rtol=1e-9, atol=0)
    assert check_scaling(spec, 0.4, GRID).passed


@pytest.mark.parametrize("spec", default_specs(), ids=lambda s: s.label())
def test_time_change_identity_is_bit_exact(spec):
    lhs, rhs = time_change_terms(spec, 1.3, GRID, R=0.5, seed=4, n_paths=64)
    assert np.array_equal(lhs, rhs)
    assert check_time_change(spec, 0.7, GRID).passed


def test_scaling_with_unit_factor_is_identity():
    lhs, rhs = scaling_terms(ProcessSpec.dual(1.0), 1.0, GRID, seed=0, n_paths=32)
    assert np.array_equal(lhs, rhs)


def test_other_checks():
    for spec in default_specs():
        assert check_s2(spec).passed
        assert check_sandwich(spec).passed
        assert check_spd(spec).passed


def test_run_checks_all_pass_and_are_seeded():
    res = run_checks()
    assert len(res) == len(default_specs()) * (2 * 3 + 3)
    assert all(r.passed for r in res), [r.to_dict() for r in res if not r.passed]
    again = run_checks()
    assert [r.to_dict() for r in res] == [r.to_dict() for r in again]
    assert set(res[0].to_dict()) == {"name", "spec", "passed", "detail"}
