"""Exact-identity checks run by ``sspickands verify``.

* scaling: ``H_{cY}^R(T) = H_Y^R(c**(2/alpha) T)``: the kernels agree to
  1e-12 and the per-path terms under shared normals to 1e-9;
* time change: ``H_{Y(t**a1)}^R(T) = H_Y^R(T**a1)``, bit-exact under shared
  normals;
* S2 ratios ``V(1, 1-h) / (c_Y h**kappa) -> 1``;
* the variogram sandwich with computed ``c1, c2``;
* positive definiteness of the kernel on a 64-point grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .bounds import compute_c1_c2, sandwich_check
from .errors import NotPositiveDefiniteError
from .estimator import sup_log_terms
from .processes import ProcessSpec, variance, verify_s2
from .sampler import DEFAULT_JITTERS, Grid, assemble_covariance, build_grid, factorize

SCALING_RTOL = 1e-9
KERNEL_RTOL = 1e-12


@dataclass
class CheckResult:
    name: str
    spec: str
    passed: bool
    detail: str

    def to_dict(self):
        return {"name": self.name, "spec": self.spec, "passed": self.passed, "detail": self.detail}


def default_specs():
    return [
        ProcessSpec.fbm(1.0),
        ProcessSpec.fbm(0.6),
        ProcessSpec.bifractional(1.25, 0.8),
        ProcessSpec.subfractional(1.0),
        ProcessSpec.integrated(1.0, 1),
        ProcessSpec.time_average(1.0),
        ProcessSpec.dual(1.0),
    ]


def _shared_factors(mats, label):
    """Cholesky factors of every matrix with one common relative jitter, so
    that draws through them differ only by the matrices themselves."""
    for eps in (0.0, *DEFAULT_JITTERS):
        try:
            return [
                np.linalg.cholesky(M + eps * np.max(np.diag(M)) * np.eye(M.shape[0])) for M in mats
            ]
        except np.linalg.LinAlgError:
            continue
    raise NotPositiveDefiniteError(f"{label}: no common jitter level works")


def _draw(L, seed, n_paths, has_zero):
    z = rng.normals(seed, 0, n_paths, L.shape[0])
    vals = z @ L.T
    if has_zero:
        vals = np.concatenate([np.zeros((n_paths, 1)), vals], axis=1)
    return vals


def scaling_kernel_gap(spec: ProcessSpec, c, grid: Grid) -> float:
    """``max |C_Y(c**(2/a) s, c**(2/a) t) - c**2 C_Y(s, t)|`` relative to the
    largest entry: the covariance identity behind the scaling check."""
    alpha = spec.triple.alpha
    C1 = c * c * assemble_covariance(spec, grid)
    C2 = assemble_covariance(spec, grid.scaled(c ** (2.0 / alpha)))
    return float(np.max(np.abs(C1 - C2)) / np.max(np.abs(C2)))


def scaling_terms(spec: ProcessSpec, c, grid: Grid, R=1.0, seed=0, n_paths=256):
    """Per-path log terms of ``H_{cY}^R`` on ``grid`` and of ``H_Y^R`` on
    ``c**(2/alpha) grid``, both driven by the same normals.

    Once the kernels agree (:func:`scaling_kernel_gap`) both vectors are drawn
    through one factor; separate factorizations of a smooth kernel would add
    roundoff of order cond(C) * eps that says nothing about the identity.
    """
    alpha = spec.triple.alpha
    scaled = grid.scaled(c ** (2.0 / alpha))
    (L,) = _shared_factors([assemble_covariance(spec, scaled)], spec.label())
    y = _draw(L, seed, n_paths, grid.has_zero)
    lhs = sup_log_terms(y, c * c * variance(spec, grid.points), R)
    rhs = sup_log_terms(y, variance(spec, scaled.points), R)
    return lhs, rhs


def check_scaling(spec, c, grid, R=1.0, seed=0, n_paths=256, rtol=SCALING_RTOL) -> CheckResult:
    gap = scaling_kernel_gap(spec, c, grid)
    lhs, rhs = scaling_terms(spec, c, grid, R, seed, n_paths)
    err = float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs))))
    return CheckResult(
        "scaling",
        spec.label(),
        err <= rtol and gap <= KERNEL_RTOL,
        f"c={c:.6g} kernel gap {gap:.2e} (tol {KERNEL_RTOL:.0e}), "
        f"max rel diff {err:.2e} (tol {rtol:.0e})",
    )


def time_change_terms(spec: ProcessSpec, alpha1, grid: Grid, R=1.0, seed=0, n_paths=256):
    """Per-path log terms of ``H^R`` for ``Y(t**alpha1)`` on ``grid`` and for
    ``Y`` on the image grid ``grid**alpha1``, both driven by the same normals.

    ``Y(t**alpha1)`` is sampled through ``Y`` at the image points and its
    variance is ``Var Y(t**alpha1)``, so the two columns agree bit for bit.
    """
    pts = grid.points**alpha1
    image = Grid(pts, float(pts[-1]), grid.scheme)
    (L,) = _shared_factors([assemble_covariance(spec, image)], spec.label())
    sig_image = variance(spec, image.points)
    y_hat = _draw(L, seed, n_paths, grid.has_zero)
    sig_hat = variance(spec, grid.points**alpha1)  # Var Y-hat(t) = Var Y(t**alpha1)
    y = _draw(L, seed, n_paths, image.has_zero)
    return sup_log_terms(y_hat, sig_hat, R), sup_log_terms(y, sig_image, R)


def check_time_change(spec, alpha1, grid, R=1.0, seed=0, n_paths=256) -> CheckResult:
    lhs, rhs = time_change_terms(spec, alpha1, grid, R, seed, n_paths)
    same = bool(np.array_equal(lhs, rhs))
    n_diff = int(np.count_nonzero(lhs != rhs))
    return CheckResult("time-change", spec.label(), same, f"alpha1={alpha1:.6g} differing paths {n_diff}")


def check_s2(spec) -> CheckResult:
    h = np.array([1e-2, 1e-3, 1e-4])
    r = np.asarray(verify_s2(spec, h))
    ok = bool(abs(r[-1] - 1.0) < 0.01)
    return CheckResult("S2", spec.label(), ok, "ratios " + ", ".join(f"{v:.6f}" for v in r))


def check_sandwich(spec, seed=0) -> CheckResult:
    k = compute_c1_c2(spec)
    res = sandwich_check(spec, k.c1, k.c2, seed=seed)
    detail = f"c1={k.c1:.6g} c2={k.c2:.6g} worst excess {res.worst_excess:.2e}"
    if res.worst_pair is not None:
        detail += f" at (t, s) = {res.worst_pair}"
    return CheckResult("sandwich", spec.label(), res.passed, detail)


def check_spd(spec, n=64, T=4.0) -> CheckResult:
    grid = build_grid(T, n + 1)
    C = assemble_covariance(spec, grid)
    try:
        f = factorize(C, label=spec.label())
    except NotPositiveDefiniteError as exc:
        return CheckResult("SPD", spec.label(), False, str(exc))
    eig = float(np.linalg.eigvalsh(C)[0])
    return CheckResult("SPD", spec.label(), True, f"min eigenvalue {eig:.3e}, jitter {f.jitter:g}")


def run_checks(specs=None, n_random=3, seed=0) -> list:
    """All identity checks; the random ``(c, alpha1)`` pairs come from ``seed``."""
    specs = list(specs) if specs is not None else default_specs()
    gen = np.random.default_rng(seed)
    grid = build_grid(2.0, 33)
    out = []
    for spec in specs:
        for _ in range(n_random):
            c = float(gen.uniform(0.3, 3.0))
            a1 = float(gen.uniform(0.5, 2.0))
            out.append(check_scaling(spec, c, grid, seed=seed))
            out.append(check_time_change(spec, a1, grid, seed=seed))
        out.append(check_s2(spec))
        out.append(check_sandwich(spec, seed=seed))
        out.append(check_spd(spec))
    return out
