"""Monte Carlo estimation of ``E exp(sup_[0,T] sqrt(2) Y(t) - (1+R) t**a)``.

Two per-path estimators are available:

``plain``
    ``exp(max_i sqrt(2) Y(t_i) - (1+R) t_i**a)`` with ``t = 0`` always
    included, so every term is at least 1.

``tilted``
    Pick a grid index ``I`` with probability ``w_I`` and shift the path by
    ``sqrt(2) Cov(Y(.), Y(t_I))`` (the law of ``Y`` under the density
    ``exp(sqrt(2) Y(t_I) - Var Y(t_I))``). The term is
    ``exp(max Z') / sum_j w_j exp(sqrt(2) Y'(t_j) - Var Y(t_j))``.
    Averaging over ``I`` and the path recovers the grid functional exactly,
    and terms stay bounded where the plain terms are heavy-tailed
    (``R = 0`` on long horizons).

Grid bias: the supremum over grid points underestimates the continuous one.
Refined runs evaluate the same sampled paths on nested grids with spacing
``d, d/2, d/4, ...`` and combine them by Richardson extrapolation in
``d**(kappa/2), d**kappa`` (``d**2, d**4`` for ``kappa = 2``).
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, special

from . import rng
from .errors import DivergenceError, ParameterError
from .processes import ProcessSpec, variance
from .sampler import Grid, Scheme, build_grid, grid_from_density, make_sampler

log = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
# sample kurtosis of the exp-terms above which the stderr is flagged
KURTOSIS_FLAG = 50.0
# relative stderr above which a plain Pickands run is capped
PICKANDS_REL_SE_CAP = 0.10
DEFAULT_DENSITY = 16.0


@dataclass
class FunctionalEstimate:
    value: float
    stderr: float
    n_paths: int
    T: float
    R: float
    grid_n: int
    log_mean: float
    second_moment_flag: bool
    method: str = "plain"

    def to_dict(self):
        return asdict(self)


@dataclass
class RefinedEstimate:
    """Estimates on nested grids (coarse to fine) from shared paths, plus
    the Richardson combination when more than one level is present."""

    levels: list
    exponents: tuple
    extrapolated: float
    extrapolated_stderr: float

    @property
    def value(self):
        return self.extrapolated

    @property
    def stderr(self):
        return self.extrapolated_stderr

    @property
    def coarse(self) -> FunctionalEstimate:
        return self.levels[0]

    @property
    def fine(self) -> FunctionalEstimate:
        return self.levels[-1]


def discretization_exponents(kappa):
    """Leading exponents of the grid bias in the spacing ``d``."""
    if kappa >= 2.0:
        return (2.0, 4.0)
    return (kappa / 2.0, kappa)


def richardson_weights(n_levels, exponents, ratio=2.0):
    """Weights ``c`` with ``sum c_l H(d / ratio**l)`` cancelling the first
    ``n_levels - 1`` error terms ``d**p``."""
    if n_levels == 1:
        return np.array([1.0])
    if n_levels - 1 > len(exponents):
        raise ParameterError("not enough error exponents for the requested levels")
    h = ratio ** -np.arange(n_levels, dtype=float)
    A = np.ones((n_levels, n_levels))
    for r, p in enumerate(exponents[: n_levels - 1], start=1):
        A[r] = h**p
    rhs = np.zeros(n_levels)
    rhs[0] = 1.0
    return np.linalg.solve(A, rhs)


# ---------------------------------------------------------------------------
# per-path terms


def sup_log_terms(values, sigma2, R):
    """``max(0, max_i sqrt(2) Y_i - (1+R) sigma2_i)`` for every row."""
    values = np.atleast_2d(values)
    if values.shape[1] == 0:
        return np.zeros(values.shape[0])
    z = SQRT2 * values - (1.0 + R) * np.asarray(sigma2)[None, :]
    return np.maximum(z.max(axis=1), 0.0)


def cell_widths(points):
    p = np.asarray(points, dtype=float)
    if p.size == 1:
        return np.ones(1)
    w = np.empty_like(p)
    w[1:-1] = 0.5 * (p[2:] - p[:-2])
    w[0] = 0.5 * (p[1] - p[0])
    w[-1] = 0.5 * (p[-1] - p[-2])
    return w


def tilt_weights(points, sigma2, R):
    w = cell_widths(points) * np.exp(-R * np.asarray(sigma2))
    if not np.any(w > 0):
        w = np.ones_like(w)
    return w / w.sum()


def tilted_log_terms(values, C, law_var, sigma2, R, weights, u):
    """Log terms of the tilted estimator for paths ``values`` (rows)."""
    cw = np.cumsum(weights)
    idx = np.minimum(np.searchsorted(cw, u * cw[-1], side="right"), len(weights) - 1)
    shift = C[idx, :]  # symmetric: row idx is Cov(Y(t_idx), Y(.))
    base = SQRT2 * values + 2.0 * shift
    z = base - (1.0 + R) * sigma2[None, :]
    top = np.maximum(z.max(axis=1), 0.0)
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    log_s = special.logsumexp(logw[None, :] + base - law_var[None, :], axis=1)
    return top - log_s


def _exp(x):
    return math.exp(x) if x < 709.0 else math.inf


def summarize(log_terms, T, R, grid_n, method="plain") -> FunctionalEstimate:
    """Mean of ``exp(log_terms)`` accumulated with a max shift."""
    lt = np.asarray(log_terms, dtype=float)
    n = lt.size
    shift = float(lt.max())
    w = np.exp(lt - shift)
    m = float(w.mean())
    log_mean = shift + math.log(m)
    value = _exp(log_mean)
    if n >= 2:
        sd = float(w.std(ddof=1))
        stderr = _exp(shift + math.log(sd) - 0.5 * math.log(n)) if sd > 0 else 0.0
        var = float(w.var())
        kurt = float(np.mean((w - m) ** 4) / var**2) if var > 0 else 0.0
    else:
        stderr, kurt = float("nan"), 0.0
    return FunctionalEstimate(
        value=value,
        stderr=stderr,
        n_paths=n,
        T=float(T),
        R=float(R),
        grid_n=int(grid_n),
        log_mean=log_mean,
        second_moment_flag=bool(kurt > KURTOSIS_FLAG),
        method=method,
    )


def functional_from_paths(values, sigma2, R, T=None, grid_n=None) -> FunctionalEstimate:
    """Plain estimate from explicit path values and variance profile."""
    values = np.atleast_2d(values)
    lt = sup_log_terms(values, sigma2, R)
    return summarize(lt, T if T is not None else float("nan"), R, grid_n or values.shape[1])


def functional_from_batch(batch, R) -> FunctionalEstimate:
    sigma2 = variance(batch.spec, batch.grid.points)
    return functional_from_paths(batch.values, sigma2, R, batch.grid.horizon, batch.grid.n)


# ---------------------------------------------------------------------------
# driver


def _check_R(R):
    R = float(R)
    if not R >= 0 or not math.isfinite(R):
        raise ParameterError(f"R must be a finite nonnegative number, got {R}")
    return R


def estimate_levels(
    spec: ProcessSpec,
    grid: Grid,
    R_values,
    n_paths,
    seed,
    levels=1,
    method="plain",
    workers=1,
    sampler_method="auto",
):
    """Estimate the functional for every ``R`` in ``R_values`` on ``grid``
    and its ``levels - 1`` successive midpoint refinements, all from one set
    of paths sampled on the finest grid.

    Returns ``{R: RefinedEstimate}``.
    """
    R_values = [_check_R(r) for r in np.atleast_1d(R_values)]
    n_paths = int(n_paths)
    if n_paths < 1:
        raise ParameterError("n_paths must be at least 1")
    if levels < 1:
        raise ParameterError("levels must be at least 1")
    if method not in ("plain", "tilted"):
        raise ParameterError(f"unknown estimator {method!r}")
    fine = grid
    for _ in range(levels - 1):
        fine = fine.refined()
    sampler = make_sampler(spec, fine, seed, sampler_method)
    strides = [2 ** (levels - 1 - l) for l in range(levels)]
    pts = [fine.points[::s] for s in strides]
    sig = [np.asarray(variance(spec, p), dtype=float) for p in pts]

    tilt = None
    if method == "tilted":
        C = sampler.law_covariance()
        tilt = []
        for s, p, sg in zip(strides, pts, sig):
            Cl = np.ascontiguousarray(C[::s, ::s])
            tilt.append(
                (Cl, np.diag(Cl).copy(), {R: tilt_weights(p, sg, R) for R in R_values})
            )

    def run_block(b, start, stop):
        vals = sampler.block(b, start, stop)
        u = rng.uniforms(seed, b, stop - start) if tilt is not None else None
        out = {}
        for R in R_values:
            per_level = []
            for l, s in enumerate(strides):
                v = vals[:, ::s]
                if tilt is None:
                    per_level.append(sup_log_terms(v, sig[l], R))
                else:
                    Cl, lv, wts = tilt[l]
                    per_level.append(tilted_log_terms(v, Cl, lv, sig[l], R, wts[R], u))
            out[R] = np.stack(per_level)
        return out

    parts = rng.map_blocks(run_block, n_paths, workers)
    exps = discretization_exponents(spec.triple.kappa)
    coef = richardson_weights(levels, exps)
    results = {}
    for R in R_values:
        lt = np.concatenate([p[R] for p in parts], axis=1)  # (levels, n_paths)
        ests = [summarize(lt[l], grid.horizon, R, len(pts[l]), method) for l in range(levels)]
        if levels == 1:
            ext, ext_se = ests[0].value, ests[0].stderr
        else:
            shift = float(lt.max())
            comb = coef @ np.exp(lt - shift)
            ext = math.exp(shift) * float(comb.mean())
            ext_se = math.exp(shift) * float(comb.std(ddof=1)) / math.sqrt(n_paths)
        results[R] = RefinedEstimate(ests, exps[: levels - 1], ext, ext_se)
    return results


def estimate_functional(
    spec: ProcessSpec,
    R,
    T,
    grid_n=None,
    scheme=Scheme.UNIFORM,
    n_paths=10_000,
    seed=0,
    density=None,
    method="plain",
    workers=1,
) -> FunctionalEstimate:
    """Single-grid estimate. The grid has ``grid_n`` points, or about
    ``density`` points per unit time (default 16)."""
    grid = _make_grid(T, grid_n, scheme, density)
    return estimate_levels(spec, grid, [R], n_paths, seed, 1, method, workers)[_check_R(R)].levels[0]


def estimate_refined(
    spec: ProcessSpec,
    R,
    T,
    grid_n=None,
    scheme=Scheme.UNIFORM,
    n_paths=10_000,
    seed=0,
    density=None,
    method="plain",
    levels=2,
    workers=1,
) -> RefinedEstimate:
    """Estimates on the ``n``-point grid and its nested refinements (the
    default ``levels=2`` gives the ``(n, 2n-1)`` pair) plus extrapolation."""
    grid = _make_grid(T, grid_n, scheme, density)
    return estimate_levels(spec, grid, [R], n_paths, seed, levels, method, workers)[_check_R(R)]


def _make_grid(T, grid_n, scheme, density):
    if grid_n is not None and density is not None:
        raise ParameterError("give either grid_n or density, not both")
    if grid_n is None:
        return grid_from_density(T, density or DEFAULT_DENSITY, scheme)
    return build_grid(T, grid_n, scheme)


# ---------------------------------------------------------------------------
# exact oracle for B_2(t) = t xi


def exact_b2_functional(R, T) -> float:
    """``E exp(sup_[0,T] sqrt(2) t xi - (1+R) t**2)`` in closed form.

    ``xi <= 0``: the supremum is 0. ``xi > 0``: the maximiser is
    ``xi / (sqrt(2)(1+R))``; inside ``[0, T]`` the supremum is
    ``xi**2 / (2(1+R))``, otherwise it is attained at ``T``.
    """
    R = float(R)
    T = float(T)
    if R < 0:
        raise ParameterError("R must be nonnegative")
    if not T > 0:
        raise ParameterError("T must be positive")
    if math.isinf(T):
        if R == 0:
            raise DivergenceError("the R = 0 functional diverges as T -> infinity")
        return 0.5 * (1.0 + math.sqrt(1.0 + 1.0 / R))
    a = 1.0 + R
    xi0 = SQRT2 * a * T  # maximiser reaches T
    if R == 0:
        interior = xi0 / math.sqrt(2.0 * math.pi)
    else:
        b = R / a
        interior = 0.5 * special.erf(math.sqrt(b) * xi0 / SQRT2) / math.sqrt(b)
    # phi(xi) exp(sqrt2 T xi - a T^2) = exp(-R T^2) phi(xi - sqrt2 T)
    boundary = math.exp(-R * T * T) * 0.5 * special.erfc(R * T)  # Psi(sqrt2 T R)
    return 0.5 + interior + boundary


def b2_functional_quadrature(R, T) -> float:
    """Same quantity by direct 1-D quadrature over ``xi`` (independent check)."""
    a = 1.0 + R

    def sup_value(xi):
        if xi <= 0:
            return 0.0
        ts = xi / (SQRT2 * a)
        if ts <= T:
            return xi * xi / (2 * a)
        return SQRT2 * T * xi - a * T * T

    def f(xi):
        return math.exp(sup_value(xi) - 0.5 * xi * xi) / math.sqrt(2 * math.pi)

    xi0 = SQRT2 * a * T
    lo = integrate.quad(f, -np.inf, 0, epsabs=0, epsrel=1e-13)[0]
    mid = integrate.quad(f, 0, xi0, epsabs=0, epsrel=1e-13, limit=200)[0]
    hi = integrate.quad(f, xi0, np.inf, epsabs=0, epsrel=1e-13, limit=200)[0]
    return lo + mid + hi


# ---------------------------------------------------------------------------
# Pickands curves


@dataclass
class CurvePoint:
    T: float
    ratio: float
    stderr: float
    raw: list = field(default_factory=list)  # per-level (grid_n, ratio, stderr)


@dataclass
class PickandsCurve:
    spec: ProcessSpec
    exponent: float  # alpha / kappa
    points: list
    cap: float | None = None  # set when a plain run was truncated
    slope: float | None = None  # log-log slope over the last two points


def estimate_pickands_curve(
    spec: ProcessSpec,
    T_list,
    grid_density=DEFAULT_DENSITY,
    n_paths=20_000,
    seed=0,
    method="tilted",
    levels=2,
    workers=1,
) -> PickandsCurve:
    """``H_Y(T) / T**(alpha/kappa)`` along ``T_list`` (R = 0)."""
    T_list = [float(t) for t in T_list]
    if any(b <= a for a, b in zip(T_list, T_list[1:])):
        raise ParameterError("T_list must be strictly increasing")
    alpha, kappa, _ = spec.triple
    gamma = alpha / kappa
    pts, cap = [], None
    for T in T_list:
        grid = grid_from_density(T, grid_density)
        est = estimate_levels(spec, grid, [0.0], n_paths, seed, levels, method, workers)[0.0]
        scale = T**gamma
        raw = [(e.grid_n, e.value / scale, e.stderr / scale) for e in est.levels]
        rel = est.stderr / est.value if est.value > 0 else math.inf
        if rel > PICKANDS_REL_SE_CAP:
            log.warning(
                "%s: relative stderr %.1f%% at T=%g; capping the curve", spec.label(), 100 * rel, T
            )
            cap = pts[-1].T if pts else None
            break
        pts.append(CurvePoint(T, est.value / scale, est.stderr / scale, raw))
    slope = None
    if len(pts) >= 2:
        a, b = pts[-2], pts[-1]
        slope = (math.log(b.ratio) - math.log(a.ratio)) / (math.log(b.T) - math.log(a.T))
    return PickandsCurve(spec, gamma, pts, cap, slope)


@dataclass
class ConvergenceReport:
    plateau: float
    plateau_stderr: float
    last_ratio: float
    log_slope: float  # d log(ratio) / d log(T) over the last two points
    excess: float  # last ratio minus plateau
    stderr_dominates: bool


def convergence_report(points, exponent=1.0) -> ConvergenceReport:
    """Plateau diagnostic for a ratio curve.

    ``points`` is a :class:`PickandsCurve` or a sequence of
    ``(T, ratio, stderr)``. The plateau is the intercept of a weighted fit
    ``ratio = p + c T**(-exponent)``; no claim is made beyond that fit.
    """
    if isinstance(points, PickandsCurve):
        exponent = points.exponent
        points = [(p.T, p.ratio, p.stderr) for p in points.points]
    pts = [tuple(map(float, p)) for p in points]
    if len(pts) < 3:
        raise ParameterError("convergence_report needs at least 3 points")
    T = np.array([p[0] for p in pts])
    r = np.array([p[1] for p in pts])
    se = np.array([p[2] for p in pts])
    wts = 1.0 / np.where(se > 0, se, np.max(se[se > 0]) if np.any(se > 0) else 1.0) ** 2
    X = np.column_stack([np.ones_like(T), T**-exponent])
    W = np.sqrt(wts)
    coef, *_ = np.linalg.lstsq(X * W[:, None], r * W, rcond=None)
    cov = np.linalg.pinv((X * wts[:, None]).T @ X) if np.any(se > 0) else np.zeros((2, 2))
    plateau = float(coef[0])
    slope = float((math.log(r[-1]) - math.log(r[-2])) / (math.log(T[-1]) - math.log(T[-2])))
    diff = abs(r[-1] - r[-2])
    return ConvergenceReport(
        plateau=plateau,
        plateau_stderr=float(math.sqrt(max(cov[0, 0], 0.0))),
        last_ratio=float(r[-1]),
        log_slope=slope,
        excess=float(r[-1] - plateau),
        stderr_dominates=bool(diff <= 2.0 * math.hypot(se[-1], se[-2])),
    )
