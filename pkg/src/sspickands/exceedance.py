"""Exceedance probabilities of locally-``Y`` Gaussian processes.

``X`` is centred Gaussian with correlation ``exp(-a V_Y(t, s))`` and standard
deviation ``sigma_X(t) = 1 / (1 + b t**beta)``. As ``u -> inf``

    P(sup_[0, T u**(-2/alpha)] X > u) / Psi(u)  ->  H_Y^{b/a}(a**(1/alpha) T)   (alpha = beta)
                                                ->  H_Y(a**(1/alpha) T)         (alpha < beta)

This module estimates the left side by plain Monte Carlo and sets it next to
a functional estimate of the right side on a matched grid.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special, stats

from . import rng
from .errors import InsufficientSamplesError, ParameterError
from .estimator import estimate_levels
from .processes import ProcessSpec, variogram
from .sampler import Grid, build_grid, factorize

MIN_HITS = 100
DEFAULT_U = (2.5, 3.0, 3.5)
DEFAULT_BUDGET = 10_000_000
PILOT_PATHS = 20_000


@dataclass(frozen=True)
class ExceedanceSpec:
    base: ProcessSpec
    a: float = 1.0
    b: float = 0.0
    beta: float = 1.0

    def __post_init__(self):
        for name in ("a", "b", "beta"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.a > 0 or not math.isfinite(self.a):
            raise ParameterError(f"a must be positive, got {self.a}")
        if not self.b >= 0 or not math.isfinite(self.b):
            raise ParameterError(f"b must be nonnegative, got {self.b}")
        if not self.beta > 0 or not math.isfinite(self.beta):
            raise ParameterError(f"beta must be positive, got {self.beta}")
        if self.alpha > self.beta:
            raise ParameterError(
                f"alpha = {self.alpha} > beta = {self.beta}: no limit theorem for this case"
            )

    @property
    def alpha(self) -> float:
        return self.base.triple.alpha

    @property
    def case(self) -> str:
        return "i" if self.alpha == self.beta else "ii"

    @property
    def reference_R(self) -> float:
        return self.b / self.a if self.case == "i" else 0.0

    def reference_horizon(self, T) -> float:
        return self.a ** (1.0 / self.alpha) * T

    def to_dict(self):
        return {
            "family": self.base.family.value,
            "params": self.base.params(),
            "a": self.a,
            "b": self.b,
            "beta": self.beta,
            "case": self.case,
        }


def normal_tail(u):
    """``Psi(u) = P(N(0,1) > u)``."""
    u = np.asarray(u, dtype=float)
    out = 0.5 * special.erfc(u / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def sigma_x(espec: ExceedanceSpec, t):
    return 1.0 / (1.0 + espec.b * np.asarray(t, dtype=float) ** espec.beta)


def assemble_exceedance_covariance(espec: ExceedanceSpec, points) -> np.ndarray:
    t = np.asarray(points, dtype=float)
    sd = sigma_x(espec, t)
    V = np.asarray(variogram(espec.base, t[:, None], t[None, :]), dtype=float)
    V = 0.5 * (V + V.T)
    np.fill_diagonal(V, 0.0)
    C = np.outer(sd, sd) * np.exp(-espec.a * V)
    np.fill_diagonal(C, sd * sd)
    return C


def window_points(espec: ExceedanceSpec, u, tau):
    """Rescaled-time points ``tau`` in ``[0, T]`` mapped into the window."""
    return np.asarray(tau, dtype=float) * float(u) ** (-2.0 / espec.alpha)


def matched_tau_grid(espec: ExceedanceSpec, T, density=16.0, grid_n=None) -> Grid:
    """Uniform rescaled grid on ``[0, T]`` whose image ``a**(1/alpha) tau`` has
    ``density`` points per unit time, like the reference functional grid."""
    if grid_n is None:
        grid_n = max(int(round(espec.reference_horizon(T) * float(density))) + 1, 2)
    return build_grid(T, grid_n)


@dataclass
class ExceedanceEstimate:
    u: float
    p_hat: float
    stderr: float
    hits: int
    n_paths: int
    grid_n: int


class _XSampler:
    def __init__(self, espec, u, tau, seed):
        self.points = window_points(espec, u, tau)
        C = assemble_exceedance_covariance(espec, self.points)
        self.factor = factorize(C, label=f"exceedance covariance, u={u:g}")
        self.seed = int(seed)

    def hits(self, u, b, start, stop, stream=rng.GAUSSIAN):
        z = rng.normals(self.seed, b, stop - start, self.points.size, stream)
        x = z @ self.factor.L.T
        return int(np.count_nonzero(x.max(axis=1) > u))


def estimate_exceedance(
    espec: ExceedanceSpec,
    u,
    T,
    grid_n=None,
    n_paths=1_000_000,
    seed=0,
    density=16.0,
    tau=None,
    workers=1,
    min_hits=MIN_HITS,
    pilot_paths=PILOT_PATHS,
) -> ExceedanceEstimate:
    """Plain MC estimate of ``P(max_i X(t_i) > u)`` on the window grid.

    ``tau`` (explicit rescaled points) overrides ``grid_n``/``density``. A
    pilot batch from a separate stream sizes the run; if fewer than
    ``min_hits`` exceedances are expected the call raises
    :class:`InsufficientSamplesError` carrying the required path count.
    """
    u = float(u)
    n_paths = int(n_paths)
    if n_paths < 1:
        raise ParameterError("n_paths must be at least 1")
    if tau is None:
        tau = matched_tau_grid(espec, T, density, grid_n).points
    tau = np.asarray(tau, dtype=float)
    sampler = _XSampler(espec, u, tau, seed)

    n_pilot = min(int(pilot_paths), n_paths)
    pilot_hits = sum(
        rng.map_blocks(lambda b, s, e: sampler.hits(u, b, s, e, rng.PILOT), n_pilot, workers)
    )
    # the supremum is at least the largest marginal, so p >= max Psi(u / sigma)
    floor = float(np.max(normal_tail(u / sigma_x(espec, sampler.points))))
    p_guess = max(pilot_hits / n_pilot, floor)
    if p_guess * n_paths < min_hits:
        need = int(math.ceil(min_hits / p_guess))
        raise InsufficientSamplesError(
            f"u={u:g}: about {p_guess * n_paths:.1f} exceedances expected from "
            f"{n_paths} paths, need {min_hits}; use n_paths >= {need}",
            required_paths=need,
        )

    hits = sum(rng.map_blocks(lambda b, s, e: sampler.hits(u, b, s, e), n_paths, workers))
    p = hits / n_paths
    se = math.sqrt(p * (1.0 - p) / n_paths)
    return ExceedanceEstimate(u, p, se, hits, n_paths, tau.size)


@dataclass
class RatioSeries:
    espec: ExceedanceSpec
    T: float
    u_values: list
    probabilities: list  # (p_hat, stderr)
    psi_values: list
    ratios: list
    ratio_stderr: list
    reference: float
    reference_stderr: float
    meta: dict = field(default_factory=dict)

    def rows(self):
        for u, (p, se), psi, r, rse in zip(
            self.u_values, self.probabilities, self.psi_values, self.ratios, self.ratio_stderr
        ):
            yield {
                "u": u,
                "p_hat": p,
                "stderr": se,
                "psi": psi,
                "ratio": r,
                "ratio_stderr": rse,
                "reference": self.reference,
                "reference_stderr": self.reference_stderr,
            }

    def write_csv(self, path_or_file):
        cols = ["u", "p_hat", "stderr", "psi", "ratio", "ratio_stderr", "reference", "reference_stderr"]
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
            w.writeheader()
            for row in self.rows():
                w.writerow({k: repr(float(v)) for k, v in row.items()})
        finally:
            if own:
                fh.close()

    def to_dict(self):
        return {
            "process": self.espec.to_dict(),
            "T": self.T,
            "rows": list(self.rows()),
            **self.meta,
        }


def reference_functional(
    espec: ExceedanceSpec, T, density=16.0, grid_n=None, n_paths=100_000, seed=0, workers=1
):
    """``H_Y^{b/a}(a**(1/alpha) T)`` (case i) or ``H_Y(a**(1/alpha) T)``
    (case ii) on the image of the matched rescaled grid."""
    tau = matched_tau_grid(espec, T, density, grid_n)
    grid = tau.scaled(espec.a ** (1.0 / espec.alpha))
    R = espec.reference_R
    est = estimate_levels(espec.base, grid, [R], n_paths, seed, 1, "tilted", workers)[R]
    return est.value, est.stderr


def ratio_series(
    espec: ExceedanceSpec,
    T,
    u_list=DEFAULT_U,
    budget=DEFAULT_BUDGET,
    density=16.0,
    grid_n=None,
    seed=0,
    reference_paths=100_000,
    workers=1,
) -> RatioSeries:
    """Exceedance ratios ``p_hat(u) / Psi(u)`` for increasing ``u`` with the
    matched reference functional. ``budget`` caps the paths spent per ``u``."""
    u_list = [float(u) for u in u_list]
    if any(b <= a for a, b in zip(u_list, u_list[1:])):
        raise ParameterError("u_list must be strictly increasing")
    budget = int(budget)
    ref, ref_se = reference_functional(espec, T, density, grid_n, reference_paths, seed, workers)
    probs, psis, ratios, rses = [], [], [], []
    for u in u_list:
        e = estimate_exceedance(espec, u, T, grid_n, budget, seed, density, workers=workers)
        psi = normal_tail(u)
        probs.append((e.p_hat, e.stderr))
        psis.append(psi)
        ratios.append(e.p_hat / psi)
        rses.append(e.stderr / psi)
    return RatioSeries(
        espec,
        float(T),
        u_list,
        probs,
        psis,
        ratios,
        rses,
        ref,
        ref_se,
        {"budget": budget, "density": density, "grid_n": grid_n, "seed": seed},
    )


# ---------------------------------------------------------------------------
# quadrature oracle for two-point grids


def two_point_exceedance(espec: ExceedanceSpec, u, t1, t2) -> float:
    """``P(max(X(t1), X(t2)) > u)`` by 1-D quadrature over ``X(t1)``."""
    s1, s2 = sigma_x(espec, [t1, t2])
    rho = math.exp(-espec.a * float(variogram(espec.base, t1, t2)))
    u1, u2 = u / s1, u / s2
    if rho >= 1.0:
        return normal_tail(min(u1, u2))
    r = math.sqrt(1.0 - rho * rho)

    def f(x):
        return stats.norm.pdf(x) * stats.norm.cdf((u2 - rho * x) / r)

    both_below, _ = integrate.quad(f, -np.inf, u1, epsabs=1e-15, epsrel=1e-12, limit=200)
    return float(1.0 - both_below)


def single_point_exceedance(espec: ExceedanceSpec, u, t) -> float:
    return normal_tail(u / float(sigma_x(espec, t)))


__all__ = [
    "ExceedanceSpec",
    "ExceedanceEstimate",
    "RatioSeries",
    "normal_tail",
    "sigma_x",
    "assemble_exceedance_covariance",
    "window_points",
    "matched_tau_grid",
    "estimate_exceedance",
    "reference_functional",
    "ratio_series",
    "two_point_exceedance",
    "single_point_exceedance",
]
