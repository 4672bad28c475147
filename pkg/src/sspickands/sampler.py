"""Path sampling on time grids.

Three routes produce the law of a family on a grid:

* dense Cholesky of the assembled covariance (any family);
* circulant embedding of fractional Gaussian noise, cumulated to fBm
  (uniform grids only);
* trapezoid integration of sampled fBm paths for the integral-defined
  families (k-fold integrated and time-average fBm).

For ``alpha = 2`` the fBm, integrated, time-average and dual families are
rank one, ``Y(t) = t**(a/2) * xi``, and are sampled that way.

Samplers are prepared once per (spec, grid) and then produce blocks of paths
whose normals come from :mod:`sspickands.rng`, so results are a pure function
of ``(spec, grid, n_paths, seed)``.
"""

from __future__ import annotations

import enum
import json
import logging
import math
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import rng
from .errors import NotPositiveDefiniteError, ParameterError
from .processes import Family, ProcessSpec, covariance, variance

log = logging.getLogger(__name__)

DEFAULT_JITTERS = (1e-12, 1e-10, 1e-8)
# minimum base-grid size for trapezoid integration of fBm paths
MIN_INTEGRATION_POINTS = 512


class Scheme(str, enum.Enum):
    UNIFORM = "uniform"
    GEOMETRIC_REFINED = "geometric"


@dataclass(frozen=True, eq=False)
class Grid:
    points: np.ndarray
    horizon: float
    scheme: Scheme = Scheme.UNIFORM
    refine: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size < 1:
            raise ParameterError("grid must be a nonempty 1-d array")
        if pts[0] < 0 or np.any(np.diff(pts) <= 0):
            raise ParameterError("grid points must be nonnegative and strictly increasing")
        if pts[-1] != self.horizon:
            raise ParameterError("last grid point must equal the horizon")

    @property
    def n(self) -> int:
        return self.points.size

    @property
    def has_zero(self) -> bool:
        return self.points[0] == 0.0

    @property
    def positive(self) -> np.ndarray:
        return self.points[1:] if self.has_zero else self.points

    def is_uniform(self) -> bool:
        if self.n < 2 or not self.has_zero:
            return False
        d = np.diff(self.points)
        return bool(np.all(np.abs(d - d[0]) <= 1e-9 * d[0]))

    def refined(self) -> "Grid":
        """Nested grid with every interval split at its midpoint."""
        mids = 0.5 * (self.points[:-1] + self.points[1:])
        pts = np.empty(2 * self.n - 1)
        pts[0::2] = self.points
        pts[1::2] = mids
        return Grid(pts, self.horizon, self.scheme, dict(self.refine))

    def scaled(self, c) -> "Grid":
        pts = self.points * c
        return Grid(pts, float(pts[-1]), self.scheme, dict(self.refine))

    def to_dict(self) -> dict:
        return {"scheme": self.scheme.value, "n": self.n, "T": self.horizon, **self.refine}

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and np.array_equal(self.points, other.points)
            and self.scheme == other.scheme
        )

    __hash__ = None


def build_grid(T, n, scheme=Scheme.UNIFORM, n_refined=4, factor=4.0) -> Grid:
    """Time grid on ``[0, T]`` with ``n`` points.

    ``GEOMETRIC_REFINED``: with ``h = T / (n - n_refined)`` the grid is
    ``{0} ∪ {h / factor**j : j = n_refined-1, ..., 0} ∪ {i h : i = 2, ..., n - n_refined}``,
    i.e. a uniform grid whose first cell is refined geometrically towards 0.
    """
    T = float(T)
    n = int(n)
    if not T > 0 or not math.isfinite(T):
        raise ParameterError(f"horizon must be positive, got {T}")
    if n < 2:
        raise ParameterError(f"grid needs at least 2 points, got {n}")
    scheme = Scheme(scheme)
    if scheme is Scheme.UNIFORM:
        pts = np.arange(n) * (T / (n - 1))
        pts[-1] = T
        return Grid(pts, T, scheme)
    n_refined = int(n_refined)
    if not 1 <= n_refined <= n - 1:
        raise ParameterError("n_refined must lie in [1, n-1]")
    if factor <= 1:
        raise ParameterError("refinement factor must exceed 1")
    m = n - n_refined
    h = T / m
    near = [h / factor**j for j in range(n_refined - 1, -1, -1)]
    tail = [i * h for i in range(2, m + 1)]
    pts = np.array([0.0] + near + tail)
    pts[-1] = T
    return Grid(pts, T, scheme, {"n_refined": n_refined, "factor": float(factor)})


def grid_from_density(T, density, scheme=Scheme.UNIFORM, **kw) -> Grid:
    """Grid with about ``density`` points per unit time."""
    n = max(int(round(float(T) * float(density))) + 1, 2)
    return build_grid(T, n, scheme, **kw)


def assemble_covariance(spec: ProcessSpec, grid: Grid) -> np.ndarray:
    """Covariance matrix over the positive grid points (t = 0 is dropped)."""
    t = grid.positive
    C = np.asarray(covariance(spec, t[:, None], t[None, :]), dtype=float)
    C = 0.5 * (C + C.T)
    np.fill_diagonal(C, variance(spec, t))
    return C


def full_covariance(C_pos: np.ndarray, grid: Grid) -> np.ndarray:
    """Pad a positive-point covariance with the zero row/column for t = 0."""
    if not grid.has_zero:
        return C_pos
    n = grid.n
    out = np.zeros((n, n))
    out[1:, 1:] = C_pos
    return out


@dataclass(frozen=True)
class Factor:
    L: np.ndarray
    jitter: float  # relative to the largest diagonal entry; 0 if none applied


def factorize(matrix, jitters=DEFAULT_JITTERS, label="matrix") -> Factor:
    """Cholesky factor with escalating relative diagonal jitter on failure."""
    A = np.asarray(matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ParameterError("factorize expects a square matrix")
    if not np.all(np.isfinite(A)):
        raise NotPositiveDefiniteError(f"{label}: non-finite entries")
    if A.size == 0:
        return Factor(A.copy(), 0.0)
    if not np.allclose(A, A.T, rtol=1e-12, atol=0.0):
        raise ParameterError(f"{label}: matrix is not symmetric")
    scale = float(np.max(np.diag(A)))
    for eps in (0.0, *jitters):
        try:
            L = np.linalg.cholesky(A + eps * scale * np.eye(A.shape[0]) if eps else A)
        except np.linalg.LinAlgError:
            continue
        if eps:
            log.info("%s: Cholesky needed relative jitter %.0e", label, eps)
        return Factor(L, eps)
    raise NotPositiveDefiniteError(
        f"{label}: not positive definite even with relative jitter {jitters[-1]:.0e}"
    )


def _rank_one(spec: ProcessSpec) -> bool:
    return spec.alpha == 2.0 and spec.family in (
        Family.FBM,
        Family.INTEGRATED_FBM,
        Family.TIME_AVERAGE_FBM,
        Family.DUAL_FBM,
    )


# ---------------------------------------------------------------------------
# samplers


class Sampler:
    """Prepared sampler: ``block(b, start, stop)`` returns paths
    ``start..stop-1`` (which all lie in block ``b``) as a matrix."""

    generator_id = "abstract"

    def __init__(self, spec: ProcessSpec, grid: Grid, seed: int):
        self.spec = spec
        self.grid = grid
        self.seed = int(seed)
        self.meta: dict = {}

    def block(self, b, start, stop) -> np.ndarray:
        raise NotImplementedError

    def law_covariance(self) -> np.ndarray:
        """Covariance of the sampled grid values (t = 0 row included)."""
        raise NotImplementedError

    def sample(self, n_paths, workers=1) -> "PathBatch":
        if n_paths < 1:
            raise ParameterError("n_paths must be at least 1")
        parts = rng.map_blocks(self.block, n_paths, workers)
        values = np.concatenate(parts, axis=0)
        return PathBatch(values, self.grid, self.spec, self.seed, self.generator_id, dict(self.meta))


class CholeskySampler(Sampler):
    generator_id = "cholesky"

    def __init__(self, spec, grid, seed, jitters=DEFAULT_JITTERS, C=None):
        super().__init__(spec, grid, seed)
        self.C = assemble_covariance(spec, grid) if C is None else C
        label = f"{spec.label()} on {grid.n}-point {grid.scheme.value} grid [0, {grid.horizon:g}]"
        self.factor = factorize(self.C, jitters, label)
        self.meta["jitter"] = self.factor.jitter

    def block(self, b, start, stop):
        m = self.grid.positive.size
        z = rng.normals(self.seed, b, stop - start, m)
        vals = z @ self.factor.L.T
        if self.grid.has_zero:
            vals = np.concatenate([np.zeros((stop - start, 1)), vals], axis=1)
        return vals

    def law_covariance(self):
        C = self.C
        if self.factor.jitter:
            C = C + self.factor.jitter * np.max(np.diag(C)) * np.eye(C.shape[0])
        return full_covariance(C, self.grid)


class DirectionSampler(Sampler):
    """Rank-one processes ``Y(t) = t**(a/2) xi`` (alpha = 2 members)."""

    generator_id = "direction"

    def __init__(self, spec, grid, seed):
        if not _rank_one(spec):
            raise ParameterError(f"{spec.label()} is not a rank-one process")
        super().__init__(spec, grid, seed)
        self.profile = grid.points ** (spec.exponent / 2.0)

    def block(self, b, start, stop):
        xi = rng.normals(self.seed, b, stop - start, 1)
        return xi * self.profile[None, :]

    def law_covariance(self):
        return np.outer(self.profile, self.profile)


def fgn_autocovariance(alpha, n, dt=1.0):
    k = np.arange(n + 1, dtype=float)
    return 0.5 * dt**alpha * (np.abs(k + 1) ** alpha - 2 * k**alpha + np.abs(k - 1) ** alpha)


class FFTSampler(Sampler):
    """fBm by circulant embedding of the increment covariance."""

    generator_id = "circulant"
    # negative circulant eigenvalues tolerated (relative to the largest)
    eig_tol = 1e-10

    def __init__(self, alpha, grid, seed):
        spec = ProcessSpec.fbm(alpha)
        if not 0 < spec.alpha < 2:
            raise ParameterError("circulant embedding needs alpha in (0, 2)")
        if not grid.is_uniform():
            raise ParameterError("circulant embedding needs a uniform grid starting at 0")
        super().__init__(spec, grid, seed)
        n = grid.n - 1
        self.n_inc = n
        gamma = fgn_autocovariance(spec.alpha, n, grid.horizon / n)
        row = np.concatenate([gamma[: n + 1], gamma[n - 1 : 0 : -1]])
        lam = np.fft.rfft(row).real
        self.min_eig = float(lam.min() / lam.max())
        self.ok = self.min_eig >= -self.eig_tol
        self.sqrt_lam = np.sqrt(np.clip(lam, 0.0, None))
        self.meta["min_relative_eigenvalue"] = self.min_eig

    def block(self, b, start, stop):
        n = self.n_inc
        N = 2 * n
        rows = stop - start
        z = rng.normals(self.seed, b, rows, N)
        w = np.empty((rows, n + 1), dtype=complex)
        w[:, 0] = self.sqrt_lam[0] * z[:, 0]
        w[:, n] = self.sqrt_lam[n] * z[:, 1]
        half = self.sqrt_lam[1:n] / math.sqrt(2.0)
        w[:, 1:n] = half * (z[:, 2 : 2 * n : 2] + 1j * z[:, 3 : 2 * n : 2])
        inc = np.fft.irfft(w, n=N, axis=1)[:, :n] * math.sqrt(N)
        out = np.zeros((rows, n + 1))
        np.cumsum(inc, axis=1, out=out[:, 1:])
        return out

    def law_covariance(self):
        t = self.grid.points
        return np.asarray(covariance(self.spec, t[:, None], t[None, :]))


def trapezoid_operator(points) -> np.ndarray:
    """Matrix ``A`` with ``(A f)_i = int_0^{t_i} f`` by the trapezoid rule."""
    n = len(points)
    d = np.diff(points)
    A = np.zeros((n, n))
    for i in range(1, n):
        A[i, :i] += 0.5 * d[:i]
        A[i, 1 : i + 1] += 0.5 * d[:i]
    return A


def integration_map(spec: ProcessSpec, points) -> np.ndarray:
    """Linear map from base fBm grid values to the derived process."""
    A = trapezoid_operator(points)
    a = spec.alpha
    if spec.family is Family.INTEGRATED_FBM:
        M = math.sqrt(a + 2.0) * A
        for j in range(2, spec.k + 1):
            M = math.sqrt(j * (a + 2 * j) * (a + j - 1) / (a + 2 * j - 2)) * (A @ M)
        return M
    if spec.family is Family.TIME_AVERAGE_FBM:
        inv = np.zeros(len(points))
        inv[1:] = 1.0 / np.asarray(points)[1:]
        return math.sqrt(a + 2.0) * inv[:, None] * A
    raise ParameterError(f"{spec.label()} is not integral-defined")


def _integrate_values(values, points, spec):
    a = spec.alpha
    cum = integrate.cumulative_trapezoid(values, x=points, axis=1, initial=0.0)
    if spec.family is Family.INTEGRATED_FBM:
        out = math.sqrt(a + 2.0) * cum
        for j in range(2, spec.k + 1):
            c = math.sqrt(j * (a + 2 * j) * (a + j - 1) / (a + 2 * j - 2))
            out = c * integrate.cumulative_trapezoid(out, x=points, axis=1, initial=0.0)
        return out
    out = np.zeros_like(cum)
    pos = points > 0
    out[:, pos] = math.sqrt(a + 2.0) * cum[:, pos] / points[pos]
    return out


class IntegratedSampler(Sampler):
    """Integral-defined families via trapezoid integration of fBm paths on a
    uniform base grid that refines the target grid."""

    generator_id = "trapezoid"

    def __init__(self, spec, grid, seed, min_points=MIN_INTEGRATION_POINTS):
        if spec.family not in (Family.INTEGRATED_FBM, Family.TIME_AVERAGE_FBM):
            raise ParameterError(f"{spec.label()} is not integral-defined")
        if not grid.is_uniform():
            raise ParameterError("path integration needs a uniform target grid")
        super().__init__(spec, grid, seed)
        m = max(1, math.ceil((min_points - 1) / (grid.n - 1)))
        self.stride = m
        self.base_grid = build_grid(grid.horizon, (grid.n - 1) * m + 1)
        self.base = FFTSampler(spec.alpha, self.base_grid, seed)
        if not self.base.ok:
            raise ParameterError("circulant embedding failed on the base grid")
        self.meta.update(base_points=self.base_grid.n, stride=m)

    def block(self, b, start, stop):
        base = self.base.block(b, start, stop)
        out = _integrate_values(base, self.base_grid.points, self.spec)
        return out[:, :: self.stride]

    def law_covariance(self):
        M = integration_map(self.spec, self.base_grid.points)[:: self.stride]
        return M @ self.base.law_covariance() @ M.T


def make_sampler(spec: ProcessSpec, grid: Grid, seed, method="auto") -> Sampler:
    """Pick a sampling route.

    ``auto``: rank-one direction sampling for alpha = 2 members, circulant
    embedding for fBm on uniform grids, trapezoid integration for the
    integral-defined families on uniform grids, dense Cholesky otherwise.
    """
    if method == "cholesky":
        return CholeskySampler(spec, grid, seed)
    if method == "fft":
        return FFTSampler(spec.alpha, grid, seed)
    if method == "trapezoid":
        return IntegratedSampler(spec, grid, seed)
    if method != "auto":
        raise ParameterError(f"unknown sampling method {method!r}")
    if _rank_one(spec):
        return DirectionSampler(spec, grid, seed)
    uniform = grid.is_uniform()
    if spec.family is Family.FBM and uniform:
        s = FFTSampler(spec.alpha, grid, seed)
        if s.ok:
            return s
        warnings.warn(
            f"circulant embedding has relative eigenvalue {s.min_eig:.2e}; "
            "falling back to Cholesky",
            RuntimeWarning,
        )
        return CholeskySampler(spec, grid, seed)
    if spec.family in (Family.INTEGRATED_FBM, Family.TIME_AVERAGE_FBM) and uniform:
        return IntegratedSampler(spec, grid, seed)
    return CholeskySampler(spec, grid, seed)


# ---------------------------------------------------------------------------
# batches


@dataclass
class PathBatch:
    values: np.ndarray  # (n_paths, n_grid)
    grid: Grid
    spec: ProcessSpec
    seed: int
    generator_id: str
    meta: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    def dump(self, path):
        """Write the little-endian binary layout documented in the README."""
        header = {
            "family": self.spec.family.value,
            "params": self.spec.params(),
            "grid": self.grid.to_dict(),
            "seed": self.seed,
            "generator_id": self.generator_id,
            "n_paths": self.n_paths,
            "n_grid": self.grid.n,
        }
        blob = json.dumps(header, sort_keys=True).encode()
        with open(path, "wb") as fh:
            fh.write(b"SSPB")
            fh.write(struct.pack("<II", 1, len(blob)))
            fh.write(blob)
            fh.write(self.grid.points.astype("<f8").tobytes())
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "PathBatch":
        with open(path, "rb") as fh:
            if fh.read(4) != b"SSPB":
                raise ValueError(f"{path}: not a path-batch file")
            version, hlen = struct.unpack("<II", fh.read(8))
            if version != 1:
                raise ValueError(f"{path}: unsupported version {version}")
            header = json.loads(fh.read(hlen))
            n, m = header["n_paths"], header["n_grid"]
            pts = np.frombuffer(fh.read(8 * m), dtype="<f8").astype(float)
            vals = np.frombuffer(fh.read(8 * n * m), dtype="<f8").astype(float).reshape(n, m)
        g = header["grid"]
        refine = {k: v for k, v in g.items() if k not in ("scheme", "n", "T")}
        grid = Grid(pts, float(pts[-1]), Scheme(g["scheme"]), refine)
        spec = ProcessSpec(header["family"], **header["params"])
        return cls(vals, grid, spec, header["seed"], header["generator_id"])


def sample_paths(spec: ProcessSpec, grid: Grid, n_paths, seed, workers=1) -> PathBatch:
    """Dense-Cholesky sampling (rank-one members use their exact direction
    form, since their covariance matrix is singular)."""
    if _rank_one(spec):
        return DirectionSampler(spec, grid, seed).sample(n_paths, workers)
    return CholeskySampler(spec, grid, seed).sample(n_paths, workers)


def sample_fbm_fft(alpha, grid: Grid, n_paths, seed, workers=1) -> PathBatch:
    """fBm by circulant embedding; falls back to Cholesky (with a warning)
    if the embedding is not nonnegative definite."""
    s = FFTSampler(alpha, grid, seed)
    if not s.ok:
        warnings.warn(
            f"circulant embedding has relative eigenvalue {s.min_eig:.2e}; "
            "falling back to Cholesky",
            RuntimeWarning,
        )
        return sample_paths(ProcessSpec.fbm(alpha), grid, n_paths, seed, workers)
    return s.sample(n_paths, workers)


def derive_integrated(base: PathBatch, spec: ProcessSpec) -> PathBatch:
    """Integrate fBm paths into the k-fold integrated (``spec.k`` times) or
    time-average member ``spec`` with the same ``alpha``."""
    if base.spec.family is not Family.FBM:
        raise ParameterError(f"base batch must be fBm, got {base.spec.label()}")
    if spec.family not in (Family.INTEGRATED_FBM, Family.TIME_AVERAGE_FBM):
        raise ParameterError(f"{spec.label()} is not integral-defined")
    if base.spec.alpha != spec.alpha:
        raise ParameterError(
            f"base alpha {base.spec.alpha} does not match target alpha {spec.alpha}"
        )
    if not base.grid.has_zero:
        raise ParameterError("integration needs the base grid to start at 0")
    vals = _integrate_values(base.values, base.grid.points, spec)
    meta = dict(base.meta, base_generator=base.generator_id)
    return PathBatch(vals, base.grid, spec, base.seed, "trapezoid", meta)
