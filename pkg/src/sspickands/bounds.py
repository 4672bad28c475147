"""Variogram-ratio constants and the closed-form Piterbarg/Pickands bounds.

The ratio ``f(x) = V(1, x**(kappa/alpha)) / (1 - x)**kappa`` on ``[0, 1)``
has ``f(0) = 1`` and tends to ``c_Y (kappa/alpha)**kappa`` as ``x -> 1``; its
infimum ``c1`` and supremum ``c2`` sandwich ``Y`` (after the time change
``t -> t**(kappa/alpha)``) between scaled fBm variograms.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConsistencyError, DomainError, ParameterError
from .processes import ProcessSpec, variogram

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
# numeric scans stop at 1 - 1e-6; the x -> 1 endpoint is taken analytically.
# For larger kappa the cutoff is pulled back so that (1 - x)**kappa stays
# above RATIO_FLOOR: past that V is a difference of O(1) terms and the
# ratio is dominated by cancellation.
X_CUTOFF = 1.0 - 1e-6
RATIO_FLOOR = 1e-8
H_B1 = 1.0
H_B2 = 1.0 / math.sqrt(math.pi)


def variogram_ratio(spec: ProcessSpec, x):
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x >= 1)):
        raise DomainError("variogram ratio is defined on [0, 1)")
    alpha, kappa, _ = spec.triple
    y = x ** (kappa / alpha)
    out = np.asarray(variogram(spec, 1.0, y)) / (1.0 - x) ** kappa
    return float(out) if out.ndim == 0 else out


def scan_cutoff(kappa) -> float:
    return min(X_CUTOFF, 1.0 - RATIO_FLOOR ** (1.0 / kappa))


def ratio_limit(spec: ProcessSpec) -> float:
    """``lim_{x -> 1-} f(x) = c_Y (kappa/alpha)**kappa``."""
    alpha, kappa, c = spec.triple
    return c * (kappa / alpha) ** kappa


def golden_section(f, a, b, tol=1e-10, maximize=False, max_iter=200):
    """Minimise (or maximise) a unimodal ``f`` on ``[a, b]``.

    Returns ``(x, f(x))`` for the best point seen, endpoints included.
    """
    sign = -1.0 if maximize else 1.0

    def g(x):
        return sign * f(x)

    fa, fb = g(a), g(b)
    best = (a, fa) if fa <= fb else (b, fb)
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = g(x1), g(x2)
    it = 0
    while b - a > tol and it < max_iter:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = g(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = g(x2)
        it += 1
    for x, v in ((x1, f1), (x2, f2)):
        if v < best[1]:
            best = (x, v)
    return best[0], sign * best[1]


@dataclass
class RatioConstants:
    c1: float
    c2: float
    argmin_x: float
    argmax_x: float


def compute_c1_c2(spec: ProcessSpec, coarse_n=4096, refine_tol=1e-10) -> RatioConstants:
    """Infimum and supremum of the variogram ratio.

    A coarse scan over ``[0, scan_cutoff(kappa)]`` plus the analytic endpoint value
    brackets the extrema; interior candidates are then refined by
    golden-section search.
    """
    if coarse_n < 64:
        raise ParameterError("coarse_n must be at least 64")
    xs = np.linspace(0.0, scan_cutoff(spec.triple.kappa), int(coarse_n))
    vals = np.asarray(variogram_ratio(spec, xs))
    if not np.all(np.isfinite(vals)):
        raise ConsistencyError(f"{spec.label()}: non-finite variogram ratio")
    lim = ratio_limit(spec)

    def f(x):
        return float(variogram_ratio(spec, x))

    def refine(i, maximize):
        lo = xs[max(i - 1, 0)]
        hi = xs[min(i + 1, xs.size - 1)]
        x, v = golden_section(f, lo, hi, refine_tol, maximize)
        better = v > vals[i] if maximize else v < vals[i]
        return (x, v) if better else (xs[i], float(vals[i]))

    i_min, i_max = int(np.argmin(vals)), int(np.argmax(vals))
    if lim < vals[i_min]:
        argmin, c1 = 1.0, lim
    else:
        argmin, c1 = refine(i_min, False)
    if lim > vals[i_max]:
        argmax, c2 = 1.0, lim
    else:
        argmax, c2 = refine(i_max, True)
    if not (0 < c1 <= c2 < math.inf):
        raise ConsistencyError(f"{spec.label()}: inconsistent constants c1={c1}, c2={c2}")
    return RatioConstants(float(c1), float(c2), float(argmin), float(argmax))


def piterbarg_b1(R):
    return 1.0 + 1.0 / R


def piterbarg_b2(R):
    return 0.5 * (1.0 + math.sqrt(1.0 + 1.0 / R))


def universal_lower(R):
    """Lower bound valid for every member (comparison with ``B_2(t**(a/2))``)."""
    return piterbarg_b2(R)


@dataclass(frozen=True)
class Symbolic:
    """``H^{R_arg}_{B_kappa}``: a classical Piterbarg constant without a
    closed form."""

    kappa: float
    R_arg: float

    def __str__(self):
        return f"H_B{self.kappa:g}^{self.R_arg:.6g}"


@dataclass
class PickandsValue:
    coefficient: float  # (kappa/alpha) c_Y**(1/kappa)
    kappa: float
    value: float | None  # closed form (kappa in {1, 2}) or coefficient * reference


def pickands_closed_form(spec: ProcessSpec, H_Bkappa_reference=None) -> PickandsValue:
    alpha, kappa, c = spec.triple
    coef = (kappa / alpha) * c ** (1.0 / kappa)
    if kappa == 1.0:
        value = c / alpha
    elif kappa == 2.0:
        value = (2.0 / alpha) * math.sqrt(c / math.pi)
    elif H_Bkappa_reference is not None:
        value = coef * float(H_Bkappa_reference)
    else:
        value = None
    return PickandsValue(coef, kappa, value)


@dataclass
class BoundsReport:
    family: str
    params: dict
    R: float
    c1: float
    c2: float
    argmin_x: float
    argmax_x: float
    piterbarg_lower: object  # float or Symbolic
    piterbarg_upper: object
    universal_lower: float
    pickands: PickandsValue

    def closed_form(self) -> bool:
        return not isinstance(self.piterbarg_lower, Symbolic) and not isinstance(
            self.piterbarg_upper, Symbolic
        )

    def to_dict(self):
        d = asdict(self)
        for key in ("piterbarg_lower", "piterbarg_upper"):
            v = getattr(self, key)
            d[key] = str(v) if isinstance(v, Symbolic) else v
        return d


def piterbarg_bounds(spec: ProcessSpec, R, constants: RatioConstants | None = None) -> BoundsReport:
    R = float(R)
    if not R > 0:
        raise ParameterError(f"Piterbarg bounds need R > 0, got {R}")
    k = constants or compute_c1_c2(spec)
    kappa = spec.triple.kappa
    if kappa == 1.0:
        lower = 1.0 + k.c1 / R
        upper = 1.0 + k.c2 / R
    elif kappa == 2.0:
        # the kappa = 2 lower bound is the universal one, not H_B2^{R/c1}
        lower = universal_lower(R)
        upper = 0.5 * (1.0 + math.sqrt(1.0 + k.c2 / R))
    else:
        lower = Symbolic(kappa, R / k.c1)
        upper = Symbolic(kappa, R / k.c2)
    return BoundsReport(
        family=spec.family.value,
        params=spec.params(),
        R=R,
        c1=k.c1,
        c2=k.c2,
        argmin_x=k.argmin_x,
        argmax_x=k.argmax_x,
        piterbarg_lower=lower,
        piterbarg_upper=upper,
        universal_lower=universal_lower(R),
        pickands=pickands_closed_form(spec),
    )


# ---------------------------------------------------------------------------
# numeric checks of the variogram inequalities


@dataclass
class HolderCheck:
    gamma: float
    C_hat: float
    C_hat_doubled: float
    passed: bool


def _holder_constant(spec, T, n, seed):
    alpha, kappa, _ = spec.triple
    gamma = min(alpha, kappa)
    gen = np.random.default_rng(seed)
    t = gen.uniform(0.0, T, n)
    s = gen.uniform(0.0, T, n)
    # structured pairs: (T, T x), where self-similarity puts the maximum
    x = np.linspace(0.0, 1.0, n, endpoint=False)
    t = np.concatenate([t, np.full(n, T)])
    s = np.concatenate([s, T * x])
    keep = np.abs(t - s) > 1e-9 * T
    t, s = t[keep], s[keep]
    ratio = np.asarray(variogram(spec, t, s)) / (T ** (alpha - gamma) * np.abs(t - s) ** gamma)
    return gamma, float(np.max(ratio))


def check_lem10(spec: ProcessSpec, T, sample_n=4000, seed=0) -> HolderCheck:
    """Empirical constant ``C`` in ``V(t,s) <= C T**(a-g) |t-s|**g`` on
    ``[0, T]**2``, ``g = min(alpha, kappa)``; passes when finite and stable
    (at most 1% growth) under doubling ``sample_n``."""
    if not T > 0:
        raise ParameterError("T must be positive")
    if sample_n < 1000:
        raise ParameterError("sample_n must be at least 1000")
    gamma, c = _holder_constant(spec, T, int(sample_n), seed)
    _, c2 = _holder_constant(spec, T, 2 * int(sample_n), seed + 1)
    ok = math.isfinite(c) and math.isfinite(c2) and c2 <= 1.01 * c
    return HolderCheck(gamma, c, c2, ok)


@dataclass
class SandwichResult:
    passed: bool
    worst_pair: tuple | None
    worst_excess: float  # largest relative violation (<= 0 when passed)


def sandwich_check(
    spec: ProcessSpec,
    c1,
    c2,
    sample_pairs=2000,
    horizon=10.0,
    seed=0,
    rtol=1e-9,
) -> SandwichResult:
    """Check ``c1 |t-s|**k <= V(t**(k/a), s**(k/a)) <= c2 |t-s|**k`` on
    random pairs (or on an explicit ``(n, 2)`` array of pairs)."""
    alpha, kappa, _ = spec.triple
    if np.ndim(sample_pairs) == 0:
        gen = np.random.default_rng(seed)
        pairs = gen.uniform(0.0, horizon, (int(sample_pairs), 2))
    else:
        pairs = np.asarray(sample_pairs, dtype=float)
    t, s = pairs[:, 0], pairs[:, 1]
    keep = t != s
    t, s = t[keep], s[keep]
    p = kappa / alpha
    v = np.asarray(variogram(spec, t**p, s**p))
    d = np.abs(t - s) ** kappa
    # roundoff allowance for V computed as a difference of O(t**kappa) terms
    slack = 1e-12 * np.maximum(t, s) ** kappa
    lo = (c1 * d * (1.0 - rtol) - slack - v) / d
    hi = (v - c2 * d * (1.0 + rtol) - slack) / d
    excess = np.maximum(lo, hi)
    i = int(np.argmax(excess)) if excess.size else 0
    worst = float(excess[i]) if excess.size else -math.inf
    passed = worst <= 0.0
    return SandwichResult(passed, None if passed else (float(t[i]), float(s[i])), worst)
