"""Covariance kernels of the self-similar Gaussian families.

Every family is normalised so that ``Var Y(t) = t**a`` where ``a`` is the
self-similarity exponent of :class:`SSTriple` (twice the Hurst index).
Kernels accept scalars or broadcastable arrays.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .errors import ConsistencyError, DomainError, ParameterError

log = logging.getLogger(__name__)

# variogram values in [-VARIOGRAM_CLAMP * scale, 0) are treated as roundoff
VARIOGRAM_CLAMP = 1e-12


class Family(str, enum.Enum):
    FBM = "fbm"
    BIFRACTIONAL = "bifractional"
    SUBFRACTIONAL = "sub-fractional"
    INTEGRATED_FBM = "integrated-fbm"
    TIME_AVERAGE_FBM = "time-average"
    DUAL_FBM = "dual"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "-")
        aliases = {
            "subfractional": cls.SUBFRACTIONAL,
            "integrated": cls.INTEGRATED_FBM,
            "time-average-fbm": cls.TIME_AVERAGE_FBM,
            "timeaverage": cls.TIME_AVERAGE_FBM,
            "dual-fbm": cls.DUAL_FBM,
        }
        if key in aliases:
            return aliases[key]
        for fam in cls:
            if fam.value == key or fam.name.lower().replace("_", "-") == key:
                return fam
        raise ParameterError(f"unknown process family {name!r}")


@dataclass(frozen=True)
class SSTriple:
    """``(alpha, kappa, c_Y)``: variance exponent, local Hölder exponent and
    local variogram coefficient at ``t = 1``."""

    alpha: float
    kappa: float
    c_Y: float

    def __iter__(self):
        return iter((self.alpha, self.kappa, self.c_Y))


@dataclass(frozen=True)
class ProcessSpec:
    """A member of one of the six families.

    ``alpha`` is the family's own parameter (not necessarily the variance
    exponent; see :attr:`triple`). ``K`` is used by the bifractional family
    only and ``k`` by the integrated family only.
    """

    family: Family
    alpha: float
    K: float = 1.0
    k: int = 1

    def __post_init__(self):
        fam = Family.parse(self.family)
        object.__setattr__(self, "family", fam)
        a = float(self.alpha)
        object.__setattr__(self, "alpha", a)
        if not math.isfinite(a):
            raise ParameterError(f"alpha must be finite, got {a}")
        if fam in (Family.BIFRACTIONAL, Family.SUBFRACTIONAL):
            if not 0.0 < a < 2.0:
                raise ParameterError(f"{fam.value}: alpha must lie in (0, 2), got {a}")
        elif not 0.0 < a <= 2.0:
            raise ParameterError(f"{fam.value}: alpha must lie in (0, 2], got {a}")
        if fam is Family.BIFRACTIONAL:
            K = float(self.K)
            if not 0.0 < K <= 1.0:
                raise ParameterError(f"bifractional: K must lie in (0, 1], got {K}")
            object.__setattr__(self, "K", K)
        else:
            object.__setattr__(self, "K", 1.0)
        if fam is Family.INTEGRATED_FBM:
            if int(self.k) != self.k or int(self.k) < 1:
                raise ParameterError(f"integrated-fbm: k must be a positive integer, got {self.k}")
            object.__setattr__(self, "k", int(self.k))
        else:
            object.__setattr__(self, "k", 1)

    @classmethod
    def fbm(cls, alpha):
        return cls(Family.FBM, alpha)

    @classmethod
    def bifractional(cls, alpha, K):
        return cls(Family.BIFRACTIONAL, alpha, K=K)

    @classmethod
    def subfractional(cls, alpha):
        return cls(Family.SUBFRACTIONAL, alpha)

    @classmethod
    def integrated(cls, alpha, k=1):
        return cls(Family.INTEGRATED_FBM, alpha, k=k)

    @classmethod
    def time_average(cls, alpha):
        return cls(Family.TIME_AVERAGE_FBM, alpha)

    @classmethod
    def dual(cls, alpha):
        return cls(Family.DUAL_FBM, alpha)

    @property
    def triple(self) -> SSTriple:
        return ss_parameters(self)

    @property
    def exponent(self) -> float:
        """Variance exponent: ``Var Y(t) = t**exponent``."""
        return ss_parameters(self).alpha

    def params(self) -> dict:
        out = {"alpha": self.alpha}
        if self.family is Family.BIFRACTIONAL:
            out["K"] = self.K
        if self.family is Family.INTEGRATED_FBM:
            out["k"] = self.k
        return out

    def label(self) -> str:
        extra = ",".join(f"{k}={v:g}" for k, v in self.params().items())
        return f"{self.family.value}({extra})"


def ss_parameters(spec: ProcessSpec) -> SSTriple:
    a, fam = spec.alpha, spec.family
    if fam is Family.FBM:
        return SSTriple(a, a, 1.0)
    if fam is Family.BIFRACTIONAL:
        return SSTriple(a * spec.K, a * spec.K, 2.0 ** (1.0 - spec.K))
    if fam is Family.SUBFRACTIONAL:
        return SSTriple(a, a, 1.0 / (2.0 - 2.0 ** (a - 1.0)))
    if fam is Family.INTEGRATED_FBM:
        k = spec.k
        return SSTriple(a + 2 * k, 2.0, k * (a + 2 * k) * (a + k - 1) / (a + 2 * k - 2))
    if fam is Family.TIME_AVERAGE_FBM:
        return SSTriple(a, 2.0, 1.0)
    if fam is Family.DUAL_FBM:
        return SSTriple(a, 2.0, a / 2.0)
    raise ParameterError(f"unhandled family {fam}")


# formula provenance for the CLI `info` command
FORMULAS = {
    Family.FBM: "R(t,s) = (t^a + s^a - |t-s|^a) / 2;  S(a, a, 1)",
    Family.BIFRACTIONAL: "R(t,s) = 2^-K ((t^a + s^a)^K - |t-s|^(aK));  S(aK, aK, 2^(1-K))",
    Family.SUBFRACTIONAL: (
        "R(t,s) = (t^a + s^a - ((t+s)^a + |t-s|^a)/2) / (2 - 2^(a-1));  "
        "S(a, a, 1/(2 - 2^(a-1)))"
    ),
    Family.INTEGRATED_FBM: (
        "Y_1 = sqrt(a+2) int_0^t B_a,  Y_k = sqrt(k(a+2k)(a+k-1)/(a+2k-2)) int_0^t Y_(k-1);  "
        "S(a+2k, 2, k(a+2k)(a+k-1)/(a+2k-2))"
    ),
    Family.TIME_AVERAGE_FBM: (
        "Y(t) = sqrt(a+2) (1/t) int_0^t B_a;  "
        "R(t,s) = ((a+2)(s^(a+1) t + s t^(a+1)) + |t-s|^(a+2) - t^(a+2) - s^(a+2)) / (2(a+1)ts);  "
        "S(a, 2, 1)"
    ),
    Family.DUAL_FBM: "R(t,s) = (t^a s + s^a t) / (t + s);  S(a, 2, a/2)",
}


def _check_times(*arrays):
    out = []
    for x in arrays:
        x = np.asarray(x, dtype=float)
        if np.any(x < 0) or np.any(np.isnan(x)):
            raise DomainError("time arguments must be nonnegative")
        out.append(x)
    return out


def _scalarize(x):
    return float(x) if np.ndim(x) == 0 else x


def variance(spec: ProcessSpec, t):
    (t,) = _check_times(t)
    return _scalarize(t ** spec.exponent)


# ---------------------------------------------------------------------------
# family kernels; all take broadcast arrays with s <= t elementwise where noted


def _cov_fbm(a, s, t):
    return 0.5 * (t**a + s**a - np.abs(t - s) ** a)


def _cov_bifractional(a, K, s, t):
    return 2.0**-K * ((t**a + s**a) ** K - np.abs(t - s) ** (a * K))


def _cov_subfractional(a, s, t):
    return (t**a + s**a - 0.5 * ((t + s) ** a + np.abs(t - s) ** a)) / (2.0 - 2.0 ** (a - 1.0))


def _h_binomial(x, p):
    """``(1 - x)**p - 1 + p*x`` without cancellation for small ``x``."""
    x0 = np.asarray(x, dtype=float)
    x = np.atleast_1d(x0)
    out = (1.0 - x) ** p - 1.0 + p * x
    small = x < 0.25
    if np.any(small):
        xs = x[small]
        acc = np.zeros_like(xs)
        term_pow = xs * xs
        for j in range(2, 60):
            c = special.binom(p, j) * (-1.0) ** j
            acc = acc + c * term_pow
            term_pow = term_pow * xs
        out[small] = acc
    return out.reshape(x0.shape)


def _time_average_unit(a, x):
    """Covariance of the time-average process at ``(x, 1)``, ``0 <= x <= 1``."""
    x = np.asarray(x, dtype=float)
    p = a + 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        num = p * x ** (a + 1.0) - x ** (a + 2.0) + _h_binomial(x, p)
        g = num / (2.0 * (a + 1.0) * x)
    return np.where(x > 0, g, 0.0)


def _cov_time_average(a, s, t):
    lo, hi = np.minimum(s, t), np.maximum(s, t)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(hi > 0, lo / np.where(hi > 0, hi, 1.0), 0.0)
    return np.where(hi > 0, hi**a * _time_average_unit(a, x), 0.0)


def _cov_dual(a, s, t):
    den = t + s
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (t**a * s + s**a * t) / np.where(den > 0, den, 1.0)
    return np.where(den > 0, val, 0.0)


def integrated_norm2(alpha, k):
    """Squared normalisation of the k-fold integral, product of the
    recursive constants."""
    out = 1.0
    for j in range(1, k + 1):
        out *= j * (alpha + 2 * j) * (alpha + j - 1) / (alpha + 2 * j - 2)
    return out


@lru_cache(maxsize=65536)
def _integrated_unit(alpha, k, x):
    """Covariance of the k-fold integrated fBm at ``(x, 1)``, ``0 <= x <= 1``.

    Uses the Cauchy form of the repeated integral. The separable terms of the
    fBm kernel integrate in closed form, the inner integral of ``|u - y|**a``
    in closed form too, and the remaining outer integral adaptively.
    """
    if x <= 0.0:
        return 0.0
    a = alpha
    beta = special.beta(k, a + 1.0)
    # int_0^s (s-u)^(k-1) u^a du = s^(a+k) B(k, a+1);  int_0^t (t-y)^(k-1) dy = t^k / k
    separable = 0.5 * (x ** (a + k) * beta / k + beta * x**k / k)
    coefs = [special.binom(k - 1, j) / (a + j + 1.0) for j in range(k)]

    def inner(u):
        # int_0^1 (1-y)^(k-1) |u-y|^a dy for 0 <= u <= 1
        below = sum(c * (1.0 - u) ** (k - 1 - j) * u ** (a + j + 1.0) for j, c in enumerate(coefs))
        return below + (1.0 - u) ** (a + k) * beta

    def outer(u):
        return (x - u) ** (k - 1) * inner(u)

    d, err = integrate.quad(outer, 0.0, x, epsabs=0.0, epsrel=1e-13, limit=200)
    if err > 1e-11 * abs(d) + 1e-300:
        log.warning("integrated-fbm quadrature error estimate %.3g at x=%.6g", err, x)
    scale = integrated_norm2(a, k) / math.factorial(k - 1) ** 2
    return scale * (separable - 0.5 * d)


def _cov_integrated(a, k, s, t):
    s, t = np.broadcast_arrays(np.asarray(s, float), np.asarray(t, float))
    lo, hi = np.minimum(s, t), np.maximum(s, t)
    out = np.zeros(lo.shape)
    expo = a + 2 * k
    flat_lo, flat_hi, flat_out = lo.ravel(), hi.ravel(), out.ravel()
    for i in range(flat_lo.size):
        h = flat_hi[i]
        if h > 0:
            flat_out[i] = h**expo * _integrated_unit(a, k, float(flat_lo[i] / h))
    return flat_out.reshape(lo.shape)


def covariance(spec: ProcessSpec, s, t):
    s, t = _check_times(s, t)
    a, fam = spec.alpha, spec.family
    if fam is Family.FBM:
        out = _cov_fbm(a, s, t)
    elif fam is Family.BIFRACTIONAL:
        out = _cov_bifractional(a, spec.K, s, t)
    elif fam is Family.SUBFRACTIONAL:
        out = _cov_subfractional(a, s, t)
    elif fam is Family.INTEGRATED_FBM:
        out = _cov_integrated(a, spec.k, s, t)
    elif fam is Family.TIME_AVERAGE_FBM:
        out = _cov_time_average(a, s, t)
    else:
        out = _cov_dual(a, s, t)
    return _scalarize(out)


def variogram(spec: ProcessSpec, s, t):
    """``Var(Y(s) - Y(t))``; tiny negative roundoff is clamped to zero."""
    s, t = _check_times(s, t)
    a, fam = spec.alpha, spec.family
    if fam is Family.FBM:
        return _scalarize(np.abs(t - s) ** a + 0.0 * s)
    if fam is Family.DUAL_FBM:
        # (1 - x)(1 - x^a) / (1 + x) scaled by hi^a: no cancellation near s = t
        lo, hi = np.minimum(s, t), np.maximum(s, t)
        with np.errstate(divide="ignore", invalid="ignore"):
            x = np.where(hi > 0, lo / np.where(hi > 0, hi, 1.0), 0.0)
        return _scalarize(hi**a * (1.0 - x) * (1.0 - x**a) / (1.0 + x))
    e = spec.exponent
    v = s**e + t**e - 2.0 * np.asarray(covariance(spec, s, t))
    scale = np.maximum(np.maximum(s**e, t**e), 1e-300)
    worst = np.min(v / scale) if v.size else 0.0
    if worst < -VARIOGRAM_CLAMP:
        raise ConsistencyError(
            f"{spec.label()}: variogram {worst:.3e} (relative) is negative beyond roundoff"
        )
    if worst < 0:
        log.debug("%s: clamped negative variogram of relative size %.2e", spec.label(), -worst)
    return _scalarize(np.where(s == t, 0.0, np.maximum(v, 0.0)))


def verify_s2(spec: ProcessSpec, h_values):
    """Ratios ``V(1, 1-h) / (c_Y h**kappa)`` for each ``h``; these tend to 1."""
    h = np.asarray(h_values, dtype=float)
    if np.any((h <= 0) | (h >= 1)):
        raise DomainError("h values must lie in (0, 1)")
    if h.size > 1 and np.any(np.diff(h) > 0):
        raise DomainError("h values must be sorted in decreasing order")
    _, kappa, c = spec.triple
    return np.asarray(variogram(spec, 1.0, 1.0 - h)) / (c * h**kappa)


def lamperti_covariance(spec: ProcessSpec, tau):
    """Correlation at lag ``tau`` of the stationary process
    ``X(t) = exp(-a t / 2) Y(exp(t))``."""
    tau = np.abs(np.asarray(tau, dtype=float))
    e = spec.exponent
    return _scalarize(np.exp(-e * tau / 2.0) * np.asarray(covariance(spec, np.exp(tau), 1.0)))


@dataclass(frozen=True)
class LampertiLocal:
    a: float
    degenerate: bool


def lamperti_local_parameter(spec: ProcessSpec) -> LampertiLocal:
    """Local constant ``a`` in ``R_X(t, 0) = 1 - a|t|^kappa + o(|t|^kappa)``.

    Returned with ``degenerate=True`` when ``a <= 0``: the stationary
    counterpart then has no local expansion of that order.
    """
    alpha, kappa, c = spec.triple
    a = c / 2.0 if kappa < 2 else (c - alpha**2 / 4.0) / 2.0
    if abs(a) < 1e-14:
        a = 0.0
    return LampertiLocal(a, a <= 0.0)
