"""Fock-space intensity statistics: participation moments, GOE baselines,
lineshapes, inverse-cumulative histograms and log-log scaling fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import EmptyShellError, InvalidArgument

NORM_TOL = 1e-10
LINESHAPE_FLOOR = 1e-14
DEFAULT_THRESHOLDS = np.logspace(-3, 2, 60)


@dataclass
class IntensityProfile:
    index: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if np.any(self.values < 0):
            raise InvalidArgument("intensities must be non-negative")
        total = self.values.sum()
        if abs(total - 1.0) > NORM_TOL:
            raise InvalidArgument(f"intensities sum to {total!r}, not 1")

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class MomentSet:
    M: dict = field(default_factory=dict)
    R: dict = field(default_factory=dict)
    entropy: float = float("nan")
    M1: float = float("nan")

    @property
    def ratio(self) -> float:
        """``M10 / M2``."""
        return self.M[10] / self.M[2]


def intensities(spectrum, nu: int) -> IntensityProfile:
    vec = spectrum.vector(nu)
    X = vec * vec
    return IntensityProfile(int(nu) % spectrum.size, X / X.sum())


def profile_from_vector(vec, index: int = -1) -> IntensityProfile:
    X = np.abs(np.asarray(vec)) ** 2
    return IntensityProfile(index, X / X.sum())


def _values(profile) -> np.ndarray:
    return profile.values if isinstance(profile, IntensityProfile) else np.asarray(profile, dtype=float)


def moment(profile, q: float) -> float:
    """``M_q = (sum X^q)^(-1/(q-1))`` for ``q > 1``."""
    if q <= 1:
        raise InvalidArgument(f"q must exceed 1 (got {q}); use shannon_m1 for the q -> 1 limit")
    X = _values(profile)
    X = X[X > 0]
    # log-sum-exp keeps q=10 finite when max X is small
    logs = q * np.log(X)
    m = logs.max()
    log_R = m + math.log(np.exp(logs - m).sum())
    return math.exp(-log_R / (q - 1))


def shannon_m1(profile) -> float:
    X = _values(profile)
    X = X[X > 0]
    return math.exp(-float(np.sum(X * np.log(X))))


def moments(profile, q_list=(2, 10)) -> MomentSet:
    qs = sorted(set(q_list) | {2, 10})
    out = MomentSet()
    for q in qs:
        out.M[q] = moment(profile, q)
        out.R[q] = out.M[q] ** (-(q - 1))
    out.M1 = shannon_m1(profile)
    out.entropy = math.log(out.M1)
    return out


def moments_batch(vectors: np.ndarray, q_list=(2, 10)) -> dict:
    """``{q: M_q}`` arrays for every column of ``vectors`` (normalized internally)."""
    X = np.asarray(vectors, dtype=float) ** 2
    X = X / X.sum(axis=0)
    out = {}
    for q in q_list:
        if q <= 1:
            raise InvalidArgument(f"q must exceed 1 (got {q})")
        with np.errstate(divide="ignore"):
            logs = q * np.log(X)
        m = logs.max(axis=0)
        log_R = m + np.log(np.exp(logs - m).sum(axis=0))
        out[q] = np.exp(-log_R / (q - 1))
    return out


def goe_factor(q: float) -> float:
    """``<x^q>`` under Porter-Thomas: ``2^q Gamma(q+1/2)/sqrt(pi)``."""
    return math.exp(q * math.log(2.0) + special.gammaln(q + 0.5) - 0.5 * math.log(math.pi))


def goe_baseline(q: float, n_eff: float) -> float:
    if q <= 1:
        raise InvalidArgument(f"q must exceed 1, got {q}")
    if n_eff <= 0:
        raise InvalidArgument("n_eff must be positive")
    return goe_factor(q) ** (-1.0 / (q - 1)) * n_eff


def porter_thomas_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-x / 2) / np.sqrt(2 * np.pi * x)


def porter_thomas_tail(x):
    """``Prob(x' > x)`` for the normalized Porter-Thomas density, ``erfc(sqrt(x/2))``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise InvalidArgument("Porter-Thomas tail is defined for x >= 0")
    out = special.erfc(np.sqrt(x / 2))
    return float(out) if out.ndim == 0 else out


def sorted_lineshape(profile, floor: float = LINESHAPE_FLOOR) -> np.ndarray:
    X = _values(profile)
    top = X.max(initial=0.0)
    if top <= 0:
        raise InvalidArgument("lineshape of an all-zero profile")
    s = np.sort(X)[::-1] / top
    return s[s >= floor]


def lineshape_exponent(lineshape, decade=None) -> float:
    """Power-law exponent ``a`` in ``I ~ rank^-a`` fitted over a rank decade.

    Default decade is centred (geometrically) on the span of available ranks.
    """
    s = np.asarray(lineshape, dtype=float)
    n = len(s)
    if n < 20:
        raise InvalidArgument("lineshape too short for a power-law fit")
    if decade is None:
        mid = math.sqrt(n)
        decade = (max(1.0, mid / math.sqrt(10)), min(float(n), mid * math.sqrt(10)))
    rank = np.arange(1, n + 1)
    sel = (rank >= decade[0]) & (rank <= decade[1])
    slope, _ = np.polyfit(np.log(rank[sel]), np.log(s[sel]), 1)
    return float(-slope)


@dataclass
class TailHistogram:
    thresholds: np.ndarray
    tail: np.ndarray
    porter_thomas: np.ndarray
    n_samples: int

    def at(self, x: float) -> float:
        """Tail probability at the threshold nearest ``x`` on a log scale."""
        k = int(np.argmin(np.abs(np.log(self.thresholds) - math.log(x))))
        return float(self.tail[k])

    def rows(self):
        return zip(self.thresholds, self.tail, self.porter_thomas)


def empirical_tail(samples, thresholds=DEFAULT_THRESHOLDS) -> TailHistogram:
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise EmptyShellError("no intensities to histogram")
    thresholds = np.asarray(thresholds, dtype=float)
    above = x.size - np.searchsorted(x, thresholds, side="right")
    return TailHistogram(thresholds, above / x.size, porter_thomas_tail(thresholds), x.size)


def rescaled_intensities(vectors, n_eff: float) -> np.ndarray:
    X = np.asarray(vectors, dtype=float) ** 2
    X = X / X.sum(axis=0)
    return n_eff * X


def inverse_cumulative(spectrum, shell, members=None, thresholds=DEFAULT_THRESHOLDS) -> TailHistogram:
    """Pooled ``Prob(x > threshold)`` of ``x = N_eff X`` over a shell's eigenstates.

    ``members`` restricts the pool to a subset while keeping the shell's ``N_eff``.
    """
    members = shell.members if members is None else np.asarray(members, dtype=int)
    if len(members) == 0:
        raise EmptyShellError("empty pool of eigenstates")
    x = rescaled_intensities(spectrum.eigenvectors[:, members], shell.n_eff)
    return empirical_tail(x, thresholds)


@dataclass
class ScalingFit:
    N: np.ndarray
    M2: np.ndarray
    slope: float
    intercept: float
    residual: float

    def predict(self, N):
        return np.exp(self.intercept) * np.asarray(N, dtype=float) ** self.slope


def fit_scaling(points) -> ScalingFit:
    """Ordinary least squares of ``ln M2`` against ``ln N``."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise InvalidArgument("need at least three (N, M2) points")
    N, M2 = pts[:, 0], pts[:, 1]
    if np.any(N <= 0) or np.any(M2 <= 0):
        raise InvalidArgument("scaling points must be positive")
    A = np.column_stack([np.log(N), np.ones_like(N)])
    coef, res, *_ = np.linalg.lstsq(A, np.log(M2), rcond=None)
    resid = float(np.sqrt(res[0] / len(N))) if res.size else 0.0
    return ScalingFit(N, M2, float(coef[0]), float(coef[1]), resid)


# -- reference profiles ---------------------------------------------------------


def pooled_moments(vectors, q_list=(2, 10)) -> dict:
    """``{q: M_q}`` from the ensemble-averaged ``R_q`` of the columns of ``vectors``."""
    X = np.asarray(vectors, dtype=float) ** 2
    X = X / X.sum(axis=0)
    out = {}
    for q in q_list:
        if q <= 1:
            raise InvalidArgument(f"q must exceed 1 (got {q})")
        R = np.mean(np.sum(X**q, axis=0))
        out[q] = float(R ** (-1.0 / (q - 1)))
    return out


def porter_thomas_ensemble(dim: int, realizations: int, rng=None) -> np.ndarray:
    """``dim x realizations`` real Gaussian vectors (unit columns): GOE eigenvector surrogates."""
    rng = np.random.default_rng(rng)
    V = rng.standard_normal((dim, realizations))
    return V / np.linalg.norm(V, axis=0)


def dark_state_profile(N: int) -> np.ndarray:
    """Binomial intensities ``C(N,k)/2^N`` of ``N`` particles in the dark orbital."""
    k = np.arange(N + 1)
    logs = special.gammaln(N + 1) - special.gammaln(k + 1) - special.gammaln(N - k + 1) - N * math.log(2.0)
    return np.exp(logs)


def gaussian_profile(width: float, dims: int = 1, half_span: int | None = None) -> np.ndarray:
    """Normalized discretized Gaussian intensities on a ``dims``-dimensional grid."""
    L = half_span or int(math.ceil(10 * width))
    x = np.arange(-L, L + 1)
    g = np.exp(-(x**2) / (2 * width**2))
    X = g
    for _ in range(dims - 1):
        X = np.multiply.outer(X, g)
    X = X.ravel()
    return X / X.sum()


def amplitude_power_law_profile(dim: int, exponent: float = 0.5) -> np.ndarray:
    """Intensities of amplitudes ``psi_n ~ n^-exponent``, ``n = 1..dim``."""
    X = np.arange(1, dim + 1, dtype=float) ** (-2.0 * exponent)
    return X / X.sum()
