"""Linear (Bogoliubov) stability of the dark-state stationary point."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, NumericalFailure
from .fock import ModelParams

IM_TOL = 1e-10
SP_TOL = 1e-12
STABLE = "stable"
UNSTABLE = "unstable"


@dataclass(frozen=True)
class MeanFieldState:
    spinor: np.ndarray
    mu: float

    def __post_init__(self):
        a = np.asarray(self.spinor, dtype=complex)
        if abs(np.linalg.norm(a) - 1.0) > 1e-12:
            raise InvalidArgument("mean-field spinor must be normalized")
        object.__setattr__(self, "spinor", a)

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.spinor) ** 2


@dataclass(frozen=True)
class StabilityReport:
    """Frequencies as ``(Re >= 0, Im >= 0)`` representatives of each ``+-`` pair."""

    u: float
    v: float
    omega0: complex
    omega_plus: complex
    omega_minus: complex

    @property
    def max_imag(self) -> float:
        return max(abs(self.omega0.imag), abs(self.omega_plus.imag), abs(self.omega_minus.imag))

    @property
    def verdict(self) -> str:
        return UNSTABLE if self.max_imag > IM_TOL else STABLE

    def row(self):
        return (self.u, self.v, self.omega_plus.real, self.omega_plus.imag,
                self.omega_minus.real, self.omega_minus.imag, self.verdict)


def _h0(v, omega=1.0):
    return np.array([[0.0, -0.5 * omega, 0.0], [-0.5 * omega, v * omega, -0.5 * omega], [0.0, -0.5 * omega, 0.0]])


def _params(params_or_u, v=None):
    if isinstance(params_or_u, ModelParams):
        return params_or_u.u, params_or_u.v, params_or_u.omega
    return float(params_or_u), float(v), 1.0


def sp_state(params) -> MeanFieldState:
    """Dark-state spinor with its chemical potential ``u/2`` (times ``Omega``)."""
    u, v, omega = _params(params)
    a = np.array([1.0, 0.0, -1.0], dtype=complex) / math.sqrt(2.0)
    mu = 0.5 * u * omega
    lhs = _h0(v, omega) @ a + u * omega * np.abs(a) ** 2 * a
    res = float(np.max(np.abs(lhs - mu * a)))
    if res > SP_TOL:
        raise NumericalFailure(f"stationarity residual {res:.2e}", residual=res)
    return MeanFieldState(a, mu)


def bogoliubov_matrix(state: MeanFieldState, params) -> np.ndarray:
    """``[[L, -uP], [uP, -L]]`` with ``L = H0 + 2uP - mu``; frequencies in units of ``Omega``."""
    u, v, omega = _params(params)
    a = state.spinor
    P = np.diag(state.populations)
    res = float(np.max(np.abs(_h0(v, omega) @ a + u * omega * P @ a - state.mu * a)))
    if res > 1e-10:
        raise InvalidArgument(f"state is not stationary (residual {res:.2e})")
    uw = u * omega
    L = _h0(v, omega) + 2 * uw * P - state.mu * np.eye(3)
    return np.block([[L, -uw * P], [uw * P, -L]]) / omega


def _canonical(w: complex) -> complex:
    w = complex(w)
    return complex(abs(w.real), abs(w.imag))


def closed_form(u: float, v: float) -> tuple[complex, complex]:
    """``(omega_plus, omega_minus)`` from the radical expressions, in complex arithmetic."""
    u, v = complex(u), complex(v)
    d = u - 2 * v
    # (d^2 + 4)^2 - 16 (u^2 - 2uv + 1) expanded so the constant terms cancel exactly
    inner_p = np.sqrt(d**4 - 8 * u * u + 32 * v * v)
    wp = np.sqrt(inner_p + u * u - 4 * u * v + 4 * v * v + 4) / (2 * math.sqrt(2))
    inner_m = np.sqrt(d * (u**3 - 6 * u * u * v + 4 * u * (3 * v * v - 2) - 8 * v * (v * v + 2)))
    wm = np.sqrt(-inner_m + d * d + 4) / (2 * math.sqrt(2))
    return _canonical(wp), _canonical(wm)


def closed_form_v0(u: float) -> tuple[complex, complex]:
    """Coalesced expressions valid at ``v = 0``."""
    u = complex(u)
    root = u * np.sqrt(u * u - 8)
    wp = np.sqrt(4 + u * u + root) / (2 * math.sqrt(2))
    wm = np.sqrt(4 + u * u - root) / (2 * math.sqrt(2))
    return _canonical(wp), _canonical(wm)


def numerical_frequencies(u: float, v: float) -> np.ndarray:
    """All six eigenvalues of the Bogoliubov matrix at the dark state."""
    p = ModelParams(1, u, v)
    return np.linalg.eigvals(bogoliubov_matrix(sp_state(p), p))


def zero_mode(M: np.ndarray) -> complex:
    """Frequency of the mode spanning the (numerical) kernel of ``M``.

    The zero mode is defective (a Jordan pair), so a plain eigensolver only
    resolves it to ``sqrt(eps)``; the Rayleigh quotient on the least singular
    vector is exact to rounding.
    """
    _, _, vh = np.linalg.svd(M)
    x = np.conj(vh[-1])
    return complex(np.vdot(x, M @ x) / np.vdot(x, x))


def frequencies(u: float, v: float) -> StabilityReport:
    wp, wm = closed_form(u, v)
    p = ModelParams(1, u, v)
    w0 = zero_mode(bogoliubov_matrix(sp_state(p), p))
    if abs(w0) > IM_TOL:
        raise NumericalFailure(f"zero mode not found (|omega0| = {abs(w0):.2e})", residual=abs(w0))
    return StabilityReport(float(u), float(v), _canonical(w0), wp, wm)


def _unstable(u, v) -> bool:
    wp, wm = closed_form(u, v)
    return max(abs(wp.imag), abs(wm.imag)) > IM_TOL


def _bisect(v, a, b, tol):
    fa = _unstable(a, v)
    if fa == _unstable(b, v):
        raise InvalidArgument(f"no stability change in [{a}, {b}]")
    while b - a > tol:
        m = 0.5 * (a + b)
        if _unstable(m, v) == fa:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def find_thresholds(v: float, u_range=(0.0, 6.0), ngrid: int = 2001, tol: float = 1e-7) -> tuple[float, float]:
    """Lower and upper edges of the instability window in ``u``.

    A coarse scan locates the window; both edges are refined by bisection.
    If the window starts at the lower end of the range, that end is returned.
    """
    lo, hi = map(float, u_range)
    grid = np.linspace(lo, hi, ngrid)
    flags = np.array([_unstable(u, v) for u in grid])
    if not flags.any():
        raise InvalidArgument(f"no instability in u range {u_range} at v={v}")
    idx = np.flatnonzero(flags)
    i0, i1 = idx[0], idx[-1]
    if i1 == len(grid) - 1:
        raise InvalidArgument("range does not bracket the upper threshold")
    lower = lo if i0 == 0 else _bisect(v, grid[i0 - 1], grid[i0], tol)
    upper = _bisect(v, grid[i1], grid[i1 + 1], tol)
    return lower, upper


def stability_table(u_values, v_values) -> list[StabilityReport]:
    return [frequencies(u, v) for v in v_values for u in u_values]


def write_stability_csv(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["u", "v", "re_omega_plus", "im_omega_plus", "re_omega_minus", "im_omega_minus", "verdict"])
        for r in reports:
            w.writerow(r.row())
