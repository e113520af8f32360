"""Reduced classical Hamiltonian of the trimer in ``(q1, q2, p1, p2)`` and its flow.

Energies are per particle, ``h = H_cl / N``, in units of ``Omega``.  Angles are
phases relative to site 3, ``p_i = n_i / N``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import optimize

from ..coherent import PhasePoint, phasepoint_to_spinor
from ..errors import GradientSingularity, InvalidArgument

SINGULAR_TOL = 1e-12


def _qp(point):
    if isinstance(point, PhasePoint):
        return point.q1, point.q2, point.p1, point.p2
    q1, q2, p1, p2 = (float(x) for x in point)
    PhasePoint(q1, q2, p1, p2)  # validates the simplex
    return q1, q2, p1, p2


def hcl(point, params) -> float:
    """Energy per particle ``H_cl / N``."""
    q1, q2, p1, p2 = _qp(point)
    p3 = max(0.0, 1.0 - p1 - p2)
    p1, p2 = max(p1, 0.0), max(p2, 0.0)
    return params.omega * (
        params.v * p2
        + 0.5 * params.u * (p1 * p1 + p2 * p2 + p3 * p3)
        - (math.sqrt(p1 * p2) * math.cos(q1 - q2) + math.sqrt(p2 * p3) * math.cos(q2))
    )


def hcl_spinor(z, params) -> float:
    """Same energy evaluated on a normalized amplitude vector."""
    z = np.asarray(z, dtype=complex)
    p = np.abs(z) ** 2
    hop = -(np.conj(z[0]) * z[1] + np.conj(z[1]) * z[2]).real
    return params.omega * (params.v * p[1] + 0.5 * params.u * np.sum(p * p) + hop)


def one_particle_matrix(params) -> np.ndarray:
    """``H0`` of the mean-field equation, in units of ``Omega``."""
    w = params.omega
    return np.array([[0.0, -0.5 * w, 0.0], [-0.5 * w, params.v * w, -0.5 * w], [0.0, -0.5 * w, 0.0]])


def eom(point, params) -> np.ndarray:
    """``(dq1/dt, dq2/dt, dp1/dt, dp2/dt)`` from Hamilton's equations of ``h``.

    On a simplex face the square-root terms are singular unless their
    coefficient vanishes; removable cases (such as the dark-state stationary
    point) are evaluated as limits, with the derivative of an undefined angle
    reported as zero.  Otherwise :class:`GradientSingularity` is raised.
    """
    q1, q2, p1, p2 = _qp(point)
    p3 = 1.0 - p1 - p2
    w, u, v = params.omega, params.u, params.v
    c12, s12 = math.cos(q1 - q2), math.sin(q1 - q2)
    c2, s2 = math.cos(q2), math.sin(q2)
    r12 = math.sqrt(max(p1 * p2, 0.0))
    r23 = math.sqrt(max(p2 * p3, 0.0))

    def half_ratio(num, den):
        # d sqrt(den*x)/dx style term: num / (2 sqrt(den))
        if den > SINGULAR_TOL:
            return num / (2.0 * math.sqrt(den))
        if abs(num) <= SINGULAR_TOL:
            return 0.0
        raise GradientSingularity(f"equations of motion singular at {(q1, q2, p1, p2)}")

    # dh/dp1 at fixed p2 (p3 = 1 - p1 - p2)
    dh_dp1 = u * (p1 - p3) - half_ratio(math.sqrt(max(p2, 0.0)) * c12, p1) + half_ratio(
        math.sqrt(max(p2, 0.0)) * c2, p3
    )
    dh_dp2 = (
        v
        + u * (p2 - p3)
        - half_ratio(math.sqrt(max(p1, 0.0)) * c12 + math.sqrt(max(p3, 0.0)) * c2, p2)
        + half_ratio(math.sqrt(max(p2, 0.0)) * c2, p3)
    )
    dh_dq1 = r12 * s12
    dh_dq2 = -r12 * s12 + r23 * s2
    dq1 = w * dh_dp1
    dq2 = w * dh_dp2
    if p2 <= SINGULAR_TOL:
        dq2 = 0.0  # q2 undefined on the p2 = 0 face
    if p1 <= SINGULAR_TOL:
        dq1 = 0.0
    return np.array([dq1, dq2, -w * dh_dq1, -w * dh_dq2])


def toroidal_embed(point):
    q1, q2, p1, p2 = _qp(point)
    r = p2 + p1 * math.cos(q1)
    return r * math.cos(q2), r * math.sin(q2), p1 * math.sin(q1)


def point_to_z(point) -> np.ndarray:
    q1, q2, p1, p2 = _qp(point)
    return phasepoint_to_spinor(PhasePoint(q1, q2, p1, p2)).spinor


def z_to_point(z) -> np.ndarray:
    """Vectorized amplitude -> ``(q1, q2, p1, p2)``; ``z`` has shape ``(..., 3)``."""
    z = np.asarray(z, dtype=complex)
    p = np.abs(z) ** 2
    norm = p.sum(axis=-1)
    ref = np.conj(z[..., 2]) / np.maximum(np.abs(z[..., 2]), 1e-300)
    q1 = np.angle(z[..., 0] * ref)
    q2 = np.angle(z[..., 1] * ref)
    return np.stack([q1, q2, p[..., 0] / norm, p[..., 1] / norm], axis=-1)


def z_to_real(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.concatenate([z.real, z.imag])


def real_to_z(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[..., :3] + 1j * x[..., 3:6]


def sp_point() -> PhasePoint:
    return PhasePoint(math.pi, 0.0, 0.5, 0.0)


def sp_energy(params) -> float:
    """Per-particle energy of the dark-state stationary point, ``u/4``."""
    return 0.25 * params.u * params.omega


def _spinor_from_angles(x):
    # x = (theta, chi, q1, q2) on CP^2: p1 = sin^2 theta cos^2 chi, p2 = cos^2 theta, ...
    th, ch, q1, q2 = x
    p2 = math.cos(th) ** 2
    rest = math.sin(th) ** 2
    p1 = rest * math.cos(ch) ** 2
    return np.array([math.sqrt(p1) * np.exp(1j * q1), math.sqrt(p2) * np.exp(1j * q2), math.sqrt(max(0.0, rest - p1))])


def energy_range(params, starts: int = 24, seed: int = 0) -> tuple[float, float]:
    """Minimum and maximum of ``h`` over phasespace (multi-start local optimization)."""
    rng = np.random.default_rng(seed)
    best = [math.inf, -math.inf]
    for sign, slot in ((1.0, 0), (-1.0, 1)):
        for _ in range(starts):
            x0 = rng.uniform([0, 0, -math.pi, -math.pi], [math.pi / 2, math.pi / 2, math.pi, math.pi])
            res = optimize.minimize(
                lambda x: sign * hcl_spinor(_spinor_from_angles(x), params), x0, method="Nelder-Mead",
                options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000},
            )
            val = sign * res.fun
            best[slot] = min(best[slot], val) if slot == 0 else max(best[slot], val)
        # the single-site configurations are corner extrema of the simplex
        for corner in np.eye(3):
            val = hcl_spinor(corner.astype(complex), params)
            best[slot] = min(best[slot], val) if slot == 0 else max(best[slot], val)
    return best[0], best[1]


def check_simplex(p1, p2, tol=1e-9):
    if p1 < -tol or p2 < -tol or p1 + p2 > 1 + tol:
        raise InvalidArgument(f"state left the population simplex: p1={p1}, p2={p2}")
