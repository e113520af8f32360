"""Trajectories, Poincare sections and on-shell seeding."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..coherent import PhasePoint, section_q1
from ..errors import EmptyShellError, InvalidArgument
from . import integrator as rk
from .hamiltonian import (
    energy_range,
    hcl,
    hcl_spinor,
    one_particle_matrix,
    point_to_z,
    real_to_z,
    z_to_point,
    z_to_real,
)

SECTION_TOL = 1e-10
SHELL_TOL = 1e-10
_CROSS_CHUNK = 512


@dataclass(frozen=True)
class Tolerances:
    rtol: float = 1e-12
    atol: float = 1e-13
    drift_budget: float = 1e-8
    max_steps: int = 50_000_000
    first_step: float = 0.01


@dataclass(frozen=True)
class Section:
    """Section plane ``p1 = value``; ``both=False`` keeps only crossings with ``dp1/dt > 0``."""

    value: float = 0.5
    both: bool = False

    @property
    def mode(self) -> int:
        return rk.SECTION_BOTH if self.both else rk.SECTION_UP


@dataclass
class Trajectory:
    initial: PhasePoint
    times: np.ndarray
    states: np.ndarray  # (n, 4): q1, q2, p1, p2
    amplitudes: np.ndarray  # (n, 3) complex
    energies: np.ndarray  # h per sample
    mean_p1: float
    mean_p2: float
    average_window: tuple
    crossings: np.ndarray  # (k, 8) raw rows from the integrator
    status: str = "ok"
    nsteps: int = 0
    label: str | None = None
    lyapunov: float | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def energy_drift(self) -> float:
        return float(np.max(np.abs(self.energies - self.energies[0])))

    @property
    def mean_n2(self) -> float:
        """Time average of ``n2 / N``."""
        return self.mean_p2

    @property
    def T(self) -> float:
        return float(self.times[-1])


def _initial_z(initial):
    if isinstance(initial, PhasePoint):
        return point_to_z(initial), initial
    z = np.asarray(initial)
    if z.shape == (3,) and np.iscomplexobj(z):
        z = z / np.linalg.norm(z)
        return z, PhasePoint(*(float(x) for x in z_to_point(z)))
    point = PhasePoint(*(float(x) for x in initial))
    return point_to_z(point), point


def integrate(
    initial,
    params,
    T: float,
    tolerances: Tolerances | None = None,
    *,
    sample_dt: float = 1.0,
    section: Section | None = None,
    average_from: float = 0.0,
) -> Trajectory:
    """Adaptive DOP853 integration to horizon ``T``.

    Samples land exactly on multiples of ``sample_dt``.  Time averages of the
    populations cover ``[average_from, T]``.  A failed integration returns the
    partial trajectory with ``status`` describing the failure.
    """
    tol = tolerances or Tolerances()
    if T <= 0 or sample_dt <= 0:
        raise InvalidArgument("T and sample_dt must be positive")
    if not 0 <= average_from < T:
        raise InvalidArgument("average_from must lie in [0, T)")
    z0, point = _initial_z(initial)
    H = one_particle_matrix(params) / params.omega
    u = params.u
    grid = np.arange(0.0, T + 0.5 * sample_dt, sample_dt)
    grid = grid[grid <= T]
    grid = np.unique(np.concatenate([grid, [T, average_from]]))

    y = np.zeros(rk.state_size(1))
    y[:6] = z_to_real(z0)
    # time is measured in units of 1/Omega inside the kernel
    scale = params.omega
    h = tol.first_step
    sec_value = section.value if section else 0.0
    sec_mode = section.mode if section else rk.SECTION_NONE
    cross_rows = []
    buf = np.zeros((_CROSS_CHUNK, rk.CROSS_COLS))
    states = np.empty((len(grid), 6))
    states[0] = y[:6]
    acc_start = None
    status = "ok"
    nsteps = 0
    n_done = 1
    for k in range(1, len(grid)):
        y, _, h, nc, code, ns = rk.advance(
            y, grid[k - 1] * scale, grid[k] * scale, h, H, u, 1, tol.rtol, tol.atol,
            sec_value, sec_mode, buf, 0, tol.max_steps - nsteps,
        )
        nsteps += ns
        if nc:
            rows = buf[:nc].copy()
            rows[:, 0] /= scale
            cross_rows.append(rows)
        if code not in (rk.OK, rk.BUFFER_FULL):
            status = {rk.STEP_TOO_SMALL: "failed: step size collapse", rk.MAX_STEPS: "failed: step budget"}[code]
            break
        states[k] = y[:6]
        n_done = k + 1
        if grid[k] == average_from:
            acc_start = y[6:8].copy()
    if acc_start is None:
        acc_start = np.zeros(2)
    times = grid[:n_done]
    Z = real_to_z(states[:n_done])
    energies = np.array([hcl_spinor(z, params) for z in Z])
    span = times[-1] - average_from
    if span > 0 and n_done > 1 and times[-1] > average_from:
        means = (y[6:8] - acc_start) / (span * scale)
    else:
        means = np.abs(Z[-1, :2]) ** 2
    crossings = np.concatenate(cross_rows) if cross_rows else np.zeros((0, rk.CROSS_COLS))
    traj = Trajectory(
        point, times, z_to_point(Z), Z, energies, float(means[0]), float(means[1]),
        (average_from, float(times[-1])), crossings, status, nsteps,
    )
    if traj.ok and traj.energy_drift > tol.drift_budget:
        traj.status = f"drift {traj.energy_drift:.2e} over budget"
    return traj


@dataclass
class SectionPointSet:
    """Crossings of the section plane: columns ``q2, p2, q1, sign(dp1/dt)``."""

    points: np.ndarray
    trajectory_ids: np.ndarray
    times: np.ndarray
    p1_values: np.ndarray
    color: dict = field(default_factory=dict)  # trajectory id -> time-averaged p1
    energy: float = float("nan")
    plane: float = 0.5
    failures: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.points)

    def for_trajectory(self, tid: int) -> np.ndarray:
        return self.points[self.trajectory_ids == tid]

    def rows(self):
        for tid, t, (q2, p2, q1, sgn) in zip(self.trajectory_ids, self.times, self.points):
            yield int(tid), float(t), float(q2), float(p2), float(q1), self.color.get(int(tid), float("nan"))


def crossings_to_points(crossings: np.ndarray) -> np.ndarray:
    if len(crossings) == 0:
        return np.zeros((0, 4))
    pts = z_to_point(real_to_z(crossings[:, 1:7]))
    return np.column_stack([pts[:, 1], pts[:, 3], pts[:, 0], crossings[:, 7]])


def poincare_section(
    initials, params, E_target: float, T: float, tolerances: Tolerances | None = None,
    section: Section | None = None, check_shell: bool = True,
) -> tuple[SectionPointSet, list]:
    """Crossings of ``p1 = 1/2`` (by default) for an ensemble at total energy ``E_target``.

    Returns the point set and the trajectories.
    """
    section = section or Section()
    h_target = E_target / params.N
    pts, ids, times, p1s = [], [], [], []
    color, failures, trajs = {}, {}, []
    for tid, init in enumerate(initials):
        z0, point = _initial_z(init)
        if check_shell:
            h0 = hcl_spinor(z0, params)
            if abs(h0 - h_target) > SHELL_TOL * max(1.0, abs(h_target)):
                raise InvalidArgument(f"initial {tid} has h={h0!r}, not on the shell h={h_target!r}")
        traj = integrate(point, params, T, tolerances, section=section)
        trajs.append(traj)
        if not traj.ok:
            failures[tid] = traj.status
        p = crossings_to_points(traj.crossings)
        pts.append(p)
        ids.append(np.full(len(p), tid))
        times.append(traj.crossings[:, 0])
        p1s.append(np.abs(real_to_z(traj.crossings[:, 1:7])[:, 0]) ** 2 if len(p) else np.zeros(0))
        color[tid] = traj.mean_p1
    sps = SectionPointSet(
        np.concatenate(pts) if pts else np.zeros((0, 4)),
        np.concatenate(ids).astype(int) if ids else np.zeros(0, int),
        np.concatenate(times) if times else np.zeros(0),
        np.concatenate(p1s) if p1s else np.zeros(0),
        color, E_target, section.value, failures,
    )
    return sps, trajs


def seed_on_shell(
    params, E_target: float, n: int, rng=None, *, mode: str = "plane", plane: float = 0.5,
    max_tries: int | None = None,
) -> list[PhasePoint]:
    """Random phase points with ``h = E_target / N``.

    ``mode="plane"`` samples ``(q2, p2)`` on the ``p1 = plane`` section,
    ``mode="interior"`` samples ``(q2, p1, p2)`` in the whole simplex; ``q1``
    is then solved from the energy condition, choosing either root at random.
    """
    rng = np.random.default_rng(rng)
    h = E_target / params.N
    out = []
    tries = 0
    max_tries = max_tries or 2000 * max(n, 1)
    while len(out) < n and tries < max_tries:
        tries += 1
        q2 = rng.uniform(-math.pi, math.pi)
        if mode == "plane":
            p1 = plane
            p2 = rng.uniform(0.0, 1.0 - plane)
        elif mode == "interior":
            a, b = sorted(rng.uniform(0, 1, 2))
            p1, p2 = a, b - a
        else:
            raise InvalidArgument(f"unknown seeding mode {mode!r}")
        q1 = _solve_q1(params, h, q2, p1, p2, rng)
        if q1 is None:
            continue
        pt = PhasePoint(q1, q2, p1, p2)
        if abs(hcl(pt, params) - h) <= SHELL_TOL * max(1.0, abs(h)):
            out.append(pt)
    if not out:
        raise EmptyShellError(f"no phase points found on the shell h={h!r}")
    return out


def _solve_q1(params, h, q2, p1, p2, rng):
    q1 = section_q1(params, h, q2, p1, p2)
    if q1 is None:
        return None
    if rng.random() < 0.5:
        q1 = 2.0 * q2 - q1  # the other root of cos(q1 - q2) = c
    return math.remainder(q1, 2 * math.pi)


def classical_scale(params):
    """Per-particle ``(h_min, h_max)`` of the classical energy surface."""
    return energy_range(params)
