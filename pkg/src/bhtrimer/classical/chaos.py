"""Finite-time Lyapunov classification, the classical skeleton, and island coherent sets."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from ..coherent import SP_SPINOR, PhasePoint, phasepoint_to_spinor, section_q1
from ..errors import EmptyShellError, InvalidArgument
from . import integrator as rk
from .dynamics import (
    Section,
    Tolerances,
    _initial_z,
    crossings_to_points,
    integrate,
    seed_on_shell,
)
from .hamiltonian import energy_range, one_particle_matrix, real_to_z, z_to_real

log = logging.getLogger(__name__)

REGULAR = "regular"
CHAOTIC = "chaotic"
UNCERTAIN = "uncertain"


@dataclass(frozen=True)
class LyapunovSettings:
    separation: float = 1e-8
    renorm_dt: float = 1.0
    window: float = 2000.0
    threshold: float = 100.0  # chaotic iff lambda * window exceeds this
    uncertain_band: float = 0.2  # relative band around the threshold flagged uncertain


def sp_distance(Z) -> np.ndarray:
    """Distance of the rays of amplitude vectors ``Z[..., 3]`` from the dark state."""
    Z = np.asarray(Z, dtype=complex)
    Z = Z / np.linalg.norm(Z, axis=-1, keepdims=True)
    c = Z @ SP_SPINOR
    phase = np.where(np.abs(c) > 0, c / np.maximum(np.abs(c), 1e-300), 1.0)
    # difference vector formed explicitly; 1 - |overlap| would cancel to sqrt(eps)
    return np.linalg.norm(Z - phase[..., None] * SP_SPINOR, axis=-1)


def sp_growth_rate(params, epsilon: float = 1e-6, rng=0, T: float = 200.0, dt: float = 0.05,
                   window=(10.0, 1e-3)) -> float:
    """Exponential rate at which a small kick off the dark state grows.

    ``ln d(t)`` is fitted between the first times ``d`` exceeds
    ``window[0] * epsilon`` and ``window[1]``.  Returns 0 when the kick never
    leaves that band (linearly stable point).
    """
    rng = np.random.default_rng(rng)
    z = SP_SPINOR.astype(complex)
    z = z + epsilon * _tangent_direction(z, rng)
    z /= np.linalg.norm(z)
    traj = integrate(z, params, T, sample_dt=dt)
    d = sp_distance(traj.amplitudes)
    lo_hit = np.flatnonzero(d > window[0] * epsilon)
    hi_hit = np.flatnonzero(d > window[1])
    if lo_hit.size == 0 or hi_hit.size == 0 or hi_hit[0] - lo_hit[0] < 4:
        return 0.0
    sl = slice(lo_hit[0], hi_hit[0])
    slope, _ = np.polyfit(traj.times[sl], np.log(d[sl]), 1)
    return float(slope) / params.omega


def _tangent_direction(z, rng):
    # random direction orthogonal to the norm and global-phase directions
    xi = rng.normal(size=3) + 1j * rng.normal(size=3)
    xi -= np.vdot(z, xi) * z
    return xi / np.linalg.norm(xi)


def finite_time_lyapunov(initial, params, settings: LyapunovSettings | None = None,
                         tolerances: Tolerances | None = None, rng=0):
    """Largest finite-time Lyapunov exponent from a renormalized shadow trajectory.

    Separations are measured modulo the global U(1) phase.  Returns
    ``(lambda, log_growth)`` where ``log_growth[k]`` is the accumulated
    ``ln(d/d0)`` after ``k+1`` renormalization intervals.
    """
    s = settings or LyapunovSettings()
    tol = tolerances or Tolerances()
    rng = np.random.default_rng(rng)
    z, _ = _initial_z(initial)
    w = z + s.separation * _tangent_direction(z, rng)
    w /= np.linalg.norm(w)
    H = one_particle_matrix(params) / params.omega
    y = np.zeros(rk.state_size(2))
    y[:6] = z_to_real(z)
    y[6:12] = z_to_real(w)
    buf = np.zeros((1, rk.CROSS_COLS))
    h = tol.first_step
    nint = int(round(s.window / s.renorm_dt))
    growth = np.empty(nint)
    total = 0.0
    tau = s.renorm_dt * params.omega
    for k in range(nint):
        y, _, h, _, code, _ = rk.advance(
            y, k * tau, (k + 1) * tau, h, H, params.u, 2, tol.rtol, tol.atol, 0.0, rk.SECTION_NONE, buf, 0, tol.max_steps,
        )
        if code != rk.OK:
            raise ArithmeticError(f"shadow integration failed with code {code}")
        z = real_to_z(y[:6])
        w = real_to_z(y[6:12])
        # align the shadow's global phase before measuring and rescaling
        w = w * np.exp(-1j * np.angle(np.vdot(z, w)))
        d = np.linalg.norm(w - z)
        total += math.log(d / s.separation)
        growth[k] = total
        w = z + (s.separation / d) * (w - z)
        w /= np.linalg.norm(w)
        y[6:12] = z_to_real(w)
    return total / s.window, growth


def label_from_exponent(lam: float, settings: LyapunovSettings | None = None) -> str:
    s = settings or LyapunovSettings()
    score = lam * s.window
    if abs(score - s.threshold) <= s.uncertain_band * s.threshold:
        return UNCERTAIN
    return CHAOTIC if score > s.threshold else REGULAR


def classify_trajectory(traj, params, settings: LyapunovSettings | None = None, rng=0) -> str:
    """Label a trajectory regular, chaotic, or uncertain; stores the exponent on it."""
    s = settings or LyapunovSettings()
    if traj.T < s.window and traj.lyapunov is None:
        log.debug("trajectory horizon %.0f shorter than the Lyapunov window %.0f", traj.T, s.window)
    lam, _ = finite_time_lyapunov(traj.initial, params, s, rng=rng)
    traj.lyapunov = lam
    traj.label = label_from_exponent(lam, s)
    return traj.label


@dataclass(frozen=True)
class SkeletonSettings:
    n_seeds: int = 20
    T: float = 5000.0
    transient: float = 100.0
    seed: int = 0
    max_section_points: int = 400
    lyapunov: LyapunovSettings = LyapunovSettings()
    section: Section = Section()


@dataclass
class Torus:
    """A regular trajectory and its section crossings."""

    e_tilde: float
    h: float
    initial: PhasePoint
    mean_p1: float
    mean_p2: float
    lyapunov: float
    section_points: np.ndarray  # (k, 4): q2, p2, q1, sign
    island: bool = False


@dataclass
class SkeletonCell:
    e_tilde: float
    h: float
    chaotic_means: list = field(default_factory=list)
    regular_means: list = field(default_factory=list)
    uncertain: int = 0

    @property
    def chaotic_mean(self) -> float | None:
        return float(np.mean(self.chaotic_means)) if self.chaotic_means else None

    @property
    def has_chaos(self) -> bool:
        return bool(self.chaotic_means)


@dataclass
class Skeleton:
    """Time-averaged ``n2/N`` of chaotic and regular trajectory families versus energy."""

    params: object
    scale: tuple
    cells: list
    tori: list
    settings: SkeletonSettings

    @property
    def points(self) -> list:
        out = []
        for c in self.cells:
            if c.has_chaos:
                out.append((c.e_tilde, c.chaotic_mean, CHAOTIC))
            out.extend((c.e_tilde, m, REGULAR) for m in c.regular_means)
        return out

    def island_tori(self, window=None) -> list:
        lo, hi = window if window is not None else (-np.inf, np.inf)
        return [t for t in self.tori if t.island and lo <= t.e_tilde <= hi]

    def rows(self):
        for e, n2, label in self.points:
            yield e, n2, label


def _to_h(scale, e_tilde):
    lo, hi = scale
    return lo + e_tilde * (hi - lo)


def survey_energy(params, h, settings: SkeletonSettings, rng, e_tilde=float("nan")):
    """Integrate and classify an ensemble seeded on the section at energy ``h``."""
    cell = SkeletonCell(e_tilde, h)
    tori = []
    try:
        seeds = seed_on_shell(params, params.N * h, settings.n_seeds, rng, plane=settings.section.value)
    except EmptyShellError:
        return cell, tori
    lyap = settings.lyapunov
    if lyap.window > settings.T:
        lyap = LyapunovSettings(lyap.separation, lyap.renorm_dt, settings.T, lyap.threshold, lyap.uncertain_band)
    for seed in seeds:
        traj = integrate(seed, params, settings.T, section=settings.section,
                         average_from=min(settings.transient, 0.5 * settings.T))
        if not traj.ok:
            log.warning("skipping trajectory at h=%.4f: %s", h, traj.status)
            continue
        lam, _ = finite_time_lyapunov(seed, params, lyap, rng=rng)
        label = label_from_exponent(lam, lyap)
        traj.lyapunov, traj.label = lam, label
        if label == CHAOTIC:
            cell.chaotic_means.append(traj.mean_p2)
        elif label == REGULAR:
            cell.regular_means.append(traj.mean_p2)
            pts = crossings_to_points(traj.crossings)[: settings.max_section_points]
            tori.append(Torus(e_tilde, h, seed, traj.mean_p1, traj.mean_p2, lam, pts))
        else:
            cell.uncertain += 1
    for t in tori:
        t.island = cell.has_chaos
    return cell, tori


def build_skeleton(params, energy_grid, settings: SkeletonSettings | None = None, scale=None) -> Skeleton:
    """Classical skeleton over rescaled energies ``energy_grid``.

    ``scale = (h_min, h_max)`` maps rescaled to per-particle energies; by
    default it is the classical energy range.  Regular tori at energies that
    also carry chaotic trajectories are tagged as island tori.
    """
    settings = settings or SkeletonSettings()
    scale = tuple(scale) if scale is not None else energy_range(params)
    rng = np.random.default_rng(settings.seed)
    cells, tori = [], []
    for e in energy_grid:
        cell, found = survey_energy(params, _to_h(scale, float(e)), settings, rng, float(e))
        cells.append(cell)
        tori.extend(found)
    return Skeleton(params, scale, cells, tori, settings)


def island_coherent_set(params, E=None, selection: str = "island", *, skeleton: Skeleton | None = None,
                        window=None, settings: SkeletonSettings | None = None, max_points: int | None = None):
    """Coherent states at the section points of selected tori.

    Tori come from ``skeleton`` restricted to the rescaled-energy ``window``,
    or from a fresh survey at total energy ``E``.  ``selection`` is
    ``"island"`` (regular tori coexisting with chaos) or ``"regular"``.
    """
    if selection not in ("island", "regular"):
        raise InvalidArgument(f"unknown torus selection {selection!r}")
    if skeleton is None:
        if E is None:
            raise InvalidArgument("give a total energy E or a skeleton")
        settings = settings or SkeletonSettings(T=1000.0, lyapunov=LyapunovSettings(window=1000.0))
        cell, tori = survey_energy(params, E / params.N, settings, np.random.default_rng(settings.seed))
    else:
        tori = skeleton.tori
        if window is not None:
            tori = [t for t in tori if window[0] <= t.e_tilde <= window[1]]
        elif E is not None:
            h = E / params.N
            tori = [t for t in tori if abs(t.h - h) <= 1e-9 * max(1.0, abs(h))]
    if selection == "island":
        tori = [t for t in tori if t.island]
    pts = [row for t in tori for row in t.section_points]
    if not pts:
        raise EmptyShellError("no tori of the requested kind at this energy")
    if max_points is not None and len(pts) > max_points:
        idx = np.linspace(0, len(pts) - 1, max_points).round().astype(int)
        pts = [pts[i] for i in idx]
    out = []
    for q2, p2, q1, _ in pts:
        p2 = min(max(p2, 0.0), 0.5)
        out.append(phasepoint_to_spinor(PhasePoint(q1, q2, 0.5, p2), params.N))
    return out


@dataclass(frozen=True)
class IslandCenter:
    """Elliptic periodic orbit at the heart of an island, as its section point."""

    e_tilde: float
    h: float
    point: PhasePoint
    residual: float


def _return_map(params, h, x, q1_hint, section: Section, T: float):
    q1 = section_q1(params, h, x[0], section.value, x[1], near=q1_hint)
    if q1 is None or x[1] < 0:
        return None
    traj = integrate(PhasePoint(q1, x[0], section.value, x[1]), params, T, section=section)
    rows = traj.crossings[traj.crossings[:, 0] > 1e-9]
    if len(rows) == 0:
        return None
    return crossings_to_points(rows[:1])[0]


def island_center(params, h: float, guess, section: Section | None = None, T: float = 100.0,
                  tol: float = 1e-8, e_tilde: float = float("nan")) -> IslandCenter:
    """Fixed point of the section return map near ``guess = (q2, p2, q1)``."""
    section = section or Section()
    q1_hint = guess[2]

    def resid(x):
        y = _return_map(params, h, x, q1_hint, section, T)
        if y is None:
            return np.array([10.0, 10.0])
        return np.array([math.remainder(y[0] - x[0], 2 * math.pi), y[1] - x[1]])

    sol = optimize.root(resid, np.asarray(guess[:2], dtype=float), method="hybr")
    r = float(np.max(np.abs(resid(sol.x))))
    if r > tol:
        raise EmptyShellError(f"no island centre found near {tuple(guess)} at h={h:.6f} (residual {r:.1e})")
    q1 = section_q1(params, h, sol.x[0], section.value, sol.x[1], near=q1_hint)
    return IslandCenter(e_tilde, h, PhasePoint(math.remainder(q1, 2 * math.pi), float(sol.x[0]), section.value,
                                               float(sol.x[1])), r)


def _torus_centroid(torus: Torus):
    P = torus.section_points
    return (float(np.angle(np.mean(np.exp(1j * P[:, 0])))), float(P[:, 1].mean()),
            float(np.angle(np.mean(np.exp(1j * P[:, 2])))))


def island_center_family(params, skeleton: Skeleton, e_tilde_values, section: Section | None = None) -> list:
    """Island centres continued in energy from the skeleton's island tori.

    Starts at the island torus energy closest to the grid, then follows the
    fixed point outward in both directions; stops where it is lost.
    """
    tori = [t for t in skeleton.tori if t.island]
    if not tori:
        raise EmptyShellError("skeleton has no island tori")
    grid = np.sort(np.asarray(e_tilde_values, dtype=float))
    start_torus = min(tori, key=lambda t: np.min(np.abs(grid - t.e_tilde)))
    k0 = int(np.argmin(np.abs(grid - start_torus.e_tilde)))
    guess0 = _torus_centroid(start_torus)
    out = {}
    for order in (range(k0, len(grid)), range(k0, -1, -1)):
        guess = guess0
        for k in order:
            e = float(grid[k])
            h = _to_h(skeleton.scale, e)
            try:
                c = island_center(params, h, guess, section, e_tilde=e)
            except EmptyShellError:
                break
            out[k] = c
            guess = (c.point.q2, c.point.p2, c.point.q1)
    return [out[k] for k in sorted(out)]
