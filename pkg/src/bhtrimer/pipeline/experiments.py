"""Experiment drivers: spectrum maps, eigenstate tomography, SP tracking,
eigenstate classification, intensity statistics and N-scaling."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ..classical.chaos import (
    Skeleton,
    SkeletonSettings,
    build_skeleton,
    island_center_family,
    island_coherent_set,
)
from ..classical.hamiltonian import energy_range
from ..coherent import (
    PhasePoint,
    fock_amplitudes,
    one_particle_density,
    phasepoint_to_spinor,
    purity,
    section_q1,
    site_expectations,
    sp_overlap_all,
)
from ..errors import EmptyShellError, InvalidArgument
from ..fock import ModelParams
from ..measures import fit_scaling, goe_baseline, inverse_cumulative, moments_batch
from ..spectral import bin_average, energy_shell, get_spectrum
from ..stability import find_thresholds

log = logging.getLogger(__name__)

HARD_CHAOTIC = "hard-chaotic"
MIXED_CHAOTIC = "mixed-chaotic"
ISLAND = "island"
SP_SUPPORTED = "SP-supported"
HYBRID = "hybrid"
REGULAR_EDGE = "regular-edge"
LABELS = (HARD_CHAOTIC, MIXED_CHAOTIC, ISLAND, SP_SUPPORTED, HYBRID, REGULAR_EDGE)

CHAOS_ONSET_U = 1.1  # annotation for the map, not recomputed
_CHUNK = 256


@dataclass(frozen=True)
class Thresholds:
    """Classification thresholds; defaults split the island and chaotic exemplars."""

    hc_window: tuple = (0.35, 0.45)
    mc_window: tuple = (0.55, 0.65)
    q_high: float = 0.5
    q_low: float = 0.1
    m2_low: float = 1.0 / 3.0  # fraction of the shell's GOE participation
    m2_high: float = 0.8
    exclusion_q: float = 0.1
    husimi_mass: float = 0.5


@dataclass
class EigenstateRecord:
    nu: int
    E: float
    e_tilde: float
    n2: float
    M2: float
    M10: float
    ratio: float
    Q_sp: float
    Q_island: float = float("nan")
    label: str = REGULAR_EDGE

    def row(self):
        return tuple(asdict(self).values())


RECORD_FIELDS = tuple(EigenstateRecord.__dataclass_fields__)


@dataclass
class SweepResult:
    axis: str
    values: list
    rows: list
    columns: tuple
    summary: dict = field(default_factory=dict)
    settings: dict = field(default_factory=dict)


def _map(fn, items, threads: int = 1):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def quantum_scale(spectrum) -> tuple[float, float]:
    """Per-particle ``(E_min, E_max) / N`` of a spectrum."""
    N = spectrum.params.N
    return float(spectrum.energies[0]) / N, float(spectrum.energies[-1]) / N


# -- spectrum map ------------------------------------------------------------


def spectrum_map(params: ModelParams, u_values, nbins: int = 100, cache_dir=None, threads: int = 1) -> SweepResult:
    """Bin-averaged ``M2 / dim`` on a ``(u, E~)`` grid with the ``E_SP`` overlay."""
    u_values = [float(u) for u in u_values]
    if not all(math.isfinite(u) for u in u_values):
        raise InvalidArgument("u grid must be finite")

    def one(u):
        s = get_spectrum(params.with_(u=u), cache_dir)
        m2 = moments_batch(s.eigenvectors, (2,))[2] / s.size
        means, counts = bin_average(s, nbins, m2, return_counts=True)
        e_sp = s.scale()(params.N * u / 4 * params.omega) if s.size > 1 else float("nan")
        return means, counts, float(e_sp)

    results = _map(one, u_values, threads)
    rows = []
    overlay = {}
    for u, (means, counts, e_sp) in zip(u_values, results):
        overlay[u] = e_sp
        for b in range(nbins):
            rows.append((u, b, (b + 0.5) / nbins, float(means[b]), int(counts[b])))
    markers = {"lower_threshold": 2 * params.v, "chaos_onset": CHAOS_ONSET_U}
    try:
        markers["upper_threshold"] = find_thresholds(params.v)[1]
    except InvalidArgument:
        markers["upper_threshold"] = float("nan")
    return SweepResult(
        "u", u_values, rows, ("u", "bin", "e_tilde", "mean_m2_over_dim", "count"),
        {"e_sp_tilde": overlay, "markers": markers}, {"nbins": nbins},
    )


def band_mean(spectrum, values, window) -> float:
    et = spectrum.rescaled
    sel = (et >= window[0]) & (et <= window[1])
    if not sel.any():
        raise EmptyShellError(f"no eigenstates in {window}")
    return float(np.mean(np.asarray(values)[sel]))


def sp_bin_contrast(spectrum, values, nbins: int = 100):
    """``(bin, mean_in_bin, left_neighbor, right_neighbor)`` around the bin holding ``E_SP``."""
    p = spectrum.params
    means = bin_average(spectrum, nbins, values)
    e = float(spectrum.scale()(p.N * p.u * p.omega / 4))
    b = int(np.clip(math.floor(e * nbins), 1, nbins - 2))
    return b, float(means[b]), float(means[b - 1]), float(means[b + 1])


# -- tomography --------------------------------------------------------------


def tomography(params: ModelParams, nbins: int = 50, cache_dir=None, spectrum=None):
    """Per-eigenstate table and ``(E~, n2/N)`` bin maps of ``M2/dim``, ``M10/dim`` and ``M10/M2``."""
    s = spectrum if spectrum is not None else get_spectrum(params, cache_dir)
    m = moments_batch(s.eigenvectors, (2, 10))
    nu_star, Q = sp_overlap_all(s)
    n2 = site_expectations(s)[:, 1]
    et = s.rescaled
    records = [
        EigenstateRecord(
            i, float(s.energies[i]), float(et[i]), float(n2[i]), float(m[2][i]), float(m[10][i]),
            float(m[10][i] / m[2][i]), float(Q[i]),
            label=SP_SUPPORTED if i == nu_star else REGULAR_EDGE,
        )
        for i in range(s.size)
    ]
    maps = {}
    ie = np.clip((et * nbins).astype(int), 0, nbins - 1)
    iy = np.clip((n2 * nbins).astype(int), 0, nbins - 1)
    for name, val in (("m2", m[2] / s.size), ("m10", m[10] / s.size), ("ratio", m[10] / m[2])):
        tot = np.zeros((nbins, nbins))
        cnt = np.zeros((nbins, nbins))
        np.add.at(tot, (ie, iy), val)
        np.add.at(cnt, (ie, iy), 1)
        with np.errstate(invalid="ignore"):
            maps[name] = np.where(cnt > 0, tot / np.maximum(cnt, 1), np.nan)
    return records, maps


# -- SP tracking -------------------------------------------------------------


@dataclass
class SPMeasure:
    u: float
    N: int
    nu: int
    e_tilde: float
    S: float
    Q_sp: float
    m2_over_dim: float
    ratio: float


def sp_measures(spectrum) -> SPMeasure:
    p = spectrum.params
    nu, Q = sp_overlap_all(spectrum)
    m = moments_batch(spectrum.eigenvectors[:, [nu]], (2, 10))
    S = purity(one_particle_density(spectrum, nu))
    return SPMeasure(
        p.u, p.N, nu, float(spectrum.rescaled[nu]), S, float(Q[nu]),
        float(m[2][0] / spectrum.size), float(m[10][0] / m[2][0]),
    )


def sp_track(v: float, u_values, N_values, omega: float = 1.0, cache_dir=None, threads: int = 1) -> list[SPMeasure]:
    """Purity, dark-state overlap and participation of the SP-supported eigenstate."""
    jobs = [(float(u), int(N)) for N in N_values for u in u_values]
    return _map(lambda j: sp_measures(get_spectrum(ModelParams(j[1], j[0], v, omega), cache_dir)), jobs, threads)


# -- island projection and classification -------------------------------------


def island_projection(spectrum, coherent_states, members=None) -> np.ndarray:
    """Mean squared overlap of each eigenstate with a set of coherent states."""
    V = spectrum.eigenvectors if members is None else spectrum.eigenvectors[:, members]
    acc = np.zeros(V.shape[1])
    cs = list(coherent_states)
    if not cs:
        raise EmptyShellError("empty coherent-state set")
    for k in range(0, len(cs), _CHUNK):
        A = np.array([fock_amplitudes(c.spinor, spectrum.basis) for c in cs[k:k + _CHUNK]])
        acc += (np.abs(np.conj(A) @ V) ** 2).sum(axis=0)
    return acc / len(cs)


def normalized_island_q(spectrum, coherent_states, members) -> np.ndarray:
    """Island projection rescaled so the largest value in the shell is 1."""
    q = island_projection(spectrum, coherent_states, members)
    return q / q.max()


def default_skeleton(params: ModelParams, window, scale, settings: SkeletonSettings | None = None,
                     n_energies: int = 4) -> Skeleton:
    grid = np.linspace(window[0], window[1], n_energies)
    return build_skeleton(params, grid, settings or SkeletonSettings(), scale=scale)


def _window_has_chaos(skeleton: Skeleton | None, window) -> bool:
    if skeleton is None:
        return False
    cells = [c for c in skeleton.cells if window[0] - 1e-12 <= c.e_tilde <= window[1] + 1e-12]
    return any(c.has_chaos for c in cells)


def classify_states(params: ModelParams, skeleton: Skeleton | None, thresholds: Thresholds | None = None,
                    cache_dir=None, spectrum=None, max_points: int = 1000):
    """Label every eigenstate.

    The SP-supported state is the maximum of the dark-state overlap.  Windows
    count as chaotic only if the skeleton found chaotic trajectories there.
    In the hard-chaos window every state is hard-chaotic; in the mixed window
    states split into island (high island overlap, low ``M2``), mixed-chaotic
    (low overlap, high ``M2``) and hybrid (the rest).  Everything else is
    regular-edge.  Returns ``(records, shell)`` where ``shell`` is the mixed
    window's energy shell (or None).
    """
    th = thresholds or Thresholds()
    s = spectrum if spectrum is not None else get_spectrum(params, cache_dir)
    records, _ = tomography(params, spectrum=s, nbins=10)
    et = s.rescaled
    nu_star = int(np.argmax([r.Q_sp for r in records]))
    hc_chaos = _window_has_chaos(skeleton, th.hc_window)
    mc_chaos = _window_has_chaos(skeleton, th.mc_window)
    shell = None
    if mc_chaos:
        shell = energy_shell(s, th.mc_window)
        try:
            cs = island_coherent_set(params, skeleton=skeleton, window=th.mc_window, max_points=max_points)
            q = normalized_island_q(s, cs, shell.members)
        except EmptyShellError:
            log.warning("no island tori in the mixed window; Q_island set to 0")
            q = np.zeros(len(shell.members))
        goe = goe_baseline(2, shell.n_eff)
        for k, nu in enumerate(shell.members):
            r = records[nu]
            r.Q_island = float(q[k])
            if r.Q_island >= th.q_high and r.M2 <= th.m2_low * goe:
                r.label = ISLAND
            elif r.Q_island < th.q_low and r.M2 > th.m2_high * goe:
                r.label = MIXED_CHAOTIC
            else:
                r.label = HYBRID
    for r in records:
        if hc_chaos and th.hc_window[0] <= et[r.nu] <= th.hc_window[1]:
            r.label = HARD_CHAOTIC
        elif not (mc_chaos and th.mc_window[0] <= et[r.nu] <= th.mc_window[1]):
            r.label = REGULAR_EDGE
    records[nu_star].label = SP_SUPPORTED
    return records, shell


def label_counts(records) -> dict:
    out = dict.fromkeys(LABELS, 0)
    for r in records:
        out[r.label] += 1
    return out


# -- intensity statistics ------------------------------------------------------


def island_region_mask(island_points, q2_grid, p2_grid, radius: float) -> np.ndarray:
    """Grid cells within ``radius`` (in ``(q2/pi, 2 p2)`` units) of a torus section point."""
    G = np.column_stack([q2_grid.ravel() / math.pi, 2 * p2_grid.ravel()])
    P = np.column_stack([island_points[:, 0] / math.pi, 2 * island_points[:, 1]])
    # periodic in q2
    d = np.abs(G[:, None, 0] - P[None, :, 0])
    d = np.minimum(d, 2 - d)
    dist = np.sqrt(d**2 + (G[:, None, 1] - P[None, :, 1]) ** 2)
    return (dist.min(axis=1) <= radius).reshape(q2_grid.shape)


def husimi_island_mass(spectrum, members, island_points, h: float, n: int = 40) -> np.ndarray:
    """Fraction of each member's section-plane Husimi weight inside the island region.

    The section is evaluated at one per-particle energy ``h`` for the whole shell.
    """
    params = spectrum.params
    q2v = np.linspace(-math.pi, math.pi, n, endpoint=False)
    p2v = (np.arange(n) + 0.5) / (2 * n)
    Q2, P2 = np.meshgrid(q2v, p2v, indexing="ij")
    mask = island_region_mask(island_points, Q2, P2, radius=1.5 / n)
    amps, inside = [], []
    for k in np.ndindex(Q2.shape):
        q1 = section_q1(params, h, Q2[k], 0.5, P2[k])
        if q1 is None:
            continue
        amps.append(fock_amplitudes(phasepoint_to_spinor(PhasePoint(q1, Q2[k], 0.5, P2[k])).spinor, spectrum.basis))
        inside.append(mask[k])
    if not amps:
        raise EmptyShellError("section plane does not meet the energy surface")
    A = np.array(amps)
    inside = np.array(inside)
    W = np.abs(np.conj(A) @ spectrum.eigenvectors[:, members]) ** 2
    return W[inside].sum(axis=0) / W.sum(axis=0)


@dataclass
class IntensityGroup:
    name: str
    members: np.ndarray
    n_eff: float
    tail: object
    lineshape: np.ndarray


@dataclass
class IntensitySuite:
    groups: dict
    exclusion: str
    excluded: np.ndarray

    def tail_rows(self):
        for name, g in self.groups.items():
            for x, t, pt in g.tail.rows():
                yield name, float(x), float(t), float(pt)


def intensity_suite(params: ModelParams, skeleton: Skeleton | None = None, exclusion: str = "eigenstate",
                    thresholds: Thresholds | None = None, cache_dir=None, spectrum=None,
                    thresholds_x=None, max_points: int = 1000) -> IntensitySuite:
    """Pooled inverse-cumulative intensity distributions for the HC, MC and MC-IL groups.

    ``exclusion="eigenstate"`` removes states whose normalized island overlap
    exceeds ``thresholds.exclusion_q``; ``"husimi"`` removes states with more
    than ``thresholds.husimi_mass`` of their section Husimi weight in the
    island region.
    """
    from ..measures import DEFAULT_THRESHOLDS, sorted_lineshape, profile_from_vector

    if exclusion not in ("eigenstate", "husimi"):
        raise InvalidArgument(f"unknown exclusion mode {exclusion!r}")
    th = thresholds or Thresholds()
    xs = np.union1d(DEFAULT_THRESHOLDS, [1.0, 10.0]) if thresholds_x is None else np.asarray(thresholds_x)
    s = spectrum if spectrum is not None else get_spectrum(params, cache_dir)
    hc = energy_shell(s, th.hc_window)
    mc = energy_shell(s, th.mc_window)
    if skeleton is None:
        raise InvalidArgument("the MC-IL group needs a skeleton with island tori")
    tori = [t for t in skeleton.tori if t.island and th.mc_window[0] <= t.e_tilde <= th.mc_window[1]]
    if not tori:
        raise EmptyShellError("no island tori in the mixed window")
    if exclusion == "eigenstate":
        cs = island_coherent_set(params, skeleton=skeleton, window=th.mc_window, max_points=max_points)
        q = normalized_island_q(s, cs, mc.members)
        drop = q > th.exclusion_q
    else:
        pts = np.concatenate([t.section_points for t in tori])
        h = float(np.mean(s.energies[mc.members])) / params.N
        drop = husimi_island_mass(s, mc.members, pts, h) > th.husimi_mass
    keep = mc.members[~drop]
    if keep.size == 0:
        raise EmptyShellError("island exclusion removed every state")

    def group(name, shell, members):
        tail = inverse_cumulative(s, shell, members, xs)
        shapes = [sorted_lineshape(profile_from_vector(s.eigenvectors[:, i])) for i in members]
        L = min(len(x) for x in shapes)
        return IntensityGroup(name, np.asarray(members), shell.n_eff, tail, np.mean([x[:L] for x in shapes], axis=0))

    groups = {"HC": group("HC", hc, hc.members), "MC": group("MC", mc, mc.members), "MC-IL": group("MC-IL", mc, keep)}
    return IntensitySuite(groups, exclusion, mc.members[drop])


# -- N scaling ---------------------------------------------------------------


SCALING_CLASSES = ("hard-chaotic", "mixed-chaotic", "island", "SP-supported")


@dataclass
class ScalingStudy:
    state_class: str
    N: list
    M2: list
    ratio: list
    fit: object
    skipped: list


def _class_members(spectrum, state_class, th: Thresholds, centers):
    if state_class == HARD_CHAOTIC:
        return energy_shell(spectrum, th.hc_window).members
    if state_class == MIXED_CHAOTIC:
        return energy_shell(spectrum, th.mc_window).members
    if state_class == SP_SUPPORTED:
        return np.array([sp_overlap_all(spectrum)[0]])
    return island_picks(spectrum, centers)


def island_picks(spectrum, centers) -> np.ndarray:
    """Eigenstate of maximal overlap with a minimal wavepacket at each island centre.

    One pick per centre; repeated picks are kept so that the mean weights
    each centre equally.
    """
    N = spectrum.params.N
    picks = []
    for c in centers:
        amp = fock_amplitudes(phasepoint_to_spinor(c.point, N).spinor, spectrum.basis)
        picks.append(int(np.argmax(np.abs(np.conj(amp) @ spectrum.eigenvectors) ** 2)))
    return np.array(picks, dtype=int)


def scaling_study(v: float, u: float, N_values, state_class: str, skeleton: Skeleton | None = None,
                  thresholds: Thresholds | None = None, omega: float = 1.0, cache_dir=None,
                  n_centers: int = 11):
    """``ln M2`` versus ``ln N`` for a class of eigenstates, and ``M10/M2`` versus ``N``.

    Chaotic classes pool their energy window and the SP class follows the
    SP-supported state.  For the island class a single max-overlap pick is
    erratic in ``N``, so ``M2`` is averaged over the picks for a family of
    island centres spread across the mixed window (same classical points at
    every ``N``).
    """
    if state_class not in SCALING_CLASSES:
        raise InvalidArgument(f"unknown state class {state_class!r}")
    if len(N_values) < 3:
        raise InvalidArgument("need at least three particle numbers")
    th = thresholds or Thresholds()
    centers = None
    if state_class == ISLAND:
        if skeleton is None:
            raise InvalidArgument("the island class needs a skeleton")
        grid = np.linspace(th.mc_window[0], th.mc_window[1], n_centers)
        centers = island_center_family(skeleton.params, skeleton, grid)
        if not centers:
            raise EmptyShellError("no island centres in the mixed window")

    Ns, M2, ratio, skipped = [], [], [], []
    for N in N_values:
        s = get_spectrum(ModelParams(int(N), u, v, omega), cache_dir)
        members = _class_members(s, state_class, th, centers)
        if len(members) == 0:
            log.warning("class %s absent at N=%d; point skipped", state_class, N)
            skipped.append(int(N))
            continue
        m = moments_batch(s.eigenvectors[:, members], (2, 10))
        Ns.append(int(N))
        M2.append(float(np.mean(m[2])))
        ratio.append(float(np.mean(m[10] / m[2])))
    fit = fit_scaling(zip(Ns, M2))
    return ScalingStudy(state_class, Ns, M2, ratio, fit, skipped)


def island_skeleton(params: ModelParams, window=(0.55, 0.65), settings: SkeletonSettings | None = None,
                    n_energies: int = 4, scale=None) -> Skeleton:
    """Skeleton restricted to the mixed window; per-particle scale defaults to the classical one."""
    scale = scale if scale is not None else energy_range(params)
    return default_skeleton(params, window, scale, settings, n_energies)
