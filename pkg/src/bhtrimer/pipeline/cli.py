"""Command-line entry point.

Examples:
  bhtrimer --N 50 --u 3 --v 0.1 tomography
  bhtrimer --N 40 --v 0.1 spectrum-map --u-grid 0 0.5 1 2 3 4
  bhtrimer --u 3 --config run.toml intensity-stats --exclusion husimi

Every run writes its tables and a manifest.json into
``<out-dir>/<command>-<settings hash>/``.  Config files (TOML or JSON) hold
global keys at top level and per-command keys in a table named after the
command; explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys

import numpy as np

from ..classical.chaos import LyapunovSettings, SkeletonSettings, build_skeleton
from ..classical.dynamics import Section, Tolerances, poincare_section, seed_on_shell
from ..classical.hamiltonian import energy_range, sp_energy
from ..coherent import husimi_grid, sp_overlap_all
from ..errors import TrimerError
from ..fock import ModelParams
from ..spectral import get_spectrum
from ..stability import find_thresholds, stability_table
from . import experiments as ex
from .io import Run, load_config

log = logging.getLogger("bhtrimer")

GLOBAL_DEFAULTS = {
    "N": 50, "u": 3.0, "v": 0.1, "omega": 1.0, "out_dir": "out", "seed": 0, "threads": 1, "cache_dir": None,
}



def _add_skeleton_args(p):
    p.add_argument("--n-seeds", type=int, default=20, help="trajectories per energy")
    p.add_argument("--T", type=float, default=5000.0, help="integration horizon")
    p.add_argument("--transient", type=float, default=100.0)
    p.add_argument("--lyapunov-window", type=float, default=2000.0)
    p.add_argument("--lyapunov-threshold", type=float, default=100.0, help="chaotic iff lambda * window exceeds this")
    p.add_argument("--n-energies", type=int, default=5, help="skeleton energies per window")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bhtrimer", description="Bose-Hubbard trimer spectra, phasespace and statistics.")
    ap.add_argument("--N", type=int, help="particle number")
    ap.add_argument("--u", type=float, help="interaction u = NU/Omega")
    ap.add_argument("--v", type=float, help="middle-site bias v = V/Omega")
    ap.add_argument("--omega", type=float, help="hopping Omega")
    ap.add_argument("--out-dir", help="root of the output tree")
    ap.add_argument("--config", help="TOML or JSON file with default settings")
    ap.add_argument("--seed", type=int, help="master RNG seed")
    ap.add_argument("--threads", type=int, help="parallel jobs for parameter sweeps")
    ap.add_argument("--cache-dir", help="directory for cached eigenpairs")
    ap.add_argument("-q", "--quiet", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum-map", help="bin-averaged M2/dim over (u, E~)")
    p.add_argument("--u-grid", nargs="+", type=float, default=list(np.round(np.arange(0, 4.01, 0.25), 6)))
    p.add_argument("--nbins", type=int, default=100)

    p = sub.add_parser("tomography", help="per-eigenstate moments and (E~, n2/N) maps")
    p.add_argument("--nbins", type=int, default=50)

    p = sub.add_parser("sp-track", help="S, Q_SP and M2/dim of the SP-supported state")
    p.add_argument("--u-grid", nargs="+", type=float, default=list(np.round(np.linspace(0.1, 4.0, 15), 6)))
    p.add_argument("--N-list", nargs="+", type=int, default=None)

    p = sub.add_parser("poincare", help="section crossings at p1 = 1/2")
    p.add_argument("--e-tilde", type=float, default=None, help="rescaled energy (classical scale); default E_SP")
    p.add_argument("--n-seeds", type=int, default=20)
    p.add_argument("--T", type=float, default=1000.0)
    p.add_argument("--both", action="store_true", help="record crossings of both signs")
    p.add_argument("--plane", type=float, default=0.5)

    p = sub.add_parser("husimi", help="Husimi function of one eigenstate on the section plane")
    p.add_argument("--nu", type=int, default=None)
    p.add_argument("--e-tilde", type=float, default=None, help="pick the state nearest this rescaled energy")
    p.add_argument("--sp", action="store_true", help="pick the SP-supported state")
    p.add_argument("--grid", type=int, default=60)
    p.add_argument("--mode", choices=("raw", "max"), default="raw")

    p = sub.add_parser("skeleton", help="time-averaged n2/N of chaotic and regular trajectories")
    p.add_argument("--e-grid", nargs="+", type=float, default=list(np.round(np.arange(0.05, 1.0, 0.05), 6)))
    _add_skeleton_args(p)

    p = sub.add_parser("classify", help="label eigenstates using a skeleton of both windows")
    _add_skeleton_args(p)

    p = sub.add_parser("intensity-stats", help="pooled intensity tails for HC, MC and MC-IL")
    p.add_argument("--exclusion", choices=("eigenstate", "husimi"), default="eigenstate")
    _add_skeleton_args(p)

    p = sub.add_parser("scaling", help="N-scaling of M2 for a class of eigenstates")
    p.add_argument("--N-list", nargs="+", type=int, default=[30, 40, 50, 60, 70, 80])
    p.add_argument("--state-class", choices=ex.SCALING_CLASSES, default="hard-chaotic")
    p.add_argument("--skeleton-N", type=int, default=50, help="N whose spectrum fixes the island energy scale")
    _add_skeleton_args(p)

    p = sub.add_parser("stability", help="Bogoliubov frequencies and instability thresholds")
    p.add_argument("--u-grid", nargs="+", type=float, default=list(np.round(np.linspace(0, 4, 81), 6)))
    p.add_argument("--v-list", nargs="+", type=float, default=None)
    ap.command_parsers = sub.choices
    return ap


def parse_args(argv=None) -> argparse.Namespace:
    ap = build_parser()
    first = ap.parse_args(argv)
    defaults = dict(GLOBAL_DEFAULTS)
    section = {}
    if first.config:
        cfg = load_config(first.config)
        section = {k.replace("-", "_"): v for k, v in cfg.get(first.command, {}).items()}
        defaults.update({k.replace("-", "_"): v for k, v in cfg.items() if not isinstance(v, dict)})
    args = ap.parse_args(argv)
    for key, val in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, val)
    if section:
        ap.command_parsers[first.command].set_defaults(**section)
        args = ap.parse_args(argv)
        for key, val in defaults.items():
            if getattr(args, key, None) is None:
                setattr(args, key, val)
    return args


def _params(args) -> ModelParams:
    return ModelParams(args.N, args.u, args.v, args.omega)


def _settings(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("command", "config", "quiet", "out_dir", "cache_dir", "threads")}


def _skeleton_settings(args) -> SkeletonSettings:
    lyap = LyapunovSettings(window=args.lyapunov_window, threshold=args.lyapunov_threshold)
    return SkeletonSettings(n_seeds=args.n_seeds, T=args.T, transient=args.transient, seed=args.seed, lyapunov=lyap)


def _window_skeleton(args, params, spectrum, windows):
    grid = np.concatenate([np.linspace(w[0], w[1], args.n_energies) for w in windows])
    return build_skeleton(params, grid, _skeleton_settings(args), scale=ex.quantum_scale(spectrum))


def cmd_spectrum_map(args, run):
    res = ex.spectrum_map(_params(args), args.u_grid, args.nbins, args.cache_dir, args.threads)
    run.csv("spectrum_map.csv", res.columns, res.rows)
    run.csv("e_sp_overlay.csv", ("u", "e_sp_tilde"), sorted(res.summary["e_sp_tilde"].items()))
    run.json("markers.json", res.summary["markers"])


def cmd_tomography(args, run):
    records, maps = ex.tomography(_params(args), args.nbins, args.cache_dir)
    run.csv("eigenstates.csv", ex.RECORD_FIELDS, (r.row() for r in records))
    for name, grid in maps.items():
        rows = ((i, j, (i + 0.5) / args.nbins, (j + 0.5) / args.nbins, grid[i, j])
                for i in range(grid.shape[0]) for j in range(grid.shape[1]) if not math.isnan(grid[i, j]))
        run.csv(f"map_{name}.csv", ("e_bin", "n2_bin", "e_tilde", "n2", name), rows)


def cmd_sp_track(args, run):
    Ns = args.N_list or [args.N]
    res = ex.sp_track(args.v, args.u_grid, Ns, args.omega, args.cache_dir, args.threads)
    cols = ("u", "N", "nu", "e_tilde", "S", "Q_sp", "m2_over_dim", "ratio")
    run.csv("sp_track.csv", cols, ((getattr(m, c) for c in cols) for m in res))


def cmd_poincare(args, run):
    params = _params(args)
    if args.e_tilde is None:
        E = params.N * sp_energy(params)
    else:
        lo, hi = energy_range(params)
        E = params.N * (lo + args.e_tilde * (hi - lo))
    seeds = seed_on_shell(params, E, args.n_seeds, np.random.default_rng(args.seed), plane=args.plane)
    sps, trajs = poincare_section(seeds, params, E, args.T, Tolerances(), Section(args.plane, args.both))
    run.csv("crossings.csv", ("trajectory", "t", "q2", "p2", "q1", "mean_p1"), sps.rows())
    run.csv("trajectories.csv", ("trajectory", "q1", "q2", "p1", "p2", "mean_p1", "mean_p2", "energy_drift", "status"),
            ((i, *t.initial.as_array(), t.mean_p1, t.mean_p2, t.energy_drift, t.status) for i, t in enumerate(trajs)))


def cmd_husimi(args, run):
    s = get_spectrum(_params(args), args.cache_dir)
    if args.sp:
        nu = sp_overlap_all(s)[0]
    elif args.nu is not None:
        nu = args.nu
    elif args.e_tilde is not None:
        nu = int(np.argmin(np.abs(s.rescaled - args.e_tilde)))
    else:
        raise TrimerError("choose a state with --nu, --e-tilde or --sp")
    q2 = np.linspace(-math.pi, math.pi, args.grid)
    p2 = np.linspace(0.0, 0.5, args.grid)
    g = husimi_grid(s, nu, q2, p2, mode=args.mode)
    run.csv("husimi.csv", ("q2", "p2", "q1", "Q"), g.rows())
    run.json("husimi_meta.json", g.metadata())


def cmd_skeleton(args, run):
    params = _params(args)
    s = get_spectrum(params, args.cache_dir)
    sk = build_skeleton(params, args.e_grid, _skeleton_settings(args), scale=ex.quantum_scale(s))
    run.csv("skeleton.csv", ("e_tilde", "n2", "label"), sk.rows())
    run.csv("tori.csv", ("torus", "e_tilde", "h", "mean_p1", "mean_p2", "lyapunov", "island", "q2", "p2", "q1"),
            ((i, t.e_tilde, t.h, t.mean_p1, t.mean_p2, t.lyapunov, t.island, *row[:3])
             for i, t in enumerate(sk.tori) for row in t.section_points))


def cmd_classify(args, run):
    params = _params(args)
    s = get_spectrum(params, args.cache_dir)
    th = ex.Thresholds()
    sk = _window_skeleton(args, params, s, (th.hc_window, th.mc_window))
    records, _ = ex.classify_states(params, sk, th, spectrum=s)
    run.csv("eigenstates.csv", ex.RECORD_FIELDS, (r.row() for r in records))
    run.json("label_counts.json", ex.label_counts(records))


def cmd_intensity(args, run):
    params = _params(args)
    s = get_spectrum(params, args.cache_dir)
    th = ex.Thresholds()
    sk = _window_skeleton(args, params, s, (th.mc_window,))
    suite = ex.intensity_suite(params, sk, args.exclusion, th, spectrum=s)
    run.csv("tails.csv", ("group", "x", "tail", "porter_thomas"), suite.tail_rows())
    run.csv("lineshapes.csv", ("group", "rank", "intensity"),
            ((n, k + 1, v) for n, g in suite.groups.items() for k, v in enumerate(g.lineshape)))
    run.json("groups.json", {n: {"members": len(g.members), "n_eff": g.n_eff, "tail_at_10": g.tail.at(10.0)}
                             for n, g in suite.groups.items()})


def cmd_scaling(args, run):
    sk = None
    if args.state_class == ex.ISLAND:
        params = ModelParams(args.skeleton_N, args.u, args.v, args.omega)
        s = get_spectrum(params, args.cache_dir)
        sk = _window_skeleton(args, params, s, (ex.Thresholds().mc_window,))
    res = ex.scaling_study(args.v, args.u, args.N_list, args.state_class, sk, omega=args.omega, cache_dir=args.cache_dir)
    run.csv("scaling.csv", ("N", "M2", "ratio"), zip(res.N, res.M2, res.ratio))
    run.json("fit.json", {"state_class": res.state_class, "slope": res.fit.slope, "intercept": res.fit.intercept,
                          "residual": res.fit.residual, "skipped": res.skipped})


def cmd_stability(args, run):
    vs = args.v_list or [args.v]
    reports = stability_table(args.u_grid, vs)
    run.csv("stability.csv", ("u", "v", "re_omega_plus", "im_omega_plus", "re_omega_minus", "im_omega_minus", "verdict"),
            (r.row() for r in reports))
    th = {}
    for v in vs:
        try:
            th[str(v)] = find_thresholds(v)
        except TrimerError as exc:
            th[str(v)] = str(exc)
    run.json("thresholds.json", th)


COMMANDS = {
    "spectrum-map": cmd_spectrum_map,
    "tomography": cmd_tomography,
    "sp-track": cmd_sp_track,
    "poincare": cmd_poincare,
    "husimi": cmd_husimi,
    "skeleton": cmd_skeleton,
    "classify": cmd_classify,
    "intensity-stats": cmd_intensity,
    "scaling": cmd_scaling,
    "stability": cmd_stability,
}


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    run = Run(args.out_dir, args.command, _settings(args))
    try:
        COMMANDS[args.command](args, run)
    except TrimerError as exc:
        log.error("%s", exc)
        return 2
    path = run.finish()
    if not args.quiet:
        print(f"wrote {run.directory} ({len(run.outputs)} tables, manifest {path.name})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
