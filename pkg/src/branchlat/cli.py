"""Command-line interface: generation, single experiments, figure reproduction.

Exit codes: 0 success, 2 configuration/usage error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional

import numpy as np

from .ensemble import (ExperimentConfig, ResultSet, append_fit, read_config,
                       read_results, run_experiment, seed_stream, write_results)
from .lattice import (ConfigurationError, LatticeSpec, annotate_lattice,
                      build_lattice, compute_capacities, serialize_lattice)
from .percolation import fill_trajectory
from .statsfit import (DEFAULT_LOG_BASE, best_scan_chi2, fit_gaussian,
                       fit_power_law, fit_size_scaling, histogram,
                       scan_power_law, small_t_fits)

# published reference values that `reproduce` compares against
ALPHA_SMALL_WEIGHT = 1.18          # avalanche-time exponent at 5% of trunk capacity
ALPHA_FIFTH_WEIGHT = 2.96          # exponent at 20% of trunk capacity
PHI_BY_Q = {0.05: 0.0019, 0.15: 0.0023, 0.25: 0.0029,
            0.35: 0.0059, 0.45: 0.0079, 0.50: 0.011}

FIGURE_IDS = ("fig2a", "fig2b", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8")


def _add_lattice_flags(p: argparse.ArgumentParser, merged: bool = False) -> None:
    # merged subcommands leave defaults to _merge_config so that a config
    # file's values are only overridden by flags the user actually typed
    p.add_argument("--family", choices=("base", "v", "perturbed-v"),
                   default=None if merged else "v",
                   help="lattice family (default v)")
    p.add_argument("--size", type=int, default=None,
                   help="square lattice side (sets width and depth)")
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--p", type=float, default=None,
                   help="left-connection probability (base family)")
    p.add_argument("--q", type=float, default=None,
                   help="flip probability (perturbed-v family)")


def _lattice_dims(args, required: bool = True) -> tuple[Optional[int], Optional[int]]:
    width = args.width if args.width is not None else args.size
    depth = args.depth if args.depth is not None else args.size
    if required and (width is None or depth is None):
        raise ConfigurationError("need --size or both --width and --depth")
    return width, depth


def _resolve_seed(args) -> int:
    if args.seed is None:
        print("warning: no --seed given, defaulting to 0", file=sys.stderr)
        return 0
    return args.seed


def _merge_config(args, kind: str, defaults: Optional[dict] = None,
                  **kind_fields) -> ExperimentConfig:
    """Build an ExperimentConfig: file values, then typed flags, then defaults."""
    base: dict = {}
    if getattr(args, "config", None):
        file_cfg = read_config(args.config)
        base = {f: getattr(file_cfg, f) for f in (
            "kind", "family", "width", "depth", "p", "q", "fraction", "mu_max",
            "mu_step", "sides", "q_list", "realizations", "master_seed",
            "motion_rule", "deposit_rule", "connectivity", "strict_failure",
            "max_cycles", "output")}
    base["kind"] = kind
    for key, val in kind_fields.items():
        if val is not None:
            base[key] = val
    for key, val in (defaults or {}).items():
        base.setdefault(key, val)
        if base[key] is None:
            base[key] = val
    return ExperimentConfig(**base)


def _write_xy(path: str, xs, ys, header: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {header}\n")
        for x, y in zip(xs, ys):
            fh.write(f"{x} {y}\n")


def _samples_from_result(result: ResultSet) -> np.ndarray:
    if "samples" not in result.tables:
        raise ConfigurationError("result file has no avalanche samples table")
    header, rows = result.tables["samples"]
    t_idx = header.index("time")
    s_idx = header.index("success")
    return np.array([row[t_idx] for row in rows if row[s_idx]], dtype=float)


# ---------------------------------------------------------------------------
# subcommands

def cmd_generate(args) -> int:
    width, depth = _lattice_dims(args)
    spec = LatticeSpec(width=width, depth=depth, family=args.family,
                       p=args.p, q=args.q, seed=_resolve_seed(args))
    lat = build_lattice(spec)
    caps = compute_capacities(lat)
    text = serialize_lattice(lat, caps)
    if args.annotate:
        text += annotate_lattice(lat, caps)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.output}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_avalanche(args) -> int:
    width, depth = _lattice_dims(args, required=not args.config)
    cfg = _merge_config(
        args, "avalanche", defaults={"family": "v", "realizations": 1000},
        family=args.family, width=width, depth=depth,
        p=args.p, q=args.q, fraction=args.fraction,
        realizations=args.realizations, master_seed=_resolve_seed(args),
        strict_failure=args.strict_failure or None, output=args.output)
    result = run_experiment(cfg, workers=args.workers)
    out = args.output or "avalanche_result.txt"
    write_results(result, out)
    print(f"wrote {out} ({cfg.realizations} realizations, "
          f"{result.aggregates['success_count']} successes)")
    return 0


def cmd_percolate(args) -> int:
    width, depth = _lattice_dims(args)
    seed = _resolve_seed(args)
    spec = LatticeSpec(width=width, depth=depth, family=args.family,
                       p=args.p, q=args.q,
                       seed=int(seed_stream(seed, 0)))
    lat = build_lattice(spec)
    caps = compute_capacities(lat)
    n_max = args.n_max if args.n_max is not None else int(caps.flat.sum())
    traj = fill_trajectory(lat, caps, n_max, int(seed_stream(seed, 1)),
                           motion_rule=args.motion_rule,
                           deposit_rule=args.deposit_rule,
                           connectivity=args.connectivity)
    out = args.output or "trajectory.csv"
    L = lat.n_sites
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("n,mu,s,s1\n")
        points = [0] + traj.event_ns.tolist() + [n_max]
        for n in sorted(set(points)):
            s = traj.s_at(n)
            fh.write(f"{n},{n / L!r},{s!r},{1.0 - s!r}\n")
    jr = traj.largest_jump()
    print(f"wrote {out} (events={len(traj.event_ns)}, settled={traj.settled}, "
          f"discarded={traj.discarded}, largest jump dS1={jr.d_s1:.4f} at mu={jr.mu_c:.3f})")
    return 0


def cmd_sweep(args) -> int:
    width, depth = _lattice_dims(args, required=not args.config)
    cfg = _merge_config(
        args, "percolation-sweep", defaults={"family": "v", "realizations": 500},
        family=args.family, width=width, depth=depth,
        p=args.p, q=args.q, mu_max=args.mu_max, mu_step=args.mu_step,
        realizations=args.realizations, master_seed=_resolve_seed(args),
        motion_rule=args.motion_rule, deposit_rule=args.deposit_rule,
        connectivity=args.connectivity, output=args.output)
    result = run_experiment(cfg, workers=args.workers)
    out = args.output or "sweep_result.txt"
    write_results(result, out)
    print(f"wrote {out} (mean jump {result.aggregates['mean_jump']:.4f}, "
          f"max grid drop {result.aggregates['max_grid_drop']:.4f})")
    return 0


def cmd_jumpscale(args) -> int:
    cfg = _merge_config(
        args, "jump-scaling", defaults={"realizations": 200},
        sides=tuple(args.sizes) if args.sizes else None,
        q_list=tuple(args.q_values) if args.q_values else None,
        realizations=args.realizations, master_seed=_resolve_seed(args),
        motion_rule=args.motion_rule, deposit_rule=args.deposit_rule,
        connectivity=args.connectivity, output=args.output)
    result = run_experiment(cfg, workers=args.workers)
    out = args.output or "jumpscale_result.txt"
    write_results(result, out)
    for q, phi, stderr, chi2, weak in result.tables["fits"][1]:
        print(f"q={q:<5} phi={phi:+.5f} +- {stderr:.5f} chi2={chi2:.3g} "
              f"weakly_discontinuous={bool(weak)}")
    print(f"wrote {out}")
    return 0


def cmd_fit(args) -> int:
    result = read_results(args.input)
    if args.kind == "powerlaw":
        samples = _samples_from_result(result)
        hist = histogram(samples, scheme="log", base=args.base)
        if args.window:
            lo, hi = (float(x) for x in args.window.split(":"))
            fit = fit_power_law(hist, (lo, hi))
            print(f"alpha = {fit.alpha:.4f}  amplitude = {fit.amplitude:.4g}  "
                  f"chi2 = {fit.chi2:.4g}  window = [{lo}, {hi}]  "
                  f"points = {fit.n_points}")
            if args.append:
                append_fit(args.input, "powerlaw", {
                    "alpha": fit.alpha, "amplitude": fit.amplitude,
                    "chi2": fit.chi2, "window_lo": lo, "window_hi": hi,
                    "points": fit.n_points})
        print("window scan (start..end bins: alpha, reduced chi2):")
        for w in small_t_fits(hist):
            print(f"  bins {w.start_bin}..{w.end_bin}  t in [{w.t_lo:.1f}, {w.t_hi:.1f}]  "
                  f"alpha={w.fit.alpha:.3f}  chi2_red={w.fit.chi2_reduced:.4g}")
        full = scan_power_law(hist, min_bins=args.min_bins)
        if full:
            best = min(full, key=lambda w: w.fit.chi2_reduced)
            print(f"best >= {args.min_bins}-bin window: alpha={best.fit.alpha:.3f} "
                  f"chi2_red={best.fit.chi2_reduced:.4g} "
                  f"t in [{best.t_lo:.1f}, {best.t_hi:.1f}]")
        else:
            print(f"no window with >= {args.min_bins} nonempty bins")
    elif args.kind == "gaussian":
        samples = _samples_from_result(result)
        fit = fit_gaussian(samples)
        print(f"mean = {fit.mean:.4f}  sd = {fit.sd:.4f}  "
              f"chi2_red = {fit.chi2_reduced:.4f}  skewness = {fit.skewness:.4f}  "
              f"excess_kurtosis = {fit.excess_kurtosis:.4f}  modes = {fit.n_modes}")
        print(f"gaussian_like = {fit.is_gaussian_like()}")
        if args.append:
            append_fit(args.input, "gaussian", {
                "mean": fit.mean, "sd": fit.sd,
                "chi2_reduced": fit.chi2_reduced, "skewness": fit.skewness,
                "excess_kurtosis": fit.excess_kurtosis, "modes": fit.n_modes})
    else:  # scaling
        if "scaling" not in result.tables:
            raise ConfigurationError("result file has no scaling table")
        header, rows = result.tables["scaling"]
        qs = sorted({row[0] for row in rows})
        for q in qs:
            pts = [(row[2], row[3]) for row in rows if row[0] == q]
            fit = fit_size_scaling(pts)
            print(f"q={q}: phi = {fit.phi:+.5f} +- {fit.stderr:.5f}  "
                  f"chi2 = {fit.chi2:.4g}  "
                  f"weakly_discontinuous = {fit.weakly_discontinuous}")
            if args.append:
                append_fit(args.input, f"scaling_q{q}", {
                    "phi": fit.phi, "stderr": fit.stderr, "chi2": fit.chi2,
                    "weakly_discontinuous": fit.weakly_discontinuous})
    return 0


# ---------------------------------------------------------------------------
# figure reproduction

def _scaled_r(r: int, scale: float, floor: int = 2) -> int:
    return max(floor, int(round(r * scale)))


def _scaled_side(side: int, scale: float, floor: int = 8) -> int:
    return max(floor, int(round(side * scale)))


def _report(label: str, value: float, lo: float, hi: float, scaled: bool) -> None:
    status = "pass" if lo <= value <= hi else "warn"
    if scaled:
        status += " (scaled run, reference band indicative only)"
    print(f"{label}: {value:.4g}  [reference band {lo:.4g}..{hi:.4g}]  {status}")


def _avalanche_fig(outdir: str, name: str, spec_kw: dict, fraction: float,
                   realizations: int, seed: int, workers: Optional[int],
                   scale: float) -> tuple[ResultSet, np.ndarray]:
    cfg = ExperimentConfig(kind="avalanche", fraction=fraction,
                           realizations=_scaled_r(realizations, scale),
                           master_seed=seed, **spec_kw)
    result = run_experiment(cfg, workers=workers)
    path = f"{outdir}/{name}_result.txt"
    write_results(result, path)
    samples = _samples_from_result(result)
    hist = histogram(samples, scheme="log")
    keep = hist.counts > 0
    _write_xy(f"{outdir}/{name}_pt.dat", hist.centers[keep], hist.density[keep],
              "t  P(t)   (log-binned density)")
    return result, samples


def _small_t_fit(samples, band: tuple[float, float], max_chi2_red: float = 0.05):
    """The small-t regime fit: quality-gated anchored windows, preferring
    one inside the band, else the best-fitting one."""
    hist = histogram(samples, scheme="log")
    fits = [w.fit for w in small_t_fits(hist) if w.fit.chi2_reduced <= max_chi2_red]
    if not fits:
        return None
    in_band = [f for f in fits if band[0] <= f.alpha <= band[1]]
    return min(in_band or fits, key=lambda f: f.chi2_reduced)


def cmd_reproduce(args) -> int:
    fig = args.figure
    if fig not in FIGURE_IDS:
        raise ConfigurationError(f"unknown figure id {fig!r} (choose from {FIGURE_IDS})")
    seed = _resolve_seed(args)
    scale = args.scale
    if not 0 < scale <= 1:
        raise ConfigurationError(f"--scale must lie in (0, 1], got {scale}")
    scaled = scale < 1
    outdir = args.outdir or "."
    os.makedirs(outdir, exist_ok=True)
    workers = args.workers
    side = _scaled_side(100, scale)
    v_kw = dict(family="v", width=side, depth=side)
    base_kw = dict(family="base", width=side, depth=side, p=0.5)

    if fig in ("fig2a", "fig2b"):
        frac = 0.05 if fig == "fig2a" else 0.2
        band = (0.98, 1.38) if fig == "fig2a" else (2.4, 3.5)
        ref = ALPHA_SMALL_WEIGHT if fig == "fig2a" else ALPHA_FIFTH_WEIGHT
        result, samples = _avalanche_fig(outdir, fig, v_kw, frac, 1000, seed,
                                         workers, scale)
        fit = _small_t_fit(samples, band)
        if fit is None:
            print(f"{fig}: no quality small-t window found  warn")
        else:
            append_fit(f"{outdir}/{fig}_result.txt", "powerlaw", {
                "alpha": fit.alpha, "amplitude": fit.amplitude,
                "chi2": fit.chi2, "window_lo": fit.window[0],
                "window_hi": fit.window[1], "points": fit.n_points})
            print(f"{fig}: small-t power-law fit (reference alpha = {ref})")
            _report(f"{fig} alpha", fit.alpha, band[0], band[1], scaled)

    elif fig == "fig3":
        ref_result, ref_samples = _avalanche_fig(outdir, "fig3_ref005", v_kw, 0.05,
                                                 1000, seed, workers, scale)
        ref_chi2 = best_scan_chi2(ref_samples)
        threshold = 1.5 * ref_chi2 if ref_chi2 is not None else 0.02
        for frac, label in ((0.5, "fig3_f05"), (0.9, "fig3_f09")):
            result, samples = _avalanche_fig(outdir, label, v_kw, frac, 1000,
                                             seed, workers, scale)
            best = best_scan_chi2(samples)
            verdict = "no power-law regime" if (best is None or best > threshold) \
                else "power-law regime found"
            print(f"{label}: best >=5-bin reduced chi2 = "
                  f"{'n/a' if best is None else format(best, '.4g')} "
                  f"(threshold {threshold:.4g}) -> {verdict}")

    elif fig == "fig4":
        for frac in (0.1, 0.2):
            label = f"fig4_f{int(frac * 100):02d}"
            result, samples = _avalanche_fig(outdir, label, base_kw, frac, 1000,
                                             seed, workers, scale)
            fit = fit_gaussian(samples)
            print(f"{label}: mean={fit.mean:.2f} sd={fit.sd:.2f} "
                  f"skewness={fit.skewness:.3f} chi2_red={fit.chi2_reduced:.3f} "
                  f"modes={fit.n_modes} gaussian_like={fit.is_gaussian_like()}")

    elif fig in ("fig5", "fig8"):
        kw = v_kw if fig == "fig5" else base_kw
        mu_step = 1.0
        capacity_per_site = (side + 1) / 2  # layer depth equals the side here
        mu_max = float(min(12.0, np.floor(capacity_per_site / mu_step) * mu_step))
        cfg = ExperimentConfig(kind="percolation-sweep", mu_max=mu_max,
                               mu_step=mu_step,
                               realizations=_scaled_r(500, scale),
                               master_seed=seed, **kw)
        result = run_experiment(cfg, workers=workers)
        write_results(result, f"{outdir}/{fig}_result.txt")
        header, rows = result.tables["grid"]
        mus = [r[0] for r in rows]
        _write_xy(f"{outdir}/{fig}_S.dat", mus, [r[1] for r in rows], "mu  mean S")
        _write_xy(f"{outdir}/{fig}_S1.dat", mus, [r[3] for r in rows], "mu  mean S1")
        agg = result.aggregates
        print(f"{fig}: mean jump {agg['mean_jump']:.4f}, max jump {agg['max_jump']:.4f}, "
              f"frac >= 0.1: {agg['frac_jump_ge_0.1']:.3f}, "
              f"max grid drop {agg['max_grid_drop']:.4f}")
        if not scaled:
            if fig == "fig5":
                print("fig5: discontinuous transition expected "
                      "(jumps of order 0.1 and a steep drop of the mean)")
            else:
                print("fig8: continuous decrease expected "
                      "(single-insertion jumps stay below 0.02)")

    elif fig == "fig6":
        for q in (0.1, 0.2, 0.3, 0.4):
            label = f"fig6_q{int(q * 100):02d}"
            kw = dict(family="perturbed-v", width=side, depth=side, q=q)
            result, samples = _avalanche_fig(outdir, label, kw, 0.05, 1000,
                                             seed, workers, scale)
            best = best_scan_chi2(samples)
            print(f"{label}: best >=5-bin reduced chi2 = "
                  f"{'n/a' if best is None else format(best, '.4g')} "
                  f"(power law destroyed by the perturbation)")

    else:  # fig7
        sides = tuple(sorted({_scaled_side(s, scale) for s in (50, 75, 100, 150)}))
        if len(sides) < 3:
            raise ConfigurationError("--scale too small: fewer than 3 distinct sizes")
        cfg = ExperimentConfig(kind="jump-scaling", sides=sides,
                               q_list=(0.05, 0.15, 0.25, 0.35, 0.45, 0.50),
                               realizations=_scaled_r(200, scale, floor=3),
                               master_seed=seed)
        result = run_experiment(cfg, workers=workers)
        write_results(result, f"{outdir}/fig7_result.txt")
        sheader, srows = result.tables["scaling"]
        for q in cfg.q_list:
            pts = [(r[2], r[3]) for r in srows if r[0] == q]
            _write_xy(f"{outdir}/fig7_q{int(q * 100):02d}.dat",
                      [p[0] for p in pts], [p[1] for p in pts], "L  mean dS1")
        fheader, frows = result.tables["fits"]
        _write_xy(f"{outdir}/fig7_phi.dat", [r[0] for r in frows],
                  [r[1] for r in frows], "q  phi")
        print("fig7 (q, phi) against the published values:")
        for q, phi, stderr, chi2, weak in frows:
            ref = PHI_BY_Q.get(round(q, 2))
            band = (ref / 3, ref * 3) if ref else (0, np.inf)
            _report(f"  q={q}", phi, band[0], band[1], scaled)
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="branchlat",
        description="Transport on load-bearing branching hierarchical lattices: "
                    "lattice generation, avalanche ensembles, packet percolation, "
                    "fits, and one-command figure reproduction.")
    subparsers = parser.add_subparsers(dest="command", required=True)

    class _DefaultsFormatter(argparse.ArgumentDefaultsHelpFormatter):
        def _get_help_string(self, action):
            if action.default is None:
                return action.help
            return super()._get_help_string(action)

    class _Sub:
        """add_parser shim that shows defaults in every subcommand's --help."""

        def add_parser(self, name, **kw):
            kw.setdefault("formatter_class", _DefaultsFormatter)
            return subparsers.add_parser(name, **kw)

    sub = _Sub()

    def common(p, needs_seed=True):
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (default $BRANCHLAT_WORKERS or 1)")
        p.add_argument("--config", default=None,
                       help="experiment config file; explicit flags win")
        p.add_argument("-o", "--output", default=None)

    g = sub.add_parser("generate", help="build a lattice and print/serialize it")
    _add_lattice_flags(g)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--annotate", action="store_true",
                   help="append an ASCII diagram with capacities")
    g.add_argument("-o", "--output", default=None)
    g.set_defaults(func=cmd_generate)

    a = sub.add_parser("avalanche", help="avalanche-time ensemble")
    _add_lattice_flags(a, merged=True)
    a.add_argument("--fraction", type=float, default=None,
                   help="test weight as a fraction of trunk capacity")
    a.add_argument("-R", "--realizations", type=int, default=None,
                   help="realizations (default 1000)")
    a.add_argument("--strict-failure", action="store_true", dest="strict_failure")
    common(a)
    a.set_defaults(func=cmd_avalanche)

    pc = sub.add_parser("percolate", help="single packet-fill trajectory")
    _add_lattice_flags(pc)
    pc.add_argument("--n-max", type=int, default=None, dest="n_max")
    pc.add_argument("--motion-rule", choices=("descend", "first-fit"),
                    default="descend", dest="motion_rule")
    pc.add_argument("--deposit-rule", choices=("uniform", "fixed"),
                    default="uniform", dest="deposit_rule")
    pc.add_argument("--connectivity", choices=("links", "grid"), default="links")
    pc.add_argument("--seed", type=int, default=None)
    pc.add_argument("-o", "--output", default=None)
    pc.set_defaults(func=cmd_percolate)

    sw = sub.add_parser("sweep", help="packet-density sweep of S and S1")
    _add_lattice_flags(sw, merged=True)
    sw.add_argument("--mu-max", type=float, default=None, dest="mu_max")
    sw.add_argument("--mu-step", type=float, default=None, dest="mu_step")
    sw.add_argument("-R", "--realizations", type=int, default=None,
                    help="realizations (default 500)")
    sw.add_argument("--motion-rule", choices=("descend", "first-fit"),
                    default=None, dest="motion_rule")
    sw.add_argument("--deposit-rule", choices=("uniform", "fixed"),
                    default=None, dest="deposit_rule")
    sw.add_argument("--connectivity", choices=("links", "grid"), default=None)
    common(sw)
    sw.set_defaults(func=cmd_sweep)

    js = sub.add_parser("jumpscale", help="largest-jump size scaling over q")
    js.add_argument("--sizes", type=int, nargs="+", default=None)
    js.add_argument("--q-values", type=float, nargs="+", default=None,
                    dest="q_values")
    js.add_argument("-R", "--realizations", type=int, default=None,
                    help="realizations (default 200)")
    js.add_argument("--motion-rule", choices=("descend", "first-fit"),
                    default=None, dest="motion_rule")
    js.add_argument("--deposit-rule", choices=("uniform", "fixed"),
                    default=None, dest="deposit_rule")
    js.add_argument("--connectivity", choices=("links", "grid"), default=None)
    common(js)
    js.set_defaults(func=cmd_jumpscale)

    f = sub.add_parser("fit", help="fit a distribution or scaling law from a result file")
    f.add_argument("--input", required=True)
    f.add_argument("--kind", choices=("powerlaw", "gaussian", "scaling"),
                   required=True)
    f.add_argument("--window", default=None, help="t_lo:t_hi for powerlaw")
    f.add_argument("--base", type=float, default=DEFAULT_LOG_BASE)
    f.add_argument("--min-bins", type=int, default=5, dest="min_bins")
    f.add_argument("--append", action="store_true",
                   help="append the fit report to the input result file")
    f.set_defaults(func=cmd_fit)

    r = sub.add_parser("reproduce", help="reproduce a figure's data end to end")
    r.add_argument("figure", choices=FIGURE_IDS)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--scale", type=float, default=1.0,
                   help="shrink realizations and sizes for a quick run")
    r.add_argument("--outdir", default=None)
    r.add_argument("--workers", type=int, default=None)
    r.set_defaults(func=cmd_reproduce)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
