"""Reproducible ensemble orchestration, seed derivation, and result files.

Every experiment is described by a flat ExperimentConfig; a run derives one
sub-seed per realization from the master seed with a counter-based mix, so
results are bit-identical regardless of execution order or worker count.
Result files carry a structured key-value header (config echo, aggregates)
plus comma-separated tables, and round-trip exactly on all simulation fields;
only the created/elapsed metadata lines differ between identical runs.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, fields, replace
from datetime import datetime, timezone
from multiprocessing import Pool
from typing import Optional

import numpy as np

from .lattice import ConfigurationError, LatticeSpec, build_lattice, compute_capacities
from . import avalanche as _avalanche
from . import percolation as _percolation

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

EXPERIMENT_KINDS = ("avalanche", "percolation-sweep", "jump-scaling")

FORMAT_TAG = "branchlat-result 1"


def _splitmix64(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def seed_stream(master_seed: int, index: int) -> int:
    """Counter-based sub-seed: mixes the master seed with the realization index.

    The mixing is a bijection of the counter for a fixed master seed, so
    distinct indices always give distinct sub-seeds, independent of the order
    in which they are asked for.
    """
    return _splitmix64((master_seed + (index + 1) * _GOLDEN) & _MASK64)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("BRANCHLAT_WORKERS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat description of one experiment run.

    kind selects the experiment; lattice fields and kind-specific parameters
    follow. Validation happens up front so a bad field is reported by name
    before any work starts.
    """

    kind: str
    family: str = "v"
    width: int = 100
    depth: int = 100
    p: Optional[float] = None
    q: Optional[float] = None
    fraction: Optional[float] = None          # avalanche
    mu_max: Optional[float] = None            # percolation-sweep
    mu_step: Optional[float] = None
    sides: Optional[tuple[int, ...]] = None   # jump-scaling
    q_list: Optional[tuple[float, ...]] = None
    realizations: int = 1
    master_seed: int = 0
    motion_rule: str = "first-fit"
    deposit_rule: str = "fixed"
    connectivity: str = "links"
    strict_failure: bool = False
    max_cycles: Optional[int] = None
    output: Optional[str] = None

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigurationError(f"experiment: unknown kind {self.kind!r}")
        if self.realizations < 1:
            raise ConfigurationError(f"realizations: must be >= 1, got {self.realizations}")
        if self.kind != "jump-scaling":
            self.lattice_spec()  # validates family/width/depth/p/q
        if self.kind == "avalanche":
            if self.fraction is None or self.fraction <= 0:
                raise ConfigurationError(f"fraction: must be > 0, got {self.fraction}")
        if self.kind == "percolation-sweep":
            if self.mu_max is None or self.mu_max <= 0:
                raise ConfigurationError(f"mu_max: must be > 0, got {self.mu_max}")
            if self.mu_step is None or self.mu_step <= 0:
                raise ConfigurationError(f"mu_step: must be > 0, got {self.mu_step}")
            # total capacity is family-independent: every layer sums to M*D
            total = self.width * self.depth * (self.depth + 1) // 2
            if round(self.mu_max * self.width * self.depth) > total:
                raise ConfigurationError(
                    f"mu_max: grid extends past total capacity "
                    f"({self.mu_max} > {(self.depth + 1) / 2})")
        if self.kind == "jump-scaling":
            if not self.sides or len(self.sides) < 3:
                raise ConfigurationError(
                    f"sides: need at least 3 lattice sizes, got {list(self.sides or ())}")
            if not self.q_list:
                raise ConfigurationError("q_list: need at least one perturbation probability")
            for q in self.q_list:
                if not 0.0 <= q <= 0.5:
                    raise ConfigurationError(f"q_list: q must lie in [0, 0.5], got {q}")
            for s in self.sides:
                if s < 1:
                    raise ConfigurationError(f"sides: must be >= 1, got {s}")
        if self.motion_rule not in _percolation.MOTION_RULES:
            raise ConfigurationError(f"motion_rule: unknown rule {self.motion_rule!r}")
        if self.deposit_rule not in ("uniform", "fixed"):
            raise ConfigurationError(f"deposit_rule: unknown rule {self.deposit_rule!r}")
        if self.connectivity not in _percolation.CONNECTIVITY_RULES:
            raise ConfigurationError(f"connectivity: unknown rule {self.connectivity!r}")

    def lattice_spec(self, seed: int = 0) -> LatticeSpec:
        return LatticeSpec(width=self.width, depth=self.depth, family=self.family,
                           p=self.p, q=self.q, seed=seed)

    def mu_grid(self) -> np.ndarray:
        n = int(round(self.mu_max / self.mu_step))
        return np.round(np.arange(0, n + 1) * self.mu_step, 12)


@dataclass
class ResultSet:
    """Config echo, aggregates, tabular payloads, and appended fit reports.

    created/elapsed_s are wall-clock metadata and excluded from equality.
    """

    config: ExperimentConfig
    aggregates: dict[str, object]
    tables: dict[str, tuple[list[str], list[tuple]]]
    fits: dict[str, dict[str, object]] = None
    created: str = ""
    elapsed_s: float = 0.0

    def __post_init__(self):
        if self.fits is None:
            self.fits = {}

    def __eq__(self, other):
        if not isinstance(other, ResultSet):
            return NotImplemented
        return (self.config == other.config
                and self.aggregates == other.aggregates
                and self.tables == other.tables
                and self.fits == other.fits)


# ---------------------------------------------------------------------------
# per-realization workers (module level so they pickle for the pool)

from functools import lru_cache


@lru_cache(maxsize=8)
def _cached_v_setup(spec: LatticeSpec):
    """The V lattice is seed-independent, so build it once per process."""
    from .lattice import find_trunk, label_clusters
    lat = build_lattice(spec)
    caps = compute_capacities(lat)
    w_t = find_trunk(lat, caps, label_clusters(lat)).total_capacity
    return lat, caps, w_t


def _realization_lattice(cfg: ExperimentConfig, sub: int, with_trunk: bool):
    spec = cfg.lattice_spec()
    if spec.family == "v":
        return _cached_v_setup(spec)
    lat = build_lattice(replace(spec, seed=int(seed_stream(sub, 0))))
    caps = compute_capacities(lat)
    w_t = None
    if with_trunk:
        from .lattice import find_trunk, label_clusters
        w_t = find_trunk(lat, caps, label_clusters(lat)).total_capacity
    return lat, caps, w_t


def _avalanche_record(args: tuple) -> tuple:
    cfg_fields, r = args
    cfg = ExperimentConfig(**cfg_fields)
    sub = seed_stream(cfg.master_seed, r)
    lat, caps, w_t = _realization_lattice(cfg, sub, with_trunk=True)
    acfg = _avalanche.AvalancheConfig(
        w_test=_avalanche.round_half_up(cfg.fraction * w_t),
        max_cycles=cfg.max_cycles, strict_failure=cfg.strict_failure)
    out = _avalanche.run_avalanche(lat, caps, acfg, int(seed_stream(sub, 1)))
    return (r, sub, acfg.w_test, int(out.success), out.time, out.cycles,
            int(out.aborted))


def _sweep_record(args: tuple) -> tuple:
    cfg_fields, r = args
    cfg = ExperimentConfig(**cfg_fields)
    sub = seed_stream(cfg.master_seed, r)
    lat, caps, _ = _realization_lattice(cfg, sub, with_trunk=False)
    grid = cfg.mu_grid()
    L = lat.n_sites
    n_max = int(round(grid[-1] * L))
    total = int(caps.flat.sum())
    if n_max > total:
        raise ConfigurationError(
            f"mu_max: grid extends past total capacity ({grid[-1]} > {total / L:.3f})")
    traj = _percolation.fill_trajectory(
        lat, caps, n_max, int(seed_stream(sub, 1)), motion_rule=cfg.motion_rule,
        deposit_rule=cfg.deposit_rule, connectivity=cfg.connectivity)
    ns = np.round(grid * L).astype(np.int64)
    jr = traj.largest_jump()
    return (r, sub, traj.s_series(ns).tolist(), jr.d_s1, jr.n_star, jr.mu_c)


def _jump_record(args: tuple) -> tuple:
    cfg_fields, qi, r = args
    cfg = ExperimentConfig(**cfg_fields)
    q = cfg.q_list[qi]
    sub = seed_stream(seed_stream(cfg.master_seed, qi), r)
    lat_seed = int(seed_stream(sub, 0))
    dyn_seed = int(seed_stream(sub, 1))
    frac = (r + 0.5) / cfg.realizations
    jumps = []
    for side in cfg.sides:
        spec = LatticeSpec(width=side, depth=side, family="perturbed-v",
                           q=q, seed=lat_seed)
        lat = build_lattice(spec)
        caps = compute_capacities(lat)
        fixed = int(frac * side) if cfg.deposit_rule == "fixed" else None
        traj = _percolation.fill_trajectory(
            lat, caps, int(caps.flat.sum()), dyn_seed, motion_rule=cfg.motion_rule,
            deposit_rule=cfg.deposit_rule, connectivity=cfg.connectivity,
            fixed_site=fixed)
        jumps.append(traj.largest_jump().d_s1)
    return (qi, r, jumps)


def _parallel_map(func, tasks, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with Pool(processes=workers) as pool:
        return pool.map(func, tasks, chunksize=max(1, len(tasks) // (workers * 8)))


def _config_fields(cfg: ExperimentConfig) -> dict:
    return {f.name: getattr(cfg, f.name) for f in fields(cfg)}


def run_experiment(config: ExperimentConfig, workers: Optional[int] = None) -> ResultSet:
    """Dispatch to the configured experiment and gather index-ordered results."""
    workers = default_workers() if workers is None else max(1, workers)
    t0 = time.time()
    cf = _config_fields(config)
    R = config.realizations

    if config.kind == "avalanche":
        recs = _parallel_map(_avalanche_record, [(cf, r) for r in range(R)], workers)
        recs.sort(key=lambda t: t[0])
        times = np.array([t[4] for t in recs], dtype=float)
        succ = np.array([t[3] for t in recs])
        aggregates = {
            "realizations": R,
            "success_count": int(succ.sum()),
            "aborted_count": int(sum(t[6] for t in recs)),
            "mean_time": float(times.mean()),
            "sd_time": float(times.std(ddof=1)) if R > 1 else 0.0,
            "min_time": int(times.min()),
            "max_time": int(times.max()),
        }
        tables = {"samples": (
            ["realization", "sub_seed", "w_test", "success", "time", "cycles"],
            [(t[0], t[1], t[2], t[3], t[4], t[5]) for t in recs])}

    elif config.kind == "percolation-sweep":
        recs = _parallel_map(_sweep_record, [(cf, r) for r in range(R)], workers)
        recs.sort(key=lambda t: t[0])
        grid = config.mu_grid()
        s_matrix = np.array([t[2] for t in recs])
        mean_s = s_matrix.mean(axis=0)
        sd_s = s_matrix.std(axis=0, ddof=1) if R > 1 else np.zeros_like(mean_s)
        jumps = np.array([t[3] for t in recs])
        aggregates = {
            "realizations": R,
            "mean_jump": float(jumps.mean()),
            "max_jump": float(jumps.max()),
            "frac_jump_ge_0.1": float((jumps >= 0.1).mean()),
            "max_grid_drop": float(np.max(mean_s[:-1] - mean_s[1:])) if len(grid) > 1 else 0.0,
        }
        tables = {
            "grid": (["mu", "mean_s", "sd_s", "mean_s1", "sd_s1"],
                     [(float(grid[i]), float(mean_s[i]), float(sd_s[i]),
                       float(1.0 - mean_s[i]), float(sd_s[i]))
                      for i in range(len(grid))]),
            "jumps": (["realization", "sub_seed", "d_s1", "n_star", "mu_c"],
                      [(t[0], t[1], float(t[3]), int(t[4]), float(t[5]))
                       for t in recs]),
        }

    else:  # jump-scaling
        from .statsfit import fit_size_scaling
        tasks = [(cf, qi, r) for qi in range(len(config.q_list)) for r in range(R)]
        recs = _parallel_map(_jump_record, tasks, workers)
        sums: dict[tuple[int, int], list[float]] = {}
        for qi, r, jumps in recs:
            for si, j in enumerate(jumps):
                sums.setdefault((qi, si), []).append(j)
        scale_rows = []
        fit_rows = []
        for qi, q in enumerate(config.q_list):
            points = []
            for si, side in enumerate(config.sides):
                vals = np.array(sums[(qi, si)])
                mean = float(vals.mean())
                sd = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
                scale_rows.append((float(q), side, side * side, mean, sd))
                points.append((side * side, mean))
            fit = fit_size_scaling(points)
            fit_rows.append((float(q), float(fit.phi), float(fit.stderr),
                             float(fit.chi2), int(fit.weakly_discontinuous)))
        aggregates = {"realizations": R, "n_sizes": len(config.sides),
                      "n_q": len(config.q_list)}
        tables = {
            "scaling": (["q", "side", "n_sites", "mean_d_s1", "sd_d_s1"], scale_rows),
            "fits": (["q", "phi", "stderr", "chi2", "weakly_discontinuous"], fit_rows),
        }

    return ResultSet(config=config, aggregates=aggregates, tables=tables,
                     created=datetime.now(timezone.utc).isoformat(timespec="seconds"),
                     elapsed_s=time.time() - t0)


# ---------------------------------------------------------------------------
# text persistence

_CONFIG_TYPES = {
    "kind": str, "family": str, "width": int, "depth": int, "p": float,
    "q": float, "fraction": float, "mu_max": float, "mu_step": float,
    "sides": "int_list", "q_list": "float_list", "realizations": int,
    "master_seed": int, "motion_rule": str, "deposit_rule": str,
    "connectivity": str, "strict_failure": bool, "max_cycles": int,
    "output": str,
}


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ",".join(_format_value(x) for x in v)
    return str(v)


def _parse_typed(key: str, raw: str, lineno: int):
    typ = _CONFIG_TYPES[key]
    try:
        if typ is str:
            return raw
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        if typ is bool:
            if raw not in ("true", "false"):
                raise ValueError(raw)
            return raw == "true"
        if typ == "int_list":
            return tuple(int(x) for x in raw.split(","))
        if typ == "float_list":
            return tuple(float(x) for x in raw.split(","))
    except ValueError:
        raise ConfigurationError(f"line {lineno}: bad value {raw!r} for key {key!r}")
    raise ConfigurationError(f"line {lineno}: unhandled key {key!r}")


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse a flat key = value experiment description; unknown keys rejected."""
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key, raw = key.strip(), raw.strip()
        if key == "experiment":
            key = "kind"
        if key not in _CONFIG_TYPES:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_typed(key, raw, lineno)
    if "kind" not in values:
        raise ConfigurationError("config is missing the 'experiment' key")
    return ExperimentConfig(**values)


def read_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def _serialize_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.integer,)):
        return str(int(v))
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    return str(v)


def write_results(result: ResultSet, path: str) -> None:
    """Persist a ResultSet: tag line, metadata, [config], [aggregates], tables."""
    lines = [FORMAT_TAG,
             f"created = {result.created}",
             f"elapsed_s = {result.elapsed_s!r}",
             "[config]"]
    for key, val in _config_fields(result.config).items():
        key_out = "experiment" if key == "kind" else key
        if val is None:
            continue
        lines.append(f"{key_out} = {_format_value(val)}")
    lines.append("[aggregates]")
    for key, val in result.aggregates.items():
        lines.append(f"{key} = {_format_value(val)}")
    for name, (header, rows) in result.tables.items():
        lines.append(f"[table {name}]")
        lines.append(",".join(header))
        for row in rows:
            lines.append(",".join(_serialize_cell(c) for c in row))
    for name, report in result.fits.items():
        lines.append(f"[fit {name}]")
        for key, val in report.items():
            lines.append(f"{key} = {_format_value(val)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def append_fit(path: str, name: str, report: dict) -> None:
    """Append a key-value fit report section to an existing result file."""
    read_results(path)  # validates the target before touching it
    lines = [f"[fit {name}]"]
    for key, val in report.items():
        lines.append(f"{key} = {_format_value(val)}")
    with open(path, "a", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_agg_value(raw: str):
    if raw == "true":
        return True
    if raw == "false":
        return False
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def read_results(path: str) -> ResultSet:
    """Parse a result file back; malformed input fails with its line number."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != FORMAT_TAG:
        raise ConfigurationError(f"line 1: not a result file (missing {FORMAT_TAG!r})")
    created = ""
    elapsed = 0.0
    config_values: dict[str, object] = {}
    aggregates: dict[str, object] = {}
    tables: dict[str, tuple[list[str], list[tuple]]] = {}
    fits: dict[str, dict[str, object]] = {}
    section = None
    fit_name = None
    table_name = None
    table_header: Optional[list[str]] = None
    table_rows: list[tuple] = []

    def flush_table(lineno: int):
        nonlocal table_name, table_header, table_rows
        if table_name is not None:
            if table_header is None:
                raise ConfigurationError(
                    f"line {lineno}: table {table_name!r} has no header row")
            tables[table_name] = (table_header, table_rows)
        table_name, table_header, table_rows = None, None, []

    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        if line.startswith("[table "):
            flush_table(lineno)
            if not line.endswith("]"):
                raise ConfigurationError(f"line {lineno}: malformed table header {line!r}")
            section = "table"
            table_name = line[len("[table "):-1]
            continue
        if line.startswith("[fit "):
            flush_table(lineno)
            if not line.endswith("]"):
                raise ConfigurationError(f"line {lineno}: malformed fit header {line!r}")
            section = "fit"
            fit_name = line[len("[fit "):-1]
            fits[fit_name] = {}
            continue
        if line == "[config]":
            flush_table(lineno)
            section = "config"
            continue
        if line == "[aggregates]":
            flush_table(lineno)
            section = "aggregates"
            continue
        if section == "table":
            if table_header is None:
                table_header = line.split(",")
            else:
                cells = line.split(",")
                if len(cells) != len(table_header):
                    raise ConfigurationError(
                        f"line {lineno}: row width {len(cells)} != header width "
                        f"{len(table_header)}")
                table_rows.append(tuple(_parse_agg_value(c) for c in cells))
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if section == "config":
            if key == "experiment":
                key = "kind"
            if key not in _CONFIG_TYPES:
                raise ConfigurationError(f"line {lineno}: unknown config key {key!r}")
            config_values[key] = _parse_typed(key, raw, lineno)
        elif section == "aggregates":
            aggregates[key] = _parse_agg_value(raw)
        elif section == "fit":
            fits[fit_name][key] = _parse_agg_value(raw)
        elif section is None:
            if key == "created":
                created = raw
            elif key == "elapsed_s":
                elapsed = float(raw)
            else:
                raise ConfigurationError(f"line {lineno}: unexpected metadata key {key!r}")
        else:
            raise ConfigurationError(f"line {lineno}: line outside any section: {line!r}")
    flush_table(len(lines) + 1)
    if not config_values:
        raise ConfigurationError("result file has no [config] section")
    return ResultSet(config=ExperimentConfig(**config_values), aggregates=aggregates,
                     tables=tables, fits=fits, created=created, elapsed_s=elapsed)
