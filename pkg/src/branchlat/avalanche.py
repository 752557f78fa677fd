"""Weight-transmission avalanches.

A test weight is dropped on a uniformly random top-layer site. Each visited
site absorbs what spare capacity it has and forwards the excess to its child.
Excess that survives the bottom layer ends one cycle and is re-deposited on a
fresh random top-layer site. Occupancy persists across cycles within a run.
The transmission fails when a cycle's deposit site has no spare capacity left
(with an optional stricter mode that also fails on any saturated site reached
mid-path). The avalanche time counts every layer visited during successful
transmission, the deposit site counting as one; a failing cycle adds nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .lattice import (CapacityField, ConfigurationError, Lattice, LatticeSpec,
                      build_lattice, compute_capacities, find_trunk,
                      label_clusters)


@dataclass(frozen=True)
class AvalancheConfig:
    """Run parameters: the integer test weight and a cycle guard."""

    w_test: int
    max_cycles: Optional[int] = None  # defaults to 10 * depth
    strict_failure: bool = False      # fail on any saturated site reached mid-path

    def __post_init__(self):
        if self.w_test < 0:
            raise ConfigurationError(f"w_test must be >= 0, got {self.w_test}")
        if self.max_cycles is not None and self.max_cycles < 1:
            raise ConfigurationError(f"max_cycles must be >= 1, got {self.max_cycles}")


@dataclass
class AvalancheOutcome:
    """Result of one avalanche run.

    time counts layers traversed over all successful cycles; cycles counts
    completed passes that reached the bottom with excess left. absorbed maps
    site id -> weight retained there (sparse). aborted marks runs stopped by
    the max-cycles guard, which is distinct from failure at a site.
    """

    success: bool
    time: int
    cycles: int
    residual: int
    failure_site: Optional[int] = None
    aborted: bool = False
    absorbed: dict[int, int] = field(default_factory=dict)

    @property
    def absorbed_total(self) -> int:
        return sum(self.absorbed.values())


def round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def run_avalanche(lattice: Lattice, capacities: CapacityField,
                  config: AvalancheConfig, seed) -> AvalancheOutcome:
    """Simulate one avalanche on an initially empty lattice.

    seed is anything numpy's default_rng accepts, or an object that already
    provides integers(lo, hi) for the deposit draws.
    """
    rng = seed if hasattr(seed, "integers") else np.random.default_rng(seed)
    M, N = lattice.width, lattice.depth
    caps = capacities.flat
    child = lattice.child_sites()
    occupancy: dict[int, int] = {}
    max_cycles = config.max_cycles if config.max_cycles is not None else 10 * N

    residual = config.w_test
    time = 0
    cycles = 0
    deposits = 0
    while residual > 0:
        if deposits >= max_cycles:
            return AvalancheOutcome(success=False, time=time, cycles=cycles,
                                    residual=residual, aborted=True,
                                    absorbed=occupancy)
        site = int(rng.integers(0, M))
        deposits += 1
        filled = occupancy.get(site, 0)
        if filled >= caps[site]:
            # the receiving site has already saturated: transmission fails here
            return AvalancheOutcome(success=False, time=time, cycles=cycles,
                                    residual=residual, failure_site=site,
                                    absorbed=occupancy)
        cycle_time = 0
        cur = site
        while True:
            filled = occupancy.get(cur, 0)
            spare = int(caps[cur]) - filled
            if spare <= 0 and config.strict_failure and cur != site:
                return AvalancheOutcome(success=False, time=time, cycles=cycles,
                                        residual=residual, failure_site=cur,
                                        absorbed=occupancy)
            take = min(residual, spare) if spare > 0 else 0
            if take:
                occupancy[cur] = filled + take
                residual -= take
            cycle_time += 1
            if residual == 0:
                break
            nxt = child[cur]
            if nxt < 0:
                cycles += 1  # reached the bottom with excess: cycle complete
                break
            cur = int(nxt)
        time += cycle_time
    return AvalancheOutcome(success=True, time=time, cycles=cycles,
                            residual=0, absorbed=occupancy)


@dataclass
class AvalancheSamples:
    """Per-realization records from an ensemble run."""

    spec: LatticeSpec
    fraction: float
    master_seed: int
    sub_seeds: np.ndarray
    w_test: np.ndarray
    times: np.ndarray
    success: np.ndarray
    cycles: np.ndarray
    aborted: np.ndarray

    def __len__(self) -> int:
        return len(self.times)

    @property
    def successful_times(self) -> np.ndarray:
        return self.times[self.success]


def avalanche_ensemble(spec: LatticeSpec, fraction: float, realizations: int,
                       master_seed: int, strict_failure: bool = False,
                       max_cycles: Optional[int] = None) -> AvalancheSamples:
    """Run one avalanche per realization on a freshly built lattice.

    Each realization derives its own lattice seed and dynamics seed from the
    master seed, so results do not depend on execution order. The test weight
    is the fraction of that realization's trunk capacity, rounded half up.
    """
    from .ensemble import seed_stream

    if realizations < 1:
        raise ConfigurationError(f"realizations must be >= 1, got {realizations}")
    if fraction <= 0:
        raise ConfigurationError(f"fraction must be > 0, got {fraction}")

    sub_seeds = np.empty(realizations, dtype=np.uint64)
    w_tests = np.empty(realizations, dtype=np.int64)
    times = np.empty(realizations, dtype=np.int64)
    success = np.empty(realizations, dtype=bool)
    cycles = np.empty(realizations, dtype=np.int64)
    aborted = np.empty(realizations, dtype=bool)

    deterministic = spec.family == "v"
    cached = None
    if deterministic:
        lat = build_lattice(spec)
        caps = compute_capacities(lat)
        trunk = find_trunk(lat, caps, label_clusters(lat))
        cached = (lat, caps, trunk.total_capacity)

    for r in range(realizations):
        sub = seed_stream(master_seed, r)
        sub_seeds[r] = sub
        if deterministic:
            lat, caps, w_t = cached
        else:
            lat = build_lattice(replace(spec, seed=int(seed_stream(sub, 0))))
            caps = compute_capacities(lat)
            w_t = find_trunk(lat, caps, label_clusters(lat)).total_capacity
        cfg = AvalancheConfig(w_test=round_half_up(fraction * w_t),
                              max_cycles=max_cycles, strict_failure=strict_failure)
        out = run_avalanche(lat, caps, cfg, int(seed_stream(sub, 1)))
        w_tests[r] = cfg.w_test
        times[r] = out.time
        success[r] = out.success
        cycles[r] = out.cycles
        aborted[r] = out.aborted

    return AvalancheSamples(spec=spec, fraction=fraction, master_seed=master_seed,
                            sub_seeds=sub_seeds, w_test=w_tests, times=times,
                            success=success, cycles=cycles, aborted=aborted)
