"""Layered branching lattices with weight-bearing capacities.

The substrate is a 2D lattice of M sites per layer and N layers, numbered
downward from layer 1 at the top. Every site in layers 1..N-1 carries exactly
one connection to the layer below it, to one of its two staggered neighbours:
the lower-left neighbour shares the column index, the lower-right neighbour is
one column over. Columns wrap periodically, so every site has unit out-degree
and 0..2 parents.

Three families are supported:

* base     -- each connection drawn independently, left with probability p.
* v        -- the deterministic realization whose largest cluster is a V:
              a diagonal trunk starting at column 0 connects right at every
              layer, all other sites connect left. The V-cluster holds all M
              top-layer sites and M-D+1 sites in layer D, and the trunk site
              in layer D bears capacity D(D+1)/2.
* perturbed-v -- the V lattice with each non-trunk connection independently
              flipped to the right with probability q, trunk untouched.

Capacities follow the aggregation rule: a site bears 1 plus the capacities of
the sites above that connect into it. Summed over a layer this gives exactly
M*D, since every site passes its full capacity to exactly one child.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

FAMILIES = ("base", "v", "perturbed-v")

LEFT = 0   # child shares the column index
RIGHT = 1  # child is one column over (mod M)


class ConfigurationError(ValueError):
    """Raised when a lattice or experiment specification is invalid."""


@dataclass(frozen=True)
class LatticeSpec:
    """Immutable description of a lattice to build.

    width:  M, sites per layer.
    depth:  N, number of layers.
    family: one of "base", "v", "perturbed-v".
    p:      left-connection probability, base family only, strictly in (0, 1).
    q:      flip probability for perturbed-v, in [0, 0.5); q = 0 is the
            identity perturbation, kept for convenience.
    seed:   64-bit seed driving every random draw for this lattice.
    """

    width: int
    depth: int
    family: str
    p: Optional[float] = None
    q: Optional[float] = None
    seed: int = 0
    boundary: str = "periodic"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown family {self.family!r}")
        if self.width < 1 or self.depth < 1:
            raise ConfigurationError(
                f"width and depth must be >= 1, got {self.width}x{self.depth}")
        if self.boundary != "periodic":
            raise ConfigurationError("only periodic horizontal boundary is supported")
        if self.family == "base":
            if self.p is None or not (0.0 < self.p < 1.0):
                raise ConfigurationError(f"base family needs p strictly in (0,1), got {self.p}")
        else:
            if self.depth > self.width:
                raise ConfigurationError(
                    f"V-family lattices need depth <= width, got {self.width}x{self.depth}")
        if self.family == "perturbed-v":
            if self.q is None or not (0.0 <= self.q <= 0.5):
                raise ConfigurationError(f"perturbed-v needs q in [0, 0.5], got {self.q}")

    @property
    def n_sites(self) -> int:
        return self.width * self.depth


@dataclass
class Lattice:
    """A realized lattice: spec plus one downward connection per non-bottom site.

    child_dir has shape (depth-1, width) with entries LEFT/RIGHT; trunk_cols
    records the trunk column per layer for the v / perturbed-v families.
    """

    spec: LatticeSpec
    child_dir: np.ndarray
    trunk_cols: Optional[np.ndarray] = None
    _child_sites: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    _parent_table: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.child_dir = np.ascontiguousarray(self.child_dir, dtype=np.int8)
        expected = (max(self.spec.depth - 1, 0), self.spec.width)
        if self.child_dir.shape != expected:
            raise ValueError(f"child_dir shape {self.child_dir.shape}, expected {expected}")
        self.child_dir.flags.writeable = False
        if self.trunk_cols is not None:
            self.trunk_cols = np.ascontiguousarray(self.trunk_cols, dtype=np.int64)
            self.trunk_cols.flags.writeable = False

    @property
    def width(self) -> int:
        return self.spec.width

    @property
    def depth(self) -> int:
        return self.spec.depth

    @property
    def n_sites(self) -> int:
        return self.spec.n_sites

    def site_index(self, layer: int, col: int) -> int:
        """Flat site id for (layer, col), layer counted from 1 at the top."""
        return (layer - 1) * self.width + col

    def site_coords(self, site: int) -> tuple[int, int]:
        return site // self.width + 1, site % self.width

    def child_sites(self) -> np.ndarray:
        """Flat array mapping each site to its child site id, -1 on the bottom layer."""
        if self._child_sites is None:
            M, N = self.width, self.depth
            out = np.full(M * N, -1, dtype=np.int64)
            if N > 1:
                cols = np.arange(M)
                for d in range(N - 1):
                    tgt = (cols + (self.child_dir[d] == RIGHT)) % M
                    out[d * M: (d + 1) * M] = (d + 1) * M + tgt
            out.flags.writeable = False
            self._child_sites = out
        return self._child_sites

    def parent_sites(self) -> np.ndarray:
        """(L, 2) array of parent site ids per site, -1 where absent."""
        if self._parent_table is None:
            L = self.n_sites
            table = np.full((L, 2), -1, dtype=np.int64)
            counts = np.zeros(L, dtype=np.int64)
            child = self.child_sites()
            for s in range(L):
                c = child[s]
                if c >= 0:
                    table[c, counts[c]] = s
                    counts[c] += 1
            table.flags.writeable = False
            self._parent_table = table
        return self._parent_table


def generate_base(spec: LatticeSpec) -> Lattice:
    """Draw a base-family lattice: left with probability p, right otherwise."""
    if spec.family != "base":
        raise ConfigurationError(f"generate_base needs family 'base', got {spec.family!r}")
    rng = np.random.default_rng(spec.seed)
    draws = rng.random((spec.depth - 1, spec.width))
    child_dir = np.where(draws < spec.p, LEFT, RIGHT).astype(np.int8)
    return Lattice(spec=spec, child_dir=child_dir)


def generate_v(spec: LatticeSpec) -> Lattice:
    """Build the deterministic V lattice (seed unused).

    The trunk occupies column D-1 in layer D and connects right; every other
    site connects left, running parallel to the arm opposite the trunk.
    """
    if spec.family not in ("v", "perturbed-v"):
        raise ConfigurationError(f"generate_v needs family 'v', got {spec.family!r}")
    M, N = spec.width, spec.depth
    child_dir = np.full((N - 1, M), LEFT, dtype=np.int8)
    trunk_cols = np.arange(N, dtype=np.int64) % M
    for d in range(N - 1):
        child_dir[d, trunk_cols[d]] = RIGHT
    vspec = spec if spec.family == "v" else replace(spec, family="v", q=None)
    return Lattice(spec=vspec, child_dir=child_dir, trunk_cols=trunk_cols)


def perturb_v(vlattice: Lattice, q: float, seed: int) -> Lattice:
    """Flip each non-trunk left connection to the right with probability q.

    The trunk is untouched; q = 0 returns a copy of the input connections.
    """
    if vlattice.spec.family != "v" or vlattice.trunk_cols is None:
        raise ConfigurationError("perturb_v needs a V lattice as input")
    if not (0.0 <= q <= 0.5):
        raise ConfigurationError(f"perturbation probability must lie in [0, 0.5], got {q}")
    M, N = vlattice.width, vlattice.depth
    rng = np.random.default_rng(seed)
    flips = rng.random((max(N - 1, 0), M)) < q
    if N > 1:
        rows = np.arange(N - 1)
        flips[rows, vlattice.trunk_cols[:-1] % M] = False
    child_dir = np.where(flips, RIGHT, vlattice.child_dir).astype(np.int8)
    spec = replace(vlattice.spec, family="perturbed-v", q=q, seed=seed)
    return Lattice(spec=spec, child_dir=child_dir, trunk_cols=vlattice.trunk_cols)


def build_lattice(spec: LatticeSpec) -> Lattice:
    """Construct whichever family the spec asks for."""
    if spec.family == "base":
        return generate_base(spec)
    if spec.family == "v":
        return generate_v(spec)
    v = generate_v(replace(spec, family="v", q=None))
    return perturb_v(v, spec.q, spec.seed)


@dataclass
class CapacityField:
    """Per-site weight-bearing capacities, shape (depth, width), int64."""

    w: np.ndarray

    def __post_init__(self):
        self.w = np.ascontiguousarray(self.w, dtype=np.int64)
        self.w.flags.writeable = False

    @property
    def flat(self) -> np.ndarray:
        return self.w.reshape(-1)

    @property
    def total(self) -> int:
        return int(self.w.sum())


def compute_capacities(lattice: Lattice) -> CapacityField:
    """Aggregate capacities layer by layer: w(site) = 1 + sum of parent capacities."""
    M, N = lattice.width, lattice.depth
    w = np.ones((N, M), dtype=np.int64)
    cols = np.arange(M)
    for d in range(N - 1):
        targets = (cols + (lattice.child_dir[d] == RIGHT)) % M
        inflow = np.zeros(M, dtype=np.int64)
        np.add.at(inflow, targets, w[d])
        w[d + 1] = inflow + 1
    return CapacityField(w=w)


class UnionFind:
    """Weighted quick-union with path halving."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.count = n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.count -= 1
        return ra


@dataclass
class ClusterLabeling:
    """Connected components of the undirected connection graph."""

    labels: np.ndarray            # shape (depth, width); label = root site id
    sizes: dict[int, int]         # label -> number of sites
    largest_label: int
    largest_size: int

    def size_multiset(self) -> tuple[int, ...]:
        return tuple(sorted(self.sizes.values()))


def label_clusters(lattice: Lattice) -> ClusterLabeling:
    """Union-find over undirected child links; deterministic labels."""
    L = lattice.n_sites
    uf = UnionFind(L)
    child = lattice.child_sites()
    for s in range(L):
        c = child[s]
        if c >= 0:
            uf.union(s, int(c))
    roots = np.fromiter((uf.find(s) for s in range(L)), dtype=np.int64, count=L)
    labels = roots.reshape(lattice.depth, lattice.width)
    sizes: dict[int, int] = {}
    for r in roots:
        sizes[int(r)] = sizes.get(int(r), 0) + 1
    # deterministic tie-break: smallest root id among the biggest clusters
    largest_label = min(
        (lab for lab, sz in sizes.items() if sz == max(sizes.values())))
    return ClusterLabeling(labels=labels, sizes=sizes,
                           largest_label=int(largest_label),
                           largest_size=sizes[largest_label])


@dataclass
class Trunk:
    """Maximal-capacity backbone of the largest cluster, one site per layer.

    sites holds (layer, col) pairs for the layers the cluster spans;
    layer_range is (first_layer, last_layer) inclusive. connected reports
    whether consecutive selections are actually linked, which is guaranteed
    for the V families but not for every random lattice.
    """

    sites: list[tuple[int, int]]
    capacities: list[int]
    total_capacity: int
    layer_range: tuple[int, int]
    connected: bool

    @property
    def w_t(self) -> int:
        return self.total_capacity


def find_trunk(lattice: Lattice, capacities: CapacityField,
               labeling: ClusterLabeling) -> Trunk:
    """Pick the maximal-capacity site of the largest cluster in each layer.

    Ties break toward the lowest column index. Layers the largest cluster
    does not reach are skipped; the trunk spans the cluster's layer range.
    """
    M, N = lattice.width, lattice.depth
    in_cluster = labeling.labels == labeling.largest_label
    sites: list[tuple[int, int]] = []
    caps: list[int] = []
    for d in range(N):
        mask = in_cluster[d]
        if not mask.any():
            continue
        w_row = np.where(mask, capacities.w[d], -1)
        col = int(np.argmax(w_row))  # argmax returns the first (lowest) column on ties
        sites.append((d + 1, col))
        caps.append(int(capacities.w[d, col]))
    child = lattice.child_sites()
    connected = True
    for (la, ca), (lb, cb) in zip(sites, sites[1:]):
        if lb != la + 1 or child[lattice.site_index(la, ca)] != lattice.site_index(lb, cb):
            connected = False
            break
    return Trunk(sites=sites, capacities=caps, total_capacity=sum(caps),
                 layer_range=(sites[0][0], sites[-1][0]),
                 connected=connected)


def trunk_capacity(lattice: Lattice) -> int:
    """Convenience: W_T of a lattice, computing capacities and clusters."""
    caps = compute_capacities(lattice)
    labeling = label_clusters(lattice)
    return find_trunk(lattice, caps, labeling).total_capacity


def serialize_lattice(lattice: Lattice, capacities: Optional[CapacityField] = None) -> str:
    """Flat text serialization: one header line, then one record per site.

    Record fields: layer, column, direction (L/R, '-' on the bottom layer),
    capacity.
    """
    if capacities is None:
        capacities = compute_capacities(lattice)
    spec = lattice.spec
    parts = [f"# branchlat lattice M={spec.width}", f"N={spec.depth}",
             f"family={spec.family}"]
    if spec.p is not None:
        parts.append(f"p={spec.p!r}")
    if spec.q is not None:
        parts.append(f"q={spec.q!r}")
    parts.append(f"seed={spec.seed}")
    header = " ".join(parts)
    lines = [header, "layer,column,direction,capacity"]
    for d in range(lattice.depth):
        for j in range(lattice.width):
            if d < lattice.depth - 1:
                glyph = "L" if lattice.child_dir[d, j] == LEFT else "R"
            else:
                glyph = "-"
            lines.append(f"{d + 1},{j},{glyph},{capacities.w[d, j]}")
    return "\n".join(lines) + "\n"


def annotate_lattice(lattice: Lattice, capacities: Optional[CapacityField] = None) -> str:
    """ASCII diagram with capacities, two text rows per layer.

    '|' marks a left (same-column) connection, '\\' a right one.
    """
    if capacities is None:
        capacities = compute_capacities(lattice)
    width = max(len(str(int(capacities.w.max()))), 2) + 1
    lines = []
    for d in range(lattice.depth):
        row = "".join(f"{int(capacities.w[d, j]):>{width}}" for j in range(lattice.width))
        lines.append(row)
        if d < lattice.depth - 1:
            conn = ""
            for j in range(lattice.width):
                ch = "|" if lattice.child_dir[d, j] == LEFT else "\\"
                conn += " " * (width - 1) + ch
            lines.append(conn)
    return "\n".join(lines) + "\n"
