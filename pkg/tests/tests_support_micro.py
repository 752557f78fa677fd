"""Shared exhaustive micro-oracle used by the percolation and acceptance tests."""

import numpy as np

from branchlat.lattice import Lattice, LatticeSpec, compute_capacities
from branchlat.percolation import OccupancyState, order_parameter


class HandSimulator:
    """Exhaustive reference: plain dictionaries, explicit flood fills."""

    def __init__(self, lattice, capacities, motion_rule="descend"):
        self.lat = lattice
        self.caps = capacities.flat.tolist()
        self.child = lattice.child_sites().tolist()
        self.counts = [0] * lattice.n_sites
        self.motion = motion_rule
        self.deposited = self.settled = self.discarded = 0

    def full(self, s):
        return self.counts[s] >= self.caps[s]

    def insert(self, top):
        self.deposited += 1
        cur = top
        if self.motion == "descend":
            while self.child[cur] >= 0 and not self.full(self.child[cur]):
                cur = self.child[cur]
        else:
            while self.full(cur) and self.child[cur] >= 0:
                cur = self.child[cur]
        if self.full(cur):
            self.discarded += 1
            return None
        self.counts[cur] += 1
        self.settled += 1
        return cur

    def _largest_component(self, member):
        L = self.lat.n_sites
        adj = [[] for _ in range(L)]
        for s in range(L):
            c = self.child[s]
            if c >= 0 and member[s] and member[c]:
                adj[s].append(c)
                adj[c].append(s)
        seen = [False] * L
        best = 0
        for s in range(L):
            if not member[s] or seen[s]:
                continue
            stack, size = [s], 0
            seen[s] = True
            while stack:
                x = stack.pop()
                size += 1
                for y in adj[x]:
                    if not seen[y]:
                        seen[y] = True
                        stack.append(y)
            best = max(best, size)
        return best

    def order_parameter(self):
        L = self.lat.n_sites
        best = self._largest_component([not self.full(s) for s in range(L)])
        return best / L, 1.0 - best / L

    def largest_saturated(self):
        return self._largest_component(
            [self.full(s) for s in range(self.lat.n_sites)])


def all_direction_lattices(width, depth):
    """Every child-direction assignment for the given dimensions."""
    n_conn = (depth - 1) * width
    spec = LatticeSpec(width=width, depth=depth, family="base", p=0.5, seed=0)
    for mask in range(2 ** n_conn):
        dirs = np.array([(mask >> i) & 1 for i in range(n_conn)],
                        dtype=np.int8).reshape(depth - 1, width)
        yield Lattice(spec=spec, child_dir=dirs)


def exhaustive_micro_check(motions=("descend", "first-fit")) -> int:
    """Walk every deposit-sequence prefix tree on every tiny lattice.

    Each prefix is replayed on a fresh OccupancyState and a fresh hand
    simulator; settlement sites, counters, order parameters, and the largest
    saturated cluster must agree exactly. Returns the number of prefixes
    checked; raises AssertionError on the first disagreement.
    """
    checked = 0
    for motion in motions:
        for width in (1, 2, 3):
            depth_cap = {1: 12, 2: 6, 3: 5}[width]
            for depth in (1, 2, 3):
                for lat in all_direction_lattices(width, depth):
                    caps = compute_capacities(lat)
                    cap_level = min(depth_cap, caps.total + 1)
                    stack = [()]
                    while stack:
                        prefix = stack.pop()
                        if len(prefix) >= cap_level:
                            continue
                        for j in range(width):
                            seq = prefix + (j,)
                            state = OccupancyState(lattice=lat, capacities=caps,
                                                   motion_rule=motion)
                            hand = HandSimulator(lat, caps, motion)
                            for k in seq[:-1]:
                                state.insert_packet(k)
                                hand.insert(k)
                            assert state.insert_packet(j) == hand.insert(j)
                            assert (state.deposited, state.settled,
                                    state.discarded) == \
                                (hand.deposited, hand.settled, hand.discarded)
                            assert order_parameter(state) == hand.order_parameter()
                            assert state.sat_uf.largest == hand.largest_saturated()
                            checked += 1
                            stack.append(seq)
    return checked
