"""Routing and wavelength assignment on live network state.

Blocking is a normal outcome and is reported as ``None``; raising is reserved
for genuine invariant violations (double occupancy, releasing a slot the
lightpath does not own), which indicate a bug rather than contention.

Occupancy is kept as one free-wavelength bitmask per link, so the feasibility
of a route under the continuity constraint is a chain of ANDs and first-fit
is an isolated-lowest-bit trick. A network state belongs to exactly one
simulation replication; replications never share state.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from enum import Enum
from heapq import heappop, heappush

from .conversion import ConverterPlacement, DegreeKind
from .topology import Route, Topology


class Routing(str, Enum):
    FIXED = "fixed"
    FIXED_ALTERNATE = "alternate"
    EXHAUST = "exhaust"


class Assignment(str, Enum):
    FIRST_FIT = "first_fit"
    MOST_USED = "most_used"
    LEAST_USED = "least_used"
    RANDOM = "random"


@dataclass(frozen=True)
class RwaPolicy:
    routing: Routing = Routing.FIXED_ALTERNATE
    k: int = 3
    assignment: Assignment = Assignment.FIRST_FIT

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"alternate count must be >= 1, got {self.k}")


@dataclass(frozen=True)
class LightpathAssignment:
    """An accepted lightpath: per-hop wavelengths plus the conversions used.

    ``wavelengths`` has one entry per hop of ``route``; ``conversions`` lists
    (node, from_w, to_w) for every adjacent-hop wavelength change.
    """

    route: Route
    wavelengths: tuple[int, ...]
    conversions: tuple[tuple[int, int, int], ...]
    lightpath_id: int | None = None


class InvariantViolation(RuntimeError):
    """Internal inconsistency in occupancy bookkeeping; never a normal block."""


class NetworkState:
    """Per-link, per-wavelength occupancy; single-writer mutable state."""

    __slots__ = ("topology", "wavelengths", "full_mask", "free_masks",
                 "owners", "usage", "busy_slots", "active", "_next_id")

    def __init__(self, topology: Topology):
        w = topology.wavelengths
        self.topology = topology
        self.wavelengths = w
        self.full_mask = (1 << w) - 1
        self.free_masks = [self.full_mask] * len(topology.links)
        self.owners: list[dict[int, int]] = [{} for _ in topology.links]
        self.usage = [0] * w  # network-wide busy-slot count per wavelength
        self.busy_slots = 0
        self.active: dict[int, LightpathAssignment] = {}
        self._next_id = 0

    def free_mask(self, link: int) -> int:
        return self.free_masks[link]

    def snapshot(self) -> tuple[int, ...]:
        return tuple(self.free_masks)

    def establish(self, assignment: LightpathAssignment) -> LightpathAssignment:
        """Claim every (hop, wavelength) slot atomically and assign an id."""
        lp_id = self._next_id
        self._next_id += 1
        free_masks = self.free_masks
        usage = self.usage
        for link, w in zip(assignment.route.hops, assignment.wavelengths):
            bit = 1 << w
            if not free_masks[link] & bit:
                raise InvariantViolation(
                    f"slot (link={link}, w={w}) already busy")
            free_masks[link] ^= bit
            self.owners[link][w] = lp_id
            usage[w] += 1
        self.busy_slots += len(assignment.wavelengths)
        established = replace(assignment, lightpath_id=lp_id)
        self.active[lp_id] = established
        return established


def release(state: NetworkState, lp: LightpathAssignment) -> None:
    """Free every slot held by ``lp``. Double release is an error."""
    lp_id = lp.lightpath_id
    if lp_id is None or lp_id not in state.active:
        raise InvariantViolation(f"lightpath {lp_id} is not active")
    owners = state.owners
    hops = lp.route.hops
    for link, w in zip(hops, lp.wavelengths):
        if owners[link].get(w) != lp_id:
            raise InvariantViolation(
                f"slot (link={link}, w={w}) not owned by lightpath {lp_id}")
    free_masks = state.free_masks
    usage = state.usage
    for link, w in zip(hops, lp.wavelengths):
        free_masks[link] |= 1 << w
        del owners[link][w]
        usage[w] -= 1
    state.busy_slots -= len(hops)
    del state.active[lp_id]


def validate_state(state: NetworkState) -> None:
    """Full-scan consistency check (test builds); raises on any mismatch."""
    expect_free = [state.full_mask] * len(state.topology.links)
    expect_owner: list[dict[int, int]] = [{} for _ in state.topology.links]
    expect_usage = [0] * state.wavelengths
    busy = 0
    for lp_id, lp in state.active.items():
        for link, w in zip(lp.route.hops, lp.wavelengths):
            bit = 1 << w
            if not expect_free[link] & bit:
                raise InvariantViolation(
                    f"distinctness violated at (link={link}, w={w})")
            expect_free[link] ^= bit
            expect_owner[link][w] = lp_id
            expect_usage[w] += 1
            busy += 1
    if expect_free != state.free_masks:
        raise InvariantViolation("free masks inconsistent with active lightpaths")
    if expect_owner != state.owners:
        raise InvariantViolation("owners inconsistent with active lightpaths")
    if expect_usage != state.usage:
        raise InvariantViolation("usage counters inconsistent")
    if busy != state.busy_slots:
        raise InvariantViolation("busy-slot counter inconsistent")


def _bits(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def continuity_assign(state: NetworkState, route: Route,
                      assignment: Assignment = Assignment.FIRST_FIT,
                      rng: random.Random | None = None) -> int | None:
    """Single wavelength free on every hop, or None when blocked.

    FIRST_FIT takes the lowest index; MOST_USED / LEAST_USED consult
    network-wide usage with lowest-index tie-break; RANDOM draws uniformly
    from the feasible set via the supplied decision stream.
    """
    free = state.full_mask
    free_masks = state.free_masks
    for link in route.hops:
        free &= free_masks[link]
        if not free:
            return None

    if assignment is Assignment.FIRST_FIT:
        return (free & -free).bit_length() - 1
    if assignment is Assignment.RANDOM:
        if rng is None:
            raise ValueError("RANDOM assignment requires a decision stream")
        options = _bits(free)
        return options[rng.randrange(len(options))]

    usage = state.usage
    best_w = -1
    if assignment is Assignment.MOST_USED:
        best_u = -1
        for w in _bits(free):
            if usage[w] > best_u:
                best_u, best_w = usage[w], w
    else:  # LEAST_USED
        best_u = None
        for w in _bits(free):
            if best_u is None or usage[w] < best_u:
                best_u, best_w = usage[w], w
    return best_w


def segmented_assign(state: NetworkState, route: Route,
                     placement: ConverterPlacement) -> LightpathAssignment | None:
    """Per-hop wavelength vector using converters where continuity fails.

    Dynamic program over the (hop x wavelength) lattice: transitions keep the
    wavelength, or shift it at a converter node within the conversion degree.
    Among feasible vectors the result minimizes conversion count and then is
    lexicographically smallest, which reduces exactly to first-fit continuity
    when no converter is available on the route.
    """
    free_masks = state.free_masks
    hops = route.hops
    frees = []
    for link in hops:
        f = free_masks[link]
        if not f:
            return None
        frees.append(f)

    nodes = route.nodes
    pnodes = placement.nodes
    full_degree = placement.degree.kind is DegreeKind.FULL
    max_shift = placement.degree.max_shift

    if not pnodes or pnodes.isdisjoint(route.interior):
        common = frees[0]
        for f in frees[1:]:
            common &= f
            if not common:
                return None
        w = (common & -common).bit_length() - 1
        return LightpathAssignment(route, (w,) * len(hops), ())

    labels: dict[int, tuple[int, tuple[int, ...]]] = {
        w: (0, (w,)) for w in _bits(frees[0])}
    for i in range(1, len(hops)):
        converter = nodes[i] in pnodes
        ws = _bits(frees[i])
        nxt: dict[int, tuple[int, tuple[int, ...]]] = {}
        for prev_w, (cost, vec) in labels.items():
            for w in ws:
                if w == prev_w:
                    c = cost
                elif converter and (full_degree or abs(w - prev_w) <= max_shift):
                    c = cost + 1
                else:
                    continue
                cand = (c, vec + (w,))
                cur = nxt.get(w)
                if cur is None or cand < cur:
                    nxt[w] = cand
        if not nxt:
            return None
        labels = nxt

    _, vec = min(labels.values())
    conversions = tuple((nodes[i], vec[i - 1], vec[i])
                        for i in range(1, len(vec)) if vec[i] != vec[i - 1])
    return LightpathAssignment(route, vec, conversions)


def attempt_establish(state: NetworkState, src: int, dst: int,
                      routes: tuple[Route, ...] | list[Route] | None,
                      placement: ConverterPlacement,
                      policy: RwaPolicy,
                      rng: random.Random | None = None,
                      ) -> LightpathAssignment | None:
    """Try to realize a request; on success the state is updated atomically,
    on blocking it is untouched.

    FIXED uses only the first precomputed route, FIXED_ALTERNATE walks the
    precomputed list in order, EXHAUST searches the current state adaptively
    and ignores ``routes``. A route is first tried under the continuity
    constraint with the policy's wavelength assignment; if converters on its
    interior could still save it, the segmented search runs as fallback.
    """
    if policy.routing is Routing.EXHAUST:
        assignment = _exhaust_search(state, src, dst, placement)
        if assignment is None:
            return None
        return state.establish(assignment)

    if not routes:
        return None
    candidates = routes[:1] if policy.routing is Routing.FIXED else routes[:policy.k]
    pnodes = placement.nodes
    for route in candidates:
        w = continuity_assign(state, route, policy.assignment, rng)
        if w is not None:
            lp = LightpathAssignment(route, (w,) * len(route.hops), ())
            return state.establish(lp)
        if pnodes and not pnodes.isdisjoint(route.interior):
            lp = segmented_assign(state, route, placement)
            if lp is not None:
                return state.establish(lp)
    return None


def _exhaust_search(state: NetworkState, src: int, dst: int,
                    placement: ConverterPlacement,
                    max_labels: int = 200_000) -> LightpathAssignment | None:
    """Adaptive search over the current state.

    Without converters: per-wavelength BFS on the links where that wavelength
    is free, keeping the lowest wavelength among minimum-hop solutions. With
    converters: best-first search over (node, arriving wavelength) labels
    ordered by (hops, conversions, wavelength vector, node sequence); node
    sequences are kept simple, matching the route validity rules.
    """
    if not placement.nodes:
        return _exhaust_continuity(state, src, dst)

    topology = state.topology
    adjacency = topology.adjacency
    free_masks = state.free_masks
    pnodes = placement.nodes
    full_degree = placement.degree.kind is DegreeKind.FULL
    max_shift = placement.degree.max_shift

    heap: list[tuple[int, int, tuple[int, ...], tuple[int, ...]]] = []
    for nbr, link in adjacency[src]:
        for w in _bits(free_masks[link]):
            heappush(heap, (1, 0, (w,), (src, nbr)))

    seen: set[tuple[tuple[int, ...], tuple[int, ...]]] = set()
    popped = 0
    while heap:
        hops_n, convs, wvec, nvec = heappop(heap)
        popped += 1
        if popped > max_labels:
            raise RuntimeError(
                f"exhaust search exceeded {max_labels} labels; "
                "use fixed-alternate routing at this scale")
        node = nvec[-1]
        if node == dst:
            route = Route(nvec, tuple(
                topology.link_between(nvec[i], nvec[i + 1])
                for i in range(len(nvec) - 1)))
            conversions = tuple(
                (nvec[i], wvec[i - 1], wvec[i])
                for i in range(1, len(wvec)) if wvec[i] != wvec[i - 1])
            return LightpathAssignment(route, wvec, conversions)
        key = (nvec, wvec)
        if key in seen:
            continue
        seen.add(key)
        arrived = wvec[-1]
        converter = node in pnodes
        for nbr, link in adjacency[node]:
            if nbr in nvec:
                continue
            free = free_masks[link]
            if not free:
                continue
            for w in _bits(free):
                if w == arrived:
                    c = convs
                elif converter and (full_degree or abs(w - arrived) <= max_shift):
                    c = convs + 1
                else:
                    continue
                heappush(heap, (hops_n + 1, c, wvec + (w,), nvec + (nbr,)))
    return None


def _exhaust_continuity(state: NetworkState, src: int, dst: int) -> LightpathAssignment | None:
    topology = state.topology
    adjacency = topology.adjacency
    free_masks = state.free_masks
    best: tuple[int, int, tuple[int, ...]] | None = None  # (hops, w, nodes)
    n = topology.node_count
    for w in range(state.wavelengths):
        bit = 1 << w
        # BFS over links where w is free, tracking the lex-smallest parent.
        path = _lex_bfs_masked(adjacency, free_masks, bit, src, dst, n)
        if path is None:
            continue
        cand = (len(path) - 1, w, path)
        if best is None or cand < best:
            best = cand
    if best is None:
        return None
    _, w, nodes = best
    route = Route(nodes, tuple(topology.link_between(nodes[i], nodes[i + 1])
                               for i in range(len(nodes) - 1)))
    return LightpathAssignment(route, (w,) * route.hop_count, ())


def _lex_bfs_masked(adjacency, free_masks, bit: int, src: int, dst: int,
                    n: int) -> tuple[int, ...] | None:
    """Lex-min minimum-hop path over links whose mask contains ``bit``."""
    from collections import deque

    def bfs(start: int) -> list[int]:
        dist = [-1] * n
        dist[start] = 0
        queue = deque([start])
        while queue:
            u = queue.popleft()
            du = dist[u]
            for v, link in adjacency[u]:
                if dist[v] < 0 and free_masks[link] & bit:
                    dist[v] = du + 1
                    queue.append(v)
        return dist

    dist_s = bfs(src)
    if dist_s[dst] < 0:
        return None
    dist_t = bfs(dst)
    total = dist_s[dst]
    path = [src]
    u = src
    for i in range(total):
        for v, link in adjacency[u]:
            if (free_masks[link] & bit and dist_s[v] == i + 1
                    and dist_t[v] == total - i - 1):
                path.append(v)
                u = v
                break
        else:  # pragma: no cover
            return None
    return tuple(path)
