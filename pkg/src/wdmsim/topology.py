"""Physical network model: random topologies, candidate routes, file round-trip.

Topologies are immutable after construction; route sets are computed on demand
and cached in a :class:`RouteTable`, so one topology can safely back many
concurrent simulation replications.
"""

from __future__ import annotations

import hashlib
import random
from collections import deque
from dataclasses import dataclass
from heapq import heappop, heappush

from .seeding import derive_seed

ORDERED = "ordered"
UNORDERED = "unordered"


@dataclass(frozen=True)
class Link:
    """Undirected fiber link with a shared pool of ``wavelengths`` channels.

    Endpoints are stored in (low, high) order; a wavelength carries one
    lightpath on the link regardless of direction.
    """

    u: int
    v: int
    wavelengths: int


@dataclass(frozen=True)
class Route:
    """A simple path: node sequence plus the link index of every hop."""

    nodes: tuple[int, ...]
    hops: tuple[int, ...]

    @property
    def hop_count(self) -> int:
        return len(self.hops)

    @property
    def interior(self) -> tuple[int, ...]:
        """Intermediate nodes, the only places a converter can act."""
        return self.nodes[1:-1]


class Topology:
    """Connected undirected network with one wavelength pool per link.

    Immutable by convention: nothing mutates ``links`` or the adjacency after
    ``__init__``, so instances are safe to share across threads/processes.
    """

    def __init__(self, node_count: int, links: list[Link] | tuple[Link, ...],
                 repaired_edges: int = 0):
        if node_count < 2:
            raise ValueError(f"need at least 2 nodes, got {node_count}")
        if not links:
            raise ValueError("a connected topology needs at least one link")
        links = tuple(links)
        wavelengths = links[0].wavelengths
        if wavelengths < 1:
            raise ValueError(f"wavelength count must be >= 1, got {wavelengths}")
        seen: set[tuple[int, int]] = set()
        for ln in links:
            if ln.u == ln.v:
                raise ValueError(f"self-loop at node {ln.u}")
            if not (0 <= ln.u < node_count and 0 <= ln.v < node_count):
                raise ValueError(f"link ({ln.u},{ln.v}) out of range")
            if ln.wavelengths != wavelengths:
                raise ValueError("all links of one topology share the same W")
            key = (ln.u, ln.v) if ln.u < ln.v else (ln.v, ln.u)
            if key in seen:
                raise ValueError(f"duplicate link {key}")
            seen.add(key)

        self.node_count = node_count
        self.links = links
        self.wavelengths = wavelengths
        self.repaired_edges = repaired_edges

        nbrs: list[list[int]] = [[] for _ in range(node_count)]
        adj: list[list[tuple[int, int]]] = [[] for _ in range(node_count)]
        index: dict[tuple[int, int], int] = {}
        for i, ln in enumerate(links):
            a, b = (ln.u, ln.v) if ln.u < ln.v else (ln.v, ln.u)
            index[(a, b)] = i
            nbrs[a].append(b)
            nbrs[b].append(a)
            adj[a].append((b, i))
            adj[b].append((a, i))
        self.neighbors = tuple(tuple(sorted(n)) for n in nbrs)
        self.adjacency = tuple(tuple(sorted(a)) for a in adj)
        self._link_index = index

        if not self._is_connected():
            raise ValueError("topology must be connected")

    def _is_connected(self) -> bool:
        seen = [False] * self.node_count
        seen[0] = True
        queue = deque([0])
        count = 1
        while queue:
            u = queue.popleft()
            for v in self.neighbors[u]:
                if not seen[v]:
                    seen[v] = True
                    count += 1
                    queue.append(v)
        return count == self.node_count

    def link_between(self, u: int, v: int) -> int:
        """Index of the link joining ``u`` and ``v``; KeyError if absent."""
        key = (u, v) if u < v else (v, u)
        return self._link_index[key]

    def with_wavelengths(self, wavelengths: int) -> "Topology":
        """Same graph, different per-link channel count.

        Link indices are preserved, so route tables built against one variant
        remain valid for the other.
        """
        links = [Link(ln.u, ln.v, wavelengths) for ln in self.links]
        return Topology(self.node_count, links, self.repaired_edges)

    def to_text(self) -> str:
        """Serialize to the plain-text exchange format.

        Line 1 is ``N W``, then one ``u v`` line per link in generation order
        (repair edges last), then a ``# repaired COUNT`` trailer.
        """
        out = [f"{self.node_count} {self.wavelengths}"]
        out.extend(f"{ln.u} {ln.v}" for ln in self.links)
        out.append(f"# repaired {self.repaired_edges}")
        return "\n".join(out) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Topology":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty topology file")
        repaired = 0
        body = []
        for ln in lines:
            if ln.startswith("#"):
                parts = ln[1:].split()
                if len(parts) == 2 and parts[0] == "repaired":
                    repaired = int(parts[1])
                continue
            body.append(ln)
        head = body[0].split()
        if len(head) != 2:
            raise ValueError(f"bad header line {body[0]!r}")
        n, w = int(head[0]), int(head[1])
        links = []
        for ln in body[1:]:
            parts = ln.split()
            if len(parts) != 2:
                raise ValueError(f"bad link line {ln!r}")
            u, v = int(parts[0]), int(parts[1])
            a, b = (u, v) if u < v else (v, u)
            links.append(Link(a, b, w))
        return cls(n, links, repaired)

    def digest(self) -> str:
        """Stable content hash, used to verify topology pairing in sweeps."""
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()


def route_count(n: int, mode: str) -> int:
    """Number of source-destination routes for an ``n``-node network.

    ``ordered`` counts both directions of a pair, ``unordered`` counts each
    pair once.
    """
    if n < 1:
        raise ValueError(f"node count must be >= 1, got {n}")
    if mode == ORDERED:
        return n * (n - 1)
    if mode == UNORDERED:
        return n * (n - 1) // 2
    raise ValueError(f"mode must be 'ordered' or 'unordered', got {mode!r}")


def generate_random_topology(n: int, p: float, seed: int,
                             wavelengths: int = 16) -> Topology:
    """Random topology: each node pair is linked independently with probability p.

    Disconnected samples are repaired by adding uniformly random
    inter-component edges until connected; those edges are appended after the
    random draw and counted in ``repaired_edges``. Deterministic for fixed
    (n, p, seed).
    """
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"connection probability must be in [0,1], got {p}")
    if wavelengths < 1:
        raise ValueError(f"wavelength count must be >= 1, got {wavelengths}")

    rng = random.Random(derive_seed("topology", n, p, seed))
    links: list[Link] = []
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    components = n
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p:
                links.append(Link(u, v, wavelengths))
                ru, rv = find(u), find(v)
                if ru != rv:
                    parent[ru] = rv
                    components -= 1

    repaired = 0
    while components > 1:
        u = rng.randrange(n)
        v = rng.randrange(n)
        if u == v:
            continue
        ru, rv = find(u), find(v)
        if ru == rv:
            continue
        a, b = (u, v) if u < v else (v, u)
        links.append(Link(a, b, wavelengths))
        parent[ru] = rv
        components -= 1
        repaired += 1

    return Topology(n, links, repaired)


def _lex_shortest_path(topology: Topology, src: int, dst: int,
                       banned_nodes: frozenset[int] | set[int] = frozenset(),
                       banned_edges: frozenset | set = frozenset()) -> tuple[int, ...] | None:
    """Minimum-hop path with the lexicographically smallest node sequence.

    Two plain BFS passes give forward/backward hop distances in the restricted
    graph; the path is then grown greedily, always taking the smallest
    neighbor that still lies on some minimum-hop path. Greedy is exact here
    because layer indices strictly increase along any minimum-hop path.
    """
    n = topology.node_count
    nbrs = topology.neighbors

    def bfs(start: int) -> list[int]:
        dist = [-1] * n
        dist[start] = 0
        queue = deque([start])
        while queue:
            u = queue.popleft()
            du = dist[u]
            for v in nbrs[u]:
                if dist[v] < 0 and v not in banned_nodes:
                    edge = (u, v) if u < v else (v, u)
                    if edge in banned_edges:
                        continue
                    dist[v] = du + 1
                    queue.append(v)
        return dist

    if src in banned_nodes or dst in banned_nodes:
        return None
    dist_s = bfs(src)
    if dist_s[dst] < 0:
        return None
    dist_t = bfs(dst)
    total = dist_s[dst]

    path = [src]
    u = src
    for i in range(total):
        for v in nbrs[u]:
            if v in banned_nodes or dist_s[v] != i + 1 or dist_t[v] != total - i - 1:
                continue
            edge = (u, v) if u < v else (v, u)
            if edge in banned_edges:
                continue
            path.append(v)
            u = v
            break
        else:  # pragma: no cover - BFS guarantees a successor exists
            return None
    return tuple(path)


def _route_from_nodes(topology: Topology, nodes: tuple[int, ...]) -> Route:
    hops = tuple(topology.link_between(nodes[i], nodes[i + 1])
                 for i in range(len(nodes) - 1))
    return Route(nodes, hops)


def k_shortest_routes(topology: Topology, src: int, dst: int, k: int) -> list[Route]:
    """Up to ``k`` loop-free routes ordered by (hop count, node sequence).

    Yen-style enumeration over the hop-count metric with lexicographic
    tie-breaking everywhere, so the output is a deterministic prefix of the
    full (hops, nodes)-sorted list of simple paths. Routes are not required
    to be link-disjoint.
    """
    n = topology.node_count
    if not (0 <= src < n and 0 <= dst < n):
        raise ValueError(f"endpoints ({src},{dst}) out of range")
    if src == dst:
        raise ValueError("source and destination must differ")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")

    first = _lex_shortest_path(topology, src, dst)
    if first is None:
        return []
    accepted: list[tuple[int, ...]] = [first]
    accepted_set = {first}
    candidates: list[tuple[int, tuple[int, ...]]] = []
    in_heap: set[tuple[int, ...]] = set()

    while len(accepted) < k:
        prev = accepted[-1]
        for j in range(len(prev) - 1):
            spur = prev[j]
            root = prev[:j + 1]
            banned_edges = set()
            for path in accepted:
                if path[:j + 1] == root and len(path) > j + 1:
                    a, b = path[j], path[j + 1]
                    banned_edges.add((a, b) if a < b else (b, a))
            banned_nodes = set(root[:-1])
            tail = _lex_shortest_path(topology, spur, dst, banned_nodes, banned_edges)
            if tail is None:
                continue
            total = root[:-1] + tail
            if total in accepted_set or total in in_heap:
                continue
            heappush(candidates, (len(total) - 1, total))
            in_heap.add(total)
        if not candidates:
            break
        _, best = heappop(candidates)
        in_heap.discard(best)
        accepted.append(best)
        accepted_set.add(best)

    return [_route_from_nodes(topology, nodes) for nodes in accepted]


class RouteTable:
    """Per-pair route cache for fixed / fixed-alternate routing.

    Route sets are computed lazily per (src, dst) and memoized; the table is
    append-only, so concurrent readers that pre-warm their pairs (or tolerate
    recomputation) can share it.
    """

    def __init__(self, topology: Topology, k: int = 3):
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        self.topology = topology
        self.k = k
        self._cache: dict[tuple[int, int], tuple[Route, ...]] = {}

    def routes(self, src: int, dst: int) -> tuple[Route, ...]:
        key = (src, dst)
        found = self._cache.get(key)
        if found is None:
            found = tuple(k_shortest_routes(self.topology, src, dst, self.k))
            self._cache[key] = found
        return found
