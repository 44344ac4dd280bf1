"""Discrete-event simulation core: event loop, metrics, Erlang-B oracle.

One replication owns one :class:`~wdmsim.rwa.NetworkState` and processes a
merged stream of arrivals and dynamically scheduled departures in
(time, insertion sequence) order. Arrivals are inserted lazily from the
time-sorted request list, so a departure scheduled by an earlier acceptance
carries the smaller sequence and is processed first when it ties an arrival
(a circuit occupies the half-open interval [arrival, arrival + holding));
simultaneous departures resolve in establishment order. Replications are
independent and may run concurrently; aggregation is a deterministic fold.

Requests arriving before the warmup cutoff are admitted and released normally
but excluded from the counts, and occupancy is integrated only over
[warmup, horizon].
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from heapq import heappop, heappush

from .conversion import (
    FULL_CONVERSION,
    ConversionDegree,
    ConverterPlacement,
    NO_CONVERSION,
    PlacementStrategy,
    place_converters,
)
from .rwa import (
    Assignment,
    NetworkState,
    Routing,
    RwaPolicy,
    attempt_establish,
    release,
    validate_state,
)
from .seeding import derive_seed
from .topology import RouteTable, Topology, generate_random_topology
from .traffic import SessionRequest, TrafficModel, all_ordered_pairs, generate_arrivals


@dataclass(frozen=True)
class ReplicationResult:
    """Counts and integrals of one simulation run."""

    seed: int
    offered: int
    blocked: int
    accepted: int
    busy_integral: float  # wavelength-seconds over [warmup, horizon]
    horizon: float
    warmup: float
    capacity_slots: int  # sum of W over links
    transit: tuple[int, ...]  # post-warmup accepted lightpaths through each node

    @property
    def bp(self) -> float:
        return self.blocked / self.offered if self.offered else 0.0

    @property
    def utilization(self) -> float:
        window = self.horizon - self.warmup
        return self.busy_integral / (window * self.capacity_slots)


def _mean(xs: list[float]) -> float:
    return sum(xs) / len(xs)


def _stderr(xs: list[float]) -> float:
    if len(xs) < 2:
        return 0.0
    m = _mean(xs)
    var = sum((x - m) ** 2 for x in xs) / (len(xs) - 1)
    return math.sqrt(var / len(xs))


@dataclass(frozen=True)
class MetricsReport:
    """Per-replication rows plus across-replication statistics."""

    rows: tuple[ReplicationResult, ...]

    def __post_init__(self):
        if not self.rows:
            raise ValueError("a report needs at least one replication")

    @property
    def offered(self) -> int:
        return sum(r.offered for r in self.rows)

    @property
    def blocked(self) -> int:
        return sum(r.blocked for r in self.rows)

    @property
    def accepted(self) -> int:
        return sum(r.accepted for r in self.rows)

    @property
    def busy_integral(self) -> float:
        return sum(r.busy_integral for r in self.rows)

    @property
    def horizon(self) -> float:
        return self.rows[0].horizon

    @property
    def warmup(self) -> float:
        return self.rows[0].warmup

    @property
    def mean_bp(self) -> float:
        return _mean([r.bp for r in self.rows])

    @property
    def stderr_bp(self) -> float:
        return _stderr([r.bp for r in self.rows])

    @property
    def mean_utilization(self) -> float:
        return _mean([r.utilization for r in self.rows])

    @property
    def stderr_utilization(self) -> float:
        return _stderr([r.utilization for r in self.rows])

    @property
    def transit_counts(self) -> tuple[int, ...]:
        totals = [0] * len(self.rows[0].transit)
        for r in self.rows:
            for i, c in enumerate(r.transit):
                totals[i] += c
        return tuple(totals)

    def to_csv(self) -> str:
        lines = ["seed,offered,blocked,bp,utilization"]
        lines.extend(
            f"{r.seed},{r.offered},{r.blocked},{r.bp!r},{r.utilization!r}"
            for r in self.rows)
        return "\n".join(lines) + "\n"


def decision_trace_writer(fh):
    """Trace hook writing one ``arrival,src,dst,outcome,route_hops,conversions``
    line per routing decision."""
    fh.write("arrival,src,dst,outcome,route_hops,conversions\n")

    def write(req, lp):
        if lp is None:
            fh.write(f"{req.arrival!r},{req.src},{req.dst},blocked,,\n")
        else:
            fh.write(f"{req.arrival!r},{req.src},{req.dst},accepted,"
                     f"{lp.route.hop_count},{len(lp.conversions)}\n")

    return write


def blocking_probability(report: MetricsReport) -> float:
    """Blocked fraction of offered requests; 0 by convention when idle."""
    offered = report.offered
    return report.blocked / offered if offered else 0.0


def link_utilization(report: MetricsReport, topology: Topology) -> float:
    """Network-average fraction of wavelength-time occupied."""
    window = report.horizon - report.warmup
    capacity = topology.wavelengths * len(topology.links)
    return report.busy_integral / (len(report.rows) * window * capacity)


def erlang_b(load: float, servers: int) -> float:
    """M/M/c/c blocking probability via the stable recursion
    B(0)=1, B(j) = load*B(j-1) / (j + load*B(j-1))."""
    if load < 0:
        raise ValueError(f"load must be >= 0, got {load}")
    if servers < 0:
        raise ValueError(f"server count must be >= 0, got {servers}")
    b = 1.0
    for j in range(1, servers + 1):
        b = load * b / (j + load * b)
    return b


def run(topology: Topology,
        placement: ConverterPlacement,
        policy: RwaPolicy,
        traffic: TrafficModel,
        horizon: float,
        warmup: float,
        seed: int,
        requests: list[SessionRequest] | None = None,
        routes: RouteTable | None = None,
        drain: bool = False,
        trace=None) -> MetricsReport:
    """One replication; deterministic for fixed inputs.

    ``requests`` overrides arrival generation (used to pair runs on a common
    stream), ``routes`` shares a precomputed route table across runs,
    ``drain`` adds a full state validation after the final departure, and
    ``trace`` is called as trace(request, lightpath_or_None) per decision.
    """
    if not 0 <= warmup < horizon:
        raise ValueError(f"need 0 <= warmup < horizon, got {warmup}, {horizon}")
    if requests is None:
        requests = generate_arrivals(traffic, all_ordered_pairs(topology.node_count),
                                     horizon, derive_seed(seed, "arrivals"))
    if routes is None and policy.routing is not Routing.EXHAUST:
        routes = RouteTable(topology, policy.k)
    rng = (random.Random(derive_seed(seed, "decision"))
           if policy.assignment is Assignment.RANDOM else None)

    state = NetworkState(topology)
    departures: list[tuple[float, int, object]] = []
    seq = 0
    offered = blocked = 0
    busy_integral = 0.0
    last_t = 0.0
    transit = [0] * topology.node_count
    exhaust = policy.routing is Routing.EXHAUST
    get_routes = None if exhaust else routes.routes

    def advance(t: float) -> None:
        nonlocal busy_integral, last_t
        lo = last_t if last_t > warmup else warmup
        hi = t if t < horizon else horizon
        if hi > lo and state.busy_slots:
            busy_integral += state.busy_slots * (hi - lo)
        last_t = t

    for req in requests:
        t = req.arrival
        while departures and departures[0][0] <= t:
            dep_t, _, lp = heappop(departures)
            advance(dep_t)
            release(state, lp)
        advance(t)
        counted = t >= warmup
        if counted:
            offered += 1
        lp = attempt_establish(state, req.src, req.dst,
                               None if exhaust else get_routes(req.src, req.dst),
                               placement, policy, rng)
        if trace is not None:
            trace(req, lp)
        if lp is None:
            if counted:
                blocked += 1
        else:
            heappush(departures, (t + req.holding, seq, lp))
            seq += 1
            if counted:
                nodes = lp.route.nodes
                for node in nodes[1:-1]:
                    transit[node] += 1

    while departures:
        dep_t, _, lp = heappop(departures)
        advance(dep_t)
        release(state, lp)

    if drain:
        if state.busy_slots or state.active:
            raise RuntimeError("state not drained after final departure")
        validate_state(state)

    row = ReplicationResult(
        seed=seed,
        offered=offered,
        blocked=blocked,
        accepted=offered - blocked,
        busy_integral=busy_integral,
        horizon=horizon,
        warmup=warmup,
        capacity_slots=topology.wavelengths * len(topology.links),
        transit=tuple(transit),
    )
    return MetricsReport((row,))


@dataclass(frozen=True)
class RunConfig:
    """Scenario shared by the replications of one cell."""

    nodes: int
    prob: float
    wavelengths: int
    traffic: TrafficModel
    horizon: float
    warmup: float
    conversion_factor: float = 0.0
    strategy: PlacementStrategy = PlacementStrategy.RANDOM
    degree: ConversionDegree = FULL_CONVERSION
    policy: RwaPolicy = field(default_factory=RwaPolicy)
    topology: Topology | None = None  # pin one topology across replications


def replicate(config: RunConfig, seeds: list[int] | tuple[int, ...],
              drain: bool = False, trace_dir: str | None = None) -> MetricsReport:
    """Independent replications, one per seed, aggregated into one report.

    A pinned topology is shared (with its route table); otherwise each seed
    generates its own. Converter placement with the TRANSIT_RANK strategy
    needs baseline statistics and must be driven explicitly through
    :func:`wdmsim.conversion.place_converters` instead.
    """
    if not seeds:
        raise ValueError("at least one seed is required")
    if config.strategy is PlacementStrategy.TRANSIT_RANK:
        raise ValueError("transit-ranked placement needs explicit baseline stats")

    shared_topo = config.topology
    shared_routes = (RouteTable(shared_topo, config.policy.k)
                     if shared_topo is not None
                     and config.policy.routing is not Routing.EXHAUST else None)
    rows = []
    for seed in seeds:
        if shared_topo is not None:
            topo, routes = shared_topo, shared_routes
        else:
            topo = generate_random_topology(config.nodes, config.prob,
                                            derive_seed("topology", seed),
                                            config.wavelengths)
            routes = None
        if config.conversion_factor > 0:
            placement = place_converters(topo, config.conversion_factor,
                                         config.strategy, config.degree,
                                         seed=derive_seed("placement", seed))
        else:
            placement = NO_CONVERSION
        if trace_dir is not None:
            import os

            os.makedirs(trace_dir, exist_ok=True)
            path = os.path.join(trace_dir, f"trace_seed{seed}.csv")
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                report = run(topo, placement, config.policy, config.traffic,
                             config.horizon, config.warmup, seed, routes=routes,
                             drain=drain, trace=decision_trace_writer(fh))
        else:
            report = run(topo, placement, config.policy, config.traffic,
                         config.horizon, config.warmup, seed, routes=routes,
                         drain=drain)
        rows.append(report.rows[0])
    return MetricsReport(tuple(rows))
