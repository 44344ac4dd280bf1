"""Sweep orchestration: the parameter grid behind the figure-style outputs.

A sweep walks (node count x wavelengths x conversion factor x traffic kind)
cells over a set of seeds. Within one (n, seed) the topology, the route
table, and the per-kind arrival streams are shared across every wavelength
count and conversion factor, so the emitted curves are paired and the
conversion-factor effect is measured under common random numbers.

All emitted files are byte-deterministic functions of (spec, seeds): floats
are serialized with ``repr`` so parsing them back reproduces the exact
values.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .conversion import (
    FULL_CONVERSION,
    NO_CONVERSION,
    ConversionDegree,
    PlacementStrategy,
    place_converters,
)
from .engine import run
from .rwa import RwaPolicy
from .seeding import derive_seed
from .topology import RouteTable, Topology, generate_random_topology
from .traffic import (
    LoadMode,
    LoadSpec,
    TrafficKind,
    TrafficModel,
    all_ordered_pairs,
    generate_arrivals,
)

RESULTS_FILE = "results.csv"
AGGREGATE_FILE = "aggregate.csv"
PLOT_DIR = "plotdata"

RESULTS_HEADER = "n,w,q,kind,load,seed,offered,blocked,bp,utilization,repair_edges"
AGGREGATE_HEADER = ("n,w,q,kind,load,reps,mean_bp,stderr_bp,"
                    "mean_utilization,stderr_utilization")


class SweepError(RuntimeError):
    """A cell failed; the message names the offending cell."""


@dataclass(frozen=True)
class SweepSpec:
    """Parameter grid; defaults follow the reference experiment set-up."""

    node_counts: tuple[int, ...] = (25, 50, 75, 100)
    wavelength_counts: tuple[int, ...] = (16, 32, 48, 64)
    conversion_factors: tuple[float, ...] = tuple(round(0.1 * i, 1) for i in range(11))
    traffic_kinds: tuple[TrafficKind, ...] = (TrafficKind.CBR, TrafficKind.EXPONENTIAL)
    connection_probability: float = 0.03
    load: LoadSpec = LoadSpec(LoadMode.PER_PAIR, 0.4)
    mean_holding: float = 1.0
    horizon: float = 2000.0
    warmup_frac: float = 0.1
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    policy: RwaPolicy = field(default_factory=RwaPolicy)
    strategy: PlacementStrategy = PlacementStrategy.RANDOM
    degree: ConversionDegree = FULL_CONVERSION

    def __post_init__(self):
        for name in ("node_counts", "wavelength_counts", "conversion_factors",
                     "traffic_kinds", "seeds"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be nonempty")
        if any(not 0.0 <= q <= 1.0 for q in self.conversion_factors):
            raise ValueError("conversion factors must lie in [0,1]")
        if not 0.0 <= self.warmup_frac < 1.0:
            raise ValueError("warmup fraction must lie in [0,1)")

    def cells(self) -> list[tuple[int, int, float, TrafficKind]]:
        return [(n, w, q, kind)
                for n in self.node_counts
                for w in self.wavelength_counts
                for q in self.conversion_factors
                for kind in self.traffic_kinds]


@dataclass(frozen=True)
class ResultRow:
    n: int
    w: int
    q: float
    kind: TrafficKind
    load: float  # per ordered pair, Erlangs
    seed: int
    offered: int
    blocked: int
    bp: float
    utilization: float
    repair_edges: int

    def to_csv(self) -> str:
        return (f"{self.n},{self.w},{self.q!r},{self.kind.value},{self.load!r},"
                f"{self.seed},{self.offered},{self.blocked},{self.bp!r},"
                f"{self.utilization!r},{self.repair_edges}")


@dataclass(frozen=True)
class AggregateRow:
    n: int
    w: int
    q: float
    kind: TrafficKind
    load: float
    reps: int
    mean_bp: float
    stderr_bp: float
    mean_utilization: float
    stderr_utilization: float

    def to_csv(self) -> str:
        return (f"{self.n},{self.w},{self.q!r},{self.kind.value},{self.load!r},"
                f"{self.reps},{self.mean_bp!r},{self.stderr_bp!r},"
                f"{self.mean_utilization!r},{self.stderr_utilization!r}")


def topology_for_cell(spec: SweepSpec, n: int, seed: int) -> Topology:
    """The one topology every cell with this (n, seed) shares.

    Pure function of (spec.connection_probability, n, seed); the sweep and any
    verification recompute identical instances.
    """
    return generate_random_topology(
        n, spec.connection_probability,
        derive_seed("sweep-topology", n, seed),
        wavelengths=spec.wavelength_counts[0])


def _run_seed_block(spec: SweepSpec, n: int, seed: int) -> list[ResultRow]:
    """All (w, q, kind) rows of one (n, seed), sharing topology and streams."""
    base = topology_for_cell(spec, n, seed)
    routes = RouteTable(base, spec.policy.k)
    pairs = all_ordered_pairs(n)
    per_pair = spec.load.per_pair(n)
    warmup = spec.warmup_frac * spec.horizon

    streams = {}
    for kind in spec.traffic_kinds:
        model = TrafficModel(kind, per_pair, spec.mean_holding)
        streams[kind] = (model, generate_arrivals(
            model, pairs, spec.horizon, derive_seed("sweep-traffic", n, seed)))

    placements = {}
    for q in spec.conversion_factors:
        if q > 0:
            placements[q] = place_converters(
                base, q, spec.strategy, spec.degree,
                seed=derive_seed("sweep-placement", n, seed))
        else:
            placements[q] = NO_CONVERSION

    rows = []
    for w in spec.wavelength_counts:
        topo = base if w == base.wavelengths else base.with_wavelengths(w)
        for q in spec.conversion_factors:
            for kind in spec.traffic_kinds:
                model, requests = streams[kind]
                try:
                    report = run(topo, placements[q], spec.policy, model,
                                 spec.horizon, warmup, seed,
                                 requests=requests, routes=routes)
                except Exception as exc:
                    raise SweepError(
                        f"cell n={n} w={w} q={q} kind={kind.value} "
                        f"seed={seed} failed: {exc}") from exc
                row = report.rows[0]
                rows.append(ResultRow(
                    n=n, w=w, q=q, kind=kind, load=per_pair, seed=seed,
                    offered=row.offered, blocked=row.blocked,
                    bp=row.bp, utilization=row.utilization,
                    repair_edges=base.repaired_edges))
    return rows


def _seed_block_task(args):
    return _run_seed_block(*args)


def run_sweep(spec: SweepSpec, out_dir: str | None = None,
              jobs: int = 1) -> tuple[list[ResultRow], list[AggregateRow]]:
    """Execute the grid; optionally write results/aggregate/plot files.

    Work is split into (n, seed) blocks so parallel workers still share
    topologies and streams inside a block; rows are assembled in
    (cell, seed) order regardless of completion order.
    """
    block_keys = [(n, seed) for n in spec.node_counts for seed in spec.seeds]
    if jobs > 1 and len(block_keys) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            blocks = list(pool.map(_seed_block_task,
                                   [(spec, n, seed) for n, seed in block_keys]))
    else:
        blocks = [_run_seed_block(spec, n, seed) for n, seed in block_keys]

    by_key: dict[tuple, ResultRow] = {}
    for rows in blocks:
        for row in rows:
            by_key[(row.n, row.w, row.q, row.kind, row.seed)] = row

    rows = [by_key[(n, w, q, kind, seed)]
            for (n, w, q, kind) in spec.cells()
            for seed in spec.seeds]
    aggregates = aggregate_rows(rows)

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_results_csv(rows, os.path.join(out_dir, RESULTS_FILE))
        write_aggregate_csv(aggregates, os.path.join(out_dir, AGGREGATE_FILE))
        emit_plot_data(aggregates, os.path.join(out_dir, PLOT_DIR))
    return rows, aggregates


def aggregate_rows(rows: list[ResultRow]) -> list[AggregateRow]:
    """Mean and standard error (n-1 denominator) per cell, in first-seen order."""
    groups: dict[tuple, list[ResultRow]] = {}
    for row in rows:
        groups.setdefault((row.n, row.w, row.q, row.kind), []).append(row)

    out = []
    for (n, w, q, kind), members in groups.items():
        bps = [m.bp for m in members]
        utils = [m.utilization for m in members]
        reps = len(members)
        out.append(AggregateRow(
            n=n, w=w, q=q, kind=kind, load=members[0].load, reps=reps,
            mean_bp=_mean(bps), stderr_bp=_stderr(bps),
            mean_utilization=_mean(utils), stderr_utilization=_stderr(utils)))
    return out


def _mean(xs):
    return sum(xs) / len(xs)


def _stderr(xs):
    if len(xs) < 2:
        return 0.0
    m = _mean(xs)
    var = sum((x - m) ** 2 for x in xs) / (len(xs) - 1)
    return (var / len(xs)) ** 0.5


def write_results_csv(rows: list[ResultRow], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(RESULTS_HEADER + "\n")
        for row in rows:
            fh.write(row.to_csv() + "\n")


def write_aggregate_csv(rows: list[AggregateRow], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(AGGREGATE_HEADER + "\n")
        for row in rows:
            fh.write(row.to_csv() + "\n")


def read_aggregate_csv(text: str) -> list[AggregateRow]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != AGGREGATE_HEADER:
        raise ValueError("not an aggregate CSV (bad header)")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 10:
            raise ValueError(f"bad aggregate line {ln!r}")
        rows.append(AggregateRow(
            n=int(parts[0]), w=int(parts[1]), q=float(parts[2]),
            kind=TrafficKind(parts[3]), load=float(parts[4]), reps=int(parts[5]),
            mean_bp=float(parts[6]), stderr_bp=float(parts[7]),
            mean_utilization=float(parts[8]), stderr_utilization=float(parts[9])))
    return rows


@dataclass(frozen=True)
class KneeResult:
    n: int
    w: int
    kind: TrafficKind
    knee: float | None


def knee_report(aggregates: list[AggregateRow], threshold: float = 0.05,
                ) -> list[KneeResult]:
    """Diminishing-returns point of every blocking-vs-q curve.

    The knee is the smallest grid q after which every per-step reduction in
    mean blocking probability falls below ``threshold`` times the curve's
    total reduction; None for flat curves (or when no such q with at least
    one following step exists).
    """
    curves: dict[tuple, list[AggregateRow]] = {}
    for row in aggregates:
        curves.setdefault((row.n, row.w, row.kind), []).append(row)

    out = []
    for (n, w, kind), members in curves.items():
        members = sorted(members, key=lambda r: r.q)
        if len(members) < 3:
            raise ValueError(
                f"curve n={n} w={w} kind={kind.value} has {len(members)} "
                "points; need at least 3")
        qs = [m.q for m in members]
        bps = [m.mean_bp for m in members]
        total = bps[0] - bps[-1]
        knee = None
        if total > 0:
            cut = threshold * total
            for i in range(len(qs) - 1):
                if all(bps[j] - bps[j + 1] < cut for j in range(i, len(bps) - 1)):
                    knee = qs[i]
                    break
        out.append(KneeResult(n, w, kind, knee))
    return out


def emit_plot_data(aggregates: list[AggregateRow], out_dir: str) -> list[str]:
    """Figure-ready whitespace data files plus a gnuplot script.

    One blocking-probability file and one utilization file per (n, w), with a
    q column and one (value, stderr) column pair per traffic kind present.
    Missing grid cells are an error listing every gap.
    """
    if not aggregates:
        raise ValueError("aggregate table is empty")
    ns = sorted({r.n for r in aggregates})
    ws = sorted({r.w for r in aggregates})
    qs = sorted({r.q for r in aggregates})
    kinds = [k for k in (TrafficKind.CBR, TrafficKind.EXPONENTIAL)
             if any(r.kind is k for r in aggregates)]

    table = {(r.n, r.w, r.q, r.kind): r for r in aggregates}
    gaps = [(n, w, q, kind.value)
            for n in ns for w in ws for q in qs for kind in kinds
            if (n, w, q, kind) not in table]
    if gaps:
        raise ValueError(f"aggregate table has missing cells: {gaps}")

    os.makedirs(out_dir, exist_ok=True)
    written = []
    for n in ns:
        for w in ws:
            for metric, prefix in (("bp", "blocking"), ("utilization", "utilization")):
                name = f"{prefix}_n{n}_w{w}.dat"
                path = os.path.join(out_dir, name)
                cols = ["q"]
                for kind in kinds:
                    cols += [f"{metric}_{kind.value}", f"{metric}_{kind.value}_err"]
                lines = ["# " + " ".join(cols)]
                for q in qs:
                    vals = [repr(q)]
                    for kind in kinds:
                        row = table[(n, w, q, kind)]
                        if metric == "bp":
                            vals += [repr(row.mean_bp), repr(row.stderr_bp)]
                        else:
                            vals += [repr(row.mean_utilization),
                                     repr(row.stderr_utilization)]
                    lines.append(" ".join(vals))
                with open(path, "w", encoding="utf-8", newline="\n") as fh:
                    fh.write("\n".join(lines) + "\n")
                written.append(path)

    script = _gnuplot_script(ns, ws, kinds)
    script_path = os.path.join(out_dir, "plots.gp")
    with open(script_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(script)
    written.append(script_path)
    return written


def _gnuplot_script(ns, ws, kinds) -> str:
    lines = [
        "# Conversion-factor curves; linear q versus linear metric.",
        "set xlabel 'conversion factor q'",
        "set grid",
        "set key top right",
        "set term pngcairo size 900,600",
    ]
    for n in ns:
        for w in ws:
            for prefix, ylabel in (("blocking", "blocking probability"),
                                   ("utilization", "link utilization")):
                lines.append(f"set ylabel '{ylabel}'")
                lines.append(f"set output '{prefix}_n{n}_w{w}.png'")
                plots = []
                for i, kind in enumerate(kinds):
                    col = 2 + 2 * i
                    plots.append(
                        f"'{prefix}_n{n}_w{w}.dat' using 1:{col}:{col + 1} "
                        f"with yerrorlines title '{kind.value}'")
                lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Flat "section.key = value" configuration files


CONFIG_KEYS = {
    "topology.nodes", "topology.prob", "topology.wavelengths", "topology.seed",
    "traffic.kind", "traffic.load_erlang", "traffic.load_mode",
    "traffic.mean_holding_s", "traffic.horizon_s",
    "conv.factor", "conv.strategy", "conv.degree", "conv.range",
    "rwa.routing", "rwa.k", "rwa.assignment",
    "sim.seeds", "sim.warmup_frac",
    "sweep.node_counts", "sweep.wavelength_counts", "sweep.conversion_factors",
    "sweep.traffic_kinds", "sweep.connection_probability", "sweep.seeds",
}


def parse_config(text: str) -> dict[str, str]:
    """Parse the flat key = value format; '#' starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'section.key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        out[key] = value
    return out


def _ints(value: str) -> tuple[int, ...]:
    return tuple(int(v.strip()) for v in value.split(",") if v.strip())


def _floats(value: str) -> tuple[float, ...]:
    return tuple(float(v.strip()) for v in value.split(",") if v.strip())


def _kinds(value: str) -> tuple[TrafficKind, ...]:
    return tuple(TrafficKind(v.strip()) for v in value.split(",") if v.strip())


def load_spec_from_config(cfg: dict[str, str]) -> LoadSpec:
    mode = LoadMode(cfg.get("traffic.load_mode", "per_pair"))
    return LoadSpec(mode, float(cfg.get("traffic.load_erlang", "0.4")))


def policy_from_config(cfg: dict[str, str]) -> RwaPolicy:
    from .rwa import Assignment, Routing

    return RwaPolicy(
        routing=Routing(cfg.get("rwa.routing", "alternate")),
        k=int(cfg.get("rwa.k", "3")),
        assignment=Assignment(cfg.get("rwa.assignment", "first_fit")))


def degree_from_config(cfg: dict[str, str]) -> ConversionDegree:
    from .conversion import DegreeKind

    kind = DegreeKind(cfg.get("conv.degree", "full"))
    if kind is DegreeKind.FULL:
        return FULL_CONVERSION
    return ConversionDegree(kind, int(cfg.get("conv.range", "1")))


def sweep_spec_from_config(cfg: dict[str, str]) -> SweepSpec:
    defaults = SweepSpec()
    return SweepSpec(
        node_counts=_ints(cfg["sweep.node_counts"])
        if "sweep.node_counts" in cfg else defaults.node_counts,
        wavelength_counts=_ints(cfg["sweep.wavelength_counts"])
        if "sweep.wavelength_counts" in cfg else defaults.wavelength_counts,
        conversion_factors=_floats(cfg["sweep.conversion_factors"])
        if "sweep.conversion_factors" in cfg else defaults.conversion_factors,
        traffic_kinds=_kinds(cfg["sweep.traffic_kinds"])
        if "sweep.traffic_kinds" in cfg else defaults.traffic_kinds,
        connection_probability=float(cfg.get("sweep.connection_probability", "0.03")),
        load=load_spec_from_config(cfg),
        mean_holding=float(cfg.get("traffic.mean_holding_s", "1.0")),
        horizon=float(cfg.get("traffic.horizon_s", "2000.0")),
        warmup_frac=float(cfg.get("sim.warmup_frac", "0.1")),
        seeds=_ints(cfg["sweep.seeds"]) if "sweep.seeds" in cfg else defaults.seeds,
        policy=policy_from_config(cfg),
        strategy=PlacementStrategy(cfg.get("conv.strategy", "random")),
        degree=degree_from_config(cfg))
