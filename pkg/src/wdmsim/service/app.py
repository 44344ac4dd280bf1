"""FastAPI application wrapping the simulator core.

Error mapping: domain validation problems (ValueError) become 400 responses
with ``kind: usage``; occupancy-invariant violations become 500 responses
with ``kind: invariant``. Both carry a human-readable ``detail``.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..conversion import (
    ConversionDegree,
    DegreeKind,
    FULL_CONVERSION,
    PlacementStrategy,
)
from ..engine import RunConfig, erlang_b, replicate
from ..experiment import (
    AggregateRow,
    SweepError,
    SweepSpec,
    knee_report,
    read_aggregate_csv,
    run_sweep,
)
from ..rwa import Assignment, InvariantViolation, Routing, RwaPolicy
from ..topology import generate_random_topology
from ..traffic import LoadMode, LoadSpec, TrafficKind, TrafficModel
from . import schemas


def _degree(conv: schemas.ConversionSettings) -> ConversionDegree:
    kind = DegreeKind(conv.degree)
    if kind is DegreeKind.FULL:
        return FULL_CONVERSION
    return ConversionDegree(kind, conv.range)


def _policy(rwa: schemas.RwaSettings) -> RwaPolicy:
    return RwaPolicy(Routing(rwa.routing), rwa.k, Assignment(rwa.assignment))


def _load_spec(traffic: schemas.TrafficSettings) -> LoadSpec:
    return LoadSpec(LoadMode(traffic.load_mode), traffic.load_erlang)


def create_app() -> FastAPI:
    app = FastAPI(title="wdmsim service", version=__version__)

    @app.exception_handler(ValueError)
    async def usage_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=400,
                            content={"detail": str(exc), "kind": "usage"})

    @app.exception_handler(SweepError)
    async def sweep_error(request: Request, exc: SweepError):
        return JSONResponse(status_code=500,
                            content={"detail": str(exc), "kind": "invariant"})

    @app.exception_handler(InvariantViolation)
    async def invariant_error(request: Request, exc: InvariantViolation):
        return JSONResponse(status_code=500,
                            content={"detail": str(exc), "kind": "invariant"})

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/topology/generate", response_model=schemas.TopologyResponse)
    def topology_generate(req: schemas.TopologyRequest):
        topo = generate_random_topology(req.nodes, req.prob, req.seed,
                                        wavelengths=req.wavelengths)
        return schemas.TopologyResponse(
            nodes=topo.node_count,
            wavelengths=topo.wavelengths,
            links=[(ln.u, ln.v) for ln in topo.links],
            repaired_edges=topo.repaired_edges,
            text=topo.to_text(),
            digest=topo.digest(),
        )

    @app.get("/erlang-b", response_model=schemas.ErlangBResponse)
    def erlang_b_endpoint(load: float, servers: int):
        return schemas.ErlangBResponse(load=load, servers=servers,
                                       blocking=erlang_b(load, servers))

    @app.post("/run", response_model=schemas.RunResponse)
    def run_endpoint(req: schemas.RunRequest):
        topology = None
        if req.topology_seed is not None:
            topology = generate_random_topology(req.nodes, req.prob,
                                                req.topology_seed,
                                                wavelengths=req.wavelengths)
        config = RunConfig(
            nodes=req.nodes,
            prob=req.prob,
            wavelengths=req.wavelengths,
            traffic=TrafficModel(TrafficKind(req.traffic.kind),
                                 _load_spec(req.traffic).per_pair(req.nodes),
                                 req.traffic.mean_holding_s),
            horizon=req.traffic.horizon_s,
            warmup=req.warmup_frac * req.traffic.horizon_s,
            conversion_factor=req.conv.factor,
            strategy=PlacementStrategy(req.conv.strategy),
            degree=_degree(req.conv),
            policy=_policy(req.rwa),
            topology=topology,
        )
        report = replicate(config, req.seeds, drain=req.drain,
                           trace_dir=req.trace_dir)
        return schemas.RunResponse(
            rows=[schemas.ReplicationRow(seed=r.seed, offered=r.offered,
                                         blocked=r.blocked, bp=r.bp,
                                         utilization=r.utilization)
                  for r in report.rows],
            offered=report.offered,
            blocked=report.blocked,
            mean_bp=report.mean_bp,
            stderr_bp=report.stderr_bp,
            mean_utilization=report.mean_utilization,
            stderr_utilization=report.stderr_utilization,
        )

    @app.post("/sweep", response_model=schemas.SweepResponse)
    def sweep_endpoint(req: schemas.SweepRequest):
        spec = SweepSpec(
            node_counts=tuple(req.node_counts),
            wavelength_counts=tuple(req.wavelength_counts),
            conversion_factors=tuple(req.conversion_factors),
            traffic_kinds=tuple(TrafficKind(k) for k in req.traffic_kinds),
            connection_probability=req.connection_probability,
            load=_load_spec(req.traffic),
            mean_holding=req.traffic.mean_holding_s,
            horizon=req.traffic.horizon_s,
            warmup_frac=req.warmup_frac,
            seeds=tuple(req.seeds),
            policy=_policy(req.rwa),
            strategy=PlacementStrategy(req.conv.strategy),
            degree=_degree(req.conv),
        )
        rows, aggregates = run_sweep(spec, out_dir=req.out_dir, jobs=req.jobs)
        files = []
        if req.out_dir is not None:
            import os

            from ..experiment import AGGREGATE_FILE, PLOT_DIR, RESULTS_FILE

            files = [os.path.join(req.out_dir, RESULTS_FILE),
                     os.path.join(req.out_dir, AGGREGATE_FILE),
                     os.path.join(req.out_dir, PLOT_DIR)]
        return schemas.SweepResponse(
            row_count=len(rows),
            aggregates=[_aggregate_model(a) for a in aggregates],
            files=files,
        )

    @app.post("/knee", response_model=schemas.KneeResponse)
    def knee_endpoint(req: schemas.KneeRequest):
        aggregates = read_aggregate_csv(req.aggregate_csv)
        knees = knee_report(aggregates, req.threshold)
        return schemas.KneeResponse(
            knees=[schemas.KneeRow(n=k.n, w=k.w, kind=k.kind.value, knee=k.knee)
                   for k in knees])

    return app


def _aggregate_model(a: AggregateRow) -> schemas.AggregateRowModel:
    return schemas.AggregateRowModel(
        n=a.n, w=a.w, q=a.q, kind=a.kind.value, load=a.load, reps=a.reps,
        mean_bp=a.mean_bp, stderr_bp=a.stderr_bp,
        mean_utilization=a.mean_utilization,
        stderr_utilization=a.stderr_utilization)


app = create_app()
