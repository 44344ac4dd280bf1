"""Pydantic request/response models for the service endpoints."""

from __future__ import annotations

from pydantic import BaseModel, Field


class TopologyRequest(BaseModel):
    nodes: int = Field(ge=2)
    prob: float = Field(ge=0.0, le=1.0)
    wavelengths: int = Field(default=16, ge=1)
    seed: int = 0


class TopologyResponse(BaseModel):
    nodes: int
    wavelengths: int
    links: list[tuple[int, int]]
    repaired_edges: int
    text: str
    digest: str


class ErlangBResponse(BaseModel):
    load: float
    servers: int
    blocking: float


class TrafficSettings(BaseModel):
    kind: str = "exp"  # cbr | exp
    load_erlang: float = Field(default=0.4, gt=0.0)
    load_mode: str = "per_pair"  # per_pair | total
    mean_holding_s: float = Field(default=1.0, gt=0.0)
    horizon_s: float = Field(default=2000.0, gt=0.0)


class ConversionSettings(BaseModel):
    factor: float = Field(default=0.0, ge=0.0, le=1.0)
    strategy: str = "random"  # random | degree | transit
    degree: str = "full"  # full | limited
    range: int = Field(default=1, ge=1)


class RwaSettings(BaseModel):
    routing: str = "alternate"  # fixed | alternate | exhaust
    k: int = Field(default=3, ge=1)
    assignment: str = "first_fit"  # first_fit | most_used | least_used | random


class RunRequest(BaseModel):
    nodes: int = Field(ge=2)
    prob: float = Field(ge=0.0, le=1.0)
    wavelengths: int = Field(default=16, ge=1)
    traffic: TrafficSettings = TrafficSettings()
    conv: ConversionSettings = ConversionSettings()
    rwa: RwaSettings = RwaSettings()
    seeds: list[int] = Field(min_length=1)
    warmup_frac: float = Field(default=0.1, ge=0.0, lt=1.0)
    topology_seed: int | None = None  # pin one topology across seeds
    drain: bool = False
    trace_dir: str | None = None  # per-seed decision trace CSVs


class ReplicationRow(BaseModel):
    seed: int
    offered: int
    blocked: int
    bp: float
    utilization: float


class RunResponse(BaseModel):
    rows: list[ReplicationRow]
    offered: int
    blocked: int
    mean_bp: float
    stderr_bp: float
    mean_utilization: float
    stderr_utilization: float


class SweepRequest(BaseModel):
    node_counts: list[int] = [25, 50, 75, 100]
    wavelength_counts: list[int] = [16, 32, 48, 64]
    conversion_factors: list[float] = [round(0.1 * i, 1) for i in range(11)]
    traffic_kinds: list[str] = ["cbr", "exp"]
    connection_probability: float = Field(default=0.03, ge=0.0, le=1.0)
    traffic: TrafficSettings = TrafficSettings()
    conv: ConversionSettings = ConversionSettings()
    rwa: RwaSettings = RwaSettings()
    seeds: list[int] = Field(default=[0, 1, 2, 3, 4], min_length=1)
    warmup_frac: float = Field(default=0.1, ge=0.0, lt=1.0)
    out_dir: str | None = None
    jobs: int = Field(default=1, ge=1)


class AggregateRowModel(BaseModel):
    n: int
    w: int
    q: float
    kind: str
    load: float
    reps: int
    mean_bp: float
    stderr_bp: float
    mean_utilization: float
    stderr_utilization: float


class SweepResponse(BaseModel):
    row_count: int
    aggregates: list[AggregateRowModel]
    files: list[str]


class KneeRequest(BaseModel):
    aggregate_csv: str
    threshold: float = Field(default=0.05, gt=0.0)


class KneeRow(BaseModel):
    n: int
    w: int
    kind: str
    knee: float | None


class KneeResponse(BaseModel):
    knees: list[KneeRow]
