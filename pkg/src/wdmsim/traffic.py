"""Session demand generation under CBR and exponential traffic models.

Traffic is modeled at the lightpath-request level: what matters for blocking
is the arrival and holding process of circuit requests, not the packets inside
an established circuit. Exponential traffic maps to Poisson arrivals with
exponential holding times; CBR maps to strictly periodic arrivals with fixed
holding times and a random initial phase per pair.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum

from .seeding import derive_seed
from .topology import ORDERED, route_count


class TrafficKind(str, Enum):
    CBR = "cbr"
    EXPONENTIAL = "exp"


class LoadMode(str, Enum):
    PER_PAIR = "per_pair"
    TOTAL_NETWORK = "total"


@dataclass(frozen=True, slots=True)
class SessionRequest:
    """One lightpath demand."""

    src: int
    dst: int
    arrival: float
    holding: float


@dataclass(frozen=True)
class TrafficModel:
    kind: TrafficKind
    offered_load: float  # Erlangs per source-destination pair
    mean_holding: float  # seconds

    def __post_init__(self):
        if self.offered_load <= 0:
            raise ValueError(f"offered load must be > 0, got {self.offered_load}")
        if self.mean_holding <= 0:
            raise ValueError(f"mean holding must be > 0, got {self.mean_holding}")


@dataclass(frozen=True)
class LoadSpec:
    """Offered load expressed either per ordered pair or network-total."""

    mode: LoadMode
    value: float

    def __post_init__(self):
        if self.value < 0:
            raise ValueError(f"load must be >= 0, got {self.value}")

    def per_pair(self, n: int) -> float:
        """Resolve to Erlangs per ordered source-destination pair."""
        if self.mode is LoadMode.PER_PAIR:
            return self.value
        return per_route_load(self.value, route_count(n, ORDERED))


def per_route_load(total: float, routes: int) -> float:
    """Uniformly distribute a network-total load over ``routes`` routes."""
    if routes < 1:
        raise ValueError(f"route count must be >= 1, got {routes}")
    return total / routes


def all_ordered_pairs(n: int) -> list[tuple[int, int]]:
    return [(s, d) for s in range(n) for d in range(n) if s != d]


def generate_arrivals(model: TrafficModel, pairs: list[tuple[int, int]],
                      horizon: float, seed: int,
                      cbr_phase: float | None = None) -> list[SessionRequest]:
    """Time-ordered session requests for every pair over ``[0, horizon)``.

    Each pair owns an independent PRNG stream derived from (seed, pair index),
    so appending pairs never perturbs the streams of existing ones. CBR pairs
    get a uniform random initial phase in [0, interval) unless ``cbr_phase``
    pins it (test hook). Ties in arrival time order by (src, dst).
    """
    if horizon <= 0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    if not pairs:
        raise ValueError("at least one source-destination pair is required")
    for s, d in pairs:
        if s == d:
            raise ValueError(f"pair ({s},{d}) has identical endpoints")

    out: list[SessionRequest] = []
    interval = model.mean_holding / model.offered_load  # 1/lambda
    rate = 1.0 / interval

    if model.kind is TrafficKind.CBR:
        for i, (s, d) in enumerate(pairs):
            rng = random.Random(derive_seed(seed, "pair", i))
            phase = rng.uniform(0.0, interval) if cbr_phase is None else cbr_phase
            t = phase
            while t < horizon:
                out.append(SessionRequest(s, d, t, model.mean_holding))
                t += interval
    else:
        mean_holding = model.mean_holding
        for i, (s, d) in enumerate(pairs):
            rng = random.Random(derive_seed(seed, "pair", i))
            expo = rng.expovariate
            t = expo(rate)
            while t < horizon:
                out.append(SessionRequest(s, d, t, expo(1.0 / mean_holding)))
                t += expo(rate)

    out.sort(key=lambda r: (r.arrival, r.src, r.dst))
    return out


def dump_requests(requests: list[SessionRequest], path) -> None:
    """Write the optional request trace: ``arrival,src,dst,holding``."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("arrival,src,dst,holding\n")
        for r in requests:
            fh.write(f"{r.arrival!r},{r.src},{r.dst},{r.holding!r}\n")
