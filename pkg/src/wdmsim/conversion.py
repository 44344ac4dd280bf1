"""Wavelength converter capability and placement.

A placement equips K = round(q*N) nodes with converters (half-up rounding;
the conversion factor q is the knob the experiments sweep). Placements are
immutable and `can_convert` is a pure read, so both are freely shareable
across concurrent replications.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum

from .seeding import derive_seed
from .topology import Topology


class DegreeKind(str, Enum):
    FULL = "full"
    LIMITED = "limited"


class PlacementStrategy(str, Enum):
    RANDOM = "random"
    DEGREE_RANK = "degree"
    TRANSIT_RANK = "transit"


@dataclass(frozen=True)
class ConversionDegree:
    """FULL shifts any wavelength to any other; LIMITED only within
    ``max_shift`` indices."""

    kind: DegreeKind
    max_shift: int = 1

    def __post_init__(self):
        if self.kind is DegreeKind.LIMITED and self.max_shift < 1:
            raise ValueError(f"limited degree needs max_shift >= 1, got {self.max_shift}")


FULL_CONVERSION = ConversionDegree(DegreeKind.FULL)


@dataclass(frozen=True)
class ConverterPlacement:
    nodes: frozenset[int] = field(default_factory=frozenset)
    degree: ConversionDegree = FULL_CONVERSION


NO_CONVERSION = ConverterPlacement()


def converter_count(q: float, n: int) -> int:
    """K = round(q*N), half up."""
    return int(math.floor(q * n + 0.5))


def place_converters(topology: Topology, q: float,
                     strategy: PlacementStrategy = PlacementStrategy.RANDOM,
                     degree: ConversionDegree = FULL_CONVERSION,
                     seed: int = 0,
                     transit_stats: list[int] | tuple[int, ...] | None = None,
                     ) -> ConverterPlacement:
    """Choose K = round(q*N) converter nodes.

    RANDOM takes the first K entries of a seed-shuffled node permutation, so
    placements for the same seed are nested across q (growing q only ever adds
    converters, which keeps conversion-factor curves paired). DEGREE_RANK
    prefers high-degree nodes, TRANSIT_RANK nodes with many transit lightpaths
    in a baseline run; both break ties by ascending node id and nest by
    construction.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"conversion factor must be in [0,1], got {q}")
    n = topology.node_count
    k = converter_count(q, n)

    if strategy is PlacementStrategy.RANDOM:
        order = list(range(n))
        random.Random(derive_seed("placement", seed)).shuffle(order)
    elif strategy is PlacementStrategy.DEGREE_RANK:
        order = sorted(range(n), key=lambda u: (-len(topology.neighbors[u]), u))
    elif strategy is PlacementStrategy.TRANSIT_RANK:
        if transit_stats is None:
            raise ValueError("transit ranking requires per-node transit statistics")
        if len(transit_stats) != n:
            raise ValueError(f"expected {n} transit counts, got {len(transit_stats)}")
        order = sorted(range(n), key=lambda u: (-transit_stats[u], u))
    else:  # pragma: no cover - enum is exhaustive
        raise ValueError(f"unknown strategy {strategy!r}")

    return ConverterPlacement(frozenset(order[:k]), degree)


def can_convert(placement: ConverterPlacement, node: int,
                from_w: int, to_w: int) -> bool:
    """True iff the node may shift ``from_w`` to ``to_w``.

    Passing a wavelength through unchanged needs no converter and is allowed
    everywhere.
    """
    if from_w == to_w:
        return True
    if node not in placement.nodes:
        return False
    if placement.degree.kind is DegreeKind.FULL:
        return True
    return abs(to_w - from_w) <= placement.degree.max_shift


def placement_to_text(placement: ConverterPlacement) -> str:
    """Dump format: one node id per line, ascending."""
    return "\n".join(str(u) for u in sorted(placement.nodes)) + "\n"
