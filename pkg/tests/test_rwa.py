import itertools
import random

import pytest

from wdmsim.conversion import (
    FULL_CONVERSION,
    ConversionDegree,
    ConverterPlacement,
    DegreeKind,
    NO_CONVERSION,
    place_converters,
)
from wdmsim.rwa import (
    Assignment,
    InvariantViolation,
    LightpathAssignment,
    NetworkState,
    Routing,
    RwaPolicy,
    attempt_establish,
    continuity_assign,
    release,
    segmented_assign,
    validate_state,
)
from wdmsim.topology import Link, Route, RouteTable, Topology, generate_random_topology


def path_topology(n, w):
    return Topology(n, [Link(i, i + 1, w) for i in range(n - 1)])


def ring_topology(n, w):
    links = [Link(i, i + 1, w) for i in range(n - 1)] + [Link(0, n - 1, w)]
    return Topology(n, links)


def occupy(state, link, w):
    """Force a slot busy via a 1-hop filler lightpath on that link."""
    ln = state.topology.links[link]
    route = Route((ln.u, ln.v), (link,))
    return state.establish(LightpathAssignment(route, (w,), ()))


def feasible_set(state, route):
    return [w for w in range(state.wavelengths)
            if all(state.free_masks[l] >> w & 1 for l in route.hops)]


def brute_force_segmented(state, route, placement):
    """Oracle: enumerate every W^hops vector under the stated objective."""
    from wdmsim.conversion import can_convert

    best = None
    hops = route.hops
    nodes = route.nodes
    for vec in itertools.product(range(state.wavelengths), repeat=len(hops)):
        if not all(state.free_masks[l] >> w & 1 for l, w in zip(hops, vec)):
            continue
        ok = True
        convs = 0
        for i in range(1, len(vec)):
            if vec[i] != vec[i - 1]:
                if not can_convert(placement, nodes[i], vec[i - 1], vec[i]):
                    ok = False
                    break
                convs += 1
        if ok:
            cand = (convs, vec)
            if best is None or cand < best:
                best = cand
    return best


class TestContinuityAssign:
    def test_forced_intersection(self):
        topo = path_topology(3, 8)
        state = NetworkState(topo)
        for w in range(8):
            if w not in (1, 3):
                occupy(state, 0, w)
            if w not in (3, 4):
                occupy(state, 1, w)
        route = Route((0, 1, 2), (0, 1))
        assert continuity_assign(state, route) == 3

    def test_empty_intersection_blocks(self):
        topo = path_topology(3, 2)
        state = NetworkState(topo)
        occupy(state, 0, 0)  # hop1 free {1}
        occupy(state, 1, 1)  # hop2 free {0}
        route = Route((0, 1, 2), (0, 1))
        assert continuity_assign(state, route) is None

    def test_first_fit_matches_brute_force(self):
        rng = random.Random(5)
        topo = path_topology(4, 4)
        route = Route((0, 1, 2, 3), (0, 1, 2))
        for _ in range(200):
            state = NetworkState(topo)
            for link in range(3):
                for w in range(4):
                    if rng.random() < 0.5:
                        occupy(state, link, w)
            expect = feasible_set(state, route)
            got = continuity_assign(state, route)
            assert got == (min(expect) if expect else None)

    def test_most_and_least_used_with_ties(self):
        topo = ring_topology(4, 4)
        state = NetworkState(topo)
        # Make wavelength usage counts distinct on links off the test route.
        occupy(state, 2, 1)
        occupy(state, 2, 3)
        occupy(state, 3, 3)
        route = Route((0, 1, 2), (0, 1))
        assert continuity_assign(state, route, Assignment.MOST_USED) == 3
        assert continuity_assign(state, route, Assignment.LEAST_USED) == 0  # tie 0,2 -> 0

    def test_random_draws_from_feasible_set(self):
        topo = path_topology(3, 8)
        state = NetworkState(topo)
        occupy(state, 0, 0)
        occupy(state, 1, 5)
        route = Route((0, 1, 2), (0, 1))
        allowed = set(feasible_set(state, route))
        rng = random.Random(0)
        draws = {continuity_assign(state, route, Assignment.RANDOM, rng)
                 for _ in range(100)}
        assert draws <= allowed
        assert len(draws) > 1

    def test_random_requires_stream(self):
        topo = path_topology(2, 2)
        state = NetworkState(topo)
        route = Route((0, 1), (0,))
        with pytest.raises(ValueError):
            continuity_assign(state, route, Assignment.RANDOM)


class TestSegmentedAssign:
    def test_unique_feasible_vector_with_converter(self):
        topo = path_topology(3, 4)
        state = NetworkState(topo)
        for w in range(4):
            if w != 1:
                occupy(state, 0, w)
            if w != 2:
                occupy(state, 1, w)
        route = Route((0, 1, 2), (0, 1))
        placement = ConverterPlacement(frozenset({1}), FULL_CONVERSION)
        lp = segmented_assign(state, route, placement)
        assert lp.wavelengths == (1, 2)
        assert lp.conversions == ((1, 1, 2),)

    def test_blocked_without_converter(self):
        topo = path_topology(3, 4)
        state = NetworkState(topo)
        for w in range(4):
            if w != 1:
                occupy(state, 0, w)
            if w != 2:
                occupy(state, 1, w)
        route = Route((0, 1, 2), (0, 1))
        assert segmented_assign(state, route, NO_CONVERSION) is None

    def test_empty_placement_reduces_to_first_fit(self):
        rng = random.Random(9)
        topo = path_topology(5, 6)
        route = Route((0, 1, 2, 3, 4), (0, 1, 2, 3))
        for _ in range(100):
            state = NetworkState(topo)
            for link in range(4):
                for w in range(6):
                    if rng.random() < 0.45:
                        occupy(state, link, w)
            lp = segmented_assign(state, route, NO_CONVERSION)
            ff = continuity_assign(state, route)
            if ff is None:
                assert lp is None
            else:
                assert lp.wavelengths == (ff,) * 4
                assert lp.conversions == ()

    def test_matches_enumeration_oracle(self):
        rng = random.Random(3)
        topo = path_topology(5, 5)
        routes = [Route(tuple(range(a, b + 1)), tuple(range(a, b)))
                  for a in range(4) for b in range(a + 1, 5)]
        degrees = [FULL_CONVERSION, ConversionDegree(DegreeKind.LIMITED, 1)]
        for trial in range(60):
            state = NetworkState(topo)
            for link in range(4):
                for w in range(5):
                    if rng.random() < 0.55:
                        occupy(state, link, w)
            nodes = frozenset(n for n in range(5) if rng.random() < 0.5)
            placement = ConverterPlacement(nodes, degrees[trial % 2])
            for route in routes:
                got = segmented_assign(state, route, placement)
                expect = brute_force_segmented(state, route, placement)
                if expect is None:
                    assert got is None
                else:
                    convs, vec = expect
                    assert got.wavelengths == vec
                    assert len(got.conversions) == convs

    def test_monotone_in_placement(self):
        rng = random.Random(17)
        topo = path_topology(5, 4)
        route = Route((0, 1, 2, 3, 4), (0, 1, 2, 3))
        for _ in range(80):
            state = NetworkState(topo)
            for link in range(4):
                for w in range(4):
                    if rng.random() < 0.6:
                        occupy(state, link, w)
            small = frozenset(n for n in range(5) if rng.random() < 0.4)
            extra = frozenset(n for n in range(5) if rng.random() < 0.4)
            p_small = ConverterPlacement(small, FULL_CONVERSION)
            p_big = ConverterPlacement(small | extra, FULL_CONVERSION)
            if segmented_assign(state, route, p_small) is not None:
                assert segmented_assign(state, route, p_big) is not None


class TestEstablishRelease:
    def test_release_restores_prior_state(self):
        topo = ring_topology(5, 4)
        state = NetworkState(topo)
        occupy(state, 0, 2)
        before = state.snapshot()
        route = Route((1, 2, 3), (1, 2))
        lp = state.establish(LightpathAssignment(route, (1, 1), ()))
        assert state.snapshot() != before
        release(state, lp)
        assert state.snapshot() == before
        validate_state(state)

    def test_release_of_unestablished_lightpath_fails(self):
        topo = path_topology(3, 2)
        state = NetworkState(topo)
        lp = LightpathAssignment(Route((0, 1), (0,)), (0,), ())
        with pytest.raises(InvariantViolation):
            release(state, lp)

    def test_double_release_fails(self):
        topo = path_topology(3, 2)
        state = NetworkState(topo)
        lp = state.establish(LightpathAssignment(Route((0, 1), (0,)), (0,), ()))
        release(state, lp)
        with pytest.raises(InvariantViolation):
            release(state, lp)

    def test_double_occupancy_fails(self):
        topo = path_topology(3, 2)
        state = NetworkState(topo)
        state.establish(LightpathAssignment(Route((0, 1), (0,)), (1,), ()))
        with pytest.raises(InvariantViolation):
            state.establish(LightpathAssignment(Route((0, 1), (0,)), (1,), ()))

    def test_random_interleaving_conserves_state(self):
        rng = random.Random(23)
        topo = generate_random_topology(8, 0.35, seed=2, wavelengths=3)
        table = RouteTable(topo, k=2)
        state = NetworkState(topo)
        idle = state.snapshot()
        live = []
        policy = RwaPolicy(Routing.FIXED_ALTERNATE, 2, Assignment.FIRST_FIT)
        for _ in range(10_000):
            if live and rng.random() < 0.45:
                release(state, live.pop(rng.randrange(len(live))))
            else:
                src, dst = rng.sample(range(8), 2)
                lp = attempt_establish(state, src, dst, table.routes(src, dst),
                                       NO_CONVERSION, policy)
                if lp is not None:
                    live.append(lp)
        for lp in live:
            release(state, lp)
        assert state.snapshot() == idle
        assert state.busy_slots == 0
        validate_state(state)


class TestAttemptEstablish:
    def test_empty_network_takes_shortest_route_first_fit(self):
        topo = ring_topology(6, 4)
        table = RouteTable(topo, k=3)
        for policy in (RwaPolicy(Routing.FIXED), RwaPolicy(Routing.FIXED_ALTERNATE, 3),
                       RwaPolicy(Routing.EXHAUST)):
            state = NetworkState(topo)
            lp = attempt_establish(state, 0, 2, table.routes(0, 2),
                                   NO_CONVERSION, policy)
            assert lp.route.nodes == (0, 1, 2)
            assert lp.wavelengths == (0, 0)

    def test_single_wavelength_link_blocks_second(self):
        topo = path_topology(2, 1)
        table = RouteTable(topo, k=1)
        state = NetworkState(topo)
        policy = RwaPolicy(Routing.FIXED)
        first = attempt_establish(state, 0, 1, table.routes(0, 1), NO_CONVERSION, policy)
        assert first is not None
        second = attempt_establish(state, 0, 1, table.routes(0, 1), NO_CONVERSION, policy)
        assert second is None

    def test_blocked_attempt_leaves_state_identical(self):
        topo = path_topology(3, 1)
        table = RouteTable(topo, k=3)
        state = NetworkState(topo)
        policy = RwaPolicy(Routing.FIXED_ALTERNATE, 3)
        placement = ConverterPlacement(frozenset({1}), FULL_CONVERSION)
        assert attempt_establish(state, 0, 2, table.routes(0, 2), placement, policy)
        before = state.snapshot()
        owners_before = [dict(d) for d in state.owners]
        assert attempt_establish(state, 0, 2, table.routes(0, 2), placement, policy) is None
        assert state.snapshot() == before
        assert state.owners == owners_before

    def test_converter_rescues_alternate_route(self):
        topo = path_topology(3, 2)
        table = RouteTable(topo, k=3)
        state = NetworkState(topo)
        occupy(state, 0, 0)
        occupy(state, 1, 1)
        policy = RwaPolicy(Routing.FIXED_ALTERNATE, 3)
        blocked = attempt_establish(state, 0, 2, table.routes(0, 2), NO_CONVERSION, policy)
        assert blocked is None
        placement = ConverterPlacement(frozenset({1}), FULL_CONVERSION)
        lp = attempt_establish(state, 0, 2, table.routes(0, 2), placement, policy)
        assert lp.wavelengths == (1, 0)
        assert lp.conversions == ((1, 1, 0),)

    def test_matches_reference_reimplementation(self):
        # Independent straightforward oracle at tiny scale: explicit busy-set
        # bookkeeping, fixed-alternate + first-fit, sequential requests.
        topo = generate_random_topology(6, 0.4, seed=4, wavelengths=3)
        table = RouteTable(topo, k=3)
        rng = random.Random(31)
        demands = [tuple(rng.sample(range(6), 2)) for _ in range(30)]

        busy = set()
        expect = []
        for src, dst in demands:
            outcome = None
            for route in table.routes(src, dst)[:3]:
                options = [w for w in range(3)
                           if all((l, w) not in busy for l in route.hops)]
                if options:
                    outcome = (route.nodes, min(options))
                    busy.update((l, min(options)) for l in route.hops)
                    break
            expect.append(outcome)

        state = NetworkState(topo)
        policy = RwaPolicy(Routing.FIXED_ALTERNATE, 3)
        got = []
        for src, dst in demands:
            lp = attempt_establish(state, src, dst, table.routes(src, dst),
                                   NO_CONVERSION, policy)
            got.append(None if lp is None else (lp.route.nodes, lp.wavelengths[0]))
        assert got == expect

    def test_continuity_invariant_without_converters(self):
        topo = generate_random_topology(10, 0.3, seed=6, wavelengths=4)
        table = RouteTable(topo, k=3)
        state = NetworkState(topo)
        rng = random.Random(41)
        policy = RwaPolicy(Routing.FIXED_ALTERNATE, 3)
        for _ in range(300):
            src, dst = rng.sample(range(10), 2)
            lp = attempt_establish(state, src, dst, table.routes(src, dst),
                                   NO_CONVERSION, policy)
            if lp is not None:
                assert len(set(lp.wavelengths)) == 1
                assert lp.conversions == ()

    def test_conversion_locality_and_degree(self):
        topo = generate_random_topology(10, 0.3, seed=8, wavelengths=4)
        table = RouteTable(topo, k=3)
        degree = ConversionDegree(DegreeKind.LIMITED, 1)
        placement = place_converters(topo, 0.4, degree=degree, seed=3)
        state = NetworkState(topo)
        rng = random.Random(43)
        policy = RwaPolicy(Routing.FIXED_ALTERNATE, 3)
        for _ in range(400):
            src, dst = rng.sample(range(10), 2)
            lp = attempt_establish(state, src, dst, table.routes(src, dst),
                                   placement, policy)
            if lp is None:
                continue
            changes = [(lp.route.nodes[i], lp.wavelengths[i - 1], lp.wavelengths[i])
                       for i in range(1, len(lp.wavelengths))
                       if lp.wavelengths[i] != lp.wavelengths[i - 1]]
            assert tuple(changes) == lp.conversions
            for node, fw, tw in changes:
                assert node in placement.nodes
                assert abs(tw - fw) <= 1


class TestExhaustRouting:
    def test_matches_per_wavelength_bfs_oracle(self):
        from collections import deque

        def min_hops_on_wavelength(state, src, dst, w):
            topo = state.topology
            dist = {src: 0}
            queue = deque([src])
            while queue:
                u = queue.popleft()
                for v, link in topo.adjacency[u]:
                    if v not in dist and state.free_masks[link] >> w & 1:
                        dist[v] = dist[u] + 1
                        queue.append(v)
            return dist.get(dst)

        rng = random.Random(51)
        topo = generate_random_topology(8, 0.35, seed=10, wavelengths=3)
        policy = RwaPolicy(Routing.EXHAUST)
        for _ in range(60):
            state = NetworkState(topo)
            for link in range(len(topo.links)):
                for w in range(3):
                    if rng.random() < 0.5:
                        occupy(state, link, w)
            src, dst = rng.sample(range(8), 2)
            options = []
            for w in range(3):
                hops = min_hops_on_wavelength(state, src, dst, w)
                if hops is not None:
                    options.append((hops, w))
            before = state.snapshot()
            lp = attempt_establish(state, src, dst, None, NO_CONVERSION, policy)
            if lp is None:
                assert state.snapshot() == before
                assert not options
            else:
                hops, w = min(options)
                assert lp.route.hop_count == hops
                assert lp.wavelengths[0] == w

    def test_exhaust_beats_fixed_alternate_when_detour_needed(self):
        # block the direct link of a 5-ring; only the 4-hop detour stays free
        topo = ring_topology(5, 1)
        table = RouteTable(topo, k=1)
        state = NetworkState(topo)
        occupy(state, 0, 0)  # link 0-1
        fixed = attempt_establish(state, 0, 1, table.routes(0, 1), NO_CONVERSION,
                                  RwaPolicy(Routing.FIXED))
        assert fixed is None
        lp = attempt_establish(state, 0, 1, None, NO_CONVERSION,
                               RwaPolicy(Routing.EXHAUST))
        assert lp.route.nodes == (0, 4, 3, 2, 1)

    def test_exhaust_uses_converters(self):
        topo = path_topology(3, 2)
        state = NetworkState(topo)
        occupy(state, 0, 0)
        occupy(state, 1, 1)
        blocked = attempt_establish(state, 0, 2, None, NO_CONVERSION,
                                    RwaPolicy(Routing.EXHAUST))
        assert blocked is None
        placement = ConverterPlacement(frozenset({1}), FULL_CONVERSION)
        lp = attempt_establish(state, 0, 2, None, placement,
                               RwaPolicy(Routing.EXHAUST))
        assert lp.wavelengths == (1, 0)
        assert lp.conversions == ((1, 1, 0),)

    def test_exhaust_routes_stay_simple(self):
        rng = random.Random(71)
        topo = generate_random_topology(9, 0.3, seed=12, wavelengths=3)
        placement = place_converters(topo, 0.5, seed=5)
        policy = RwaPolicy(Routing.EXHAUST)
        for _ in range(40):
            state = NetworkState(topo)
            for link in range(len(topo.links)):
                for w in range(3):
                    if rng.random() < 0.55:
                        occupy(state, link, w)
            src, dst = rng.sample(range(9), 2)
            lp = attempt_establish(state, src, dst, None, placement, policy)
            if lp is not None:
                assert len(set(lp.route.nodes)) == len(lp.route.nodes)
