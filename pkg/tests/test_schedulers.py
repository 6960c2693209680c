from __future__ import annotations

import random
from collections import Counter

import pytest

from conftest import (
    all_clear_rg,
    random_spanning_tree,
    random_stable_restriction,
    skeleton_component,
)
from nexthop import engine
from nexthop.analysis import has_strong_stability, is_skeleton
from nexthop.engine import EngineState, Stop, run, run_round
from nexthop.generators import random_network
from nexthop.model import (
    Network,
    RoutingGraph,
    SpanningTree,
    first_class_decomposition,
    out_plus,
    sink_component,
    validate_spanning_tree,
)
from nexthop.schedulers import (
    CoordinateScheduler,
    FairStabiliseScheduler,
    ReplayScheduler,
    bfs_order,
    coordinate,
    coordinate_sequence,
    find_stable,
    initial_spanning_tree,
    random_fair_permutation,
    reverse_bfs_order,
)


# --- random scheduler -------------------------------------------------------


def test_random_permutation_trivial_and_deterministic(tri):
    two = Network.of([[], [0]])
    assert random_fair_permutation(random.Random(9), two) == [1]
    a = random_fair_permutation(random.Random(7), tri)
    b = random_fair_permutation(random.Random(7), tri)
    assert a == b and sorted(a) == [1, 2]


def test_random_permutation_uniform():
    net = Network.of([[], [0], [0], [0]])
    rng = random.Random(0)
    counts = Counter(
        tuple(random_fair_permutation(rng, net)) for _ in range(10_000)
    )
    assert len(counts) == 6
    chi2 = sum((c - 10_000 / 6) ** 2 / (10_000 / 6) for c in counts.values())
    assert chi2 < 20.5  # df=5 at p=0.001
    for c in counts.values():
        assert abs(c / 10_000 - 1 / 6) < 0.05


# --- coordination -----------------------------------------------------------


def test_coordinate_nogood_clear_cycle(nogood):
    fcd = first_class_decomposition(nogood)
    part = coordinate(nogood, fcd, frozenset({0, 1, 2}))
    assert part.blue_seed == frozenset({1, 2})
    assert part.red == frozenset({0})
    assert part.blue == frozenset({1, 2})


def test_coordinate_nogood_sink_only(nogood):
    fcd = first_class_decomposition(nogood)
    part = coordinate(nogood, fcd, frozenset({0}))
    assert part.blue_seed == frozenset()
    assert part.red == frozenset({0, 1, 2})
    assert part.blue == frozenset()
    assert part.red_order == (1, 2)


def test_coordinate_tri_acyclic_first_class(tri):
    fcd = first_class_decomposition(tri)
    part = coordinate(tri, fcd, frozenset({0, 1, 2}))
    assert part.blue_seed == frozenset()
    assert part.red == frozenset({0, 1, 2})


def test_coordinate_sequence_seed_component(nogood):
    fcd = first_class_decomposition(nogood)
    state = EngineState.initial(nogood, all_clear_rg(nogood))
    part = coordinate(nogood, fcd, state.clear_set)
    assert coordinate_sequence(part, fcd, state) == [2, 1]


def test_coordinate_sequence_all_red(nogood):
    fcd = first_class_decomposition(nogood)
    state = EngineState.initial(nogood)  # rank-1 start: only the sink is clear
    part = coordinate(nogood, fcd, state.clear_set)
    assert part.blue == frozenset()
    assert coordinate_sequence(part, fcd, state) == list(part.red_order) == [1, 2]


def test_coordinate_scheduler_two_rounds_from_clear(nogood):
    sched = CoordinateScheduler(nogood)
    state = EngineState.initial(nogood, all_clear_rg(nogood))
    state, _ = run(state, sched, max_rounds=4, stop=Stop.ALL_DELIVERED)
    assert state.round == 2
    assert all(p.delivered_round <= 2 for p in state.packets)


def test_coordinate_scheduler_spanning_first_class_round_one(tri):
    sched = CoordinateScheduler(tri)
    state, _ = run(
        EngineState.initial(tri), sched, max_rounds=4, stop=Stop.ALL_DELIVERED
    )
    assert state.round == 1


def test_coordinate_requires_empty_filters(notme2):
    with pytest.raises(ValueError):
        CoordinateScheduler(notme2)


def test_coordinate_partition_monotone_lemma():
    # on any trace: an earlier partition whose later blue seed is contained
    # in its blue side must have its red side contained in the later red side
    rng = random.Random(4)
    for _ in range(20):
        net = random_network(rng, rng.randint(4, 9))
        sched = CoordinateScheduler(net)
        state = EngineState.initial(net)
        for _ in range(4):
            state = run_round(state, sched.permutation(state))
            sched.after_round(state)
        parts = sched.partitions
        for early in range(len(parts)):
            for late in range(early + 1, len(parts)):
                if parts[late].blue_seed <= parts[early].blue:
                    assert parts[early].red <= parts[late].red


def test_coordinate_red_blue_sink_component():
    rng = random.Random(12)
    for _ in range(25):
        net = random_network(rng, rng.randint(4, 10))
        sched = CoordinateScheduler(net)  # after_round raises on violation
        state = EngineState.initial(net)
        for _ in range(4):
            state = run_round(state, sched.permutation(state))
            sched.after_round(state)
        comp = sink_component(state.rg, net)
        assert sched.partitions[-1].red <= comp
        assert not sched.partitions[-1].blue & comp


# --- BFS orders -------------------------------------------------------------


def test_bfs_orders():
    tree = SpanningTree(0, (None, 0, 1))
    assert bfs_order({1, 2}, tree) == [1, 2]
    assert bfs_order({0}, tree) == []
    assert reverse_bfs_order({1, 2}, tree) == [2, 1]
    deep = SpanningTree(0, (None, 0, 0, 2))
    assert bfs_order({1, 2, 3}, deep) == [1, 2, 3]  # ids break the depth tie


def test_reverse_is_reversal_randomised():
    rng = random.Random(6)
    for _ in range(30):
        net = random_network(rng, rng.randint(4, 9))
        tree = random_spanning_tree(rng, net)
        nodes = frozenset(
            rng.sample(list(net.nodes()), rng.randint(1, net.n))
        )
        assert reverse_bfs_order(nodes, tree) == list(
            reversed(bfs_order(nodes, tree))
        )


# --- FindStable -------------------------------------------------------------


def test_find_stable_notme2_example(notme2):
    s_in = initial_spanning_tree(notme2)
    assert s_in.parent == (None, 0, 0)
    out = find_stable(frozenset(), s_in, frozenset(), notme2)
    assert out.parent == (None, 2, 0)  # u retargets to w, w keeps the sink


def test_find_stable_spanning_input_is_identity(tri):
    tree = initial_spanning_tree(tri)
    out = find_stable(tree.arcs(), tree, frozenset(), tri)
    assert out == tree


def test_find_stable_contract_violation(notme2):
    bad = SpanningTree(0, (None, 2, 1))  # w -> u -> w would not even be a tree
    with pytest.raises(Exception):
        find_stable(frozenset(), bad, frozenset(), notme2)


def test_find_stable_randomised_contract():
    rng = random.Random(99)
    done = 0
    while done < 60:
        net = random_network(rng, rng.randint(4, 8))
        s_in = random_spanning_tree(rng, net)
        restricted = random_stable_restriction(rng, net, s_in)
        t_arcs = skeleton_component(rng, net, s_in, restricted)
        if not is_skeleton(s_in, t_arcs, restricted):
            continue
        out = find_stable(t_arcs, s_in, restricted, net)
        validate_spanning_tree(net, out)
        outside = frozenset(net.nodes()) - {u for a in t_arcs for u in a} - {net.sink}
        assert has_strong_stability(net, out, restricted | outside)
        done += 1


# --- Fair-Stabilise ---------------------------------------------------------


def test_fair_stabilise_notme2(notme2):
    sched = FairStabiliseScheduler(notme2)
    state = EngineState.initial(notme2)
    perm = sched.permutation(state)
    assert perm == [2, 1]  # the ever-opaque block in tree BFS order
    state = run_round(state, perm)
    sched.after_round(state)
    assert all(p.delivered_round == 1 for p in state.packets)
    assert engine.is_equilibrium(state)


def test_fair_stabilise_requires_self_filters(nogood):
    with pytest.raises(ValueError):
        FairStabiliseScheduler(nogood)


def test_fair_stabilise_bfs_block_realises_tree():
    # after the ever-opaque block runs, those nodes sit on their tree arcs
    # and are consistent
    rng = random.Random(21)
    for _ in range(15):
        net = random_network(rng, rng.randint(4, 9), filters="self")
        sched = FairStabiliseScheduler(net)
        state = EngineState.initial(net)
        for _ in range(net.n):
            perm = sched.permutation(state)
            tree = sched.state.tree
            ever = sched.state.ever_opaque
            inside, rest = sched.last_blocks
            mid = state
            for v in inside:
                mid = engine.activate(mid, v)
            for v in ever:
                assert mid.rg.next_hop[v] == tree.parent[v]
                assert mid.paths[v] == tuple(_tree_path(tree, v))
            got = out_plus(mid.rg.arcs(), ever)
            assert got == out_plus(tree.arcs(), ever)
            for v in rest:
                mid = engine.activate(mid, v)
            mid = engine.forward_packets(mid)
            mid = engine.route_verification(mid)
            import dataclasses

            state = dataclasses.replace(mid, round=state.round + 1)
            sched.after_round(state)


def _tree_path(tree, v):
    path = [v]
    while path[-1] != tree.sink:
        path.append(tree.parent[path[-1]])
    return path


def test_fair_stabilise_imperfect_round_case():
    # a clear-start instance in which round 1 traps three packets in a cycle;
    # the ever-opaque set then jumps by three and round 2 delivers
    net = Network.of(
        [[], [0], [4, 0], [2, 1], [3]], filters="self"
    )
    rg0 = RoutingGraph.from_arcs(5, [(1, 0), (2, 0), (3, 1), (4, 3)])
    sched = FairStabiliseScheduler(net)
    state = EngineState.initial(net, rg0)
    state, _ = run(state, sched, max_rounds=5, stop=Stop.EQUILIBRIUM)
    delivered = {p.pid: p.delivered_round for p in state.packets}
    assert delivered == {1: 1, 2: 2, 3: 2, 4: 2}
    assert engine.imperfect_rounds(state) == (1,)
    sizes = [len(o) for o in sched.opaque_history]
    assert sizes[0] == 1 and sizes[1] == 4  # growth of three after imperfection
    assert state.round == 2 and engine.is_equilibrium(state)


def test_fair_stabilise_equilibrium_within_n():
    rng = random.Random(33)
    for _ in range(20):
        n = rng.randint(4, 12)
        net = random_network(rng, n, filters="self")
        sched = FairStabiliseScheduler(net)
        state, _ = run(
            EngineState.initial(net), sched, max_rounds=n, stop=Stop.ROUNDS
        )
        assert engine.is_equilibrium(state)
        assert all(w is not None for v, w in enumerate(state.rg.next_hop) if v != 0)


def test_scheduler_decision_lines_golden(notme2, nogood):
    sched = FairStabiliseScheduler(notme2)
    state = EngineState.initial(notme2)
    state = run_round(state, sched.permutation(state))
    sched.after_round(state)
    assert sched.decisions == [
        "round 1 | stabilise opaque=[1, 2] promote=None tree=[(1, 2), (2, 0)]"
    ]
    coord = CoordinateScheduler(nogood)
    st = EngineState.initial(nogood, all_clear_rg(nogood))
    coord.permutation(st)
    assert coord.decisions == [
        "round 1 | partition red=[0] blue=[1, 2] seed=[1, 2]"
    ]


def test_replay_scheduler_reproduces(nogood):
    sched = CoordinateScheduler(nogood)
    state, trace = run(
        EngineState.initial(nogood, all_clear_rg(nogood)),
        sched,
        max_rounds=3,
        stop=Stop.ALL_DELIVERED,
    )
    perms = engine.trace_permutations(trace)
    text = ReplayScheduler.to_text(perms)
    replay = ReplayScheduler.from_text(text)
    state2, trace2 = run(
        EngineState.initial(nogood, all_clear_rg(nogood)),
        replay,
        max_rounds=len(perms),
        stop=Stop.ROUNDS,
    )
    assert trace2 == trace
