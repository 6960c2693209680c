from __future__ import annotations

import random

import pytest

from nexthop.analysis import has_strong_stability
from nexthop.model import Network, RoutingGraph, SpanningTree


@pytest.fixture
def tri() -> Network:
    # r=0; a=1 prefs [r, b]; b=2 prefs [a, r]; no filters
    return Network.of([[], [0, 2], [1, 0]])


@pytest.fixture
def nogood() -> Network:
    # r=0; u=1 prefs [w, r]; w=2 prefs [u, r]; no filters
    return Network.of([[], [2, 0], [1, 0]])


@pytest.fixture
def notme2() -> Network:
    # NOGOOD shape with self filters
    return Network.of([[], [2, 0], [1, 0]], filters="self")


def all_clear_rg(net: Network) -> RoutingGraph:
    """Initial graph in which every node points straight at the sink when it
    can; used by tests that want an everyone-clear starting state."""
    nxt = [None] * net.n
    for v in net.non_sink_nodes():
        nxt[v] = net.sink if net.sink in net.prefs[v] else None
    return RoutingGraph(tuple(nxt))


def random_spanning_tree(rng: random.Random, net: Network) -> SpanningTree:
    """Uniform-ish spanning in-arborescence built by random attachment."""
    attached = {net.sink}
    parent = [None] * net.n
    while len(attached) < net.n:
        options = [
            (v, w)
            for v in net.nodes()
            if v not in attached
            for w in net.prefs[v]
            if w in attached
        ]
        v, w = rng.choice(options)
        parent[v] = w
        attached.add(v)
    return SpanningTree(net.sink, tuple(parent))


def random_stable_restriction(
    rng: random.Random, net: Network, tree: SpanningTree, tries: int = 40
) -> frozenset[int]:
    """Random node set on which the tree is strongly stable (rejection)."""
    nodes = list(net.non_sink_nodes())
    for _ in range(tries):
        k = rng.randint(0, len(nodes))
        cand = frozenset(rng.sample(nodes, k))
        if has_strong_stability(net, tree, cand):
            return cand
    return frozenset()


def skeleton_component(
    rng: random.Random,
    net: Network,
    tree: SpanningTree,
    restricted: frozenset[int],
) -> frozenset[tuple[int, int]]:
    """Random in-arborescence T such that ``tree`` is a skeleton of T.

    Drops whole tree subtrees rooted at nodes that are either outside the
    restriction set or roots of maximal restricted subtrees, then rewires
    the surviving unrestricted nodes to random attached neighbours.  The
    surviving restricted nodes keep their tree arcs, which is exactly what
    the skeleton property needs.
    """
    eligible = [
        v
        for v in net.non_sink_nodes()
        if v not in restricted or tree.parent[v] not in restricted
    ]
    dropped: set[int] = set()
    kids = tree.children()
    for v in eligible:
        if v in dropped or rng.random() > 0.3:
            continue
        stack = [v]
        while stack:
            u = stack.pop()
            dropped.add(u)
            stack.extend(kids[u])
    kept = [v for v in net.nodes() if v not in dropped]
    depth = tree.depths()

    parent: dict[int, int] = {}
    attached = {net.sink}
    pending = set(kept) - attached
    while pending:
        attachable = []
        for v in sorted(pending):
            if v in restricted:
                if tree.parent[v] in attached:
                    attachable.append((v, [tree.parent[v]]))
            else:
                options = sorted(
                    {w for w in net.prefs[v] if w in attached}
                    | ({tree.parent[v]} if tree.parent[v] in attached else set())
                )
                if options:
                    attachable.append((v, options))
        if attachable:
            v, options = rng.choice(attachable)
            w = rng.choice(options)
        else:
            # the shallowest pending node's tree parent is always attached
            v = min(pending, key=lambda u: (depth[u], u))
            w = tree.parent[v]
        parent[v] = w
        attached.add(v)
        pending.discard(v)
    return frozenset(parent.items())
