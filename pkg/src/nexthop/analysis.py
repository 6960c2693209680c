"""Static checkers and brute-force oracles.

The checkers (stable tree, strong stability, skeleton) are direct readings
of their definitions; the enumerators walk every choice function of a small
network and are gated by an explicit budget.  Everything here is pure and
independent of the schedulers, so these functions double as oracles for the
scheduler pipelines.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Optional

from . import engine
from .model import (
    Arc,
    Network,
    Node,
    RoutingGraph,
    SpanningTree,
    actual_path,
    arc_nodes,
    out_plus,
    q_subtree,
    sink_component,
)


class BudgetExceededError(RuntimeError):
    """The instance is too large for exhaustive enumeration."""


class NotATreeError(ValueError):
    """The candidate arc set is not an in-arborescence containing the sink."""


def tree_paths(arcs: frozenset[Arc], sink: Node) -> dict[Node, tuple[Node, ...]]:
    """Per-node path to the sink inside an in-arborescence, or raise."""
    parent: dict[Node, Node] = {}
    for u, w in arcs:
        if u in parent:
            raise NotATreeError(f"node {u} has two outgoing arcs")
        parent[u] = w
    paths: dict[Node, tuple[Node, ...]] = {sink: (sink,)}
    for v in sorted(arc_nodes(arcs, sink)):
        trail = []
        cur = v
        while cur not in paths:
            if cur in trail or cur not in parent:
                raise NotATreeError(f"node {v} has no path to the sink")
            trail.append(cur)
            cur = parent[cur]
        suffix = paths[cur]
        for i, u in enumerate(reversed(trail)):
            paths[u] = tuple(trail[len(trail) - 1 - i:]) + suffix
    return paths


@dataclass(frozen=True)
class StableTreeReport:
    """Outcome of a stable-tree check.

    ``witness_violation`` names a node and the better-ranked valid neighbour
    (or invalid parent) that breaks stability; absent means stable.
    ``external_blocking`` lists nodes outside the tree that currently have a
    valid choice into it: the tree-local stability notion does not forbid
    them, but a full equilibrium would.
    """

    tree: frozenset[Arc]
    size: int
    witness_violation: Optional[tuple[Node, Node]]
    external_blocking: tuple[tuple[Node, Node], ...] = ()

    @property
    def stable(self) -> bool:
        return self.witness_violation is None


def is_stable_tree(net: Network, arcs: Iterable[Arc]) -> StableTreeReport:
    """Check the two tree-stability conditions on an in-arborescence.

    Every arc's head must be valid for its tail (the head's tree path avoids
    the tail's filtering list) and every tail must prefer its parent to each
    of its neighbours currently valid with respect to the tree.
    """
    tree = frozenset(arcs)
    paths = tree_paths(tree, net.sink)
    members = set(paths)

    witness: Optional[tuple[Node, Node]] = None
    for u, w in sorted(tree):
        filt = net.filters[u]
        if filt & set(paths[w]):
            witness = (u, w)
            break
        for x in net.prefs[u]:
            if x == w:
                break
            if x in members and not (filt & set(paths[x])):
                witness = (u, x)
                break
        if witness:
            break

    blocked = []
    for v in sorted(set(net.nodes()) - members):
        for x in net.prefs[v]:
            if x in members and not (net.filters[v] & set(paths[x])):
                blocked.append((v, x))
                break
    return StableTreeReport(
        tree=tree,
        size=len(members),
        witness_violation=witness,
        external_blocking=tuple(blocked),
    )


def has_strong_stability(
    net: Network, tree: SpanningTree, restricted: Iterable[Node]
) -> bool:
    """True when every restricted node prefers its tree parent to every
    neighbour outside its own subtree within the restriction set."""
    members = frozenset(restricted)
    for v in sorted(members):
        if v == net.sink:
            continue
        inside = q_subtree(tree, members, v)
        parent = tree.parent[v]
        for x in net.prefs[v]:
            if x == parent:
                break
            if x not in inside:
                return False
    return True


def is_skeleton(
    tree: SpanningTree, t_arcs: Iterable[Arc], restricted: Iterable[Node]
) -> bool:
    """Each maximal restricted subtree of ``tree`` either has all its arcs
    (plus the root's leaving arc) inside ``t_arcs`` or is node-disjoint from
    them."""
    t_set = frozenset(t_arcs)
    t_nodes = arc_nodes(t_set, tree.sink)
    members = frozenset(restricted)
    tree_arcs = tree.arcs()
    roots = [
        v for v in members if v != tree.sink and tree.parent[v] not in members
    ]
    for root in roots:
        block = q_subtree(tree, members, root)
        if not out_plus(tree_arcs, block) <= t_set and block & t_nodes:
            return False
    return True


def _equilibrium_state(net: Network, rg: RoutingGraph) -> engine.EngineState:
    paths = tuple(actual_path(rg, v, net.sink) for v in net.nodes())
    return engine.EngineState(
        net=net, round=0, rg=rg, paths=paths, packets=(), trace=()
    )


def choice_budget(net: Network) -> int:
    return math.prod(len(net.prefs[v]) + 1 for v in net.non_sink_nodes())


DEFAULT_BUDGET = 2_000_000


def enumerate_equilibria(
    net: Network, budget: int = DEFAULT_BUDGET
) -> list[RoutingGraph]:
    """Every choice function (a neighbour or nothing, per node) that is an
    equilibrium after route verification, in lexicographic choice order."""
    if choice_budget(net) > budget:
        raise BudgetExceededError(
            f"{choice_budget(net)} choice functions exceed budget {budget}"
        )
    nodes = net.non_sink_nodes()
    options = [list(net.prefs[v]) + [None] for v in nodes]
    found = []
    for combo in itertools.product(*options):
        nxt: list[Optional[Node]] = [None] * net.n
        for v, w in zip(nodes, combo):
            nxt[v] = w
        rg = RoutingGraph(tuple(nxt))
        if engine.is_equilibrium(_equilibrium_state(net, rg)):
            found.append(rg)
    return found


def max_stable_tree(net: Network, budget: int = DEFAULT_BUDGET) -> StableTreeReport:
    """Largest sink-component over all equilibria; the bare sink if none."""
    best: Optional[tuple[int, RoutingGraph]] = None
    for rg in enumerate_equilibria(net, budget):
        size = len(sink_component(rg, net))
        if best is None or size > best[0]:
            best = (size, rg)
    if best is None:
        return StableTreeReport(
            tree=frozenset(), size=1, witness_violation=None
        )
    _, rg = best
    arcs = frozenset(
        (v, w) for v, w in enumerate(rg.next_hop) if w is not None
    )
    report = is_stable_tree(net, arcs)
    return report


def max_stable_tree_dfs(net: Network, budget: int = DEFAULT_BUDGET) -> int:
    """Independent search for the maximum stable sink-component size.

    Recursive assignment over nodes in descending id order with a
    relaxation-based path derivation, deliberately sharing no code with
    :func:`enumerate_equilibria`.
    """
    if choice_budget(net) > budget:
        raise BudgetExceededError("instance too large for the DFS oracle")
    nodes = sorted(net.non_sink_nodes(), reverse=True)
    best = 1

    def derive_paths(choice: dict[Node, Optional[Node]]) -> dict[Node, tuple]:
        paths: dict[Node, tuple] = {v: () for v in net.nodes()}
        paths[net.sink] = (net.sink,)
        for _ in range(net.n):
            changed = False
            for v, w in choice.items():
                if w is None:
                    continue
                want = (v,) + paths[w] if paths[w] else ()
                if want and want != paths[v]:
                    paths[v] = want
                    changed = True
            if not changed:
                break
        return paths

    def settled(choice: dict[Node, Optional[Node]]) -> Optional[int]:
        paths = derive_paths(choice)
        for v in nodes:
            filt = net.filters[v]
            pick = None
            for w in net.prefs[v]:
                if paths[w] and not (filt & set(paths[w])):
                    pick = w
                    break
            if pick != choice[v]:
                return None
        return sum(1 for v in net.nodes() if paths[v])

    def walk(i: int, choice: dict[Node, Optional[Node]]) -> None:
        nonlocal best
        if i == len(nodes):
            size = settled(choice)
            if size is not None and size > best:
                best = size
            return
        v = nodes[i]
        for w in list(net.prefs[v]) + [None]:
            choice[v] = w
            walk(i + 1, choice)
        del choice[v]

    walk(0, {})
    return best


def exhaustive_delivery(
    net: Network,
    scheduler: engine.Scheduler,
    rounds: int,
    rg0: Optional[RoutingGraph] = None,
) -> bool:
    """Whether every packet is delivered within the given rounds under every
    adversarial repositioning.

    The control plane never reads packet positions, so the routing-graph
    trajectory is one and the same on every adversary branch and packets can
    be tracked independently: each packet carries the set of (location,
    capturing-cycle) pairs it could be in, a captured packet fanning out to
    the whole cycle when the next round begins.
    """
    state = engine.EngineState.initial(net, rg0)
    possible: dict[int, set] = {
        p.pid: {(p.location, None)} for p in state.packets
    }
    delivered: set[int] = set()
    for _ in range(rounds):
        perm = scheduler.permutation(state)
        state = engine.run_round(state, perm)
        scheduler.after_round(state)
        for pid, opts in possible.items():
            if pid in delivered:
                continue
            nxt = set()
            alive = False
            for loc, cycle in opts:
                placements = cycle if cycle else (loc,)
                for spot in placements:
                    hops, end, done = engine._walk(
                        state.rg, spot, net.sink, net.n
                    )
                    if done:
                        continue
                    alive = True
                    caught = (
                        engine._enclosing_cycle(state.rg, end, net.n)
                        if len(hops) == net.n
                        else None
                    )
                    nxt.add((end, caught))
            if alive:
                possible[pid] = nxt
            else:
                delivered.add(pid)
    return len(delivered) == len(possible)
