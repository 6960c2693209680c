"""Activation-order generators.

Three scheduler families share the engine's round protocol:

* ``RandomScheduler`` draws a fresh uniform permutation per round from a
  seeded generator.
* ``CoordinateScheduler`` (empty filtering lists) builds a red/blue node
  partition each round and an activation order that provably drags every
  red node into the sink-component and keeps every blue node out; run four
  rounds in a row and every round-0 packet reaches the sink.
* ``FairStabiliseScheduler`` (self-only filtering lists) maintains a
  spanning tree with a strong-stability property, activates the ever-opaque
  nodes in tree BFS order and the rest in reverse BFS order, and promotes
  one node per round until the routing graph is that stable spanning tree.

Permutations aside, schedulers record their per-round decisions in
``self.decisions`` so tests and the CLI can expose them without polluting
the engine trace.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from . import engine
from .model import (
    Arc,
    FirstClassDecomposition,
    Network,
    Node,
    SpanningTree,
    arc_nodes,
    first_class_decomposition,
    q_subtree,
    sink_component,
    sink_component_arcs,
    validate_spanning_tree,
)


class SchedulerError(RuntimeError):
    """A scheduler hit a state its model guarantees cannot happen."""


class ContractViolationError(SchedulerError):
    """A precondition of the stabilisation pipeline failed at runtime."""


class ModelAssumptionError(SchedulerError):
    """A proven invariant of the coordination algorithm failed at runtime."""


def random_fair_permutation(rng: random.Random, net: Network) -> list[Node]:
    """Uniform permutation of the non-sink nodes, reproducible from the rng."""
    nodes = list(net.non_sink_nodes())
    rng.shuffle(nodes)
    return nodes


class RandomScheduler:
    def __init__(self, net: Network, seed: int = 0):
        self.net = net
        self.rng = random.Random(seed)
        self.decisions: list[str] = []

    def permutation(self, state: engine.EngineState) -> list[Node]:
        return random_fair_permutation(self.rng, self.net)

    def after_round(self, state: engine.EngineState) -> None:
        pass


class ReplayScheduler:
    """Re-issues a recorded list of per-round permutations."""

    def __init__(self, perms: Sequence[Sequence[Node]]):
        self.perms = [list(p) for p in perms]
        self.cursor = 0
        self.decisions: list[str] = []

    @staticmethod
    def from_text(text: str) -> "ReplayScheduler":
        perms = [
            [int(tok) for tok in line.split()]
            for line in text.splitlines()
            if line.strip()
        ]
        return ReplayScheduler(perms)

    @staticmethod
    def to_text(perms: Iterable[Sequence[Node]]) -> str:
        return "\n".join(" ".join(str(v) for v in p) for p in perms) + "\n"

    def permutation(self, state: engine.EngineState) -> list[Node]:
        if self.cursor >= len(self.perms):
            raise SchedulerError("replay exhausted: no permutation recorded")
        perm = self.perms[self.cursor]
        self.cursor += 1
        return perm

    def after_round(self, state: engine.EngineState) -> None:
        pass


# ---------------------------------------------------------------------------
# Coordination (empty filtering lists)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Partition:
    """Red/blue colouring: red nodes are forced into the sink-component by
    the derived activation order, blue nodes are forced out."""

    red: frozenset[Node]
    blue: frozenset[Node]
    blue_seed: frozenset[Node]
    red_order: tuple[Node, ...]


def coordinate(
    net: Network, fcd: FirstClassDecomposition, clear: frozenset[Node]
) -> Partition:
    """Red/blue partition for one round, from the current clear set.

    The blue seed is the union of first-choice components (other than the
    sink's) whose cycle currently holds a clear node.  The refinement loop
    then repeatedly bleaches to red every node that prefers some red node
    over all of its blue and still-undecided-but-clear neighbours, until the
    blue side stops growing.
    """
    if net.sink not in clear:
        raise ValueError("the sink must be clear")
    seeded = [
        fcd.components[j]
        for j in range(1, len(fcd.components))
        if set(fcd.cycles[j]) & clear
    ]
    blue_seed = frozenset().union(*seeded)

    blue = set(blue_seed)
    while True:
        red = {net.sink}
        order: list[Node] = []
        undecided = set(net.nodes()) - red - blue
        moved = True
        while moved:
            moved = False
            for v in sorted(undecided):
                comparison = blue | (undecided & clear)
                best = None
                for w in net.prefs[v]:
                    if w in red:
                        best = "red"
                        break
                    if w in comparison:
                        best = "other"
                        break
                if best == "red":
                    undecided.discard(v)
                    red.add(v)
                    order.append(v)
                    moved = True
                    break
        new_blue = blue | undecided
        if new_blue == blue:
            part = Partition(
                red=frozenset(red),
                blue=frozenset(blue),
                blue_seed=blue_seed,
                red_order=tuple(order),
            )
            _check_monochromatic(fcd, part)
            return part
        blue = new_blue


def _check_monochromatic(fcd: FirstClassDecomposition, part: Partition) -> None:
    for comp in fcd.components:
        if not (comp <= part.red or comp <= part.blue):
            raise ModelAssumptionError(
                f"first-choice component {sorted(comp)} is not monochromatic"
            )


def _distance_to(target: Node, comp: frozenset[Node], net: Network) -> dict[Node, int]:
    """Walk length from each component member to the target along rank-1 arcs."""
    dist = {target: 0}
    frontier = [target]
    back: dict[Node, list[Node]] = {v: [] for v in comp}
    for v in comp:
        w = net.first_choice(v)
        if w in comp:
            back[w].append(v)
    while frontier:
        w = frontier.pop(0)
        for v in sorted(back[w]):
            if v not in dist:
                dist[v] = dist[w] + 1
                frontier.append(v)
    return dist


def coordinate_sequence(
    part: Partition,
    fcd: FirstClassDecomposition,
    state: engine.EngineState,
) -> list[Node]:
    """Activation order realising a partition.

    Phase 1 reforms every blue-seed component around one of its clear cycle
    nodes (nearest members first, the chosen node last), so each such
    component re-selects its first choices wholesale.  Phase 2 emits the
    remaining blue nodes greedily: a node goes out once its best clear
    neighbour, under the simulated effects of the activations emitted so
    far, is blue.  Phase 3 replays the red nodes in the order the partition
    construction added them.
    """
    net = state.net
    seq: list[Node] = []
    sim = state
    for j in range(1, len(fcd.components)):
        comp = fcd.components[j]
        if not comp <= part.blue_seed:
            continue
        anchors = sorted(set(fcd.cycles[j]) & state.clear_set)
        anchor = anchors[0]
        dist = _distance_to(anchor, comp, net)
        rest = sorted((dist[v], v) for v in comp if v != anchor)
        block = [v for _, v in rest] + [anchor]
        for v in block:
            sim = engine.activate(sim, v)
        seq.extend(block)

    pending = sorted(part.blue - part.blue_seed)
    while pending:
        emitted = None
        for v in pending:
            w = engine.best_valid_choice(sim, v)
            if w is not None and w in part.blue:
                emitted = v
                break
        if emitted is None:
            raise ModelAssumptionError(
                f"coordination greedy phase stalled on {pending}"
            )
        pending.remove(emitted)
        sim = engine.activate(sim, emitted)
        seq.append(emitted)

    seq.extend(part.red_order)
    return seq


class CoordinateScheduler:
    """One coordination round per engine round; empty filters required."""

    def __init__(self, net: Network, check_invariants: bool = True):
        if any(net.filters[v] for v in net.nodes()):
            raise ValueError("coordination requires empty filtering lists")
        self.net = net
        self.fcd = first_class_decomposition(net)
        self.check_invariants = check_invariants
        self.partitions: list[Partition] = []
        self.clear_sets: list[frozenset[Node]] = []
        self.decisions: list[str] = []

    def permutation(self, state: engine.EngineState) -> list[Node]:
        part = coordinate(self.net, self.fcd, state.clear_set)
        self.partitions.append(part)
        self.clear_sets.append(state.clear_set)
        self.decisions.append(
            f"round {state.round + 1} | partition red={sorted(part.red)} "
            f"blue={sorted(part.blue)} seed={sorted(part.blue_seed)}"
        )
        return coordinate_sequence(part, self.fcd, state)

    def after_round(self, state: engine.EngineState) -> None:
        if not self.check_invariants:
            return
        part = self.partitions[-1]
        comp = sink_component(state.rg, self.net)
        if not part.red <= comp:
            raise ModelAssumptionError(
                f"red nodes {sorted(part.red - comp)} escaped the sink-component"
            )
        if part.blue & comp:
            raise ModelAssumptionError(
                f"blue nodes {sorted(part.blue & comp)} entered the sink-component"
            )
        # when the clear set was exactly the blue seed, a packet that spent
        # all n hops without delivery must sit at a round-start clear node
        clear = self.clear_sets[-1]
        if clear - {self.net.sink} == part.blue_seed:
            for pkt in state.packets:
                if not pkt.delivered and pkt.last_hops == self.net.n:
                    if pkt.location not in clear:
                        raise ModelAssumptionError(
                            f"packet {pkt.pid} stranded at non-clear node "
                            f"{pkt.location}"
                        )


# ---------------------------------------------------------------------------
# Stabilisation (self-only filtering lists)
# ---------------------------------------------------------------------------


def bfs_order(nodes: Iterable[Node], tree: SpanningTree) -> list[Node]:
    """Non-sink members sorted by tree distance to the sink, ids break ties."""
    depth = tree.depths()
    picked = [v for v in nodes if v != tree.sink]
    return sorted(picked, key=lambda v: (depth[v], v))


def reverse_bfs_order(nodes: Iterable[Node], tree: SpanningTree) -> list[Node]:
    return list(reversed(bfs_order(nodes, tree)))


def initial_spanning_tree(net: Network) -> SpanningTree:
    """Shortest-path in-arborescence over the all-choice graph; each node
    takes its best-ranked neighbour among those one layer closer."""
    depth = {net.sink: 0}
    frontier = [net.sink]
    incoming: dict[Node, list[Node]] = {v: [] for v in net.nodes()}
    for v in net.nodes():
        for w in net.prefs[v]:
            incoming[w].append(v)
    order: list[Node] = []
    while frontier:
        w = frontier.pop(0)
        for v in sorted(incoming[w]):
            if v not in depth:
                depth[v] = depth[w] + 1
                order.append(v)
                frontier.append(v)
    parent: list[Optional[Node]] = [None] * net.n
    for v in order:
        parent[v] = next(w for w in net.prefs[v] if depth[w] == depth[v] - 1)
    tree = SpanningTree(net.sink, tuple(parent))
    validate_spanning_tree(net, tree)
    return tree


def find_stable(
    t_in: frozenset[Arc],
    s_in: SpanningTree,
    o_prev: frozenset[Node],
    net: Network,
    check: bool = True,
) -> SpanningTree:
    """Extend a strongly stable spanning tree across the current sink-component.

    ``t_in`` is the sink-component's arc set; ``s_in`` must be strongly
    stable on ``o_prev`` and a skeleton of ``t_in``.  The output keeps
    ``t_in`` verbatim, hangs the outside nodes by their old arcs, and then
    re-points those nodes leaf-first at their best-ranked neighbour outside
    their own descendant set, which makes the result strongly stable on
    ``o_prev`` united with the outside nodes.
    """
    from .analysis import has_strong_stability, is_skeleton

    if check:
        validate_spanning_tree(net, s_in)
        if not has_strong_stability(net, s_in, o_prev):
            raise ContractViolationError("input tree lost strong stability")
        if not is_skeleton(s_in, t_in, o_prev):
            raise ContractViolationError("input tree is not a skeleton")

    outside = frozenset(net.nodes()) - arc_nodes(t_in, net.sink)
    parent: list[Optional[Node]] = [None] * net.n
    for u, w in t_in:
        parent[u] = w
    for v in outside:
        parent[v] = s_in.parent[v]
    tree = SpanningTree(net.sink, tuple(parent))
    if check:
        validate_spanning_tree(net, tree)

    # the shrinking forest keeps its original arcs; only membership changes
    original = {
        v: tree.parent[v] for v in outside if tree.parent[v] in outside
    }
    remaining = set(outside)
    for _ in range(len(outside)):
        leaves = [
            v
            for v in remaining
            if not any(
                u in remaining and original.get(u) == v for u in remaining
            )
        ]
        v = min(leaves)
        forbidden = q_subtree(tree, outside, v)
        choice = next(w for w in net.prefs[v] if w not in forbidden)
        tree = tree.with_parent(v, choice)
        remaining.discard(v)
        if check:
            validate_spanning_tree(net, tree)
    return tree


@dataclass(frozen=True)
class StabiliseState:
    """Cross-round scheduler state: the guide tree and the ever-opaque set."""

    tree: SpanningTree
    ever_opaque: frozenset[Node]


class FairStabiliseScheduler:
    """Bring a self-filtering network to a stable spanning tree.

    Per round: refresh the guide tree with :func:`find_stable` against the
    current sink-component, fold the currently opaque nodes into the
    ever-opaque set, activate that set in tree BFS order and its complement
    in reverse BFS order, then adopt the first reverse-BFS node's new arc
    into the tree and promote the node.
    """

    def __init__(self, net: Network, check_invariants: bool = True):
        for v in net.nodes():
            if v != net.sink and net.filters[v] != frozenset({v}):
                raise ValueError(
                    "stabilisation requires every filtering list to be {self}"
                )
        self.net = net
        self.check_invariants = check_invariants
        self.state = StabiliseState(
            tree=initial_spanning_tree(net), ever_opaque=frozenset()
        )
        self._promote: Optional[Node] = None
        self.last_blocks: tuple[list[Node], list[Node]] = ([], [])
        self.opaque_history: list[frozenset[Node]] = []
        self.decisions: list[str] = []

    def permutation(self, state: engine.EngineState) -> list[Node]:
        t_in = sink_component_arcs(state.rg, self.net)
        tree = find_stable(
            t_in,
            self.state.tree,
            self.state.ever_opaque,
            self.net,
            check=self.check_invariants,
        )
        ever = self.state.ever_opaque | state.opaque_set
        self.state = StabiliseState(tree=tree, ever_opaque=ever)
        inside = bfs_order(ever, tree)
        rest = reverse_bfs_order(frozenset(self.net.nodes()) - ever, tree)
        self.last_blocks = (inside, rest)
        self._promote = rest[0] if rest else None
        self.decisions.append(
            f"round {state.round + 1} | stabilise opaque={sorted(ever)} "
            f"promote={self._promote} tree={sorted(tree.arcs())}"
        )
        return inside + rest

    def after_round(self, state: engine.EngineState) -> None:
        v = self._promote
        if v is not None:
            w = state.rg.next_hop[v]
            if w is not None:
                tree = self.state.tree.with_parent(v, w)
                if self.check_invariants:
                    validate_spanning_tree(self.net, tree)
                self.state = StabiliseState(
                    tree=tree, ever_opaque=self.state.ever_opaque | {v}
                )
        self.opaque_history.append(self.state.ever_opaque)
        if self.check_invariants and len(self.opaque_history) >= 2:
            prev, cur = self.opaque_history[-2], self.opaque_history[-1]
            full = frozenset(self.net.non_sink_nodes())
            if prev != full and not prev < cur:
                raise ModelAssumptionError(
                    "ever-opaque set failed to grow strictly"
                )
