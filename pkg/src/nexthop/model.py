"""Static problem instances and pure graph structure.

A network is a directed graph on dense integer node ids with a distinguished
sink, a strict per-node ranking of out-neighbours (position 0 is the most
preferred next hop), and a per-node filtering list: a set of nodes whose
presence anywhere on an offered path makes that path unacceptable.

Everything here is an immutable value.  The dynamic protocol lives in
:mod:`nexthop.engine`; this module owns validation, the first-choice
decomposition, path walks, spanning trees and the induced-subgraph operators
that the schedulers and checkers share.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

Node = int
Arc = tuple[Node, Node]
Path = tuple[Node, ...]  # empty tuple == no believed path (opaque owner)


class InstanceError(ValueError):
    """A network or instance file violates a model invariant."""


class SinkOutArcError(InstanceError):
    """The sink has a non-empty preference list."""


class UnreachableNodeError(InstanceError):
    """Some node has no directed path to the sink in the all-choice graph."""


class DuplicatePreferenceError(InstanceError):
    """A preference list mentions the same neighbour twice."""


class SelfPreferenceError(InstanceError):
    """A preference list mentions the node itself."""


class FormatError(InstanceError):
    """Malformed instance text."""


class TreeError(ValueError):
    """A claimed spanning tree is not one."""


@dataclass(frozen=True)
class Network:
    """A routing instance: node count, sink, rankings and filtering lists.

    ``prefs[v]`` lists v's out-neighbours in strictly decreasing preference;
    ``prefs[v][k-1]`` is v's k-th choice.  ``filters[v]`` is the set of nodes
    v never wants its packets to route through.
    """

    n: int
    sink: Node
    prefs: tuple[tuple[Node, ...], ...]
    filters: tuple[frozenset[Node], ...]

    @staticmethod
    def of(
        prefs: Sequence[Sequence[Node]],
        filters: Sequence[Iterable[Node]] | str | None = None,
        sink: Node = 0,
    ) -> "Network":
        """Build a network from per-node preference lists.

        ``filters`` may be a per-node sequence of iterables, the string
        ``"self"`` (every node filters itself), or None (all empty).
        """
        n = len(prefs)
        if filters is None:
            filt = tuple(frozenset() for _ in range(n))
        elif filters == "self":
            filt = tuple(frozenset({v}) for v in range(n))
        else:
            filt = tuple(frozenset(f) for f in filters)
        return Network(
            n=n,
            sink=sink,
            prefs=tuple(tuple(p) for p in prefs),
            filters=filt,
        )

    def nodes(self) -> range:
        return range(self.n)

    def non_sink_nodes(self) -> tuple[Node, ...]:
        return tuple(v for v in range(self.n) if v != self.sink)

    def rank(self, v: Node, w: Node) -> int:
        """1-based preference rank of the arc (v, w)."""
        return self.prefs[v].index(w) + 1

    def first_choice(self, v: Node) -> Optional[Node]:
        p = self.prefs[v]
        return p[0] if p else None


def validate_network(net: Network) -> None:
    """Raise a distinct :class:`InstanceError` per violated invariant."""
    if not 0 <= net.sink < net.n:
        raise InstanceError(f"sink {net.sink} out of range for n={net.n}")
    if len(net.prefs) != net.n or len(net.filters) != net.n:
        raise InstanceError("prefs/filters length does not match node count")
    if net.prefs[net.sink]:
        raise SinkOutArcError(f"sink {net.sink} must have no outgoing arc")
    for v in net.nodes():
        seen: set[Node] = set()
        for w in net.prefs[v]:
            if w == v:
                raise SelfPreferenceError(f"node {v} ranks itself")
            if not 0 <= w < net.n:
                raise InstanceError(f"node {v} ranks unknown node {w}")
            if w in seen:
                raise DuplicatePreferenceError(f"node {v} ranks {w} twice")
            seen.add(w)
    # every node must reach the sink in the all-choice graph
    reach = {net.sink}
    frontier = [net.sink]
    incoming: dict[Node, list[Node]] = {v: [] for v in net.nodes()}
    for v in net.nodes():
        for w in net.prefs[v]:
            incoming[w].append(v)
    while frontier:
        w = frontier.pop()
        for v in incoming[w]:
            if v not in reach:
                reach.add(v)
                frontier.append(v)
    missing = [v for v in net.nodes() if v not in reach]
    if missing:
        raise UnreachableNodeError(f"nodes {missing} cannot reach the sink")


@dataclass(frozen=True)
class RoutingGraph:
    """Per-node chosen next hop; at most one outgoing arc per node.

    Every weakly-connected component is an in-arborescence plus at most one
    arc leaving its root, so a component contains a cycle exactly when its
    root selects a neighbour.
    """

    next_hop: tuple[Optional[Node], ...]

    @staticmethod
    def empty(n: int) -> "RoutingGraph":
        return RoutingGraph(tuple(None for _ in range(n)))

    @staticmethod
    def first_choice(net: Network) -> "RoutingGraph":
        return RoutingGraph(tuple(net.first_choice(v) for v in net.nodes()))

    @staticmethod
    def from_arcs(n: int, arcs: Iterable[Arc]) -> "RoutingGraph":
        nxt: list[Optional[Node]] = [None] * n
        for u, w in arcs:
            if nxt[u] is not None:
                raise ValueError(f"node {u} has two outgoing arcs")
            nxt[u] = w
        return RoutingGraph(tuple(nxt))

    def arcs(self) -> tuple[Arc, ...]:
        return tuple(
            (v, w) for v, w in enumerate(self.next_hop) if w is not None
        )

    def with_choice(self, v: Node, w: Optional[Node]) -> "RoutingGraph":
        nxt = list(self.next_hop)
        nxt[v] = w
        return RoutingGraph(tuple(nxt))


def actual_path(rg: RoutingGraph, v: Node, sink: Node) -> Path:
    """Follow next hops from v; the v,sink-path if the walk gets there.

    Returns the empty path when the walk enters a cycle or dies at a node
    with no choice.  The sink itself is always on the trivial path (sink,).
    """
    path = [v]
    seen = {v}
    cur = v
    while cur != sink:
        nxt = rg.next_hop[cur]
        if nxt is None or nxt in seen:
            return ()
        path.append(nxt)
        seen.add(nxt)
        cur = nxt
    return tuple(path)


def out_plus(arcs: Iterable[Arc], nodes: Iterable[Node]) -> frozenset[Arc]:
    """Arcs whose tail lies in ``nodes`` (induced arcs plus arcs leaving)."""
    members = set(nodes)
    return frozenset((u, w) for u, w in arcs if u in members)


def induced_arcs(arcs: Iterable[Arc], nodes: Iterable[Node]) -> frozenset[Arc]:
    """Arcs with both endpoints in ``nodes``."""
    members = set(nodes)
    return frozenset((u, w) for u, w in arcs if u in members and w in members)


def arc_nodes(arcs: Iterable[Arc], sink: Node) -> frozenset[Node]:
    """Node set of an arc set, always including the sink."""
    out = {sink}
    for u, w in arcs:
        out.add(u)
        out.add(w)
    return frozenset(out)


def sink_component(rg: RoutingGraph, net: Network) -> frozenset[Node]:
    """Nodes whose walk in rg reaches the sink (the sink-component)."""
    return frozenset(
        v for v in net.nodes() if actual_path(rg, v, net.sink)
    )


def sink_component_arcs(rg: RoutingGraph, net: Network) -> frozenset[Arc]:
    comp = sink_component(rg, net)
    return frozenset(
        (v, rg.next_hop[v])
        for v in comp
        if v != net.sink and rg.next_hop[v] is not None
    )


@dataclass(frozen=True)
class SpanningTree:
    """In-arborescence rooted at the sink: every non-sink node has a parent."""

    sink: Node
    parent: tuple[Optional[Node], ...]

    def arcs(self) -> frozenset[Arc]:
        return frozenset(
            (v, p) for v, p in enumerate(self.parent) if p is not None
        )

    def with_parent(self, v: Node, w: Node) -> "SpanningTree":
        par = list(self.parent)
        par[v] = w
        return SpanningTree(self.sink, tuple(par))

    def depths(self) -> tuple[int, ...]:
        """Distance of every node to the sink along parent pointers."""
        n = len(self.parent)
        depth = [-1] * n
        depth[self.sink] = 0
        for v in range(n):
            trail = []
            cur = v
            while depth[cur] < 0:
                trail.append(cur)
                nxt = self.parent[cur]
                if nxt is None or len(trail) > n:
                    raise TreeError(f"node {v} does not reach the sink")
                cur = nxt
            base = depth[cur]
            for i, u in enumerate(reversed(trail)):
                depth[u] = base + i + 1
        return tuple(depth)

    def children(self) -> dict[Node, list[Node]]:
        kids: dict[Node, list[Node]] = {v: [] for v in range(len(self.parent))}
        for v, p in enumerate(self.parent):
            if p is not None:
                kids[p].append(v)
        return kids


def validate_spanning_tree(net: Network, tree: SpanningTree) -> None:
    """Check the spanning-tree invariants against the network."""
    if len(tree.parent) != net.n or tree.sink != net.sink:
        raise TreeError("tree shape does not match the network")
    if tree.parent[net.sink] is not None:
        raise TreeError("sink must have no parent")
    for v in net.non_sink_nodes():
        p = tree.parent[v]
        if p is None:
            raise TreeError(f"non-sink node {v} has no parent")
        if p not in net.prefs[v]:
            raise TreeError(f"tree arc ({v},{p}) is not a network arc")
    tree.depths()  # raises on cycles / disconnection


def q_subtree(tree: SpanningTree, q_set: Iterable[Node], v: Node) -> frozenset[Node]:
    """Descendants of v inside ``q_set``, v included.

    This is the maximal subtree rooted at v of the forest obtained by
    restricting the tree to ``q_set``: walking down reversed tree arcs stops
    as soon as a node outside ``q_set`` is met.
    """
    members = set(q_set)
    if v not in members:
        raise ValueError(f"node {v} is not in the restriction set")
    kids = tree.children()
    out = {v}
    frontier = [v]
    while frontier:
        u = frontier.pop()
        for c in kids[u]:
            if c in members and c not in out:
                out.add(c)
                frontier.append(c)
    return frozenset(out)


@dataclass(frozen=True)
class FirstClassDecomposition:
    """Components of the rank-1 (first-choice) subgraph.

    Component 0 contains the sink and carries the degenerate cycle (sink,);
    every other component contains exactly one directed cycle of length >= 2.
    """

    component_of: tuple[int, ...]
    components: tuple[frozenset[Node], ...]
    cycles: tuple[tuple[Node, ...], ...]


def first_class_decomposition(net: Network) -> FirstClassDecomposition:
    """Decompose the functional graph of every node's first choice."""
    n = net.n
    nxt = [net.first_choice(v) for v in net.nodes()]

    # cycle detection over the functional graph; the sink is its own stop
    on_cycle: dict[Node, tuple[Node, ...]] = {}
    state = [0] * n  # 0 unvisited, 1 in progress, 2 done
    for start in range(n):
        if state[start]:
            continue
        trail: list[Node] = []
        pos: dict[Node, int] = {}
        cur: Optional[Node] = start
        while cur is not None and state[cur] == 0:
            state[cur] = 1
            pos[cur] = len(trail)
            trail.append(cur)
            cur = nxt[cur]
        if cur is not None and state[cur] == 1:
            cyc = tuple(trail[pos[cur]:])
            lead = cyc.index(min(cyc))
            cyc = cyc[lead:] + cyc[:lead]
            for u in cyc:
                on_cycle[u] = cyc
        for u in trail:
            state[u] = 2

    # weak components via union over {v, nxt[v]}
    comp_of = list(range(n))

    def find(a: int) -> int:
        while comp_of[a] != a:
            comp_of[a] = comp_of[comp_of[a]]
            a = comp_of[a]
        return a

    for v in range(n):
        w = nxt[v]
        if w is not None:
            ra, rb = find(v), find(w)
            if ra != rb:
                comp_of[max(ra, rb)] = min(ra, rb)

    roots = sorted({find(v) for v in range(n)})
    sink_root = find(net.sink)
    order = [sink_root] + [rt for rt in roots if rt != sink_root]
    index_of = {rt: i for i, rt in enumerate(order)}

    component_of = tuple(index_of[find(v)] for v in range(n))
    members: list[set[Node]] = [set() for _ in order]
    for v in range(n):
        members[component_of[v]].add(v)

    cycles: list[tuple[Node, ...]] = []
    for i, comp in enumerate(members):
        if i == 0:
            cycles.append((net.sink,))
            continue
        cyc = next(on_cycle[v] for v in sorted(comp) if v in on_cycle)
        cycles.append(cyc)

    return FirstClassDecomposition(
        component_of=component_of,
        components=tuple(frozenset(m) for m in members),
        cycles=tuple(cycles),
    )


# ---------------------------------------------------------------------------
# Instance text format.
#
# One directive per line, '#' starts a comment:
#   nodes <n>
#   sink <id>
#   prefs <v>: <w1> <w2> ...     decreasing preference
#   filter <v>: <d1> <d2> ...    omitted => empty filtering list
#   rg0 <v>: <w>                 optional initial next-hop override; when any
#                                rg0 line is present the initial routing graph
#                                is exactly the given arcs
# ---------------------------------------------------------------------------


def parse_instance(text: str) -> tuple[Network, Optional[RoutingGraph]]:
    n: Optional[int] = None
    sink: Optional[int] = None
    prefs: dict[int, tuple[int, ...]] = {}
    filters: dict[int, frozenset[int]] = {}
    rg0: dict[int, int] = {}
    saw_rg0 = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        try:
            if head == "nodes":
                n = int(rest)
            elif head == "sink":
                sink = int(rest)
            elif head in ("prefs", "filter", "rg0"):
                target, _, body = rest.partition(":")
                v = int(target)
                values = tuple(int(tok) for tok in body.split())
                if head == "prefs":
                    prefs[v] = values
                elif head == "filter":
                    filters[v] = frozenset(values)
                else:
                    saw_rg0 = True
                    if len(values) > 1:
                        raise FormatError(
                            f"line {lineno}: rg0 takes at most one next hop"
                        )
                    if values:
                        rg0[v] = values[0]
            else:
                raise FormatError(f"line {lineno}: unknown directive {head!r}")
        except ValueError as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"line {lineno}: {raw.strip()!r}") from exc

    if n is None:
        raise FormatError("missing 'nodes' directive")
    if sink is None:
        raise FormatError("missing 'sink' directive")
    net = Network(
        n=n,
        sink=sink,
        prefs=tuple(prefs.get(v, ()) for v in range(n)),
        filters=tuple(filters.get(v, frozenset()) for v in range(n)),
    )
    validate_network(net)
    graph = None
    if saw_rg0:
        graph = RoutingGraph(tuple(rg0.get(v) for v in range(n)))
        for v, w in rg0.items():
            if w not in net.prefs[v]:
                raise FormatError(f"rg0 arc ({v},{w}) is not a network arc")
    return net, graph


def format_instance(net: Network, rg0: Optional[RoutingGraph] = None) -> str:
    """Canonical text for an instance; bit-exact round-trip with the parser."""
    lines = [f"nodes {net.n}", f"sink {net.sink}"]
    for v in net.nodes():
        if v == net.sink:
            continue
        lines.append(f"prefs {v}: " + " ".join(str(w) for w in net.prefs[v]))
    for v in net.nodes():
        if net.filters[v]:
            lines.append(
                f"filter {v}: " + " ".join(str(d) for d in sorted(net.filters[v]))
            )
    if rg0 is not None and rg0 != RoutingGraph.first_choice(net):
        for v in net.nodes():
            w = rg0.next_hop[v]
            if w is not None:
                lines.append(f"rg0 {v}: {w}")
    return "\n".join(lines) + "\n"
