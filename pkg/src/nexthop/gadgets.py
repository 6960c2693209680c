"""3-CNF hardness instances: construction and desk-scale verification.

A formula becomes a network in which stable trees mirror satisfying
assignments.  Each variable gets a four-node gadget whose two internal
configurations encode true/false; each clause gets a five-node gadget that
can reach the sink without the dummy sink d0 only when the encoded
assignment satisfies it; L padding nodes hang off the last clause and can
join a stable tree only when every clause is satisfied.  Gadgets are chained
so the path of any clause's tail node traverses one side of every variable
gadget, which is what the clause filters inspect.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from .analysis import is_stable_tree
from .model import Arc, Network, Node, validate_network


class FormulaError(ValueError):
    """Malformed DIMACS text or an unusable formula."""


class GadgetError(RuntimeError):
    """A structural assertion about the reduction failed."""


class DichotomyError(GadgetError):
    """The stable-tree verdict disagrees with the truth-table oracle."""


@dataclass(frozen=True)
class CnfFormula:
    num_vars: int
    clauses: tuple[tuple[int, int, int], ...]


def parse_formula(text: str) -> CnfFormula:
    """DIMACS-style parser: 'p cnf N M' then M zero-terminated 3-clauses."""
    header: Optional[tuple[int, int]] = None
    literals: list[int] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            if header is not None:
                raise FormulaError("duplicate header")
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise FormulaError(f"malformed header {line!r}")
            try:
                header = (int(parts[2]), int(parts[3]))
            except ValueError as exc:
                raise FormulaError(f"malformed header {line!r}") from exc
            continue
        try:
            literals.extend(int(tok) for tok in line.split())
        except ValueError as exc:
            raise FormulaError(f"bad clause line {line!r}") from exc
    if header is None:
        raise FormulaError("missing 'p cnf' header")
    num_vars, num_clauses = header
    clauses: list[tuple[int, int, int]] = []
    current: list[int] = []
    for lit in literals:
        if lit == 0:
            if len(current) != 3:
                raise FormulaError(
                    f"clause {current} has {len(current)} literals, need 3"
                )
            clauses.append(tuple(current))
            current = []
        else:
            if not 1 <= abs(lit) <= num_vars:
                raise FormulaError(f"literal {lit} out of range")
            current.append(lit)
    if current:
        raise FormulaError("unterminated clause")
    if len(clauses) != num_clauses:
        raise FormulaError(
            f"header promises {num_clauses} clauses, found {len(clauses)}"
        )
    return CnfFormula(num_vars=num_vars, clauses=tuple(clauses))


def satisfiable(f: CnfFormula) -> bool:
    """Truth-table decision."""
    for bits in itertools.product((False, True), repeat=f.num_vars):
        if all(
            any((lit > 0) == bits[abs(lit) - 1] for lit in clause)
            for clause in f.clauses
        ):
            return True
    return False


def satisfying_assignments(f: CnfFormula) -> list[tuple[bool, ...]]:
    out = []
    for bits in itertools.product((False, True), repeat=f.num_vars):
        if all(
            any((lit > 0) == bits[abs(lit) - 1] for lit in clause)
            for clause in f.clauses
        ):
            out.append(bits)
    return out


@dataclass(frozen=True)
class GadgetNetwork:
    net: Network
    labels: tuple[str, ...]
    num_vars: int
    num_clauses: int
    padding: int

    def node(self, label: str) -> Node:
        return self.labels.index(label)

    @property
    def chain_size(self) -> int:
        """Count of non-padding nodes."""
        return 4 * self.num_vars + 5 * self.num_clauses + 2


def build_reduction(f: CnfFormula, padding: int) -> GadgetNetwork:
    """Construct the hardness network for a 3-CNF formula.

    Variable gadget i: nodes a_i, uT_i, uF_i, b_i; the u nodes rank a_i
    first and b_i second, a_i ranks uT_i over uF_i, every gadget node
    filters itself.  Clause gadget j: nodes s_j, q_{1..3,j}, t_j; each q
    ranks t_j over the dummy sink d0 and filters the u node whose presence
    on t_j's path means the corresponding literal is falsified; s_j ranks
    the q's in literal order and filters d0, as does t_j.  The gadgets are
    chained b_1 -> sink, b_i -> a_{i-1}, t_1 -> a_N, t_j -> s_{j-1}, and the
    padding nodes all point at s_M and filter d0.
    """
    if padding < 0:
        raise ValueError("padding must be non-negative")
    if f.num_vars < 1 or not f.clauses:
        raise FormulaError("the reduction needs at least one variable and clause")
    n_vars, n_cls = f.num_vars, len(f.clauses)

    labels = ["r", "d0"]
    for i in range(1, n_vars + 1):
        labels += [f"a{i}", f"uT{i}", f"uF{i}", f"b{i}"]
    for j in range(1, n_cls + 1):
        labels += [f"s{j}", f"q1_{j}", f"q2_{j}", f"q3_{j}", f"t{j}"]
    for k in range(1, padding + 1):
        labels.append(f"d{k}")
    idx = {name: i for i, name in enumerate(labels)}

    n = len(labels)
    prefs: list[tuple[int, ...]] = [()] * n
    filters: list[frozenset[int]] = [frozenset()] * n

    prefs[idx["d0"]] = (idx["r"],)
    filters[idx["d0"]] = frozenset({idx["d0"]})

    for i in range(1, n_vars + 1):
        a, ut, uf, b = (idx[f"a{i}"], idx[f"uT{i}"], idx[f"uF{i}"], idx[f"b{i}"])
        prefs[a] = (ut, uf)
        prefs[ut] = (a, b)
        prefs[uf] = (a, b)
        prefs[b] = (idx["r"],) if i == 1 else (idx[f"a{i - 1}"],)
        for v in (a, ut, uf, b):
            filters[v] = frozenset({v})

    for j, clause in enumerate(f.clauses, start=1):
        s, t = idx[f"s{j}"], idx[f"t{j}"]
        qs = tuple(idx[f"q{z}_{j}"] for z in (1, 2, 3))
        prefs[s] = qs
        filters[s] = frozenset({idx["d0"]})
        prefs[t] = (idx[f"a{n_vars}"],) if j == 1 else (idx[f"s{j - 1}"],)
        filters[t] = frozenset({idx["d0"]})
        for z, q in enumerate(qs, start=1):
            lit = clause[z - 1]
            i = abs(lit)
            # the filtered u node is the one that sits on t_j's path exactly
            # when the assignment of x_i falsifies this literal
            side = f"uT{i}" if lit < 0 else f"uF{i}"
            prefs[q] = (t, idx["d0"])
            filters[q] = frozenset({idx[side]})

    for k in range(1, padding + 1):
        d = idx[f"d{k}"]
        prefs[d] = (idx[f"s{n_cls}"],)
        filters[d] = frozenset({idx["d0"]})

    net = Network(n=n, sink=idx["r"], prefs=tuple(prefs), filters=tuple(filters))
    validate_network(net)
    expected = 4 * n_vars + 5 * n_cls + padding + 2
    if n != expected:
        raise GadgetError(f"node count {n} != {expected}")
    return GadgetNetwork(
        net=net,
        labels=tuple(labels),
        num_vars=n_vars,
        num_clauses=n_cls,
        padding=padding,
    )


def format_labels(g: GadgetNetwork) -> str:
    return "\n".join(f"label {i} {name}" for i, name in enumerate(g.labels)) + "\n"


# ---------------------------------------------------------------------------
# Exact stable-tree searches specialised to the gadget chain.
#
# Raw enumeration over all choice functions is hopeless here (the N=M=2
# instances already have ~1e9 of them), but the chain layout admits an exact
# search: every node's out-neighbours sit in the same gadget or an earlier
# one, so paths and all stability checks are decidable the moment a gadget's
# choices are placed, and the DFS over per-gadget choice combinations prunes
# every doomed prefix immediately.
# ---------------------------------------------------------------------------


def _units(g: GadgetNetwork) -> list[list[tuple[Node, tuple[Node, ...]]]]:
    """Per-gadget (node, parent-candidates) blocks, in chain order."""
    idx = g.node
    units: list[list[tuple[Node, tuple[Node, ...]]]] = []
    units.append([(idx("d0"), g.net.prefs[idx("d0")])])
    for i in range(1, g.num_vars + 1):
        a, ut, uf, b = (idx(f"a{i}"), idx(f"uT{i}"), idx(f"uF{i}"), idx(f"b{i}"))
        units.append(
            [
                (b, g.net.prefs[b]),
                (a, g.net.prefs[a]),
                (ut, g.net.prefs[ut]),
                (uf, g.net.prefs[uf]),
            ]
        )
    for j in range(1, g.num_clauses + 1):
        s, t = idx(f"s{j}"), idx(f"t{j}")
        qs = [idx(f"q{z}_{j}") for z in (1, 2, 3)]
        unit = [(t, g.net.prefs[t])]
        unit += [(q, g.net.prefs[q]) for q in qs]
        unit.append((s, g.net.prefs[s]))
        units.append(unit)
    if g.padding:
        units.append(
            [
                (idx(f"d{k}"), g.net.prefs[idx(f"d{k}")])
                for k in range(1, g.padding + 1)
            ]
        )
    return units


def _place_unit(
    net: Network,
    combo: list[tuple[Node, Node]],
    paths: dict[Node, tuple[Node, ...]],
) -> Optional[dict[Node, tuple[Node, ...]]]:
    """Check one gadget's joint parent choice against everything placed.

    Returns the new paths for the unit's nodes, or None when the combo
    breaks acyclicity, arc validity, or preference maximality.  Relies on
    every out-neighbour being inside the unit or already placed.
    """
    local = dict(combo)
    new_paths: dict[Node, tuple[Node, ...]] = {}

    def path_of(v: Node) -> Optional[tuple[Node, ...]]:
        if v in paths:
            return paths[v]
        if v in new_paths:
            return new_paths[v]
        trail = [v]
        cur = local[v]
        while cur not in paths and cur not in new_paths:
            if cur in trail:
                return None
            trail.append(cur)
            cur = local[cur]
        suffix = paths.get(cur) or new_paths.get(cur)
        for u in reversed(trail):
            suffix = (u,) + suffix
            new_paths[u] = suffix
        return new_paths[v]

    for v, w in combo:
        if path_of(v) is None:
            return None
    for v, w in combo:
        filt = net.filters[v]
        if filt & set(path_of(w)):
            return None
        for x in net.prefs[v]:
            if x == w:
                break
            if not (filt & set(path_of(x))):
                return None
    return new_paths


def spanning_stable_trees(g: GadgetNetwork) -> list[frozenset[Arc]]:
    """All spanning stable trees of a gadget network, exactly."""
    net = g.net
    units = _units(g)
    results: list[frozenset[Arc]] = []
    parent: dict[Node, Node] = {}
    paths: dict[Node, tuple[Node, ...]] = {net.sink: (net.sink,)}

    def descend(k: int) -> None:
        if k == len(units):
            results.append(frozenset(parent.items()))
            return
        unit = units[k]
        nodes = [v for v, _ in unit]
        for picks in itertools.product(*(cands for _, cands in unit)):
            combo = list(zip(nodes, picks))
            placed = _place_unit(net, combo, paths)
            if placed is None:
                continue
            parent.update(combo)
            paths.update(placed)
            descend(k + 1)
            for v in nodes:
                del parent[v]
                del paths[v]

    descend(0)
    for arcs in results:
        report = is_stable_tree(net, arcs)
        if not report.stable or report.size != net.n:
            raise GadgetError("spanning search produced a non-stable tree")
    return results


def stable_tree_with_padding(g: GadgetNetwork) -> Optional[frozenset[Arc]]:
    """A stable tree containing a padding node, if one exists.

    Any stable tree restricted to one member's path to the sink is itself a
    stable tree (paths are preserved and competitors only disappear), and
    conversely a padding node extends any stable tree that gives s_M a
    d0-free path.  So padding membership reduces to: some simple path from
    the first padding node to the sink forms a stable tree on its own.
    """
    if not g.padding:
        return None
    net = g.net
    start = g.node("d1")

    # enumerate simple paths start -> sink, checking each as a path tree
    def paths_from(v: Node, seen: tuple[Node, ...]):
        if v == net.sink:
            yield seen
            return
        for w in net.prefs[v]:
            if w not in seen:
                yield from paths_from(w, seen + (w,))

    for path in paths_from(start, (start,)):
        arcs = frozenset(zip(path, path[1:]))
        if is_stable_tree(net, arcs).stable:
            return arcs
    return None


def decode_assignment(g: GadgetNetwork, arcs: frozenset[Arc]) -> tuple[bool, ...]:
    """Variable assignment encoded by a spanning stable tree."""
    parent = dict(arcs)
    bits = []
    for i in range(1, g.num_vars + 1):
        a, ut = g.node(f"a{i}"), g.node(f"uT{i}")
        bits.append(parent.get(a) == ut)
    return tuple(bits)


def _assert_one_u_per_gadget(g: GadgetNetwork, arcs: frozenset[Arc]) -> None:
    # each clause tail's path must pierce exactly one side of every gadget
    from .analysis import tree_paths

    paths = tree_paths(arcs, g.net.sink)
    for j in range(1, g.num_clauses + 1):
        path = set(paths[g.node(f"t{j}")])
        for i in range(1, g.num_vars + 1):
            hits = len(path & {g.node(f"uT{i}"), g.node(f"uF{i}")})
            if hits != 1:
                raise GadgetError(
                    f"t{j}'s path meets gadget {i} in {hits} u-nodes"
                )


@dataclass(frozen=True)
class DichotomyReport:
    satisfiable: bool
    spanning_trees: tuple[frozenset[Arc], ...]
    assignments: tuple[tuple[bool, ...], ...]
    padding_tree: Optional[frozenset[Arc]]
    node_count: int
    chain_size: int

    @property
    def classification(self) -> str:
        return "YES" if self.spanning_trees else "NO"

    @property
    def max_size_bound(self) -> int:
        return self.node_count if self.spanning_trees else self.chain_size


def verify_dichotomy(f: CnfFormula, padding: int) -> DichotomyReport:
    """Classify a formula's network and cross-check against truth-table SAT.

    YES means a spanning stable tree exists; NO means no stable tree
    contains a padding node, which caps every stable tree at the chain size.
    A mismatch with the truth-table oracle raises :class:`DichotomyError`.
    """
    g = build_reduction(f, padding)
    sat = satisfiable(f)
    spanning = spanning_stable_trees(g)
    if bool(spanning) != sat:
        raise DichotomyError(
            f"satisfiable={sat} but spanning stable trees={len(spanning)}"
        )
    assignments = []
    for arcs in spanning:
        _assert_one_u_per_gadget(g, arcs)
        assignments.append(decode_assignment(g, arcs))
    padding_tree = None
    if not sat:
        padding_tree = stable_tree_with_padding(g)
        if padding_tree is not None:
            raise DichotomyError(
                "unsatisfiable formula admits a stable tree with padding"
            )
    return DichotomyReport(
        satisfiable=sat,
        spanning_trees=tuple(spanning),
        assignments=tuple(assignments),
        padding_tree=padding_tree,
        node_count=g.net.n,
        chain_size=g.chain_size,
    )
