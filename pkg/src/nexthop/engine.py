"""Round-based dynamics: activation, packet forwarding, route verification.

A round runs four phases in order: adversarial repositioning of cycling
packets, the control plane (every non-sink node activates once, in the
scheduler's permutation), the forwarding plane (each live packet moves up to
n hops or reaches the sink), and route verification (every believed path is
reset to the true path in the routing graph).

States are immutable; every phase returns a fresh state with the trace
extended.  A simulation is therefore a pure function of (network, initial
routing graph, scheduler, adversary policy).
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, replace
from typing import Optional, Protocol, Sequence

from .model import (
    Network,
    Node,
    Path,
    RoutingGraph,
    actual_path,
)


class FairnessError(ValueError):
    """A round's permutation does not cover every non-sink node exactly once."""


class PolicyError(ValueError):
    """An adversary policy was used where it is not allowed."""


class PlacementBudgetError(RuntimeError):
    """Exhaustive adversary branching would exceed the placement budget."""


@dataclass(frozen=True)
class PacketState:
    """One packet of the round-0 cohort.

    ``location`` is None once delivered; ``last_cycle`` is the cycle the
    packet was captured in during the previous forwarding phase, if any, and
    ``last_hops`` how many hops that phase consumed.
    """

    pid: int
    origin: Node
    location: Optional[Node]
    delivered_round: Optional[int] = None
    last_cycle: Optional[tuple[Node, ...]] = None
    last_hops: int = 0

    @property
    def delivered(self) -> bool:
        return self.delivered_round is not None


class AdversaryPolicy:
    """Where a packet caught in a cycle sits when the next round begins."""


@dataclass(frozen=True)
class StayPolicy(AdversaryPolicy):
    pass


@dataclass(frozen=True)
class FixedChoicePolicy(AdversaryPolicy):
    rule: str = "min"  # "min" or "max" node id within the cycle

    def place(self, cycle: tuple[Node, ...]) -> Node:
        return min(cycle) if self.rule == "min" else max(cycle)


@dataclass(frozen=True)
class ExhaustivePolicy(AdversaryPolicy):
    """Fork the simulation over every joint placement (analysis runs only)."""

    budget: int = 4096


STAY = StayPolicy()


@dataclass(frozen=True)
class EngineState:
    net: Network
    round: int
    rg: RoutingGraph
    paths: tuple[Path, ...]
    packets: tuple[PacketState, ...]
    trace: tuple[str, ...]

    @property
    def clear_set(self) -> frozenset[Node]:
        return frozenset(v for v in self.net.nodes() if self.paths[v])

    @property
    def opaque_set(self) -> frozenset[Node]:
        return frozenset(v for v in self.net.nodes() if not self.paths[v])

    @property
    def all_delivered(self) -> bool:
        return all(p.delivered for p in self.packets)

    def is_consistent(self, v: Node) -> bool:
        return self.paths[v] == actual_path(self.rg, v, self.net.sink)

    @staticmethod
    def initial(net: Network, rg0: Optional[RoutingGraph] = None) -> "EngineState":
        """Round-0 state: verified paths on rg0 and one packet per non-sink node.

        rg0 defaults to the all-first-choice graph.
        """
        rg = rg0 if rg0 is not None else RoutingGraph.first_choice(net)
        paths = tuple(actual_path(rg, v, net.sink) for v in net.nodes())
        packets = tuple(
            PacketState(pid=v, origin=v, location=v) for v in net.non_sink_nodes()
        )
        state = EngineState(
            net=net, round=0, rg=rg, paths=paths, packets=packets, trace=()
        )
        return replace(state, trace=(_verify_line(0, state),))


def _fmt_path(path: Path) -> str:
    return "-".join(str(v) for v in path) if path else "empty"


def _verify_line(t: int, state: EngineState) -> str:
    inside = ",".join(str(v) for v in sorted(state.clear_set))
    return f"round {t} | verify clear={{{inside}}}"


def best_valid_choice(state: EngineState, v: Node) -> Optional[Node]:
    """Earliest neighbour in prefs[v] that is clear and whose believed path
    avoids v's filtering list; None when no neighbour qualifies."""
    filt = state.net.filters[v]
    for w in state.net.prefs[v]:
        path = state.paths[w]
        if path and not (filt and filt.intersection(path)):
            return w
    return None


def activate(state: EngineState, v: Node) -> EngineState:
    """One control-plane step: v adopts its best valid choice, or goes empty.

    With no valid choice the believed path empties and the outgoing arc is
    removed, keeping the routing graph in step with the believed state.
    """
    t = state.round + 1
    w = best_valid_choice(state, v)
    paths = list(state.paths)
    if w is None:
        paths[v] = ()
        rg = state.rg.with_choice(v, None)
        line = f"round {t} | activate {v} -> none path=empty"
    else:
        paths[v] = (v,) + state.paths[w]
        rg = state.rg.with_choice(v, w)
        line = f"round {t} | activate {v} -> {w} path={_fmt_path(paths[v])}"
    return replace(
        state, rg=rg, paths=tuple(paths), trace=state.trace + (line,)
    )


def _walk(rg: RoutingGraph, start: Node, sink: Node, max_hops: int):
    """Walk up to max_hops from start; returns (hops, end, delivered)."""
    cur = start
    hops: list[tuple[Node, Node]] = []
    while len(hops) < max_hops and cur != sink:
        nxt = rg.next_hop[cur]
        if nxt is None:
            break
        hops.append((cur, nxt))
        cur = nxt
    return hops, cur, cur == sink


def _enclosing_cycle(rg: RoutingGraph, v: Node, n: int) -> Optional[tuple[Node, ...]]:
    """The cycle through v in rg, canonically rotated, or None."""
    seq = [v]
    cur = v
    for _ in range(n):
        nxt = rg.next_hop[cur]
        if nxt is None:
            return None
        if nxt == v:
            lead = seq.index(min(seq))
            return tuple(seq[lead:] + seq[:lead])
        seq.append(nxt)
        cur = nxt
    return None


def forward_packets(state: EngineState) -> EngineState:
    """Forwarding phase: each live packet moves at most n hops or reaches
    the sink.  A packet at a node with no next hop stays put."""
    t = state.round + 1
    n = state.net.n
    sink = state.net.sink
    lines: list[str] = []
    packets: list[PacketState] = []
    for pkt in state.packets:
        if pkt.delivered:
            packets.append(pkt)
            continue
        hops, end, delivered = _walk(state.rg, pkt.location, sink, n)
        for u, w in hops:
            lines.append(f"round {t} | forward pkt={pkt.pid} {u}->{w}")
        if delivered:
            lines.append(f"round {t} | delivered pkt={pkt.pid}")
            packets.append(
                replace(
                    pkt,
                    location=None,
                    delivered_round=t,
                    last_cycle=None,
                    last_hops=len(hops),
                )
            )
        else:
            cycle = None
            if len(hops) == n:
                cycle = _enclosing_cycle(state.rg, end, n)
            packets.append(
                replace(pkt, location=end, last_cycle=cycle, last_hops=len(hops))
            )
    return replace(
        state, packets=tuple(packets), trace=state.trace + tuple(lines)
    )


def route_verification(state: EngineState) -> EngineState:
    """Every node learns its true path in the routing graph."""
    t = state.round + 1
    paths = tuple(
        actual_path(state.rg, v, state.net.sink) for v in state.net.nodes()
    )
    state = replace(state, paths=paths)
    return replace(state, trace=state.trace + (_verify_line(t, state),))


def place_cycled_packets(state: EngineState, policy: AdversaryPolicy):
    """Reposition packets captured in cycles, per the adversary policy.

    Returns a single state for STAY / FIXED_CHOICE and a list of successor
    states (one per joint placement) for EXHAUSTIVE.
    """
    if isinstance(policy, StayPolicy):
        return state
    t = state.round + 1
    if isinstance(policy, FixedChoicePolicy):
        packets = []
        lines = []
        for pkt in state.packets:
            if pkt.last_cycle and not pkt.delivered:
                dest = policy.place(pkt.last_cycle)
                if dest != pkt.location:
                    lines.append(
                        f"round {t} | adversary pkt={pkt.pid} {pkt.location}->{dest}"
                    )
                packets.append(replace(pkt, location=dest))
            else:
                packets.append(pkt)
        return replace(
            state, packets=tuple(packets), trace=state.trace + tuple(lines)
        )
    if isinstance(policy, ExhaustivePolicy):
        options: list[list[PacketState]] = []
        total = 1
        for pkt in state.packets:
            if pkt.last_cycle and not pkt.delivered:
                total *= len(pkt.last_cycle)
                options.append(
                    [replace(pkt, location=dest) for dest in pkt.last_cycle]
                )
            else:
                options.append([pkt])
        if total > policy.budget:
            raise PlacementBudgetError(
                f"{total} joint placements exceed budget {policy.budget}"
            )
        states = []
        for combo in itertools.product(*options):
            lines = tuple(
                f"round {t} | adversary pkt={p.pid} {q.location}->{p.location}"
                for p, q in zip(combo, state.packets)
                if p.location != q.location
            )
            states.append(
                replace(state, packets=tuple(combo), trace=state.trace + lines)
            )
        return states
    raise PolicyError(f"unknown adversary policy {policy!r}")


def run_round(
    state: EngineState,
    perm: Sequence[Node],
    policy: AdversaryPolicy = STAY,
) -> EngineState:
    """Execute one full round under a fair activation permutation."""
    if sorted(perm) != sorted(state.net.non_sink_nodes()):
        raise FairnessError(
            f"permutation {list(perm)} is not a permutation of the non-sink nodes"
        )
    if isinstance(policy, ExhaustivePolicy):
        raise PolicyError("exhaustive branching is only allowed in analysis runs")
    t = state.round + 1
    state = place_cycled_packets(state, policy)
    for v in perm:
        state = activate(state, v)
    state = forward_packets(state)
    state = route_verification(state)
    return replace(state, round=t)


def is_equilibrium(state: EngineState) -> bool:
    """True when every node is consistent and sits on its best valid choice
    (no valid choice if and only if its path is empty)."""
    for v in state.net.nodes():
        if not state.is_consistent(v):
            return False
    for v in state.net.non_sink_nodes():
        if state.rg.next_hop[v] != best_valid_choice(state, v):
            return False
    return True


class Scheduler(Protocol):
    """Per-round permutation source; may observe the full engine state."""

    def permutation(self, state: EngineState) -> list[Node]: ...

    def after_round(self, state: EngineState) -> None: ...


class Stop(enum.Enum):
    ALL_DELIVERED = "delivered"
    EQUILIBRIUM = "equilibrium"
    ROUNDS = "rounds"


def stop_met(state: EngineState, stop: Stop) -> bool:
    if stop is Stop.ALL_DELIVERED:
        return state.all_delivered
    if stop is Stop.EQUILIBRIUM:
        return is_equilibrium(state)
    return True


def run(
    state: EngineState,
    scheduler: Scheduler,
    max_rounds: int,
    stop: Stop = Stop.ROUNDS,
    policy: AdversaryPolicy = STAY,
) -> tuple[EngineState, tuple[str, ...]]:
    """Drive rounds until the stop condition or max_rounds.

    With ``Stop.ROUNDS`` exactly ``max_rounds`` rounds are executed.
    """
    for _ in range(max_rounds):
        if stop is not Stop.ROUNDS and stop_met(state, stop):
            break
        perm = scheduler.permutation(state)
        state = run_round(state, perm, policy)
        scheduler.after_round(state)
    return state, state.trace


def imperfect_rounds(state: EngineState) -> tuple[int, ...]:
    """Rounds at whose end some round-0 packet was still undelivered."""
    out = []
    for t in range(1, state.round + 1):
        if any(
            p.delivered_round is None or p.delivered_round > t
            for p in state.packets
        ):
            out.append(t)
    return tuple(out)


def trace_permutations(trace: Sequence[str]) -> list[list[Node]]:
    """Recover the per-round activation permutations from a trace."""
    rounds: dict[int, list[Node]] = {}
    for line in trace:
        head, _, rest = line.partition(" | ")
        if rest.startswith("activate "):
            t = int(head.split()[1])
            v = int(rest.split()[1])
            rounds.setdefault(t, []).append(v)
    return [rounds[t] for t in sorted(rounds)]
