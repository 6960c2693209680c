"""Seeded random instance generation for tests and batch experiments."""

from __future__ import annotations

import random

from .model import Network, validate_network


def random_network(
    rng: random.Random,
    n: int,
    min_deg: int = 2,
    max_deg: int = 4,
    filters: str | None = None,
) -> Network:
    """Random validated network on n nodes with sink 0.

    Out-degrees are drawn uniformly from [min_deg, max_deg] (capped at n-1)
    and rankings follow the sample order.  Unreachable nodes are repaired by
    rewiring their least-preferred arc toward the reachable region, so the
    result always validates.  ``filters`` is None (empty lists) or "self".
    """
    if n < 2:
        raise ValueError("need at least a sink and one node")
    prefs: list[list[int]] = [[] for _ in range(n)]
    for v in range(1, n):
        deg = rng.randint(min(min_deg, n - 1), min(max_deg, n - 1))
        prefs[v] = rng.sample([u for u in range(n) if u != v], deg)

    while True:
        reach = {0}
        grew = True
        while grew:
            grew = False
            for v in range(1, n):
                if v not in reach and any(w in reach for w in prefs[v]):
                    reach.add(v)
                    grew = True
        stranded = [v for v in range(1, n) if v not in reach]
        if not stranded:
            break
        v = stranded[0]
        target = rng.choice(sorted(reach - {v}))
        if target not in prefs[v]:
            prefs[v][-1] = target

    net = Network.of(prefs, filters=filters)
    validate_network(net)
    return net
