"""Deterministic synthetic transaction streams for experiments and tests.

Every generator emits raw ingest rows (src, dst, value, timestamp) with
sequential timestamps, so the streams segment cleanly by time and the
resulting graphs are reproducible from a seed.
"""

from __future__ import annotations

import numpy as np


def _addr(i: int) -> str:
    return f"a{i:05d}"


def _value(rng) -> float:
    # lognormal-ish transfer sizes, rounded so dumps stay compact
    return round(float(np.exp(rng.normal(0.0, 1.0))), 6)


def preferential_attachment_stream(num_nodes: int, core: int = 60,
                                   core_degree: int = 8, window: int = 120,
                                   attach_bias: float = 0.8,
                                   respend_rate: float = 0.15,
                                   repeat_ramp: float = 0.9,
                                   seed: int = 0) -> list:
    """Transaction stream over a merchant core plus single-spend leaves.

    The first `core` addresses trade densely among themselves (ring plus
    urn-preferential edges) and soak up most walk traffic. Every later
    address appears once, spending to a target drawn preferentially (by
    received-transfer count, probability `attach_bias`) from the last
    `window` leaf addresses, falling back to a merchant while the window
    is empty; recent hot leaves occasionally spend again
    (`respend_rate`), which is the only post-creation out-degree churn.
    Later in the stream, repeated transfers over already-existing recent
    edges ramp up (`repeat_ramp`), mimicking how settled pairs keep
    transacting: they add weight but no structure. The churn and the
    repeats both stay on recent, lightly-visited addresses, keeping
    incremental corpus updates cheap relative to regeneration.
    """
    if num_nodes < core + 2 or core < 3 or core_degree < 2:
        raise ValueError("need num_nodes > core >= 3 and core_degree >= 2")
    rng = np.random.default_rng(seed)
    rows = []
    ts = 0

    def emit(s, d):
        nonlocal ts
        rows.append((_addr(s), _addr(d), _value(rng), ts))
        ts += 1

    urn = []         # leaf recipient per received transfer (recency-windowed)
    leaf_edges = []  # distinct leaf-out edges, for repeat traffic

    def pick_hot(u):
        lo = max(core, u - window)
        recent = [x for x in urn if x >= lo]
        if not recent:
            return None
        return recent[rng.integers(len(recent))]

    def pick_target(u):
        t = pick_hot(u) if rng.random() < attach_bias else None
        if t is None:
            lo = max(core, u - window)
            t = int(rng.integers(lo, u)) if lo < u else None
        if t is None or t == u:
            return int(rng.integers(core))  # merchant fallback
        return t

    for c in range(core):
        emit(c, (c + 1) % core)
        for _ in range(core_degree - 2):
            t = int(rng.integers(core))
            if t == c:
                t = (c + 1) % core
            emit(c, t)
    for u in range(core, num_nodes):
        t = pick_target(u)
        emit(u, t)
        urn.append(t)
        leaf_edges.append((u, t))
        if rng.random() < respend_rate:
            spender = pick_hot(u)
            if spender is not None:
                t2 = pick_target(u)
                if t2 != spender:
                    emit(spender, t2)
                    urn.append(t2)
                    leaf_edges.append((spender, t2))
        progress = (u - core) / (num_nodes - core)
        if leaf_edges and rng.random() < repeat_ramp * progress * progress:
            s2, d2 = leaf_edges[max(0, len(leaf_edges) - window) +
                                int(rng.integers(min(window, len(leaf_edges))))]
            emit(s2, d2)
            urn.append(d2)
    return rows


def sbm_stream(sizes=(30, 30), p_in: float = 0.3, p_out: float = 0.01,
               seed: int = 0) -> tuple:
    """Directed two-community stochastic block model.

    Returns (rows, labels) with labels mapping address -> block index.
    Isolated nodes are patched with one intra-block edge so the stream
    realizes every planned address.
    """
    rng = np.random.default_rng(seed)
    n = sum(sizes)
    block = np.repeat(np.arange(len(sizes)), sizes)
    present = np.zeros(n, dtype=bool)
    edges = []
    for u in range(n):
        for v in range(n):
            if u == v:
                continue
            p = p_in if block[u] == block[v] else p_out
            if rng.random() < p:
                edges.append((u, v))
                present[u] = present[v] = True
    for u in np.flatnonzero(~present):
        mates = np.flatnonzero((block == block[u]) & (np.arange(n) != u))
        edges.append((u, int(mates[rng.integers(len(mates))])))
        present[u] = True
    rows = [(_addr(s), _addr(d), 1.0, ts) for ts, (s, d) in enumerate(edges)]
    labels = {_addr(u): int(block[u]) for u in range(n)}
    return rows, labels


def sink_heavy_stream(num_nodes: int = 200, sink_frac: float = 0.3,
                      cross_rate: float = 0.25, seed: int = 0) -> list:
    """Communities of traders that all deposit into the same two dead-end
    addresses (30% of nodes by default), plus occasional cross-community
    transfers.

    Members of a community form a spending ring and each sends to both
    community sinks, so the sinks sit one hop from every member; a walk
    stepping uniformly dies often, while transitions that look two hops
    ahead mostly see other ring members.
    """
    rng = np.random.default_rng(seed)
    num_sinks = int(num_nodes * sink_frac + 0.5)
    if num_sinks < 2 or num_sinks % 2:
        raise ValueError("sink budget must be an even count >= 2")
    n_comm = num_sinks // 2
    num_core = num_nodes - num_sinks
    if num_core < 3 * n_comm:
        raise ValueError("need at least 3 core nodes per community")
    # round-robin community sizes (mixes rings of 4 and 5 at the defaults)
    members = [[] for _ in range(n_comm)]
    for u in range(num_core):
        members[u % n_comm].append(u)
    rows = []
    ts = 0

    def emit(s, d):
        nonlocal ts
        rows.append((_addr(s), _addr(d), _value(rng), ts))
        ts += 1

    for c, ring in enumerate(members):
        s1 = num_core + 2 * c
        s2 = s1 + 1
        for i, u in enumerate(ring):
            emit(u, ring[(i + 1) % len(ring)])
            emit(u, s1)
            emit(u, s2)
            if n_comm > 1 and rng.random() < cross_rate:
                other = int(rng.integers(n_comm - 1))
                other = other + 1 if other >= c else other
                emit(u, members[other][rng.integers(len(members[other]))])
    return rows


def gnm_digraph_stream(num_nodes: int, num_edges: int, seed: int = 0) -> list:
    """Uniform random simple digraph stream (no self-loops)."""
    rng = np.random.default_rng(seed)
    seen = set()
    rows = []
    ts = 0
    cap = num_nodes * (num_nodes - 1)
    if num_edges > cap:
        raise ValueError(f"at most {cap} simple directed edges possible")
    while len(seen) < num_edges:
        u = int(rng.integers(num_nodes))
        v = int(rng.integers(num_nodes))
        if u == v or (u, v) in seen:
            continue
        seen.add((u, v))
        rows.append((_addr(u), _addr(v), _value(rng), ts))
        ts += 1
    return rows
