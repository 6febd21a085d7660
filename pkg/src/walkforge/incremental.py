"""Walk-corpus maintenance across graph versions.

Three strategies over the same interface:

* unbiased: trim every walk that touches an affected node back to the
  first such occurrence, then resample its remainder on the new graph;
  generate fresh walks for new nodes. Untouched walks are reused as-is.
* naive: only generate walks for new nodes; stale walks are kept.
* scratch: regenerate the whole corpus (the equivalence baseline).

The resumed suffix of a trimmed walk is drawn by the same sampler that
made the corpus, so its conditional distribution matches a fresh walk
started at the resume point on the new graph; that is what keeps the
updated corpus statistically interchangeable with a regenerated one.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ModeMismatchError, StateMismatchError, VersionMismatchError
from .graph import GraphDelta, TransactionGraph
from .walks import (
    WalkConfig,
    WalkCorpus,
    build_node_index,
    fresh_walk_rng,
    generate_corpus,
    make_sampler,
    resume_rng,
)


@dataclass
class DrawCounter:
    """Accumulates candidate draws; the work measure for update-vs-scratch."""

    draws: int = 0


@dataclass(frozen=True)
class UpdatePlan:
    """Which walks must be resampled and which nodes need fresh walks."""

    affected_walks: frozenset
    new_nodes: frozenset
    affected_nodes: frozenset


def plan_update(corpus: WalkCorpus, delta: GraphDelta) -> UpdatePlan:
    """Resolve the delta against the corpus via the node index only."""
    if corpus.graph_version != delta.src_version:
        raise VersionMismatchError(
            f"corpus is at graph version {corpus.graph_version}, "
            f"delta starts at {delta.src_version}")
    affected_walks = set()
    for u in delta.affected_nodes:
        affected_walks |= corpus.walks_containing(u)
    return UpdatePlan(frozenset(affected_walks), delta.new_nodes,
                      delta.affected_nodes)


def trim_walk(walk, affected_nodes) -> tuple:
    """Prefix of the walk up to and including its first affected node.

    The affected node stays: its history is still valid, only its outgoing
    distribution changed, so resampling restarts from it.
    """
    for i, u in enumerate(walk):
        if u in affected_nodes:
            return tuple(walk[:i + 1])
    raise ValueError("walk contains no affected node")


def _check_update_args(corpus, g_next, delta, cfg, mode):
    if mode != corpus.mode:
        raise ModeMismatchError(
            f"corpus was generated in {corpus.mode!r} mode; updating in "
            f"{mode!r} would mix transition laws")
    if cfg.num_walks != corpus.n or cfg.walk_length != corpus.l:
        raise StateMismatchError(
            f"config (n={cfg.num_walks}, l={cfg.walk_length}) does not match "
            f"corpus (n={corpus.n}, l={corpus.l})")
    if g_next.version != delta.dst_version:
        raise VersionMismatchError(
            f"graph is version {g_next.version} but delta targets "
            f"{delta.dst_version}")


def _replace_walk(corpus: WalkCorpus, i: int, new_walk: tuple):
    old_nodes = set(corpus.walks[i])
    new_nodes = set(new_walk)
    for u in old_nodes - new_nodes:
        entry = corpus.node_index[u]
        entry.discard(i)
        if not entry:
            del corpus.node_index[u]
    for u in new_nodes - old_nodes:
        corpus.node_index.setdefault(u, set()).add(i)
    corpus.walks[i] = new_walk


def _append_walk(corpus: WalkCorpus, walk: tuple):
    i = len(corpus.walks)
    corpus.walks.append(walk)
    for u in set(walk):
        corpus.node_index.setdefault(u, set()).add(i)


def unbiased_update(corpus: WalkCorpus, g_next: TransactionGraph,
                    delta: GraphDelta, cfg: WalkConfig, mode: str,
                    counter: DrawCounter | None = None,
                    check_index: bool = False) -> WalkCorpus:
    """Trim-and-resume update; returns a new corpus at g_next's version.

    Walks without affected nodes are carried over untouched (same tuple
    objects). Resampling uses per-walk-index substreams keyed by the new
    graph version, so the result is reproducible regardless of order.
    """
    _check_update_args(corpus, g_next, delta, cfg, mode)
    plan = plan_update(corpus, delta)
    out = corpus.copy()
    sampler = make_sampler(g_next, cfg, mode)
    for wi in sorted(plan.affected_walks):
        prefix = trim_walk(corpus.walks[wi], plan.affected_nodes)
        rng = resume_rng(cfg, g_next.version, wi)
        _replace_walk(out, wi, tuple(sampler.extend(list(prefix), rng)))
    for u in sorted(plan.new_nodes):
        for i in range(cfg.num_walks):
            rng = fresh_walk_rng(cfg, u, i)
            _append_walk(out, tuple(sampler.extend([u], rng)))
    out.graph_version = g_next.version
    out.num_nodes = g_next.num_nodes
    if counter is not None:
        counter.draws += sampler.draws
    if check_index and build_node_index(out.walks) != out.node_index:
        raise AssertionError("incremental node index diverged from rebuild")
    return out


def naive_update(corpus: WalkCorpus, g_next: TransactionGraph,
                 delta: GraphDelta, cfg: WalkConfig, mode: str,
                 counter: DrawCounter | None = None) -> WalkCorpus:
    """Fresh walks for new nodes only; existing walks kept verbatim."""
    _check_update_args(corpus, g_next, delta, cfg, mode)
    out = corpus.copy()
    sampler = make_sampler(g_next, cfg, mode)
    for u in sorted(delta.new_nodes):
        for i in range(cfg.num_walks):
            rng = fresh_walk_rng(cfg, u, i)
            _append_walk(out, tuple(sampler.extend([u], rng)))
    out.graph_version = g_next.version
    out.num_nodes = g_next.num_nodes
    if counter is not None:
        counter.draws += sampler.draws
    return out


def from_scratch(g: TransactionGraph, cfg: WalkConfig, mode: str,
                 counter: DrawCounter | None = None) -> WalkCorpus:
    """Full regeneration on the given graph; baseline for equivalence runs."""
    return generate_corpus(g, cfg, mode, counter=counter)
