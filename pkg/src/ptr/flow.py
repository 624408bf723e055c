"""Proof-flow propagation and weight updating (one exemplar per sweep).

BottomUp computes u(e), the probability that the node an edge leads to
passes "true" given the example; TopDown pulls each u toward the exemplar's
target classification, yielding v(e) and the posterior-style weight update
p_new(e) = 1 - (1 - p(e)) * v(e)/u(e).
"""

from __future__ import annotations

import logging
from typing import Mapping

from .dtgraph import ANCHOR, EdgeId, EdgeKind, WeightedDtGraph
from .theory import Example, Exemplar

log = logging.getLogger("ptr.flow")

P_FLOOR = 1e-12


class CompiledFlow:
    """Static traversal schedule for one graph structure.

    Edge arrays are indexed 0..m-1; up_order is reverse-topological and
    down_order topological with ties broken by node id, so sweeps are
    deterministic and touch every edge exactly once.
    """

    def __init__(self, k: WeightedDtGraph) -> None:
        topo = k.topological_nodes()
        edges: list[EdgeId] = []
        for node in topo:
            edges.extend(sorted(k.out_edges(node)))
        self.edges = edges
        self.index = {e: i for i, e in enumerate(edges)}
        self.kind = [k.edge_kind[e] for e in edges]
        self.leaf_prop: list[str | None] = []
        self.child_edges: list[list[int]] = []
        self.parent_edges: list[list[int]] = []
        for e in edges:
            child = e[1]
            outs = k.out_edges(child)
            kind = k.node_kind[child]
            if not outs and kind.kind == "lit" and not kind.negated:
                # observable leaf: the example supplies its truth
                self.leaf_prop.append(kind.prop)
                self.child_edges.append([])
            else:
                # childless clause nodes fall through to the empty product
                # (body "true": the clause literal is identically false)
                self.leaf_prop.append(None)
                self.child_edges.append(sorted(self.index[d] for d in outs))
            self.parent_edges.append(sorted(self.index[f] for f in k.in_edges(e[0])))
        self.up_order = [
            self.index[e] for node in reversed(topo) for e in sorted(k.in_edges(node))
        ]
        self.down_order = list(range(len(edges)))
        self.root_edge_index = {r: self.index[(ANCHOR, r)] for r in k.roots}
        self.roots = k.roots


def compiled(k: WeightedDtGraph) -> CompiledFlow:
    cache = getattr(k, "_flow_cache", None)
    if cache is not None and cache[0] == k._stamp:
        return cache[1]
    cf = CompiledFlow(k)
    k._flow_cache = (k._stamp, cf)
    return cf


def _up(cf: CompiledFlow, p: list[float], leaf: Mapping[str, float]) -> list[float]:
    u = [0.0] * len(cf.edges)
    child_edges = cf.child_edges
    leaf_prop = cf.leaf_prop
    for i in cf.up_order:
        prop = leaf_prop[i]
        if prop is not None:
            u[i] = 1.0 - p[i] * (1.0 - leaf.get(prop, 0.0))
        else:
            prod = 1.0
            for d in child_edges[i]:
                prod *= u[d]
            u[i] = 1.0 - p[i] * prod
    return u


def _down(
    cf: CompiledFlow,
    p: list[float],
    u: list[float],
    target: Mapping[str, int],
    eps: float,
) -> list[float]:
    """Compute v and update p in place; returns v."""
    v = [0.0] * len(cf.edges)
    for r in cf.roots:
        i = cf.root_edge_index[r]
        v[i] = 1.0 - eps if target.get(r, 0) == 1 else eps
        if p[i] != 1.0:
            ratio = v[i] / u[i] if u[i] > 0.0 else 1.0
            p[i] = _clamp_p(1.0 - (1.0 - p[i]) * ratio, cf.edges[i])
    root_ix = set(cf.root_edge_index.values())
    for i in cf.down_order:
        if i in root_ix:
            continue
        parents = cf.parent_edges[i]
        if not parents:
            v[i] = u[i]  # unreachable from any root: no update
            continue
        f = _most_changed_parent(cf, u, v, parents)
        ratio = v[f] / u[f] if u[f] > 0.0 else 1.0
        vi = 1.0 - (1.0 - u[i]) * ratio
        if vi < 0.0 or vi > 1.0:
            log.debug("clamped v(%s)=%g", cf.edges[i], vi)
            vi = 0.0 if vi < 0.0 else 1.0
        v[i] = vi
        if p[i] != 1.0:
            pr = vi / u[i] if u[i] > 0.0 else 1.0
            p[i] = _clamp_p(1.0 - (1.0 - p[i]) * pr, cf.edges[i])
    return v


def _most_changed_parent(
    cf: CompiledFlow, u: list[float], v: list[float], parents: list[int]
) -> int:
    best = parents[0]
    best_score = -1.0
    for f in parents:
        hi = v[f] if v[f] >= u[f] else u[f]
        lo = u[f] if v[f] >= u[f] else v[f]
        score = float("inf") if lo == 0.0 else abs(1.0 - hi / lo)
        # ties break toward the lexicographically smallest edge id
        if score > best_score or (
            score == best_score and cf.edges[f] < cf.edges[best]
        ):
            best = f
            best_score = score
    return best


def _clamp_p(value: float, edge: EdgeId) -> float:
    if value > 1.0:
        log.debug("clamped p(%s)=%g to 1", edge, value)
        return 1.0
    if value < P_FLOOR:
        log.debug("clamped p(%s)=%g to floor", edge, value)
        return P_FLOOR
    return value


def _weights_array(cf: CompiledFlow, k: WeightedDtGraph) -> list[float]:
    w = k.weights
    return [w[e] for e in cf.edges]


# --- public API ---------------------------------------------------------------

def bottom_up(k: WeightedDtGraph, ex: Example) -> dict[EdgeId, float]:
    """Flow of the example through every edge (Fig. 3 BottomUp)."""
    leaf = {p: 1.0 for p in ex.true_observables}
    return bottom_up_real(k, leaf)


def bottom_up_real(k: WeightedDtGraph, leaf: Mapping[str, float]) -> dict[EdgeId, float]:
    """BottomUp with real-valued leaf inputs in [0, 1] (prior evaluation)."""
    cf = compiled(k)
    u = _up(cf, _weights_array(cf, k), leaf)
    return {e: u[i] for i, e in enumerate(cf.edges)}


def top_down(
    k: WeightedDtGraph,
    u: Mapping[EdgeId, float],
    target: Mapping[str, int],
    eps: float,
) -> tuple[dict[EdgeId, float], WeightedDtGraph]:
    """Adjusted flow v and the weight-updated graph (Fig. 3 TopDown)."""
    cf = compiled(k)
    p = _weights_array(cf, k)
    u_arr = [u[e] for e in cf.edges]
    v = _down(cf, p, u_arr, target, eps)
    g = k.copy()
    for i, e in enumerate(cf.edges):
        g.weights[e] = p[i]
    return {e: v[i] for i, e in enumerate(cf.edges)}, g


def process_exemplar(k: WeightedDtGraph, x: Exemplar, eps: float) -> WeightedDtGraph:
    """One bottom-up-then-top-down sweep; pure in (k, x, eps)."""
    g = k.copy()
    process_exemplar_inplace(g, x, eps)
    return g


def process_exemplar_inplace(k: WeightedDtGraph, x: Exemplar, eps: float) -> None:
    cf = compiled(k)
    p = _weights_array(cf, k)
    leaf = {q: 1.0 for q in x.example.true_observables}
    u = _up(cf, p, leaf)
    _down(cf, p, u, x.target, eps)
    for i, e in enumerate(cf.edges):
        k.weights[e] = p[i]


def evaluate_deterministic(k: WeightedDtGraph, ex: Example) -> dict[str, int]:
    """Root classification with all weights forced to 1 (pure NAND semantics)."""
    cf = compiled(k)
    ones = [1.0] * len(cf.edges)
    leaf = {p: 1.0 for p in ex.true_observables}
    u = _up(cf, ones, leaf)
    return {r: int(u[cf.root_edge_index[r]] == 1.0) for r in cf.roots}


def root_flow(k: WeightedDtGraph, ex: Example) -> dict[str, float]:
    """u at each root edge for one example."""
    cf = compiled(k)
    u = _up(cf, _weights_array(cf, k), {p: 1.0 for p in ex.true_observables})
    return {r: u[cf.root_edge_index[r]] for r in cf.roots}


def flow_visit_counts(k: WeightedDtGraph, x: Exemplar, eps: float) -> tuple[int, int]:
    """(bottom-up visits, top-down visits); each equals the edge count."""
    cf = compiled(k)
    return len(cf.up_order), len(cf.down_order)
