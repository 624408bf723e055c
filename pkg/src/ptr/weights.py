"""Default initial weights (semantic impact), bias, and radicality accounting.

The default scheme evaluates the graph under weight 1/2 on every mutable edge
with the "average" example (each observable true with its prior), derives a
semantic impact M(e) per edge top-down, and maps it through
p(e) = C^M / (C^M + 1) so that equal-impact revision sets are equally radical.
"""

from __future__ import annotations

import math
from typing import Iterable, Mapping

from . import flow
from .dtgraph import ANCHOR, EdgeId, EdgeKind, GraphError, WeightedDtGraph

DEFAULT_C = 1e6
DEFAULT_PRIOR = 0.5

# Radicality log base; calibrated against the synthetic-theory figures and
# frozen here (see tests/test_acceptance.py).
RADICALITY_LOG_BASE = math.e


def _log(x: float) -> float:
    return math.log(x) / math.log(RADICALITY_LOG_BASE)


def uniform_half_weights(k: WeightedDtGraph) -> dict[EdgeId, float]:
    """Mutable edges at 1/2, root and negation edges at 1."""
    return {
        e: 1.0 if kind.fixed else 0.5 for e, kind in k.edge_kind.items()
    }


def semantic_impact(
    k: WeightedDtGraph, prior: Mapping[str, float] | None = None
) -> dict[EdgeId, float]:
    """Per-edge semantic impact M(e).

    One bottom-up pass under the half-weight assignment and the average
    example, then one top-down pass: M(root edge) = 1 - u, and
    M(e) = M(f(e)) * 2(1-u(e))/u(e) with the max over parents when a node
    feeds several edges.  u(e) = 0 propagates M(f(e)) unchanged.
    """
    cf = flow.compiled(k)
    half = [1.0 if cf.kind[i].fixed else 0.5 for i in range(len(cf.edges))]
    leaf = _prior_map(cf, prior)
    u = flow._up(cf, half, leaf)
    m = [0.0] * len(cf.edges)
    root_ix = set(cf.root_edge_index.values())
    for i in cf.down_order:
        if i in root_ix:
            m[i] = 1.0 - u[i]
            continue
        parents = cf.parent_edges[i]
        m_parent = max(m[f] for f in parents) if parents else 0.0
        if u[i] <= 0.0:
            m[i] = m_parent
        else:
            m[i] = m_parent * 2.0 * (1.0 - u[i]) / u[i]
    return {e: m[i] for i, e in enumerate(cf.edges)}


def semantic_impact_two_run(
    k: WeightedDtGraph, e: EdgeId, prior: Mapping[str, float] | None = None
) -> float:
    """Definitional M(e) for a single-root graph: |flow with e certain minus
    flow with e deleted|, ancestors of e pinned to 1.  Oracle for the
    recursive shortcut."""
    if len(k.roots) != 1:
        raise GraphError("two-run impact is defined for single-root graphs")
    cf = flow.compiled(k)
    pinned = _ancestor_closure(cf, e)
    base = [1.0 if cf.kind[i].fixed else 0.5 for i in range(len(cf.edges))]
    for i in pinned:
        base[i] = 1.0
    leaf = _prior_map(cf, prior)
    i_e = cf.index[e]
    r = cf.root_edge_index[k.roots[0]]
    with_e = list(base)
    with_e[i_e] = 1.0
    u_with = flow._up(cf, with_e, leaf)[r]
    without_e = list(base)
    without_e[i_e] = 0.0
    u_without = flow._up(cf, without_e, leaf)[r]
    return abs(u_with - u_without)


def _ancestor_closure(cf: flow.CompiledFlow, e: EdgeId) -> set[int]:
    pending = [cf.index[e]]
    seen: set[int] = set()
    while pending:
        i = pending.pop()
        for f in cf.parent_edges[i]:
            if f not in seen:
                seen.add(f)
                pending.append(f)
    return seen


def _prior_map(cf: flow.CompiledFlow, prior: Mapping[str, float] | None) -> dict[str, float]:
    leaf = {}
    for prop in cf.leaf_prop:
        if prop is not None:
            leaf[prop] = DEFAULT_PRIOR if prior is None else prior.get(prop, DEFAULT_PRIOR)
    return leaf


def default_weights(
    k: WeightedDtGraph,
    c: float = DEFAULT_C,
    prior: Mapping[str, float] | None = None,
) -> dict[EdgeId, float]:
    """Appendix-style initial assignment p(e) = C^M(e) / (C^M(e) + 1)."""
    if c <= 1.0:
        raise GraphError(f"C must exceed 1, got {c}")
    impact = semantic_impact(k, prior)
    out: dict[EdgeId, float] = {}
    for e, kind in k.edge_kind.items():
        if kind.fixed:
            out[e] = 1.0
        else:
            cm = c ** impact[e]
            out[e] = cm / (cm + 1.0)
    return out


def with_default_weights(
    k: WeightedDtGraph,
    c: float = DEFAULT_C,
    prior: Mapping[str, float] | None = None,
    overrides: Mapping[EdgeId, float] | None = None,
) -> WeightedDtGraph:
    g = k.copy()
    for e, p in default_weights(k, c, prior).items():
        g.weights[e] = p
    if overrides:
        for e, p in overrides.items():
            if e not in g.edge_kind:
                raise GraphError(f"weight override names unknown edge {e[0]}/{e[1]}")
            g._set_weight(e, p)
    return g


def apply_bias(k: WeightedDtGraph, s: Iterable[EdgeId], beta: float) -> WeightedDtGraph:
    """Favor revision of the edges in s: 1-p_b(e) = (1-p)^(1/beta) on s,
    p_b(e) = p^(1/beta) elsewhere.  beta = 1 is the identity."""
    if beta < 1.0:
        raise GraphError(f"bias beta must be >= 1, got {beta}")
    s = set(s)
    for e in s:
        if e not in k.edge_kind:
            raise GraphError(f"bias set names unknown edge {e[0]}/{e[1]}")
        if k.edge_kind[e].fixed:
            raise GraphError(f"bias set contains fixed edge {e[0]}/{e[1]}")
    g = k.copy()
    inv = 1.0 / beta
    for e, kind in g.edge_kind.items():
        if kind.fixed:
            continue
        p = g.weights[e]
        g.weights[e] = 1.0 - (1.0 - p) ** inv if e in s else p ** inv
    return g


def radicality(
    k: WeightedDtGraph, s: Iterable[EdgeId], s_only: bool = False
) -> float:
    """Log-cost of revising exactly the edges in s.

    Full form sums -log p(e) over kept mutable edges plus -log(1 - p(e)) over
    s; the s_only variant keeps just the second term.  Infinite when s
    contains a weight-1 edge.
    """
    s = set(s)
    total = 0.0
    for e, kind in k.edge_kind.items():
        if kind.fixed:
            if e in s:
                return float("inf")
            continue
        p = k.weights[e]
        if e in s:
            if p >= 1.0:
                return float("inf")
            total += -_log(1.0 - p)
        elif not s_only:
            total += -_log(p)
    return total


def radicality_of_log(k0: WeightedDtGraph, entries: Iterable, s_only: bool = False) -> float:
    """Radicality of the revision set a PTR run actually performed.

    The set contains every deleted edge and every sutured host edge, taken
    against the initial weighted graph k0.  No-op weight resets add nothing.
    """
    from .revlog import Deletion, Suture

    s: set[EdgeId] = set()
    for entry in entries:
        if isinstance(entry, Deletion):
            s.add(entry.edge)
        elif isinstance(entry, Suture):
            s.add(entry.host_edge)
    # edges introduced by earlier sutures are not part of k0; their later
    # revision only reshapes added structure already paid for at its host
    s = {e for e in s if e in k0.edge_kind}
    return radicality(k0, s, s_only=s_only)
