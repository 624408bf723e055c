"""Locating how to repair a flawed edge: relevance sets, ID3, suturing.

An edge picked for revision is either deleted (no exemplar needs it) or
weakened by an induced subtree that redirects it around the exemplars it
misclassifies (Figs. 6 and 7 semantics, with the footnote-11 single-conjunct
simplifications on by default).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import flow
from .dtgraph import (
    EdgeId,
    EdgeKind,
    GraphError,
    NodeKind,
    WeightedDtGraph,
    lit_node,
)
from .revlog import Deletion, Dnf, LogEntry, NoOpReset, Suture
from .theory import Example, Exemplar, Literal

NEEDED_THRESHOLD = 2.0
DESTRUCTIVE_THRESHOLD = 0.5


class RevisionError(ValueError):
    pass


@dataclass
class RelevanceSets:
    needed: list[Exemplar]
    destructive: list[Exemplar]


def _flows_with_forced_weight(
    k: WeightedDtGraph, x_example: Example, e: EdgeId
) -> tuple[dict[str, float], dict[str, float]]:
    """Root flows with p(e) forced to 1 and to 0; original weights untouched."""
    cf = flow.compiled(k)
    p = [k.weights[d] for d in cf.edges]
    leaf = {q: 1.0 for q in x_example.true_observables}
    i = cf.index[e]
    p[i] = 1.0
    u1 = flow._up(cf, p, leaf)
    p[i] = 0.0
    u0 = flow._up(cf, p, leaf)
    with_e = {r: u1[cf.root_edge_index[r]] for r in cf.roots}
    without_e = {r: u0[cf.root_edge_index[r]] for r in cf.roots}
    return with_e, without_e


def _ratio(num: float, den: float) -> float:
    if den == 0.0:
        return 1.0 if num == 0.0 else math.inf
    return num / den


def r_value(k: WeightedDtGraph, x: Exemplar, root: str, e: EdgeId) -> float:
    """How much edge e carries the (non-)derivation of root for x.

    > 2 means the edge is needed for the exemplar, < 1/2 destructive,
    1 irrelevant.
    """
    if k.edge_kind[e].fixed:
        raise RevisionError(f"r_value is defined for mutable edges only")
    with_e, without_e = _flows_with_forced_weight(k, x.example, e)
    if x.target.get(root, 0) == 1:
        return _ratio(with_e[root], without_e[root])
    return _ratio(1.0 - with_e[root], 1.0 - without_e[root])


def relevance_sets(
    k: WeightedDtGraph, exemplars: Sequence[Exemplar], e: EdgeId
) -> RelevanceSets:
    """Needed/destructive partition of the exemplar set for edge e.

    An exemplar needed for any root never counts as destructive.
    """
    needed: list[Exemplar] = []
    destructive: list[Exemplar] = []
    for x in exemplars:
        with_e, without_e = _flows_with_forced_weight(k, x.example, e)
        is_needed = False
        is_destructive = False
        for root, want in x.target.items():
            if want == 1:
                r = _ratio(with_e[root], without_e[root])
            else:
                r = _ratio(1.0 - with_e[root], 1.0 - without_e[root])
            if r > NEEDED_THRESHOLD:
                is_needed = True
            if r < DESTRUCTIVE_THRESHOLD:
                is_destructive = True
        if is_needed:
            needed.append(x)
        elif is_destructive:
            destructive.append(x)
    return RelevanceSets(needed, destructive)


# --- DNF induction (ID3) ------------------------------------------------------

def _vector(ex: Example, observables: Sequence[str]) -> tuple[bool, ...]:
    return tuple(o in ex.true_observables for o in observables)


def dnf_id3(
    positives: Sequence[Example],
    negatives: Sequence[Example],
    observables: Sequence[str],
) -> Dnf:
    """Induce a DNF over observables accepting all positives, no negatives.

    Standard ID3: split on maximal information gain, stop at pure leaves, no
    pruning; attribute ties break lexicographically.  The DNF is the
    disjunction of root-to-positive-leaf paths.
    """
    if not positives:
        raise RevisionError("cannot induce a formula from an empty positive set")
    obs = sorted(set(observables))
    pos_vecs = [_vector(ex, obs) for ex in positives]
    neg_vecs = [_vector(ex, obs) for ex in negatives]
    clash = set(pos_vecs) & set(neg_vecs)
    if clash:
        raise RevisionError("inseparable relevance sets")
    if not negatives:
        return _constant_dnf(pos_vecs, obs)

    conjuncts: list[tuple[tuple[str, bool], ...]] = []

    def grow(pos: list[tuple[bool, ...]], neg: list[tuple[bool, ...]],
             avail: list[int], path: tuple[tuple[str, bool], ...]) -> None:
        if not neg:
            if pos:
                conjuncts.append(path)
            return
        if not pos:
            return
        if not avail:
            raise RevisionError("inseparable relevance sets")
        attr = _best_attribute(pos, neg, avail, obs)
        rest = [a for a in avail if a != attr]
        for truth in (True, False):
            sub_pos = [v for v in pos if v[attr] == truth]
            sub_neg = [v for v in neg if v[attr] == truth]
            if not sub_pos and not sub_neg:
                continue
            grow(sub_pos, sub_neg, rest, path + (((obs[attr]), not truth),))

    grow(pos_vecs, neg_vecs, list(range(len(obs))), ())
    if not conjuncts:
        raise RevisionError("inseparable relevance sets")
    return tuple(conjuncts)


def _entropy(n_pos: int, n_neg: int) -> float:
    n = n_pos + n_neg
    if n == 0 or n_pos == 0 or n_neg == 0:
        return 0.0
    pp, pn = n_pos / n, n_neg / n
    return -(pp * math.log2(pp) + pn * math.log2(pn))


def _best_attribute(pos, neg, avail: list[int], obs: Sequence[str]) -> int:
    n = len(pos) + len(neg)
    base = _entropy(len(pos), len(neg))
    best, best_gain = avail[0], -1.0
    for a in sorted(avail, key=lambda i: obs[i]):
        tp = sum(1 for v in pos if v[a])
        tn = sum(1 for v in neg if v[a])
        fp, fn = len(pos) - tp, len(neg) - tn
        t, f = tp + tn, fp + fn
        split = (t / n) * _entropy(tp, tn) + (f / n) * _entropy(fp, fn)
        gain = base - split
        if gain > best_gain:
            best, best_gain = a, gain
    return best


def _constant_dnf(pos_vecs: list[tuple[bool, ...]], obs: list[str]) -> Dnf:
    """No negatives to reject: one literal constant across the positives,
    else the disjunction of the positives' full descriptions."""
    for i, name in enumerate(obs):
        if all(v[i] for v in pos_vecs):
            return (((name, False),),)
    for i, name in enumerate(obs):
        if not any(v[i] for v in pos_vecs):
            return (((name, True),),)
    return tuple(
        tuple((obs[i], not val) for i, val in enumerate(vec))
        for vec in dict.fromkeys(pos_vecs)
    )


def dnf_accepts(dnf: Dnf, ex: Example) -> bool:
    return any(
        all((prop in ex.true_observables) != negated for prop, negated in conj)
        for conj in dnf
    )


def dnf_literals(dnf: Dnf) -> list[list[Literal]]:
    return [[Literal(p, n) for p, n in conj] for conj in dnf]


# --- the repair operator --------------------------------------------------------

def revise(
    k: WeightedDtGraph,
    exemplars: Sequence[Exemplar],
    e: EdgeId,
    lam: float,
    simplify: bool = True,
    observables: Sequence[str] | None = None,
) -> tuple[WeightedDtGraph, list[LogEntry]]:
    """Repair edge e against the full exemplar set (Fig. 7 semantics).

    Deletes the edge when nothing needs it, otherwise resets it to lam and
    sutures an induced subtree under its target node.  With an empty
    destructive set the weight is reset and a no-op is logged, which keeps
    the control loop's termination ratchet intact.
    """
    if k.edge_kind[e].fixed:
        raise RevisionError(f"cannot revise fixed edge {e[0]}/{e[1]}")
    rel = relevance_sets(k, exemplars, e)
    if not rel.destructive:
        g = k.copy()
        g._set_weight(e, lam)
        return g, [NoOpReset(e, lam)]
    if not rel.needed:
        g = k.copy()
        g._delete_edge(e)
        return g, [Deletion(e)]

    obs = list(observables) if observables is not None else _default_universe(k, exemplars)
    host = e[1]
    host_kind = k.node_kind[host]
    d_examples = [x.example for x in rel.destructive]
    n_examples = [x.example for x in rel.needed]

    if host_kind.kind == "clause":
        swapped = dnf_id3(n_examples, d_examples, obs) if simplify else None
        if simplify and swapped is not None and len(swapped) == 1:
            g = k.copy()
            g._set_weight(e, lam)
            entry = _suture_clause_leaves(g, host, e, swapped, lam)
            return g, [entry]
        dnf = dnf_id3(d_examples, n_examples, obs)
        g = k.copy()
        g._set_weight(e, lam)
        entry = _suture_general(g, host, e, dnf, lam)
        return g, [entry]

    # literal host
    dnf = dnf_id3(d_examples, n_examples, obs)
    g = k.copy()
    is_internal_positive = (
        not host_kind.negated and len(g.out_edges(host)) > 0
    )
    if is_internal_positive:
        g._set_weight(e, lam)
        if simplify and len(dnf) == 1:
            entry = _add_clause_under_literal(g, host, e, dnf, lam)
        else:
            entry = _suture_general(g, host, e, dnf, lam)
        return g, [entry]
    # leaf or negative literal: replacement construction
    entry = _replace_literal(g, e, dnf, lam)
    return g, [entry]


def _default_universe(k: WeightedDtGraph, exemplars: Sequence[Exemplar]) -> list[str]:
    obs = {
        kind.prop
        for node, kind in k.node_kind.items()
        if kind.kind == "lit" and not kind.negated and not k.out_edges(node)
    }
    for x in exemplars:
        obs.update(x.example.true_observables)
    return sorted(obs)


def _ensure_literal(g: WeightedDtGraph, lit: Literal) -> str:
    node = lit_node(lit.prop, lit.negated)
    g._add_node(node, NodeKind("lit", prop=lit.prop, negated=lit.negated))
    if lit.negated:
        g._add_node(lit.prop, NodeKind("lit", prop=lit.prop))
        if (node, lit.prop) not in g.edge_kind:
            g._add_edge(node, lit.prop, EdgeKind.NEGATION, 1.0)
    return node


def _suture_clause_leaves(
    g: WeightedDtGraph, host: str, e: EdgeId, dnf: Dnf, lam: float
) -> Suture:
    """Footnote-11 fast path: append the single conjunct's literals directly
    to the clause node (roles already swapped by the caller)."""
    for prop, negated in dnf[0]:
        node = _ensure_literal(g, Literal(prop, negated))
        if (host, node) in g.edge_kind:
            g._set_weight((host, node), lam)
        else:
            g._add_edge(host, node, EdgeKind.LITERAL, lam)
    return Suture(e, dnf, lam, "clause-leaves", None, None)


def _add_clause_under_literal(
    g: WeightedDtGraph, host: str, e: EdgeId, dnf: Dnf, lam: float
) -> Suture:
    """Footnote-11 fast path for internal literal hosts: one new clause."""
    t = g.fresh_name("t")
    g._add_node(t, NodeKind("clause", label=t))
    g._add_edge(host, t, EdgeKind.CLAUSE, lam)
    for prop, negated in dnf[0]:
        node = _ensure_literal(g, Literal(prop, negated))
        g._add_edge(t, node, EdgeKind.LITERAL, 1.0)
    return Suture(e, dnf, lam, "literal-clause", None, t)


def _build_dnf_definition(
    g: WeightedDtGraph, root_literal: str, dnf: Dnf
) -> tuple[str, ...]:
    """Add clauses defining root_literal by the DNF; internal weights 1."""
    labels = []
    for conj in dnf:
        label = g.fresh_name("CL")
        labels.append(label)
        g._add_node(label, NodeKind("clause", label=label))
        g._add_edge(root_literal, label, EdgeKind.CLAUSE, 1.0)
        for prop, negated in conj:
            node = _ensure_literal(g, Literal(prop, negated))
            g._add_edge(label, node, EdgeKind.LITERAL, 1.0)
    return tuple(labels)


def _suture_general(
    g: WeightedDtGraph, host: str, e: EdgeId, dnf: Dnf, lam: float
) -> Suture:
    """General scheme: new node t under the host, t feeding the DNF root l."""
    l_name = g.fresh_name("l")
    g._add_node(l_name, NodeKind("lit", prop=l_name))
    if g.node_kind[host].kind == "clause":
        t = lit_node(l_name, negated=True)
        g._add_node(t, NodeKind("lit", prop=l_name, negated=True))
        g._add_edge(host, t, EdgeKind.LITERAL, lam)
        g._add_edge(t, l_name, EdgeKind.NEGATION, 1.0)
    else:
        t = g.fresh_name("t")
        g._add_node(t, NodeKind("clause", label=t))
        g._add_edge(host, t, EdgeKind.CLAUSE, lam)
        g._add_edge(t, l_name, EdgeKind.LITERAL, 1.0)
    labels = _build_dnf_definition(g, l_name, dnf)
    return Suture(e, dnf, lam, "general", l_name, t, labels)


def _replace_literal(g: WeightedDtGraph, e: EdgeId, dnf: Dnf, lam: float) -> Suture:
    """Footnote-11 replacement for leaf/negative hosts: reroute e through a
    fresh literal defined by the original literal or the DNF."""
    parent, host = e
    l_name = g.fresh_name("l")
    g._add_node(l_name, NodeKind("lit", prop=l_name))
    g._remove_edge(e)
    g._add_edge(parent, l_name, EdgeKind.LITERAL, lam)
    passthrough = g.fresh_name("CL")
    g._add_node(passthrough, NodeKind("clause", label=passthrough))
    g._add_edge(l_name, passthrough, EdgeKind.CLAUSE, 1.0)
    g._add_edge(passthrough, host, EdgeKind.LITERAL, 1.0)
    labels = _build_dnf_definition(g, l_name, dnf)
    g._stamp += 1
    return Suture(e, dnf, lam, "replace-literal", l_name, passthrough, labels)


def apply_suture_entry(g: WeightedDtGraph, entry: Suture) -> None:
    """Replay a logged suture with its recorded generated names."""
    e = entry.host_edge
    if entry.scheme == "clause-leaves":
        g._set_weight(e, entry.lam)
        _suture_clause_leaves(g, e[1], e, entry.dnf, entry.lam)
        return
    # reserve recorded names so fresh_name reproduces them
    if entry.scheme == "literal-clause":
        g._set_weight(e, entry.lam)
        t = entry.new_node
        g._add_node(t, NodeKind("clause", label=t))
        g._add_edge(e[1], t, EdgeKind.CLAUSE, entry.lam)
        for prop, negated in entry.dnf[0]:
            node = _ensure_literal(g, Literal(prop, negated))
            g._add_edge(t, node, EdgeKind.LITERAL, 1.0)
        return
    if entry.scheme == "general":
        g._set_weight(e, entry.lam)
        l_name = entry.new_literal
        g._add_node(l_name, NodeKind("lit", prop=l_name))
        host = e[1]
        if g.node_kind[host].kind == "clause":
            t = lit_node(l_name, negated=True)
            g._add_node(t, NodeKind("lit", prop=l_name, negated=True))
            g._add_edge(host, t, EdgeKind.LITERAL, entry.lam)
            g._add_edge(t, l_name, EdgeKind.NEGATION, 1.0)
        else:
            t = entry.new_node
            g._add_node(t, NodeKind("clause", label=t))
            g._add_edge(host, t, EdgeKind.CLAUSE, entry.lam)
            g._add_edge(t, l_name, EdgeKind.LITERAL, 1.0)
        _replay_dnf_definition(g, l_name, entry)
        return
    if entry.scheme == "replace-literal":
        parent, host = e
        l_name = entry.new_literal
        g._add_node(l_name, NodeKind("lit", prop=l_name))
        g._remove_edge(e)
        g._add_edge(parent, l_name, EdgeKind.LITERAL, entry.lam)
        passthrough = entry.new_node
        g._add_node(passthrough, NodeKind("clause", label=passthrough))
        g._add_edge(l_name, passthrough, EdgeKind.CLAUSE, 1.0)
        g._add_edge(passthrough, host, EdgeKind.LITERAL, 1.0)
        _replay_dnf_definition(g, l_name, entry)
        g._stamp += 1
        return
    raise RevisionError(f"unknown suture scheme {entry.scheme!r}")


def _replay_dnf_definition(g: WeightedDtGraph, root_literal: str, entry: Suture) -> None:
    for label, conj in zip(entry.aux_labels, entry.dnf):
        g._add_node(label, NodeKind("clause", label=label))
        g._add_edge(root_literal, label, EdgeKind.CLAUSE, 1.0)
        for prop, negated in conj:
            node = _ensure_literal(g, Literal(prop, negated))
            g._add_edge(label, node, EdgeKind.LITERAL, 1.0)
