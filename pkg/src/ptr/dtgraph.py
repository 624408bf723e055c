"""Weighted dt-graphs: NAND-form proof graphs with per-edge confidences.

Nodes are literals of the NAND translation (positive ``P``, negative ``~P``),
clause labels, and a single artificial anchor ``$root``.  Edges run
head-literal -> clause (clause edge), clause -> body literal (literal edge),
``~P`` -> ``P`` (negation edge), and anchor -> root (root edge).  Root and
negation edges are pinned at weight 1; all other weights live in (0, 1].
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator

from .theory import Clause, DomainTheory, Literal, TheoryError

ANCHOR = "$root"

EdgeId = tuple[str, str]


class GraphError(ValueError):
    """Raised for illegal dt-graph construction or mutation."""


class EdgeKind(Enum):
    ROOT = "root"
    CLAUSE = "clause"
    LITERAL = "literal"
    NEGATION = "negation"

    @property
    def fixed(self) -> bool:
        return self in (EdgeKind.ROOT, EdgeKind.NEGATION)


class Parity(Enum):
    EVEN = "even"
    ODD = "odd"
    AMBIGUOUS = "ambiguous"


@dataclass(frozen=True)
class NodeKind:
    kind: str                  # "anchor" | "lit" | "clause"
    prop: str | None = None    # for "lit"
    negated: bool = False      # for "lit"
    label: str | None = None   # for "clause"


def lit_node(prop: str, negated: bool = False) -> str:
    return ("~" + prop) if negated else prop


class WeightedDtGraph:
    """Mutable dt-graph used with value semantics.

    Public mutation helpers (`set_weight`, `delete_edge`, `suture`) copy
    first; internal `_`-prefixed methods mutate in place and are only called
    on graphs owned exclusively by the caller (e.g. the PTR control loop).
    """

    def __init__(self) -> None:
        self.node_kind: dict[str, NodeKind] = {ANCHOR: NodeKind("anchor")}
        self.edge_kind: dict[EdgeId, EdgeKind] = {}
        self.weights: dict[EdgeId, float] = {}
        self.roots: tuple[str, ...] = ()
        # out-edge lists keep insertion order (= body order for clauses)
        self._out: dict[str, list[EdgeId]] = {ANCHOR: []}
        self._in: dict[str, list[EdgeId]] = {ANCHOR: []}
        self._fresh = {"l": 0, "CL": 0, "t": 0}
        self._stamp = 0  # bumped on structural change; flow caches key on it

    # -- construction ------------------------------------------------------

    def _add_node(self, node: str, kind: NodeKind) -> None:
        if node in self.node_kind:
            if self.node_kind[node] != kind:
                raise GraphError(f"node {node!r} redefined with different kind")
            return
        self.node_kind[node] = kind
        self._out[node] = []
        self._in[node] = []

    def _add_edge(self, parent: str, child: str, kind: EdgeKind, p: float = 1.0) -> EdgeId:
        e = (parent, child)
        if e in self.edge_kind:
            raise GraphError(f"duplicate edge {render_edge(e)}")
        if parent not in self.node_kind or child not in self.node_kind:
            raise GraphError(f"edge {render_edge(e)} references unknown node")
        self.edge_kind[e] = kind
        self.weights[e] = p
        self._out[parent].append(e)
        self._in[child].append(e)
        self._stamp += 1
        return e

    def copy(self) -> "WeightedDtGraph":
        g = WeightedDtGraph.__new__(WeightedDtGraph)
        g.node_kind = dict(self.node_kind)
        g.edge_kind = dict(self.edge_kind)
        g.weights = dict(self.weights)
        g.roots = self.roots
        g._out = {n: list(es) for n, es in self._out.items()}
        g._in = {n: list(es) for n, es in self._in.items()}
        g._fresh = dict(self._fresh)
        g._stamp = self._stamp
        return g

    # -- queries -------------------------------------------------------------

    def out_edges(self, node: str) -> list[EdgeId]:
        return self._out[node]

    def in_edges(self, node: str) -> list[EdgeId]:
        return self._in[node]

    def mutable_edges(self) -> list[EdgeId]:
        return [e for e, k in self.edge_kind.items() if not k.fixed]

    def root_edge(self, root: str) -> EdgeId:
        return (ANCHOR, root)

    def fresh_name(self, prefix: str) -> str:
        while True:
            self._fresh[prefix] += 1
            name = f"{prefix}{self._fresh[prefix]}"
            if name not in self.node_kind:
                return name

    def topological_nodes(self) -> list[str]:
        """Anchor-first topological order, ties broken by node id."""
        indeg = {n: len(self._in[n]) for n in self.node_kind}
        ready = [n for n, d in indeg.items() if d == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            n = heapq.heappop(ready)
            order.append(n)
            for e in self._out[n]:
                child = e[1]
                indeg[child] -= 1
                if indeg[child] == 0:
                    heapq.heappush(ready, child)
        if len(order) != len(self.node_kind):
            raise GraphError("dt-graph contains a cycle")
        return order

    # -- internal mutation ---------------------------------------------------

    def _set_weight(self, e: EdgeId, p: float) -> None:
        kind = self.edge_kind.get(e)
        if kind is None:
            raise GraphError(f"no such edge {render_edge(e)}")
        if kind.fixed and p != 1.0:
            raise GraphError(f"weight of {kind.value} edge {render_edge(e)} is fixed at 1")
        if not (0.0 < p <= 1.0):
            raise GraphError(f"weight must be in (0, 1], got {p}")
        self.weights[e] = p

    def _delete_edge(self, e: EdgeId) -> None:
        kind = self.edge_kind.get(e)
        if kind is None:
            raise GraphError(f"no such edge {render_edge(e)}")
        if kind.fixed:
            raise GraphError(f"cannot delete {kind.value} edge {render_edge(e)}")
        self._remove_edge(e)
        self._collect_garbage()
        self._stamp += 1

    def _remove_edge(self, e: EdgeId) -> None:
        del self.edge_kind[e]
        del self.weights[e]
        self._out[e[0]].remove(e)
        self._in[e[1]].remove(e)

    def _collect_garbage(self) -> None:
        reachable = {ANCHOR}
        stack = [ANCHOR]
        while stack:
            n = stack.pop()
            for e in self._out[n]:
                if e[1] not in reachable:
                    reachable.add(e[1])
                    stack.append(e[1])
        dead = [n for n in self.node_kind if n not in reachable]
        for n in dead:
            for e in list(self._in[n]) + list(self._out[n]):
                if e in self.edge_kind:
                    self._remove_edge(e)
        for n in dead:
            del self.node_kind[n]
            del self._out[n]
            del self._in[n]


# --- construction from a theory ---------------------------------------------

def build_dtgraph(t: DomainTheory) -> WeightedDtGraph:
    """Translate a theory into its dt-graph (all weights 1)."""
    g = WeightedDtGraph()
    for c in t.clauses:
        g._add_node(c.head, NodeKind("lit", prop=c.head))
        g._add_node(c.label, NodeKind("clause", label=c.label))
        g._add_edge(c.head, c.label, EdgeKind.CLAUSE)
        for l in c.body:
            node = lit_node(l.prop, l.negated)
            g._add_node(node, NodeKind("lit", prop=l.prop, negated=l.negated))
            g._add_edge(c.label, node, EdgeKind.LITERAL)
            if l.negated:
                g._add_node(l.prop, NodeKind("lit", prop=l.prop))
                if (node, l.prop) not in g.edge_kind:
                    g._add_edge(node, l.prop, EdgeKind.NEGATION)
    g.roots = tuple(t.roots)
    for r in t.roots:
        g._add_edge(ANCHOR, r, EdgeKind.ROOT)
    return g


def to_theory(k: WeightedDtGraph) -> DomainTheory:
    """Interpret a dt-graph back as a theory.

    Clause nodes become clauses headed by their (unique) parent literal; a
    clause node with no body edges is a fact clause.  Inverse of
    build_dtgraph up to generated names.
    """
    clauses: list[Clause] = []
    for node, kind in k.node_kind.items():
        if kind.kind != "clause":
            continue
        parents = k.in_edges(node)
        if len(parents) != 1:
            raise GraphError(f"clause node {node!r} has {len(parents)} parents")
        head_node = parents[0][0]
        head_kind = k.node_kind[head_node]
        if head_kind.kind != "lit" or head_kind.negated:
            raise GraphError(f"clause node {node!r} hangs under non-head {head_node!r}")
        body = []
        for e in k.out_edges(node):
            child_kind = k.node_kind[e[1]]
            if child_kind.kind == "lit":
                body.append(Literal(child_kind.prop, child_kind.negated))
            else:
                raise GraphError(f"clause node {node!r} has clause child {e[1]!r}")
        clauses.append(Clause(kind.label, head_kind.prop, tuple(body)))
    return DomainTheory(clauses)


# --- structural queries -------------------------------------------------------

def edge_parity(k: WeightedDtGraph) -> dict[EdgeId, Parity]:
    """Per-edge parity of path lengths from root nodes to the edge's source.

    Root edges are Even by definition; negation edges count as ordinary
    length-1 steps, so parity flips below them.
    """
    even: set[str] = set(k.roots)
    odd: set[str] = set()
    # BFS over (node, path parity) states until closure.
    pending = [(r, 0) for r in k.roots]
    seen: set[tuple[str, int]] = set(pending)
    while pending:
        node, par = pending.pop()
        for e in k.out_edges(node):
            child = e[1]
            np = 1 - par
            if (child, np) not in seen:
                seen.add((child, np))
                (even if np == 0 else odd).add(child)
                pending.append((child, np))
    out: dict[EdgeId, Parity] = {}
    for e, kind in k.edge_kind.items():
        if kind is EdgeKind.ROOT:
            out[e] = Parity.EVEN
            continue
        src = e[0]
        if src in even and src in odd:
            out[e] = Parity.AMBIGUOUS
        elif src in odd:
            out[e] = Parity.ODD
        else:
            out[e] = Parity.EVEN
    return out


def is_unambiguous(k: WeightedDtGraph) -> bool:
    return all(p is not Parity.AMBIGUOUS for p in edge_parity(k).values())


# --- public mutation (value style) -------------------------------------------

def set_weight(k: WeightedDtGraph, e: EdgeId, p: float) -> WeightedDtGraph:
    g = k.copy()
    g._set_weight(e, p)
    return g


def delete_edge(k: WeightedDtGraph, e: EdgeId) -> WeightedDtGraph:
    g = k.copy()
    g._delete_edge(e)
    return g


def suture(k: WeightedDtGraph, host: str, sub: WeightedDtGraph, lam: float) -> WeightedDtGraph:
    g = k.copy()
    _suture_inplace(g, host, sub, lam)
    return g


def _suture_inplace(g: WeightedDtGraph, host: str, sub: WeightedDtGraph, lam: float) -> str:
    """Attach `sub` (a dt-graph with one root literal) under `host` via a new
    node t; connecting edge gets weight lam, internal edges weight 1.

    Returns the id of the new node t.
    """
    if host not in g.node_kind:
        raise GraphError(f"no such node {host!r}")
    if len(sub.roots) != 1:
        raise GraphError("sutured fragment must have exactly one root")
    sub_root = sub.roots[0]
    _merge_fragment(g, sub)
    host_kind = g.node_kind[host]
    if host_kind.kind == "clause":
        # t is the negative literal ~l; blocking the clause when l holds.
        t = lit_node(sub_root, negated=True)
        g._add_node(t, NodeKind("lit", prop=sub_root, negated=True))
        g._add_edge(host, t, EdgeKind.LITERAL, lam)
        g._add_edge(t, sub_root, EdgeKind.NEGATION, 1.0)
    elif host_kind.kind == "lit" and not host_kind.negated:
        # t is a new clause `host <- l`.
        t = g.fresh_name("t")
        g._add_node(t, NodeKind("clause", label=t))
        g._add_edge(host, t, EdgeKind.CLAUSE, lam)
        g._add_edge(t, sub_root, EdgeKind.LITERAL, 1.0)
    else:
        raise GraphError(f"cannot suture under negative literal {host!r}")
    return t


def _merge_fragment(g: WeightedDtGraph, sub: WeightedDtGraph) -> None:
    for node, kind in sub.node_kind.items():
        if kind.kind == "anchor":
            continue
        if node in g.node_kind:
            if g.node_kind[node] != kind:
                raise GraphError(f"fragment node {node!r} collides with host graph")
        else:
            g._add_node(node, kind)
    for e, kind in sub.edge_kind.items():
        if kind is EdgeKind.ROOT:
            continue
        if e not in g.edge_kind:
            g._add_edge(e[0], e[1], kind, 1.0)


# --- subgraph enumeration ------------------------------------------------------

MAX_ENUMERATION_EDGES = 20


def enumerate_subgraphs(
    k: WeightedDtGraph, mutable: Iterable[EdgeId] | None = None
) -> Iterator[tuple[frozenset[EdgeId], float]]:
    """Yield every deletion pattern over the mutable edges with its probability.

    Patterns are the sets of deleted edges; probabilities multiply kept-edge
    weights with deleted-edge complements and sum to 1.
    """
    edges = sorted(k.mutable_edges() if mutable is None else mutable)
    if len(edges) > MAX_ENUMERATION_EDGES:
        raise GraphError(
            f"refusing to enumerate 2^{len(edges)} subgraphs (limit {MAX_ENUMERATION_EDGES})"
        )
    n = len(edges)
    for mask in range(1 << n):
        deleted = []
        prob = 1.0
        for i, e in enumerate(edges):
            if mask >> i & 1:
                deleted.append(e)
                prob *= 1.0 - k.weights[e]
            else:
                prob *= k.weights[e]
        yield frozenset(deleted), prob


# --- weight files and dumps -----------------------------------------------------

def render_edge(e: EdgeId) -> str:
    return f"{e[0]}/{e[1]}"


def parse_edge_id(text: str) -> EdgeId:
    if "/" not in text:
        raise GraphError(f"edge id must be parent/child, got {text!r}")
    parent, _, child = text.partition("/")
    return (parent, child)


def parse_weight_file(text: str) -> dict[EdgeId, float]:
    """Parse the sidecar format: ``edge <parent>/<child> p=<decimal>`` lines."""
    out: dict[EdgeId, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        pos = raw.find("#")
        line = (raw if pos < 0 else raw[:pos]).strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3 or parts[0] != "edge" or not parts[2].startswith("p="):
            raise GraphError(f"bad weight line {lineno}: {raw!r}")
        e = parse_edge_id(parts[1])
        try:
            p = float(parts[2][2:])
        except ValueError:
            raise GraphError(f"bad weight value at line {lineno}: {parts[2]!r}") from None
        if e in out:
            raise GraphError(f"duplicate weight for edge {parts[1]} at line {lineno}")
        out[e] = p
    return out


def apply_weight_file(k: WeightedDtGraph, overrides: dict[EdgeId, float]) -> WeightedDtGraph:
    g = k.copy()
    for e, p in overrides.items():
        if e not in g.edge_kind:
            raise GraphError(f"weight file names unknown edge {render_edge(e)}")
        g._set_weight(e, p)
    return g


def serialize_weights(k: WeightedDtGraph) -> str:
    """Dump all edge weights in deterministic topological order."""
    lines = []
    for node in k.topological_nodes():
        for e in sorted(k.out_edges(node)):
            lines.append(f"edge {render_edge(e)} p={format_weight(k.weights[e])}")
    return "\n".join(lines) + "\n"


def format_weight(p: float) -> str:
    return repr(p)


def dump_graph(k: WeightedDtGraph) -> str:
    """Deterministic description of nodes and edges, stable across runs."""
    lines = []
    for node in k.topological_nodes():
        kind = k.node_kind[node]
        lines.append(f"node {node} kind={kind.kind}")
        for e in sorted(k.out_edges(node)):
            lines.append(
                f"edge {render_edge(e)} kind={k.edge_kind[e].value}"
                f" p={format_weight(k.weights[e])}"
            )
    return "\n".join(lines) + "\n"
