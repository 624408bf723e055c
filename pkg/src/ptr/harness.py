"""Experiment tooling: fixtures, error injection, sampling, oracles, runs.

The synthetic protocol mirrors the evaluation setup: take a known-good
theory, corrupt it with a scripted error prefix, sample exemplars classified
by the clean theory, run the revision loop on nested training sets, and
report error rate, radicality ratio, and convergence cost per cell.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import random
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Iterable, Mapping, Sequence

from . import control, flow, weights
from .dtgraph import (
    ANCHOR,
    EdgeId,
    GraphError,
    WeightedDtGraph,
    build_dtgraph,
    lit_node,
)
from .revlog import LogEntry
from .theory import (
    Clause,
    DomainTheory,
    Example,
    Exemplar,
    Literal,
    TheoryError,
    classify,
    parse_exemplars,
    parse_theory,
)


def _data(name: str) -> str:
    return resources.files("ptr.data").joinpath(name).read_text()


def stock_theory() -> DomainTheory:
    return parse_theory(_data("stock.theory"))


def stock_initial_weights() -> dict[EdgeId, float]:
    from .dtgraph import parse_weight_file

    return parse_weight_file(_data("stock_initial.weights"))


def stock_exemplars() -> list[Exemplar]:
    return parse_exemplars(_data("stock.exemplars"))


def synthetic_theory() -> DomainTheory:
    return parse_theory(_data("synthetic.theory"))


def synthetic_error_script() -> "ErrorScript":
    return parse_error_script(_data("synthetic_errors.txt"))


def fixture_checksums() -> dict[str, str]:
    out = {}
    for name in ("stock.theory", "stock_initial.weights", "stock.exemplars",
                 "synthetic.theory", "synthetic_errors.txt"):
        out[name] = hashlib.sha256(_data(name).encode()).hexdigest()
    return out


# --- error scripts ---------------------------------------------------------

@dataclass(frozen=True)
class AddClause:
    head: str
    body: tuple[Literal, ...]


@dataclass(frozen=True)
class DeleteClause:
    head: str
    body: tuple[Literal, ...]


@dataclass(frozen=True)
class AddLiteral:
    literal: Literal
    head: str
    body: tuple[Literal, ...]


@dataclass(frozen=True)
class DeleteLiteral:
    literal: Literal
    head: str
    body: tuple[Literal, ...]


Edit = AddClause | DeleteClause | AddLiteral | DeleteLiteral
ErrorScript = tuple[Edit, ...]


def _parse_clause_ref(text: str, lineno: int) -> tuple[str, tuple[Literal, ...]]:
    if "<-" not in text:
        raise TheoryError(f"missing '<-' in edit at line {lineno}")
    head, _, body_src = text.partition("<-")
    body = tuple(Literal.parse(part, lineno) for part in body_src.split(",") if part.strip())
    return head.strip(), body


def parse_error_script(text: str) -> ErrorScript:
    """Parse edit lines: ``add-clause H <- b.``, ``del-clause H <- b.``,
    ``add-literal L to H <- b.``, ``del-literal L from H <- b.``"""
    edits: list[Edit] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        pos = raw.find("#")
        line = (raw if pos < 0 else raw[:pos]).strip()
        if not line:
            continue
        if not line.endswith("."):
            raise TheoryError(f"edit at line {lineno} must end with '.'")
        line = line[:-1].strip()
        op, _, rest = line.partition(" ")
        if op == "add-clause":
            edits.append(AddClause(*_parse_clause_ref(rest, lineno)))
        elif op == "del-clause":
            edits.append(DeleteClause(*_parse_clause_ref(rest, lineno)))
        elif op in ("add-literal", "del-literal"):
            sep = " to " if op == "add-literal" else " from "
            if sep not in rest:
                raise TheoryError(f"edit at line {lineno} needs '{sep.strip()}'")
            lit_src, _, clause_src = rest.partition(sep)
            lit = Literal.parse(lit_src, lineno)
            head, body = _parse_clause_ref(clause_src, lineno)
            cls = AddLiteral if op == "add-literal" else DeleteLiteral
            edits.append(cls(lit, head, body))
        else:
            raise TheoryError(f"unknown edit {op!r} at line {lineno}")
    return tuple(edits)


def _find_clause(t: DomainTheory, head: str, body: tuple[Literal, ...]) -> Clause:
    for c in t.clauses:
        if c.head == head and c.body == body:
            return c
    for c in t.clauses:
        if c.head == head and frozenset(c.body) == frozenset(body):
            return c
    raise TheoryError(f"no clause {head} <- {', '.join(map(str, body))}")


def inject_errors(base: DomainTheory, script: ErrorScript, prefix: int) -> DomainTheory:
    """Apply the first `prefix` edits in sequence.

    Added clauses get labels ``E<k>`` (k = 1-based edit number); deleting a
    clause's last literal leaves a fact clause.
    """
    if not (0 <= prefix <= len(script)):
        raise TheoryError(f"prefix {prefix} out of range for {len(script)} edits")
    clauses = list(base.clauses)
    for i, edit in enumerate(script[:prefix], start=1):
        t = DomainTheory(clauses)
        if isinstance(edit, AddClause):
            label = f"E{i}"
            while any(c.label == label for c in clauses):
                label += "_"
            clauses.append(Clause(label, edit.head, edit.body))
        elif isinstance(edit, DeleteClause):
            target = _find_clause(t, edit.head, edit.body)
            clauses.remove(target)
        elif isinstance(edit, AddLiteral):
            target = _find_clause(t, edit.head, edit.body)
            if edit.literal in target.body:
                raise TheoryError(f"edit {i}: literal already present")
            clauses[clauses.index(target)] = Clause(
                target.label, target.head, target.body + (edit.literal,)
            )
        elif isinstance(edit, DeleteLiteral):
            target = _find_clause(t, edit.head, edit.body)
            if edit.literal not in target.body:
                raise TheoryError(f"edit {i}: literal not in clause body")
            new_body = tuple(l for l in target.body if l != edit.literal)
            clauses[clauses.index(target)] = Clause(target.label, target.head, new_body)
    return DomainTheory(clauses)


def restoration_set(
    target: DomainTheory, flawed: DomainTheory, k_flawed: WeightedDtGraph
) -> set[EdgeId]:
    """Edges of the flawed graph to revise in order to restore the target.

    Net diff by clause label: extra clauses cost their clause edge, extra
    literals their literal edge, missing literals the clause edge of their
    host clause, and missing clauses one parent edge of the head's node.
    """
    s: set[EdgeId] = set()
    target_by_label = {c.label: c for c in target.clauses}
    flawed_by_label = {c.label: c for c in flawed.clauses}
    for label, c in flawed_by_label.items():
        orig = target_by_label.get(label)
        if orig is None:
            s.add((c.head, label))
            continue
        extra = set(c.body) - set(orig.body)
        missing = set(orig.body) - set(c.body)
        for l in extra:
            s.add((label, lit_node(l.prop, l.negated)))
        if missing:
            s.add((c.head, label))
    for label, c in target_by_label.items():
        if label in flawed_by_label:
            continue
        head_node = c.head
        parents = k_flawed.in_edges(head_node)
        if len(parents) != 1:
            raise GraphError(
                f"restoring clause for {head_node!r} is ambiguous "
                f"({len(parents)} parent edges)"
            )
        s.add(parents[0])
    return s


# --- exemplar sampling -------------------------------------------------------

def sample_exemplars(
    oracle: DomainTheory, n: int, seed: int
) -> list[Exemplar]:
    """n distinct uniform-random observable assignments labeled by the oracle."""
    obs = list(oracle.observables)
    if n > 2 ** len(obs):
        raise TheoryError(f"cannot draw {n} distinct examples over {len(obs)} observables")
    rng = random.Random(seed)
    seen: set[frozenset[str]] = set()
    out: list[Exemplar] = []
    while len(out) < n:
        chosen = frozenset(p for p in obs if rng.random() < 0.5)
        if chosen in seen:
            continue
        seen.add(chosen)
        ex = Example(chosen)
        out.append(Exemplar(ex, classify(oracle, ex)))
    return out


# --- brute-force oracles -------------------------------------------------------

def _truth_given_deleted(
    k: WeightedDtGraph, deleted: frozenset[EdgeId], ex: Example
) -> dict[str, bool]:
    truth: dict[str, bool] = {}
    for node in reversed(k.topological_nodes()):
        if node == ANCHOR:
            continue
        outs = k.out_edges(node)
        if not outs:
            truth[node] = k.node_kind[node].prop in ex.true_observables
        else:
            kept = [e for e in outs if e not in deleted]
            truth[node] = not all(truth[e[1]] for e in kept)
    return truth


def oracle_unused_probability(k: WeightedDtGraph, ex: Example, e: EdgeId) -> float:
    """Probability that e is not used by ex: deleted, or its node is true."""
    if e not in k.edge_kind:
        raise GraphError(f"no such edge {e[0]}/{e[1]}")
    total = 0.0
    from .dtgraph import enumerate_subgraphs

    for deleted, prob in enumerate_subgraphs(k):
        if prob == 0.0:
            continue
        if e in deleted:
            total += prob
            continue
        truth = _truth_given_deleted(k, deleted, ex)
        if truth[e[1]]:
            total += prob
    return total


def oracle_conditional_weight(k: WeightedDtGraph, x: Exemplar, e: EdgeId) -> float:
    """p(e kept | the exemplar's classification), by subgraph enumeration."""
    if len(k.roots) != 1:
        raise GraphError("conditional-weight oracle requires a single root")
    root = k.roots[0]
    want = x.target[root]
    from .dtgraph import enumerate_subgraphs

    num = den = 0.0
    for deleted, prob in enumerate_subgraphs(k):
        if prob == 0.0:
            continue
        truth = _truth_given_deleted(k, deleted, x.example)
        if int(truth[root]) != want:
            continue
        den += prob
        if e not in deleted:
            num += prob
    if den == 0.0:
        raise GraphError("exemplar impossible under the prior")
    return num / den


# --- random instances (tests and the convergence suite) -------------------------

def random_tree_graph(
    seed: int, max_mutable: int = 10, allow_negation: bool = True
) -> tuple[WeightedDtGraph, list[str]]:
    """A random deletion-only, edge-independent, tree-like weighted dt-graph.

    Every node has one parent edge (fresh names throughout) and mutable
    weights are interior; returns the graph and its observable universe.
    """
    rng = random.Random(seed)
    counter = {"p": 0, "n": 0, "c": 0}

    def fresh(kind: str) -> str:
        counter[kind] += 1
        return f"{kind}{counter[kind]}"

    clauses: list[Clause] = []
    budget = rng.randint(2, max_mutable)
    spent = 0

    def grow(head: str, depth: int) -> None:
        nonlocal spent
        n_clauses = 1 if depth >= 2 or rng.random() < 0.6 else 2
        for _ in range(n_clauses):
            if spent >= budget:
                n_lits = 1
            else:
                n_lits = rng.randint(1, 2)
            spent += 1  # clause edge
            body = []
            for _ in range(n_lits):
                spent += 1  # literal edge
                if depth < 2 and rng.random() < 0.4 and spent < budget:
                    child = fresh("n")
                    body.append(Literal(child))
                    grow(child, depth + 1)
                else:
                    negated = allow_negation and rng.random() < 0.25
                    body.append(Literal(fresh("p"), negated))
            clauses.append(Clause(fresh("c").upper(), head, tuple(body)))

    grow("root", 0)
    t = DomainTheory(clauses)
    k = build_dtgraph(t)
    for e in k.mutable_edges():
        k.weights[e] = rng.uniform(0.05, 0.95)
    return k, list(t.observables)


def random_layered_theory(
    seed: int,
    max_clauses: int = 25,
    allow_negation: bool = True,
) -> DomainTheory:
    """A random single-root, unambiguous, acyclic theory.

    Layered construction; each observable appears with one polarity only, so
    every node's depth parity is unique.
    """
    rng = random.Random(seed)
    n_obs = rng.randint(4, 8)
    observables = [f"p{i}" for i in range(n_obs)]
    polarity = {p: (allow_negation and rng.random() < 0.3) for p in observables}
    n_internal = rng.randint(2, 6)
    internals = [f"n{i}" for i in range(n_internal)]
    clauses: list[Clause] = []

    def body_from(pool: list[str], size: int) -> tuple[Literal, ...]:
        chosen = rng.sample(pool, min(size, len(pool)))
        return tuple(
            Literal(p, polarity[p]) if p in polarity else Literal(p) for p in chosen
        )

    # internals draw on strictly later internals and observables
    for i, name in enumerate(internals):
        lower = internals[i + 1:] + observables
        for _ in range(rng.randint(1, 2)):
            if len(clauses) >= max_clauses - 2:
                break
            clauses.append(
                Clause(f"L{len(clauses) + 1}", name, body_from(lower, rng.randint(1, 3)))
            )
    for _ in range(rng.randint(1, 2)):
        clauses.append(
            Clause(
                f"L{len(clauses) + 1}", "root",
                body_from(internals + observables, rng.randint(1, 3)),
            )
        )
    # ensure every internal used somewhere reachable; prune unreachable heads
    t = DomainTheory(clauses)
    reachable = set()
    frontier = ["root"]
    while frontier:
        p = frontier.pop()
        if p in reachable:
            continue
        reachable.add(p)
        for c in t.clauses_for(p):
            frontier.extend(l.prop for l in c.body)
    kept = [c for c in t.clauses if c.head in reachable]
    return DomainTheory(kept)


def random_exemplars(
    t: DomainTheory, n: int, seed: int, target_labels: str = "theory"
) -> list[Exemplar]:
    """Distinct random examples; labels from the theory or random (still
    consistent because examples are distinct)."""
    rng = random.Random(seed)
    obs = list(t.observables)
    n = min(n, 2 ** len(obs))
    seen: set[frozenset[str]] = set()
    out = []
    while len(out) < n:
        chosen = frozenset(p for p in obs if rng.random() < 0.5)
        if chosen in seen:
            continue
        seen.add(chosen)
        ex = Example(chosen)
        if target_labels == "theory":
            target = classify(t, ex)
        else:
            target = {r: rng.randint(0, 1) for r in t.roots}
        out.append(Exemplar(ex, target))
    return out


# --- the synthetic experiment ----------------------------------------------------

@dataclass(frozen=True)
class ExperimentSpec:
    base_theory: DomainTheory
    script: ErrorScript
    prefix: int
    train_sizes: tuple[int, ...] = (20, 40, 60, 80, 100)
    test_size: int = 100
    partitions: int = 10
    trials: int = 10
    seed: int = 0
    beta: float | None = None
    big_c: float = weights.DEFAULT_C
    cfg: control.PtrConfig = field(default_factory=control.PtrConfig)


@dataclass(frozen=True)
class MetricsRow:
    theory: str
    train_size: int
    trial: int
    test_error_pct: float
    radicality_ratio: float
    exemplars_to_convergence: int
    revisions: int
    output_clauses: int
    output_literals: int
    terminated_by: str
    first_true_fault_deleted_after: int | None = None


CSV_COLUMNS = (
    "theory", "train_size", "trial", "test_error_pct", "radicality_ratio",
    "exemplars_to_convergence", "revisions", "output_clauses", "output_literals",
)


def _derived_seed(*parts: int) -> int:
    h = hashlib.sha256(",".join(map(str, parts)).encode()).digest()
    return int.from_bytes(h[:8], "big")


def prepared_run(spec: ExperimentSpec) -> tuple[WeightedDtGraph, DomainTheory, set[EdgeId], float]:
    """Flawed weighted graph, flawed theory, restoration set, and its cost."""
    flawed = inject_errors(spec.base_theory, spec.script, spec.prefix)
    k = build_dtgraph(flawed)
    k = weights.with_default_weights(k, c=spec.big_c)
    restore = restoration_set(spec.base_theory, flawed, k)
    if spec.beta is not None:
        k = weights.apply_bias(k, restore, spec.beta)
    denom = weights.radicality(k, restore, s_only=RATIO_S_ONLY)
    return k, flawed, restore, denom


# Radicality-ratio variant, frozen by the log-base calibration (see the
# acceptance suite): the restoration-cost term alone, natural log.
RATIO_S_ONLY = True


def _fault_deletion_step(
    entries: Sequence[LogEntry], restore: set[EdgeId]
) -> int | None:
    """Processed-exemplar count before the first deletion of a true fault."""
    from .revlog import Deletion, Processed

    processed = 0
    for entry in entries:
        if isinstance(entry, Processed):
            processed += 1
        elif isinstance(entry, Deletion) and entry.edge in restore:
            return processed
    return None


def run_experiment(spec: ExperimentSpec) -> list[MetricsRow]:
    """The cross-validation protocol: nested training sets over partitions."""
    k0, flawed, restore, denom = prepared_run(spec)
    pool_size = spec.test_size + max(spec.train_sizes)
    pool = sample_exemplars(spec.base_theory, pool_size, _derived_seed(spec.seed, 0))
    rows: list[MetricsRow] = []
    name = f"gamma{spec.prefix}"
    for part in range(spec.partitions):
        perm = list(range(pool_size))
        random.Random(_derived_seed(spec.seed, 1, part)).shuffle(perm)
        test = [pool[i] for i in perm[: spec.test_size]]
        train_pool = [pool[i] for i in perm[spec.test_size:]]
        for size in spec.train_sizes:
            train = train_pool[:size]
            for trial in range(spec.trials):
                run_seed = _derived_seed(spec.seed, 2, part, size, trial)
                cfg = replace(spec.cfg, seed=run_seed)
                out = control.ptr(k0, train, cfg)
                rows.append(
                    _metrics_row(name, size, part * spec.trials + trial,
                                 out, test, k0, restore, denom)
                )
    return rows


def _metrics_row(
    name: str,
    size: int,
    trial: int,
    out: control.PtrOutcome,
    test: Sequence[Exemplar],
    k0: WeightedDtGraph,
    restore: set[EdgeId],
    denom: float,
) -> MetricsRow:
    wrong = 0
    for x in test:
        got = classify(out.theory, x.example)
        if any(got.get(r, 0) != v for r, v in x.target.items()):
            wrong += 1
    err = 100.0 * wrong / len(test) if test else 0.0
    num = weights.radicality_of_log(k0, out.log, s_only=RATIO_S_ONLY)
    if num == 0.0:
        ratio = 0.0
    elif denom == 0.0 or math.isinf(denom):
        ratio = math.inf
    else:
        ratio = num / denom
    n_lits = sum(len(c.body) for c in out.theory.clauses)
    return MetricsRow(
        theory=name,
        train_size=size,
        trial=trial,
        test_error_pct=err,
        radicality_ratio=ratio,
        exemplars_to_convergence=out.exemplars_processed,
        revisions=out.revisions,
        output_clauses=len(out.theory.clauses),
        output_literals=n_lits,
        terminated_by=out.terminated_by.value,
        first_true_fault_deleted_after=_fault_deletion_step(out.log, restore),
    )


def _fmt(value: float) -> str:
    if value != value or math.isinf(value):
        return str(value)
    return f"{value:.6g}"


def rows_to_csv(rows: Iterable[MetricsRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    ordered = sorted(rows, key=lambda r: (r.theory, r.train_size, r.trial))
    for r in ordered:
        writer.writerow([
            r.theory, r.train_size, r.trial, _fmt(r.test_error_pct),
            _fmt(r.radicality_ratio), r.exemplars_to_convergence, r.revisions,
            r.output_clauses, r.output_literals,
        ])
    return buf.getvalue()
