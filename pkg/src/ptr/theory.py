"""Propositional domain theories: parsing, validation, serialization, evaluation.

A theory is an ordered set of labeled clauses ``label: head <- lit, lit, ... .``
over propositions, with ``~`` marking negated body literals.  Propositions that
never appear in a head are observable; heads that never appear in a body are
roots.  Evaluation is closed-world: observables absent from an example are
false.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping


class TheoryError(ValueError):
    """Raised for malformed theories, examples, or exemplar files."""


# Characters that may not appear in proposition names or clause labels.
RESERVED_CHARS = set("~,.:|#")


def _check_name(name: str, what: str, line: int | None = None) -> str:
    loc = f" (line {line})" if line is not None else ""
    if not name:
        raise TheoryError(f"empty {what}{loc}")
    if any(c in RESERVED_CHARS or c.isspace() for c in name) or "->" in name:
        raise TheoryError(f"illegal character in {what} {name!r}{loc}")
    return name


@dataclass(frozen=True, order=True)
class Literal:
    prop: str
    negated: bool = False

    def __str__(self) -> str:
        return ("~" + self.prop) if self.negated else self.prop

    @staticmethod
    def parse(text: str, line: int | None = None) -> "Literal":
        text = text.strip()
        negated = text.startswith("~")
        name = text[1:].strip() if negated else text
        return Literal(_check_name(name, "proposition", line), negated)


@dataclass(frozen=True)
class Clause:
    """One clause ``label: head <- body``.

    An empty body marks a fact (head unconditionally true).  The parser never
    produces facts; they arise only from synthetic error injection that
    deletes a clause's last literal.
    """

    label: str
    head: str
    body: tuple[Literal, ...]

    def __str__(self) -> str:
        body = ", ".join(str(l) for l in self.body)
        return f"{self.label}: {self.head} <- {body}."


class DomainTheory:
    """An ordered, acyclic set of clauses with derived symbol roles."""

    def __init__(self, clauses: Iterable[Clause]):
        self.clauses: tuple[Clause, ...] = tuple(clauses)
        if not self.clauses:
            raise TheoryError("empty theory")
        self._validate()
        heads = {c.head for c in self.clauses}
        body_props = {l.prop for c in self.clauses for l in c.body}
        order = self._prop_order()
        self.propositions: tuple[str, ...] = order
        self.observables: tuple[str, ...] = tuple(p for p in order if p not in heads)
        self.roots: tuple[str, ...] = tuple(
            p for p in order if p in heads and p not in body_props
        )
        self.internals: tuple[str, ...] = tuple(
            p for p in order if p in heads and p in body_props
        )
        self._by_head: dict[str, tuple[Clause, ...]] = {}
        for c in self.clauses:
            self._by_head.setdefault(c.head, ())
            self._by_head[c.head] += (c,)

    def _prop_order(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for c in self.clauses:
            seen.setdefault(c.head)
            for l in c.body:
                seen.setdefault(l.prop)
        return tuple(seen)

    def _validate(self) -> None:
        labels: set[str] = set()
        for c in self.clauses:
            if c.label in labels:
                raise TheoryError(f"duplicate clause label {c.label!r}")
            labels.add(c.label)
            if len(set(c.body)) != len(c.body):
                raise TheoryError(f"duplicate literal in body of {c.label}")
        props = {c.head for c in self.clauses} | {
            l.prop for c in self.clauses for l in c.body
        }
        clash = labels & props
        if clash:
            raise TheoryError(f"clause label collides with proposition: {sorted(clash)[0]!r}")
        cycle = find_cycle(self.clauses)
        if cycle:
            raise TheoryError("cyclic dependency: " + " -> ".join(cycle))

    def clauses_for(self, head: str) -> tuple[Clause, ...]:
        return self._by_head.get(head, ())

    def __eq__(self, other: object) -> bool:
        return isinstance(other, DomainTheory) and self.clauses == other.clauses

    def __hash__(self) -> int:
        return hash(self.clauses)

    def __repr__(self) -> str:
        return f"DomainTheory({len(self.clauses)} clauses, roots={list(self.roots)})"


@dataclass(frozen=True)
class Example:
    """A set of true observable propositions (all others are false)."""

    true_observables: frozenset[str]

    @staticmethod
    def of(*props: str) -> "Example":
        return Example(frozenset(props))

    def __contains__(self, prop: str) -> bool:
        return prop in self.true_observables


@dataclass(frozen=True)
class Exemplar:
    """An example together with its correct per-root classification."""

    example: Example
    target: Mapping[str, int]

    def __post_init__(self):
        object.__setattr__(self, "target", dict(self.target))

    def __hash__(self) -> int:
        return hash((self.example, tuple(sorted(self.target.items()))))

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Exemplar)
            and self.example == other.example
            and dict(self.target) == dict(other.target)
        )


ClassificationVector = dict


def find_cycle(clauses: Iterable[Clause]) -> list[str] | None:
    """Return one dependency cycle among clause heads, or None if acyclic."""
    deps: dict[str, set[str]] = {}
    for c in clauses:
        deps.setdefault(c.head, set()).update(l.prop for l in c.body)
    WHITE, GREY, BLACK = 0, 1, 2
    color = {p: WHITE for p in deps}
    stack: list[str] = []

    def visit(p: str) -> list[str] | None:
        color[p] = GREY
        stack.append(p)
        for q in sorted(deps.get(p, ())):
            if q not in deps:
                continue
            if color[q] == GREY:
                return stack[stack.index(q):] + [q]
            if color[q] == WHITE:
                found = visit(q)
                if found:
                    return found
        stack.pop()
        color[p] = BLACK
        return None

    for p in sorted(deps):
        if color[p] == WHITE:
            found = visit(p)
            if found:
                return found
    return None


# --- parsing ---------------------------------------------------------------

def _strip_comment(line: str) -> str:
    pos = line.find("#")
    return line if pos < 0 else line[:pos]


def parse_theory(text: str) -> DomainTheory:
    """Parse the line-oriented clause grammar into a DomainTheory.

    ``clause := [LABEL ":"] IDENT "<-" literal ("," literal)* "."`` with ``#``
    starting a comment.  Unlabeled clauses get generated labels ``C<k>`` in
    file order (``_`` appended if a parsed label already uses the name).
    """
    clauses: list[Clause] = []
    used_labels: set[str] = set()
    # First pass collects statements with their starting line for diagnostics.
    statements: list[tuple[int, str]] = []
    buf = ""
    buf_line = 1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line.strip():
            continue
        if not buf:
            buf_line = lineno
        buf += " " + line
        while "." in buf:
            stmt, _, rest = buf.partition(".")
            if stmt.strip():
                statements.append((buf_line, stmt.strip()))
            buf = rest
            buf_line = lineno
    if buf.strip():
        raise TheoryError(f"unterminated clause at line {buf_line}: {buf.strip()!r}")
    if not statements:
        raise TheoryError("empty theory")

    auto = 0
    for lineno, stmt in statements:
        label = None
        body_src = stmt
        if ":" in stmt:
            label_part, _, body_src = stmt.partition(":")
            label = _check_name(label_part.strip(), "clause label", lineno)
        if "<-" not in body_src:
            raise TheoryError(f"missing '<-' in clause at line {lineno}: {stmt!r}")
        head_src, _, tail = body_src.partition("<-")
        head = _check_name(head_src.strip(), "head proposition", lineno)
        if not tail.strip():
            raise TheoryError(f"empty body at line {lineno} (clause for {head!r})")
        body = tuple(Literal.parse(part, lineno) for part in tail.split(","))
        if label is None:
            auto += 1
            label = f"C{auto}"
            while label in used_labels:
                label += "_"
        used_labels.add(label)
        clauses.append(Clause(label, head, body))
    return DomainTheory(clauses)


def serialize_theory(t: DomainTheory) -> str:
    """Render a theory in the clause grammar; reparsing restores it."""
    lines = []
    for c in t.clauses:
        if c.body:
            lines.append(str(c))
        else:
            # Fact clause (synthetic error injection only); not reparseable.
            lines.append(f"{c.label}: {c.head} <-.")
    return "\n".join(lines) + "\n"


# --- evaluation ------------------------------------------------------------

def _check_example(t: DomainTheory, ex: Example) -> None:
    non_observable = set(t.roots) | set(t.internals)
    for p in ex.true_observables:
        if p in non_observable:
            raise TheoryError(f"proposition {p!r} is not observable in this theory")


def classify(t: DomainTheory, ex: Example) -> dict[str, int]:
    """Closed-world classification: 1 iff the root is derivable from ex.

    Propositions absent from the theory are treated as fresh observables, so
    exemplars may mention observables the theory does not use.
    """
    _check_example(t, ex)
    truth: dict[str, bool] = {}

    def value(p: str) -> bool:
        if p in truth:
            return truth[p]
        cs = t.clauses_for(p)
        if not cs:
            v = p in ex
        else:
            truth[p] = False  # acyclic, placeholder never read
            v = any(
                all(value(l.prop) != l.negated for l in c.body) for c in cs
            )
        truth[p] = v
        return v

    return {r: int(value(r)) for r in t.roots}


def classify_all(t: DomainTheory, exemplars: Iterable[Exemplar]) -> list[bool]:
    """Whether each exemplar is correctly classified by t."""
    out = []
    for x in exemplars:
        got = classify(t, x.example)
        out.append(all(got.get(r, 0) == v for r, v in x.target.items()))
    return out


def check_stratified(t: DomainTheory) -> None:
    """Raise TheoryError with one offending cycle if t is not acyclic."""
    cycle = find_cycle(t.clauses)
    if cycle:
        raise TheoryError("cyclic dependency: " + " -> ".join(cycle))


# --- exemplar files --------------------------------------------------------

def parse_exemplars(text: str) -> list[Exemplar]:
    """Parse ``obs1 obs2 ... | root1=1 root2=0 ...`` lines (``#`` comments)."""
    out: list[Exemplar] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if "|" not in line:
            raise TheoryError(f"missing '|' in exemplar at line {lineno}")
        obs_src, _, target_src = line.partition("|")
        obs = frozenset(
            _check_name(tok, "proposition", lineno) for tok in obs_src.split()
        )
        target: dict[str, int] = {}
        for tok in target_src.split():
            if "=" not in tok:
                raise TheoryError(f"bad root assignment {tok!r} at line {lineno}")
            root, _, val = tok.partition("=")
            if val not in ("0", "1"):
                raise TheoryError(f"root value must be 0 or 1 at line {lineno}")
            target[_check_name(root, "root", lineno)] = int(val)
        if not target:
            raise TheoryError(f"empty classification at line {lineno}")
        out.append(Exemplar(Example(obs), target))
    return out


def serialize_exemplars(exemplars: Iterable[Exemplar]) -> str:
    lines = []
    for x in exemplars:
        obs = " ".join(sorted(x.example.true_observables))
        tgt = " ".join(f"{r}={v}" for r, v in sorted(x.target.items()))
        lines.append(f"{obs} | {tgt}")
    return "\n".join(lines) + "\n"


def exemplar_observables(t: DomainTheory, exemplars: Iterable[Exemplar]) -> tuple[str, ...]:
    """Theory observables plus observables mentioned only in exemplars."""
    seen = dict.fromkeys(t.observables)
    for x in exemplars:
        for p in sorted(x.example.true_observables):
            seen.setdefault(p)
    return tuple(seen)
