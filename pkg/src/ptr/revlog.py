"""Revision log entries: a replayable record of everything PTR does.

Replaying a log against the initial weighted graph reproduces the final
graph bit-exactly (same float operations in the same order), which is what
the determinism tests assert.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

from .dtgraph import EdgeId

# DNF formulas travel as tuples of conjuncts, each a tuple of (prop, negated).
Dnf = tuple[tuple[tuple[str, bool], ...], ...]


@dataclass(frozen=True)
class Header:
    weights_checksum: str
    eps: float


@dataclass(frozen=True)
class CycleBoundary:
    cycle: int
    sigma: float
    lam: float
    order: tuple[int, ...]


@dataclass(frozen=True)
class Processed:
    index: int


@dataclass(frozen=True)
class Deletion:
    edge: EdgeId


@dataclass(frozen=True)
class Suture:
    host_edge: EdgeId
    dnf: Dnf
    lam: float
    scheme: str              # "clause-leaves" | "clause-general" | ...
    new_literal: str | None  # generated DNF root literal, if any
    new_node: str | None     # generated t node / clause label, if any
    aux_labels: tuple[str, ...] = ()  # generated labels for DNF clauses


@dataclass(frozen=True)
class NoOpReset:
    edge: EdgeId
    lam: float


LogEntry = Header | CycleBoundary | Processed | Deletion | Suture | NoOpReset

_TYPES = {
    "header": Header,
    "cycle": CycleBoundary,
    "processed": Processed,
    "deletion": Deletion,
    "suture": Suture,
    "noop-reset": NoOpReset,
}
_NAMES = {v: k for k, v in _TYPES.items()}


def entry_to_json(entry: LogEntry) -> str:
    d = {"type": _NAMES[type(entry)]}
    if isinstance(entry, Header):
        d.update(weights_checksum=entry.weights_checksum, eps=entry.eps)
    elif isinstance(entry, CycleBoundary):
        d.update(cycle=entry.cycle, sigma=entry.sigma, lam=entry.lam,
                 order=list(entry.order))
    elif isinstance(entry, Processed):
        d["index"] = entry.index
    elif isinstance(entry, Deletion):
        d["edge"] = list(entry.edge)
    elif isinstance(entry, Suture):
        d.update(
            host_edge=list(entry.host_edge),
            dnf=[[[p, n] for p, n in conj] for conj in entry.dnf],
            lam=entry.lam,
            scheme=entry.scheme,
            new_literal=entry.new_literal,
            new_node=entry.new_node,
            aux_labels=list(entry.aux_labels),
        )
    elif isinstance(entry, NoOpReset):
        d.update(edge=list(entry.edge), lam=entry.lam)
    return json.dumps(d, sort_keys=True)


def entry_from_json(text: str) -> LogEntry:
    d = json.loads(text)
    t = d.pop("type")
    if t == "header":
        return Header(d["weights_checksum"], d["eps"])
    if t == "cycle":
        return CycleBoundary(d["cycle"], d["sigma"], d["lam"], tuple(d["order"]))
    if t == "processed":
        return Processed(d["index"])
    if t == "deletion":
        return Deletion(tuple(d["edge"]))
    if t == "suture":
        return Suture(
            tuple(d["host_edge"]),
            tuple(tuple((p, n) for p, n in conj) for conj in d["dnf"]),
            d["lam"],
            d["scheme"],
            d["new_literal"],
            d["new_node"],
            tuple(d["aux_labels"]),
        )
    if t == "noop-reset":
        return NoOpReset(tuple(d["edge"]), d["lam"])
    raise ValueError(f"unknown log entry type {t!r}")


def log_to_jsonl(entries: Iterable[LogEntry]) -> str:
    return "\n".join(entry_to_json(e) for e in entries) + "\n"


def log_from_jsonl(text: str) -> list[LogEntry]:
    return [entry_from_json(line) for line in text.splitlines() if line.strip()]


def structural_entries(entries: Iterable[LogEntry]) -> list[LogEntry]:
    """Deletions and sutures only: the revisions that reach the output theory."""
    return [e for e in entries if isinstance(e, (Deletion, Suture))]
