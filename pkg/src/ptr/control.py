"""The PTR control loop, termination checking, and the PTR* ranker.

Exemplars are processed in seeded random permutations, weights updated per
sweep; when some weight falls to the revision threshold the edge is repaired
and the revised theory is checked against every exemplar.  After a full
cycle with surviving misclassifications both the threshold and the reset
value ratchet up, which bounds the number of cycles.
"""

from __future__ import annotations

import hashlib
import logging
import math
import random
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from . import flow, revision
from .dtgraph import EdgeId, WeightedDtGraph, to_theory
from .revlog import (
    CycleBoundary,
    Deletion,
    Header,
    LogEntry,
    NoOpReset,
    Processed,
    Suture,
)
from .theory import DomainTheory, Example, Exemplar, TheoryError, exemplar_observables

log = logging.getLogger("ptr.control")


class Termination(Enum):
    ALL_CORRECT = "AllCorrect"
    ALL_WEIGHTS_ONE = "AllWeightsOne"
    CYCLE_GUARD = "CycleGuard"


@dataclass(frozen=True)
class PtrConfig:
    sigma0: float = 0.1
    lambda0: float = 0.7
    d_sigma: float = 0.03
    d_lambda: float = 0.03
    eps: float = 0.01
    seed: int = 0
    simplify: bool = True
    shuffle: bool = True
    max_cycles: int | None = None

    def __post_init__(self):
        if not (0.0 < self.sigma0 <= 1.0):
            raise ValueError("sigma0 must be in (0, 1]")
        if not (0.0 < self.lambda0 <= 1.0):
            raise ValueError("lambda0 must be in (0, 1]")
        if self.d_sigma < 0.0 or self.d_lambda < 0.0:
            raise ValueError("increments must be >= 0")
        if not (0.0 < self.eps < 0.5):
            raise ValueError("eps must be in (0, 1/2)")

    @property
    def cycle_bound(self) -> int:
        if self.max_cycles is not None:
            return self.max_cycles
        if self.d_sigma == 0.0 and self.d_lambda == 0.0:
            return 10_000
        incr = [d for d in (self.d_sigma, self.d_lambda) if d > 0.0]
        return math.ceil(max(1.0 / d for d in incr)) + 2


@dataclass
class PtrOutcome:
    graph: WeightedDtGraph
    theory: DomainTheory
    log: list[LogEntry]
    exemplars_processed: int
    revisions: int
    terminated_by: Termination
    cycles: int = 0


def weights_checksum(k: WeightedDtGraph) -> str:
    h = hashlib.sha256()
    for e in sorted(k.weights):
        h.update(f"{e[0]}/{e[1]}={k.weights[e]!r};".encode())
    return h.hexdigest()


def _validate_exemplars(k: WeightedDtGraph, exemplars: Sequence[Exemplar]) -> None:
    roots = set(k.roots)
    for i, x in enumerate(exemplars):
        if set(x.target) != roots:
            raise TheoryError(
                f"exemplar {i} targets {sorted(x.target)}, theory roots are {sorted(roots)}"
            )


def _misclassified(k: WeightedDtGraph, exemplars: Sequence[Exemplar]) -> list[int]:
    out = []
    for i, x in enumerate(exemplars):
        got = flow.evaluate_deterministic(k, x.example)
        if any(got[r] != v for r, v in x.target.items()):
            out.append(i)
    return out


def ptr(
    k0: WeightedDtGraph, exemplars: Sequence[Exemplar], cfg: PtrConfig = PtrConfig()
) -> PtrOutcome:
    """Run PTR to termination (Fig. 9 control with §5.1 increments)."""
    if not exemplars:
        raise TheoryError("exemplar set is empty")
    _validate_exemplars(k0, exemplars)
    entries: list[LogEntry] = [Header(weights_checksum(k0), cfg.eps)]
    k = k0.copy()
    rng = random.Random(cfg.seed)
    sigma, lam = cfg.sigma0, cfg.lambda0
    processed = 0
    revisions = 0
    universe = exemplar_observables(to_theory(k), exemplars)

    if not _misclassified(k, exemplars):
        return PtrOutcome(k, to_theory(k), entries, 0, 0, Termination.ALL_CORRECT, 0)

    bound = cfg.cycle_bound
    for cycle in range(bound):
        order = list(range(len(exemplars)))
        if cfg.shuffle:
            rng.shuffle(order)
        entries.append(CycleBoundary(cycle, sigma, lam, tuple(order)))
        for idx in order:
            flow.process_exemplar_inplace(k, exemplars[idx], cfg.eps)
            processed += 1
            entries.append(Processed(idx))
            e = _min_weight_edge(k)
            if e is not None and k.weights[e] <= sigma:
                k, new_entries = revision.revise(
                    k, exemplars, e, lam, cfg.simplify, universe
                )
                entries.extend(new_entries)
                structural = [
                    x for x in new_entries if isinstance(x, (Deletion, Suture))
                ]
                revisions += len(structural)
                if structural:
                    log.info(
                        "cycle %d: revised %s/%s (%s)",
                        cycle, e[0], e[1], type(structural[0]).__name__,
                    )
                    universe = exemplar_observables(to_theory(k), exemplars)
                    if not _misclassified(k, exemplars):
                        return PtrOutcome(
                            k, to_theory(k), entries, processed, revisions,
                            Termination.ALL_CORRECT, cycle + 1,
                        )
            if _all_weights_one(k):
                outcome = (
                    Termination.ALL_CORRECT
                    if not _misclassified(k, exemplars)
                    else Termination.ALL_WEIGHTS_ONE
                )
                return PtrOutcome(
                    k, to_theory(k), entries, processed, revisions, outcome, cycle + 1
                )
        if _misclassified(k, exemplars):
            sigma = min(sigma + cfg.d_sigma, 1.0)
            lam = min(lam + cfg.d_lambda, 1.0)
        else:
            return PtrOutcome(
                k, to_theory(k), entries, processed, revisions,
                Termination.ALL_CORRECT, cycle + 1,
            )
    log.warning("cycle guard tripped after %d cycles", bound)
    return PtrOutcome(
        k, to_theory(k), entries, processed, revisions, Termination.CYCLE_GUARD, bound
    )


def _min_weight_edge(k: WeightedDtGraph) -> EdgeId | None:
    best = None
    best_p = 2.0
    for e, kind in k.edge_kind.items():
        if kind.fixed:
            continue
        p = k.weights[e]
        if p < best_p or (p == best_p and (best is None or e < best)):
            best, best_p = e, p
    return best


def _all_weights_one(k: WeightedDtGraph) -> bool:
    return all(
        k.weights[e] == 1.0 for e, kind in k.edge_kind.items() if not kind.fixed
    )


# --- consistency (Appendix-C precondition) ------------------------------------

def consistency_check(
    k: WeightedDtGraph, exemplars: Sequence[Exemplar]
) -> list[tuple[int, str]]:
    """Violations of consistency: IN exemplars need root flow > 0, OUT < 1.

    Empty result means k is consistent with every exemplar.
    """
    violations = []
    for i, x in enumerate(exemplars):
        u = flow.root_flow(k, x.example)
        for root, want in x.target.items():
            if want == 1 and not u[root] > 0.0:
                violations.append((i, root))
            elif want == 0 and not u[root] < 1.0:
                violations.append((i, root))
    return violations


# --- PTR*: rank-by-flow classification without training -------------------------

def ptrstar(
    k: WeightedDtGraph, test: Sequence[Example], cutoff_percent: float
) -> list[int]:
    """Label the top cutoff_percent of examples by root flow as 1.

    Requires a single root; ties at the cutoff keep input order.
    """
    if len(k.roots) != 1:
        raise TheoryError("the flow ranker supports single-root graphs only")
    if not (0.0 <= cutoff_percent <= 100.0):
        raise ValueError("cutoff must be a percentage in [0, 100]")
    root = k.roots[0]
    scores = [flow.root_flow(k, ex)[root] for ex in test]
    n_pos = math.ceil(cutoff_percent / 100.0 * len(test))
    ranked = sorted(range(len(test)), key=lambda i: (-scores[i], i))
    chosen = set(ranked[:n_pos])
    return [1 if i in chosen else 0 for i in range(len(test))]


# --- log replay ------------------------------------------------------------------

def replay_log(
    k0: WeightedDtGraph, exemplars: Sequence[Exemplar], entries: Sequence[LogEntry]
) -> WeightedDtGraph:
    """Re-apply a revision log; reproduces the PTR result bit-exactly."""
    k = k0.copy()
    eps = None
    for entry in entries:
        if isinstance(entry, Header):
            if entry.weights_checksum != weights_checksum(k0):
                raise ValueError("log was recorded against a different initial graph")
            eps = entry.eps
        elif isinstance(entry, CycleBoundary):
            continue
        elif isinstance(entry, Processed):
            if eps is None:
                raise ValueError("log missing header")
            flow.process_exemplar_inplace(k, exemplars[entry.index], eps)
        elif isinstance(entry, Deletion):
            k._delete_edge(entry.edge)
        elif isinstance(entry, NoOpReset):
            k._set_weight(entry.edge, entry.lam)
        elif isinstance(entry, Suture):
            revision.apply_suture_entry(k, entry)
        else:
            raise ValueError(f"unknown log entry {entry!r}")
    return k
