"""Assemble subset-level outputs into global PDAGs and run Meek closure."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .graphs import ClosureConflict, GraphInputError, Pdag, _pair, meek_close
from .local_discovery import LocalPdagPair
from .rules import OrientationEvidence
from .scm import TwoRegimeDataset

log = logging.getLogger(__name__)

VOTE = "VOTE"
DOMINANCE = 1.5


@dataclass(frozen=True)
class Constraint:
    edge: tuple[int, int]
    confidence: float
    provenance: str
    subset_id: int = -1

    def ledger_line(self) -> str:
        i, j = _pair(*self.edge)
        a, b = self.edge
        return (
            f"pair={i},{j} dir={a}->{b} rule={self.provenance} "
            f"subset={self.subset_id} conf={self.confidence:.2f}"
        )


@dataclass
class KnowledgeSet:
    constraints: dict[tuple[int, int], Constraint] = field(default_factory=dict)
    dropped: list[Constraint] = field(default_factory=list)

    def edges(self) -> set[tuple[int, int]]:
        return set(self.constraints)

    def __len__(self) -> int:
        return len(self.constraints)

    def sorted(self) -> list[Constraint]:
        return [self.constraints[e] for e in sorted(self.constraints)]


@dataclass(frozen=True)
class CandidateCatalog:
    pairs: tuple[tuple[int, int], ...]
    weights: dict

    def __len__(self) -> int:
        return len(self.pairs)

    def __contains__(self, pair) -> bool:
        return _pair(*pair) in self.weights


def _local_class(p: Pdag, a: int, b: int) -> str:
    """Class of the pair ``a < b`` in one local PDAG."""
    if p.is_directed(a, b):
        return "fwd"
    if p.is_directed(b, a):
        return "bwd"
    if p.is_undirected(a, b):
        return "und"
    return "none"


def contrast_pairs(d: TwoRegimeDataset, K_env: int) -> list[tuple[tuple[int, int], float]]:
    """Top ``K_env`` pairs by ``|corr1 - corr0|``; ties broken lexicographically."""
    if K_env <= 0:
        return []
    C0 = np.corrcoef(d.samples0, rowvar=False)
    C1 = np.corrcoef(d.samples1, rowvar=False)
    diff = np.nan_to_num(np.abs(C1 - C0))
    n = d.n_vars
    pairs = [((i, j), float(diff[i, j])) for i in range(n) for j in range(i + 1, n)]
    pairs.sort(key=lambda x: (-x[1], x[0]))
    return pairs[:K_env]


def build_candidate_catalog(
    lps: Sequence[LocalPdagPair],
    d: TwoRegimeDataset | None = None,
    K_env: int = 0,
    cap: int | None = None,
) -> CandidateCatalog:
    weight: dict[tuple[int, int], float] = defaultdict(float)
    for lp in lps:
        for p in (lp.pdag0, lp.pdag1):
            for e in p.skeleton():
                weight[e] += 1.0
    if d is not None:
        for pair, _ in contrast_pairs(d, K_env):
            weight.setdefault(pair, 0.0)
    ranked = sorted(weight.items(), key=lambda x: (-x[1], x[0]))
    if cap is not None:
        ranked = ranked[:cap]
    keep = dict(ranked)
    return CandidateCatalog(tuple(sorted(keep)), keep)


def _close_with_drops(
    base: Pdag,
    constraints: dict[tuple[int, int], Constraint],
) -> tuple[Pdag, list[Constraint]]:
    """Close ``base`` under ``constraints``, greedily dropping the weakest
    constraint implicated in each conflict until closure succeeds."""
    active = dict(constraints)
    dropped: list[Constraint] = []
    skel = base.skeleton()
    for e in sorted(active):
        if _pair(*e) not in skel:
            dropped.append(active.pop(e))
    while True:
        try:
            return meek_close(base, active), dropped
        except ClosureConflict as err:
            blame = [active[e] for e in err.edges if e in active]
            if not blame:
                # the conflict involves no droppable edge; fall back to the weakest of all
                blame = list(active.values())
            if not blame:
                log.warning("closure conflict with no constraints left; returning base")
                return base, dropped
            worst = min(blame, key=lambda c: (c.confidence, c.edge))
            log.debug("dropping %s to resolve %s conflict", worst.edge, err.kind)
            dropped.append(active.pop(worst.edge))


MAJORITY, UNANIMOUS = "majority", "unanimous"


def build_h_obs(
    lps: Sequence[LocalPdagPair],
    catalog: CandidateCatalog,
    n: int | None = None,
    adjacency: str = MAJORITY,
) -> Pdag:
    """Regime-0 majority vote per catalog pair followed by Meek closure.

    With ``adjacency="majority"`` a pair is adjacent when edge votes
    strictly outnumber no-edge votes. With ``"unanimous"`` a single no-edge
    verdict removes the pair; this is exact for population local PDAGs,
    where any separating subset certifies non-adjacency. The
    orientation is the strict majority between the two directed classes;
    undirected verdicts abstain and a tie leaves the pair undirected.
    """
    if adjacency not in (MAJORITY, UNANIMOUS):
        raise GraphInputError(f"unknown adjacency rule {adjacency!r}")
    if n is None:
        n = max((lp.pdag0.n for lp in lps), default=0)
    und: set[tuple[int, int]] = set()
    votes: dict[tuple[int, int], Constraint] = {}
    for a, b in catalog.pairs:
        counts = {"fwd": 0, "bwd": 0, "und": 0, "none": 0}
        for lp in lps:
            if a in lp.subset and b in lp.subset:
                counts[_local_class(lp.pdag0, a, b)] += 1
        edge_votes = counts["fwd"] + counts["bwd"] + counts["und"]
        if edge_votes <= counts["none"] or (adjacency == UNANIMOUS and counts["none"]):
            continue
        und.add((a, b))
        # subsets that miss a collider partner see the pair undirected, so
        # only directed verdicts compete for the orientation
        f, r = counts["fwd"], counts["bwd"]
        if f == r:
            continue
        e = (a, b) if f > r else (b, a)
        votes[e] = Constraint(e, max(f, r) / (f + r), VOTE)
    base = Pdag(n, frozenset(), frozenset(und))
    h, dropped = _close_with_drops(base, votes)
    if dropped:
        log.info("H_obs: %d voted orientations dropped to keep closure consistent", len(dropped))
    return h


def build_knowledge_sets(
    lps: Sequence[LocalPdagPair],
    evidence: Iterable[OrientationEvidence],
) -> tuple[KnowledgeSet, KnowledgeSet]:
    """Per-regime majority orientations and consolidated rule evidence.

    A pair enters ``K_per`` as ``a -> b`` when that orientation appears in
    more than half of the local PDAGs (either regime) that contain the pair
    as an edge. Rule evidence is consolidated per directed edge with the
    maximum confidence; opposing directions are left for
    :func:`resolve_conflicts`.
    """
    counts: dict[tuple[int, int], dict] = defaultdict(lambda: {"fwd": 0, "bwd": 0, "und": 0})
    first: dict[tuple[int, int], int] = {}
    for t, lp in enumerate(lps):
        for p in (lp.pdag0, lp.pdag1):
            for a, b in p.skeleton():
                counts[(a, b)][_local_class(p, a, b)] += 1
                first.setdefault((a, b), t)
    k_per = KnowledgeSet()
    for (a, b), c in sorted(counts.items()):
        tot = c["fwd"] + c["bwd"] + c["und"]
        for cls, e in (("fwd", (a, b)), ("bwd", (b, a))):
            if c[cls] * 2 > tot:
                k_per.constraints[e] = Constraint(e, c[cls] / tot, VOTE, first[(a, b)])
    k_rules = KnowledgeSet()
    for ev in evidence:
        cur = k_rules.constraints.get(ev.edge)
        if cur is None or ev.confidence > cur.confidence:
            k_rules.constraints[ev.edge] = Constraint(ev.edge, ev.confidence, ev.rule, ev.subset_id)
    return k_per, k_rules


def resolve_conflicts(ks: KnowledgeSet, dominance: float = DOMINANCE) -> KnowledgeSet:
    """Settle opposite-direction constraints on one pair.

    The stronger side survives when its confidence is at least
    ``dominance`` times the weaker one; otherwise both are dropped.
    """
    out = KnowledgeSet(dict(ks.constraints), list(ks.dropped))
    for e in sorted(ks.constraints):
        a, b = e
        if (b, a) not in out.constraints or e not in out.constraints or a > b:
            continue
        c1, c2 = out.constraints[e], out.constraints[(b, a)]
        hi, lo = (c1, c2) if c1.confidence >= c2.confidence else (c2, c1)
        if hi.confidence > 0 and hi.confidence >= dominance * lo.confidence:
            out.dropped.append(out.constraints.pop(lo.edge))
        else:
            out.dropped.append(out.constraints.pop(c1.edge))
            out.dropped.append(out.constraints.pop(c2.edge))
    return out


@dataclass
class Aggregate:
    h_obs: Pdag
    h_per: Pdag
    h_ctr: Pdag
    k_per: KnowledgeSet
    k_rules: KnowledgeSet
    dropped: list[Constraint] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def enrichment_ok(self) -> bool:
        return self.h_obs.directed <= self.h_per.directed <= self.h_ctr.directed

    def ledger(self) -> list[str]:
        return [c.ledger_line() for c in self.k_per.sorted() + self.k_rules.sorted()]


def aggregate(
    h_obs: Pdag,
    K_per: KnowledgeSet,
    K_rules: KnowledgeSet,
    dominance: float = DOMINANCE,
) -> Aggregate:
    """``H_per`` closes ``H_obs`` under ``K_per``; ``H_ctr`` closes ``H_per``
    under the rule constraints that do not contradict it.

    Rule constraints never override per-regime orientations, so the
    enrichment chain holds by construction; it is still checked and any
    violation is reported in ``warnings``.
    """
    K_per = resolve_conflicts(K_per, dominance)
    K_rules = resolve_conflicts(K_rules, dominance)
    h_per, dropped_per = _close_with_drops(h_obs, K_per.constraints)
    rule_side = {}
    dropped_rules = []
    for e, c in K_rules.constraints.items():
        if (e[1], e[0]) in h_per.directed:
            dropped_rules.append(c)
        else:
            rule_side[e] = c
    h_ctr, more = _close_with_drops(h_per, rule_side)
    dropped_rules += more
    kept_per = KnowledgeSet({e: c for e, c in K_per.constraints.items() if c not in dropped_per})
    kept_rules = KnowledgeSet({e: c for e, c in K_rules.constraints.items() if c not in dropped_rules})
    dropped = K_per.dropped + K_rules.dropped + dropped_per + dropped_rules
    res = Aggregate(h_obs, h_per, h_ctr, kept_per, kept_rules, dropped)
    if not res.enrichment_ok:
        msg = "monotone enrichment violated"
        res.warnings.append(msg)
        log.error(msg)
    return res
