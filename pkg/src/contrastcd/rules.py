"""Contrastive orientation rules over subset PDAG pairs.

Three rules read a pair of local PDAGs plus cross-regime invariance
literals and emit directed-edge evidence:

* SSI: one endpoint of an undirected edge changes, the other is invariant,
  so the changed endpoint is the child.
* CVT: the middle of an unshielded triple changes while both ends are
  invariant, so the triple is a collider.
* DPT: a discriminating-path motif whose replay nodes are certified by
  invariance literals fixes the mark on its final edge.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterable

from .graphs import _pair
from .invariance import LiteralSource, witness_admissible
from .local_discovery import LocalPdagPair

log = logging.getLogger(__name__)

SSI, CVT, DPT = "SSI", "CVT", "DPT"

SepsetQuery = Callable[[int, int, tuple], "frozenset[int] | None"]


@dataclass(frozen=True)
class OrientationEvidence:
    edge: tuple[int, int]
    rule: str
    subset: tuple[int, ...]
    witness: frozenset[int]
    confidence: float
    subset_id: int = 0

    @property
    def pair(self) -> tuple[int, int]:
        return _pair(*self.edge)

    def ledger_line(self) -> str:
        i, j = self.pair
        a, b = self.edge
        return f"pair={i},{j} dir={a}->{b} rule={self.rule} subset={self.subset_id} conf={self.confidence:.2f}"


@dataclass(frozen=True)
class DpCandidate:
    """Path ``<v0, v1, ..., v_{m-1}, j, k>`` inside one subset."""

    path: tuple[int, ...]
    replay: tuple[int, ...]
    witness: frozenset[int]
    compatible: bool = True

    @property
    def v0(self) -> int:
        return self.path[0]

    @property
    def j(self) -> int:
        return self.path[-2]

    @property
    def k(self) -> int:
        return self.path[-1]

    @property
    def internal(self) -> tuple[int, ...]:
        return self.path[1:-2]


def _undirected_both(lp: LocalPdagPair, a: int, b: int) -> bool:
    return lp.pdag0.is_undirected(a, b) and lp.pdag1.is_undirected(a, b)


def _request(lits: LiteralSource, v: int, Z: frozenset[int]):
    lit = lits(v, Z)
    if lit is None:
        log.info("literal for %s | %s unavailable; site skipped", v, sorted(Z))
    return lit


def apply_ssi(lp: LocalPdagPair, lits: LiteralSource, subset_id: int = 0) -> list[OrientationEvidence]:
    S = lp.subset
    out = []
    for i, j in combinations(S, 2):
        if not _undirected_both(lp, i, j):
            continue
        Z = frozenset(S) - {i, j}
        if not (witness_admissible(i, Z, lp) and witness_admissible(j, Z, lp)):
            continue
        li, lj = _request(lits, i, Z), _request(lits, j, Z)
        if li is None or lj is None:
            continue
        conf = min(li.confidence, lj.confidence)
        if li.invariant and not lj.invariant:
            out.append(OrientationEvidence((i, j), SSI, S, Z, conf, subset_id))
        elif lj.invariant and not li.invariant:
            out.append(OrientationEvidence((j, i), SSI, S, Z, conf, subset_id))
    return out


def apply_cvt(lp: LocalPdagPair, lits: LiteralSource, subset_id: int = 0) -> list[OrientationEvidence]:
    S = lp.subset
    skel = lp.common_skeleton()
    out = []
    for j in S:
        nbrs = [v for v in S if v != j and _pair(v, j) in skel and _undirected_both(lp, v, j)]
        for i, k in combinations(nbrs, 2):
            if _pair(i, k) in skel:
                continue
            Z = frozenset(S) - {i, j, k}
            if not all(witness_admissible(v, Z, lp) for v in (i, j, k)):
                continue
            li, lj, lk = (_request(lits, v, Z) for v in (i, j, k))
            if li is None or lj is None or lk is None:
                continue
            if not lj.invariant and li.invariant and lk.invariant:
                conf = min(li.confidence, lj.confidence, lk.confidence)
                out.append(OrientationEvidence((i, j), CVT, S, Z, conf, subset_id))
                out.append(OrientationEvidence((k, j), CVT, S, Z, conf, subset_id))
    return out


def _forced(lp: LocalPdagPair, a: int, b: int) -> int:
    """+1 if a->b in both PDAGs, -1 if b->a in both, 0 otherwise."""
    if lp.pdag0.is_directed(a, b) and lp.pdag1.is_directed(a, b):
        return 1
    if lp.pdag0.is_directed(b, a) and lp.pdag1.is_directed(b, a):
        return -1
    return 0


def _node_status(lp: LocalPdagPair, skel, prev: int, v: int, nxt: int, k: int):
    """Status of internal node ``v`` against the target assignment.

    Returns ``"forced"`` when both status bits (collider on the path,
    parent of k) are fixed by directed marks in both PDAGs and agree with
    the target, ``"conflict"`` when some fixed bit disagrees, and
    ``"replay"`` otherwise.
    """
    into_prev = _forced(lp, prev, v)
    into_next = _forced(lp, nxt, v)
    if into_prev == -1 or into_next == -1:
        return "conflict"
    if _pair(v, k) not in skel:
        return "conflict"
    to_k = _forced(lp, v, k)
    if to_k == -1:
        return "conflict"
    if into_prev == 1 and into_next == 1 and to_k == 1:
        return "forced"
    return "replay"


def enumerate_dp_candidates(lp: LocalPdagPair, j: int, k: int, max_len: int = 3) -> list[DpCandidate]:
    """All simple common-skeleton paths ``<v0, ..., j, k>`` with 1..max_len
    internal nodes and ``v0`` non-adjacent to ``k``."""
    S = lp.subset
    skel = lp.common_skeleton()
    if max_len <= 0 or _pair(j, k) not in skel:
        return []
    adj = {v: {u for u in S if u != v and _pair(u, v) in skel} for v in S}
    out = []

    # extend backwards from j: rev = [j, v_{m-1}, ..., v_1, v0]
    def extend(rev: list[int]):
        last = rev[-1]
        n_internal = len(rev) - 2
        if n_internal >= 1 and k not in adj[last]:
            path = tuple(reversed(rev)) + (k,)
            out.append(_make_candidate(lp, skel, path))
        if n_internal + 1 > max_len:
            return
        for u in sorted(adj[last]):
            if u in rev or u == k:
                continue
            extend(rev + [u])

    for u in sorted(adj[j]):
        if u != k:
            extend([j, u])
    return out


def _make_candidate(lp, skel, path) -> DpCandidate:
    k = path[-1]
    internal = path[1:-2]
    # two neighbouring internal colliders would need arrowheads both ways,
    # so the all-collider target assignment is only realizable with one
    replay, ok = [], len(internal) == 1
    for t, v in enumerate(internal, start=1):
        status = _node_status(lp, skel, path[t - 1], v, path[t + 1], k)
        if status == "conflict":
            ok = False
        elif status == "replay":
            replay.append(v)
    # a replay node next to j would need Inv(v) with Chg(j) across the edge
    # v - j, which forces v -> j and contradicts v being a collider on the path
    if path[-3] in replay:
        ok = False
    Z = frozenset(lp.subset) - set(path)
    return DpCandidate(tuple(path), tuple(replay), Z, ok)


def apply_dpt(
    cand: DpCandidate,
    lits: LiteralSource,
    sepset_query: SepsetQuery | None,
    lp: LocalPdagPair,
    subset_id: int = 0,
) -> list[OrientationEvidence]:
    if not cand.compatible:
        return []
    Z = cand.witness
    if not all(witness_admissible(v, Z, lp) for v in (cand.j, *cand.replay)):
        return []
    lj = _request(lits, cand.j, Z)
    lr = [_request(lits, r, Z) for r in cand.replay]
    if lj is None or any(l is None for l in lr):
        return []
    if lj.invariant or not all(l.invariant for l in lr):
        return []
    sep = sepset_query(cand.v0, cand.k, lp.subset) if sepset_query else None
    if sep is None:
        log.info("no separating set for (%s, %s) in %s; site skipped", cand.v0, cand.k, lp.subset)
        return []
    if not _colliders_agree(cand, sepset_query, lp):
        return []
    conf = min([lj.confidence] + [l.confidence for l in lr])
    S = lp.subset
    if cand.j in sep:
        return [OrientationEvidence((cand.j, cand.k), DPT, S, Z, conf, subset_id)]
    last = cand.path[-3]
    return [
        OrientationEvidence((cand.k, cand.j), DPT, S, Z, conf, subset_id),
        OrientationEvidence((last, cand.j), DPT, S, Z, conf, subset_id),
    ]


def _colliders_agree(cand: DpCandidate, sepset_query: SepsetQuery, lp: LocalPdagPair) -> bool:
    """Unshielded internal triples must be colliders by their separating sets."""
    skel = lp.common_skeleton()
    p = cand.path
    for t in range(1, len(p) - 2):
        a, v, b = p[t - 1], p[t], p[t + 1]
        if _pair(a, b) in skel:
            continue
        sep = sepset_query(a, b, lp.subset)
        if sep is not None and v in sep:
            return False
    return True


def apply_all(
    lp: LocalPdagPair,
    lits: LiteralSource,
    sepset_query: SepsetQuery | None = None,
    subset_id: int = 0,
    max_len: int = 3,
    rules: Iterable[str] = (SSI, CVT, DPT),
) -> list[OrientationEvidence]:
    rules = set(rules)
    out = []
    if SSI in rules:
        out += apply_ssi(lp, lits, subset_id)
    if CVT in rules:
        out += apply_cvt(lp, lits, subset_id)
    if DPT in rules:
        for j, k in combinations(lp.subset, 2):
            if not _undirected_both(lp, j, k):
                continue
            for a, b in ((j, k), (k, j)):
                for cand in enumerate_dp_candidates(lp, a, b, max_len):
                    out += apply_dpt(cand, lits, sepset_query, lp, subset_id)
    return out
