"""Exhaustive small-graph oracle for the test-induced equivalence class.

For a generating pair (DAG, target set) the oracle computes population
subset PDAGs and invariance bits, finds every (DAG, target set) pair that
reproduces them, and intersects the members' orientations into the
test-induced essential graph. Dropping the invariance bits gives the
reduced estimand; their difference ``R`` are the contrastively compelled
edges.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations, product
from typing import Iterable, Iterator

from scipy import stats

from .graphs import (
    AugmentedDag,
    ClosureConflict,
    Dag,
    GraphInputError,
    Pdag,
    REGIME,
    _pair,
    d_connected_set,
    d_separated,
    meek_close,
    topological_order,
)
from .local_discovery import LocalPdagPair
from .rules import SSI, CVT, DPT, apply_all
from .invariance import InvarianceLiteral, INVARIANT, CHANGED

SKELETON_ONLY = "skeleton-only"
PC_PATTERN = "pc-pattern"
MODES = (SKELETON_ONLY, PC_PATTERN)
MAX_N = 5


# ---------------------------------------------------------------------------
# enumeration


def enumerate_dags(n: int) -> Iterator[Dag]:
    """Every labeled DAG on ``n`` nodes, each exactly once, in a fixed order."""
    if n < 0 or n > MAX_N:
        raise GraphInputError(f"enumeration capped at n <= {MAX_N}")
    pairs = list(combinations(range(n), 2))
    for states in product((0, 1, 2), repeat=len(pairs)):
        edges = []
        for (a, b), s in zip(pairs, states):
            if s == 1:
                edges.append((a, b))
            elif s == 2:
                edges.append((b, a))
        if topological_order(n, edges) is not None:
            yield Dag(n, frozenset(edges))


def all_subsets(n: int, min_size: int = 2) -> list[tuple[int, ...]]:
    return [S for r in range(min_size, n + 1) for S in combinations(range(n), r)]


def all_target_sets(n: int) -> list[frozenset[int]]:
    return [frozenset(c) for r in range(n + 1) for c in combinations(range(n), r)]


# ---------------------------------------------------------------------------
# population operators


@dataclass(frozen=True)
class PopulationLocal:
    pdag: Pdag
    sepsets: dict


def population_local(g: Dag, S: Iterable[int], mode: str = PC_PATTERN) -> PopulationLocal:
    """Population subset PDAG plus the smallest separating set per non-adjacent pair."""
    if mode not in MODES:
        raise GraphInputError(f"unknown discovery mode {mode!r}")
    S = tuple(sorted(set(S)))
    if not S:
        raise GraphInputError("subset must be nonempty")
    adj: set[tuple[int, int]] = set()
    sepsets: dict[tuple[int, int], frozenset[int]] = {}
    for i, j in combinations(S, 2):
        rest = [v for v in S if v not in (i, j)]
        found = None
        for r in range(len(rest) + 1):
            for Z in combinations(rest, r):
                if j not in d_connected_set(g, i, Z):
                    found = frozenset(Z)
                    break
            if found is not None:
                break
        if found is None:
            adj.add((i, j))
        else:
            sepsets[(i, j)] = found
    pdag = Pdag(g.n, frozenset(), frozenset(adj))
    if mode == PC_PATTERN:
        pdag = _orient_pattern(pdag, S, adj, sepsets)
    return PopulationLocal(pdag, sepsets)


def _orient_pattern(pdag: Pdag, S, adj, sepsets) -> Pdag:
    heads: set[tuple[int, int]] = set()
    for k in S:
        nb = [v for v in S if _pair(v, k) in adj]
        for i, j in combinations(nb, 2):
            if _pair(i, j) in adj:
                continue
            if k not in sepsets[_pair(i, j)]:
                heads.add((i, k))
                heads.add((j, k))
    # marginalization can request both arrowheads on one pair; leave those undirected
    clash = {e for e in heads if (e[1], e[0]) in heads}
    bg = heads - clash
    try:
        return meek_close(pdag, bg)
    except ClosureConflict:
        return pdag


def population_local_pdag(g: Dag, S: Iterable[int], mode: str = PC_PATTERN) -> Pdag:
    return population_local(g, S, mode).pdag


def population_invariance(g: Dag, targets, v: int, Z: Iterable[int] = ()) -> int:
    """1 iff the regime node is d-separated from ``v`` given ``Z``."""
    return int(d_separated(AugmentedDag(g, frozenset(targets)), REGIME, v, Z))


class RecordingLiterals:
    """Oracle literal source that records every requested key."""

    def __init__(self, bit_fn):
        self.bit_fn = bit_fn
        self.requested: set[tuple[int, frozenset[int]]] = set()

    def __call__(self, v, Z):
        key = (int(v), frozenset(Z))
        self.requested.add(key)
        inv = self.bit_fn(*key)
        return InvarianceLiteral(key[0], key[1], INVARIANT if inv else CHANGED, 1.0 if inv else 0.0, float("nan"))


# ---------------------------------------------------------------------------
# tuples and classes


@dataclass(frozen=True)
class OracleConfig:
    mode: str = PC_PATTERN
    subsets: tuple[tuple[int, ...], ...] | None = None
    max_len: int = 3
    rules: tuple[str, ...] = (SSI, CVT, DPT)

    def family(self, n: int) -> tuple[tuple[int, ...], ...]:
        return self.subsets if self.subsets is not None else tuple(all_subsets(n))


@dataclass(frozen=True)
class ConstraintTuple:
    pdags: tuple  # ((S, key0, key1), ...) sorted by S
    bits: tuple  # (((v, Z), bit), ...) sorted

    def pdag_key(self):
        return self.pdags

    def tested(self) -> tuple:
        return tuple(k for k, _ in self.bits)


def _pdag_key(p: Pdag):
    return (tuple(sorted(p.directed)), tuple(sorted(p.undirected)))


def _bit_key(v, Z):
    return (v, tuple(sorted(Z)))


class Oracle:
    """Caches population objects for one node count and configuration."""

    def __init__(self, n: int, cfg: OracleConfig | None = None):
        if n > MAX_N:
            raise GraphInputError(f"oracle capped at n <= {MAX_N}")
        self.n = n
        self.cfg = cfg or OracleConfig()
        self.family = self.cfg.family(n)
        self._local: dict = {}
        self._conn: dict = {}
        self._dags: list[Dag] | None = None
        self._groups: dict | None = None

    # population pieces -----------------------------------------------------
    def local(self, g: Dag, S) -> PopulationLocal:
        key = (g.edges, tuple(S))
        if key not in self._local:
            self._local[key] = population_local(g, S, self.cfg.mode)
        return self._local[key]

    def local_pairs(self, g: Dag) -> list[LocalPdagPair]:
        out = []
        for S in self.family:
            p = self.local(g, S).pdag.restrict(S)
            out.append(LocalPdagPair(tuple(S), p, p))
        return out

    def pdag_tuple(self, g: Dag):
        return tuple((S, _pdag_key(self.local(g, S).pdag)) for S in self.family)

    def bit(self, g: Dag, targets: frozenset, v: int, Z) -> int:
        Z = frozenset(Z)
        key = (g.edges, targets, Z)
        if key not in self._conn:
            aug = AugmentedDag(g, targets).as_dag()
            self._conn[key] = d_connected_set(aug, g.n, Z)
        return 0 if v in self._conn[key] else 1

    def sepset_query(self, g: Dag):
        def query(a, b, S):
            loc = self.local(g, tuple(sorted(S)))
            return loc.sepsets.get(_pair(a, b))

        return query

    # rules and tuples --------------------------------------------------------
    def fire_rules(self, g: Dag, targets: frozenset):
        lits = RecordingLiterals(lambda v, Z: self.bit(g, targets, v, Z))
        evidence = []
        lps = self.local_pairs(g)
        query = self.sepset_query(g)
        for t, lp in enumerate(lps):
            evidence += apply_all(lp, lits, query, t, self.cfg.max_len, self.cfg.rules)
        return lps, evidence, lits.requested

    def realized_tuple(self, g: Dag, targets) -> ConstraintTuple:
        """All subset PDAGs plus every invariance bit the rules request."""
        targets = frozenset(targets)
        _, _, requested = self.fire_rules(g, targets)
        bits = tuple(
            sorted((_bit_key(v, Z), self.bit(g, targets, v, Z)) for v, Z in requested)
        )
        return ConstraintTuple(self.pdag_tuple(g), bits)

    # class construction ------------------------------------------------------
    def dags(self) -> list[Dag]:
        if self._dags is None:
            self._dags = list(enumerate_dags(self.n))
        return self._dags

    def groups(self) -> dict:
        """DAGs grouped by their subset-PDAG tuple (the reduced classes)."""
        if self._groups is None:
            groups = defaultdict(list)
            for g in self.dags():
                groups[self.pdag_tuple(g)].append(g)
            self._groups = dict(groups)
        return self._groups

    def reduced_members(self, g: Dag) -> list[Dag]:
        full = tuple(range(self.n)) in set(map(tuple, self.family))
        if self._groups is not None or self.n <= 4 or not full:
            return self.groups()[self.pdag_tuple(g)]
        # n = 5 with the full node set in the family: members share g's
        # skeleton, so only its orientations need checking
        key = self.pdag_tuple(g)
        skel = g.skeleton()
        out = []
        for cand in _orientations(g.n, skel):
            if self.pdag_tuple(cand) == key:
                out.append(cand)
        return out

    def equivalence_class(self, tup: ConstraintTuple, g: Dag | None = None) -> "PsiClass":
        if g is not None:
            reduced = self.reduced_members(g)
        else:
            reduced = self.groups().get(tup.pdags, [])
        members = []
        tested = [(v, frozenset(Z)) for (v, Z), _ in tup.bits]
        want = tuple(b for _, b in tup.bits)
        for h in reduced:
            for I in all_target_sets(self.n):
                if tuple(self.bit(h, I, v, Z) for v, Z in tested) == want:
                    members.append((h, I))
        return PsiClass(members, reduced, self.n)


def _orientations(n: int, skel) -> Iterator[Dag]:
    skel = sorted(skel)
    for mask in range(1 << len(skel)):
        edges = [(a, b) if mask >> i & 1 else (b, a) for i, (a, b) in enumerate(skel)]
        if topological_order(n, edges) is not None:
            yield Dag(n, frozenset(edges))


@dataclass
class PsiClass:
    members: list[tuple[Dag, frozenset[int]]]
    reduced: list[Dag]
    n: int

    def dags(self) -> list[Dag]:
        seen = {}
        for g, _ in self.members:
            seen.setdefault(g.edges, g)
        return list(seen.values())

    def __len__(self) -> int:
        return len(self.members)


def intersect_orientations(dags: list[Dag], n: int) -> Pdag:
    """Skeleton edges common to all DAGs; directed where all agree."""
    if not dags:
        raise GraphInputError("cannot intersect an empty class")
    skel = set(dags[0].skeleton())
    for g in dags[1:]:
        skel &= g.skeleton()
    directed, undirected = set(), set()
    for a, b in skel:
        if all((a, b) in g.edges for g in dags):
            directed.add((a, b))
        elif all((b, a) in g.edges for g in dags):
            directed.add((b, a))
        else:
            undirected.add((a, b))
    return Pdag(n, frozenset(directed), frozenset(undirected))


def essential_graphs(cls: PsiClass) -> tuple[Pdag, Pdag, frozenset[tuple[int, int]]]:
    g_test = intersect_orientations(cls.dags(), cls.n)
    g_red = intersect_orientations(cls.reduced, cls.n)
    R = frozenset(g_test.directed - g_red.directed)
    return g_test, g_red, R


# ---------------------------------------------------------------------------
# coverage tail


def kl_bernoulli(p: float, q: float) -> float:
    out = 0.0
    if p > 0:
        out += p * math.log(p / q)
    if p < 1:
        out += (1 - p) * math.log((1 - p) / (1 - q))
    return out


def coverage_tail(T: int, pi: float, r: int) -> tuple[float, float]:
    """Exact ``Pr(L < r)`` for ``L ~ Binomial(T, pi)`` and the KL tail bound."""
    if not 1 <= r <= T:
        raise GraphInputError("need 1 <= r <= T")
    if not 0 < pi < 1:
        raise GraphInputError("need 0 < pi < 1")
    exact = float(stats.binom.cdf(r - 1, T, pi))
    bound = math.exp(-T * kl_bernoulli(r / T, pi))
    return exact, bound


def coverage_grid(Ts=range(10, 201, 10), pis=None):
    """The sweep grid: T in 10..200, pi in 0.05..0.95, r in 1..T/2."""
    if pis is None:
        pis = [round(0.05 * i, 2) for i in range(1, 20)]
    for T in Ts:
        for pi in pis:
            for r in range(1, T // 2 + 1):
                yield T, pi, r


# ---------------------------------------------------------------------------
# verification harness


@dataclass
class InstanceReport:
    n: int
    dag_id: int
    dag: Dag
    targets: frozenset[int]
    class_size: int
    g_test: Pdag
    g_reduced: Pdag
    R: frozenset
    firings: int
    violations: list = field(default_factory=list)
    premise_failures: list = field(default_factory=list)
    enrichment: bool = True
    premise_ok: bool = True
    ctr_sound: bool = True
    separation: bool | None = None
    consistent: bool = False
    sites: bool = False
    h_per: Pdag | None = None
    h_ctr: Pdag | None = None

    @property
    def sound(self) -> bool:
        return not self.violations

    def line(self) -> str:
        t = "{" + ",".join(str(v) for v in sorted(self.targets)) + "}"
        return (
            f"n={self.n} dag_id={self.dag_id} targets={t} |class|={self.class_size} "
            f"|R|={len(self.R)} sound={'yes' if self.sound else 'no'}"
        )


def run_instance(oracle: Oracle, g: Dag, targets, dag_id: int = -1, adjacency: str = "unanimous") -> InstanceReport:
    from .aggregation import aggregate, build_candidate_catalog, build_h_obs, build_knowledge_sets

    targets = frozenset(targets)
    lps, evidence, requested = oracle.fire_rules(g, targets)
    bits = tuple(sorted((_bit_key(v, Z), oracle.bit(g, targets, v, Z)) for v, Z in requested))
    tup = ConstraintTuple(oracle.pdag_tuple(g), bits)
    cls = oracle.equivalence_class(tup, g)
    g_test, g_red, R = essential_graphs(cls)
    skel = g_test.skeleton()
    violations = [ev for ev in evidence if ev.pair in skel and ev.edge not in g_test.directed]
    premise_failures = [ev for ev in evidence if ev.pair not in skel]

    catalog = build_candidate_catalog(lps)
    h_obs = build_h_obs(lps, catalog, g.n, adjacency)
    k_per, k_rules = build_knowledge_sets(lps, evidence)
    agg = aggregate(h_obs, k_per, k_rules)
    premise_ok = agg.h_per.directed <= g_red.directed and agg.h_per.skeleton() == skel
    rep = InstanceReport(
        n=g.n,
        dag_id=dag_id,
        dag=g,
        targets=targets,
        class_size=len(cls),
        g_test=g_test,
        g_reduced=g_red,
        R=R,
        firings=len(evidence),
        violations=violations,
        premise_failures=premise_failures,
        enrichment=agg.enrichment_ok,
        premise_ok=premise_ok,
        ctr_sound=agg.h_ctr.directed <= g_test.directed,
        consistent=agg.h_ctr == g_test,
        sites=bool(requested),
        h_per=agg.h_per,
        h_ctr=agg.h_ctr,
    )
    if R:
        rep.separation = bool(R & agg.h_ctr.directed) and not (R & agg.h_per.directed)
    return rep


@dataclass
class SuiteSummary:
    n: int
    mode: str
    instances: int = 0
    firings: int = 0
    violations: int = 0
    premise_failures: int = 0
    enrichment_fail: int = 0
    premise_ok: int = 0
    ctr_unsound_given_premise: int = 0
    with_R: int = 0
    separation_fail: int = 0
    with_sites: int = 0
    consistent_with_sites: int = 0
    ctr_unsound: int = 0
    lines: list = field(default_factory=list)
    violation_examples: list = field(default_factory=list)

    def add(self, rep: InstanceReport, keep_lines: bool = True):
        self.instances += 1
        self.firings += rep.firings
        self.violations += len(rep.violations)
        self.premise_failures += len(rep.premise_failures)
        self.enrichment_fail += not rep.enrichment
        self.ctr_unsound += not rep.ctr_sound
        if rep.premise_ok:
            self.premise_ok += 1
            self.ctr_unsound_given_premise += not rep.ctr_sound
        if rep.R:
            self.with_R += 1
            self.separation_fail += not rep.separation
        if rep.sites:
            self.with_sites += 1
            self.consistent_with_sites += rep.consistent
        if rep.violations and len(self.violation_examples) < 20:
            self.violation_examples.append(rep)
        if keep_lines:
            self.lines.append(rep.line())

    def table(self) -> list[str]:
        return [
            f"mode={self.mode} n={self.n} instances={self.instances} firings={self.firings}",
            f"rule_soundness violations={self.violations} premise_failures={self.premise_failures}",
            f"monotone_enrichment failures={self.enrichment_fail}",
            f"ctr_soundness premise_ok={self.premise_ok} violations_given_premise={self.ctr_unsound_given_premise}",
            f"separation instances_with_R={self.with_R} failures={self.separation_fail}",
            f"consistency instances_with_sites={self.with_sites} exact={self.consistent_with_sites}"
            f" unsound={self.ctr_unsound}",
        ]


def run_suite(
    n: int,
    mode: str = PC_PATTERN,
    keep_lines: bool = True,
    adjacency: str = "unanimous",
    **cfg_kw,
) -> SuiteSummary:
    oracle = Oracle(n, OracleConfig(mode=mode, **cfg_kw))
    summary = SuiteSummary(n, mode)
    for dag_id, g in enumerate(oracle.dags()):
        for I in all_target_sets(n):
            summary.add(run_instance(oracle, g, I, dag_id, adjacency), keep_lines)
    return summary
