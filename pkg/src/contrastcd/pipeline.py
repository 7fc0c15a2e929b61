"""End-to-end rule-based discovery: subsets, local PDAGs, literals, rules, closure."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .aggregation import Aggregate, aggregate, build_candidate_catalog, build_h_obs, build_knowledge_sets
from .config import RunConfig, derive_rng
from .graphs import Pdag, _pair
from .invariance import EmpiricalLiterals, LiteralSource
from .local_discovery import DiscoveryConfig, LocalPdagPair, discover_local
from .rules import OrientationEvidence, apply_all
from .sampler import SamplerState, compute_scores, sample_subsets
from .scm import TwoRegimeDataset

log = logging.getLogger(__name__)

THREADS_ENV = "SCONE_THREADS"

LocalFn = Callable[[tuple, int], LocalPdagPair]
SepsetQuery = Callable[[int, int, tuple], "frozenset[int] | None"]


def worker_count() -> int:
    """Parallelism cap from the environment, never above the CPU count."""
    cpus = os.cpu_count() or 1
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return cpus
    try:
        return max(1, min(int(raw), cpus))
    except ValueError:
        log.warning("ignoring non-integer %s=%r", THREADS_ENV, raw)
        return cpus


class FisherZSepsets:
    """Smallest separating set inside a subset, by partial-correlation tests.

    Uses regime-0 rows. Candidate sets are tried by size, then
    lexicographically; the first with ``p >= alpha`` wins. Returns None when
    no subset of ``S - {a, b}`` separates the pair.
    """

    def __init__(self, X: np.ndarray, alpha: float = 0.01):
        self.X = np.asarray(X, float)
        self.alpha = alpha
        self.m = len(X)
        self.C = np.nan_to_num(np.corrcoef(self.X, rowvar=False))
        self.cache: dict = {}

    def pvalue(self, a: int, b: int, Z: tuple) -> float:
        idx = [a, b, *Z]
        sub = self.C[np.ix_(idx, idx)]
        try:
            P = np.linalg.pinv(sub)
        except np.linalg.LinAlgError:
            return 1.0
        denom = np.sqrt(abs(P[0, 0] * P[1, 1]))
        r = 0.0 if denom == 0 else float(np.clip(-P[0, 1] / denom, -0.999999, 0.999999))
        dof = self.m - len(Z) - 3
        if dof <= 0:
            return 1.0
        z = np.sqrt(dof) * np.arctanh(r)
        return float(2 * stats.norm.sf(abs(z)))

    def __call__(self, a: int, b: int, S: tuple):
        a, b = _pair(a, b)
        key = (a, b, tuple(sorted(S)))
        if key not in self.cache:
            rest = [v for v in key[2] if v not in (a, b)]
            found = None
            for size in range(len(rest) + 1):
                for Z in combinations(rest, size):
                    if self.pvalue(a, b, Z) >= self.alpha:
                        found = frozenset(Z)
                        break
                if found is not None:
                    break
            self.cache[key] = found
        return self.cache[key]


@dataclass
class DiscoveryRun:
    n: int
    subsets: list
    local: list
    evidence: list
    agg: Aggregate | None
    warnings: list = field(default_factory=list)

    @property
    def h_ctr(self) -> Pdag:
        return self.agg.h_ctr if self.agg is not None else Pdag(self.n, frozenset(), frozenset())

    @property
    def h_per(self) -> Pdag:
        return self.agg.h_per if self.agg is not None else Pdag(self.n, frozenset(), frozenset())

    @property
    def h_obs(self) -> Pdag:
        return self.agg.h_obs if self.agg is not None else Pdag(self.n, frozenset(), frozenset())

    @property
    def conflict_free(self) -> bool:
        return self.agg is None or not self.agg.dropped

    def ledger_lines(self) -> list[str]:
        """Kept constraints in ledger format, then dropped ones as comments."""
        if self.agg is None:
            return []
        lines = self.agg.ledger()
        lines += ["# dropped " + c.ledger_line() for c in self.agg.dropped]
        return lines


def discovery_config(cfg: RunConfig) -> DiscoveryConfig:
    e = cfg.ensemble
    return DiscoveryConfig(e.r_boot, e.degree, e.epsilon, e.tau, e.ridge, e.temperature, e.pattern)


def choose_subsets(d: TwoRegimeDataset, cfg: RunConfig, seed: int) -> list[tuple[int, ...]]:
    n = d.n_vars
    T = cfg.subset_count(n)
    if T <= 0:
        return []
    sc = cfg.sampler
    scores = compute_scores(d, sc.w1, sc.w2)
    st = SamplerState.initial(
        scores, k=min(sc.k, n), q=sc.q, r=sc.r, rho=sc.rho, lam=sc.lam, beta_cov=sc.beta_cov
    )
    subsets, _ = sample_subsets(st, T, derive_rng(seed, "sampler"))
    return subsets


def run_discovery(
    d: TwoRegimeDataset,
    cfg: RunConfig | None = None,
    seed: int | None = None,
    subsets: Sequence[tuple[int, ...]] | None = None,
    local_fn: LocalFn | None = None,
    literals: LiteralSource | None = None,
    sepset_query: SepsetQuery | None = None,
) -> DiscoveryRun:
    """Sampler, local discovery, literals, rules and aggregation on one dataset.

    ``local_fn``, ``literals`` and ``sepset_query`` replace the empirical
    components (for example with population oracles); ``subsets`` bypasses
    the sampler.
    """
    cfg = cfg or RunConfig()
    seed = cfg.seed if seed is None else seed
    n = d.n_vars
    if subsets is None:
        subsets = choose_subsets(d, cfg, seed)
    subsets = [tuple(sorted(S)) for S in subsets]
    if not subsets:
        msg = "no subsets sampled; returning the empty graph"
        log.warning(msg)
        return DiscoveryRun(n, [], [], [], None, [msg])

    if local_fn is None:
        dcfg = discovery_config(cfg)

        def local_fn(S, t):
            return discover_local(d, S, dcfg, derive_rng(seed, "bootstrap", t))

    workers = worker_count()
    if workers > 1 and len(subsets) > 1:
        with ThreadPoolExecutor(workers) as ex:
            lps = list(ex.map(local_fn, subsets, range(len(subsets))))
    else:
        lps = [local_fn(S, t) for t, S in enumerate(subsets)]

    lits = literals if literals is not None else EmpiricalLiterals(d, cfg.tests.alpha)
    query = sepset_query if sepset_query is not None else FisherZSepsets(d.samples0, cfg.tests.sep_alpha)
    evidence: list[OrientationEvidence] = []
    for t, lp in enumerate(lps):
        evidence += apply_all(lp, lits, query, t, cfg.rules.max_len, cfg.rules.enabled)

    ag = cfg.aggregation
    catalog = build_candidate_catalog(lps, d, ag.k_env, ag.cap)
    h_obs = build_h_obs(lps, catalog, n, ag.adjacency)
    k_per, k_rules = build_knowledge_sets(lps, evidence)
    agg = aggregate(h_obs, k_per, k_rules, ag.dominance)
    return DiscoveryRun(n, list(subsets), lps, evidence, agg, list(agg.warnings))
