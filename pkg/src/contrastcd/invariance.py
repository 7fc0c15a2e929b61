"""Cross-regime invariance literals and witness admissibility."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Protocol

import numpy as np
from scipy import stats

from .graphs import AugmentedDag, Dag, GraphInputError, REGIME, d_separated, possible_descendants
from .local_discovery import LocalPdagPair
from .scm import TwoRegimeDataset

log = logging.getLogger(__name__)

INVARIANT, CHANGED = "invariant", "changed"


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class InvarianceLiteral:
    v: int
    Z: frozenset[int]
    verdict: str
    p_value: float
    statistic: float
    dropped: tuple[int, ...] = ()

    @property
    def invariant(self) -> bool:
        return self.verdict == INVARIANT

    @property
    def confidence(self) -> float:
        # strength of the verdict actually reached
        return self.p_value if self.invariant else 1.0 - self.p_value


def _design(X: np.ndarray, Z: list[int]) -> np.ndarray:
    return np.column_stack([np.ones(len(X))] + [X[:, z] for z in Z])


def _gram(F: np.ndarray, y: np.ndarray):
    return F.T @ F, F.T @ y


def _ridge_solve(G, b, ridge: float):
    pen = ridge * np.eye(len(G))
    pen[0, 0] = 0.0
    return np.linalg.solve(G + pen, b)


def _usable_columns(X0, X1, Z: list[int], tol: float = 1e-10) -> tuple[list[int], list[int]]:
    """Drop conditioning columns that are constant or collinear in either regime.

    Columns are admitted greedily; a column is rejected when the
    correlation matrix of the admitted set plus it is numerically singular.
    """
    if not Z:
        return [], []
    corrs, flat = [], set()
    for X in (X0, X1):
        sub = X[:, Z]
        sd = sub.std(axis=0)
        flat |= {z for z, s in zip(Z, sd) if s <= tol}
        Xc = (sub - sub.mean(axis=0)) / np.where(sd > tol, sd, 1.0)
        corrs.append(Xc.T @ Xc / len(X))
    pos = {z: i for i, z in enumerate(Z)}
    keep, dropped = [], []
    for z in Z:
        ok = z not in flat
        if ok:
            idx = [pos[u] for u in keep + [z]]
            for C in corrs:
                ev = np.linalg.eigvalsh(C[np.ix_(idx, idx)])
                if ev[0] <= tol * max(ev[-1], 1.0):
                    ok = False
                    break
        (keep if ok else dropped).append(z)
    return keep, dropped


def test_invariance(
    d: TwoRegimeDataset,
    v: int,
    Z: Iterable[int] = (),
    alpha: float = 0.01,
    ridge: float = 1e-8,
) -> InvarianceLiteral:
    """Two-regime equality test of the law of ``X_v`` given ``X_Z``.

    With ``Z`` non-empty, a Chow-style F test on the regression
    coefficients is combined with a Brown-Forsythe test on residual
    spread. With ``Z`` empty, a Welch mean test replaces the F test. The two
    p-values are Bonferroni-combined; the verdict is invariant iff the
    combined p-value is at least ``alpha``. The reported statistic is the
    residual variance ratio (regime 1 over regime 0).
    """
    Z = sorted(set(int(z) for z in Z))
    v = int(v)
    n = d.n_vars
    if not 0 <= v < n or any(not 0 <= z < n for z in Z):
        raise GraphInputError("node index out of range")
    if v in Z:
        raise GraphInputError("v must not be in Z")
    X0, X1 = d.samples0, d.samples1
    m0, m1 = len(X0), len(X1)
    if min(m0, m1) <= len(Z) + 3:
        raise InsufficientData(f"need more than {len(Z) + 3} rows per regime")
    Zk, dropped = _usable_columns(X0, X1, Z)
    if dropped:
        log.debug("dropped degenerate conditioning columns %s", dropped)
    y0, y1 = X0[:, v], X1[:, v]

    if Zk:
        F0, F1 = _design(X0, Zk), _design(X1, Zk)
        p = F0.shape[1]
        s0, s1 = _gram(F0, y0), _gram(F1, y1)
        b0, b1 = _ridge_solve(*s0, ridge), _ridge_solve(*s1, ridge)
        r0, r1 = y0 - F0 @ b0, y1 - F1 @ b1
        rss_sep = r0 @ r0 + r1 @ r1
        # pooled-fit excess RSS: sum_c (b_c - b_p)' G_c (b_c - b_p), which
        # avoids subtracting two nearly equal residual sums
        bp = _ridge_solve(s0[0] + s1[0], s0[1] + s1[1], ridge)
        excess = max(float((b0 - bp) @ s0[0] @ (b0 - bp) + (b1 - bp) @ s1[0] @ (b1 - bp)), 0.0)
        dof = m0 + m1 - 2 * p
        if rss_sep <= 0:
            p_coef = 0.0 if excess > 0 else 1.0
        else:
            f = excess / p / (rss_sep / dof)
            p_coef = float(stats.f.sf(f, p, dof))
    else:
        r0, r1 = y0 - y0.mean(), y1 - y1.mean()
        if y0.std() == 0 and y1.std() == 0:
            p_coef = 1.0 if y0[0] == y1[0] else 0.0
        else:
            p_coef = float(stats.ttest_ind(y0, y1, equal_var=False).pvalue)
    if np.all(r0 == r0[0]) and np.all(r1 == r1[0]):
        p_var = 1.0
    else:
        p_var = float(stats.levene(r0, r1, center="median").pvalue)
    if not np.isfinite(p_var):
        p_var = 1.0
    if not np.isfinite(p_coef):
        p_coef = 1.0
    p_val = min(1.0, 2.0 * min(p_coef, p_var))
    var0, var1 = r0.var(), r1.var()
    ratio = var1 / var0 if var0 > 0 else (1.0 if var1 == 0 else np.inf)
    verdict = INVARIANT if p_val >= alpha else CHANGED
    return InvarianceLiteral(v, frozenset(Z), verdict, p_val, float(ratio), tuple(dropped))


class LiteralSource(Protocol):
    def __call__(self, v: int, Z: frozenset[int]) -> InvarianceLiteral | None: ...


class EmpiricalLiterals:
    """Cached data-driven literals; failures return None and are logged."""

    def __init__(self, d: TwoRegimeDataset, alpha: float = 0.01):
        self.d = d
        self.alpha = alpha
        self.cache: dict = {}

    def __call__(self, v, Z):
        key = (int(v), frozenset(Z))
        if key not in self.cache:
            try:
                self.cache[key] = test_invariance(self.d, v, Z, self.alpha)
            except (InsufficientData, np.linalg.LinAlgError) as e:
                log.info("literal (%s | %s) unavailable: %s", v, sorted(Z), e)
                self.cache[key] = None
        return self.cache[key]


class OracleLiterals:
    """Population literals read off the augmented graph."""

    def __init__(self, g: Dag, targets):
        self.aug = AugmentedDag(g, frozenset(targets))
        self.cache: dict = {}

    def __call__(self, v, Z):
        key = (int(v), frozenset(Z))
        if key not in self.cache:
            inv = d_separated(self.aug, REGIME, int(v), key[1])
            self.cache[key] = InvarianceLiteral(
                key[0], key[1], INVARIANT if inv else CHANGED, 1.0 if inv else 0.0, float("nan")
            )
        return self.cache[key]


def witness_admissible(v: int, Z: Iterable[int], lp: LocalPdagPair) -> bool:
    """No member of ``Z`` is a possible descendant of ``v`` in either local PDAG."""
    Z = set(int(z) for z in Z)
    sub = set(lp.subset)
    if int(v) not in sub or not Z <= sub:
        raise GraphInputError("v and Z must lie inside the subset")
    if not Z:
        return True
    for p in (lp.pdag0, lp.pdag1):
        if Z & possible_descendants(p, int(v)):
            return False
    return True


# keep pytest from collecting the public test function when it is imported
test_invariance.__test__ = False
