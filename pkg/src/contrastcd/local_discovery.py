"""Subset-level PDAG estimation with a bootstrap PolyBIC vote ensemble."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .graphs import GraphInputError, Pdag, pattern_of
from .scm import TwoRegimeDataset

# edge classes for an ordered local pair (i, j), i < j
FWD, BWD, UND, NONE = 0, 1, 2, 3
CLASS_NAMES = ("i->j", "j->i", "i--j", "none")

RSS_FLOOR = 1e-300
TEMP_FLOOR = 1e-8


class DegenerateInput(ValueError):
    """Normal equations are singular even with the ridge term."""


def poly_features(X: np.ndarray, degree: int) -> np.ndarray:
    """Intercept plus per-column powers ``1..degree`` (no cross terms)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    cols = [np.ones(len(X))]
    for d in range(1, degree + 1):
        cols.extend((X**d).T)
    return np.column_stack(cols)


def bic_fit(
    y: np.ndarray,
    X: np.ndarray,
    degree: int = 2,
    ridge: float = 1e-3,
    return_terms: bool = False,
):
    """BIC of a polynomial ridge regression of ``y`` on ``X``.

    ``BIC = m log(RSS/m) + p log m`` with ``p`` the feature count. RSS is
    floored so a perfect fit gives a very negative but finite value. With
    ``return_terms`` the tuple ``(bic, m, p, rss)`` is returned.
    """
    y = np.asarray(y, dtype=float)
    m = len(y)
    if m < degree + 2:
        raise GraphInputError(f"need at least degree+2={degree + 2} rows, got {m}")
    F = poly_features(X, degree)
    if len(F) != m:
        raise GraphInputError("X and y disagree on row count")
    p = F.shape[1]
    G = F.T @ F
    pen = ridge * np.eye(p)
    pen[0, 0] = 0.0
    try:
        beta = np.linalg.solve(G + pen, F.T @ y)
    except np.linalg.LinAlgError as e:
        raise DegenerateInput(str(e)) from e
    if not np.all(np.isfinite(beta)):
        raise DegenerateInput("non-finite regression coefficients")
    rss = float(np.sum((y - F @ beta) ** 2))
    bic = m * np.log(max(rss, RSS_FLOOR) / m) + p * np.log(m)
    return (bic, m, p, rss) if return_terms else bic


def _standardize(X: np.ndarray) -> np.ndarray:
    sd = X.std(axis=0)
    return (X - X.mean(axis=0)) / np.where(sd > 0, sd, 1.0)


def bic_differences(X: np.ndarray, degree: int = 2, ridge: float = 1e-3) -> np.ndarray:
    """``D[i, j] = BIC(X_i | X_j) - BIC(X_j | X_i)`` on standardized columns."""
    X = _standardize(np.asarray(X, dtype=float))
    k = X.shape[1]
    D = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            try:
                d = bic_fit(X[:, i], X[:, j], degree, ridge) - bic_fit(X[:, j], X[:, i], degree, ridge)
            except DegenerateInput:
                d = 0.0
            D[i, j], D[j, i] = d, -d
    return D


def polybic_scores(
    X_S: np.ndarray,
    degree: int = 2,
    temperature: float | None = None,
    ridge: float = 1e-3,
) -> np.ndarray:
    """Orientation scores ``A[i, j] = sigmoid(D[i, j] / T)``.

    ``T`` defaults to the mean absolute BIC difference over all pairs of
    the subset, floored at ``1e-8``.
    """
    X_S = np.asarray(X_S, dtype=float)
    k = X_S.shape[1]
    if k < 2:
        raise GraphInputError("polybic_scores needs at least two columns")
    D = bic_differences(X_S, degree, ridge)
    if temperature is None:
        iu = np.triu_indices(k, 1)
        temperature = float(np.mean(np.abs(D[iu])))
    temperature = max(float(temperature), TEMP_FLOOR)
    A = 1.0 / (1.0 + np.exp(-D / temperature))
    np.fill_diagonal(A, 0.0)
    return A


def decode_votes(A: np.ndarray, epsilon: float = 0.05, tau: float = 0.55) -> dict[tuple[int, int], int]:
    """Four-case decoding of a score matrix into one class per pair ``i < j``."""
    A = np.asarray(A, dtype=float)
    k = len(A)
    out = {}
    for i in range(k):
        for j in range(i + 1, k):
            aij, aji = A[i, j], A[j, i]
            if max(aij, aji) < tau:
                out[(i, j)] = NONE
            elif aij - aji > epsilon:
                out[(i, j)] = FWD
            elif aji - aij > epsilon:
                out[(i, j)] = BWD
            else:
                out[(i, j)] = UND
    return out


def majority_vote(tally) -> int:
    """Argmax class; a tie for the maximum falls back to no-edge."""
    tally = np.asarray(tally, dtype=float)
    if (tally < 0).any():
        raise ValueError("vote weights must be non-negative")
    best = tally.max()
    if np.count_nonzero(tally == best) > 1:
        return NONE
    return int(np.argmax(tally))


Learner = Callable[[np.ndarray], np.ndarray]


@dataclass
class DiscoveryConfig:
    r_boot: int = 10
    degree: int = 2
    epsilon: float = 0.05
    tau: float = 0.55
    ridge: float = 1e-3
    temperature: float | None = None
    pattern: bool = True


@dataclass
class LocalPdagPair:
    subset: tuple[int, ...]
    pdag0: Pdag
    pdag1: Pdag
    votes0: dict = field(default_factory=dict)
    votes1: dict = field(default_factory=dict)

    def pdag(self, c: int) -> Pdag:
        return self.pdag0 if c == 0 else self.pdag1

    def common_skeleton(self):
        return self.pdag0.skeleton() & self.pdag1.skeleton()


def _classes_to_pdag(n: int, subset, classes: dict) -> Pdag:
    directed, undirected = set(), set()
    for (i, j), c in classes.items():
        a, b = subset[i], subset[j]
        if c == FWD:
            directed.add((a, b))
        elif c == BWD:
            directed.add((b, a))
        elif c == UND:
            undirected.add((min(a, b), max(a, b)))
    return Pdag(n, frozenset(directed), frozenset(undirected))


def _regime_pdag(X, n, subset, cfg, learners, rng):
    m = len(X)
    k = len(subset)
    tallies = {(i, j): np.zeros(4) for i in range(k) for j in range(i + 1, k)}
    for _ in range(cfg.r_boot):
        rows = rng.integers(0, m, size=m)
        Xb = X[rows][:, list(subset)]
        for learner, w in learners:
            for pair, c in decode_votes(learner(Xb), cfg.epsilon, cfg.tau).items():
                tallies[pair][c] += w
    classes = {pair: majority_vote(t) for pair, t in tallies.items()}
    p = _classes_to_pdag(n, subset, classes)
    if cfg.pattern:
        p = pattern_of(p)
    votes = {(subset[i], subset[j]): t for (i, j), t in tallies.items()}
    return p, votes


def discover_local(
    d: TwoRegimeDataset,
    S: Sequence[int],
    cfg: DiscoveryConfig | None = None,
    rng: np.random.Generator | None = None,
    learners: list[tuple[Learner, float]] | None = None,
) -> LocalPdagPair:
    """Run the vote ensemble on each regime independently over subset ``S``.

    Each regime bootstraps from its own child generator, so regime-0
    output never depends on regime-1 rows and vice versa.
    """
    cfg = cfg or DiscoveryConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    subset = tuple(sorted(set(int(v) for v in S)))
    n = d.n_vars
    if len(subset) < 2:
        raise GraphInputError("subset needs at least two nodes")
    if any(not 0 <= v < n for v in subset):
        raise GraphInputError(f"subset {subset} out of range for {n} variables")
    if learners is None:
        learners = [
            (lambda X: polybic_scores(X, cfg.degree, cfg.temperature, cfg.ridge), 1.0)
        ]
    rng0, rng1 = rng.spawn(2)
    p0, v0 = _regime_pdag(d.samples0, n, subset, cfg, learners, rng0)
    p1, v1 = _regime_pdag(d.samples1, n, subset, cfg, learners, rng1)
    return LocalPdagPair(subset, p0, p1, v0, v1)
