"""Contrast-aware greedy sampling of node subsets."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .scm import TwoRegimeDataset

log = logging.getLogger(__name__)

MI_BINS = 8
PRECISION_RIDGE = 1e-3


def rescale(x: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Min-max to [0, 1]; a constant vector maps to all zeros."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return np.zeros_like(x)
    lo, hi = x.min(), x.max()
    if hi - lo <= tol * max(1.0, abs(hi)):
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def regime_mi(x0: np.ndarray, x1: np.ndarray, bins: int = MI_BINS) -> float:
    """Plug-in MI (nats) between an equal-frequency binning of x and the regime label."""
    x = np.concatenate([x0, x1])
    c = np.r_[np.zeros(len(x0), dtype=int), np.ones(len(x1), dtype=int)]
    edges = np.quantile(x, np.linspace(0, 1, bins + 1)[1:-1])
    b = np.searchsorted(edges, x, side="right")
    joint = np.zeros((bins, 2))
    np.add.at(joint, (b, c), 1.0)
    joint /= joint.sum()
    pb = joint.sum(1, keepdims=True)
    pc = joint.sum(0, keepdims=True)
    nz = joint > 0
    return float(max(0.0, (joint[nz] * np.log(joint[nz] / (pb @ pc)[nz])).sum()))


def _corr(X: np.ndarray) -> np.ndarray:
    sd = X.std(axis=0)
    Xc = X - X.mean(axis=0)
    safe = np.where(sd > 0, sd, 1.0)
    R = (Xc.T @ Xc) / len(X) / np.outer(safe, safe)
    R[:, sd == 0] = 0.0
    R[sd == 0, :] = 0.0
    return R


def _offdiag_rescale(M: np.ndarray) -> np.ndarray:
    n = len(M)
    iu = np.triu_indices(n, 1)
    vals = rescale(M[iu])
    out = np.zeros_like(M)
    out[iu] = vals
    return out + out.T


@dataclass(frozen=True)
class Scores:
    s: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    zero_variance: tuple[int, ...] = ()


def compute_scores(d: TwoRegimeDataset, w1: float = 1.0, w2: float = 1.0) -> Scores:
    X0, X1 = d.samples0, d.samples1
    if len(X0) == 0 or len(X1) == 0:
        raise ValueError("both regimes need at least one row")
    if w1 < 0 or w2 < 0:
        raise ValueError("weights must be non-negative")
    n = d.n_vars
    mu0, mu1 = X0.mean(0), X1.mean(0)
    pooled_sd = np.sqrt((X0.var(0) + X1.var(0)) / 2)
    flat = pooled_sd <= 0
    shift = np.where(flat, 0.0, np.abs(mu0 - mu1) / np.where(flat, 1.0, pooled_sd))
    mi = np.array([regime_mi(X0[:, i], X1[:, i]) for i in range(n)])
    s = rescale(w1 * shift + w2 * mi)

    gamma = _offdiag_rescale(np.abs(_corr(X0) - _corr(X1)))

    X = np.vstack([X0, X1])
    R = _corr(X)
    prec = np.linalg.inv(R + PRECISION_RIDGE * np.eye(n))
    alpha = _offdiag_rescale(np.abs(prec))
    if flat.any():
        log.warning("zero-variance columns %s: shift term set to 0", np.flatnonzero(flat).tolist())
    return Scores(s, gamma, alpha, tuple(int(i) for i in np.flatnonzero(flat)))


@dataclass(frozen=True)
class SamplerState:
    n: int
    k: int
    s: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    node_counts: np.ndarray
    pair_counts: np.ndarray
    q: float = 2.0
    r: float = 2.0
    rho: float = 0.3
    lam: float = 0.5
    beta_cov: float = 1.0

    @classmethod
    def initial(cls, scores: Scores, k: int = 5, **hyper) -> "SamplerState":
        n = len(scores.s)
        if not 1 <= k <= n:
            raise ValueError(f"subset size k={k} must lie in [1, {n}]")
        return cls(
            n=n,
            k=k,
            s=np.asarray(scores.s, float),
            gamma=np.asarray(scores.gamma, float),
            alpha=np.asarray(scores.alpha, float),
            node_counts=np.zeros(n, dtype=int),
            pair_counts=np.zeros((n, n), dtype=int),
            **hyper,
        )

    def decayed(self) -> tuple[np.ndarray, np.ndarray]:
        with np.errstate(over="ignore"):
            a = self.alpha / np.power(float(self.q), self.pair_counts)
            g = self.gamma / np.power(float(self.r), self.pair_counts)
        np.fill_diagonal(a, 0.0)
        np.fill_diagonal(g, 0.0)
        return a, g


def _categorical(w: np.ndarray, allowed: np.ndarray, rng) -> tuple[int, bool]:
    w = np.where(allowed, np.maximum(w, 0.0), 0.0)
    tot = w.sum()
    if not np.isfinite(tot) or tot <= 0:
        idx = np.flatnonzero(allowed)
        return int(idx[rng.integers(len(idx))]), True
    return int(rng.choice(len(w), p=w / tot)), False


def sample_subset(st: SamplerState, rng: np.random.Generator) -> tuple[int, ...]:
    """Draw one subset of size ``k``; returned as a sorted tuple."""
    a, g = st.decayed()
    bonus = np.power(1.0 + st.node_counts, st.beta_cov)
    free = np.ones(st.n, dtype=bool)
    seed_w = ((1 - st.rho) * a.sum(1) + st.rho * st.s) / bonus
    v, fell = _categorical(seed_w, free, rng)
    chosen = [v]
    free[v] = False
    while len(chosen) < st.k:
        idx = np.array(chosen)
        w = st.lam * a[idx].sum(0) + (1 - st.lam) * (st.s + g[idx].mean(0))
        v, f = _categorical(w / bonus, free, rng)
        fell |= f
        chosen.append(v)
        free[v] = False
    if fell:
        log.debug("sampler fell back to a uniform draw for subset %s", sorted(chosen))
    return tuple(sorted(chosen))


def update_state(st: SamplerState, S) -> SamplerState:
    S = sorted(set(int(v) for v in S))
    if any(not 0 <= v < st.n for v in S):
        raise ValueError("subset node out of range")
    nc = st.node_counts.copy()
    pc = st.pair_counts.copy()
    nc[S] += 1
    for x in range(len(S)):
        for y in range(x + 1, len(S)):
            pc[S[x], S[y]] += 1
            pc[S[y], S[x]] += 1
    return replace(st, node_counts=nc, pair_counts=pc)


def sample_subsets(st: SamplerState, T: int, rng) -> tuple[list[tuple[int, ...]], SamplerState]:
    out = []
    for _ in range(T):
        S = sample_subset(st, rng)
        st = update_state(st, S)
        out.append(S)
    return out, st
