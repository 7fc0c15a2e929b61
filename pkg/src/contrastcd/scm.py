"""Random DAGs, two-regime structural causal models and sampling."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Sequence

import numpy as np

from .graphs import Dag, GraphInputError

KINDS = ("linear", "polynomial", "sigmoid", "nn", "nn_additive")

BASE_RANGE = (0.5, 2.0)
INTERV_RANGE = (2.0, 4.0)
NN_HIDDEN = 10
NN_INTERV_SCALE = 2.0
NOISE_SCALE = 0.4
CLAMP = 1e6
POLY_FLOOR = 1e-3


def sample_dag(n: int, expected_edges: float, rng: np.random.Generator) -> Dag:
    """Random DAG: random order, forward edges with fixed probability, then
    one order-consistent edge between consecutive disconnected components."""
    if n < 2:
        raise GraphInputError("sample_dag needs n >= 2")
    max_edges = comb(n, 2)
    if expected_edges < 0 or expected_edges > max_edges:
        raise GraphInputError(f"expected_edges must lie in [0, {max_edges}]")
    p = expected_edges / max_edges
    order = rng.permutation(n)
    pos = np.empty(n, dtype=int)
    pos[order] = np.arange(n)
    edges = set()
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < p:
                edges.add((int(order[a]), int(order[b])))

    # union-find over the skeleton
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        parent[find(a)] = find(b)
    comps: dict[int, list[int]] = {}
    for v in range(n):
        comps.setdefault(find(v), []).append(v)
    groups = sorted(comps.values(), key=lambda c: min(pos[v] for v in c))
    for prev, cur in zip(groups, groups[1:]):
        u = prev[int(rng.integers(len(prev)))]
        w = cur[int(rng.integers(len(cur)))]
        edges.add((u, w) if pos[u] < pos[w] else (w, u))
    return Dag(n, frozenset(edges))


def sample_targets(dag: Dag, p_interv: float, rng: np.random.Generator) -> frozenset[int]:
    if not 0.0 <= p_interv <= 1.0:
        raise GraphInputError("p_interv must lie in [0, 1]")
    roots = set(dag.roots())
    draws = rng.random(dag.n)
    return frozenset(v for v in range(dag.n) if v not in roots and draws[v] < p_interv)


@dataclass(frozen=True, eq=False)
class Mechanism:
    """One node's structural equation.

    ``weights`` maps block names to arrays: ``W`` (linear, sigmoid),
    ``W0, W1, W2`` (polynomial), ``W_in, W_out`` (nn kinds). Roots carry
    ``kind="root"`` and no weights.
    """

    kind: str
    parents: tuple[int, ...]
    sigma2: float
    weights: dict = field(default_factory=dict)

    def same_as(self, other: "Mechanism") -> bool:
        if (self.kind, self.parents, self.sigma2) != (other.kind, other.parents, other.sigma2):
            return False
        if self.weights.keys() != other.weights.keys():
            return False
        return all(
            np.asarray(self.weights[k]).tobytes() == np.asarray(other.weights[k]).tobytes()
            for k in self.weights
        )

    def __call__(self, X: np.ndarray, eps: np.ndarray) -> np.ndarray:
        w = self.weights
        if self.kind == "linear":
            return X @ w["W"] + eps
        if self.kind == "polynomial":
            det = w["W0"] + X @ w["W1"] + (X**2) @ w["W2"]
            return det * eps + POLY_FLOOR * eps
        if self.kind == "sigmoid":
            return (1.0 / (1.0 + np.exp(-X))) @ w["W"] + eps
        if self.kind == "nn":
            H = np.tanh(np.column_stack([X, eps]) @ w["W_in"])
            return H @ w["W_out"]
        if self.kind == "nn_additive":
            return np.tanh(X @ w["W_in"]) @ w["W_out"] + eps
        raise GraphInputError(f"unknown mechanism kind {self.kind!r}")


@dataclass(frozen=True, eq=False)
class TwoRegimeScm:
    dag: Dag
    targets: frozenset[int]
    regime0_mech: tuple[Mechanism, ...]
    regime1_mech: tuple[Mechanism, ...]

    def mechanisms(self, regime: int) -> tuple[Mechanism, ...]:
        if regime not in (0, 1):
            raise GraphInputError("regime must be 0 or 1")
        return self.regime0_mech if regime == 0 else self.regime1_mech


def _signed_uniform(rng, size, lo_hi):
    lo, hi = lo_hi
    return rng.uniform(lo, hi, size=size) * rng.choice([-1.0, 1.0], size=size)


def _draw_weights(kind: str, p: int, rng, intervened: bool) -> dict:
    rng_range = INTERV_RANGE if intervened else BASE_RANGE
    if kind in ("linear", "sigmoid"):
        return {"W": _signed_uniform(rng, p, rng_range)}
    if kind == "polynomial":
        return {
            "W0": float(_signed_uniform(rng, 1, rng_range)[0]),
            "W1": _signed_uniform(rng, p, rng_range),
            "W2": _signed_uniform(rng, p, rng_range),
        }
    if kind in ("nn", "nn_additive"):
        fan_in = p + 1 if kind == "nn" else p
        scale = NN_INTERV_SCALE if intervened else 1.0
        W_in = scale * rng.standard_normal((fan_in, NN_HIDDEN)) / np.sqrt(fan_in)
        W_out = scale * rng.standard_normal(NN_HIDDEN) / np.sqrt(NN_HIDDEN)
        return {"W_in": W_in, "W_out": W_out}
    raise GraphInputError(f"unknown mechanism kind {kind!r}")


def build_scm(
    dag: Dag,
    targets,
    family: str | Sequence[str],
    rng: np.random.Generator,
) -> TwoRegimeScm:
    """Draw regime-0 mechanisms, then redraw weights of targets for regime 1.

    ``family`` is a kind name, ``"mixture"`` (per-node uniform over all
    kinds) or a sequence of kinds to choose from per node.
    """
    targets = frozenset(int(t) for t in targets)
    if isinstance(family, str):
        choices = KINDS if family == "mixture" else (family,)
    else:
        choices = tuple(family)
    for kind in choices:
        if kind not in KINDS:
            raise GraphInputError(f"unknown mechanism family {kind!r}")
    roots = set(dag.roots())
    if targets & roots:
        raise GraphInputError("targets may not contain root nodes")
    if any(not 0 <= t < dag.n for t in targets):
        raise GraphInputError("target out of range")

    mech0, mech1 = [], []
    for v in range(dag.n):
        pa = tuple(dag.parents(v))
        sigma2 = float(rng.uniform(1.0, 2.0))
        if not pa:
            m = Mechanism("root", pa, sigma2)
            mech0.append(m)
            mech1.append(m)
            continue
        kind = choices[int(rng.integers(len(choices)))] if len(choices) > 1 else choices[0]
        m = Mechanism(kind, pa, sigma2, _draw_weights(kind, len(pa), rng, False))
        mech0.append(m)
        if v in targets:
            mech1.append(Mechanism(kind, pa, sigma2, _draw_weights(kind, len(pa), rng, True)))
        else:
            mech1.append(m)
    return TwoRegimeScm(dag, targets, tuple(mech0), tuple(mech1))


def simulate(
    scm: TwoRegimeScm,
    regime: int,
    n_samples: int,
    rng: np.random.Generator,
    return_info: bool = False,
):
    """Ancestral sampling of one regime.

    Values are clamped to ``±1e6``; with ``return_info`` the number of
    clamped entries is returned alongside the matrix.
    """
    if n_samples < 1:
        raise GraphInputError("n_samples must be >= 1")
    mechs = scm.mechanisms(regime)
    n = scm.dag.n
    X = np.zeros((n_samples, n))
    clamped = 0
    for v in scm.dag.order():
        m = mechs[v]
        if m.kind == "root":
            col = rng.uniform(-2.0, 2.0, size=n_samples)
        else:
            eps = NOISE_SCALE * rng.normal(0.0, np.sqrt(m.sigma2), size=n_samples)
            with np.errstate(over="ignore", invalid="ignore"):
                col = m(X[:, list(m.parents)], eps)
            bad = ~np.isfinite(col) | (np.abs(col) > CLAMP)
            if bad.any():
                clamped += int(bad.sum())
                col = np.where(np.isnan(col), 0.0, col)
                col = np.clip(col, -CLAMP, CLAMP)
        X[:, v] = col
    return (X, clamped) if return_info else X


@dataclass
class TwoRegimeDataset:
    samples0: np.ndarray
    samples1: np.ndarray
    truth_dag: Dag | None = None
    truth_targets: frozenset[int] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples0 = np.asarray(self.samples0, dtype=float)
        self.samples1 = np.asarray(self.samples1, dtype=float)
        if self.samples0.ndim != 2 or self.samples1.ndim != 2:
            raise GraphInputError("sample matrices must be 2-D")
        if self.samples0.shape[1] != self.samples1.shape[1]:
            raise GraphInputError("regimes disagree on column count")
        if not (np.isfinite(self.samples0).all() and np.isfinite(self.samples1).all()):
            raise GraphInputError("dataset contains non-finite values")

    @property
    def n_vars(self) -> int:
        return self.samples0.shape[1]

    def regime(self, c: int) -> np.ndarray:
        return self.samples0 if c == 0 else self.samples1


def generate_dataset(
    n: int,
    expected_edges: float,
    family,
    n_samples: int,
    rng: np.random.Generator,
    p_interv: float = 0.4,
) -> tuple[TwoRegimeDataset, TwoRegimeScm]:
    dag = sample_dag(n, expected_edges, rng)
    targets = sample_targets(dag, p_interv, rng)
    scm = build_scm(dag, targets, family, rng)
    X0, c0 = simulate(scm, 0, n_samples, rng, return_info=True)
    X1, c1 = simulate(scm, 1, n_samples, rng, return_info=True)
    ds = TwoRegimeDataset(X0, X1, dag, targets, {"clamped": c0 + c1})
    return ds, scm
