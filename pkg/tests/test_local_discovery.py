import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from contrastcd.graphs import GraphInputError
from contrastcd.local_discovery import (
    BWD,
    FWD,
    NONE,
    UND,
    DiscoveryConfig,
    bic_fit,
    decode_votes,
    discover_local,
    majority_vote,
    polybic_scores,
)
from contrastcd.scm import TwoRegimeDataset


def quad_chain(rng, m):
    x0 = rng.uniform(-2, 2, m)
    x1 = x0**2 + 0.5 * rng.normal(size=m)
    x2 = 0.5 * x1**2 + 0.5 * rng.normal(size=m)
    return np.column_stack([x0, x1, x2])


# -- bic_fit ------------------------------------------------------------------


def test_bic_perfect_fit_is_very_negative():
    x = np.linspace(-1, 1, 50)
    exact = bic_fit(3 * x + 1, x, degree=1, ridge=1e-12)
    noisy = bic_fit(3 * x + 1 + np.random.default_rng(0).normal(size=50), x, degree=1, ridge=1e-12)
    assert exact < noisy - 1000


def test_bic_monotone_in_fit_quality():
    rng = np.random.default_rng(1)
    x = rng.normal(size=500)
    e = rng.normal(size=500)
    b = [bic_fit(x + s * e, x, degree=1) for s in (0.1, 0.5, 1.0, 2.0)]
    assert b == sorted(b)


def test_bic_independent_prefers_smaller_model():
    rng = np.random.default_rng(2)
    x, y = rng.normal(size=(2, 10_000))
    assert bic_fit(y, x, degree=2) >= bic_fit(y, x, degree=0)


def test_bic_duplicated_rows():
    rng = np.random.default_rng(3)
    x = rng.normal(size=100)
    y = x**2 + rng.normal(size=100)
    _, m, p, _ = bic_fit(y, x, return_terms=True)
    _, m2, p2, _ = bic_fit(np.r_[y, y], np.r_[x, x], return_terms=True)
    assert (m2, p2) == (2 * m, p) == (200, 3)


def test_bic_too_few_rows():
    with pytest.raises(GraphInputError):
        bic_fit(np.ones(3), np.ones(3), degree=2)


# -- scores -------------------------------------------------------------------


def test_polybic_quadratic_favors_cause():
    rng = np.random.default_rng(4)
    x = rng.uniform(-2, 2, 10_000)
    y = x**2 + 0.3 * rng.normal(size=10_000)
    A = polybic_scores(np.column_stack([x, y]))
    assert A[0, 1] > 0.5 > A[1, 0]
    assert A[0, 0] == A[1, 1] == 0


def test_polybic_independent_near_half():
    vals = [polybic_scores(np.random.default_rng(s).normal(size=(2000, 3)))[0, 1] for s in range(200)]
    assert abs(np.mean(vals) - 0.5) <= 0.05


@given(st.integers(0, 2**32 - 1), st.integers(2, 5))
@settings(max_examples=30, deadline=None)
def test_polybic_range(seed, k):
    A = polybic_scores(np.random.default_rng(seed).normal(size=(60, k)))
    assert A.min() >= 0 and A.max() <= 1
    assert not np.diag(A).any()


def test_polybic_zero_temperature_floor():
    X = np.tile(np.arange(10.0)[:, None], (1, 2))
    A = polybic_scores(X)
    assert np.isfinite(A).all()


def test_polybic_needs_two_columns():
    with pytest.raises(GraphInputError):
        polybic_scores(np.ones((10, 1)))


# -- decoding and voting -------------------------------------------------------


def test_decode_examples():
    A = np.array([[0, 0.9], [0.2, 0]])
    assert decode_votes(A, 0.1, 0.5) == {(0, 1): FWD}
    assert decode_votes(A.T, 0.1, 0.5) == {(0, 1): BWD}
    assert decode_votes(np.array([[0, 0.6], [0.55, 0]]), 0.1, 0.5) == {(0, 1): UND}
    assert decode_votes(np.array([[0, 0.3], [0.2, 0]]), 0.1, 0.5) == {(0, 1): NONE}


def test_majority_examples():
    assert majority_vote([3, 1, 0, 0]) == FWD
    assert majority_vote([2, 2, 0, 0]) == NONE
    assert majority_vote([0, 0, 1, 0]) == UND
    with pytest.raises(ValueError):
        majority_vote([-1, 0, 0, 0])


# -- discover_local -------------------------------------------------------------


def test_identical_regimes_identical_pdags():
    X = quad_chain(np.random.default_rng(5), 500)
    d = TwoRegimeDataset(X, X.copy())
    lp = discover_local(d, (0, 1, 2), rng=np.random.default_rng(1))
    assert lp.pdag0 == lp.pdag1


def test_single_replicate_equals_decode():
    X = quad_chain(np.random.default_rng(6), 400)
    d = TwoRegimeDataset(X, X.copy())
    cfg = DiscoveryConfig(r_boot=1, pattern=False)
    rng = np.random.default_rng(9)
    lp = discover_local(d, (0, 1, 2), cfg, rng)
    rows = np.random.default_rng(9).spawn(2)[0].integers(0, 400, size=400)
    classes = decode_votes(polybic_scores(X[rows]), cfg.epsilon, cfg.tau)
    for (i, j), c in classes.items():
        assert int(np.argmax(lp.votes0[(i, j)])) == c
        assert lp.votes0[(i, j)].sum() == 1.0


def test_regime_independence():
    rng = np.random.default_rng(7)
    X0, X1 = quad_chain(rng, 400), quad_chain(rng, 300)
    base = discover_local(TwoRegimeDataset(X0, X1), (0, 1, 2), rng=np.random.default_rng(3))
    junk = np.random.default_rng(8).normal(size=X1.shape) * 100
    alt = discover_local(TwoRegimeDataset(X0, junk), (0, 1, 2), rng=np.random.default_rng(3))
    assert alt.pdag0 == base.pdag0
    junk0 = np.random.default_rng(8).normal(size=X0.shape) * 100
    alt = discover_local(TwoRegimeDataset(junk0, X1), (0, 1, 2), rng=np.random.default_rng(3))
    assert alt.pdag1 == base.pdag1


def test_deterministic_and_within_subset():
    rng = np.random.default_rng(10)
    X = rng.normal(size=(300, 6))
    X[:, 3] += X[:, 1] ** 2
    d = TwoRegimeDataset(X, X[::-1].copy())
    a = discover_local(d, (1, 3, 4), rng=np.random.default_rng(0))
    b = discover_local(d, (1, 3, 4), rng=np.random.default_rng(0))
    assert (a.pdag0, a.pdag1) == (b.pdag0, b.pdag1)
    for p in (a.pdag0, a.pdag1):
        assert {v for e in p.directed | p.undirected for v in e} <= {1, 3, 4}


def test_discover_local_errors():
    d = TwoRegimeDataset(np.zeros((5, 3)), np.zeros((5, 3)))
    with pytest.raises(GraphInputError):
        discover_local(d, (0,))
    with pytest.raises(GraphInputError):
        discover_local(d, (0, 3))


def test_quadratic_chain_skeleton_recall():
    hits = 0
    for s in range(50):
        rng = np.random.default_rng(s)
        d = TwoRegimeDataset(quad_chain(rng, 10_000), quad_chain(rng, 10_000))
        sk = discover_local(d, (0, 1, 2), rng=np.random.default_rng(s)).pdag0.skeleton()
        hits += ((0, 1) in sk) + ((1, 2) in sk)
    assert hits / 100 >= 0.9
