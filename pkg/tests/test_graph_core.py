import random
from itertools import combinations

import pytest
from hypothesis import given, settings, strategies as st

from contrastcd.graphs import (
    REGIME,
    AugmentedDag,
    ClosureConflict,
    Dag,
    GraphInputError,
    Pdag,
    cpdag_of,
    d_separated,
    evaluate,
    extensions,
    is_acyclic,
    meek_close,
    pattern_of,
    possible_descendants,
)

from _brute import PathDsep, all_dags, consistent_extensions, intersect, markov_class, v_structures


def P(n, directed=(), undirected=()):
    return Pdag(n, frozenset(directed), frozenset(tuple(sorted(e)) for e in undirected))


@st.composite
def dags(draw, max_n=6):
    n = draw(st.integers(1, max_n))
    order = draw(st.permutations(range(n)))
    pos = {v: i for i, v in enumerate(order)}
    pairs = [(a, b) for a, b in combinations(range(n), 2)]
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    edges = {(a, b) if pos[a] < pos[b] else (b, a) for (a, b), m in zip(pairs, mask) if m}
    return Dag(n, frozenset(edges))


# -- is_acyclic --------------------------------------------------------------


def test_is_acyclic_examples():
    assert is_acyclic(set(), 3)
    assert not is_acyclic({(0, 1), (1, 2), (2, 0)}, 3)
    assert is_acyclic({(0, 1), (0, 2), (1, 2)}, 3)


def test_is_acyclic_range_error():
    with pytest.raises(GraphInputError):
        is_acyclic({(0, 5)}, 3)


def test_dag_rejects_cycles_and_self_loops():
    with pytest.raises(GraphInputError):
        Dag(2, frozenset({(0, 1), (1, 0)}))
    with pytest.raises(GraphInputError):
        Dag(2, frozenset({(1, 1)}))


# -- d-separation ------------------------------------------------------------


def test_dsep_examples():
    chain = Dag(3, frozenset({(0, 1), (1, 2)}))
    assert d_separated(chain, 0, 2, {1})
    coll = Dag(3, frozenset({(0, 1), (2, 1)}))
    assert d_separated(coll, 0, 2, set())
    assert not d_separated(coll, 0, 2, {1})
    aug = AugmentedDag(Dag(2, frozenset({(0, 1)})), frozenset({1}))
    assert d_separated(aug, REGIME, 0, set())
    assert not d_separated(aug, REGIME, 1, set())
    # the same graph written out with C as node 2
    assert PathDsep(3, {(0, 1), (2, 1)}).separated(2, 0, set())


def test_dsep_overlap_errors():
    g = Dag(3, frozenset({(0, 1)}))
    with pytest.raises(GraphInputError):
        d_separated(g, 0, 0, set())
    with pytest.raises(GraphInputError):
        d_separated(g, 0, 1, {1})


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_dsep_exhaustive_small(n):
    for edges in all_dags(n):
        g = Dag(n, edges)
        bf = PathDsep(n, edges)
        for a, b in combinations(range(n), 2):
            rest = [v for v in range(n) if v not in (a, b)]
            for r in range(len(rest) + 1):
                for Z in combinations(rest, r):
                    assert d_separated(g, a, b, Z) == bf.separated(a, b, set(Z)), (edges, a, b, Z)


def test_dsep_random_n8():
    rnd = random.Random(8)
    for _ in range(1000):
        order = list(range(8))
        rnd.shuffle(order)
        edges = {(order[i], order[j]) for i in range(8) for j in range(i + 1, 8) if rnd.random() < 0.3}
        g = Dag(8, frozenset(edges))
        a, b = rnd.sample(range(8), 2)
        rest = [v for v in range(8) if v not in (a, b)]
        Z = {v for v in rest if rnd.random() < 0.35}
        assert d_separated(g, a, b, Z) == PathDsep(8, edges).separated(a, b, Z)


# -- CPDAG / Meek ------------------------------------------------------------


def test_cpdag_examples():
    assert cpdag_of(Dag(3, frozenset({(0, 1), (1, 2)}))) == P(3, undirected={(0, 1), (1, 2)})
    assert cpdag_of(Dag(3, frozenset({(0, 1), (2, 1)}))) == P(3, directed={(0, 1), (2, 1)})
    tri = Dag(3, frozenset({(0, 1), (0, 2), (1, 2)}))
    assert cpdag_of(tri) == P(3, undirected={(0, 1), (0, 2), (1, 2)})


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_cpdag_matches_mec_intersection(n):
    for edges in all_dags(n):
        members = markov_class(n, edges)
        d, u = intersect(members)
        c = cpdag_of(Dag(n, edges))
        assert (c.directed, c.undirected) == (d, u)
        for m in members:
            assert cpdag_of(Dag(n, m)) == c


def test_meek_examples():
    p = P(3, undirected={(0, 1), (1, 2)})
    assert meek_close(p, {(0, 1)}).directed == {(0, 1), (1, 2)}
    tri = P(3, undirected={(0, 1), (1, 2), (0, 2)})
    assert meek_close(tri, {(0, 1), (1, 2)}).directed == {(0, 1), (1, 2), (0, 2)}
    q = meek_close(p)
    assert meek_close(q) == q


def test_meek_conflicts():
    p = P(3, directed={(1, 0)}, undirected={(1, 2)})
    with pytest.raises(ClosureConflict) as e:
        meek_close(p, {(0, 1)})
    assert e.value.kind == "orientation"
    tri = P(3, undirected={(0, 1), (1, 2), (0, 2)})
    with pytest.raises(ClosureConflict) as e:
        meek_close(tri, {(0, 1), (1, 2), (2, 0)})
    assert e.value.kind == "cycle"
    assert e.value.edges
    with pytest.raises(GraphInputError):
        meek_close(P(3, undirected={(0, 1)}), {(1, 2)})


@pytest.mark.parametrize("n", [2, 3, 4])
def test_meek_background_never_contradicts_extensions(n):
    """Closing a CPDAG under background drawn from a true member must equal
    the orientation intersection of all consistent extensions."""
    rnd = random.Random(n)
    for edges in all_dags(n):
        c = cpdag_of(Dag(n, edges))
        und = sorted(c.undirected)
        truth_dir = [(a, b) if (a, b) in edges else (b, a) for a, b in und]
        bg = {e for e in truth_dir if rnd.random() < 0.5}
        closed = meek_close(c, bg)
        exts = consistent_extensions(n, c.directed | bg, set(und) - {tuple(sorted(e)) for e in bg})
        assert exts, "true DAG is always an extension"
        d, u = intersect(exts)
        assert closed.directed == d
        assert closed.undirected == u
        assert meek_close(closed) == closed


@given(dags(max_n=6))
@settings(max_examples=150, deadline=None)
def test_cpdag_properties(g):
    c = cpdag_of(g)
    assert c.skeleton() == g.skeleton()
    assert c.directed <= g.edges
    assert v_structures(g.n, g.edges) == v_structures(g.n, set(c.directed), c.skeleton())
    assert meek_close(c) == c
    assert g.edges in {e.edges for e in extensions(c)}


@given(dags(max_n=6))
@settings(max_examples=100, deadline=None)
def test_pattern_of_dag_equals_cpdag(g):
    assert pattern_of(g.to_pdag()) == cpdag_of(g)


# -- possible descendants -----------------------------------------------------


def test_possible_descendants_examples():
    assert possible_descendants(P(3, directed={(0, 1), (1, 2)}), 0) == {1, 2}
    assert possible_descendants(P(3, undirected={(0, 1), (1, 2)}), 0) == {1, 2}
    assert possible_descendants(P(3, directed={(0, 1), (2, 1)}), 1) == set()


@given(dags(max_n=6))
@settings(max_examples=100, deadline=None)
def test_possible_descendants_cover_definite(g):
    c = cpdag_of(g)
    for v in range(g.n):
        definite = set.intersection(*[Dag(g.n, e.edges).descendants(v) for e in extensions(c)])
        assert definite <= possible_descendants(c, v)


# -- evaluation ---------------------------------------------------------------


def test_evaluate_examples():
    truth = Dag(4, frozenset({(0, 1), (1, 2), (2, 3)}))
    r = evaluate(truth, truth)
    assert (r.shd, r.f1) == (0, 1.0)
    r = evaluate(P(4), truth)
    assert r.shd == 3 and r.recall == 0.0
    rev = Dag(4, frozenset({(1, 0), (1, 2), (2, 3)}))
    assert evaluate(rev, truth).shd == 1
    und = P(4, directed={(1, 2), (2, 3)}, undirected={(0, 1)})
    assert evaluate(und, truth).shd == 1
    with pytest.raises(GraphInputError):
        evaluate(P(3), truth)


def test_eval_line_format():
    truth = Dag(2, frozenset({(0, 1)}))
    assert evaluate(truth, truth).line() == "shd=0 f1=1.0000 precision=1.0000 recall=1.0000"


@given(dags(max_n=7))
@settings(max_examples=100, deadline=None)
def test_evaluate_identity(g):
    r = evaluate(g, g)
    assert r.shd == 0 and r.f1 == 1.0


@given(dags(max_n=6), dags(max_n=6))
@settings(max_examples=100, deadline=None)
def test_f1_is_harmonic_mean(a, b):
    if a.n != b.n:
        return
    r = evaluate(a, b)
    hm = 0.0 if r.precision + r.recall == 0 else 2 * r.precision * r.recall / (r.precision + r.recall)
    assert r.f1 == pytest.approx(hm)
    assert 0 <= r.precision <= 1 and 0 <= r.recall <= 1
