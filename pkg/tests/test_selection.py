import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdkit.containers import make_grid
from qdkit.domain import Individual, make_rng
from qdkit.selection import (CuriosityConfig, ScoreKind, curiosity_update, novelty_score, refresh_novelty,
                             score_weights, select_uniform, select_weighted)


def ind(b, f=0.0, **kw):
    return Individual(genotype=np.zeros(1), fitness=f, descriptor=np.asarray(b, float), **kw)


def grid_with(points):
    g = make_grid((10, 10), 0, 1)
    for p in points:
        g.add(ind(p))
    return g


def spread(n):
    return [((i + 0.5) / 10, 0.05) for i in range(n)]


def test_uniform_singleton_and_empty():
    g = grid_with([(0.5, 0.5)])
    picks = select_uniform(g, 5, make_rng(0))
    assert len(picks) == 5 and all(p is picks[0] for p in picks)
    assert picks[0].selection_count == 5
    with pytest.raises(ValueError):
        select_uniform(make_grid((2, 2), 0, 1), 1, make_rng(0))
    with pytest.raises(ValueError):
        select_weighted(make_grid((2, 2), 0, 1), ScoreKind.CURIOSITY, 1, make_rng(0))


def test_uniform_binomial_counts():
    g = grid_with(spread(10))
    n = 100000
    select_uniform(g, n, make_rng(1))
    sd = np.sqrt(n * 0.1 * 0.9)
    for e in g.elites():
        assert abs(e.selection_count - n / 10) < 3 * sd


def test_weighted_equal_scores_is_uniform():
    g = grid_with(spread(4))
    n = 40000
    select_weighted(g, ScoreKind.CURIOSITY, n, make_rng(2))
    sd = np.sqrt(n * 0.25 * 0.75)
    assert all(abs(e.selection_count - n / 4) < 4 * sd for e in g.elites())


def test_curiosity_ratio_three_to_one():
    # weights are shifted so the lowest score sits at eps; a third elite at 0
    # pins the shift so that curiosities 3 and 1 keep their 3:1 weight ratio
    a, b = ind((0.1, 0.1), curiosity=3.0), ind((0.9, 0.9), curiosity=1.0)
    c = ind((0.5, 0.5), curiosity=0.0)
    n = 80000
    picks = select_weighted([a, b, c], ScoreKind.CURIOSITY, n, make_rng(3))
    na = sum(p is a for p in picks)
    nb = sum(p is b for p in picks)
    assert abs(na / nb - 3.0) < 0.1


def test_inverse_count_weights():
    a, b = ind((0, 0)), ind((1, 1), selection_count=4, offspring_added=5)
    w = score_weights([a, b], ScoreKind.INVERSE_COUNT)
    assert np.allclose(w, [1.0, 0.1])
    n = 110000
    picks = select_weighted([a, b], ScoreKind.INVERSE_COUNT, n, make_rng(4))
    ratio = sum(p is a for p in picks) / sum(p is b for p in picks)
    assert abs(ratio - 10) < 0.5


@settings(max_examples=50)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=12), st.sampled_from(list(ScoreKind)))
def test_weights_finite_nonnegative_and_ordered(scores, kind):
    pool = [ind((0, 0), f=s, curiosity=s, novelty=s, selection_count=int(abs(s)) % 7) for s in scores]
    w = score_weights(pool, kind)
    assert np.all(np.isfinite(w)) and np.all(w > 0)
    if kind is not ScoreKind.INVERSE_COUNT:
        for i in range(len(w)):
            for j in range(len(w)):
                if scores[i] > scores[j]:
                    assert w[i] >= w[j]


@settings(max_examples=30)
@given(st.integers(1, 8), st.integers(1, 50), st.sampled_from(list(ScoreKind)))
def test_selection_only_returns_members(n, batch, kind):
    g = grid_with(spread(n))
    members = {id(e) for e in g.elites()}
    rng = make_rng(n)
    assert all(id(p) in members for p in select_uniform(g, batch, rng))
    assert all(id(p) in members for p in select_weighted(g, kind, batch, rng))


def test_novelty_examples():
    assert novelty_score((3, 4), [(0, 0)], 1) == 5.0
    assert novelty_score((1, 1), [(1, 1)], 1) == 0.0
    assert novelty_score((1, 0), [(0, 0), (2, 0), (10, 0)], 2) == 1.0
    assert novelty_score((1, 0), [(1, 0), (4, 0)], 1, self_index=0) == 3.0
    with pytest.raises(ValueError):
        novelty_score((0, 0), np.empty((0, 2)), 1)


coords = st.tuples(st.floats(-10, 10), st.floats(-10, 10))


@settings(max_examples=50)
@given(coords, st.lists(coords, min_size=1, max_size=10), st.integers(1, 5), coords, st.randoms())
def test_novelty_permutation_and_translation(q, ref, k, shift, rnd):
    base = novelty_score(q, ref, k)
    perm = list(ref)
    rnd.shuffle(perm)
    assert novelty_score(q, perm, k) == pytest.approx(base, abs=1e-9)
    s = np.asarray(shift)
    moved = novelty_score(np.asarray(q) + s, np.asarray(ref) + s, k)
    assert moved == pytest.approx(base, abs=1e-9)


def test_curiosity_update_rules():
    cfg = CuriosityConfig(reward=1.0, penalty=0.5, floor=-10)
    p = ind((0, 0))
    assert curiosity_update(p, True, cfg) == 1.0 and p.offspring_added == 1
    q = ind((0, 0))
    assert curiosity_update(q, False, cfg) == -0.5
    r = ind((0, 0), curiosity=-10.0)
    assert curiosity_update(r, False, cfg) == -10.0


@given(st.lists(st.booleans(), max_size=60))
def test_curiosity_bounded_below(outcomes):
    cfg = CuriosityConfig()
    p = ind((0, 0))
    for added in outcomes:
        assert curiosity_update(p, added, cfg) >= cfg.floor


def test_curiosity_config_validation():
    with pytest.raises(ValueError):
        CuriosityConfig(floor=0.5)
    with pytest.raises(ValueError):
        CuriosityConfig(reward=0)


def test_refresh_novelty_examples():
    solo = grid_with([(0.5, 0.5)])
    refresh_novelty(solo, 3)
    assert solo.elites()[0].novelty == pytest.approx(np.sqrt(2))
    pair = make_grid((10, 10), 0, 4)
    pair.add(ind((0.1, 0.1)))
    pair.add(ind((2.1, 0.1)))
    refresh_novelty(pair, 1)
    assert [e.novelty for e in pair.elites()] == pytest.approx([2.0, 2.0])
    g = grid_with([(0.05, 0.05), (0.55, 0.05), (0.95, 0.95)])
    refresh_novelty(g, 1)
    first = g.elites()[0]
    before = first.novelty
    g.add(ind((0.06, 0.15)))
    refresh_novelty(g, 1)
    assert first.novelty < before
