import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sbtrees.continuum import sb_construct
from sbtrees.discrete import RootedTree, build_dtree, sample_dtree
from sbtrees.errors import DisconnectedStage, Empty, NotProbability, TooLarge, UnknownVertex
from sbtrees.metrics import (
    Covering,
    check_distance_matrix,
    covering_number,
    distance_matrix_segments,
    distance_matrix_tree,
    gh_bruteforce,
    greedy_covering_number,
    hausdorff_stage,
    height,
    is_isometric,
    ks_distance,
    levy_distance,
    prokhorov_classical,
    prokhorov_paper,
    winf_quantile,
)
from sbtrees.params import validate_degree_sequence

from .conftest import FIG1_DEGREES, FIG1_TUPLE, degree_lists
from .oracles import bfs_distances, levy_grid, paper_prokhorov_bruteforce

FIG1 = validate_degree_sequence(FIG1_DEGREES, allow_unsorted=True)
PATH = RootedTree(np.array([-1, 0, 1]), 0)


def fig1_tree():
    return build_dtree(FIG1, FIG1_TUPLE)[0]


# ---------------------------------------------------------------------------
# trees


def test_tree_matrix_examples(backend):
    assert distance_matrix_tree(PATH, [1], backend=backend).tolist() == [[0]]
    assert distance_matrix_tree(PATH, [0, 2], backend=backend)[0, 1] == 2
    assert distance_matrix_tree(fig1_tree(), [5, 7], backend=backend)[0, 1] == 4
    with pytest.raises(UnknownVertex):
        distance_matrix_tree(PATH, [3])


@given(degree_lists(min_s=2, max_s=40), st.integers(0, 2**32 - 1))
def test_tree_matrix_vs_bfs(raw, seed):
    d = validate_degree_sequence(raw)
    gen = np.random.default_rng(seed)
    t, _ = sample_dtree(d, gen)
    pts = gen.choice(d.s, size=min(d.s, 6), replace=False)
    m = distance_matrix_tree(t, pts)
    check_distance_matrix(m)
    for i, p in enumerate(pts):
        dist = bfs_distances(t.edges(), d.s, int(p))
        assert [dist[q] for q in pts] == m[i].tolist()


def test_segment_matrix():
    t = sb_construct([1.0, 2.5], [0.4])
    m = distance_matrix_segments(t, [0.0, 0.2, 2.0])
    assert m[1, 2] == pytest.approx(1.2)
    check_distance_matrix(m)


def test_check_distance_matrix_rejects():
    with pytest.raises(ValueError):
        check_distance_matrix([[0, 1], [2, 0]])
    with pytest.raises(ValueError):
        check_distance_matrix([[0, 1, 5], [1, 0, 1], [5, 1, 0]])


def test_hausdorff_examples():
    t = fig1_tree()
    assert hausdorff_stage(t, t.vertices) == 0
    assert hausdorff_stage(PATH, [0]) == 2
    assert hausdorff_stage(t, [3, 4, 1, 5]) == 2
    with pytest.raises(DisconnectedStage):
        hausdorff_stage(t, [3, 1])


def test_hausdorff_monotone_in_stage():
    t = fig1_tree()
    stages = [[3], [3, 4], [3, 4, 1], [3, 4, 1, 5], [3, 4, 1, 5, 2, 0]]
    vals = [hausdorff_stage(t, s) for s in stages]
    assert all(vals[i] >= vals[i + 1] for i in range(len(vals) - 1))


def test_height_examples():
    assert height(RootedTree(np.array([-1]), 0)) == 0
    assert height(PATH) == 2
    assert height(fig1_tree()) == 3


# ---------------------------------------------------------------------------
# measures


def test_prokhorov_examples():
    assert prokhorov_paper([0.0, 1.0], [0.5, 0.5], [0.0, 1.0], [0.5, 0.5]) == 0.0
    assert prokhorov_paper([0.0], [1.0], [1.0], [1.0]) == 1.0
    # no additive eps: half the mass of the first law must travel to 0
    assert prokhorov_paper([0.0, 1.0], [0.5, 0.5], [0.0], [1.0]) == 1.0
    assert prokhorov_classical([0.0, 1.0], [0.5, 0.5], [0.0], [1.0]) == pytest.approx(0.5)
    assert prokhorov_classical([0.0], [1.0], [1.0], [1.0]) == 1.0
    with pytest.raises(NotProbability):
        prokhorov_paper([0.0], [0.5], [0.0], [1.0])


weighted = st.lists(st.tuples(st.integers(0, 8), st.integers(1, 5)), min_size=1, max_size=5)


def _norm(pairs):
    x = [float(p) for p, _ in pairs]
    w = np.asarray([float(q) for _, q in pairs])
    return x, (w / w.sum()).tolist()


@given(weighted, weighted)
def test_prokhorov_paper_vs_definition(p, q):
    xa, wa = _norm(p)
    xb, wb = _norm(q)
    got = prokhorov_paper(xa, wa, xb, wb)
    assert got == pytest.approx(paper_prokhorov_bruteforce(xa, wa, xb, wb))
    assert got == pytest.approx(winf_quantile(xa, wa, xb, wb))
    cl = prokhorov_classical(xa, wa, xb, wb)
    assert cl <= got + 1e-12 and cl <= 1.0


def test_ks_levy_examples():
    assert ks_distance([1, 2, 3], [1, 2, 3]) == 0.0
    assert levy_distance([1, 2, 3], [1, 2, 3]) == 0.0
    assert ks_distance([0.0], [1.0]) == 1.0
    for c in (0.3, 0.75, 2.0):
        assert levy_distance([0.0], [c]) == pytest.approx(min(c, 1.0), abs=1e-9)
    with pytest.raises(Empty):
        ks_distance([], [1.0])


@pytest.mark.parametrize("seed", range(4))
def test_levy_vs_grid_oracle(seed):
    gen = np.random.default_rng(seed)
    a = np.round(gen.random(4), 3).tolist()
    b = np.round(gen.random(3) + 0.2, 3).tolist()
    assert levy_distance(a, b) == pytest.approx(levy_grid(a, b), abs=2e-4)


samples = st.lists(st.integers(0, 20).map(lambda v: v / 4), min_size=1, max_size=8)


@given(samples, samples, samples)
def test_ks_levy_pseudometric(a, b, c):
    for dist in (ks_distance, levy_distance):
        ab, bc, ac = dist(a, b), dist(b, c), dist(a, c)
        assert ab == pytest.approx(dist(b, a), abs=1e-9)
        assert ac <= ab + bc + 1e-9


# ---------------------------------------------------------------------------
# finite metric spaces


def _euclid(pts):
    pts = np.asarray(pts, dtype=float)
    return np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))


def test_covering_examples():
    m = _euclid(np.random.default_rng(0).random((6, 2)))
    assert covering_number(m, m.max()) == Covering(1, True)
    far = _euclid([[0, 0], [10, 0], [0, 10], [10, 10]])
    assert covering_number(far, 1.0).count == 4
    big = _euclid(np.random.default_rng(1).random((20, 2)))
    assert covering_number(big, 0.3).exact is False


def test_greedy_radius_two_approximation():
    # greedy centres are pairwise > eps apart, so no closed eps/2 ball holds two of them
    gen = np.random.default_rng(2)
    for _ in range(200):
        m = _euclid(gen.random((8, 2)))
        eps = float(gen.uniform(0.05, 0.6))
        g = greedy_covering_number(m, eps)
        assert covering_number(m, eps).count <= g <= covering_number(m, eps / 2).count


def test_greedy_count_factor_two_fails():
    # a count bound greedy(eps) <= 2 exact(eps) does not hold: start on the rim of a star
    m = _euclid([[1, 0], [-1, 0], [0, 1], [0, -1], [0, 0]])
    assert covering_number(m, 1.0).count == 1
    assert greedy_covering_number(m, 1.0) == 4


def test_gh_examples():
    a = np.array([[0.0, 2.0], [2.0, 0.0]])
    b = np.array([[0.0, 5.0], [5.0, 0.0]])
    assert gh_bruteforce(a, a) == 0.0
    assert gh_bruteforce(a, b) == pytest.approx(1.5)
    assert gh_bruteforce([[0.0]], a) == pytest.approx(1.0)
    with pytest.raises(TooLarge):
        gh_bruteforce(np.zeros((8, 8)), a)


@given(st.integers(0, 2**32 - 1))
def test_gh_bounds_and_symmetry(seed):
    gen = np.random.default_rng(seed)
    a = _euclid(gen.random((int(gen.integers(1, 6)), 2)))
    b = _euclid(gen.random((int(gen.integers(1, 6)), 2)))
    g = gh_bruteforce(a, b)
    assert g == pytest.approx(gh_bruteforce(b, a))
    assert g <= 0.5 * max(a.max(), b.max()) + 1e-12
    assert g >= 0.5 * abs(a.max() - b.max()) - 1e-12


def test_is_isometric():
    a = np.array([[0, 1, 2], [1, 0, 1], [2, 1, 0]])
    p = [2, 0, 1]
    assert is_isometric(a, a[np.ix_(p, p)])
    assert not is_isometric(a, np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0]]))
