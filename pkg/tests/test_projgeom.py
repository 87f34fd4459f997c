import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from projwalk import projgeom as P
from projwalk.errors import DegeneratePair, IllConditioned, ZeroVector

finite = st.floats(-10, 10, allow_nan=False)


def vec(d):
    return st.lists(finite, min_size=d, max_size=d).map(np.array).filter(
        lambda v: np.linalg.norm(v) > 1e-3)


def mat(d):
    return st.lists(finite, min_size=d * d, max_size=d * d).map(
        lambda x: np.array(x).reshape(d, d)).filter(lambda g: np.linalg.cond(g) < 1e6)


def test_canonical_sign_and_norm():
    p = P.project([-3.0, 4.0])
    assert np.allclose(p.rep, [0.6, -0.8])
    assert P.project([0.0, -2.0]) == P.project([0.0, 5.0])


def test_zero_vector_rejected():
    with pytest.raises(ZeroVector):
        P.project([0.0, 0.0])


def test_condition_guard():
    with pytest.raises(IllConditioned):
        P.as_matrix([[1.0, 0.0], [0.0, 1e-13]])
    with pytest.raises(ValueError):
        P.as_matrix([[1.0, 2.0, 3.0]])


def test_delta_examples():
    assert P.delta(P.basis(2, 0, dual=True), P.basis(2, 1)) == 0.0
    assert P.delta(P.basis(2, 0, dual=True), P.basis(2, 0)) == 1.0
    assert P.delta(P.project_dual([1, 0]), P.project([1, 1])) == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert P.log_delta([1.0, 0.0], [0.0, 1.0]) == P.LOG_FLOOR


def test_dist_examples():
    assert P.dist(P.basis(2, 0), P.basis(2, 1)) == 1.0
    assert P.dist([1.0, 0.0], [-1.0, 0.0]) == 0.0
    assert P.dist([1.0, 0.0], [math.cos(1e-9), math.sin(1e-9)]) == pytest.approx(1e-9, rel=1e-6)


def test_cocycle_examples():
    assert P.cocycle(np.diag([2.0, 1.0]), [1.0, 0.0]) == pytest.approx(math.log(2), abs=1e-15)
    assert P.cocycle(P.rotation(0.4), [0.3, 0.9]) == pytest.approx(0.0, abs=1e-15)
    assert P.dual_cocycle(np.array([[1.0, 5.0], [0.0, 1.0]]), [1.0, 0.0]) == pytest.approx(
        math.log(math.sqrt(26)), abs=1e-14)


def test_act_and_dual_act():
    g = np.array([[0.0, -1.0], [1.0, 0.0]])
    assert P.act(g, P.basis(2, 0)) == P.basis(2, 1)
    y = P.dual_act(g, P.basis(2, 0, dual=True))
    assert isinstance(y, P.DualProjPoint)
    assert np.allclose(y.rep, P.canonical(g.T @ [1.0, 0.0]))


def test_cohomology_degenerate_pair():
    g = np.eye(2)
    assert P.cohomology_residual(g, [1.0, 0.0], [0.0, 1.0]) == 0.0


def test_cohomology_one_sided_zero():
    # exact arithmetic makes both brackets equal; roundoff in 1 + 1e-25 kills
    # <f, g v> while <g* f, v> = 1e-25 survives
    g = np.array([[1.0, 1.0], [1.0, 0.0]])
    with pytest.raises(DegeneratePair):
        P.cohomology_residual(g, np.array([1.0, 1e-25]), np.array([1.0, -1.0]))


@settings(max_examples=300, deadline=None)
@given(mat(3), vec(3), vec(3))
def test_cohomology_identity_fuzzed(g, v, f):
    if abs(f @ (g @ v)) < 1e-8 * np.linalg.norm(f) * np.linalg.norm(g @ v):
        return
    assert abs(P.cohomology_residual(g, v, f)) < 1e-10


@settings(max_examples=200, deadline=None)
@given(mat(2), mat(2), vec(2))
def test_cocycle_additive(g1, g2, v):
    lhs = P.cocycle(g2 @ g1, v)
    rhs = P.cocycle(g2, P.act(g1, v)) + P.cocycle(g1, v)
    assert lhs == pytest.approx(rhs, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(vec(3), vec(3), finite.filter(lambda c: abs(c) > 1e-3))
def test_delta_projective_and_bounded(f, v, c):
    d1 = P.delta(f, v)
    assert 0.0 <= d1 <= 1.0
    assert P.delta(c * f, v) == pytest.approx(d1, abs=1e-12)
    assert P.dist(v, c * v) < 1e-7


@settings(max_examples=200, deadline=None)
@given(vec(3), vec(3), vec(3))
def test_dist_triangle(a, b, c):
    assert P.dist(a, c) <= P.dist(a, b) + P.dist(b, c) + 1e-12


def test_batched_calls_match_scalar(rng):
    vs = rng.standard_normal((50, 3))
    fs = rng.standard_normal((50, 3))
    batch = P.delta(fs, vs)
    single = [P.delta(f, v) for f, v in zip(fs, vs)]
    assert np.allclose(batch, single, atol=0, rtol=1e-15)
    assert np.all(P.canonical(vs)[:, 0] > 0)


def test_hash_and_equality():
    a = P.project([1.0, 2.0])
    b = P.project([-2.0, -4.0])
    assert a == b and hash(a) == hash(b)
    assert a != P.project_dual([1.0, 2.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from([2, 3, 4]))
def test_batched_cohomology_matches_scalar(seed, d):
    rng = np.random.default_rng(seed)
    G, X, Y = rng.normal(size=(50, d, d)), rng.normal(size=(50, d)), rng.normal(size=(50, d))
    batch = P.cohomology_residuals(G, X, Y)
    single = [P.cohomology_residual(g, x, y) for g, x, y in zip(G, X, Y)]
    assert np.allclose(batch, single, rtol=0, atol=1e-13)


def test_batched_cohomology_degenerate():
    g = np.array([[[1.0, 1.0], [1.0, 0.0]], [[2.0, 0.0], [0.0, 1.0]]])
    x = np.array([[1.0, 1e-25], [1.0, 0.0]])
    with pytest.raises(DegeneratePair, match="index 0"):
        P.cohomology_residuals(g, x, np.array([[1.0, -1.0], [1.0, 0.0]]))
    both = P.cohomology_residuals(g[1:], np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]))
    assert both[0] == 0.0
