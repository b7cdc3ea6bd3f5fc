import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glx.closed_form import (
    CLOSED_APPROX,
    CLOSED_EXACT,
    approx_solution,
    check_conditions,
    closed_form_solution,
    dt_positive_definite_check,
    empirical_lambda0,
    epsilon_certificate,
    exact_solution,
    path_sum_certificate_matrix,
    tree_complement,
    tree_inverse,
)
from glx.covariance import residue
from glx.datagen import spanning_tree_covariance
from glx.exceptions import CertificateUnavailable, ConditionsFailed, DegenerateEntry, NotAcyclic
from glx.graph import SupportGraph, support_graph
from glx.numerics import SparseSymmetric

from conftest import EX1, ex1_sigma, random_tree_edges


def unit_matrix(d, entries):
    m = np.eye(d)
    for (i, j), v in entries.items():
        m[i, j] = m[j, i] = v
    return m


def test_tree_complement_examples(ex1):
    n = tree_complement(ex1, support_graph(ex1))
    assert n[0, 2] == pytest.approx(-0.12, abs=1e-12)
    assert n[0, 3] == pytest.approx(-0.024, abs=1e-12)
    assert n[1, 3] == pytest.approx(-0.08, abs=1e-12)
    assert np.all(n[ex1 != 0] == 0)
    star = unit_matrix(5, {(0, k): 0.6 for k in range(1, 5)})
    n = tree_complement(star, support_graph(star))
    for i, j in itertools.combinations(range(1, 5), 2):
        assert n[i, j] == pytest.approx(0.36)
    single = unit_matrix(2, {(0, 1): 0.7})
    assert np.all(tree_complement(single, support_graph(single)) == 0)
    tri = unit_matrix(3, {(0, 1): 0.1, (1, 2): 0.1, (0, 2): 0.1})
    with pytest.raises(NotAcyclic):
        tree_complement(tri, support_graph(tri))


def test_tree_inverse_examples(ex1):
    a = tree_inverse(ex1, support_graph(ex1))
    assert a[0, 0] == pytest.approx(1 / 0.91, abs=1e-12)
    assert a[0, 1] == pytest.approx(-0.3 / 0.91, abs=1e-12)
    assert a[1, 1] == pytest.approx(1 + 0.09 / 0.91 + 0.16 / 0.84, abs=1e-12)
    assert a[1, 2] == pytest.approx(0.4 / 0.84, abs=1e-12)
    assert a[2, 2] == pytest.approx(1 + 0.16 / 0.84 + 0.04 / 0.96, abs=1e-12)
    assert a[2, 3] == pytest.approx(-0.2 / 0.96, abs=1e-12)
    assert a[3, 3] == pytest.approx(1 / 0.96, abs=1e-12)
    assert np.array_equal(tree_inverse(np.eye(3), SupportGraph.from_edges(3, [])), np.eye(3))
    e = unit_matrix(2, {(0, 1): 0.5})
    assert np.allclose(tree_inverse(e, support_graph(e)), [[4 / 3, -2 / 3], [-2 / 3, 4 / 3]], atol=1e-14)
    with pytest.raises(DegenerateEntry):
        bad = unit_matrix(2, {(0, 1): 1.0})
        tree_inverse(bad, support_graph(bad))


def test_approx_solution_examples(ex1):
    sigma = ex1_sigma(0.05)
    a = approx_solution(residue(sigma, 0.05)).to_dense()
    assert np.allclose(a, tree_inverse(ex1, support_graph(ex1)), atol=1e-12)
    s = np.array([[1.0, 0.5], [0.5, 1.0]])
    a = approx_solution(residue(s, 0.1)).to_dense()
    assert a[0, 1] == pytest.approx(-0.4 / 0.84, abs=1e-14)
    assert a[0, 0] == pytest.approx(1 / 0.84, abs=1e-14)
    s = np.diag([2.0, 4.0, 5.0]) + 0.1 * (1 - np.eye(3))
    assert np.allclose(approx_solution(residue(s, 0.2)).to_dense(), np.diag([0.5, 0.25, 0.2]))
    with pytest.raises(DegenerateEntry):
        approx_solution(residue(np.array([[1.0, 1.3], [1.3, 1.0]]), 0.1))


def test_exact_solution_examples():
    s = np.array([[2.0, 0.3, 0.1], [0.3, 1.0, 0.2], [0.1, 0.2, 3.0]])
    sol = exact_solution(residue(s, 0.5))
    assert sol.method == CLOSED_EXACT and sol.report.components == []
    assert np.allclose(sol.to_dense(), np.diag(1 / np.diag(s)))
    inst = spanning_tree_covariance(30, seed=4)
    sol = exact_solution(residue(inst.sigma, inst.lam))
    assert sol.method == CLOSED_EXACT
    assert set(zip(sol.estimate.rows.tolist(), sol.estimate.cols.tolist())) == set(inst.edges)
    tri = np.array([[1.0, 0.6, 0.6], [0.6, 1.0, 0.6], [0.6, 0.6, 1.0]])
    with pytest.raises(ConditionsFailed) as err:
        exact_solution(residue(tri, 0.5))
    rec = err.value.report.components[0]
    assert rec.acyclic is False and err.value.partial.method == CLOSED_APPROX


def test_check_conditions_examples(ex1):
    rep = check_conditions(residue(np.diag([1.0, 2.0, 3.0]), 0.1))
    assert rep.all_passed and rep.exact_conditions
    # 12-node star, one normalized residue entry of magnitude 0.9, excluded entries <= lam - 0.82
    lam = 0.85
    s = np.full((12, 12), 0.83)
    np.fill_diagonal(s, 1.0)
    s[0, 1:] = s[1:, 0] = lam + 0.05
    s[0, 1] = s[1, 0] = lam + 0.9
    rep = check_conditions(residue(s, lam))
    assert rep.global_gap_lhs == pytest.approx(0.81)
    assert rep.global_gap_rhs == pytest.approx(lam - 0.83)
    assert not rep.global_gap_check and not rep.components[0].gap_check
    rep = check_conditions(residue(ex1_sigma(0.1), 0.1))
    assert rep.global_gap_lhs == pytest.approx(0.16)
    assert rep.global_gap_rhs == pytest.approx(0.1)
    assert not rep.global_gap_check
    # the ladder statistic is reported alongside
    assert set(rep.sufficient_gap) >= {"lhs", "rhs", "holds"}


def test_epsilon_certificate_examples(ex1):
    cert = epsilon_certificate(residue(ex1_sigma(0.5), 0.5))
    assert cert.epsilon == 0.0 and cert.p_max_used == 1 and math.isinf(cert.girth_used)
    for c in (3, 4, 7):
        alpha = 0.1
        sigma = unit_matrix(c, {(i, (i + 1) % c): 0.5 + alpha for i in range(c)})
        cert = epsilon_certificate(residue(sigma, 0.5))
        delta = 1 + 2 * alpha**2 / (1 - alpha**2) + 1 / (1 - alpha**2)
        assert cert.delta == pytest.approx(delta, rel=1e-12)
        assert cert.epsilon == pytest.approx(delta * alpha ** math.ceil(c / 2), rel=1e-12)
    cert = epsilon_certificate(residue(np.eye(3), 0.1))
    assert cert.epsilon == 0.0 and cert.delta >= 1
    bad = unit_matrix(3, {(0, 1): -0.99, (1, 2): -0.99, (0, 2): -0.99})
    with pytest.raises(CertificateUnavailable):
        epsilon_certificate(residue(bad, 0.05))


def test_dt_positive_definite_check():
    s = SparseSymmetric.diagonal(np.ones(2))
    assert dt_positive_definite_check(s, np.eye(2), 0.3)
    sigma = np.array([[1.0, 0.9], [0.9, 1.0]])
    neg = SparseSymmetric.from_entries(2, [(0, 1, -1.0)], np.ones(2))
    pos = SparseSymmetric.from_entries(2, [(0, 1, 1.0)], np.ones(2))
    assert dt_positive_definite_check(neg, sigma, 0.2)
    assert not dt_positive_definite_check(pos, sigma, 0.2)


def test_path_sum_matrix_on_tree_is_exact_inverse(ex1):
    res = residue(ex1_sigma(0.05), 0.05)
    b = path_sum_certificate_matrix(res)
    a = approx_solution(res).to_dense()
    assert np.allclose(a @ b, np.eye(4), atol=1e-12)


def test_empirical_lambda0():
    sigma = unit_matrix(5, {e: 0.9 for e in itertools.combinations(range(5), 2)})
    grid = np.linspace(0.0, 0.95, 20)
    lam0 = empirical_lambda0(sigma, grid)
    assert lam0 is not None and 0 < lam0 <= 0.95
    assert not np.all(np.linalg.eigvalsh(approx_solution(residue(sigma, 0.0)).to_dense()) > 0)


def brute_force_gl3(sigma, lam):
    """Solve a 3-variable graphical lasso by trying all 27 sign patterns."""
    pairs = [(0, 1), (0, 2), (1, 2)]
    found = []
    for pattern in itertools.product((-1, 0, 1), repeat=3):
        sgn = dict(zip(pairs, pattern))
        w = np.diag(np.diag(sigma)).astype(float)
        for (i, j), s in sgn.items():
            if s:
                w[i, j] = w[j, i] = sigma[i, j] + lam * s
        for (i, j), s in sgn.items():
            if s:
                continue
            k = 3 - i - j
            if sgn[(min(i, k), max(i, k))] and sgn[(min(j, k), max(j, k))]:
                w[i, j] = w[j, i] = w[i, k] * w[k, j] / w[k, k]
        if np.linalg.eigvalsh(w)[0] <= 0:
            continue
        s_mat = np.linalg.inv(w)
        ok = True
        for (i, j), s in sgn.items():
            if s:
                ok &= np.sign(s_mat[i, j]) == s
            else:
                ok &= abs(s_mat[i, j]) < 1e-10 and abs(w[i, j] - sigma[i, j]) <= lam + 1e-12
        if ok:
            found.append(s_mat)
    assert len(found) == 1
    return found[0]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_three_variable_chain_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    dg = rng.uniform(0.5, 2.0, 3)
    lam = 0.3
    r = np.sqrt(np.outer(dg, dg))
    sigma = np.diag(dg)
    sigma[0, 1] = sigma[1, 0] = r[0, 1] * rng.choice([-1, 1]) * rng.uniform(0.35, 0.6)
    sigma[1, 2] = sigma[2, 1] = r[1, 2] * rng.choice([-1, 1]) * rng.uniform(0.35, 0.6)
    sigma[0, 2] = sigma[2, 0] = r[0, 2] * rng.uniform(-0.1, 0.1)
    res = residue(sigma, lam)
    try:
        sol = exact_solution(res)
    except ConditionsFailed:
        return
    ref = brute_force_gl3(sigma, lam)
    assert np.allclose(sol.to_dense(), ref, atol=1e-10)


def random_tree_matrix(rng, d, lim=0.95):
    edges = random_tree_edges(rng, d)
    return unit_matrix(d, {e: rng.uniform(-lim, lim) for e in edges}), SupportGraph.from_edges(d, edges)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 50), st.integers(0, 2**32 - 1))
def test_tree_inverse_identity_and_complement_bound(d, seed):
    rng = np.random.default_rng(seed)
    m, g = random_tree_matrix(rng, d)
    n = tree_complement(m, g)
    a = tree_inverse(m, g)
    assert np.max(np.abs(a @ (m + n) - np.eye(d))) <= 1e-10
    alpha = np.max(np.abs(m - np.eye(d)))
    assert np.max(np.abs(n)) <= alpha**2 + 1e-15


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 30), st.integers(0, 2**32 - 1))
def test_approx_matches_rescaled_tree_inverse_and_signs(d, seed):
    rng = np.random.default_rng(seed)
    lam = 0.3
    edges = random_tree_edges(rng, d)
    dg = rng.uniform(0.5, 3.0, d)
    root = np.sqrt(dg)
    norm = np.eye(d)
    sigma = np.diag(dg)
    for i, j in edges:
        v = rng.choice([-1, 1]) * rng.uniform(lam + 0.01, 0.95)
        sigma[i, j] = sigma[j, i] = v * root[i] * root[j]
    res = residue(sigma, lam)
    m = res.normalized.to_dense() + np.eye(d)
    g = SupportGraph.from_edges(d, edges)
    ref = tree_inverse(m, g) / np.outer(root, root)
    a = approx_solution(res)
    assert np.max(np.abs(a.to_dense() - ref)) <= 1e-12 * max(1.0, np.abs(ref).max())
    r = res.residue
    assert np.all(np.sign(a.to_dense()[r.rows, r.cols]) == -np.sign(r.vals))


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 10), st.floats(0.01, 0.3), st.floats(0.0, 0.2))
def test_epsilon_monotone_in_girth_and_alpha(c, alpha, bump):
    def eps(length, a):
        sigma = unit_matrix(length, {(i, (i + 1) % length): 0.5 + a for i in range(length)})
        return epsilon_certificate(residue(sigma, 0.5)).epsilon

    assert eps(c + 1, alpha) <= eps(c, alpha) * (1 + 1e-12)
    assert eps(c, alpha) <= eps(c, min(alpha + bump, 0.45)) * (1 + 1e-12)
