from functools import reduce
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blindsim.linalg import fidelity
from blindsim.reductions.schur_weyl import (
    BlockOperator,
    derived_action,
    multiplicity,
    sym_power,
    sym_power_direct,
    sym_unitary,
)


def random_matrix(rng, scale=1.0):
    return scale * (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))


def dicke_basis(n):
    """Columns: normalized symmetric states with k ones, k = 0..n."""
    cols = []
    for k in range(n + 1):
        v = np.zeros(2**n, dtype=complex)
        for idx in range(2**n):
            if bin(idx).count("1") == k:
                v[idx] = 1
        cols.append(v / np.sqrt(comb(n, k)))
    return np.stack(cols, axis=1)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_sym_power_is_restriction_of_tensor_power(n):
    rng = np.random.default_rng(n)
    c = random_matrix(rng)
    big = reduce(np.kron, [c] * n)
    d = dicke_basis(n)
    ref = d.conj().T @ big @ d
    assert np.abs(sym_power(c, n) - ref).max() < 1e-10 * max(1, np.abs(ref).max())
    assert np.abs(sym_power_direct(c, n) - ref).max() < 1e-10 * max(1, np.abs(ref).max())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_sym_power_routes_agree(seed, n):
    c = random_matrix(np.random.default_rng(seed), 0.7)
    a, b = sym_power(c, n), sym_power_direct(c, n)
    assert np.abs(a - b).max() < 1e-9 * max(1.0, np.abs(b).max())


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_sym_power_is_multiplicative(seed, n):
    rng = np.random.default_rng(seed)
    a, b = random_matrix(rng, 0.6), random_matrix(rng, 0.6)
    lhs = sym_power(a @ b, n)
    rhs = sym_power(a, n) @ sym_power(b, n)
    assert np.abs(lhs - rhs).max() < 1e-9 * max(1.0, np.abs(rhs).max())


def test_sym_unitary_and_derived_action():
    rng = np.random.default_rng(3)
    u, _ = np.linalg.qr(random_matrix(rng))
    for n in (1, 4, 9):
        s = sym_unitary(u, n)
        assert np.abs(s.conj().T @ s - np.eye(n + 1)).max() < 1e-10
    z = np.diag([1.0, -1.0])
    assert np.allclose(np.diag(derived_action(z, 3)), [3, 1, -1, -3])


def test_multiplicities_fill_the_space():
    for n in (1, 2, 5, 8, 13):
        total = sum(multiplicity(n, j2) * (j2 + 1) for j2 in range(n % 2, n + 1, 2))
        assert total == 2**n


@pytest.mark.parametrize("n", [2, 3, 4, 6])
def test_block_form_matches_full_space(n):
    rng = np.random.default_rng(10 + n)
    terms = [(0.3, random_matrix(rng)), (-0.2j, random_matrix(rng))]
    full = sum(a * reduce(np.kron, [c] * n) for a, c in terms)
    herm = full + full.conj().T
    blocks = BlockOperator.from_powers(n, terms)
    blk = blocks + BlockOperator(n, {k: v.conj().T for k, v in blocks.blocks.items()})
    assert blk.trace() == pytest.approx(np.trace(herm), abs=1e-9)
    assert blk.trace_norm() == pytest.approx(np.abs(np.linalg.eigvalsh(herm)).sum(), rel=1e-9)


def test_block_fidelity_of_products():
    n = 6
    r1 = np.array([[0.7, 0.2], [0.2, 0.3]])
    r2 = np.array([[0.5, -0.1j], [0.1j, 0.5]])
    a = BlockOperator.from_powers(n, [(1.0, r1)])
    b = BlockOperator.from_powers(n, [(1.0, r2)])
    single = fidelity(r1, r2)
    assert a.fidelity(b) == pytest.approx(single**n, rel=1e-9)
    assert (a - a).trace_norm() == pytest.approx(0.0, abs=1e-12)
    assert a.scale(2).trace() == pytest.approx(2.0, abs=1e-12)
