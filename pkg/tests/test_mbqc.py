from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blindsim.mbqc import (
    PatternError,
    Register,
    PatternRun,
    build_brickwork,
    corrected_angle,
    measure_xy,
    pattern_from_text,
    pattern_to_text,
    pattern_unitary,
    run_pattern,
)
from blindsim.states import Angle, gate, plus_dm, plus_state

GOLDEN = Path(__file__).parent / "golden" / "brickwork_2x5.txt"
H = gate("H")


def golden_edges():
    out = []
    for line in GOLDEN.read_text().splitlines():
        if line.startswith("edge"):
            _, a, b = line.split()
            out.append((tuple(map(int, a.split(","))), tuple(map(int, b.split(",")))))
    return out


def composed_unitary(pattern):
    """Ideal unitary by multiplying per-column wire steps and brick bars."""
    n = pattern.rows
    u = np.eye(2**n, dtype=complex)

    def bar(y):
        cz = np.eye(2**n, dtype=complex)
        for (a, b) in pattern.edges:
            if a[1] == b[1] == y:
                for k in range(2**n):
                    bits = [(k >> (n - 1 - x)) & 1 for x in range(n)]
                    if bits[a[0]] and bits[b[0]]:
                        cz[k, k] *= -1
        return cz

    for y in range(pattern.cols):
        step = np.eye(1, dtype=complex)
        for x in range(n):
            step = np.kron(step, H @ gate("Z", -pattern.angles[(x, y)].radians))
        u = step @ bar(y) @ u
    return bar(pattern.cols) @ u


def random_density(rng, d):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def test_brickwork_matches_hand_enumerated_golden():
    edges = build_brickwork(2, 4).edges
    assert sorted(edges) == sorted(golden_edges())
    # enumeration order is column-major on the first endpoint, then the second
    keys = [(a[1], a[0], b[1], b[0]) for a, b in edges]
    assert keys == sorted(keys)


def test_brickwork_degenerate_sizes():
    line = build_brickwork(1, 5)
    assert list(line.edges) == [((0, y), (0, y + 1)) for y in range(5)]
    assert build_brickwork(2, 0).edges == ()


def test_brickwork_second_brick_layer(monkeypatch):
    monkeypatch.setenv("BLINDSIM_MAX_QUBITS", "18")
    p = build_brickwork(4, 2)
    assert ((0, 2), (1, 2)) in p.edges and ((2, 2), (3, 2)) in p.edges
    assert ((1, 2), (2, 2)) not in p.edges
    wide = build_brickwork(2, 8)
    assert [e for e in wide.edges if e[0][1] == e[1][1]] == [((0, 2), (1, 2)), ((0, 4), (1, 4))]


def test_brickwork_rejects_bad_sizes(monkeypatch):
    with pytest.raises(PatternError):
        build_brickwork(0, 2)
    with pytest.raises(PatternError):
        build_brickwork(3, 2)
    with pytest.raises(PatternError):
        build_brickwork(2, 6)  # 14 qubits
    monkeypatch.setenv("BLINDSIM_MAX_QUBITS", "14")
    assert build_brickwork(2, 6).num_qubits == 14


@pytest.mark.parametrize("n,m", [(1, 4), (2, 4), (4, 2), (2, 5)])
def test_dependencies_point_backwards(n, m):
    p = build_brickwork(n, m)
    order = {s: i for i, s in enumerate(p.measured)}
    for site in p.measured:
        for dep in p.x_deps[site] | p.z_deps[site]:
            assert order[dep] < order[site]
    for site in p.outputs:
        assert all(d in order for d in p.x_deps[site] | p.z_deps[site])


def test_corrected_angle_examples():
    q = Angle(Fraction(1, 4))
    assert corrected_angle(q, 0, 0) == q
    assert corrected_angle(q, 1, 0) == Angle(Fraction(7, 4))
    assert corrected_angle(q, 0, 1) == Angle(Fraction(5, 4))


def single_qubit_run(vec):
    p = build_brickwork(1, 1)
    return PatternRun(p, Register(vec, [(0, 0)]))


def test_measure_eigenstate_and_remeasure():
    d = Angle.k8(3)
    run = single_qubit_run(plus_state(d))
    assert measure_xy(run, (0, 0), d, np.random.default_rng(0)) == 0
    with pytest.raises(PatternError):
        measure_xy(run, (0, 0), d, np.random.default_rng(0))


def test_measure_unbiased_frequencies():
    rng = np.random.default_rng(7)
    bits = [measure_xy(single_qubit_run(plus_state(0.0)), (0, 0), Angle.k8(2), rng) for _ in range(4000)]
    assert abs(np.mean(bits) - 0.5) < 0.03


def test_wire_identity_two_qubits():
    theta = Angle.k8(5)
    for bit in (0, 1):
        reg = Register(plus_state(theta), [(0, 0)])
        reg.add((0, 1), plus_state(0.0))
        reg.cz((0, 0), (0, 1))
        run = PatternRun(build_brickwork(1, 1), reg)
        measure_xy(run, (0, 0), theta, None, forced=bit)
        expected = np.linalg.matrix_power(gate("X"), bit) @ H @ gate("Z", -theta.radians) @ plus_state(theta)
        assert abs(abs(np.vdot(expected, run.register.psi.reshape(2))) - 1) < 1e-12
        # H Z(-theta)|+_theta> = H|+> = |0>, so the residual is |0> or |1>
        assert abs(abs(run.register.psi.reshape(2)[bit]) - 1) < 1e-12


def test_run_pattern_examples():
    rng = np.random.default_rng(1)
    out, _ = run_pattern(build_brickwork(1, 2), plus_dm(), rng)
    assert np.abs(out - plus_dm()).max() < 1e-12
    p = build_brickwork(1, 2, [Angle(Fraction(-1, 2)), Angle(0)])
    out, _ = run_pattern(p, plus_dm(), rng)
    s_plus = gate("S") @ plus_state(0.0)
    assert np.abs(out - np.outer(s_plus, s_plus.conj())).max() < 1e-12
    p = build_brickwork(2, 3, [Angle.k8(k) for k in range(6)])
    out, _ = run_pattern(p, np.eye(4) / 4, rng)
    assert np.abs(out - np.eye(4) / 4).max() < 1e-12


def test_run_pattern_is_deterministic():
    p = build_brickwork(2, 4, [Angle.k8(k % 8) for k in range(8)])
    rho = random_density(np.random.default_rng(3), 4)
    a = run_pattern(p, rho, np.random.default_rng(42))
    b = run_pattern(p, rho, np.random.default_rng(42))
    assert np.array_equal(a[0], b[0]) and a[1] == b[1]


@settings(max_examples=30, deadline=None)
@given(
    st.integers(0, 2**32 - 1),
    st.sampled_from([1, 2]),
    st.integers(1, 4),
    st.lists(st.integers(0, 7), min_size=8, max_size=8),
)
def test_flow_correctness_every_branch(seed, n, m, ks):
    p = build_brickwork(n, m, [Angle.k8(k) for k in ks[: n * m]])
    rng = np.random.default_rng(seed)
    rho = random_density(rng, 2**n)
    u = composed_unitary(p)
    target = u @ rho @ u.conj().T
    forced = {s: int(rng.integers(2)) for s in p.measured}
    out, outcomes = run_pattern(p, rho, rng, forced=forced)
    assert outcomes == forced
    assert np.abs(out - target).max() < 1e-9
    zero_branch = pattern_unitary(p)
    assert abs(abs(np.trace(zero_branch.conj().T @ u)) - 2**n) < 1e-9


def test_text_round_trip_and_golden_parse():
    p = build_brickwork(2, 4, [Angle.k8(k) for k in range(8)])
    text = pattern_to_text(p)
    assert "angle 1,3 7/4" in text
    assert pattern_from_text(text) == p
    header = "rows 2\ncols 4\n"
    assert sorted(pattern_from_text(header + GOLDEN.read_text()).edges) == sorted(golden_edges())
    with pytest.raises(PatternError):
        pattern_from_text(header + "edge 0,1 1,1\n")
