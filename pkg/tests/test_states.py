from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blindsim.linalg import LinalgError, fidelity, partial_trace
from blindsim.states import (
    EIGHT_ANGLES,
    Angle,
    KrausChannel,
    StateError,
    apply_channel,
    gate,
    plus_dm,
    plus_state,
    purify,
    uhlmann_align,
)

SQ = 1 / np.sqrt(2)


def random_density(rng, d, rank=None):
    rank = rank or d
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def test_angle_is_exact_mod_two_pi():
    a = Angle(Fraction(1, 4))
    assert a + Angle(2) == a
    assert a + Angle(Fraction(7, 4)) == Angle(0)
    assert -a == Angle(Fraction(7, 4))
    assert 3 * a == Angle.k8(3)
    assert [x.eighths for x in EIGHT_ANGLES] == list(range(8))
    assert Angle.parse("3/4·pi") == Angle.parse("3/4") == Angle.k8(3)
    assert str(Angle.k8(6)) == "3/2·pi"
    with pytest.raises(StateError):
        Angle(Fraction(1, 3)).eighths


def test_plus_state_examples():
    assert np.abs(plus_state(Angle(0)) - [SQ, SQ]).max() < 1e-15
    assert np.abs(plus_state(Angle(1)) - [SQ, -SQ]).max() < 1e-15
    assert np.abs(plus_state(Angle(Fraction(1, 2))) - [SQ, 1j * SQ]).max() < 1e-15


def test_plus_state_period_and_antipodes():
    for a in EIGHT_ANGLES:
        assert np.array_equal(plus_state(a), plus_state(a + Angle(2)))
        assert abs(np.vdot(plus_state(a), plus_state(a + Angle(1)))) < 1e-12


@pytest.mark.parametrize("phi", np.linspace(0, 2 * np.pi, 17))
def test_plus_overlap_is_cos_half_angle(phi):
    assert abs(abs(np.vdot(plus_state(0.0), plus_state(phi))) - abs(np.cos(phi / 2))) < 1e-12


def test_gate_examples():
    S = gate("S")
    assert np.abs(S @ S - gate("Z")).max() < 1e-15
    cz = np.kron(np.diag([1, 0]), np.eye(2)) + np.kron(np.diag([0, 1]), gate("Z"))
    assert np.abs(gate("ctrl-Z") - cz).max() == 0
    assert np.abs(gate("Z", Angle.k8(1)) @ plus_state(0.0) - plus_state(Angle.k8(1))).max() < 1e-15
    assert np.abs(gate("S†") @ S - np.eye(2)).max() < 1e-15
    with pytest.raises(StateError):
        gate("T2")


def test_apply_channel_examples():
    rho = plus_dm(Angle.k8(3))
    assert np.abs(apply_channel(KrausChannel.identity(), rho) - rho).max() < 1e-15
    assert np.abs(apply_channel(KrausChannel.depolarizing(), rho) - np.eye(2) / 2).max() < 1e-15
    out = apply_channel(KrausChannel.unitary(gate("Z", Angle.k8(1))), plus_dm())
    assert np.abs(out - plus_dm(Angle.k8(1))).max() < 1e-15
    with pytest.raises(StateError):
        apply_channel(KrausChannel.identity(), np.eye(4) / 4)


def test_kraus_validation():
    with pytest.raises(StateError):
        KrausChannel([np.diag([1, 0.5])])
    sub = KrausChannel([np.diag([1, 0.5])], cptp=False)
    assert not sub.cptp
    with pytest.raises(StateError):
        KrausChannel([np.eye(2) * 1.1], cptp=False)


def test_purify_examples():
    bell = np.array([1, 0, 0, 1]) * SQ
    assert np.abs(purify(np.eye(2) / 2) - bell).max() < 1e-15
    assert np.abs(purify(np.diag([1.0, 0.0])) - [1, 0, 0, 0]).max() < 1e-15
    assert np.abs(purify(np.diag([0.75, 0.25])) - [np.sqrt(0.75), 0, 0, 0.5]).max() < 1e-15


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 6))
def test_purify_then_trace_is_identity(seed, d, rank):
    rng = np.random.default_rng(seed)
    rho = random_density(rng, d, min(rank, d))
    v = purify(rho)
    assert abs(np.linalg.norm(v) - 1) < 1e-12
    assert np.abs(partial_trace(np.outer(v, v.conj()), [d, d], keep=1) - rho).max() < 1e-10


def test_uhlmann_examples():
    bell = np.array([1, 0, 0, 1]) * SQ
    w = uhlmann_align(bell, bell)
    assert abs(abs(np.vdot(bell, np.kron(w, np.eye(2)) @ bell)) - 1) < 1e-12
    flipped = np.array([0, 1, 1, 0]) * SQ
    w = uhlmann_align(bell, flipped)
    assert abs(abs(np.vdot(bell, np.kron(w, np.eye(2)) @ flipped)) - 1) < 1e-12
    assert np.abs(np.abs(w) - np.abs(gate("X"))).max() < 1e-12
    with pytest.raises(LinalgError):
        uhlmann_align(bell, np.ones(8) / np.sqrt(8))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.integers(1, 3), st.integers(1, 3), st.integers(0, 1))
def test_uhlmann_overlap_is_root_fidelity(seed, d, r1, r2, side):
    rng = np.random.default_rng(seed)
    a, b = random_density(rng, d, min(r1, d)), random_density(rng, d, min(r2, d))
    pa, pb = purify(a), purify(b)
    if side == 1:
        # move the purifying register to the second slot
        pa = pa.reshape(d, d).T.reshape(-1)
        pb = pb.reshape(d, d).T.reshape(-1)
    w = uhlmann_align(pa, pb, (d, d), aligned_subsystem=side)
    op = np.kron(w, np.eye(d)) if side == 0 else np.kron(np.eye(d), w)
    assert np.abs(w.conj().T @ w - np.eye(d)).max() < 1e-10
    assert abs(abs(np.vdot(pa, op @ pb)) - np.sqrt(fidelity(a, b))) < 1e-9
