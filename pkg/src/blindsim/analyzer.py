"""Blindness distances, the eta identity, and real-versus-simulated comparisons."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .linalg import Matrix, partial_trace, trace_norm
from .mbqc import build_brickwork
from .prep import BELL, PrepStateFamily, check_weak, honest_b1, rsp_b_distribution, two_server_family
from .reductions import four_state, two_state
from .states import EIGHT_ANGLES, PI, Angle, KrausChannel, apply_channel
from .ubqc import VIEW_SITE_CAP, CQState, bob_view, delta_angle

PERFECT_TOL = 1e-10
VIOLATION_TOL = 1e-3


class AnalyzerError(ValueError):
    pass


def cq_distance(a: Mapping, b: Mapping) -> float:
    """Trace distance of two classical-quantum states given as label -> block.

    Labels missing on one side count as zero blocks. Labels must have the same
    shape (tuple length) and blocks the same dimension on both sides.
    """
    if not a or not b:
        raise AnalyzerError("empty classical-quantum state")
    shapes = {len(k) if isinstance(k, tuple) else -1 for k in itertools.chain(a, b)}
    if len(shapes) != 1:
        raise AnalyzerError(f"label alphabets differ in shape: {sorted(shapes)}")
    dims = {np.shape(m) for m in itertools.chain(a.values(), b.values())}
    if len(dims) != 1:
        raise AnalyzerError(f"blocks differ in dimension: {sorted(dims)}")
    zero = np.zeros(dims.pop(), dtype=np.complex128)
    return 0.5 * sum(trace_norm(np.asarray(a.get(k, zero)) - np.asarray(b.get(k, zero))) for k in set(a) | set(b))


# the eta identity -----------------------------------------------------------------


def eta_identity_sides(family: PrepStateFamily, phi: Angle) -> tuple[Matrix, Matrix]:
    """(sum_{theta, r} rho^theta (x) |delta><delta|, 2 eta (x) 1) with delta = phi + theta + r pi on 8 labels."""
    chk = check_weak(family)
    if not chk.accepted:
        raise AnalyzerError(f"family is not weakly correlated (deviation {chk.deviation:.3e})")
    labels = {a: k for k, a in enumerate(EIGHT_ANGLES)}
    lhs = np.zeros((family.dim * 8, family.dim * 8), dtype=np.complex128)
    for theta, r in itertools.product(family.angles, (0, 1)):
        e = np.zeros((8, 8))
        k = labels[delta_angle(phi, theta, r)]
        e[k, k] = 1
        lhs += np.kron(family[theta], e)
    rhs = np.kron(2 * chk.eta, np.eye(8))
    return lhs, rhs


def eta_identity_deviation(family: PrepStateFamily, phi: Angle) -> float:
    lhs, rhs = eta_identity_sides(family, phi)
    return float(np.abs(lhs - rhs).max())


# blindness sweeps ---------------------------------------------------------------

REPORT_PRESETS = ("zeros", "ones", "alternating")


def _reports(pattern, preset: str) -> dict:
    sites = pattern.measured
    if preset == "zeros":
        return {s: 0 for s in sites}
    if preset == "ones":
        return {s: 1 for s in sites}
    if preset == "alternating":
        return {s: k % 2 for k, s in enumerate(sites)}
    raise AnalyzerError(f"unknown report preset {preset!r}; choose from {REPORT_PRESETS}")


@dataclass(frozen=True)
class SweepRecord:
    rows: int
    cols: int
    family: str
    reports: str
    pairs: int
    max_distance: float


def _grid_pairs(sites: int, rng: np.random.Generator, random_pairs: int) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Full grids compared with the all-zero grid when small, seeded random pairs otherwise."""
    if sites <= 2:
        ref = (0,) * sites
        return [(ref, g) for g in itertools.product(range(8), repeat=sites) if g != ref]
    return [
        (tuple(int(x) for x in rng.integers(0, 8, size=sites)), tuple(int(x) for x in rng.integers(0, 8, size=sites)))
        for _ in range(random_pairs)
    ]


def blindness_sweep(
    sizes: Sequence[tuple[int, int]],
    families: Mapping[str, PrepStateFamily],
    reports: Sequence[str] = ("zeros",),
    seed: int = 0,
    random_pairs: int = 10,
) -> list[SweepRecord]:
    """Max distance between Bob's views for two computations, per (size, family, reports)."""
    out = []
    for (n, m), (name, fam), rep in itertools.product(sizes, sorted(families.items()), reports):
        base = build_brickwork(n, m)
        if len(base.measured) > VIEW_SITE_CAP:
            raise AnalyzerError(f"{n}x{m} pattern has {len(base.measured)} measured sites; cap is {VIEW_SITE_CAP}")
        rng = np.random.default_rng([seed, n, m])
        bits = _reports(base, rep)
        cache: dict = {}

        def view(grid):
            if grid not in cache:
                cache[grid] = bob_view(base.with_angles([Angle.k8(k) for k in grid]), fam, bits)
            return cache[grid]

        pairs = _grid_pairs(len(base.measured), rng, random_pairs)
        worst = max((cq_distance(view(g), view(h)) for g, h in pairs), default=0.0)
        out.append(SweepRecord(n, m, name, rep, len(pairs), worst))
    return out


def expected_blind(family: PrepStateFamily) -> bool:
    """Blind views need a weak family over all eight angles; fewer angles leak phi through delta."""
    return set(family.angles) == set(EIGHT_ANGLES) and check_weak(family).accepted


# real versus simulated ----------------------------------------------------------

TWO_SERVER_PRESETS = ("honest", "b1_computational", "b1_adaptive", "b2_dephase")


def _two_server_strategy(preset: str):
    comp = lambda theta: ([np.array([[1, 0]])], [np.array([[0, 1]])])

    def adaptive(theta):
        p, z = np.eye(2), np.zeros((2, 2))
        return ([p], [z]) if theta.eighths < 4 else ([z], [p])

    table = {
        "honest": (honest_b1, None),
        "b1_computational": (comp, None),
        "b1_adaptive": (adaptive, None),
        "b2_dephase": (honest_b1, KrausChannel.dephasing()),
    }
    if preset not in table:
        raise AnalyzerError(f"unknown two-server deviation {preset!r}; choose from {TWO_SERVER_PRESETS}")
    return table[preset]


def two_server_real(preset: str) -> CQState:
    """Alice's recorded angle and B2's system, by running B1's instrument on the shared pair."""
    b1, b2 = _two_server_strategy(preset)
    bell = np.outer(BELL, BELL.conj())
    out: dict = {}
    for theta in EIGHT_ANGLES:
        for m, branch in enumerate(b1(theta)):
            for k in branch:
                op = np.kron(np.atleast_2d(k), np.eye(2))
                rest = partial_trace(op @ bell @ op.conj().T, [op.shape[0] // 2, 2], keep=1) / 8
                if b2 is not None:
                    rest = apply_channel(b2, rest)
                key = (theta + m * PI,)
                out[key] = out.get(key, 0) + rest
    return out


def two_server_simulated(preset: str) -> CQState:
    """The ideal resource fed with the family the simulator computes."""
    b1, b2 = _two_server_strategy(preset)
    dist = rsp_b_distribution(two_server_family(b1, b2))
    return {(a,): m for a, m in dist.items()}


def _four_state_cq(blocks: Mapping) -> CQState:
    return {(a, o): m for (a, o), m in blocks.items()}


def real_vs_simulated(protocol: str, deviation: str = "honest", n: int = 8) -> float:
    """Trace distance between the real joint state and ideal resource plus simulator."""
    if protocol == "four_state":
        if deviation not in four_state.FOUR_STATE_PRESETS:
            raise AnalyzerError(f"unknown four-state deviation {deviation!r}")
        bob = four_state.four_state_bob(deviation)
        fams = [four_state.honest_measurements()] * 4
        rho = four_state.bell_inputs()
        real = four_state.real_blocks(fams, rho, bob)
        sim = four_state.simulated_blocks(fams, rho, bob)
        return cq_distance(_four_state_cq(real), _four_state_cq(sim))
    if protocol == "two_server":
        return cq_distance(two_server_real(deviation), two_server_simulated(deviation))
    if protocol == "two_state":
        if deviation not in two_state.TWO_STATE_PRESETS:
            raise AnalyzerError(f"unknown two-state deviation {deviation!r}")
        try:
            real = two_state.two_state_real_blocks(n, deviation)
            sim = two_state.two_state_simulated_blocks(n, deviation)
        except two_state.TwoStateError as exc:
            raise AnalyzerError(str(exc)) from exc
        return cq_distance(real, sim)
    raise AnalyzerError(f"unknown protocol {protocol!r}")
