"""Acceptance suite: one PASS/FAIL line per criterion.

Run with pytest (lines appear in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from click.testing import CliRunner  # noqa: E402

from blindsim.analyzer import (  # noqa: E402
    REPORT_PRESETS,
    TWO_SERVER_PRESETS,
    blindness_sweep,
    eta_identity_deviation,
    expected_blind,
    real_vs_simulated,
)
from blindsim.cli import main as cli_main  # noqa: E402
from blindsim.linalg import factored_trace_norm, partial_trace, trace_norm  # noqa: E402
from blindsim.mbqc import build_brickwork  # noqa: E402
from blindsim.prep import PrepStateFamily, steering_measurements, tripled_family  # noqa: E402
from blindsim.reductions.four_state import (  # noqa: E402
    FOUR_STATE_PRESETS,
    OUTCOME_STRINGS,
    all_choices,
    formula_state,
    four_state_distribution,
    four_state_run,
    four_state_simulator_operators,
)
from blindsim.reductions.overlap import constructed_overlap, iterate_halving  # noqa: E402
from blindsim.reductions.two_state import (  # noqa: E402
    TWO_STATE_PRESETS,
    sum_class_closed_form,
    two_state_bounds,
    two_state_closed_form,
    two_state_correctness_error,
    two_state_distribution,
)
from blindsim.states import EIGHT_ANGLES, PI, Angle, same_up_to_phase  # noqa: E402
from blindsim.ubqc import run_ubqc  # noqa: E402

from test_four_state import random_bb84_family  # noqa: E402
from test_mbqc import composed_unitary  # noqa: E402
from test_prep import random_weak_family  # noqa: E402
from test_ubqc import non_weak_family  # noqa: E402

LINES: list[str] = []


def report(number: int, title: str, ok: bool, detail: str, seconds: float) -> None:
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title}: {detail} [{seconds:.1f} s]"
    LINES.append(line)
    print(line)


def brickwork_sizes(max_qubits: int = 10) -> list[tuple[int, int]]:
    sizes = []
    for n in range(1, max_qubits + 1):
        if n > 1 and n % 2:
            continue
        sizes += [(n, m) for m in range(0, max_qubits // n) if n * (m + 1) <= max_qubits]
    return sizes


def check_ubqc_correctness() -> bool:
    t0 = time.time()
    worst, runs, cross = 0.0, 0, 0.0
    unitaries: dict = {}
    for n, m in brickwork_sizes():
        base = build_brickwork(n, m)
        for g in range(50):
            rng = np.random.default_rng([n, m, g])
            grid = tuple(int(k) for k in rng.integers(0, 8, size=len(base.measured)))
            p = base.with_angles([Angle.k8(k) for k in grid])
            if (n, m, grid) not in unitaries:
                unitaries[n, m, grid] = composed_unitary(p)
            v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
            v /= np.linalg.norm(v)
            ideal = unitaries[n, m, grid] @ v
            factor, _, _ = run_ubqc(p, v, rng, as_factor=True)
            d = 0.5 * factored_trace_norm(factor, ideal[:, None])
            if n * (m + 1) <= 6 and g < 5:
                # dense route on small patterns
                dense = factor @ factor.conj().T - np.outer(ideal, ideal.conj())
                cross = max(cross, abs(d - 0.5 * trace_norm(dense)))
            worst = max(worst, d)
            runs += 1
    secs = time.time() - t0
    ok = worst <= 1e-9 and cross <= 1e-12 and secs <= 60
    report(1, "UBQC correctness", ok, f"{runs} runs over {len(brickwork_sizes())} patterns, max distance {worst:.2e}", secs)
    return ok


def check_eta_identity() -> bool:
    t0 = time.time()
    worst = max(eta_identity_deviation(f, phi) for f in (PrepStateFamily.honest(), tripled_family()) for phi in EIGHT_ANGLES)
    secs = time.time() - t0
    ok = worst <= 1e-12 and secs <= 1
    report(2, "eta identity", ok, f"max entrywise deviation {worst:.2e}", secs)
    return ok


def check_blindness() -> bool:
    t0 = time.time()
    rng = np.random.default_rng(2024)
    weak = {"honest8": PrepStateFamily.honest(), "cubed": tripled_family()}
    weak |= {f"random{k}": random_weak_family(rng, d, d) for k, d in enumerate((2, 4))}
    fams = weak | {"nonweak": non_weak_family()}
    sizes = [(1, 1), (1, 2), (2, 1)]
    recs = blindness_sweep(sizes, fams, REPORT_PRESETS, seed=7)
    weak_max = max(r.max_distance for r in recs if r.family in weak)
    bad_max = max(r.max_distance for r in recs if r.family == "nonweak")
    secs = time.time() - t0
    classified = all(expected_blind(f) for f in weak.values()) and not expected_blind(fams["nonweak"])
    ok = weak_max <= 1e-10 and bad_max >= 1e-3 and classified and secs <= 30
    report(3, "blindness iff weak", ok, f"weak families max {weak_max:.2e}, non-weak max {bad_max:.3f}", secs)
    return ok


def check_steering() -> bool:
    t0 = time.time()
    worst = {"completeness": 0.0, "min_eig": 0.0, "prob": 0.0, "state": 0.0}
    for k in range(100):
        rng = np.random.default_rng([4, k])
        d = 2 if k % 2 == 0 else 4
        fam = random_weak_family(rng, d, int(rng.integers(1, d + 1)))
        purif, ops = steering_measurements(fam)
        joint = np.outer(purif, purif.conj())
        for a in EIGHT_ANGLES[:4]:
            worst["completeness"] = max(worst["completeness"], float(np.abs(ops[a] + ops[a + PI] - np.eye(d)).max()))
        for a in fam.angles:
            worst["min_eig"] = min(worst["min_eig"], float(np.linalg.eigvalsh(ops[a])[0]))
            rest = partial_trace(np.kron(ops[a], np.eye(d)) @ joint, [d, d], keep=1)
            worst["prob"] = max(worst["prob"], abs(float(np.trace(rest).real) - 0.5))
            worst["state"] = max(worst["state"], float(np.abs(2 * rest - fam[a]).max()))
    secs = time.time() - t0
    ok = worst["completeness"] <= 1e-10 and worst["min_eig"] >= -1e-10 and worst["prob"] <= 1e-10 and worst["state"] <= 1e-9
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    report(4, "steering measurements", ok, f"100 families: {detail}", secs)
    return ok


def check_four_state() -> bool:
    t0 = time.time()
    uniform = all(four_state_distribution(o) == {a: Fraction(1, 8) for a in EIGHT_ANGLES} for o in OUTCOME_STRINGS)
    rng = np.random.default_rng(5)
    worst_state, branches = 0.0, 0
    for ch in all_choices():
        for o in OUTCOME_STRINGS:
            try:
                _, q5, *_ = four_state_run(rng, choice=ch, forced_outcomes=o)
            except ValueError:
                continue  # zero-probability branch
            vec = np.linalg.eigh(q5)[1][:, -1]
            worst_state = max(worst_state, same_up_to_phase(vec, formula_state(ch, o)))
            branches += 1
    worst_pair = 0.0
    for k in range(100):
        fams = [random_bb84_family(np.random.default_rng([5, k, j])) for j in range(4)]
        for o in OUTCOME_STRINGS:
            ops = four_state_simulator_operators(fams, o)
            for a in EIGHT_ANGLES[:4]:
                worst_pair = max(worst_pair, float(np.abs(ops[a] + ops[a + PI] - np.eye(16)).max()))
    secs = time.time() - t0
    ok = uniform and worst_state <= 1e-9 and worst_pair <= 1e-9 and secs <= 120
    detail = f"uniform 1/8 {uniform}, Q5 vs closed form {worst_state:.1e} on {branches} branches, pair sums {worst_pair:.1e}"
    report(5, "four-state exactness", ok, detail, secs)
    return ok


def check_two_state_distribution() -> bool:
    t0 = time.time()
    expected = {Angle(0): Fraction(72, 256), Angle(Fraction(1, 2)): Fraction(64, 256), PI: Fraction(56, 256), Angle(Fraction(3, 2)): Fraction(64, 256)}
    dist = two_state_distribution(8)
    routes = dist == expected == two_state_distribution(8, "enumerate") == two_state_closed_form(8) == sum_class_closed_form(8)
    eps = two_state_correctness_error(8)
    ok = routes and eps == Fraction(1, 32) and eps <= Fraction(1, 2 ** (8 // 2 + 1))
    report(6, "two-state distribution", ok, f"N=8 law {[str(dist[a]) for a in expected]}, eps_corr {eps}", time.time() - t0)
    return ok


def check_two_state_bounds() -> bool:
    t0 = time.time()
    ns = (4, 8, 12, 16, 24, 32)
    recs = {n: two_state_bounds(n, "full" if n <= 12 else "blocks") for n in ns}
    names = ("parity_distance", "chi_distance", "delta")
    failures = [f"{k}@N={n}" for n in ns for k in names if not recs[n].passes[k]]
    decay = []
    for a, b in zip(ns, ns[1:]):
        for k in names:
            va, vb = recs[a].values[k], recs[b].values[k]
            ratio = (vb / va) ** (4 / (b - a))
            if not (vb < va and ratio <= 0.6):
                decay.append(f"{k} {a}->{b} ratio {ratio:.3f}")
    secs = time.time() - t0
    ok = not failures and not decay and secs <= 120
    detail = ", ".join(f"N={n}: chi {recs[n].chi_distance:.2e} (bound {recs[n].claimed_bounds['chi_distance']:.2e})" for n in (24, 32))
    if failures:
        detail += f"; bounds exceeded: {', '.join(failures)}"
    if decay:
        detail += f"; decay: {', '.join(decay)}"
    report(7, "two-state bound sweep", ok, detail, secs)
    return ok


def check_real_vs_simulated() -> bool:
    t0 = time.time()
    four = max(real_vs_simulated("four_state", p) for p in FOUR_STATE_PRESETS)
    server = max(real_vs_simulated("two_server", p) for p in TWO_SERVER_PRESETS)
    delta = two_state_bounds(8).delta
    two = {p: real_vs_simulated("two_state", p, 8) for p in TWO_STATE_PRESETS}
    secs = time.time() - t0
    ok = four <= 1e-10 and server <= 1e-10 and all(v <= delta and v <= 5 * 2.0**-2 for v in two.values()) and secs <= 120
    detail = f"four-state {four:.1e}, two-server {server:.1e}, two-state max {max(two.values()):.4f} vs assembled {delta:.4f}"
    report(8, "real vs simulated", ok, detail, secs)
    return ok


def check_overlap() -> bool:
    t0 = time.time()
    steps = iterate_halving(np.pi / 2, 5)
    got = constructed_overlap(steps[-1])
    target = (2**-0.5) ** (1 / 32)
    iso = max(max(h.check.isometry_error, h.check.mapping_error) for h in steps)
    ok = abs(got - target) <= 1e-10 and iso <= 1e-10
    report(9, "overlap halving", ok, f"overlap {got:.15f} vs {target:.15f}, isometry error {iso:.1e}", time.time() - t0)
    return ok


def check_reproducibility() -> bool:
    t0 = time.time()
    runner = CliRunner()
    commands = [
        ["ubqc", "--rows", "2", "--cols", "4", "--seed", "7"],
        ["bounds", "--N", "4,8", "--seed", "3"],
        ["bounds", "--N", "8", "--format", "csv"],
        ["blindness", "--family", "cubed", "--rows", "2", "--cols", "1", "--seed", "9"],
    ]
    same = []
    for cmd in commands:
        a, b = runner.invoke(cli_main, cmd), runner.invoke(cli_main, cmd)
        same.append(a.exit_code == b.exit_code == 0 and a.output.encode() == b.output.encode())
    ok = all(same)
    report(10, "CLI reproducibility", ok, f"{sum(same)}/{len(same)} commands byte-identical", time.time() - t0)
    return ok


CHECKS = [
    check_ubqc_correctness,
    check_eta_identity,
    check_blindness,
    check_steering,
    check_four_state,
    check_two_state_distribution,
    check_two_state_bounds,
    check_real_vs_simulated,
    check_overlap,
    check_reproducibility,
]


@pytest.mark.parametrize("check", CHECKS, ids=[c.__name__.removeprefix("check_") for c in CHECKS])
def test_criterion(check):
    assert check()


if __name__ == "__main__":
    results = [c() for c in CHECKS]
    sys.exit(0 if all(results) else 1)
