"""Eight-angle preparation from four BB84-type preparations plus a two-wire gadget."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np
import numpy.typing as npt

from ..linalg import Matrix, partial_trace, tensor
from ..prep import BELL, MeasurementFamily, PrepError
from ..states import EIGHT_ANGLES, FOUR_ANGLES, Angle, KrausChannel, gate, plus_dm, plus_state
from ..ubqc import Transcript

BITS = ("a1", "a2", "b1", "b2", "c1", "c2", "p")
PI_BITS = ("a1", "b1", "c1", "c2")  # select the state within a basis
BASIS_BITS = ("a2", "b2", "p")  # select the basis

# who draws which bit; in an honest run both splits are uniform draws
SPLITS = {
    "box": frozenset({"a1", "b1", "c1", "c2"}),  # Alice; the functionality draws a2, b2, p
    "msp": frozenset({"a2", "b2", "p"}),  # Alice picks bases, pi bits come from measurement
}


@dataclass(frozen=True)
class FourStateChoice:
    a1: int
    a2: int
    b1: int
    b2: int
    c1: int
    c2: int
    p: int

    @classmethod
    def from_tuple(cls, bits: Sequence[int]) -> "FourStateChoice":
        return cls(*(int(b) & 1 for b in bits))

    def as_tuple(self) -> tuple[int, ...]:
        return tuple(getattr(self, k) for k in BITS)

    def prepared_angles(self) -> tuple[Angle, Angle, Angle, Angle]:
        """Angles of Q1..Q4: Z^x S^y |+> is |+_{x pi + y pi/2}>."""
        half = lambda x, y: Angle(Fraction(2 * x + y, 2))
        return (
            half(self.a1, self.a2),
            half(self.b1, self.b2),
            half(self.c1, self.p),
            half(self.c2, 1 - self.p),
        )


def final_angle(choice: FourStateChoice, outcomes: Sequence[int]) -> Angle:
    o1, o2, o3, o4 = (int(o) & 1 for o in outcomes)
    c = choice
    if c.p == 0:
        mag = Angle(Fraction(2 * (c.a1 ^ o1 ^ c.c2) + c.a2, 2))
        return -mag if c.c1 ^ o2 else mag
    mag = Angle(Fraction(4 * (c.b1 ^ o3 ^ c.c1) + 2 * c.b2 + 1, 4))
    return -mag if c.c2 ^ o4 else mag


def formula_state(choice: FourStateChoice, outcomes: Sequence[int]) -> npt.NDArray[np.complex128]:
    """Closed-form Q5, up to global phase, for the given choice and outcomes."""
    o1, o2, o3, o4 = outcomes
    c = choice
    X, Z, S = gate("X"), gate("Z"), gate("S")
    mp = np.linalg.matrix_power
    if c.p == 0:
        return mp(X, c.c1 ^ o2) @ mp(Z, c.a1 ^ o1 ^ c.c2) @ mp(S, c.a2) @ plus_state(0.0)
    rot = gate("Z", Angle.k8(1))
    return mp(X, c.c2 ^ o4) @ mp(Z, c.b1 ^ o3 ^ c.c1) @ mp(S, c.b2) @ rot @ plus_state(0.0)


# Bob's gadget as a map from Q1..Q4 to Q5 --------------------------------------------

_SDG_H_SDG = gate("S†") @ gate("H") @ gate("S†")
_EDGES = ((0, 2), (2, 4), (1, 3), (3, 4))  # Q1-Q3, Q3-Q5, Q2-Q4, Q4-Q5


def _local_ops() -> list[Matrix]:
    return [np.eye(2), gate("Z", Angle.k8(1)), _SDG_H_SDG, _SDG_H_SDG]


def gadget_kraus(outcomes: Sequence[int]) -> Matrix:
    """2 x 16 operator: Bob's local gates, fresh |+>, ctrl-Z wiring, X-basis projections."""
    pre = tensor(*_local_ops())
    fresh = np.kron(np.eye(16), plus_state(0.0)[:, None])  # 32 x 16
    cz = np.ones(32)
    for k in range(32):
        bits = [(k >> (4 - q)) & 1 for q in range(5)]
        for a, b in _EDGES:
            if bits[a] and bits[b]:
                cz[k] *= -1
    o1, o2, o3, o4 = outcomes  # measurement order is Q1, Q3, Q2, Q4
    bras = tensor(*[plus_state(np.pi * o).conj()[None, :] for o in (o1, o3, o2, o4)], np.eye(2))
    return bras @ (cz[:, None] * (fresh @ pre))


OUTCOME_STRINGS: tuple[tuple[int, ...], ...] = tuple(itertools.product((0, 1), repeat=4))


def _kron_kraus(channels: Sequence[KrausChannel]) -> list[Matrix]:
    return [tensor(*ks) for ks in itertools.product(*(c.kraus for c in channels))]


@dataclass(frozen=True)
class FourStateBob:
    """Bob's behaviour as an instrument from Q1..Q4 to (outcome string, Q5)."""

    name: str
    kraus: Mapping[tuple[int, ...], tuple[Matrix, ...]]

    def apply(self, o: tuple[int, ...], rho: Matrix) -> Matrix:
        return sum(k @ rho @ k.conj().T for k in self.kraus[o])


def four_state_bob(preset: str = "honest") -> FourStateBob:
    """Presets: honest, dephase (each received qubit), rotate (Z(pi/4) on each), measure_z."""
    if preset == "measure_z":
        kraus = {}
        for o in OUTCOME_STRINGS:
            idx = int("".join(map(str, o)), 2)
            row = np.zeros((1, 16), dtype=np.complex128)
            row[0, idx] = 1
            kraus[o] = (plus_state(0.0)[:, None] @ row,)
        return FourStateBob(preset, kraus)
    if preset == "honest":
        pre = [np.eye(16)]
    elif preset == "dephase":
        pre = _kron_kraus([KrausChannel.dephasing()] * 4)
    elif preset == "rotate":
        pre = [tensor(*[gate("Z", Angle.k8(1))] * 4)]
    else:
        raise ValueError(f"unknown four-state deviation {preset!r}")
    return FourStateBob(preset, {o: tuple(gadget_kraus(o) @ k for k in pre) for o in OUTCOME_STRINGS})


FOUR_STATE_PRESETS = ("honest", "dephase", "rotate", "measure_z")


def four_state_run(
    rng: np.random.Generator,
    bob: FourStateBob | None = None,
    choice: FourStateChoice | None = None,
    forced_outcomes: Sequence[int] | None = None,
) -> tuple[Angle, Matrix, Transcript, FourStateChoice, tuple[int, ...]]:
    """One honest-source run: returns (Alice's angle, Q5, transcript, bits, outcomes)."""
    bob = bob or four_state_bob()
    if choice is None:
        choice = FourStateChoice.from_tuple(rng.integers(0, 2, size=7))
    transcript = Transcript()
    qs = choice.prepared_angles()
    rho = tensor(*[plus_dm(a) for a in qs])
    for k in range(4):
        transcript.add("prep", (0, k))
    weights = {o: bob.apply(o, rho) for o in OUTCOME_STRINGS}
    if forced_outcomes is None:
        probs = np.array([np.trace(weights[o]).real for o in OUTCOME_STRINGS])
        j = int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum(), side="right"))
        outcomes = OUTCOME_STRINGS[min(j, 15)]
    else:
        outcomes = tuple(int(o) for o in forced_outcomes)
    q5 = weights[outcomes]
    if np.trace(q5).real < 1e-12:
        raise ValueError(f"outcome string {outcomes} has zero probability for these bits")
    q5 = q5 / np.trace(q5).real
    for k, o in enumerate(outcomes):
        transcript.add("outcome", (0, k), bit=o)
    transcript.add("output", (0, 4))
    return final_angle(choice, outcomes), q5, transcript, choice, outcomes


def all_choices() -> list[FourStateChoice]:
    return [FourStateChoice.from_tuple(b) for b in itertools.product((0, 1), repeat=7)]


def preimage(outcomes: Sequence[int]) -> dict[Angle, list[FourStateChoice]]:
    """s(theta): the bit choices that Alice maps to theta for these outcomes."""
    out: dict[Angle, list[FourStateChoice]] = {a: [] for a in EIGHT_ANGLES}
    for ch in all_choices():
        out[final_angle(ch, outcomes)].append(ch)
    return out


def four_state_distribution(outcomes: Sequence[int], restrict: Mapping[str, int] | None = None) -> dict[Angle, Fraction]:
    """Exact law of Alice's angle over uniform bit choices (optionally with some bits pinned)."""
    restrict = dict(restrict or {})
    counts = {a: 0 for a in EIGHT_ANGLES}
    total = 0
    for ch in all_choices():
        if any(getattr(ch, k) != v for k, v in restrict.items()):
            continue
        counts[final_angle(ch, outcomes)] += 1
        total += 1
    return {a: Fraction(c, total) for a, c in counts.items() if c or not restrict}


def four_state_distribution_split(outcomes: Sequence[int], split: str) -> dict[Angle, float]:
    """Law of Alice's angle when the bits outside ``SPLITS[split]`` come from a measurement.

    Measured pi bits are outcomes of the honest steering measurement on a Bell
    half, so their probabilities come from the Born rule rather than being assumed.
    Basis bits are uniform draws whoever makes them.
    """
    chosen = SPLITS[split]
    bell = np.outer(BELL, BELL.conj())
    law = {a: 0.0 for a in EIGHT_ANGLES}
    for ch in all_choices():
        w = 0.5 ** len(BASIS_BITS)
        for k, name in enumerate(PI_BITS):
            if name in chosen:
                w *= 0.5
            else:
                proj = plus_dm(-ch.prepared_angles()[k])
                w *= float(np.trace(np.kron(proj, np.eye(2)) @ bell).real)
        law[final_angle(ch, outcomes)] += w
    return law


# simulator ------------------------------------------------------------------------


def _check_family(fam: MeasurementFamily, k: int) -> None:
    if set(fam.angles) != set(FOUR_ANGLES):
        raise PrepError(f"family {k} must be indexed by the four angles k pi/2")
    bad = fam.violations()
    if bad:
        raise PrepError(f"family {k}: {'; '.join(bad)}")


def system_operators(families: Sequence[MeasurementFamily], ch: FourStateChoice) -> Matrix:
    """Pi^1(a1,a2) (x) Pi^2(b1,b2) (x) Pi^3(c1,p) (x) Pi^4(c2,1-p)."""
    angles = ch.prepared_angles()
    return tensor(*[families[k][angles[k]] for k in range(4)])


def four_state_simulator_operators(families: Sequence[MeasurementFamily], outcomes: Sequence[int]) -> MeasurementFamily:
    """Eight-angle operators Pi_theta = 1/2 sum_{s(theta)} Pi^1 (x) Pi^2 (x) Pi^3 (x) Pi^4.

    Each antipodal pair s(theta) + s(theta + pi) covers every pi bit twice
    (once per compatible basis triple), hence the factor 1/2.
    """
    if len(families) != 4:
        raise PrepError("need one measurement family per system")
    for k, f in enumerate(families):
        _check_family(f, k)
    pre = preimage(outcomes)
    return MeasurementFamily({a: 0.5 * sum(system_operators(families, ch) for ch in pre[a]) for a in EIGHT_ANGLES})


def honest_measurements() -> MeasurementFamily:
    return MeasurementFamily({a: plus_dm(-a) for a in FOUR_ANGLES})


def bell_inputs() -> Matrix:
    """Four Bell pairs ordered (R1..R4, B1..B4): the functionality's halves first."""
    v = tensor(*[BELL] * 4).reshape([2] * 8)
    v = v.transpose(0, 2, 4, 6, 1, 3, 5, 7).reshape(256)
    return np.outer(v, v.conj())


def _bob_side(op16: Matrix, rho_in: Matrix) -> Matrix:
    return partial_trace(np.kron(op16, np.eye(16)) @ rho_in, [16, 16], keep=1)


def real_blocks(families, rho_in: Matrix, bob: FourStateBob) -> dict[tuple[Angle, tuple[int, ...]], Matrix]:
    """(theta, o) -> weight of Bob's Q5 in the real protocol (basis bits uniform, pi bits measured)."""
    side = {ch: _bob_side(system_operators(families, ch), rho_in) for ch in all_choices()}
    out = {}
    for o in OUTCOME_STRINGS:
        pre = preimage(o)
        for a in EIGHT_ANGLES:
            acc = sum(side[ch] for ch in pre[a]) / 8
            out[(a, o)] = bob.apply(o, acc)
    return out


def simulated_blocks(families, rho_in: Matrix, bob: FourStateBob) -> dict[tuple[Angle, tuple[int, ...]], Matrix]:
    """Same blocks through the eight-angle resource fed with the aggregated operators."""
    out = {}
    for o in OUTCOME_STRINGS:
        ops = four_state_simulator_operators(families, o)
        for a in EIGHT_ANGLES:
            out[(a, o)] = bob.apply(o, _bob_side(ops[a], rho_in) / 4)
    return out
