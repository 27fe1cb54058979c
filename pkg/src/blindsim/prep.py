"""Ideal state-preparation resources, steering measurements and two-server preparation.

Canonical names used here:

* ``rsp_b``  random remote blind preparation: uniform angle, Bob's share may be any weak family
* ``mrsp_b`` measurement-based variant: the resource measures an angle-indexed
  two-outcome measurement on a system supplied by Bob
* ``rsp_s``  strong variant: Bob may only post-process the honest state with a channel
* ``sp_b`` / ``msp_b``  non-random wrappers where Alice picks the angle (exactly, or up to pi)
* ``sp2_emit``  the two-state source over |+> and |+_{pi/2}>
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
import numpy.typing as npt

from .linalg import KERNEL_TOL, Matrix, as_matrix, eigh_sorted, partial_trace, trace_distance
from .states import (
    EIGHT_ANGLES,
    PI,
    Angle,
    KrausChannel,
    StateError,
    apply_channel,
    plus_dm,
    plus_state,
    validate_density,
    zrot,
)

WEAK_TOL = 1e-10
DEFAULT_RETRY_BUDGET = 3


class PrepError(ValueError):
    pass


class PrepFailure(RuntimeError):
    """Raised when the retry budget of a resource session is exhausted."""


@dataclass(frozen=True)
class Retry:
    """Non-terminal signal: the resource rejected Bob's input and awaits a new one."""

    reason: str


@dataclass(frozen=True)
class PrepOutcome:
    angle: Angle
    state: Matrix


def _pairs(angles: Sequence[Angle]) -> list[Angle]:
    """Representatives in [0, pi) of the antipodal pairs; raises if a partner is missing."""
    aset = set(angles)
    if len(aset) % 2:
        raise PrepError(f"angle set has odd size {len(aset)}")
    missing = [a for a in aset if a + PI not in aset]
    if missing:
        raise PrepError(f"angle set not closed under adding pi: {sorted(missing)}")
    return sorted(a for a in aset if a.turns < 1)


@dataclass(frozen=True)
class PrepStateFamily:
    """Angle-indexed states sent to Bob.

    With ``normalized=False`` entries only need to be positive semidefinite;
    simulator families built from joint weights use this.
    """

    states: Mapping[Angle, Matrix]
    normalized: bool = True

    def __post_init__(self):
        if not self.states:
            raise PrepError("empty family")
        fixed = {}
        for a in sorted(self.states):
            try:
                m = as_matrix(self.states[a])
                fixed[a] = validate_density(m) if self.normalized else _check_psd(m)
            except (StateError, PrepError) as exc:
                raise PrepError(f"state for angle {a}: {exc}") from exc
        dims = {m.shape for m in fixed.values()}
        if len(dims) != 1:
            raise PrepError(f"family mixes dimensions {sorted(dims)}")
        object.__setattr__(self, "states", fixed)

    @property
    def angles(self) -> tuple[Angle, ...]:
        return tuple(self.states)

    @property
    def dim(self) -> int:
        return next(iter(self.states.values())).shape[0]

    def __getitem__(self, a: Angle) -> Matrix:
        return self.states[a]

    @classmethod
    def from_function(cls, f: Callable[[Angle], npt.ArrayLike], angles: Sequence[Angle] = EIGHT_ANGLES) -> "PrepStateFamily":
        return cls({a: as_matrix(f(a)) for a in angles})

    @classmethod
    def honest(cls, angles: Sequence[Angle] = EIGHT_ANGLES) -> "PrepStateFamily":
        return cls.from_function(plus_dm, angles)


def _check_psd(m: Matrix, tol: float = KERNEL_TOL) -> Matrix:
    if m.shape[0] != m.shape[1] or np.abs(m - m.conj().T).max() > 1e-10:
        raise PrepError("weight is not a Hermitian square matrix")
    if np.linalg.eigvalsh((m + m.conj().T) / 2)[0] < -tol:
        raise PrepError("weight is not positive semidefinite")
    return m


def tripled_family() -> PrepStateFamily:
    """theta -> |+_{3 theta}>: weakly but not strongly correlated with theta."""
    return PrepStateFamily.from_function(lambda a: plus_dm(3 * a))


@dataclass(frozen=True)
class WeakCheck:
    accepted: bool
    deviation: float
    eta: Matrix | None


def check_weak(family: PrepStateFamily, tol: float = WEAK_TOL) -> WeakCheck:
    """Do all antipodal pair averages (rho_t + rho_{t+pi})/2 coincide?

    ``deviation`` is the largest trace distance between a pair average and the
    pair average of the first angle. On acceptance ``eta`` is that common state.
    """
    reps = _pairs(family.angles)
    avgs = [(family[a] + family[a + PI]) / 2 for a in reps]
    dev = max(trace_distance(avgs[0], m) for m in avgs)
    ok = dev <= tol
    return WeakCheck(ok, dev, avgs[0] if ok else None)


@dataclass(frozen=True)
class MeasurementFamily:
    """Angle-indexed PSD operators with Pi_t + Pi_{t+pi} = I."""

    operators: Mapping[Angle, Matrix]

    def __post_init__(self):
        ops = {a: as_matrix(self.operators[a]) for a in sorted(self.operators)}
        object.__setattr__(self, "operators", ops)

    @property
    def angles(self) -> tuple[Angle, ...]:
        return tuple(self.operators)

    @property
    def dim(self) -> int:
        return next(iter(self.operators.values())).shape[0]

    def __getitem__(self, a: Angle) -> Matrix:
        return self.operators[a]

    def violations(self, tol: float = WEAK_TOL) -> list[str]:
        out = []
        try:
            reps = _pairs(self.angles)
        except PrepError as exc:
            return [str(exc)]
        if len({m.shape for m in self.operators.values()}) != 1:
            return ["operators disagree on dimension"]
        d = self.dim
        for a, m in self.operators.items():
            if np.abs(m - m.conj().T).max() > tol:
                out.append(f"operator {a} is not Hermitian")
            elif np.linalg.eigvalsh((m + m.conj().T) / 2)[0] < -tol:
                out.append(f"operator {a} is not positive")
        for a in reps:
            if np.abs(self.operators[a] + self.operators[a + PI] - np.eye(d)).max() > tol:
                out.append(f"operators {a} and {a + PI} do not sum to the identity")
        return out

    def shifted(self, offset: Angle) -> "MeasurementFamily":
        """Relabel so the operator at angle t is the old one at t - offset."""
        return MeasurementFamily({a + offset: m for a, m in self.operators.items()})


def steering_measurements(family: PrepStateFamily) -> tuple[npt.NDArray[np.complex128], MeasurementFamily]:
    """Purification of the pair average and measurements steering it onto the family.

    Returns ``(purification, operators)``: the purification is
    sum_k sqrt(l_k)|k>|psi_k> over the eigenpairs of eta (register first) and
    each operator acts on the register in that eigenbasis.
    """
    chk = check_weak(family)
    if not chk.accepted:
        raise PrepError(f"family is not weakly correlated (deviation {chk.deviation:.3e})")
    vals, vecs = eigh_sorted(chk.eta)
    d = vals.size
    support = vals > KERNEL_TOL
    inv = np.zeros(d)
    inv[support] = 1.0 / np.sqrt(vals[support])
    kernel = np.diag((~support).astype(float))
    ops = {}
    for a in family.angles:
        rel = vecs.conj().T @ family[a] @ vecs
        op = 0.5 * (inv[:, None] * rel.T * inv[None, :]) + 0.5 * kernel
        ops[a] = (op + op.conj().T) / 2
    amps = np.sqrt(np.clip(vals, 0.0, None))
    purification = (vecs * amps).T.reshape(d * d)
    return purification, MeasurementFamily(ops)


def _uniform(rng: np.random.Generator, items: Sequence):
    return items[int(rng.integers(len(items)))]


def rsp_b(c: int, rng: np.random.Generator, family: PrepStateFamily | None = None) -> PrepOutcome | Retry:
    if not c:
        theta = _uniform(rng, EIGHT_ANGLES)
        return PrepOutcome(theta, plus_dm(theta))
    if family is None:
        return Retry("corrupt interface needs a state family")
    try:
        chk = check_weak(family)
    except PrepError as exc:
        return Retry(str(exc))
    if not chk.accepted:
        return Retry(f"family is not weakly correlated (deviation {chk.deviation:.3e})")
    theta = _uniform(rng, family.angles)
    return PrepOutcome(theta, family[theta])


def rsp_b_distribution(family: PrepStateFamily) -> dict[Angle, Matrix]:
    """Exact joint law: angle -> probability-weighted Bob state."""
    return {a: family[a] / len(family.angles) for a in family.angles}


def _split_dims(op_dim: int, b_in: Matrix) -> int:
    total = b_in.shape[0]
    if total % op_dim:
        raise PrepError(f"input of dimension {total} does not contain a {op_dim}-dimensional factor")
    return total // op_dim


def _measure_weight(op: Matrix, b_in: Matrix) -> Matrix:
    """Unnormalized Bob-side state after outcome ``op`` on the first factor of ``b_in``."""
    rest = _split_dims(op.shape[0], b_in)
    if rest == 1:
        root = _psd_root(op)
        return root @ b_in @ root
    return partial_trace(np.kron(op, np.eye(rest)) @ b_in, [op.shape[0], rest], keep=1)


def _psd_root(m: Matrix) -> Matrix:
    vals, vecs = eigh_sorted(m)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.conj().T


def _mrsp_inputs_ok(measurements, b_in) -> str | None:
    if measurements is None or b_in is None:
        return "corrupt interface needs operators and an input system"
    bad = measurements.violations()
    if bad:
        return "; ".join(bad)
    try:
        b = validate_density(b_in)
        _split_dims(measurements.dim, b)
    except (StateError, PrepError) as exc:
        return str(exc)
    return None


def mrsp_b(
    c: int,
    rng: np.random.Generator,
    measurements: MeasurementFamily | None = None,
    b_in: npt.ArrayLike | None = None,
) -> PrepOutcome | Retry:
    """Draw a uniform antipodal pair, measure it on Bob's input, announce the realized angle.

    When the operators act on the whole input the Bob side keeps the
    Lüders post-measurement state; otherwise the measured factor is consumed
    and Bob keeps the remainder.
    """
    if not c:
        theta = _uniform(rng, EIGHT_ANGLES)
        return PrepOutcome(theta, plus_dm(theta))
    why = _mrsp_inputs_ok(measurements, b_in)
    if why:
        return Retry(why)
    b = as_matrix(b_in)
    base = _uniform(rng, _pairs(measurements.angles))
    w0 = _measure_weight(measurements[base], b)
    w1 = _measure_weight(measurements[base + PI], b)
    p0 = float(np.trace(w0).real)
    p1 = float(np.trace(w1).real)
    if rng.random() * (p0 + p1) < p0:
        return PrepOutcome(base, w0 / p0)
    return PrepOutcome(base + PI, w1 / p1)


def mrsp_b_distribution(measurements: MeasurementFamily, b_in: npt.ArrayLike) -> dict[Angle, Matrix]:
    why = _mrsp_inputs_ok(measurements, b_in)
    if why:
        raise PrepError(why)
    b = as_matrix(b_in)
    k = len(measurements.angles) // 2
    return {a: _measure_weight(measurements[a], b) / k for a in measurements.angles}


def rsp_s(c: int, rng: np.random.Generator, channel: KrausChannel | None = None) -> PrepOutcome | Retry:
    theta = _uniform(rng, EIGHT_ANGLES)
    if not c:
        return PrepOutcome(theta, plus_dm(theta))
    if channel is None or not channel.cptp or channel.dim_in != 2:
        return Retry("corrupt interface needs a trace-preserving qubit channel")
    return PrepOutcome(theta, apply_channel(channel, plus_dm(theta)))


def run_with_retries(request: Callable[[int], PrepOutcome | Retry], budget: int = DEFAULT_RETRY_BUDGET) -> PrepOutcome:
    """Call ``request(attempt)`` until it yields an outcome or the budget runs out."""
    reasons = []
    for attempt in range(budget):
        out = request(attempt)
        if isinstance(out, PrepOutcome):
            return out
        reasons.append(out.reason)
    raise PrepFailure(f"resource rejected {budget} inputs: {reasons[-1] if reasons else 'no attempts'}")


@dataclass(frozen=True)
class ChosenOutcome:
    outcome: PrepOutcome
    delta: Angle  # classical message to Bob: rotate by Z(delta)


def sp_b(theta: Angle, source: PrepOutcome) -> ChosenOutcome:
    """Turn a random preparation into one at Alice's chosen angle via a Z rotation message."""
    delta = theta - source.angle
    z = zrot(delta)
    return ChosenOutcome(PrepOutcome(theta, z @ source.state @ z.conj().T), delta)


def msp_b(theta: Angle, source: PrepOutcome) -> ChosenOutcome:
    """Like ``sp_b`` but only fixes the angle modulo pi; the pi bit stays random."""
    delta = theta - source.angle
    if delta.turns >= 1:
        delta = delta - PI
    z = zrot(delta)
    return ChosenOutcome(PrepOutcome(source.angle + delta, z @ source.state @ z.conj().T), delta)


def sp2_emit(rng: np.random.Generator) -> tuple[int, PrepOutcome]:
    i = int(rng.integers(2))
    angle = Angle.k8(2 * i)
    return i, PrepOutcome(angle, plus_dm(angle))


# two-server preparation -------------------------------------------------------

Instrument = tuple[Sequence[npt.ArrayLike], Sequence[npt.ArrayLike]]
B1Strategy = Callable[[Angle], Instrument]

BELL = np.array([1, 0, 0, 1], dtype=np.complex128) / np.sqrt(2)


def honest_b1(theta: Angle) -> Instrument:
    return ([plus_state(-theta).conj()[None, :]], [plus_state(PI - theta).conj()[None, :]])


def _check_instrument(inst: Instrument, tol: float = 1e-10) -> list[list[Matrix]]:
    branches = [[as_matrix(k) for k in branch] for branch in inst]
    if len(branches) != 2:
        raise PrepError("instrument needs exactly two branches")
    gram = sum((k.conj().T @ k for br in branches for k in br), np.zeros((2, 2), dtype=np.complex128))
    if np.abs(gram - np.eye(2)).max() > tol:
        raise PrepError("instrument branches do not sum to a trace-preserving map")
    return branches


def two_server_branches(b1: B1Strategy, theta: Angle) -> list[Matrix]:
    """Unnormalized second-server states for B1 outcomes m = 0, 1 given angle theta."""
    rho = np.outer(BELL, BELL.conj())
    out = []
    for branch in _check_instrument(b1(theta)):
        acc = np.zeros((2, 2), dtype=np.complex128)
        for k in branch:
            op = np.kron(k, np.eye(2))
            post = op @ rho @ op.conj().T
            acc += partial_trace(post, [k.shape[0], 2], keep=1)
        out.append(acc)
    return out


def two_server_prepare(
    rng: np.random.Generator,
    b1: B1Strategy | None = None,
    b2: KrausChannel | None = None,
) -> PrepOutcome:
    """B1 receives theta and measures its Bell half; Alice records theta + m pi."""
    theta = _uniform(rng, EIGHT_ANGLES)
    branches = two_server_branches(b1 or honest_b1, theta)
    p0 = float(np.trace(branches[0]).real)
    m = 0 if rng.random() < p0 else 1
    state = branches[m] / float(np.trace(branches[m]).real)
    if b2 is not None:
        state = apply_channel(b2, state)
    return PrepOutcome(theta + m * PI, state)


def two_server_family(b1: B1Strategy | None = None, b2: KrausChannel | None = None) -> PrepStateFamily:
    """Simulator family rho^phi = sum_m eta^{phi + m pi, m}, possibly subnormalized."""
    b1 = b1 or honest_b1
    states = {}
    for phi in EIGHT_ANGLES:
        acc = sum(two_server_branches(b1, phi + m * PI)[m] for m in (0, 1))
        states[phi] = acc if b2 is None else apply_channel(b2, acc)
    return PrepStateFamily(states, normalized=False)


def two_server_alice_marginal(b1: B1Strategy | None = None) -> dict[Angle, float]:
    fam = two_server_family(b1)
    return {a: float(np.trace(fam[a]).real) / len(fam.angles) for a in fam.angles}
