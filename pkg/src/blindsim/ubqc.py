"""Blind execution of brickwork patterns: Alice/Bob rounds, deviations and Bob's exact view."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, Union

import numpy as np
import numpy.typing as npt

from .linalg import Matrix, as_matrix, eigh_sorted, tensor
from .mbqc import (
    BrickworkPattern,
    PatternRun,
    Site,
    corrected_angle,
    output_corrections,
    parity,
    start_run,
)
from .prep import PrepFailure, PrepOutcome, PrepStateFamily, Retry, rsp_b, run_with_retries
from .states import EIGHT_ANGLES, PI, Angle, KrausChannel, gate, plus_state, zrot

VIEW_SITE_CAP = 4
VIEW_CHOICE_CAP = 16


class UBQCError(ValueError):
    pass


def delta_angle(phi_corrected: Angle, theta: Angle, r: int) -> Angle:
    return phi_corrected + theta + (r & 1) * PI


def padded_angle(pattern: BrickworkPattern, site: Site, input_bits: Sequence[int] | None) -> Angle:
    """Pattern angle after absorbing the X pad on the input column."""
    phi = pattern.angles[site]
    if not input_bits:
        return phi
    x, y = site
    if y == 0 and input_bits[x]:
        return -phi
    if y == 1 and input_bits[x]:
        return phi + PI
    return phi


@dataclass(frozen=True)
class AliceSecrets:
    thetas: Mapping[Site, Angle]
    rs: Mapping[Site, int]
    input_bits: tuple[int, ...]


Rows = list[npt.NDArray[np.complex128]]
Instrument = tuple[Sequence[npt.ArrayLike], Sequence[npt.ArrayLike]]


def _instrument_rows(inst: Instrument, tol: float = 1e-10) -> list[Rows]:
    """Split each branch's Kraus operators into 1x2 rows (measure, then discard)."""
    if len(inst) != 2:
        raise UBQCError("an instrument has exactly two branches")
    out = []
    for branch in inst:
        rows = []
        for k in branch:
            k = np.atleast_2d(np.asarray(k, dtype=np.complex128))
            if k.shape[1] != 2:
                raise UBQCError(f"instrument operator acts on dimension {k.shape[1]}, expected 2")
            rows.extend(k[j] for j in range(k.shape[0]))
        out.append(rows)
    gram = sum((np.outer(r.conj(), r) for br in out for r in br), np.zeros((2, 2), dtype=np.complex128))
    if np.abs(gram - np.eye(2)).max() > tol:
        raise UBQCError("instrument branches do not sum to a trace-preserving map")
    return out


def honest_instrument(delta: Angle) -> Instrument:
    return ([plus_state(delta).conj()[None, :]], [plus_state(delta + PI).conj()[None, :]])


@dataclass(frozen=True)
class BobBehavior:
    """Per-site deviations: a channel on each received qubit and a replacement instrument.

    An instrument entry is either a fixed pair of Kraus lists (branch 0, branch 1)
    or a callable receiving the announced angle and returning one.
    """

    on_receive: Mapping[Site, KrausChannel] = field(default_factory=dict)
    instruments: Mapping[Site, Union[Instrument, Callable[[Angle], Instrument]]] = field(default_factory=dict)

    @property
    def mode(self) -> str:
        return "deviant" if self.on_receive or self.instruments else "honest"

    def instrument(self, site: Site, delta: Angle) -> list[Rows]:
        inst = self.instruments.get(site)
        if inst is None:
            return _instrument_rows(honest_instrument(delta))
        if callable(inst):
            inst = inst(delta)
        return _instrument_rows(inst)

    @classmethod
    def replace_with_mixed(cls, pattern: BrickworkPattern) -> "BobBehavior":
        dep = KrausChannel.depolarizing(1.0)
        return cls(on_receive={s: dep for s in pattern.measured})


@dataclass(frozen=True)
class Event:
    kind: str  # prep | delta | outcome | output
    site: Site
    angle: Angle | None = None
    bit: int | None = None

    def line(self) -> str:
        a = self.angle.plain() if self.angle is not None else "-"
        b = str(self.bit) if self.bit is not None else "-"
        return f"{self.kind} {self.site[0]},{self.site[1]} {a} {b}"


@dataclass
class Transcript:
    events: list[Event] = field(default_factory=list)

    def add(self, kind: str, site: Site, angle: Angle | None = None, bit: int | None = None) -> None:
        self.events.append(Event(kind, site, angle, bit))

    def deltas(self) -> tuple[Angle, ...]:
        return tuple(e.angle for e in self.events if e.kind == "delta")

    def to_lines(self) -> str:
        return "".join(e.line() + "\n" for e in self.events)


PrepBackend = Callable[[Site, np.random.Generator], Union[PrepOutcome, Retry]]


def honest_backend(site: Site, rng: np.random.Generator) -> PrepOutcome | Retry:
    return rsp_b(0, rng)


def family_backend(family: PrepStateFamily) -> PrepBackend:
    return lambda site, rng: rsp_b(1, rng, family)


def _sample_pure(rho: Matrix, rng: np.random.Generator) -> npt.NDArray[np.complex128]:
    vals, vecs = eigh_sorted(rho)
    vals = np.clip(vals, 0.0, None)
    k = int(np.searchsorted(np.cumsum(vals), rng.random() * vals.sum(), side="right"))
    return vecs[:, min(k, vals.size - 1)]


def _kraus_trajectory(run: PatternRun, site: Site, channel: KrausChannel, rng: np.random.Generator) -> None:
    if channel.dim_in != 2 or channel.dim_out != 2:
        raise UBQCError(f"channel at {site} must map a qubit to a qubit")
    reg = run.register
    ax = reg.axis(site)
    branches = [np.moveaxis(np.tensordot(k, reg.psi, axes=([1], [ax])), 0, ax) for k in channel.kraus]
    weights = np.array([float(np.vdot(b, b).real) for b in branches])
    j = int(np.searchsorted(np.cumsum(weights), rng.random() * weights.sum(), side="right"))
    reg.psi = branches[min(j, len(branches) - 1)]
    reg.normalize()


def _instrument_trajectory(run: PatternRun, site: Site, rows: list[Rows], rng: np.random.Generator) -> int:
    reg = run.register
    choices = [(b, r) for b, br in enumerate(rows) for r in br]
    weights = np.array([reg.branch_probability(site, r.conj()) for _, r in choices])
    j = int(np.searchsorted(np.cumsum(weights), rng.random() * weights.sum(), side="right"))
    b, r = choices[min(j, len(choices) - 1)]
    reg.project(site, r.conj())
    reg.normalize()
    run.outcomes[site] = b
    return b


def run_ubqc(
    pattern: BrickworkPattern,
    rho_in: npt.ArrayLike,
    rng: np.random.Generator,
    prep: PrepBackend | None = None,
    bob: BobBehavior | None = None,
    retry_budget: int = 3,
    as_factor: bool = False,
) -> tuple[Matrix, Transcript, AliceSecrets]:
    """Run the blind protocol on a quantum input and return (output, transcript, secrets).

    The input column is one-time padded by Alice with X^i Z(theta); every other
    measured site is fed by ``prep``. With honest Bob the output equals the
    pattern unitary applied to the input. ``as_factor`` returns T with
    output = T T^dag instead of the density matrix.
    """
    prep = prep or honest_backend
    bob = bob or BobBehavior()
    n = pattern.rows
    transcript = Transcript()
    input_bits = tuple(int(b) for b in rng.integers(0, 2, size=n))
    thetas: dict[Site, Angle] = {}
    received: dict[Site, npt.NDArray[np.complex128]] = {}

    for x in range(n):
        thetas[(x, 0)] = EIGHT_ANGLES[int(rng.integers(8))]
    for site in pattern.measured:
        if site[1] == 0:
            transcript.add("prep", site)
            continue
        try:
            out = run_with_retries(lambda attempt: prep(site, rng), retry_budget)
        except PrepFailure as exc:
            raise UBQCError(f"preparation failed at site {site}: {exc}") from exc
        thetas[site] = out.angle
        received[site] = _sample_pure(as_matrix(out.state), rng)
        transcript.add("prep", site)
    rs = {s: int(rng.integers(2)) for s in pattern.measured}

    def pad(x: int) -> Matrix:
        return zrot(thetas[(x, 0)]) @ np.linalg.matrix_power(gate("X"), input_bits[x])

    run = start_run(pattern, rho_in, input_prep=pad)
    for site in pattern.inputs:
        if site in bob.on_receive:
            _kraus_trajectory(run, site, bob.on_receive[site], rng)

    def fresh(site: Site):
        return received.get(site, plus_state(0.0))

    s: dict[Site, int] = {}
    for site in pattern.measured:
        before = set(run.register.labels)
        run.ensure_ready(site, fresh)
        for new in [lab for lab in run.register.labels if lab not in before]:
            if new in bob.on_receive and new in received:
                _kraus_trajectory(run, new, bob.on_receive[new], rng)
        phi = corrected_angle(
            padded_angle(pattern, site, input_bits),
            parity(s, pattern.x_deps[site]),
            parity(s, pattern.z_deps[site]),
        )
        delta = delta_angle(phi, thetas[site], rs[site])
        transcript.add("delta", site, angle=delta)
        b = _instrument_trajectory(run, site, bob.instrument(site, delta), rng)
        transcript.add("outcome", site, bit=b)
        s[site] = b ^ rs[site]
    run.finish_entangling()
    for site in pattern.outputs:
        transcript.add("output", site)

    reg = run.register
    for o, (sx, sz) in output_corrections(pattern, s).items():
        x = o[0]
        if pattern.cols == 0:
            reg.apply(o, np.linalg.matrix_power(gate("X"), input_bits[x]) @ zrot(-thetas[o]))
            continue
        if pattern.cols == 1:
            sz ^= input_bits[x]
        if sx:
            reg.apply(o, gate("X"))
        if sz:
            reg.apply(o, gate("Z"))
    out = reg.factor(pattern.outputs) if as_factor else reg.density(pattern.outputs)
    return out, transcript, AliceSecrets(thetas, rs, input_bits)


# Bob's exact view ---------------------------------------------------------------

CQState = dict[tuple[Angle, ...], Matrix]


def bob_view(
    pattern: BrickworkPattern,
    family: PrepStateFamily,
    reports: Mapping[Site, int] | None = None,
    input_bits: Sequence[int] | None = None,
) -> CQState:
    """Classical-quantum state of announced angles and received systems.

    Averages exactly over Alice's angles and pad bits. Bob's reported outcomes
    are fixed by ``reports`` (default all zero). Every measured site carries a
    family state; keys are the announced angles in measurement order.
    """
    sites = pattern.measured
    choices = len(family.angles) * 2
    if len(sites) > VIEW_SITE_CAP or choices > VIEW_CHOICE_CAP:
        raise UBQCError(
            f"view enumeration over {len(sites)} sites with {choices} choices each exceeds the cap "
            f"({VIEW_SITE_CAP} sites, {VIEW_CHOICE_CAP} choices)"
        )
    reports = dict(reports or {})
    weight = 1.0 / choices ** len(sites)
    base = [padded_angle(pattern, u, input_bits) for u in sites]
    # Dynamic programming over sites: a node is (announced angles so far, the
    # report bits later sites still depend on). Nodes with equal keys merge.
    # Angles are interned to ints so the inner loop hashes only small tuples.
    later_deps = [set().union(*(pattern.x_deps[v] | pattern.z_deps[v] for v in sites[k + 1 :])) for k in range(len(sites))]
    ids: dict[Angle, int] = {}
    deltas_for: dict = {}

    def announced(k: int, sx: int, sz: int) -> list[int]:
        if (k, sx, sz) not in deltas_for:
            phi = corrected_angle(base[k], sx, sz)
            deltas_for[k, sx, sz] = [
                ids.setdefault(delta_angle(phi, theta, r), len(ids))
                for theta, r in itertools.product(family.angles, (0, 1))
            ]
        return deltas_for[k, sx, sz]

    mats = [family[theta] for theta in family.angles]
    nodes: dict = {((), ()): np.ones((1, 1), dtype=np.complex128)}
    for k, u in enumerate(sites):
        merged: dict = {}
        rep = reports.get(u, 0)
        for (deltas, bits), acc in nodes.items():
            s = dict(bits)
            ann = announced(k, parity(s, pattern.x_deps[u]), parity(s, pattern.z_deps[u]))
            kept_base = tuple((v, b) for v, b in bits if v in later_deps[k])
            kept = [tuple(sorted(kept_base + ((u, rep ^ r),))) if u in later_deps[k] else kept_base for r in (0, 1)]
            local: dict = {}
            for j, m in enumerate(mats):
                for r in (0, 1):
                    key = (deltas + (ann[2 * j + r],), kept[r])
                    local[key] = local[key] + m if key in local else m
            d = acc.shape[0]
            for key, m in local.items():
                e = m.shape[0]
                term = (acc[:, None, :, None] * m[None, :, None, :]).reshape(d * e, d * e)
                merged[key] = merged[key] + term if key in merged else term
        nodes = merged
    names = {i: a for a, i in ids.items()}
    view: CQState = {}
    for (deltas, _), m in nodes.items():
        label = tuple(names[i] for i in deltas)
        view[label] = view[label] + m * weight if label in view else m * weight
    return dict(sorted(view.items()))
