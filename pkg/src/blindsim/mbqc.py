"""Brickwork graphs and measurement-pattern execution with flow corrections."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import numpy.typing as npt

from .linalg import partial_trace
from .states import ZERO, Angle, plus_state, purify, validate_density

Site = tuple[int, int]  # (row x, column y), both zero-based
DEFAULT_MAX_QUBITS = 12


class PatternError(ValueError):
    pass


def max_qubits() -> int:
    raw = os.environ.get("BLINDSIM_MAX_QUBITS")
    if raw is None:
        return DEFAULT_MAX_QUBITS
    try:
        value = int(raw)
    except ValueError as exc:
        raise PatternError(f"BLINDSIM_MAX_QUBITS must be an integer, got {raw!r}") from exc
    if value < 1:
        raise PatternError("BLINDSIM_MAX_QUBITS must be positive")
    return value


def column_major(rows: int, cols: int) -> list[Site]:
    return [(x, y) for y in range(cols) for x in range(rows)]


def _order_key(site: Site) -> tuple[int, int]:
    return (site[1], site[0])


def brickwork_edges(n: int, m: int) -> list[tuple[Site, Site]]:
    """Edges of the brickwork graph with ``n`` rows and ``m + 1`` columns.

    Rows are wires joined by horizontal edges. Vertical edges close the
    bricks: columns 2 and 4 (mod 8) join rows (0,1), (2,3), ...; columns
    6 and 8 (mod 8) join rows (1,2), (3,4), ...
    """
    edges: set[tuple[Site, Site]] = set()
    for x in range(n):
        for y in range(m):
            edges.add(((x, y), (x, y + 1)))
    for y in range(m + 1):
        r = y % 8
        if r in (2, 4):
            start = 0
        elif r == 6 or (r == 0 and y >= 8):
            start = 1
        else:
            continue
        for x in range(start, n - 1, 2):
            edges.add(((x, y), (x + 1, y)))
    return sorted(edges, key=lambda e: (_order_key(e[0]), _order_key(e[1])))


@dataclass(frozen=True)
class BrickworkPattern:
    """Brickwork graph, measurement angles and flow dependency sets.

    Columns ``0 .. cols - 1`` are measured; column ``cols`` is the output.
    """

    rows: int
    cols: int
    edges: tuple[tuple[Site, Site], ...]
    angles: Mapping[Site, Angle]
    x_deps: Mapping[Site, frozenset[Site]]
    z_deps: Mapping[Site, frozenset[Site]]

    @property
    def num_qubits(self) -> int:
        return self.rows * (self.cols + 1)

    @property
    def measured(self) -> list[Site]:
        return column_major(self.rows, self.cols)

    @property
    def outputs(self) -> list[Site]:
        return [(x, self.cols) for x in range(self.rows)]

    @property
    def inputs(self) -> list[Site]:
        return [(x, 0) for x in range(self.rows)]

    def neighbours(self, site: Site) -> list[Site]:
        out = [b for a, b in self.edges if a == site] + [a for a, b in self.edges if b == site]
        return sorted(out, key=_order_key)

    def with_angles(self, angles: Mapping[Site, Angle] | Iterable[Angle]) -> "BrickworkPattern":
        if not isinstance(angles, Mapping):
            vals = list(angles)
            if len(vals) != len(self.measured):
                raise PatternError(f"expected {len(self.measured)} angles, got {len(vals)}")
            angles = dict(zip(self.measured, vals))
        unknown = set(angles) - set(self.measured)
        if unknown:
            raise PatternError(f"angles given for unmeasured sites {sorted(unknown)}")
        full = {s: angles.get(s, ZERO) for s in self.measured}
        return BrickworkPattern(self.rows, self.cols, self.edges, full, self.x_deps, self.z_deps)


def _flow_dependencies(n: int, m: int, edges) -> tuple[dict, dict]:
    nbrs: dict[Site, set[Site]] = {s: set() for s in column_major(n, m + 1)}
    for a, b in edges:
        nbrs[a].add(b)
        nbrs[b].add(a)
    xd: dict[Site, set[Site]] = {s: set() for s in nbrs}
    zd: dict[Site, set[Site]] = {s: set() for s in nbrs}
    for v in column_major(n, m):
        f = (v[0], v[1] + 1)  # flow successor
        xd[f].add(v)
        for w in nbrs[f]:
            if w != v:
                zd[w].add(v)
    return ({s: frozenset(d) for s, d in xd.items()}, {s: frozenset(d) for s, d in zd.items()})


def build_brickwork(n: int, m: int, angles=None) -> BrickworkPattern:
    if n < 1 or m < 0:
        raise PatternError(f"invalid brickwork size rows={n}, cols={m}")
    if n > 1 and n % 2:
        raise PatternError("brickwork needs one row or an even number of rows")
    if n * (m + 1) > max_qubits():
        raise PatternError(
            f"pattern needs {n * (m + 1)} qubits, above the cap of {max_qubits()} "
            "(set BLINDSIM_MAX_QUBITS to raise it)"
        )
    edges = tuple(brickwork_edges(n, m))
    xd, zd = _flow_dependencies(n, m, edges)
    pattern = BrickworkPattern(n, m, edges, {s: ZERO for s in column_major(n, m)}, xd, zd)
    return pattern if angles is None else pattern.with_angles(angles)


def corrected_angle(phi: Angle, s_x: int, s_z: int) -> Angle:
    """Adapt a measurement angle to pending X (sign flip) and Z (add pi) byproducts."""
    out = -phi if s_x & 1 else phi
    return out + Angle(1) if s_z & 1 else out


def parity(bits: Mapping[Site, int], sites: Iterable[Site]) -> int:
    return sum(bits[s] for s in sites) & 1


class Register:
    """A labelled multi-qubit state vector; qubits are appended and measured away."""

    def __init__(self, vec: npt.ArrayLike | None = None, labels: Iterable = ()):
        self.labels: list = list(labels)
        if vec is None:
            self.psi = np.ones((), dtype=np.complex128)
        else:
            self.psi = np.asarray(vec, dtype=np.complex128).reshape((2,) * len(self.labels))

    def __contains__(self, label) -> bool:
        return label in self.labels

    def axis(self, label) -> int:
        return self.labels.index(label)

    def add(self, label, state: npt.ArrayLike) -> None:
        if label in self.labels:
            raise PatternError(f"qubit {label} already present")
        self.psi = np.multiply.outer(self.psi, np.asarray(state, dtype=np.complex128))
        self.labels.append(label)

    def apply(self, label, op: npt.ArrayLike) -> None:
        ax = self.axis(label)
        self.psi = np.moveaxis(np.tensordot(op, self.psi, axes=([1], [ax])), 0, ax)

    def cz(self, a, b) -> None:
        ia, ib = self.axis(a), self.axis(b)
        idx = [slice(None)] * self.psi.ndim
        idx[ia] = 1
        idx[ib] = 1
        self.psi = self.psi.copy()
        self.psi[tuple(idx)] *= -1

    def project(self, label, bra: npt.ArrayLike) -> float:
        """Contract ``label`` with ``<bra|``, drop it, return the branch weight."""
        ax = self.axis(label)
        self.psi = np.tensordot(np.asarray(bra, dtype=np.complex128).conj(), self.psi, axes=([0], [ax]))
        self.labels.pop(ax)
        return float(np.vdot(self.psi, self.psi).real)

    def branch_probability(self, label, bra: npt.ArrayLike) -> float:
        ax = self.axis(label)
        amp = np.tensordot(np.asarray(bra, dtype=np.complex128).conj(), self.psi, axes=([0], [ax]))
        return float(np.vdot(amp, amp).real)

    def normalize(self) -> None:
        nrm = np.linalg.norm(self.psi)
        if nrm == 0:
            raise PatternError("state vanished")
        self.psi = self.psi / nrm

    def factor(self, keep: list) -> npt.NDArray[np.complex128]:
        """T with density(keep) = T T^dag: rows index ``keep``, columns everything else."""
        order = [self.axis(k) for k in keep] + [i for i, lab in enumerate(self.labels) if lab not in keep]
        return np.transpose(self.psi, order).reshape(2 ** len(keep), -1)

    def density(self, keep: list) -> npt.NDArray[np.complex128]:
        t = self.factor(keep)
        return t @ t.conj().T


@dataclass
class PatternRun:
    """Mutable execution state of one pattern run."""

    pattern: BrickworkPattern
    register: Register
    outcomes: dict[Site, int] = field(default_factory=dict)
    cursor: int = 0
    entangled: set = field(default_factory=set)

    def ensure_ready(self, site: Site, fresh_state=None) -> None:
        """Add and entangle every neighbour of ``site`` that is not yet live."""
        for s in [site] + self.pattern.neighbours(site):
            if s not in self.register and s not in self.outcomes:
                self.register.add(s, plus_state(0.0) if fresh_state is None else fresh_state(s))
        for a, b in self.pattern.edges:
            if (a, b) in self.entangled or site not in (a, b):
                continue
            self.register.cz(a, b)
            self.entangled.add((a, b))

    def finish_entangling(self) -> None:
        for s in self.pattern.outputs:
            self.ensure_ready(s)


def _basis_bra(delta: Angle | float, bit: int) -> npt.NDArray[np.complex128]:
    rad = delta.radians if isinstance(delta, Angle) else float(delta)
    return plus_state(rad + np.pi * bit)


def measure_xy(run: PatternRun, site: Site, delta: Angle, rng: np.random.Generator, forced: int | None = None) -> int:
    """Measure ``site`` in the {|+_delta>, |-_delta>} basis and record the bit."""
    if site in run.outcomes:
        raise PatternError(f"site {site} was already measured")
    if site not in run.register:
        raise PatternError(f"site {site} is not part of the live state")
    p0 = run.register.branch_probability(site, _basis_bra(delta, 0))
    total = float(np.vdot(run.register.psi, run.register.psi).real)
    if forced is None:
        bit = int(rng.random() * total >= p0)
    else:
        bit = int(forced)
    run.register.project(site, _basis_bra(delta, bit))
    run.register.normalize()
    run.outcomes[site] = bit
    return bit


def start_run(pattern: BrickworkPattern, rho_in: npt.ArrayLike, input_prep=None) -> PatternRun:
    """Load the input into column 0.

    A 1-D input is taken as a pure state vector; a density matrix is purified
    against a reference register.
    """
    n = pattern.rows
    arr = np.asarray(rho_in, dtype=np.complex128)
    if arr.ndim == 1:
        if arr.shape != (2**n,) or abs(np.linalg.norm(arr) - 1) > 1e-9:
            raise PatternError(f"input vector must be a unit vector on {n} qubits")
        vec, labels = arr, [(x, 0) for x in range(n)]
    else:
        rho = validate_density(arr)
        if rho.shape != (2**n, 2**n):
            raise PatternError(f"input must act on {n} qubits")
        vec = purify(rho)
        labels = [("ref", k) for k in range(n)] + [(x, 0) for x in range(n)]
    reg = Register(vec, labels)
    if input_prep is not None:
        for x in range(n):
            reg.apply((x, 0), input_prep(x))
    return PatternRun(pattern, reg)


def output_corrections(pattern: BrickworkPattern, s: Mapping[Site, int]) -> dict[Site, tuple[int, int]]:
    return {o: (parity(s, pattern.x_deps[o]), parity(s, pattern.z_deps[o])) for o in pattern.outputs}


def correct_outputs(run: PatternRun) -> None:
    from .states import gate

    for o, (sx, sz) in output_corrections(run.pattern, run.outcomes).items():
        if sx:
            run.register.apply(o, gate("X"))
        if sz:
            run.register.apply(o, gate("Z"))


def run_pattern(
    pattern: BrickworkPattern,
    rho_in: npt.ArrayLike,
    rng: np.random.Generator,
    forced: Mapping[Site, int] | None = None,
) -> tuple[npt.NDArray[np.complex128], dict[Site, int]]:
    """Execute the pattern without blinding and return (output state, outcomes)."""
    run = start_run(pattern, rho_in)
    for site in pattern.measured:
        run.ensure_ready(site)
        phi = corrected_angle(
            pattern.angles[site],
            parity(run.outcomes, pattern.x_deps[site]),
            parity(run.outcomes, pattern.z_deps[site]),
        )
        measure_xy(run, site, phi, rng, None if forced is None else forced.get(site))
        run.cursor += 1
    run.finish_entangling()
    correct_outputs(run)
    return run.register.density(pattern.outputs), dict(run.outcomes)


def pattern_unitary(pattern: BrickworkPattern) -> npt.NDArray[np.complex128]:
    """The linear map implemented by the all-zero outcome branch, rescaled to unit norm."""
    n = pattern.rows
    d = 2**n
    cols = []
    for k in range(d):
        vec = np.zeros(d, dtype=np.complex128)
        vec[k] = 1
        reg = Register(vec, [(x, 0) for x in range(n)])
        run = PatternRun(pattern, reg)
        for site in pattern.measured:
            run.ensure_ready(site)
            run.register.project(site, _basis_bra(pattern.angles[site], 0))
            run.outcomes[site] = 0
        run.finish_entangling()
        order = [run.register.axis(o) for o in pattern.outputs]
        cols.append(np.transpose(run.register.psi, order).reshape(d))
    u = np.array(cols).T
    return u * np.sqrt(2.0 ** len(pattern.measured))


# plain-text pattern format ---------------------------------------------------


def _site_str(s: Site) -> str:
    return f"{s[0]},{s[1]}"


def _parse_site(tok: str) -> Site:
    x, y = tok.split(",")
    return (int(x), int(y))


def pattern_to_text(pattern: BrickworkPattern) -> str:
    lines = [f"rows {pattern.rows}", f"cols {pattern.cols}"]
    lines += [f"edge {_site_str(a)} {_site_str(b)}" for a, b in pattern.edges]
    lines += [f"angle {_site_str(s)} {pattern.angles[s].plain()}" for s in pattern.measured]
    for s in column_major(pattern.rows, pattern.cols + 1):
        xs = " ".join(_site_str(v) for v in sorted(pattern.x_deps[s], key=_order_key))
        zs = " ".join(_site_str(v) for v in sorted(pattern.z_deps[s], key=_order_key))
        lines.append(f"xdep {_site_str(s)} : {xs}".rstrip())
        lines.append(f"zdep {_site_str(s)} : {zs}".rstrip())
    return "\n".join(lines) + "\n"


def pattern_from_text(text: str) -> BrickworkPattern:
    """Parse the text format; the graph must match the brickwork layout exactly."""
    rows = cols = None
    edges, angles = [], {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *rest = line.split()
        if key == "rows":
            rows = int(rest[0])
        elif key == "cols":
            cols = int(rest[0])
        elif key == "edge":
            a, b = sorted((_parse_site(rest[0]), _parse_site(rest[1])), key=_order_key)
            edges.append((a, b))
        elif key == "angle":
            angles[_parse_site(rest[0])] = Angle.parse(rest[1])
        elif key in ("xdep", "zdep"):
            continue  # derived from the graph and re-checked below
        else:
            raise PatternError(f"unknown pattern line {raw!r}")
    if rows is None or cols is None:
        raise PatternError("pattern text needs rows and cols")
    pattern = build_brickwork(rows, cols, angles)
    if edges and sorted(edges, key=lambda e: (_order_key(e[0]), _order_key(e[1]))) != list(pattern.edges):
        raise PatternError("edge list does not match the brickwork layout")
    return pattern
