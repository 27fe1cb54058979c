"""Four BB84 angles from N random draws of two non-orthogonal states."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Sequence

import numpy as np
import numpy.typing as npt

from ..linalg import Matrix, fidelity, tensor, trace_norm
from ..prep import PrepStateFamily, steering_measurements
from ..states import FOUR_ANGLES, PI, Angle, gate, plus_state, uhlmann_align
from ..ubqc import Transcript
from .schur_weyl import BlockOperator

FULL_SPACE_LIMIT = 12
BLOCK_LIMIT = 64
SIM_LIMIT = 8
TWO_STATE_PRESETS = ("honest", "rotate", "depolarize_output", "measure_z_first")

HONEST_PAIR = (plus_state(0.0), plus_state(np.pi / 2))
# cos(pi/8)|0> +- sin(pi/8)|1>: same Gram matrix as the honest pair up to a phase on the second state
_C, _S = np.cos(np.pi / 8), np.sin(np.pi / 8)
REAL_PAIR = (np.array([_C, _S], dtype=np.complex128), np.array([_C, -_S], dtype=np.complex128))


class TwoStateError(ValueError):
    pass


def _check_n(n: int, low: int = 2, high: int | None = None) -> None:
    if n % 2 or n < low:
        raise TwoStateError(f"N must be even and at least {low}, got {n}")
    if high is not None and n > high:
        raise TwoStateError(f"N={n} exceeds the limit {high} for this computation")


def correction_bits(b: Sequence[int]) -> tuple[int, ...]:
    """t_1 = 0 and t_k = b_{k-1}: the X pushed onto qubit k by the previous outcome."""
    return (0, *(int(x) & 1 for x in b))


def final_angle(i: Sequence[int], t: Sequence[int]) -> Angle:
    """theta = -sum_j (-1)^(t_j xor i_j) pi/4."""
    total = sum(1 if (a ^ c) == 0 else -1 for a, c in zip(i, t))
    return Angle.k8(-total)


def angle_of_weight(weight: int, n: int) -> Angle:
    """Angle for |i xor t| = weight: -(N - 2 weight) pi/4."""
    return Angle.k8(2 * weight - n)


# chain -------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainSettings:
    rotation: Angle = Angle.k8(-1)
    z_basis_first: bool = False
    depolarize_output: bool = False

    @classmethod
    def preset(cls, name: str) -> "ChainSettings":
        if name == "honest":
            return cls()
        if name == "rotate":
            return cls(rotation=Angle.k8(1))
        if name == "depolarize_output":
            return cls(depolarize_output=True)
        if name == "measure_z_first":
            return cls(z_basis_first=True)
        raise TwoStateError(f"unknown two-state deviation {name!r}; choose from {TWO_STATE_PRESETS}")


_PAULIS = [np.eye(2), gate("X"), gate("Y"), gate("Z")]


def _bra(bit: int, z_basis: bool) -> npt.NDArray[np.complex128]:
    if z_basis:
        return np.eye(2, dtype=np.complex128)[bit]
    return plus_state(np.pi * bit).conj()


def _chain_step(cur: npt.NDArray, fresh: npt.NDArray, bit: int, z_basis: bool) -> npt.NDArray:
    """H on the current qubit, ctrl-Z to the fresh one, measure the current one, X^bit on the fresh one.

    ``cur`` and ``fresh`` carry an extra trailing axis of input indices.
    """
    h = gate("H") @ cur.reshape(2, -1)
    joint = np.einsum("ai,bj->abij", h, fresh.reshape(2, -1))
    joint = joint * np.array([[1, 1], [1, -1]])[:, :, None, None]
    out = np.einsum("a,abij->bij", _bra(bit, z_basis), joint).reshape(2, -1)
    return gate("X") @ out if bit else out


def chain_kraus(n: int, b: Sequence[int], settings: ChainSettings = ChainSettings()) -> list[Matrix]:
    """Kraus operators (2 x 2^N) of Bob's round for outcome string b."""
    rot = gate("Z", settings.rotation)
    t = rot
    for j, bit in enumerate(b):
        t = _chain_step(t, rot, bit, settings.z_basis_first and j == 0)
    if settings.depolarize_output:
        return [0.5 * p @ t for p in _PAULIS]
    return [t]


def outcome_strings(n: int) -> list[tuple[int, ...]]:
    return list(itertools.product((0, 1), repeat=n - 1))


@dataclass
class TwoStateRun:
    n: int
    i_bits: tuple[int, ...]
    t_bits: tuple[int, ...]
    angle: Angle
    state: Matrix
    transcript: Transcript = field(default_factory=Transcript)


def two_state_run(
    n: int,
    rng: np.random.Generator,
    deviation: str = "honest",
    i_bits: Sequence[int] | None = None,
    forced_b: Sequence[int] | None = None,
    pair: tuple[npt.NDArray, npt.NDArray] = HONEST_PAIR,
) -> TwoStateRun:
    """Alice draws N states from the pair; Bob runs the chain and reports outcomes."""
    _check_n(n, 2, FULL_SPACE_LIMIT)
    settings = ChainSettings.preset(deviation)
    if i_bits is None:
        i_bits = tuple(int(x) for x in rng.integers(0, 2, size=n))
    i_bits = tuple(int(x) for x in i_bits)
    rot = gate("Z", settings.rotation)
    transcript = Transcript()
    for j in range(n):
        transcript.add("prep", (0, j))
    cur = rot @ pair[i_bits[0]]
    bits = []
    for j in range(1, n):
        fresh = rot @ pair[i_bits[j]]
        zb = settings.z_basis_first and j == 1
        branches = [_chain_step(cur, fresh, bit, zb).reshape(2) for bit in (0, 1)]
        if forced_b is not None:
            bit = int(forced_b[j - 1])
        else:
            w = np.array([np.vdot(v, v).real for v in branches])
            bit = int(rng.random() * w.sum() >= w[0])
        v = branches[bit]
        norm = np.linalg.norm(v)
        if norm < 1e-12:
            raise TwoStateError(f"forced outcome {bit} at step {j} has zero probability")
        cur = v / norm
        bits.append(bit)
        transcript.add("outcome", (0, j - 1), bit=bit)
    rho = np.outer(cur, cur.conj())
    if settings.depolarize_output:
        rho = np.eye(2, dtype=np.complex128) / 2
    transcript.add("output", (0, n - 1))
    t = correction_bits(bits)
    return TwoStateRun(n, i_bits, t, final_angle(i_bits, t), rho, transcript)


# distribution -----------------------------------------------------------------


def weight_class_sizes(n: int) -> list[int]:
    """Number of bit strings whose Hamming weight is r mod 4, for r = 0..3."""
    return [sum(comb(n, k) for k in range(r, n + 1, 4)) for r in range(4)]


def two_state_distribution(n: int, method: str = "binomial") -> dict[Angle, Fraction]:
    """Exact law of Alice's angle; 'binomial' counts weight classes, 'enumerate' walks all strings."""
    _check_n(n)
    counts = {a: 0 for a in FOUR_ANGLES}
    if method == "binomial":
        for w in range(n + 1):
            counts[angle_of_weight(w, n)] += comb(n, w)
    elif method == "enumerate":
        zeros = (0,) * n
        for i in itertools.product((0, 1), repeat=n):
            counts[final_angle(i, zeros)] += 1
    else:
        raise TwoStateError(f"unknown method {method!r}")
    return {a: Fraction(c, 2**n) for a, c in counts.items()}


def two_state_closed_form(n: int) -> dict[Angle, Fraction]:
    """p(0) = 1/4 + 2^(-K-1), p(pi) = 1/4 - 2^(-K-1), p(+-pi/2) = 1/4 with K = N/2."""
    _check_n(n)
    d = Fraction(1, 2 ** (n // 2 + 1))
    q = Fraction(1, 4)
    return {Angle(0): q + d, Angle(Fraction(1, 2)): q, PI: q - d, Angle(Fraction(3, 2)): q}


def sum_class_closed_form(n: int) -> dict[Angle, Fraction]:
    """Law of (sum of bits) mod 4 read as an angle l pi/2, for N = 4M: p(0) = 1/4 + (-1)^M 2^(-K-1)."""
    if n % 4:
        raise TwoStateError("the weight-class closed form needs N divisible by 4")
    m, k = n // 4, n // 2
    d = Fraction((-1) ** m, 2 ** (k + 1))
    q = Fraction(1, 4)
    return {Angle(0): q + d, Angle(Fraction(1, 2)): q, PI: q - d, Angle(Fraction(3, 2)): q}


def two_state_correctness_error(n: int) -> Fraction:
    dist = two_state_distribution(n)
    return sum((abs(p - Fraction(1, 4)) for p in dist.values()), Fraction(0)) / 2


# security states ----------------------------------------------------------------


def _class_index(theta: Angle, n: int) -> int:
    """Weight class r (mod 4) whose strings give angle theta."""
    l = theta.eighths // 2
    return (l + n // 2) % 4


def _product_columns(n: int, pair) -> npt.NDArray:
    single = np.stack(pair, axis=1)
    if not np.iscomplexobj(single) or not np.abs(single.imag).any():
        single = single.real  # halves memory for the real-basis oracle at N = 12
    cols = np.ones((1, 1), dtype=single.dtype)
    for _ in range(n):
        cols = np.einsum("ai,bj->abij", cols, single).reshape(cols.shape[0] * 2, -1)
    return cols  # column i is psi(i), i read big-endian


@dataclass
class SecurityStates:
    """psi_p (parity mixtures), eta, xi(theta) and chi(p) for one N."""

    n: int
    psi: tuple
    eta: object
    xi: dict
    chi: tuple

    @property
    def chi_partner(self):
        """The parity mixture chi(0) approximates: psi_{K mod 2}."""
        return self.psi[(self.n // 2) % 2]


def _kron_power(c: Matrix, n: int) -> Matrix:
    out = np.ones((1, 1), dtype=c.dtype)
    for _ in range(n):
        out = np.kron(out, c)
    return out


def _pair_operators(pair) -> tuple[Matrix, Matrix]:
    ra, rb = (np.outer(v, v.conj()) for v in pair)
    if not np.abs(ra.imag).any() and not np.abs(rb.imag).any():
        return ra.real, rb.real
    return ra, rb


def _class_sums(n: int, pair) -> list[Matrix]:
    """Sum of psi(i) over |i| = r mod 4, via (1/4) sum_k i^(-kr) (rho_a + i^k rho_b)^(tensor N)."""
    ra, rb = _pair_operators(pair)
    if not np.iscomplexobj(ra):
        even = _kron_power(ra + rb, n)
        odd = _kron_power(ra - rb, n)
        quarter = _kron_power(ra + 1j * rb, n)  # the k = 3 term is its complex conjugate
        return [0.25 * (even + (-1) ** r * odd + 2 * (quarter * (1j ** (-r))).real) for r in range(4)]
    gens = [_kron_power(ra + (1j**k) * rb, n) for k in range(4)]
    return [0.25 * sum((1j ** (-k * r)) * gens[k] for k in range(4)) for r in range(4)]


def security_states_full(n: int, pair=REAL_PAIR) -> SecurityStates:
    _check_n(n, 2, FULL_SPACE_LIMIT)
    sizes = weight_class_sizes(n)
    xi_by_class = [c / sizes[r] for r, c in enumerate(_class_sums(n, pair))]
    psi = tuple(2.0 ** (1 - n) * (sizes[p] * xi_by_class[p] + sizes[p + 2] * xi_by_class[p + 2]) for p in (0, 1))
    ra, rb = _pair_operators(pair)
    eta = 2.0**-n * _kron_power(ra + rb, n)  # equals (psi0 + psi1) / 2; diagonal for the real pair
    xi = {a: xi_by_class[_class_index(a, n)] for a in FOUR_ANGLES}
    chi = tuple(0.5 * (xi[Angle(Fraction(p, 2))] + xi[Angle(Fraction(p, 2)) + PI]) for p in (0, 1))
    return SecurityStates(n, psi, eta, xi, chi)


def security_states_blocks(n: int, pair=REAL_PAIR) -> SecurityStates:
    """Same objects in block form; class sums use the roots-of-unity filter over (rho_a + i^k rho_b)."""
    _check_n(n, 2, BLOCK_LIMIT)
    ra, rb = (np.outer(v, v.conj()) for v in pair)
    gens = [ra + (1j**k) * rb for k in range(4)]

    def class_sum(r: int) -> BlockOperator:
        return BlockOperator.from_powers(n, [(0.25 * (1j ** (-k * r)), gens[k]) for k in range(4)])

    classes = [class_sum(r) for r in range(4)]
    sizes = weight_class_sizes(n)
    psi = tuple((classes[p] + classes[p + 2]).scale(2.0 ** (1 - n)) for p in (0, 1))
    eta = BlockOperator.from_powers(n, [(2.0**-n, gens[0])])
    xi = {a: classes[_class_index(a, n)].scale(1 / sizes[_class_index(a, n)]) for a in FOUR_ANGLES}
    chi = tuple((xi[Angle(Fraction(p, 2))] + xi[Angle(Fraction(p, 2)) + PI]).scale(0.5) for p in (0, 1))
    return SecurityStates(n, psi, eta, xi, chi)


def two_state_security_states(n: int, representation: str = "auto", pair=REAL_PAIR) -> SecurityStates:
    if representation == "auto":
        representation = "full" if n <= FULL_SPACE_LIMIT else "blocks"
    if representation == "full":
        return security_states_full(n, pair)
    if representation == "blocks":
        return security_states_blocks(n, pair)
    raise TwoStateError(f"unknown representation {representation!r}")


def _half_norm(x) -> float:
    if isinstance(x, BlockOperator):
        return 0.5 * x.trace_norm()
    return 0.5 * float(np.abs(np.linalg.eigvalsh(x)).sum())


def _fid(a, b) -> float:
    if isinstance(a, BlockOperator):
        return a.fidelity(b)
    diag = np.diagonal(a)
    if np.array_equal(a, np.diag(diag)):
        # eta is diagonal in the real basis; skip the large square root
        root = np.sqrt(np.clip(diag.real, 0, None))
        vals = np.linalg.eigvalsh(root[:, None] * b * root[None, :])
        return float(np.sqrt(np.clip(vals, 0, None)).sum() ** 2)
    return fidelity(a, b)


def _full_purification(rho: Matrix) -> npt.NDArray[np.complex128]:
    vals, vecs = np.linalg.eigh(rho)
    return (vecs * np.sqrt(np.clip(vals, 0, None))).T.reshape(-1)


def aligned_overlap(target: Matrix, source: Matrix) -> float:
    """|<target| (W x I) |source>| after Uhlmann alignment of two purifications."""
    a, b = _full_purification(target), _full_purification(source)
    w = uhlmann_align(a, b)
    d = target.shape[0]
    return abs(np.vdot(a, (w @ b.reshape(d, d)).reshape(-1)))


@dataclass(frozen=True)
class BoundRecord:
    n: int
    distribution: dict[Angle, Fraction]
    eps_corr: Fraction
    parity_distance: float  # 1/2 ||psi0 - psi1||
    chi_distance: float  # 1/2 ||psi_{K mod 2} - chi(0)||
    eta_chi_distance: float  # 1/2 ||eta - chi(0)||
    purification_distances: tuple[float, float]
    delta: float  # 2 D0 + 2 D1
    delta_chain: float  # sqrt(eps') + 4 sqrt(eps'') with computed eps', eps''
    method: str

    @property
    def claimed_bounds(self) -> dict[str, float]:
        n = self.n
        return {
            "eps_corr": 2.0 ** (-n / 2 - 1),
            "parity_distance": 2.0 ** (-n / 2),
            "chi_distance": 2.0 ** (-3 * n / 4 + 2),
            "eta_chi_distance": 2.0 ** (-3 * n / 4 + 2) + 2.0 ** (-n / 2) / 2,
            "delta": 5 * 2.0 ** (-n / 4),
        }

    @property
    def values(self) -> dict[str, float]:
        return {
            "eps_corr": float(self.eps_corr),
            "parity_distance": self.parity_distance,
            "chi_distance": self.chi_distance,
            "eta_chi_distance": self.eta_chi_distance,
            "delta": self.delta,
        }

    @property
    def passes(self) -> dict[str, bool]:
        b = self.claimed_bounds
        return {k: v <= b[k] + 1e-12 for k, v in self.values.items()}


def two_state_bounds(n: int, representation: str = "auto") -> BoundRecord:
    """All distances of the security argument, computed exactly for one N."""
    st = two_state_security_states(n, representation)
    full = not isinstance(st.eta, BlockOperator)
    eps1 = _half_norm(st.psi[0] - st.psi[1])
    chi_d = _half_norm(st.chi_partner - st.chi[0])
    eta_chi = _half_norm(st.eta - st.chi[0])
    if full and n <= SIM_LIMIT:
        overlaps = [aligned_overlap(st.chi[p], st.eta) for p in (0, 1)]
        method = "uhlmann"
    else:
        overlaps = [np.sqrt(max(_fid(st.eta, st.chi[p]), 0.0)) for p in (0, 1)]
        method = "fidelity"
    dists = tuple(float(np.sqrt(max(1 - o * o, 0.0))) for o in overlaps)
    return BoundRecord(
        n=n,
        distribution=two_state_distribution(n),
        eps_corr=two_state_correctness_error(n),
        parity_distance=eps1,
        chi_distance=chi_d,
        eta_chi_distance=eta_chi,
        purification_distances=dists,
        delta=2 * dists[0] + 2 * dists[1],
        delta_chain=float(np.sqrt(eps1) + 4 * np.sqrt(eta_chi)),
        method=method,
    )


# simulator --------------------------------------------------------------------

_V = 2 * np.outer(plus_state(np.pi / 4), plus_state(np.pi / 4).conj()) - np.eye(2)


def _swap_phases(pair) -> Matrix:
    """y with (y (x) I) sum_i |i>|psi_i> = (I (x) V) sum_i |i>|psi_i> for the reflection V."""
    c1 = np.vdot(pair[1], _V @ pair[0])
    c2 = np.vdot(pair[0], _V @ pair[1])
    return np.array([[0, c1], [c2, 0]], dtype=np.complex128)


@dataclass
class TwoStateSimulator:
    """Purification |eta> plus aligned steering measurements for each parity."""

    n: int
    amplitudes: Matrix  # M[i, s] = 2^{-N/2} psi(i)_s
    aligners: tuple[Matrix, Matrix]  # W(p)
    steering: dict  # theta -> Pi(theta) on the chi(p) register
    y_gate: Matrix

    def register_gate(self, t: Sequence[int]) -> Matrix:
        return tensor(*[self.y_gate if x else np.eye(2) for x in t])

    def operator(self, theta: Angle, t: Sequence[int]) -> Matrix:
        """Pi(theta, t) = Y(t)^dag W(p)^dag Pi(theta) W(p) Y(t)."""
        p = (theta.eighths // 2) % 2
        g = self.aligners[p] @ self.register_gate(t)
        return g.conj().T @ self.steering[theta] @ g


def two_state_simulator(n: int, pair=HONEST_PAIR) -> TwoStateSimulator:
    _check_n(n, 2, SIM_LIMIT)
    st = security_states_full(n, pair)
    m = _product_columns(n, pair).T * 2.0 ** (-n / 2)
    eta_vec = m.reshape(-1)
    aligners, steering = [], {}
    for p in (0, 1):
        base = Angle(Fraction(p, 2))
        fam = PrepStateFamily({base: st.xi[base], base + PI: st.xi[base + PI]})
        purif, ops = steering_measurements(fam)
        aligners.append(uhlmann_align(purif, eta_vec))
        steering.update(ops.operators)
    return TwoStateSimulator(n, m, tuple(aligners), steering, _swap_phases(pair))


def _kraus_table(n: int, deviation: str) -> dict[tuple[int, ...], list[Matrix]]:
    s = ChainSettings.preset(deviation)
    return {b: chain_kraus(n, b, s) for b in outcome_strings(n)}


def two_state_real_blocks(n: int, deviation: str = "honest", pair=HONEST_PAIR) -> dict:
    """(theta, b) -> Bob's weight in the real protocol."""
    _check_n(n, 2, SIM_LIMIT)
    cols = _product_columns(n, pair)
    out = {}
    for b, kraus in _kraus_table(n, deviation).items():
        t = correction_bits(b)
        tmask = int("".join(map(str, t)), 2)
        shifted = np.array([bin(i ^ tmask).count("1") for i in range(2**n)])
        angles = [angle_of_weight(w, n) for w in range(n + 1)]
        images = [k @ cols for k in kraus]
        for a in FOUR_ANGLES:
            sel = np.array([angles[w] == a for w in shifted])
            acc = np.zeros((2, 2), dtype=np.complex128)
            for v in images:
                vs = v[:, sel]
                acc += vs @ vs.conj().T
            out[(a, b)] = acc / 2**n
    return out


def two_state_simulated_blocks(n: int, deviation: str = "honest", sim: TwoStateSimulator | None = None) -> dict:
    """(theta, b) -> Bob's weight when the simulator drives the four-angle resource."""
    sim = sim or two_state_simulator(n)
    out = {}
    mt = sim.amplitudes.T
    for b, kraus in _kraus_table(n, deviation).items():
        t = correction_bits(b)
        for a in FOUR_ANGLES:
            p = (a.eighths // 2) % 2
            g = sim.aligners[p] @ sim.register_gate(t)
            proj_t = sim.steering[a].T
            acc = np.zeros((2, 2), dtype=np.complex128)
            for k in kraus:
                left = k @ mt @ g.T
                acc += left @ proj_t @ left.conj().T
            out[(a, b)] = 0.5 * acc
    return out


def two_state_real_vs_simulated(n: int = 8, deviation: str = "honest") -> float:
    real = two_state_real_blocks(n, deviation)
    sim = two_state_simulated_blocks(n, deviation)
    return 0.5 * sum(trace_norm(real[k] - sim[k]) for k in real)
