"""Qubit states, gates, channels, exact angles, purification and Uhlmann alignment."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
import numpy.typing as npt

from .linalg import (
    KERNEL_TOL,
    LinalgError,
    Matrix,
    as_matrix,
    eigh_sorted,
    is_hermitian,
)


class StateError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Angle:
    """An exact rational multiple of pi, reduced modulo 2 pi.

    ``Angle(Fraction(1, 4))`` is pi/4. Arithmetic stays exact and wraps into
    ``[0, 2)`` (in units of pi).
    """

    turns: Fraction  # multiple of pi, always in [0, 2)

    def __init__(self, value: Fraction | int | str = 0):
        frac = Fraction(value)
        object.__setattr__(self, "turns", frac % 2)

    @classmethod
    def k8(cls, k: int) -> "Angle":
        """The angle k*pi/4."""
        return cls(Fraction(k, 4))

    @classmethod
    def parse(cls, text: str) -> "Angle":
        """Read ``"3/4"``, ``"3/4pi"`` or ``"3/4·pi"`` (all meaning 3 pi/4)."""
        s = text.strip().replace("·", "").replace("*", "")
        if s.endswith("pi"):
            s = s[:-2]
        try:
            return cls(Fraction(s or "0"))
        except (ValueError, ZeroDivisionError) as exc:
            raise StateError(f"cannot parse angle {text!r}") from exc

    @property
    def numerator(self) -> int:
        return self.turns.numerator

    @property
    def denominator(self) -> int:
        return self.turns.denominator

    @property
    def radians(self) -> float:
        return float(self.turns) * math.pi

    @property
    def eighths(self) -> int:
        """Index k with self == k pi/4; raises if the angle is not on that grid."""
        q = self.turns * 4
        if q.denominator != 1:
            raise StateError(f"{self} is not a multiple of pi/4")
        return int(q)

    def __add__(self, other: "Angle") -> "Angle":
        return Angle(self.turns + _turns(other))

    __radd__ = __add__

    def __sub__(self, other: "Angle") -> "Angle":
        return Angle(self.turns - _turns(other))

    def __rsub__(self, other: "Angle") -> "Angle":
        return Angle(_turns(other) - self.turns)

    def __neg__(self) -> "Angle":
        return Angle(-self.turns)

    def __mul__(self, k: int) -> "Angle":
        if not isinstance(k, int):
            return NotImplemented
        return Angle(self.turns * k)

    __rmul__ = __mul__

    def __str__(self) -> str:
        return f"{self.numerator}/{self.denominator}·pi"

    def __repr__(self) -> str:
        return f"Angle({self.numerator}/{self.denominator})"

    def plain(self) -> str:
        """``num/den`` form used by the pattern file format."""
        return f"{self.numerator}/{self.denominator}"


def _turns(x) -> Fraction:
    if isinstance(x, Angle):
        return x.turns
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    raise TypeError(f"cannot combine Angle with {type(x).__name__}")


PI = Angle(1)
ZERO = Angle(0)
EIGHT_ANGLES: tuple[Angle, ...] = tuple(Angle.k8(k) for k in range(8))
FOUR_ANGLES: tuple[Angle, ...] = tuple(Angle.k8(2 * k) for k in range(4))


def _rad(theta: Angle | float) -> float:
    return theta.radians if isinstance(theta, Angle) else float(theta)


def plus_state(theta: Angle | float = ZERO) -> npt.NDArray[np.complex128]:
    """(|0> + e^{i theta}|1>)/sqrt(2)."""
    return np.array([1.0, np.exp(1j * _rad(theta))], dtype=np.complex128) / math.sqrt(2)


def plus_dm(theta: Angle | float = ZERO) -> Matrix:
    v = plus_state(theta)
    return np.outer(v, v.conj())


def basis_state(bits: Sequence[int]) -> npt.NDArray[np.complex128]:
    idx = 0
    for b in bits:
        idx = 2 * idx + int(b)
    v = np.zeros(2 ** len(bits), dtype=np.complex128)
    v[idx] = 1.0
    return v


_FIXED = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1, -1]),
    "H": np.array([[1, 1], [1, -1]]) / math.sqrt(2),
    "S": np.diag([1, 1j]),
    "S†": np.diag([1, -1j]),
    "ctrl-Z": np.diag([1, 1, 1, -1]),
}
_ALIASES = {"Sdg": "S†", "SDG": "S†", "CZ": "ctrl-Z", "CTRL-Z": "ctrl-Z"}


def gate(name: str, theta: Angle | float | None = None) -> Matrix:
    """Standard gate matrices; ``gate("Z", theta)`` is diag(1, e^{i theta})."""
    key = _ALIASES.get(name, name)
    if key in ("Z", "Z(θ)", "Zθ") and theta is not None:
        return np.diag([1.0, np.exp(1j * _rad(theta))]).astype(np.complex128)
    if key not in _FIXED:
        raise StateError(f"unknown gate {name!r}")
    return np.array(_FIXED[key], dtype=np.complex128)


def zrot(theta: Angle | float) -> Matrix:
    return gate("Z", theta)


def validate_density(rho: npt.ArrayLike, subnormalized: bool = False, tol: float = KERNEL_TOL) -> Matrix:
    """Return ``rho`` as an array after checking it is a valid density matrix."""
    arr = as_matrix(rho)
    if arr.shape[0] != arr.shape[1]:
        raise StateError(f"density matrix must be square, got {arr.shape}")
    if not is_hermitian(arr, 1e-10):
        raise StateError("density matrix is not Hermitian")
    vals = np.linalg.eigvalsh((arr + arr.conj().T) / 2)
    if vals.size and vals[0] < -tol:
        raise StateError(f"density matrix has negative eigenvalue {vals[0]:.3e}")
    tr = float(np.trace(arr).real)
    if subnormalized:
        if tr > 1 + tol:
            raise StateError(f"subnormalized state has trace {tr}")
    elif abs(tr - 1) > tol:
        raise StateError(f"density matrix has trace {tr}")
    return arr


def same_up_to_phase(a: npt.ArrayLike, b: npt.ArrayLike) -> float:
    """``1 - |<a|b>|`` for unit vectors; zero iff equal up to global phase."""
    a = np.asarray(a, dtype=np.complex128).reshape(-1)
    b = np.asarray(b, dtype=np.complex128).reshape(-1)
    return float(1.0 - abs(np.vdot(a, b)))


@dataclass(frozen=True)
class KrausChannel:
    """A completely positive map given by Kraus operators.

    With ``cptp=True`` the operators must satisfy sum K^dag K = I; otherwise
    only sum K^dag K <= I is required.
    """

    kraus: tuple[Matrix, ...]
    cptp: bool = True

    def __init__(self, kraus: Iterable[npt.ArrayLike], cptp: bool = True, tol: float = 1e-10):
        ops = tuple(as_matrix(k) for k in kraus)
        if not ops:
            raise StateError("channel needs at least one Kraus operator")
        d_in = ops[0].shape[1]
        if any(k.shape[1] != d_in for k in ops):
            raise StateError("Kraus operators disagree on input dimension")
        gram = sum(k.conj().T @ k for k in ops)
        if cptp:
            if np.abs(gram - np.eye(d_in)).max() > tol:
                raise StateError("Kraus operators are not trace preserving")
        else:
            top = np.linalg.eigvalsh((gram + gram.conj().T) / 2)[-1]
            if top > 1 + tol:
                raise StateError("Kraus operators increase trace")
        object.__setattr__(self, "kraus", ops)
        object.__setattr__(self, "cptp", cptp)

    @property
    def dim_in(self) -> int:
        return self.kraus[0].shape[1]

    @property
    def dim_out(self) -> int:
        return self.kraus[0].shape[0]

    def __call__(self, rho: npt.ArrayLike) -> Matrix:
        return apply_channel(self, rho)

    @classmethod
    def unitary(cls, u: npt.ArrayLike) -> "KrausChannel":
        return cls([u])

    @classmethod
    def identity(cls, d: int = 2) -> "KrausChannel":
        return cls([np.eye(d)])

    @classmethod
    def depolarizing(cls, p: float = 1.0) -> "KrausChannel":
        """Qubit depolarizing channel; p=1 maps every state to I/2."""
        paulis = [gate("I"), gate("X"), gate("Y"), gate("Z")]
        w = [1 - 3 * p / 4, p / 4, p / 4, p / 4]
        return cls([math.sqrt(x) * s for x, s in zip(w, paulis) if x > 0])

    @classmethod
    def dephasing(cls) -> "KrausChannel":
        return cls([np.diag([1, 0]), np.diag([0, 1])])


def apply_channel(c: KrausChannel, rho: npt.ArrayLike) -> Matrix:
    arr = as_matrix(rho)
    if arr.shape != (c.dim_in, c.dim_in):
        raise StateError(f"channel expects dimension {c.dim_in}, got {arr.shape}")
    return sum(k @ arr @ k.conj().T for k in c.kraus)


def purify(rho: npt.ArrayLike) -> npt.NDArray[np.complex128]:
    """Purification sum_k sqrt(lambda_k) |k> (x) |psi_k>.

    The first tensor factor is the purifying register, indexed by the
    eigenvalue order of ``rho``; tracing it out returns ``rho``.
    """
    arr = validate_density(rho)
    vals, vecs = eigh_sorted(arr)
    amps = np.sqrt(np.clip(vals, 0.0, None))
    d = arr.shape[0]
    # row k of the coefficient matrix is sqrt(lambda_k) psi_k
    coeff = (vecs * amps).T
    return coeff.reshape(d * d)


def uhlmann_align(
    p1: npt.ArrayLike,
    p2: npt.ArrayLike,
    dims: tuple[int, int] | None = None,
    aligned_subsystem: int = 0,
) -> Matrix:
    """Unitary W on one factor maximising |<p1| (W (x) I) |p2>|.

    Parameters
    ----------
    p1, p2 : array_like
        Bipartite pure states on ``dims[0] x dims[1]``.
    dims : tuple of int, optional
        Local dimensions; defaults to two equal factors.
    aligned_subsystem : {0, 1}
        Factor on which W acts.

    Returns
    -------
    numpy.ndarray
        The aligning unitary. The optimum overlap equals the square root of
        the fidelity between the reduced states on the other factor.
    """
    a = np.asarray(p1, dtype=np.complex128).reshape(-1)
    b = np.asarray(p2, dtype=np.complex128).reshape(-1)
    if a.shape != b.shape:
        raise LinalgError(f"purifications differ in size: {a.size} vs {b.size}")
    if dims is None:
        d = math.isqrt(a.size)
        if d * d != a.size:
            raise LinalgError("cannot infer equal bipartition; pass dims")
        dims = (d, d)
    if dims[0] * dims[1] != a.size:
        raise LinalgError(f"dims {dims} do not match state size {a.size}")
    A = a.reshape(dims)
    B = b.reshape(dims)
    if aligned_subsystem == 1:
        A, B = A.T, B.T
    elif aligned_subsystem != 0:
        raise LinalgError("aligned_subsystem must be 0 or 1")
    # <p1|(W x I)|p2> = Tr(W B A^dag); the optimum is W = V U^dag for B A^dag = U S V^dag
    u, _, vh = np.linalg.svd(B @ A.conj().T)
    return vh.conj().T @ u.conj().T


def apply_local(
    state: npt.ArrayLike, op: npt.ArrayLike, dims: tuple[int, int], subsystem: int = 0
) -> npt.NDArray[np.complex128]:
    """Apply ``op`` to one factor of a bipartite vector."""
    M = np.asarray(state, dtype=np.complex128).reshape(dims)
    op = as_matrix(op)
    out = op @ M if subsystem == 0 else M @ op.T
    return out.reshape(-1)
