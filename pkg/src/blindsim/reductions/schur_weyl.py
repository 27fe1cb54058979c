"""Block form of permutation-invariant qubit operators.

Any linear combination of N-fold tensor powers of 2x2 matrices decomposes as
a direct sum over spin labels j = N/2, N/2 - 1, ... of blocks
det(C)^(N/2 - j) Sym^(2j)(C), each repeated with the multiplicity of the
corresponding permutation irrep. Trace norms and fidelities then reduce to
small matrices of size 2j + 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Sequence

import numpy as np

from ..linalg import Matrix, psd_sqrt


def _dicke_scale(n: int) -> np.ndarray:
    return np.sqrt(np.array([comb(n, k) for k in range(n + 1)], dtype=float))


def derived_action(h: Matrix, n: int) -> Matrix:
    """Lie-algebra action of a 2x2 matrix on the n-th symmetric power (Dicke basis, k = number of ones)."""
    d = np.zeros((n + 1, n + 1), dtype=np.complex128)
    for l in range(n + 1):
        d[l, l] = (n - l) * h[0, 0] + l * h[1, 1]
        if l < n:
            d[l + 1, l] = (n - l) * h[1, 0]
        if l > 0:
            d[l - 1, l] = l * h[0, 1]
    s = _dicke_scale(n)
    return d * s[None, :] / s[:, None]


def _unitary_log(u: Matrix) -> Matrix:
    """Hermitian H with exp(iH) = u for a 2x2 unitary."""
    gamma = np.angle(np.linalg.det(u)) / 2
    v = u * np.exp(-1j * gamma)
    c = float(np.clip(np.trace(v).real / 2, -1.0, 1.0))
    t = np.arccos(c)
    if np.sin(t) > 1e-12:
        axis = 1j * (v - c * np.eye(2)) / np.sin(t)  # n . sigma
        return gamma * np.eye(2) - t * axis
    if c > 0:
        return gamma * np.eye(2)
    return gamma * np.eye(2) + np.pi * np.diag([1.0, -1.0])


def sym_unitary(u: Matrix, n: int) -> Matrix:
    vals, vecs = np.linalg.eigh(derived_action(_unitary_log(u), n))
    return (vecs * np.exp(1j * vals)) @ vecs.conj().T


def sym_power(c: Matrix, n: int) -> Matrix:
    """Restriction of c^(tensor n) to the symmetric subspace, via SVD to stay stable at large n."""
    c = np.asarray(c, dtype=np.complex128)
    if n == 0:
        return np.ones((1, 1), dtype=np.complex128)
    u, sv, vh = np.linalg.svd(c)
    k = np.arange(n + 1)
    diag = sv[0] ** (n - k) * sv[1] ** k
    return sym_unitary(u, n) @ (diag[:, None] * sym_unitary(vh.conj().T, n).conj().T)


def sym_power_direct(c: Matrix, n: int) -> Matrix:
    """Polynomial expansion of (c00 x + c10 y)^(n-l) (c01 x + c11 y)^l; exact but cancellation-prone."""
    m = np.zeros((n + 1, n + 1), dtype=np.complex128)
    for l in range(n + 1):
        for i in range(n - l + 1):
            for j in range(l + 1):
                m[i + j, l] += (
                    comb(n - l, i) * comb(l, j) * c[0, 0] ** (n - l - i) * c[1, 0] ** i * c[0, 1] ** (l - j) * c[1, 1] ** j
                )
    s = _dicke_scale(n)
    return m * s[None, :] / s[:, None]


def multiplicity(n_qubits: int, spin2: int) -> int:
    """How often the spin-(spin2/2) block appears in n qubits."""
    k = (n_qubits - spin2) // 2
    return comb(n_qubits, k) - (comb(n_qubits, k - 1) if k > 0 else 0)


@dataclass(frozen=True)
class BlockOperator:
    """Permutation-invariant operator on N qubits stored as {2j: block}."""

    n_qubits: int
    blocks: dict[int, Matrix]

    @classmethod
    def from_powers(cls, n_qubits: int, terms: Sequence[tuple[complex, Matrix]]) -> "BlockOperator":
        """sum_k coeff_k * C_k^(tensor N)."""
        blocks = {}
        for spin2 in range(n_qubits % 2, n_qubits + 1, 2):
            e = (n_qubits - spin2) // 2
            blocks[spin2] = sum(a * np.linalg.det(c) ** e * sym_power(c, spin2) for a, c in terms)
        return cls(n_qubits, blocks)

    def _combine(self, other: "BlockOperator", a: complex, b: complex) -> "BlockOperator":
        return BlockOperator(self.n_qubits, {k: a * v + b * other.blocks[k] for k, v in self.blocks.items()})

    def __add__(self, other: "BlockOperator") -> "BlockOperator":
        return self._combine(other, 1, 1)

    def __sub__(self, other: "BlockOperator") -> "BlockOperator":
        return self._combine(other, 1, -1)

    def scale(self, a: complex) -> "BlockOperator":
        return BlockOperator(self.n_qubits, {k: a * v for k, v in self.blocks.items()})

    def trace(self) -> complex:
        return sum(multiplicity(self.n_qubits, k) * np.trace(v) for k, v in self.blocks.items())

    def trace_norm(self) -> float:
        total = 0.0
        for k, v in self.blocks.items():
            h = (v + v.conj().T) / 2
            total += multiplicity(self.n_qubits, k) * float(np.abs(np.linalg.eigvalsh(h)).sum())
        return total

    def fidelity(self, other: "BlockOperator") -> float:
        """(Tr |sqrt(rho) sqrt(sigma)|)^2 summed blockwise."""
        root = 0.0
        for k, v in self.blocks.items():
            a = psd_sqrt((v + v.conj().T) / 2)
            w = other.blocks[k]
            b = psd_sqrt((w + w.conj().T) / 2)
            root += multiplicity(self.n_qubits, k) * float(np.linalg.svd(a @ b, compute_uv=False).sum())
        return root**2
