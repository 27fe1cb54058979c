"""Trade one copy of {|+>, |+_phi>} for two copies of a closer pair."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..linalg import Matrix, partial_trace
from ..states import Angle, plus_state


class OverlapError(ValueError):
    pass


@dataclass(frozen=True)
class GramCheck:
    input_gram: Matrix
    output_gram: Matrix
    isometry_error: float  # max |U^dag U - I| restricted to the input span
    mapping_error: float  # max deviation of U|in_k> from the target outputs

    @property
    def gram_error(self) -> float:
        return float(np.abs(self.input_gram - self.output_gram).max())


@dataclass(frozen=True)
class Halving:
    phi: float
    phi_next: float
    unitary: Matrix  # 4x4, acting on (system, ancilla |0>)
    check: GramCheck


def _as_radians(phi) -> float:
    return phi.radians if isinstance(phi, Angle) else float(phi)


def halved_angle(phi) -> float:
    """phi' with |<+|+_phi'>|^2 = |<+|+_phi>|."""
    return 2 * float(np.arccos(np.sqrt(abs(np.cos(_as_radians(phi) / 2)))))


def overlap_halve(phi) -> Halving:
    """Unitary with U|+>|0> = |+>|+> and U|+_phi>|0> = e^{ig}|+_phi'>|+_phi'>."""
    x = _as_radians(phi) % (2 * np.pi)
    if np.isclose(np.sin(x / 2), 0.0, atol=1e-12) or np.isclose(np.cos(x / 2), 0.0, atol=1e-12):
        raise OverlapError("phi must give states that are neither identical nor orthogonal")
    if not 0 < x < np.pi:
        raise OverlapError("phi must lie strictly between 0 and pi")
    y = halved_angle(x)
    zero = np.array([1, 0], dtype=np.complex128)
    ins = [np.kron(plus_state(0.0), zero), np.kron(plus_state(x), zero)]
    outs = [np.kron(plus_state(0.0), plus_state(0.0)), np.kron(plus_state(y), plus_state(y))]
    # fix the free phase so the off-diagonal Gram entries agree, not just their moduli
    phase = np.vdot(ins[0], ins[1]) / np.vdot(outs[0], outs[1])
    outs[1] = outs[1] * phase / abs(phase)
    a = np.stack(ins, axis=1)
    b = np.stack(outs, axis=1)
    g_in, g_out = a.conj().T @ a, b.conj().T @ b
    # orthonormal frames of both spans with the same coefficients, then complete to a unitary
    chol = np.linalg.cholesky(g_in)
    inv = np.linalg.inv(chol.conj().T)
    fin, fout = a @ inv, b @ inv
    comp_in = _complement(fin)
    comp_out = _complement(fout)
    u = np.hstack([fout, comp_out]) @ np.hstack([fin, comp_in]).conj().T
    span = fin @ fin.conj().T
    iso = float(np.abs(span @ (u.conj().T @ u) @ span - span).max())
    mapped = float(max(np.abs(u @ ins[k] - outs[k]).max() for k in range(2)))
    return Halving(x, y, u, GramCheck(g_in, g_out, iso, mapped))


def _complement(frame: Matrix) -> Matrix:
    q, _ = np.linalg.qr(np.hstack([frame, np.eye(frame.shape[0], dtype=np.complex128)]))
    return q[:, frame.shape[1] :]


def first_copy(halving: Halving) -> Matrix:
    """Reduced state of the first output qubit of U|+_phi>|0>."""
    v = halving.unitary @ np.kron(plus_state(halving.phi), np.array([1, 0], dtype=np.complex128))
    return partial_trace(np.outer(v, v.conj()), [2, 2], keep=0)


def iterate_halving(phi, steps: int) -> list[Halving]:
    out = []
    x = _as_radians(phi)
    for _ in range(steps):
        h = overlap_halve(x)
        out.append(h)
        x = h.phi_next
    return out


def constructed_overlap(halving: Halving) -> float:
    """|<+|+_phi'>| read off the state U actually produces."""
    rho = first_copy(halving)
    return float(np.sqrt(abs(np.vdot(plus_state(0.0), rho @ plus_state(0.0)))))
