"""Dense complex linear algebra kernels used by every protocol module.

Matrices are plain ``numpy.ndarray`` values of complex dtype. All functions
are pure and return fresh arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
import numpy.typing as npt

KERNEL_TOL = 1e-10
HERMITIAN_TOL = 1e-12

Matrix = npt.NDArray[np.complex128]


class LinalgError(ValueError):
    """Raised when a kernel receives inputs violating its preconditions."""


def as_matrix(m: npt.ArrayLike) -> Matrix:
    arr = np.asarray(m, dtype=np.complex128)
    if arr.ndim != 2:
        raise LinalgError(f"expected a 2-d matrix, got shape {arr.shape}")
    return arr


def is_hermitian(m: npt.ArrayLike, tol: float = HERMITIAN_TOL) -> bool:
    arr = as_matrix(m)
    if arr.shape[0] != arr.shape[1]:
        return False
    scale = max(1.0, float(np.abs(arr).max(initial=0.0)))
    return bool(np.abs(arr - arr.conj().T).max(initial=0.0) <= tol * scale)


def _require_hermitian(m: Matrix, name: str, tol: float = 1e-9) -> None:
    if not is_hermitian(m, tol):
        raise LinalgError(f"{name} is not Hermitian")


def tensor(*mats: npt.ArrayLike) -> Matrix:
    """Kronecker product of one or more matrices (or vectors), left to right."""
    if not mats:
        raise LinalgError("tensor needs at least one operand")
    return reduce(np.kron, (np.asarray(m, dtype=np.complex128) for m in mats))


def partial_trace(m: npt.ArrayLike, dims: list[int] | tuple[int, ...], keep) -> Matrix:
    """Trace out every subsystem not listed in ``keep``.

    Parameters
    ----------
    m : array_like
        Square matrix on the composite space ``dims[0] x dims[1] x ...``.
    dims : sequence of int
        Local dimensions, in tensor order.
    keep : int or iterable of int
        Indices of the subsystems that survive, returned in ascending order.

    Returns
    -------
    numpy.ndarray
        The reduced matrix on the kept subsystems.
    """
    arr = as_matrix(m)
    dims = [int(d) for d in dims]
    total = int(np.prod(dims)) if dims else 1
    if arr.shape != (total, total):
        raise LinalgError(f"matrix shape {arr.shape} does not match dims {dims}")
    keep_set = sorted({keep} if isinstance(keep, (int, np.integer)) else set(keep))
    if any(k < 0 or k >= len(dims) for k in keep_set):
        raise LinalgError(f"keep indices {keep_set} out of range for {len(dims)} subsystems")
    n = len(dims)
    traced = [k for k in range(n) if k not in keep_set]
    t = arr.reshape(dims + dims)
    # contract traced axes pairwise, highest index first so positions stay valid
    for k in sorted(traced, reverse=True):
        cur = t.ndim // 2
        t = np.trace(t, axis1=k, axis2=k + cur)
    d = int(np.prod([dims[k] for k in keep_set])) if keep_set else 1
    return t.reshape(d, d)


def eigh_sorted(h: npt.ArrayLike) -> tuple[npt.NDArray[np.float64], Matrix]:
    """Eigen-decomposition with descending eigenvalues and a fixed vector phase.

    Each eigenvector is rotated so that its first component with modulus above
    ``1e-12`` is real and positive.
    """
    arr = as_matrix(h)
    arr = (arr + arr.conj().T) / 2
    vals, vecs = np.linalg.eigh(arr)
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order].copy()
    for k in range(vecs.shape[1]):
        col = vecs[:, k]
        idx = np.flatnonzero(np.abs(col) > 1e-12)
        if idx.size:
            ph = col[idx[0]] / abs(col[idx[0]])
            vecs[:, k] = col / ph
    return vals, vecs


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues (descending) and orthonormal eigenvectors of a Hermitian matrix."""

    eigenvalues: npt.NDArray[np.float64]
    eigenvectors: Matrix

    @classmethod
    def of(cls, h: npt.ArrayLike) -> "Spectrum":
        vals, vecs = eigh_sorted(h)
        vals.setflags(write=False)
        vecs.setflags(write=False)
        return cls(vals, vecs)

    def reconstruct(self) -> Matrix:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def support(self, tol: float = KERNEL_TOL) -> "Spectrum":
        mask = self.eigenvalues > tol
        return Spectrum(self.eigenvalues[mask], self.eigenvectors[:, mask])


def trace_norm(m: npt.ArrayLike) -> float:
    """Sum of singular values (absolute eigenvalues for Hermitian input)."""
    arr = as_matrix(m)
    if is_hermitian(arr, 1e-9):
        return float(np.abs(np.linalg.eigvalsh((arr + arr.conj().T) / 2)).sum())
    return float(np.linalg.svd(arr, compute_uv=False).sum())


def factored_trace_norm(plus: npt.ArrayLike, minus: npt.ArrayLike) -> float:
    """Trace norm of A A^dag - B B^dag from the factors, without forming d x d matrices.

    With [A, B] = QR the difference equals Q (R J R^dag) Q^dag, J = diag(1, -1),
    so only a small Hermitian eigenproblem remains.
    """
    a = np.asarray(plus, dtype=np.complex128).reshape(np.shape(plus)[0], -1)
    b = np.asarray(minus, dtype=np.complex128).reshape(np.shape(minus)[0], -1)
    if a.shape[0] != b.shape[0]:
        raise LinalgError(f"factors disagree on dimension: {a.shape[0]} vs {b.shape[0]}")
    _, r = np.linalg.qr(np.hstack([a, b]))
    j = np.concatenate([np.ones(a.shape[1]), -np.ones(b.shape[1])])
    small = (r * j[None, :]) @ r.conj().T
    return float(np.abs(np.linalg.eigvalsh((small + small.conj().T) / 2)).sum())


def trace_distance(a: npt.ArrayLike, b: npt.ArrayLike) -> float:
    """Half the trace norm of ``a - b``; both inputs must be Hermitian."""
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise LinalgError(f"shape mismatch {a.shape} vs {b.shape}")
    _require_hermitian(a, "first argument")
    _require_hermitian(b, "second argument")
    d = a - b
    return 0.5 * float(np.abs(np.linalg.eigvalsh((d + d.conj().T) / 2)).sum())


def psd_sqrt(h: npt.ArrayLike) -> Matrix:
    vals, vecs = eigh_sorted(h)
    vals = np.sqrt(np.clip(vals, 0.0, None))
    return (vecs * vals) @ vecs.conj().T


def pseudo_inverse_sqrt(h: npt.ArrayLike, tol: float = KERNEL_TOL) -> Matrix:
    """Inverse square root on the support of a PSD matrix, zero on its kernel."""
    arr = as_matrix(h)
    _require_hermitian(arr, "input")
    vals, vecs = eigh_sorted(arr)
    if vals.size and vals[-1] < -tol:
        raise LinalgError(f"matrix has negative eigenvalue {vals[-1]:.3e}")
    inv = np.zeros_like(vals)
    mask = vals > tol
    inv[mask] = 1.0 / np.sqrt(vals[mask])
    return (vecs * inv) @ vecs.conj().T


def fidelity(a: npt.ArrayLike, b: npt.ArrayLike) -> float:
    """Squared Uhlmann fidelity ``(Tr sqrt(sqrt(a) b sqrt(a)))**2``."""
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise LinalgError(f"shape mismatch {a.shape} vs {b.shape}")
    # nuclear norm of sqrt(a) sqrt(b) avoids a second square root
    s = np.linalg.svd(psd_sqrt(a) @ psd_sqrt(b), compute_uv=False).sum()
    return float(min(max(s.real**2, 0.0), 1.0))


def projector(v: npt.ArrayLike) -> Matrix:
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    return np.outer(v, v.conj())
