"""Small dense-linear-algebra helpers shared across modules.

Everything here works on plain complex numpy arrays.  Subspaces are always
represented by matrices with orthonormal columns (Euclidean inner product);
rank decisions use an absolute/relative singular-value cutoff of 1e-10.
"""
from __future__ import annotations

import numpy as np

from .errors import IllConditionedSpectrum, SingularMetric

RANK_TOL = 1e-10


def herm(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def eigh_checked(a: np.ndarray, rtol: float = 1e-10):
    """Hermitian eigendecomposition with a reconstruction check."""
    a = np.asarray(a, dtype=complex)
    w, v = np.linalg.eigh(herm(a))
    recon = (v * w) @ v.conj().T
    scale = 1.0 + np.abs(a).max(initial=0.0)
    if np.abs(recon - herm(a)).max(initial=0.0) > rtol * scale:
        raise IllConditionedSpectrum(
            f"eigendecomposition reconstruction error exceeds {rtol:g}"
        )
    return w, v


def funm_herm(a: np.ndarray, f) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix through its eigenvalues."""
    w, v = eigh_checked(a)
    return (v * f(w)) @ v.conj().T


def expm_herm(a: np.ndarray) -> np.ndarray:
    return funm_herm(a, np.exp)


def logm_hpd(a: np.ndarray) -> np.ndarray:
    w, v = eigh_checked(a)
    if w.min(initial=np.inf) <= 0:
        raise SingularMetric("matrix is not positive definite")
    return (v * np.log(w)) @ v.conj().T


def check_hpd(a: np.ndarray, cond_limit: float = 1e12) -> None:
    """Raise SingularMetric unless ``a`` is Hermitian positive definite with
    condition number below ``cond_limit``."""
    if a.size == 0:
        return
    if np.abs(a - a.conj().T).max() > 1e-10 * (1.0 + np.abs(a).max()):
        raise SingularMetric("metric is not Hermitian")
    w = np.linalg.eigvalsh(herm(a))
    if w.min() <= 0:
        raise SingularMetric("metric is not positive definite")
    if w.max() / w.min() > cond_limit:
        raise SingularMetric(f"metric condition number exceeds {cond_limit:g}")


def orthonormal_columns(a: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the column space of ``a`` (may be empty)."""
    a = np.asarray(a, dtype=complex)
    if a.ndim == 1:
        a = a[:, None]
    n = a.shape[0]
    if a.size == 0:
        return np.zeros((n, 0), dtype=complex)
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    cut = tol * max(1.0, s[0] if s.size else 0.0)
    r = int(np.sum(s > cut))
    return u[:, :r]


def projector(basis: np.ndarray) -> np.ndarray:
    return basis @ basis.conj().T


def complement_basis(basis: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the Euclidean orthogonal complement."""
    n = basis.shape[0]
    p = np.eye(n, dtype=complex) - projector(basis)
    return orthonormal_columns(p)


def subspace_sum(b1: np.ndarray, b2: np.ndarray) -> np.ndarray:
    return orthonormal_columns(np.hstack([b1, b2]))


def subspace_intersection(b1: np.ndarray, b2: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Orthonormal basis of range(b1) ∩ range(b2)."""
    n = b1.shape[0]
    stack = np.vstack([np.eye(n) - projector(b1), np.eye(n) - projector(b2)])
    if stack.size == 0:
        return np.zeros((n, 0), dtype=complex)
    _, s, vh = np.linalg.svd(stack)
    s = np.concatenate([s, np.zeros(n - s.size)])
    keep = s <= tol
    return orthonormal_columns(vh.conj().T[:, keep]) if keep.any() else np.zeros((n, 0), dtype=complex)


def subspace_angle(b1: np.ndarray, b2: np.ndarray) -> float:
    """Largest principal angle (radians) between two subspaces of equal rank."""
    if b1.shape[1] != b2.shape[1]:
        return np.pi / 2
    if b1.shape[1] == 0:
        return 0.0
    s = np.linalg.svd(b1.conj().T @ b2, compute_uv=False)
    return float(np.arccos(np.clip(s.min(), -1.0, 1.0)))


def random_hermitian(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * herm(a)


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(a)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def frob(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))
