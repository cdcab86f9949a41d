"""Dense operator algebra on small Hilbert spaces.

Matrices are plain ``numpy`` arrays. The Hilbert-Schmidt convention used
throughout is ``<a, b> = Tr(a^dagger b)`` and operator bases are normalized
to ``<x_i, x_j> = delta_ij`` (not the ``2 delta_ij`` physics convention).
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

HERMITIAN_RTOL = 1e-12
UNITARY_ATOL = 1e-10

SIGMA_I = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class DimensionError(ValueError):
    """Operands have incompatible shapes."""


class NotHermitianError(ValueError):
    pass


class NotUnitaryError(ValueError):
    pass


def _square(a, name="operand"):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be a square matrix, got shape {a.shape}")
    return a


def _match(a, b):
    a = _square(a, "a")
    b = _square(b, "b")
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def is_hermitian(a, rtol: float = HERMITIAN_RTOL) -> bool:
    a = _square(a)
    scale = np.abs(a).max(initial=0.0)
    return bool(np.abs(a - a.conj().T).max(initial=0.0) <= rtol * max(scale, 1e-300))


def is_unitary(u, atol: float = UNITARY_ATOL) -> bool:
    u = _square(u)
    return bool(np.abs(u.conj().T @ u - np.eye(u.shape[0])).max() <= atol)


def dagger(a):
    return np.conj(np.swapaxes(a, -1, -2))


def commutator(a, b):
    """Return ``ab - ba``."""
    a, b = _match(a, b)
    return a @ b - b @ a


def expm_hermitian_generator(h, t: float = 1.0):
    """Unitary ``exp(-i h t)`` computed from the eigendecomposition of ``h``.

    Parameters
    ----------
    h : (N, N) array_like
        Hermitian generator.
    t : float
        Evolution time.

    Returns
    -------
    ndarray
        The unitary propagator.
    """
    h = _square(h, "h")
    if not is_hermitian(h):
        raise NotHermitianError("generator is not Hermitian")
    evals, evecs = np.linalg.eigh(h)
    return (evecs * np.exp(-1j * evals * t)) @ evecs.conj().T


def expm_hermitian_batch(h, t: float):
    """Vectorized ``exp(-i h t)`` over a stack of Hermitian matrices ``(..., N, N)``.

    No Hermiticity check; intended for inner loops where ``h`` is Hermitian
    by construction.
    """
    evals, evecs = np.linalg.eigh(h)
    return (evecs * np.exp(-1j * evals * t)[..., None, :]) @ dagger(evecs)


def hs_inner(a, b) -> complex:
    """Hilbert-Schmidt inner product ``Tr(a^dagger b)``."""
    a, b = _match(a, b)
    return complex(np.vdot(a, b))


def hs_norm(a) -> float:
    return float(np.linalg.norm(a))


def adjoint_action(u, x, check: bool = True):
    """Conjugation ``u x u^dagger``."""
    u, x = _match(u, x)
    if check and not is_unitary(u):
        raise NotUnitaryError("adjoint action requires a unitary")
    return u @ x @ u.conj().T


def kron(*ops):
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def embed(op, site: int, n: int):
    """Single-qubit ``op`` acting on ``site`` of an ``n``-qubit register (site 0 leftmost)."""
    if not 0 <= site < n:
        raise IndexError(f"site {site} out of range for {n} qubits")
    return kron(*[op if k == site else SIGMA_I for k in range(n)])


def trace_norm(a) -> float:
    return float(np.linalg.svd(np.asarray(a), compute_uv=False).sum())


def trace_distance(rho, sigma) -> float:
    rho, sigma = _match(rho, sigma)
    return 0.5 * trace_norm(rho - sigma)


def liouville_basis(generators: Sequence[np.ndarray]) -> np.ndarray:
    """Stack the normalized identity in front of ``generators``; shape ``(N^2, N, N)``."""
    gens = np.asarray(generators)
    dim = gens.shape[-1]
    ident = np.eye(dim, dtype=complex)[None] / np.sqrt(dim)
    return np.concatenate([ident, gens.astype(complex)], axis=0)


def liouville_matrix(op_map: Callable[[np.ndarray], np.ndarray], basis, real_if_close: bool = True):
    """Matrix of a linear operator map in an orthonormal operator basis.

    Entry ``(k, l)`` is ``Tr(x_k^dagger op_map(x_l))``. ``basis`` is either an
    object exposing ``liouville`` (a :class:`~symnoise.basis.QBasis`) or an
    array of shape ``(N^2, N, N)`` that already contains the identity
    direction at index 0.

    Hermiticity-preserving maps come out real; the imaginary part is dropped
    when it is at rounding level.
    """
    elems = getattr(basis, "liouville", basis)
    elems = np.asarray(elems)
    d2, dim, _ = elems.shape
    if d2 != dim * dim:
        raise DimensionError(f"basis has {d2} elements, need {dim * dim}")
    images = np.stack([np.asarray(op_map(x)) for x in elems])
    if images.shape != elems.shape:
        raise DimensionError("map changes operator dimension")
    mat = np.einsum("kab,lab->kl", elems.conj(), images)
    if real_if_close:
        scale = max(np.abs(mat).max(initial=0.0), 1.0)
        if np.abs(mat.imag).max(initial=0.0) <= 1e-12 * scale:
            return mat.real.copy()
    return mat


def to_liouville_vector(rho, basis) -> np.ndarray:
    elems = np.asarray(getattr(basis, "liouville", basis))
    vec = np.einsum("kab,ab->k", elems.conj(), np.asarray(rho))
    if np.abs(vec.imag).max(initial=0.0) <= 1e-12 * max(np.abs(vec).max(initial=0.0), 1.0):
        return vec.real.copy()
    return vec


def from_liouville_vector(vec, basis) -> np.ndarray:
    elems = np.asarray(getattr(basis, "liouville", basis))
    return np.einsum("k,kab->ab", np.asarray(vec), elems)
