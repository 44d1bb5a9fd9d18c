"""Dense complex linear algebra for small spin Hilbert spaces.

Matrices are plain ``numpy`` complex arrays. Dimensions are capped at
``MAX_DIM`` (a sensor spin plus up to six nuclear spins).
"""

from __future__ import annotations

from functools import reduce

import numpy as np

from weakseq.errors import ConfigurationError, ContractError

MAX_DIM = 2**7

ALGEBRA_TOL = 1e-12
DECOMP_TOL = 1e-10


def spin_half_ops() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return the spin-1/2 operators ``(Ix, Iy, Iz)`` (Pauli matrices / 2)."""
    ix = np.array([[0, 0.5], [0.5, 0]], dtype=complex)
    iy = np.array([[0, -0.5j], [0.5j, 0]], dtype=complex)
    iz = np.array([[0.5, 0], [0, -0.5]], dtype=complex)
    return ix, iy, iz


def kron(*mats: np.ndarray) -> np.ndarray:
    """Tensor product of one or more square matrices, leftmost factor outermost."""
    dim = 1
    for m in mats:
        dim *= m.shape[0]
    if dim > MAX_DIM:
        raise ConfigurationError(f"tensor product dimension {dim} exceeds {MAX_DIM}")
    return reduce(np.kron, (np.asarray(m, dtype=complex) for m in mats))


def embed(op: np.ndarray, site: int, n_sites: int) -> np.ndarray:
    """Embed a single spin-1/2 operator at ``site`` of an ``n_sites`` register."""
    eye = np.eye(2, dtype=complex)
    return kron(*[op if k == site else eye for k in range(n_sites)])


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def _check_hermitian(h: np.ndarray, tol: float) -> np.ndarray:
    dev = np.max(np.abs(h - dagger(h))) if h.size else 0.0
    if dev > tol:
        raise ContractError(f"matrix is not Hermitian (max deviation {dev:.3e})")
    return 0.5 * (h + dagger(h))


def herm_expm(h: np.ndarray, scale: float) -> np.ndarray:
    """Return ``exp(1j * scale * h)`` for Hermitian ``h`` by eigendecomposition."""
    h = _check_hermitian(np.asarray(h, dtype=complex), DECOMP_TOL)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(1j * scale * w)) @ dagger(v)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise ContractError(f"dimension mismatch {a.shape} vs {b.shape}")
    return a @ b - b @ a


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise ContractError(f"dimension mismatch {a.shape} vs {b.shape}")
    return a @ b + b @ a


def check_density(rho: np.ndarray, *, herm_tol: float = ALGEBRA_TOL,
                  psd_tol: float = -DECOMP_TOL, trace_tol: float = ALGEBRA_TOL) -> None:
    """Raise ``ContractError`` unless ``rho`` is a valid density operator.

    Works on a single matrix or a stack of matrices (leading batch axes).
    """
    rho = np.asarray(rho)
    if rho.ndim < 2 or rho.shape[-1] != rho.shape[-2]:
        raise ContractError(f"not a square matrix: shape {rho.shape}")
    herm = np.max(np.abs(rho - dagger(rho)))
    if herm > herm_tol:
        raise ContractError(f"density operator not Hermitian ({herm:.3e})")
    tr = np.trace(rho, axis1=-2, axis2=-1)
    tr_dev = np.max(np.abs(tr - 1.0))
    if tr_dev > trace_tol:
        raise ContractError(f"density operator trace deviates from 1 by {tr_dev:.3e}")
    w_min = np.min(np.linalg.eigvalsh(0.5 * (rho + dagger(rho))))
    if w_min < psd_tol:
        raise ContractError(f"density operator has negative eigenvalue {w_min:.3e}")


def is_density(rho: np.ndarray, **tols) -> bool:
    try:
        check_density(rho, **tols)
    except ContractError:
        return False
    return True
