"""Qutrit-space helpers: embeddings, vectorization and superoperators.

Each atom is a three-level system |0>, |1>, |r> with the Rydberg state at
index 2.  Density operators are vectorized row-major, so a unitary U acts
as kron(U, U.conj()) and a Kraus set {K} as sum_K kron(K, K.conj()).
"""

from __future__ import annotations

import numpy as np

DIM = 3
R = 2  # index of the Rydberg level

KET0 = np.array([1.0, 0.0, 0.0], dtype=complex)
KET1 = np.array([0.0, 1.0, 0.0], dtype=complex)
KETR = np.array([0.0, 0.0, 1.0], dtype=complex)

PROJ_QUBIT = np.diag([1.0, 1.0, 0.0]).astype(complex)  # Pi = |0><0| + |1><1|


def embed_qubit_op(op2: np.ndarray) -> np.ndarray:
    """Pad a 2x2 qubit operator into the 3x3 qutrit space."""
    out = np.zeros((DIM, DIM), dtype=complex)
    out[:2, :2] = op2
    return out


def rz(alpha: float) -> np.ndarray:
    """R_Z(alpha) = exp(i alpha |1><1|) embedded on a qutrit."""
    return np.diag([1.0, np.exp(1j * alpha), 1.0])


def vec(rho: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(rho).reshape(-1)


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return v.reshape(dim, dim)


def unitary_superop(u: np.ndarray) -> np.ndarray:
    return np.kron(u, u.conj())


def kraus_superop(kraus: list) -> np.ndarray:
    d = kraus[0].shape[0]
    s = np.zeros((d * d, d * d), dtype=complex)
    for k in kraus:
        s += np.kron(k, k.conj())
    return s


def choi_from_superop(s: np.ndarray, dim: int) -> np.ndarray:
    """Choi matrix (unnormalized, trace = dim) from a row-major superop."""
    t = s.reshape(dim, dim, dim, dim)
    return t.transpose(0, 2, 1, 3).reshape(dim * dim, dim * dim)


def kraus_from_superop(s: np.ndarray, dim: int, tol: float = 1e-12) -> list:
    """Kraus decomposition via the Choi eigensystem (test/reference path)."""
    choi = choi_from_superop(s, dim)
    vals, vecs = np.linalg.eigh((choi + choi.conj().T) / 2)
    kraus = []
    for lam, v in zip(vals, vecs.T):
        if lam > tol:
            kraus.append(np.sqrt(lam) * v.reshape(dim, dim))
    return kraus


def trace_preservation_defect(s: np.ndarray, dim: int) -> float:
    """Max deviation of the dual action on the identity, zero iff TP."""
    ident = vec(np.eye(dim, dtype=complex))
    return float(np.max(np.abs(s.conj().T @ ident - ident)))


def choi_min_eig(s: np.ndarray, dim: int) -> float:
    choi = choi_from_superop(s, dim)
    return float(np.linalg.eigvalsh((choi + choi.conj().T) / 2)[0])


def superop_tensor_apply(s: np.ndarray, rho: np.ndarray, active: tuple,
                         n_atoms: int, dim: int = DIM) -> np.ndarray:
    """Apply a local superoperator to a dense n-atom density operator.

    ``s`` acts on the subsystems listed in ``active`` (row and column legs
    jointly); the remaining legs are spectators.  This is the performance
    path: reshape, one matmul, reshape back.
    """
    k = len(active)
    full = dim**n_atoms
    t = rho.reshape((dim,) * (2 * n_atoms))
    axes = [a for a in active] + [n_atoms + a for a in active]
    t = np.moveaxis(t, axes, range(2 * k))
    rest = dim ** (2 * n_atoms - 2 * k)
    t = t.reshape(dim ** (2 * k), rest)
    t = s @ t
    t = t.reshape((dim,) * (2 * k) + tuple([dim] * (2 * n_atoms - 2 * k)))
    t = np.moveaxis(t, range(2 * k), axes)
    return t.reshape(full, full)


def random_density_matrix(n: int, rng: np.random.Generator, rank: int = 4) -> np.ndarray:
    """Random mixed state for probe-set checks."""
    g = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho)
