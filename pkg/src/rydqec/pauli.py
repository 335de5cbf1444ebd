"""Five-qubit Pauli string algebra (ancilla-first ordering).

Strings are length-5 words over {I, X, Y, Z}; position 0 is the ancilla,
positions 1-4 are the data atoms in gate order.  Internally a string is an
integer index 0..1023 obtained by reading the word as a base-4 number with
I=0, X=1, Y=2, Z=3 and the ancilla as the most significant digit, which
makes index order coincide with lexicographic label order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ValidationError

N_QUBITS = 5
N_STRINGS = 4**N_QUBITS  # 1024

PAULI_CHARS = "IXYZ"
_CODE = {c: i for i, c in enumerate(PAULI_CHARS)}

I2 = np.eye(2, dtype=complex)
X2 = np.array([[0, 1], [1, 0]], dtype=complex)
Y2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z2 = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI_MATS = (I2, X2, Y2, Z2)

# (x, z) symplectic bits per single-qubit code I, X, Y, Z
_XBIT = np.array([0, 1, 1, 0], dtype=np.uint8)
_ZBIT = np.array([0, 0, 1, 1], dtype=np.uint8)


@dataclass(frozen=True)
class PauliString:
    """A validated 5-qubit Pauli label, ancilla at position 0."""

    label: str

    def __post_init__(self):
        if len(self.label) != N_QUBITS or any(c not in _CODE for c in self.label):
            raise ValidationError(f"not a 5-qubit Pauli label: {self.label!r}")

    @property
    def index(self) -> int:
        return label_to_index(self.label)

    def __lt__(self, other: "PauliString") -> bool:
        return self.label < other.label


def label_to_index(label: str) -> int:
    if len(label) != N_QUBITS:
        raise ValidationError(f"Pauli label must have {N_QUBITS} symbols: {label!r}")
    idx = 0
    for c in label:
        try:
            idx = 4 * idx + _CODE[c]
        except KeyError:
            raise ValidationError(f"bad Pauli symbol {c!r} in {label!r}") from None
    return idx


def index_to_label(idx: int) -> str:
    if not 0 <= idx < N_STRINGS:
        raise ValidationError(f"Pauli index out of range: {idx}")
    chars = []
    for _ in range(N_QUBITS):
        chars.append(PAULI_CHARS[idx & 3])
        idx >>= 2
    return "".join(reversed(chars))


ALL_LABELS = tuple(index_to_label(i) for i in range(N_STRINGS))


@lru_cache(maxsize=None)
def _codes_table() -> np.ndarray:
    """(1024, 5) array of single-qubit codes, position 0 = ancilla."""
    idx = np.arange(N_STRINGS)
    cols = [(idx >> (2 * (N_QUBITS - 1 - pos))) & 3 for pos in range(N_QUBITS)]
    return np.stack(cols, axis=1).astype(np.uint8)


def codes_of(idx: int) -> np.ndarray:
    return _codes_table()[idx]


@lru_cache(maxsize=None)
def symplectic_bits() -> tuple[np.ndarray, np.ndarray]:
    """(x, z) bit arrays of shape (1024, 5)."""
    codes = _codes_table()
    return _XBIT[codes], _ZBIT[codes]


@lru_cache(maxsize=None)
def commutation_signs() -> np.ndarray:
    """S[q, p] = +1 if strings q and p commute, -1 otherwise."""
    x, z = symplectic_bits()
    xi = x.astype(np.int64)
    zi = z.astype(np.int64)
    sym = (xi @ zi.T + zi @ xi.T) & 1
    return np.where(sym == 0, 1, -1).astype(np.int8)


def pauli_matrix(idx: int) -> np.ndarray:
    """Dense 32x32 matrix of the string (kron with ancilla leftmost)."""
    codes = codes_of(idx)
    out = PAULI_MATS[codes[0]]
    for c in codes[1:]:
        out = np.kron(out, PAULI_MATS[c])
    return out


def _conjugation_table(gate: np.ndarray) -> dict:
    """Map (pa, pb) -> (pa', pb', sign) under G (Pa x Pb) G^dag for a
    two-qubit Clifford G.  Computed densely once; Hermiticity guarantees
    the sign is real."""
    table = {}
    basis = [np.kron(PAULI_MATS[a], PAULI_MATS[b]) for a in range(4) for b in range(4)]
    for pa in range(4):
        for pb in range(4):
            m = gate @ np.kron(PAULI_MATS[pa], PAULI_MATS[pb]) @ gate.conj().T
            for qa in range(4):
                for qb in range(4):
                    coeff = np.trace(basis[4 * qa + qb].conj().T @ m) / 4
                    if abs(coeff) > 1e-9:
                        sign = int(round(coeff.real))
                        if abs(coeff - sign) > 1e-12 or sign not in (1, -1):
                            raise AssertionError("non-Pauli conjugation result")
                        table[(pa, pb)] = (qa, qb, sign)
    return table


CZ4 = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)


@lru_cache(maxsize=None)
def cz_conjugation_table() -> dict:
    return _conjugation_table(CZ4)


# Single-qubit Hadamard relabeling: I->I, X->Z, Y->Y, Z->X (signs dropped --
# only channel probabilities use this map).
HADAMARD_CODE_MAP = np.array([0, 3, 2, 1], dtype=np.uint8)


def conjugate_by_cz_frame(idx: int) -> tuple[int, int]:
    """Conjugate a 5-qubit string by the four ideal CZ gates (ancilla with
    each data qubit).  Returns (new index, sign)."""
    table = cz_conjugation_table()
    codes = codes_of(idx).copy()
    sign = 1
    anc = int(codes[0])
    for pos in range(1, N_QUBITS):
        anc, codes[pos], s = table[(anc, int(codes[pos]))]
        sign *= s
    codes[0] = anc
    out = 0
    for c in codes:
        out = 4 * out + int(c)
    return out, sign


@lru_cache(maxsize=None)
def cz_frame_tables() -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (conjugated index, sign) tables over all 1024 strings."""
    idxs = np.empty(N_STRINGS, dtype=np.int64)
    signs = np.empty(N_STRINGS, dtype=np.int8)
    for i in range(N_STRINGS):
        idxs[i], signs[i] = conjugate_by_cz_frame(i)
    return idxs, signs


def hadamard_data_relabel(idx: int) -> int:
    """Relabel a string for the Hadamard-sandwiched (X-stabilizer) frame:
    X<->Z on the four data positions, ancilla untouched."""
    codes = codes_of(idx).copy()
    codes[1:] = HADAMARD_CODE_MAP[codes[1:]]
    out = 0
    for c in codes:
        out = 4 * out + int(c)
    return out


@lru_cache(maxsize=None)
def hadamard_relabel_table() -> np.ndarray:
    return np.array([hadamard_data_relabel(i) for i in range(N_STRINGS)], dtype=np.int64)


def permute_data_positions(idx: int, perm: dict) -> int:
    """Move the label at data position j to position perm[j] (1-based)."""
    codes = codes_of(idx)
    out_codes = [int(codes[0])] + [0] * (N_QUBITS - 1)
    for j in range(1, N_QUBITS):
        out_codes[perm.get(j, j)] = int(codes[j])
    out = 0
    for c in out_codes:
        out = 4 * out + c
    return out
