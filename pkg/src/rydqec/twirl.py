"""Pauli-twirled error channel of a plaquette readout.

The noisy readout factors as the four ideal CZ gates followed by a 5-qubit
error channel: E_err(rho) = U_ideal^dag plaq(rho) U_ideal restricted to the
qubit subspace (compensations already live inside the plaquette channel).
The Pauli transfer matrix diagonal R_PP = tr[P E_err(P)]/32 is then twirled
into a diagonal Pauli channel

    lambda_Q = 2^-10 sum_P s(P, Q) R_PP,

the exact projector that randomized compiling estimates stochastically.

The PTM diagonal is evaluated by contracting the stage network atom by
atom: every stage is local, so for a product input P and conjugated output
U P U^dag the five wires trade a single 9-dimensional superspace index, and
each data wire collapses the gate superoperator into a 9x9 matrix acting on
the ancilla wire.  The dense path (embedding P into the full 243-dim space
and applying stages by tensor reshaping) is kept for cross-checks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import pauli, qutrit
from .dynamics import N_ATOMS, FULL_DIM, IonizationSchedule, PlaquetteChannel
from .errors import IntegrityError, ValidationError
from .pauli import PauliString  # noqa: F401  (part of this module's surface)
from .pulse import PulseProfile
from .qutrit import DIM, embed_qubit_op

_NEG_CLAMP = 1e-10
_SUM_TOL = 1e-6


@dataclass(frozen=True)
class PauliChannel:
    """Probabilities over the 1024 five-qubit Pauli strings.

    ``probs`` is indexed by the lexicographic string index (ancilla first).
    """

    probs: np.ndarray
    gamma: float
    schedule: IonizationSchedule
    basis: str = "Z"

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (pauli.N_STRINGS,):
            raise ValidationError("probs must have 1024 entries")
        if abs(p.sum() - 1.0) > 1e-9 or p.min() < -_NEG_CLAMP:
            raise IntegrityError("Pauli channel is not a normalized distribution")
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_raw(cls, raw: np.ndarray, gamma: float,
                 schedule: IonizationSchedule, basis: str = "Z") -> "PauliChannel":
        """Clamp negative numerical dust and renormalize; escalate anything
        beyond tolerance as an upstream CP/TP failure."""
        raw = np.asarray(raw, dtype=float)
        if abs(raw.sum() - 1.0) > _SUM_TOL:
            raise IntegrityError(
                f"twirled probabilities sum to {raw.sum():.12f}; "
                "upstream channel violates trace preservation")
        if raw.min() < -_NEG_CLAMP:
            raise IntegrityError(
                f"twirled probability {raw.min():.3e} below clamp tolerance; "
                "upstream channel violates complete positivity")
        clamped = np.where(raw < 0.0, 0.0, raw)
        return cls(probs=clamped / clamped.sum(), gamma=gamma,
                   schedule=schedule, basis=basis)

    def prob(self, label: str) -> float:
        return float(self.probs[pauli.label_to_index(label)])

    def as_dict(self) -> dict:
        return {lab: float(self.probs[i]) for i, lab in enumerate(pauli.ALL_LABELS)}

    def to_x_basis(self) -> "PauliChannel":
        """Relabel into the Hadamard-sandwiched (X-stabilizer) frame."""
        table = pauli.hadamard_relabel_table()
        out = np.zeros_like(self.probs)
        out[table] = self.probs
        return PauliChannel(probs=out, gamma=self.gamma,
                            schedule=self.schedule, basis="X")

    def permute_data(self, perm: dict) -> "PauliChannel":
        out = np.zeros_like(self.probs)
        for i in range(pauli.N_STRINGS):
            out[pauli.permute_data_positions(i, perm)] = self.probs[i]
        return PauliChannel(probs=out, gamma=self.gamma,
                            schedule=self.schedule, basis=self.basis)

    def save(self, path) -> None:
        payload = {
            "gamma": self.gamma,
            "schedule": self.schedule.kind,
            "p_depl": self.schedule.p_depl,
            "basis": self.basis,
            "probs": self.as_dict(),
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "PauliChannel":
        with open(path) as fh:
            payload = json.load(fh)
        probs = np.array([payload["probs"][lab] for lab in pauli.ALL_LABELS])
        sched = IonizationSchedule(payload["schedule"], payload["p_depl"])
        return cls(probs=probs, gamma=payload["gamma"], schedule=sched,
                   basis=payload.get("basis", "Z"))


@dataclass(frozen=True)
class ErrorChannel:
    """The factored qubit-space noise map of one plaquette readout."""

    plaq: PlaquetteChannel
    theta: float

    def apply(self, rho32: np.ndarray) -> np.ndarray:
        """Apply to a 32x32 qubit-space operator (embed, run stages, undo
        the ideal CZ frame)."""
        full = _embed_qubit_state(rho32)
        out = self.plaq.apply(full)
        out32 = _extract_qubit_block(out)
        u = ideal_cz4_matrix()
        return u.conj().T @ out32 @ u


def error_channel(plaq: PlaquetteChannel, profile: PulseProfile) -> ErrorChannel:
    if plaq.pulse_id != profile.pulse_id():
        raise ValidationError("plaquette channel was built from a different pulse")
    return ErrorChannel(plaq=plaq, theta=profile.theta)


def ideal_cz4_matrix() -> np.ndarray:
    """CZ between the ancilla and each data qubit, on 5 qubits (32x32)."""
    u = np.ones(32)
    for idx in range(32):
        bits = [(idx >> (4 - q)) & 1 for q in range(5)]
        flips = sum(bits[0] & bits[k] for k in range(1, 5))
        u[idx] = (-1.0) ** flips
    return np.diag(u).astype(complex)


def _embed_qubit_state(rho32: np.ndarray) -> np.ndarray:
    t = rho32.reshape((2,) * (2 * N_ATOMS))
    full = np.zeros((DIM,) * (2 * N_ATOMS), dtype=complex)
    full[(slice(0, 2),) * (2 * N_ATOMS)] = t
    return full.reshape(FULL_DIM, FULL_DIM)


def _extract_qubit_block(rho: np.ndarray) -> np.ndarray:
    t = rho.reshape((DIM,) * (2 * N_ATOMS))
    return np.ascontiguousarray(t[(slice(0, 2),) * (2 * N_ATOMS)].reshape(32, 32))


# ---------------------------------------------------------------------------
# PTM diagonal

def _pauli_vecs() -> np.ndarray:
    """vec of the qutrit-embedded single-qubit Paulis, shape (4, 9)."""
    return np.stack([qutrit.vec(embed_qubit_op(m)) for m in pauli.PAULI_MATS])


def _collect_network(plaq: PlaquetteChannel):
    """Split the stage list into per-atom single-qutrit chains around the
    four gate stages.

    Returns (gates, anc_segs, pre, post, leg_of_slot): gates[j] is the j-th
    gate superop (81x81) acting on (ancilla, leg), anc_segs[j] the ancilla
    chain after gate j (anc_segs[0] = before gate 1), pre/post the data-leg
    chains before/after that leg's gate.
    """
    eye9 = np.eye(9, dtype=complex)
    gates = []
    legs = []
    anc_segs = [eye9.copy()]
    pre = {k: eye9.copy() for k in range(1, N_ATOMS)}
    post = {k: eye9.copy() for k in range(1, N_ATOMS)}
    seen = set()
    for stage in plaq.stages:
        if len(stage.active) == 2:
            if stage.active[0] != 0:
                raise ValidationError("gate stages must involve the ancilla")
            leg = stage.active[1]
            gates.append(stage.superop)
            legs.append(leg)
            seen.add(leg)
            anc_segs.append(eye9.copy())
        else:
            (w,) = stage.active
            if w == 0:
                anc_segs[-1] = stage.superop @ anc_segs[-1]
            elif w in seen:
                post[w] = stage.superop @ post[w]
            else:
                pre[w] = stage.superop @ pre[w]
    if len(gates) != 4:
        raise ValidationError("plaquette channel must contain four gate stages")
    return gates, anc_segs, pre, post, legs


def ptm_diagonal(eerr: ErrorChannel, method: str = "network",
                 indices=None) -> np.ndarray:
    """R_PP = tr[P E_err(P)]/32 for all 1024 strings (or a subset)."""
    if method == "network":
        if indices is not None:
            return _ptm_network(eerr)[np.asarray(indices)]
        return _ptm_network(eerr)
    if method == "dense":
        idxs = range(pauli.N_STRINGS) if indices is None else indices
        return np.array([_ptm_dense_single(eerr, i) for i in idxs])
    raise ValidationError(f"unknown ptm method {method!r}")


def _ptm_dense_single(eerr: ErrorChannel, idx: int) -> float:
    p = pauli.pauli_matrix(idx)
    out = eerr.apply(p)
    val = np.trace(p.conj().T @ out) / 32.0
    if abs(val.imag) > 1e-9:
        raise IntegrityError("PTM diagonal entry has an imaginary part")
    return float(val.real)


def _ptm_network(eerr: ErrorChannel) -> np.ndarray:
    plaq = eerr.plaq
    gates, anc_segs, pre, post, legs = _collect_network(plaq)
    pvecs = _pauli_vecs()
    conj_idx, conj_sign = pauli.cz_frame_tables()
    codes = np.stack([pauli.codes_of(i) for i in range(pauli.N_STRINGS)])
    codes_out = np.stack([pauli.codes_of(int(conj_idx[i]))
                          for i in range(pauli.N_STRINGS)])

    # per gate slot: 9x9 ancilla-superspace matrices for each
    # (data label in, data label out) combination that the CZ frame allows
    gmats = []
    for j, (g, leg) in enumerate(zip(gates, legs)):
        s4 = g.reshape(3, 3, 3, 3, 3, 3, 3, 3)
        s4 = s4.transpose(0, 2, 1, 3, 4, 6, 5, 7).reshape(9, 9, 9, 9)
        table = np.zeros((4, 4, 9, 9), dtype=complex)
        in_vecs = pre[leg] @ pvecs.T            # (9, 4)
        out_vecs = pvecs.conj() @ post[leg]     # (4, 9)
        for p_in in range(4):
            for p_out in range(4):
                table[p_in, p_out] = np.einsum(
                    "b,abcd,d->ac", out_vecs[p_out], s4, in_vecs[:, p_in])
        gmats.append(table)

    anc_in = pvecs.T       # (9, 4) columns per ancilla label
    anc_out = pvecs.conj()  # (4, 9)

    v = anc_segs[0] @ anc_in[:, codes[:, 0]]    # (9, 1024)
    for j in range(4):
        leg = legs[j]
        sel = gmats[j][codes[:, leg], codes_out[:, leg]]  # (1024, 9, 9)
        v = np.einsum("pab,bp->ap", sel, v)
        v = anc_segs[j + 1] @ v
    out_sel = anc_out[codes_out[:, 0]]          # (1024, 9)
    vals = np.einsum("pa,ap->p", out_sel, v)
    r = conj_sign * vals / 32.0
    if np.max(np.abs(r.imag)) > 1e-9:
        raise IntegrityError("PTM diagonal has imaginary parts")
    return r.real.copy()


# ---------------------------------------------------------------------------
# Twirl

def twirl(r_diag: np.ndarray, gamma: float, schedule: IonizationSchedule,
          basis: str = "Z") -> PauliChannel:
    """Exact analytic Pauli twirl of a PTM diagonal."""
    r_diag = np.asarray(r_diag, dtype=float)
    if r_diag.shape != (pauli.N_STRINGS,):
        raise ValidationError("PTM diagonal must have 1024 entries")
    signs = pauli.commutation_signs().astype(float)
    lam = signs @ r_diag / pauli.N_STRINGS
    return PauliChannel.from_raw(lam, gamma=gamma, schedule=schedule, basis=basis)


def ptm_from_channel(channel: PauliChannel) -> np.ndarray:
    """Inverse map: the PTM diagonal of a diagonal Pauli channel (used by
    the idempotency check)."""
    signs = pauli.commutation_signs().astype(float)
    return signs.T @ channel.probs


def extract_pauli_channel(profile: PulseProfile, noise, schedule,
                          method: str = "network") -> PauliChannel:
    """One-shot pipeline: compose the plaquette, factor the ideal frame,
    twirl."""
    from .dynamics import compose_plaquette

    plaq = compose_plaquette(profile, noise, schedule)
    eerr = error_channel(plaq, profile)
    r = ptm_diagonal(eerr, method=method)
    return twirl(r, gamma=noise.gamma, schedule=schedule)
