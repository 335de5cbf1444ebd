"""Completely positive maps for one noisy plaquette readout.

The readout is four sequential dissipative CZ gates between the ancilla
(atom 0) and the data atoms 1-4, with spectator decay during each gate,
optional inter-gate ionization pulses, Rz compensation, and a terminal
projection of every atom back onto the qubit subspace.

Gate dissipation follows the operator-sum, Trotterized scheme: within each
constant-phase pulse segment the coherent step is the exact 9x9 two-atom
propagator, and Rydberg decay is interleaved as instantaneous amplitude
damping Kraus maps

    K0 = Pi + sqrt(1-s)|r><r|,  K1 = sqrt(s/2)|0><r|,  K2 = sqrt(s/2)|1><r|

with equal branching to |0> and |1>.  The slice strength uses the exact
exponential s = 1 - exp(-gamma dt) and the damping is split symmetrically
around the coherent step (Strang), which converges to the Lindblad solution
at second order in dt -- first-order splitting cannot meet the dt-halving
tolerances this module is tested against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IntegrityError, ValidationError
from .pulse import PulseProfile
from . import qutrit
from .qutrit import DIM, R, superop_tensor_apply

DT_DEFAULT = 1e-3

N_ATOMS = 5
FULL_DIM = DIM**N_ATOMS  # 243

SCHEDULE_KINDS = (
    "after_every_gate_both",
    "ancilla_only_every_gate",
    "data_only_every_gate",
    "ancilla_twice",
    "ancilla_halfway",
    "none",
)


@dataclass(frozen=True)
class NoiseParams:
    """Rydberg decay rate and Trotter step, both in Omega_max units."""

    gamma: float
    dt: float = DT_DEFAULT

    def __post_init__(self):
        if self.gamma < 0:
            raise ValidationError("gamma must be non-negative")
        if self.dt <= 0:
            raise ValidationError("dt must be positive")
        if self.gamma * self.dt >= 0.01:
            raise ValidationError("gamma*dt must stay below 0.01")


@dataclass(frozen=True)
class IonizationSchedule:
    """Where ionization pulses act during the four-gate sequence.

    p_depl is the depletion success probability; the selected-location
    schedules model perfect pulses and require p_depl = 1.
    """

    kind: str
    p_depl: float = 1.0

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValidationError(f"unknown schedule kind {self.kind!r}")
        if not 0.0 <= self.p_depl <= 1.0:
            raise ValidationError("p_depl must lie in [0, 1]")
        if self.kind != "after_every_gate_both" and self.p_depl != 1.0:
            raise ValidationError(
                f"schedule {self.kind!r} models perfect pulses (p_depl = 1)")

    def targets_after_gate(self, k: int) -> tuple:
        """Atoms ionized right after gate k (1-based; 0 is the ancilla)."""
        if self.kind == "after_every_gate_both":
            return (0, k)
        if self.kind == "ancilla_only_every_gate":
            return (0,)
        if self.kind == "data_only_every_gate":
            return (k,)
        if self.kind == "ancilla_twice":
            return (0,) if k in (1, 3) else ()
        if self.kind == "ancilla_halfway":
            return (0,) if k == 2 else ()
        return ()

    def label(self) -> str:
        if self.kind == "after_every_gate_both":
            return f"after_every_gate_both(p={self.p_depl:.2f})"
        return self.kind


@dataclass(frozen=True)
class QutritChannel:
    """A dense superoperator acting on the subsystems listed in ``active``."""

    dims: tuple
    superop: np.ndarray
    active: tuple
    label: str = ""

    def __post_init__(self):
        d = int(np.prod(self.dims))
        if self.superop.shape != (d * d, d * d):
            raise ValidationError("superoperator shape does not match dims")
        tp = qutrit.trace_preservation_defect(self.superop, d)
        if tp > 1e-9:
            raise IntegrityError(f"channel {self.label!r} not trace preserving: {tp:.2e}")
        if qutrit.choi_min_eig(self.superop, d) < -1e-9:
            raise IntegrityError(f"channel {self.label!r} not completely positive")

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return qutrit.unvec(self.superop @ qutrit.vec(rho), self.dim)


def damping_kraus(strength: float) -> list:
    """Amplitude damping out of |r> with equal branching to |0> and |1>."""
    k0 = np.diag([1.0, 1.0, math.sqrt(1.0 - strength)]).astype(complex)
    k1 = np.zeros((DIM, DIM), dtype=complex)
    k1[0, R] = math.sqrt(strength / 2.0)
    k2 = np.zeros((DIM, DIM), dtype=complex)
    k2[1, R] = math.sqrt(strength / 2.0)
    return [k0, k1, k2]


def _pair_damping_superop(strength: float) -> np.ndarray:
    if strength == 0.0:
        return np.eye(81, dtype=complex)
    kraus = damping_kraus(strength)
    eye = np.eye(DIM, dtype=complex)
    pair = [np.kron(ka, kb) for ka in kraus for kb in [eye]]
    s_a = qutrit.kraus_superop(pair)
    pair = [np.kron(eye, kb) for kb in kraus]
    s_b = qutrit.kraus_superop(pair)
    return s_b @ s_a


def pair_hamiltonian(phase: float) -> np.ndarray:
    """Blockade-projected two-atom drive Hamiltonian at unit Rabi frequency.

    Both atoms are driven by Omega e^{i phase}/2 |r><1| + h.c.; matrix
    elements into |rr> are removed (infinite blockade keeps it frozen).
    """
    drive = np.zeros((DIM, DIM), dtype=complex)
    drive[R, 1] = 0.5 * np.exp(1j * phase)
    drive = drive + drive.conj().T
    eye = np.eye(DIM, dtype=complex)
    h = np.kron(drive, eye) + np.kron(eye, drive)
    rr = 3 * R + R
    h[rr, :] = 0.0
    h[:, rr] = 0.0
    return h


def gate_channel(profile: PulseProfile, noise: NoiseParams) -> QutritChannel:
    """81x81 superoperator of one dissipative CZ gate on an atom pair."""
    gamma, dt = noise.gamma, noise.dt
    superop = np.eye(81, dtype=complex)
    for duration, phase in profile.segments:
        h = pair_hamiltonian(phase)
        vals, vecs = np.linalg.eigh(h)
        if gamma == 0.0:
            u = (vecs * np.exp(-1j * vals * duration)) @ vecs.conj().T
            superop = qutrit.unitary_superop(u) @ superop
            continue
        n_slices = max(1, math.ceil(duration / dt))
        delta = duration / n_slices
        u = (vecs * np.exp(-1j * vals * delta)) @ vecs.conj().T
        su = qutrit.unitary_superop(u)
        d_half = _pair_damping_superop(1.0 - math.exp(-gamma * delta / 2.0))
        d_full = _pair_damping_superop(1.0 - math.exp(-gamma * delta))
        if n_slices == 1:
            seg = d_half @ su @ d_half
        else:
            core = np.linalg.matrix_power(d_full @ su, n_slices - 1)
            seg = d_half @ su @ core @ d_half
        superop = seg @ superop
    return QutritChannel(dims=(DIM, DIM), superop=superop, active=(), label="gate")


def idle_decay_channel(duration: float, gamma: float) -> QutritChannel:
    """Exact spectator amplitude damping over an idle window."""
    if duration < 0:
        raise ValidationError("duration must be non-negative")
    p = 1.0 - math.exp(-gamma * duration)
    s = qutrit.kraus_superop(damping_kraus(p))
    return QutritChannel(dims=(DIM,), superop=s, active=(), label="idle")


def ionization_channel(p_depl: float) -> QutritChannel:
    """Forced decay of |r> to |0> with success probability p_depl."""
    if not 0.0 <= p_depl <= 1.0:
        raise ValidationError("p_depl must lie in [0, 1]")
    k0 = np.diag([1.0, 1.0, math.sqrt(1.0 - p_depl)]).astype(complex)
    k1 = np.zeros((DIM, DIM), dtype=complex)
    k1[0, R] = math.sqrt(p_depl)
    s = qutrit.kraus_superop([k0, k1])
    return QutritChannel(dims=(DIM,), superop=s, active=(), label="ionize")


def terminal_projection() -> QutritChannel:
    """D(rho) = Pi rho Pi + <r|rho|r> Pi/2, closing the qutrit back to a qubit."""
    k0 = qutrit.PROJ_QUBIT.copy()
    k1 = np.zeros((DIM, DIM), dtype=complex)
    k1[0, R] = 1.0 / math.sqrt(2.0)
    k2 = np.zeros((DIM, DIM), dtype=complex)
    k2[1, R] = 1.0 / math.sqrt(2.0)
    s = qutrit.kraus_superop([k0, k1, k2])
    return QutritChannel(dims=(DIM,), superop=s, active=(), label="project")


def compensation_channel(alpha: float) -> QutritChannel:
    s = qutrit.unitary_superop(qutrit.rz(alpha))
    return QutritChannel(dims=(DIM,), superop=s, active=(), label="compensate")


@dataclass(frozen=True)
class PlaquetteChannel:
    """Ordered stages of one noisy stabilizer readout on 5 qutrits.

    Atom 0 is the ancilla; atoms 1-4 are the data atoms in gate order (or
    in the order given by ``data_legs`` at composition time).
    """

    stages: tuple
    gamma: float
    dt: float
    schedule: IonizationSchedule
    pulse_id: str
    theta: float

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Tensor-reshaping application of all stages (performance path)."""
        out = rho
        for stage in self.stages:
            out = superop_tensor_apply(stage.superop, out, stage.active, N_ATOMS)
        return out

    def apply_dense(self, rho: np.ndarray) -> np.ndarray:
        """Reference path: embed each stage's Kraus operators into the full
        243-dimensional space and apply them densely."""
        out = rho
        for stage in self.stages:
            kraus = qutrit.kraus_from_superop(stage.superop, stage.dim)
            acc = np.zeros_like(out)
            for k in kraus:
                kf = embed_operator(k, stage.active)
                acc += kf @ out @ kf.conj().T
            out = acc
        return out


def embed_operator(op: np.ndarray, active: tuple) -> np.ndarray:
    """Embed an operator on the given atom legs into the 5-atom space."""
    spect = [w for w in range(N_ATOMS) if w not in active]
    big = np.kron(op, np.eye(DIM**len(spect), dtype=complex))
    t = big.reshape((DIM,) * (2 * N_ATOMS))
    order = list(active) + spect
    dst = [order[i] for i in range(N_ATOMS)]
    t = np.moveaxis(t, range(2 * N_ATOMS), dst + [N_ATOMS + w for w in dst])
    return np.ascontiguousarray(t.reshape(FULL_DIM, FULL_DIM))


def compose_plaquette(profile: PulseProfile, noise: NoiseParams,
                      schedule: IonizationSchedule,
                      data_legs: dict | None = None) -> PlaquetteChannel:
    """Assemble the full five-atom readout channel.

    For each gate k = 1..4: the dissipative gate on (ancilla, data_k), idle
    decay on the three spectator data atoms for the gate duration, then the
    schedule's ionization pulses.  Afterwards Rz(-4 theta) on the ancilla and
    Rz(-theta) on each data atom undo the single-qubit rotations, and every
    atom is projected back onto the qubit subspace.

    ``data_legs`` remaps gate slot k to a different tensor leg (wiring test
    hook); the default is the identity.
    """
    legs = {k: k for k in range(1, 5)}
    if data_legs:
        legs.update(data_legs)
        if sorted(legs.values()) != [1, 2, 3, 4]:
            raise ValidationError("data_legs must permute {1,2,3,4}")
    gate = gate_channel(profile, noise)
    idle = idle_decay_channel(profile.total_time, noise.gamma)
    ion = ionization_channel(schedule.p_depl) if schedule.kind != "none" else None
    stages = []
    for k in range(1, 5):
        leg = legs[k]
        stages.append(QutritChannel(dims=(DIM, DIM), superop=gate.superop,
                                    active=(0, leg), label=f"gate{k}"))
        for other in range(1, 5):
            if legs[other] != leg:
                stages.append(QutritChannel(dims=(DIM,), superop=idle.superop,
                                            active=(legs[other],), label=f"idle{k}"))
        for target in schedule.targets_after_gate(k):
            leg_t = 0 if target == 0 else legs[target]
            stages.append(QutritChannel(dims=(DIM,), superop=ion.superop,
                                        active=(leg_t,), label=f"ionize{k}"))
    comp_anc = compensation_channel(-4.0 * profile.theta)
    comp_dat = compensation_channel(-profile.theta)
    stages.append(QutritChannel(dims=(DIM,), superop=comp_anc.superop,
                                active=(0,), label="compensate"))
    for k in range(1, 5):
        stages.append(QutritChannel(dims=(DIM,), superop=comp_dat.superop,
                                    active=(k,), label="compensate"))
    proj = terminal_projection()
    for w in range(N_ATOMS):
        stages.append(QutritChannel(dims=(DIM,), superop=proj.superop,
                                    active=(w,), label="project"))
    return PlaquetteChannel(stages=tuple(stages), gamma=noise.gamma, dt=noise.dt,
                            schedule=schedule, pulse_id=profile.pulse_id(),
                            theta=profile.theta)
