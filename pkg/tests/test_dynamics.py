"""Channel primitives and the composed plaquette map."""

import math

import numpy as np
import pytest

from rydqec import qutrit
from rydqec.dynamics import (IonizationSchedule, NoiseParams, compose_plaquette,
                             gate_channel, idle_decay_channel,
                             ionization_channel, terminal_projection)
from rydqec.errors import ValidationError
from rydqec.pulse import propagate_restricted
from rydqec.qutrit import random_density_matrix
from rydqec.twirl import ideal_cz4_matrix, _embed_qubit_state, _extract_qubit_block

ALL_SCHEDULES = [
    IonizationSchedule("after_every_gate_both", 1.0),
    IonizationSchedule("after_every_gate_both", 0.5),
    IonizationSchedule("ancilla_only_every_gate"),
    IonizationSchedule("data_only_every_gate"),
    IonizationSchedule("ancilla_twice"),
    IonizationSchedule("ancilla_halfway"),
    IonizationSchedule("none"),
]


def test_noise_params_validation():
    with pytest.raises(ValidationError):
        NoiseParams(gamma=-1e-3)
    with pytest.raises(ValidationError):
        NoiseParams(gamma=1.0, dt=0.1)  # gamma*dt too large
    with pytest.raises(ValidationError):
        NoiseParams(gamma=1e-3, dt=0.0)


def test_schedule_validation_and_targets():
    with pytest.raises(ValidationError):
        IonizationSchedule("sometimes")
    with pytest.raises(ValidationError):
        IonizationSchedule("ancilla_twice", 0.5)
    sched = IonizationSchedule("ancilla_twice")
    assert [sched.targets_after_gate(k) for k in (1, 2, 3, 4)] == \
        [(0,), (), (0,), ()]
    sched = IonizationSchedule("ancilla_halfway")
    assert [sched.targets_after_gate(k) for k in (1, 2, 3, 4)] == \
        [(), (0,), (), ()]
    both = IonizationSchedule("after_every_gate_both", 0.75)
    assert both.targets_after_gate(3) == (0, 3)


def test_gate_channel_at_zero_gamma_is_unitary(profile):
    ch = gate_channel(profile, NoiseParams(gamma=0.0))
    u = propagate_restricted(profile).full9
    assert np.max(np.abs(ch.superop - qutrit.unitary_superop(u))) < 1e-12


def test_gate_channel_dt_halving_converges(profile):
    c1 = gate_channel(profile, NoiseParams(gamma=1e-3, dt=1e-3))
    c2 = gate_channel(profile, NoiseParams(gamma=1e-3, dt=5e-4))
    choi1 = qutrit.choi_from_superop(c1.superop, 9)
    choi2 = qutrit.choi_from_superop(c2.superop, 9)
    assert np.max(np.abs(choi1 - choi2)) < 1e-7


def test_gate_channel_keeps_00_dark(profile):
    ch = gate_channel(profile, NoiseParams(gamma=5e-3))
    rho = np.zeros((9, 9), complex)
    rho[0, 0] = 1.0
    assert np.max(np.abs(ch.apply(rho) - rho)) < 1e-12


def test_gate_channel_rejects_bad_dt(profile):
    with pytest.raises(ValidationError):
        gate_channel(profile, NoiseParams(gamma=9.9, dt=2e-3))


def test_idle_decay_closed_form():
    ident = idle_decay_channel(0.0, 1e-3)
    assert np.max(np.abs(ident.superop - np.eye(9))) < 1e-12
    # gamma*duration = ln 2 halves the Rydberg population
    half = idle_decay_channel(math.log(2.0) / 1e-3, 1e-3)
    rho = np.diag([0.0, 0.0, 1.0]).astype(complex)
    out = half.apply(rho)
    assert out[2, 2].real == pytest.approx(0.5, abs=1e-12)
    assert out[0, 0].real == pytest.approx(0.25, abs=1e-12)
    assert out[1, 1].real == pytest.approx(0.25, abs=1e-12)
    # coherences to |r> shrink by exp(-gamma d / 2)
    coh = np.zeros((3, 3), complex)
    coh[1, 2] = coh[2, 1] = 0.5
    coh[1, 1] = coh[2, 2] = 0.5
    out = idle_decay_channel(1.0, 0.3).apply(coh)
    assert out[1, 2] == pytest.approx(0.5 * math.exp(-0.15), abs=1e-12)
    # asymptotically all r population leaves, split equally
    drained = idle_decay_channel(1e6, 1.0).apply(rho)
    assert drained[2, 2].real < 1e-12
    assert drained[0, 0].real == pytest.approx(0.5, abs=1e-9)


def test_ionization_channel():
    assert np.max(np.abs(ionization_channel(0.0).superop - np.eye(9))) < 1e-12
    rho = np.diag([0.4, 0.3, 0.3]).astype(complex)
    out = ionization_channel(1.0).apply(rho)
    assert out[0, 0].real == pytest.approx(0.7)
    assert np.max(np.abs(out[2, :])) == pytest.approx(0.0)
    assert np.max(np.abs(out[:, 2])) == pytest.approx(0.0)
    # composition law: two pulses at 0.75 equal one at 1 - 0.25^2
    twice = ionization_channel(0.75).superop @ ionization_channel(0.75).superop
    once = ionization_channel(1.0 - 0.25**2).superop
    assert np.max(np.abs(twice - once)) < 1e-12
    with pytest.raises(ValidationError):
        ionization_channel(1.5)


def test_terminal_projection():
    proj = terminal_projection()
    rho_r = np.diag([0.0, 0.0, 1.0]).astype(complex)
    out = proj.apply(rho_r)
    assert np.allclose(np.diag(out), [0.5, 0.5, 0.0])
    rho_q = np.array([[0.5, 0.2, 0], [0.2, 0.5, 0], [0, 0, 0]], dtype=complex)
    assert np.max(np.abs(proj.apply(rho_q) - rho_q)) < 1e-12
    plus = np.zeros(3, complex)
    plus[1] = plus[2] = 1 / math.sqrt(2)
    out = proj.apply(np.outer(plus, plus.conj()))
    assert np.allclose(np.diag(out).real, [0.25, 0.75, 0.0])


def test_plaquette_zero_gamma_equals_ideal_cz(profile, rng):
    sched = IonizationSchedule("after_every_gate_both", 1.0)
    plaq = compose_plaquette(profile, NoiseParams(gamma=0.0), sched)
    u32 = ideal_cz4_matrix()
    for _ in range(5):
        rho32 = random_density_matrix(32, rng)
        out = _extract_qubit_block(plaq.apply(_embed_qubit_state(rho32)))
        expect = u32 @ rho32 @ u32.conj().T
        assert np.max(np.abs(out - expect)) < 1e-8


def test_schedules_agree_at_zero_gamma(profile, rng):
    rho32 = random_density_matrix(32, rng)
    outs = []
    for sched in ALL_SCHEDULES:
        plaq = compose_plaquette(profile, NoiseParams(gamma=0.0), sched)
        outs.append(plaq.apply(_embed_qubit_state(rho32)))
    for other in outs[1:]:
        assert np.max(np.abs(other - outs[0])) < 1e-8


def test_plaquette_trace_preserving_on_probe_set(plaquette_none_1em3, rng):
    for _ in range(50):
        rho = random_density_matrix(243, rng, rank=2)
        out = plaquette_none_1em3.apply(rho)
        assert abs(np.trace(out) - 1.0) < 1e-8


def test_stage_choi_positivity(plaquette_none_1em3):
    for stage in plaquette_none_1em3.stages:
        assert qutrit.choi_min_eig(stage.superop, stage.dim) >= -1e-8


def test_tensor_path_matches_dense_kraus_path(plaquette_none_1em3, rng):
    rho = random_density_matrix(243, rng, rank=2)
    fast = plaquette_none_1em3.apply(rho)
    slow = plaquette_none_1em3.apply_dense(rho)
    assert np.max(np.abs(fast - slow)) < 1e-10


def test_trotter_convergence_on_probe_states(profile, rng):
    sched = IonizationSchedule("none")
    coarse = compose_plaquette(profile, NoiseParams(gamma=1e-2, dt=1e-3), sched)
    fine = compose_plaquette(profile, NoiseParams(gamma=1e-2, dt=5e-4), sched)
    worst = 0.0
    for _ in range(5):
        rho = random_density_matrix(243, rng, rank=2)
        diff = coarse.apply(rho) - fine.apply(rho)
        worst = max(worst, float(np.sum(np.abs(np.linalg.eigvalsh(diff)))) / 2)
    assert worst < 1e-6


def test_ancilla_twice_places_ionization_after_gates_1_and_3(profile):
    plaq = compose_plaquette(profile, NoiseParams(gamma=1e-3),
                             IonizationSchedule("ancilla_twice"))
    labels = [s.label for s in plaq.stages]
    assert "ionize1" in labels and "ionize3" in labels
    assert "ionize2" not in labels and "ionize4" not in labels
    # ionization stage sits after its gate and before the next one
    assert labels.index("gate1") < labels.index("ionize1") < labels.index("gate2")
    assert labels.index("gate3") < labels.index("ionize3") < labels.index("gate4")


def test_ionization_distinguishes_schedules_at_finite_gamma(profile):
    noise = NoiseParams(gamma=1e-3)
    plain = compose_plaquette(profile, noise, IonizationSchedule("none"))
    forced = compose_plaquette(profile, noise,
                               IonizationSchedule("after_every_gate_both", 1.0))
    rho = _embed_qubit_state(np.eye(32, dtype=complex) / 32.0)
    diff = np.max(np.abs(plain.apply(rho) - forced.apply(rho)))
    assert diff > 1e-6
