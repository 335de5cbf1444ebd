"""Ideal-frame factoring, PTM diagonal, and the analytic Pauli twirl."""

import numpy as np
import pytest

from rydqec import pauli, qutrit
from rydqec.dynamics import (IonizationSchedule, NoiseParams,
                             QutritChannel, compose_plaquette,
                             compensation_channel, terminal_projection)
from rydqec.errors import IntegrityError, ValidationError
from rydqec.pulse import analytic_cz
from rydqec.twirl import (PauliChannel, error_channel, extract_pauli_channel,
                          ptm_diagonal, ptm_from_channel, twirl)

NONE = IonizationSchedule("none")


def test_zero_gamma_gives_identity_error_channel(profile):
    plaq = compose_plaquette(profile, NoiseParams(gamma=0.0), NONE)
    r = ptm_diagonal(error_channel(plaq, profile))
    assert np.max(np.abs(r - 1.0)) < 1e-8
    lam = twirl(r, 0.0, NONE)
    assert lam.prob("IIIII") == pytest.approx(1.0, abs=1e-8)


def test_network_ptm_matches_dense_path(plaquette_none_1em3, profile):
    eerr = error_channel(plaquette_none_1em3, profile)
    idxs = [0, 1, 37, 100, 512, 777, 1023]
    dense = ptm_diagonal(eerr, method="dense", indices=idxs)
    network = ptm_diagonal(eerr, method="network")[idxs]
    assert np.max(np.abs(dense - network)) < 1e-10


def _synthetic_plaquette(extra_stage=None, theta=0.7):
    """Ideal analytic gates preceded by one injected stage, so the factored
    error channel equals exactly the injected map."""
    gate = qutrit.unitary_superop(analytic_cz(theta).full9)
    stages = []
    if extra_stage is not None:
        stages.append(extra_stage)
    for k in range(1, 5):
        stages.append(QutritChannel(dims=(3, 3), superop=gate, active=(0, k),
                                    label=f"gate{k}"))
    stages.append(QutritChannel(dims=(3,), superop=compensation_channel(-4 * theta).superop,
                                active=(0,), label="compensate"))
    for k in range(1, 5):
        stages.append(QutritChannel(dims=(3,), superop=compensation_channel(-theta).superop,
                                    active=(k,), label="compensate"))
    proj = terminal_projection()
    for w in range(5):
        stages.append(QutritChannel(dims=(3,), superop=proj.superop,
                                    active=(w,), label="project"))
    from rydqec.dynamics import PlaquetteChannel

    return PlaquetteChannel(stages=tuple(stages), gamma=0.0, dt=1e-3,
                            schedule=NONE, pulse_id="synthetic", theta=theta)


def _eerr_with_stage(stage):
    plaq = _synthetic_plaquette(stage)
    from rydqec.twirl import ErrorChannel

    return ErrorChannel(plaq=plaq, theta=plaq.theta)


def test_depolarizing_ptm_oracle():
    p = 0.12
    keep_r = np.zeros((3, 3), complex)
    keep_r[2, 2] = 1.0
    # qubit depolarizing embedded on the ancilla, |r> untouched
    kraus = [np.sqrt(1 - p) * qutrit.embed_qubit_op(np.eye(2)) + keep_r]
    for m in pauli.PAULI_MATS[1:]:
        kraus.append(np.sqrt(p / 3) * qutrit.embed_qubit_op(m))
    s = qutrit.kraus_superop(kraus)
    stage = QutritChannel(dims=(3,), superop=s, active=(0,), label="depol")
    r = ptm_diagonal(_eerr_with_stage(stage))
    codes = np.stack([pauli.codes_of(i) for i in range(1024)])
    anc_nontrivial = codes[:, 0] != 0
    others_trivial = (codes[:, 1:] == 0).all(axis=1)
    sel = anc_nontrivial & others_trivial
    assert np.allclose(r[sel], 1 - 4 * p / 3, atol=1e-9)
    assert r[0] == pytest.approx(1.0, abs=1e-9)


def test_amplitude_damping_twirl_against_brute_force():
    p = 0.2
    k0 = np.diag([1.0, np.sqrt(1 - p), 1.0]).astype(complex)
    k1 = np.zeros((3, 3), complex)
    k1[0, 1] = np.sqrt(p)
    s = qutrit.kraus_superop([k0, k1])
    stage = QutritChannel(dims=(3,), superop=s, active=(0,), label="damp")
    lam = twirl(ptm_diagonal(_eerr_with_stage(stage)), 0.0, NONE)
    # independent oracle: twirl the 2x2 qubit channel directly
    k0q = np.diag([1.0, np.sqrt(1 - p)]).astype(complex)
    k1q = np.array([[0.0, np.sqrt(p)], [0.0, 0.0]], dtype=complex)
    r_q = []
    for m in pauli.PAULI_MATS:
        out = k0q @ m @ k0q.conj().T + k1q @ m @ k1q.conj().T
        r_q.append(np.trace(m.conj().T @ out).real / 2.0)
    lam_q = np.zeros(4)
    signs = np.array([[1, 1, 1, 1], [1, 1, -1, -1], [1, -1, 1, -1],
                      [1, -1, -1, 1]])
    lam_q = signs @ np.array(r_q) / 4.0
    assert lam.prob("XIIII") == pytest.approx(lam_q[1], abs=1e-10)
    assert lam.prob("YIIII") == pytest.approx(lam_q[2], abs=1e-10)
    assert lam.prob("ZIIII") == pytest.approx(lam_q[3], abs=1e-10)
    assert lam.prob("XIIII") == pytest.approx(p / 4, abs=1e-12)
    assert lam.prob("YIIII") == pytest.approx(p / 4, abs=1e-12)


def test_twirl_matches_monte_carlo_frame_average(channel_none_1em3, profile,
                                                 plaquette_none_1em3):
    """Sampled uniform-frame average of the PTM sum reproduces the analytic
    twirl within its own sampling error."""
    r = ptm_diagonal(error_channel(plaquette_none_1em3, profile))
    rng = np.random.default_rng(12345)
    frames = rng.integers(0, 1024, size=100_000)
    signs = pauli.commutation_signs().astype(float)
    targets = [pauli.label_to_index(s)
               for s in ("IIIII", "ZIIII", "IXIII", "IIZZI", "XZIII")]
    for q in targets:
        samples = signs[q, frames] * r[frames]
        est = samples.mean()
        sigma = samples.std(ddof=1) / np.sqrt(len(frames))
        exact = float(signs[q] @ r / 1024.0)
        assert abs(est - exact) < 3 * max(sigma, 1e-12)


def test_twirl_is_idempotent(channel_none_1em3):
    again = twirl(ptm_from_channel(channel_none_1em3),
                  channel_none_1em3.gamma, channel_none_1em3.schedule)
    assert np.max(np.abs(again.probs - channel_none_1em3.probs)) < 1e-12


def test_ptm_magnitudes_bounded(plaquette_none_1em3, profile):
    r = ptm_diagonal(error_channel(plaquette_none_1em3, profile))
    assert np.max(np.abs(r)) <= 1.0 + 1e-9
    assert r[0] == pytest.approx(1.0, abs=1e-9)


def test_lambda_identity_dominates_at_small_gamma(profile):
    # 1 - lambda_I <= c * gamma with the regression constant c = 14
    for kind in ("none", "after_every_gate_both"):
        sched = IonizationSchedule(kind, 1.0)
        for gamma in (1e-4, 1e-3):
            lam = extract_pauli_channel(profile, NoiseParams(gamma=gamma), sched)
            assert 1.0 - lam.prob("IIIII") <= 14.0 * gamma
            assert 1.0 - lam.prob("IIIII") > 0.0


def test_data_leg_permutation_permutes_labels(profile):
    noise = NoiseParams(gamma=3e-4)
    sched = IonizationSchedule("after_every_gate_both", 1.0)
    base = extract_pauli_channel(profile, noise, sched)
    perm = {2: 3, 3: 2}
    plaq = compose_plaquette(profile, noise, sched, data_legs=perm)
    swapped = twirl(ptm_diagonal(error_channel(plaq, profile)),
                    noise.gamma, sched)
    assert np.max(np.abs(swapped.probs - base.permute_data(perm).probs)) < 1e-12


def test_channel_normalization_contract(channel_none_1em3):
    assert abs(channel_none_1em3.probs.sum() - 1.0) < 1e-9
    assert channel_none_1em3.probs.min() >= 0.0


def test_from_raw_escalates_real_violations():
    bad = np.zeros(1024)
    bad[0] = 1.0
    bad[1] = -1e-8
    with pytest.raises(IntegrityError):
        PauliChannel.from_raw(bad, 0.0, NONE)
    off = np.zeros(1024)
    off[0] = 1.01
    with pytest.raises(IntegrityError):
        PauliChannel.from_raw(off, 0.0, NONE)
    dusty = np.zeros(1024)
    dusty[0] = 1.0
    dusty[1] = -1e-12
    ch = PauliChannel.from_raw(dusty, 0.0, NONE)
    assert ch.probs[1] == 0.0


def test_x_basis_relabeling(channel_none_1em3):
    xch = channel_none_1em3.to_x_basis()
    assert xch.prob("IZIII") == channel_none_1em3.prob("IXIII")
    assert xch.prob("IYYZI") == channel_none_1em3.prob("IYYXI")
    assert xch.prob("XIIII") == channel_none_1em3.prob("XIIII")
    assert abs(xch.probs.sum() - 1.0) < 1e-12


def test_save_load_round_trip(tmp_path, channel_none_1em3):
    path = tmp_path / "chan.json"
    channel_none_1em3.save(path)
    back = PauliChannel.load(path)
    assert np.array_equal(back.probs, channel_none_1em3.probs)
    assert back.gamma == channel_none_1em3.gamma
    assert back.schedule == channel_none_1em3.schedule


def test_error_channel_rejects_pulse_mismatch(plaquette_none_1em3):
    from rydqec.pulse import synthesize_pulse, GateModel

    other = synthesize_pulse(GateModel(), n_segments=8, tol=1e-2, seed=3)
    with pytest.raises(ValidationError):
        error_channel(plaquette_none_1em3, other)
