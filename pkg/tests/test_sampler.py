"""Pauli-frame sampling: statistics, determinism, and decoding estimates."""

import numpy as np
import pytest

from rydqec import pauli
from rydqec.code import build_circuit, enumerate_faults
from rydqec.decoder import build_graph, decode
from rydqec.dynamics import IonizationSchedule
from rydqec.errors import ValidationError
from rydqec.sampler import (ChannelSampler, estimate, marker_histograms,
                            sample, wilson_interval)
from rydqec.twirl import PauliChannel


def _point_channel(assignments: dict) -> PauliChannel:
    probs = np.zeros(pauli.N_STRINGS)
    probs[0] = 1.0 - sum(assignments.values())
    for label, p in assignments.items():
        probs[pauli.label_to_index(label)] = p
    return PauliChannel(probs=probs, gamma=1e-3,
                        schedule=IonizationSchedule("none"))


def test_identity_channel_samples_silence(layout3, circuit3, channel_all_1em3):
    ch = _point_channel({})
    batch = sample(circuit3, layout3, {"X": ch, "Z": ch}, 1000, seed=1)
    assert not batch.det_words.any()
    assert not batch.obs.any()
    dem_ref = enumerate_faults(circuit3, layout3,
                               {"X": channel_all_1em3, "Z": channel_all_1em3})
    graph = build_graph(dem_ref, "Z")
    est = estimate(batch, graph, 3, 0.0, "none")
    assert est.p_l == 0.0


def test_forced_fault_reproduces_dem_signature(layout3, circuit3):
    ch = _point_channel({"IXIII": 0.01})
    idx = pauli.label_to_index("IXIII")
    marker = next(m for m, (pid, r) in enumerate(circuit3.marker_info)
                  if r == 2)
    batch = sample(circuit3, layout3, {"X": ch, "Z": ch}, 4, seed=9,
                   forced_faults={marker: idx})
    dem = enumerate_faults(circuit3, layout3, {"X": ch, "Z": ch})
    match = [f for f in dem.faults if (marker, "IXIII") in f.provenance]
    assert len(match) == 1
    expected = np.zeros(circuit3.n_detectors, dtype=np.uint8)
    expected[list(match[0].detectors)] = 1
    got = batch.detector_row(0)
    assert np.array_equal(got, expected)
    assert batch.obs[0] == match[0].logical


def test_sampling_marginals_match_channel(layout3, circuit3, channel_all_1em3):
    ch = channel_all_1em3
    n = 100_000
    counts = marker_histograms(circuit3, layout3, {"X": ch, "Z": ch}, n, seed=7)
    for marker in (0, 11, 23):
        freq = counts[marker] / n
        sigma = np.sqrt(np.maximum(ch.probs * (1 - ch.probs), 1e-12) / n)
        assert np.all(np.abs(freq - ch.probs) < 4 * sigma + 5.0 / n)


def test_determinism_and_worker_split_invariance(layout3, circuit3):
    ch = _point_channel({"IXIII": 0.2, "ZIIII": 0.1})
    chans = {"X": ch, "Z": ch}
    full = sample(circuit3, layout3, chans, 10_000, seed=13)
    again = sample(circuit3, layout3, chans, 10_000, seed=13)
    assert np.array_equal(full.det_words, again.det_words)
    assert np.array_equal(full.obs, again.obs)
    cs = ChannelSampler(circuit3, layout3, chans, seed=13)
    first = cs.sample_range(0, 4096)
    second = cs.sample_range(4096, 10_000)
    assert np.array_equal(np.vstack([first.det_words, second.det_words]),
                          full.det_words)
    assert np.array_equal(np.concatenate([first.obs, second.obs]), full.obs)
    with pytest.raises(ValidationError):
        cs.sample_range(100, 200)  # off the RNG block grid


def test_different_seeds_differ(layout3, circuit3):
    ch = _point_channel({"IXIII": 0.2})
    a = sample(circuit3, layout3, {"X": ch, "Z": ch}, 5000, seed=1)
    b = sample(circuit3, layout3, {"X": ch, "Z": ch}, 5000, seed=2)
    assert not np.array_equal(a.det_words, b.det_words)


def test_zero_noise_upper_ci_rule_of_three(layout3, circuit3, channel_all_1em3):
    ch = _point_channel({})
    dem_ref = enumerate_faults(circuit3, layout3,
                               {"X": channel_all_1em3, "Z": channel_all_1em3})
    graph = build_graph(dem_ref, "Z")
    batch = sample(circuit3, layout3, {"X": ch, "Z": ch}, 100, seed=3)
    est = estimate(batch, graph, 3, 0.0, "none")
    assert est.p_l == 0.0
    assert est.ci[1] <= 3.7 / batch.n_shots


def test_wilson_interval_basics():
    lo, hi = wilson_interval(0, 1000)
    assert lo == 0.0 and 0 < hi < 0.005
    lo, hi = wilson_interval(500, 1000)
    assert lo < 0.5 < hi
    assert wilson_interval(0, 0) == (0.0, 1.0)


def test_estimate_against_exhaustive_single_round_oracle(layout3):
    """Sampled p_L agrees with exact enumeration over the independent-fault
    model on a one-round circuit with a floored channel."""
    ir = build_circuit(layout3, rounds=1)
    ch = _point_channel({"IXIII": 2e-3, "IIXII": 1.5e-3, "IYIII": 1e-3,
                         "ZIIII": 1e-3})
    chans = {"X": ch, "Z": ch}
    dem = enumerate_faults(ir, layout3, chans)
    graph = build_graph(dem, "Z")
    faults = dem.faults
    assert len(faults) <= 18
    # exact p_L over all 2^m subsets of independent faults
    n_det = ir.n_detectors
    exact = 0.0
    for mask in range(1 << len(faults)):
        prob = 1.0
        syndrome = np.zeros(n_det, dtype=np.uint8)
        flip = 0
        for i, f in enumerate(faults):
            if mask >> i & 1:
                prob *= f.probability
                syndrome[list(f.detectors)] ^= 1
                flip ^= f.logical
            else:
                prob *= 1.0 - f.probability
        if decode(graph, syndrome).logical != flip:
            exact += prob
    batch = sample(ir, layout3, chans, 400_000, seed=21)
    est = estimate(batch, graph, 3, 1e-3, "none")
    assert est.ci[0] <= exact <= est.ci[1]


def test_estimate_rejects_mismatched_graph(layout3, circuit3, channel_all_1em3):
    chans = {"X": channel_all_1em3, "Z": channel_all_1em3}
    ir1 = build_circuit(layout3, rounds=1)
    batch1 = sample(ir1, layout3, chans, 100, seed=2)
    graph3 = build_graph(enumerate_faults(circuit3, layout3, chans), "Z")
    with pytest.raises(ValidationError):
        estimate(batch1, graph3, 3, 0.0, "none")
