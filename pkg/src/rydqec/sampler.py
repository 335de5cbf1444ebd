"""Pauli-frame Monte Carlo over precomputed fault signatures.

Every shot draws one Pauli string per noise marker from that marker's
twirled channel (alias-table sampling) and XORs the string's precomputed
detector/observable signature into the shot's frame.  Randomness is
counter-based: marker m of shot s reads Philox stream (seed, m) at a fixed
offset derived from s alone, so results are bit-identical for any batching
or worker split that respects the 4096-shot block grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import pauli
from .code import CircuitIR, Layout, marker_generator_signatures, pauli_signature_tables
from .decoder import MatchingGraph, decode
from .errors import ValidationError

RNG_BLOCK = 4096  # shots per Philox counter block group (1024 blocks of 4 draws)


@dataclass(frozen=True)
class ShotBatch:
    """Packed detector bits and observable flips for n_shots samples."""

    det_words: np.ndarray   # (n_shots, n_words) uint64
    obs: np.ndarray         # (n_shots,) uint8
    n_detectors: int
    n_shots: int
    seed: int

    def detector_row(self, shot: int) -> np.ndarray:
        bits = np.zeros(self.n_detectors, dtype=np.uint8)
        for w in range(self.det_words.shape[1]):
            word = int(self.det_words[shot, w])
            while word:
                low = word & -word
                bits[64 * w + low.bit_length() - 1] = 1
                word ^= low
        return bits


@dataclass(frozen=True)
class LogicalEstimate:
    p_l: float
    ci: tuple
    n_shots: int
    n_failures: int
    d: int
    gamma: float
    schedule: str
    fallback_shots: int = 0

    def __post_init__(self):
        if not (self.ci[0] <= self.p_l <= self.ci[1]):
            raise ValidationError("confidence interval must contain the estimate")


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple:
    """Two-sided 95% Wilson score interval for a binomial fraction."""
    if n == 0:
        return (0.0, 1.0)
    phat = k / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = (z / denom) * float(np.sqrt(phat * (1 - phat) / n
                                       + z * z / (4 * n * n)))
    lo = 0.0 if k == 0 else max(0.0, center - half)
    hi = 1.0 if k == n else min(1.0, center + half)
    return (lo, hi)


class ChannelSampler:
    """Precompiled alias tables and signatures for one circuit."""

    def __init__(self, ir: CircuitIR, layout: Layout, channels: dict, seed: int):
        for kind, ch in channels.items():
            if abs(ch.probs.sum() - 1.0) > 1e-9 or ch.probs.min() < 0:
                raise ValidationError(f"channel for {kind} plaquettes not normalized")
        self.ir = ir
        self.layout = layout
        self.seed = int(seed)
        det_words, obs_bits, n_words = marker_generator_signatures(ir, layout)
        self.sig_det, self.sig_obs = pauli_signature_tables(det_words, obs_bits)
        self.n_words = n_words
        plaq_by_id = {p.id: p for p in layout.plaquettes}
        self.marker_alias = []
        for plq_id, _rnd in ir.marker_info:
            probs = channels[plaq_by_id[plq_id].kind].probs
            self.marker_alias.append(_alias_table(probs))

    def uniforms(self, marker: int, lo: int, hi: int) -> np.ndarray:
        """Uniform draws for shots [lo, hi) of one marker, batch-invariant."""
        if lo % RNG_BLOCK:
            raise ValidationError("shot ranges must start on the RNG block grid")
        start_block = (lo // RNG_BLOCK) * (RNG_BLOCK // 4)
        bitgen = np.random.Philox(key=self.seed + (marker << 32),
                                  counter=[start_block, 0, 0, 0])
        n = hi - lo
        n_padded = -(-n // 4) * 4
        return np.random.Generator(bitgen).random(n_padded)[:n]

    def sample_indices(self, marker: int, lo: int, hi: int) -> np.ndarray:
        u = self.uniforms(marker, lo, hi)
        kk, coin = np.divmod(u * pauli.N_STRINGS, 1.0)
        kk = kk.astype(np.int64)
        prob, alias = self.marker_alias[marker]
        take_alias = coin >= prob[kk]
        return np.where(take_alias, alias[kk], kk)

    def sample_range(self, lo: int, hi: int,
                     forced_faults: dict | None = None) -> ShotBatch:
        n = hi - lo
        det = np.zeros((n, self.n_words), dtype=np.uint64)
        obs = np.zeros(n, dtype=np.uint8)
        for marker in range(self.ir.n_markers):
            if forced_faults is not None:
                idx = np.full(n, forced_faults.get(marker, 0), dtype=np.int64)
            else:
                idx = self.sample_indices(marker, lo, hi)
            det ^= self.sig_det[marker][idx]
            obs ^= self.sig_obs[marker][idx]
        return ShotBatch(det_words=det, obs=obs, n_detectors=self.ir.n_detectors,
                         n_shots=n, seed=self.seed)


def _alias_table(probs: np.ndarray) -> tuple:
    """Walker alias method tables (prob, alias) for a fixed-size distribution."""
    n = len(probs)
    scaled = probs * n
    prob = np.zeros(n)
    alias = np.zeros(n, dtype=np.int64)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    scaled = scaled.copy()
    while small and large:
        s = small.pop()
        l = large.pop()
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] = scaled[l] - (1.0 - scaled[s])
        (small if scaled[l] < 1.0 else large).append(l)
    for i in large + small:
        prob[i] = 1.0
    return prob, alias


def sample(ir: CircuitIR, layout: Layout, channels: dict, n_shots: int,
           seed: int, forced_faults: dict | None = None) -> ShotBatch:
    """Draw a full batch (see ChannelSampler for the randomness contract)."""
    if n_shots < 1:
        raise ValidationError("n_shots must be at least 1")
    cs = ChannelSampler(ir, layout, channels, seed)
    return cs.sample_range(0, n_shots, forced_faults=forced_faults)


def marker_histograms(ir: CircuitIR, layout: Layout, channels: dict,
                      n_shots: int, seed: int) -> np.ndarray:
    """Per-marker draw counts over the 1024 strings (same RNG path as
    sample); used by the sampling-statistics checks."""
    cs = ChannelSampler(ir, layout, channels, seed)
    counts = np.zeros((ir.n_markers, pauli.N_STRINGS), dtype=np.int64)
    for marker in range(ir.n_markers):
        idx = cs.sample_indices(marker, 0, n_shots)
        counts[marker] = np.bincount(idx, minlength=pauli.N_STRINGS)
    return counts


def failure_vector(batch: ShotBatch, graph: MatchingGraph,
                   decode_cache: dict | None = None) -> tuple:
    """Per-shot (prediction != observable, fallback used) bit arrays.

    Decoding runs once per unique detector pattern; an external cache can
    carry the pattern -> prediction map across batches."""
    if graph.detectors and max(graph.detectors) >= batch.n_detectors:
        raise ValidationError("matching graph does not fit this batch's circuit")
    rows, inverse = np.unique(batch.det_words, axis=0, return_inverse=True)
    preds = np.zeros(len(rows), dtype=np.uint8)
    fallback = np.zeros(len(rows), dtype=bool)
    for r, row in enumerate(rows):
        key = row.tobytes()
        if decode_cache is not None and key in decode_cache:
            preds[r], fallback[r] = decode_cache[key]
            continue
        corr = decode(graph, _row_bits(row, batch.n_detectors))
        preds[r] = corr.logical
        fallback[r] = corr.used_fallback
        if decode_cache is not None:
            decode_cache[key] = (preds[r], fallback[r])
    return (preds[inverse] != batch.obs), fallback[inverse]


def estimate(batch: ShotBatch, graph: MatchingGraph, d: int, gamma: float,
             schedule: str) -> LogicalEstimate:
    """Decode every shot (cached per unique detector pattern) and compare
    the prediction with the sampled observable flip."""
    fails, fallback = failure_vector(batch, graph)
    failures = int(fails.sum())
    n = batch.n_shots
    ci = wilson_interval(failures, n)
    return LogicalEstimate(p_l=failures / n, ci=ci, n_shots=n,
                           n_failures=failures, d=d, gamma=gamma,
                           schedule=schedule,
                           fallback_shots=int(fallback.sum()))


def _row_bits(words: np.ndarray, n_detectors: int) -> np.ndarray:
    bits = np.zeros(n_detectors, dtype=np.uint8)
    for w, word in enumerate(words):
        word = int(word)
        while word:
            low = word & -word
            bits[64 * w + low.bit_length() - 1] = 1
            word ^= low
    return bits
