"""Rotated surface code: layout, syndrome-extraction circuits, fault model.

Geometry (x east, y north): data qubits sit at odd coordinates (2c+1, 2r+1)
for c, r in [0, d); plaquette centers at even coordinates.  Weight-2 X
plaquettes live on the west/east boundaries, weight-2 Z plaquettes on the
north/south boundaries; Z_L is the west data column, X_L the south data row.

Readout order of a plaquette's data corners (the gate-slot -> corner map
exported to the hook classifier):

    Z plaquettes: SE, NW, NE, SW
    X plaquettes: NW, SW, SE, NE

Both orders keep every single-decay error string harmless under perfect
inter-gate ionization: the CZ-frame factoring attaches Z strings to the
data corners gated before the fault, and with these orders no such prefix
pair aligns with the same-species logical in either basis, while the
mid-sequence corner pairs (where imperfect schedules develop correlated
hook strings) stay aligned with a lattice row or column so the census can
see them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import pauli
from .errors import ValidationError

# corner offsets (dx, dy) from a plaquette center, in readout order
READOUT_CORNERS = {
    "Z": ((1, -1), (-1, 1), (1, 1), (-1, -1)),   # SE, NW, NE, SW
    "X": ((-1, 1), (-1, -1), (1, -1), (1, 1)),   # NW, SW, SE, NE
}


@dataclass(frozen=True)
class Plaquette:
    id: int
    kind: str                 # "X" or "Z"
    center: tuple             # (x, y)
    corners: tuple            # data-qubit index or None per readout slot
    ancilla: int              # ancilla qubit index

    @property
    def data_in_order(self) -> tuple:
        return tuple(q for q in self.corners if q is not None)

    @property
    def weight(self) -> int:
        return len(self.data_in_order)


@dataclass(frozen=True)
class Layout:
    d: int
    data_coords: tuple        # index -> (x, y)
    plaquettes: tuple
    z_logical: tuple          # data indices of the west column
    x_logical: tuple          # data indices of the south row

    @property
    def n_data(self) -> int:
        return len(self.data_coords)

    @property
    def n_qubits(self) -> int:
        return self.n_data + len(self.plaquettes)

    def stabilizer_support(self, plq: Plaquette) -> dict:
        code = 1 if plq.kind == "X" else 3  # X or Z on each corner
        return {q: code for q in plq.data_in_order}


def build_layout(d: int) -> Layout:
    if d % 2 == 0 or not 3 <= d <= 11:
        raise ValidationError("distance must be odd and within [3, 11]")
    data_coords = []
    data_index = {}
    for r in range(d):
        for c in range(d):
            xy = (2 * c + 1, 2 * r + 1)
            data_index[xy] = len(data_coords)
            data_coords.append(xy)

    def kind_at(a: int, b: int) -> str:
        return "Z" if (a + b) % 2 == 0 else "X"

    plaquettes = []
    centers = []
    for b in range(d + 1):
        for a in range(d + 1):
            x, y = 2 * a, 2 * b
            kind = kind_at(a, b)
            present = [(x + dx, y + dy) in data_index
                       for dx, dy in READOUT_CORNERS[kind]]
            n_present = sum(present)
            if n_present == 4:
                centers.append((x, y, kind))
            elif n_present == 2:
                # boundary plaquettes: X only on west/east, Z only north/south
                if kind == "X" and x in (0, 2 * d):
                    centers.append((x, y, kind))
                if kind == "Z" and y in (0, 2 * d):
                    centers.append((x, y, kind))
    centers.sort(key=lambda t: (t[1], t[0]))
    for pid, (x, y, kind) in enumerate(centers):
        present = [data_index[(x + dx, y + dy)]
                   for dx, dy in READOUT_CORNERS[kind]
                   if (x + dx, y + dy) in data_index]
        # gate slot k drives the k-th present corner: boundary plaquettes run
        # their two gates back to back in slots 1 and 2, and slots 3 and 4
        # are marginalized out of the five-qubit channel
        corners = tuple(present + [None] * (4 - len(present)))
        plaquettes.append(Plaquette(id=pid, kind=kind, center=(x, y),
                                    corners=corners, ancilla=d * d + pid))
    layout = Layout(
        d=d,
        data_coords=tuple(data_coords),
        plaquettes=tuple(plaquettes),
        z_logical=tuple(data_index[(1, 2 * r + 1)] for r in range(d)),
        x_logical=tuple(data_index[(2 * c + 1, 1)] for c in range(d)),
    )
    if len(plaquettes) != d * d - 1:
        raise ValidationError("layout construction produced a wrong plaquette count")
    return layout


# ---------------------------------------------------------------------------
# Circuit IR

@dataclass(frozen=True)
class Instr:
    op: str
    args: tuple

    def line(self) -> str:
        return " ".join([self.op] + [str(a) for a in self.args])


@dataclass
class CircuitIR:
    """Flat Clifford instruction list with noise markers and detectors.

    Instructions (qubits are integer ids, m<k> measurement record indices):
      prepare <q> <z|x>
      h <q>
      cz <q1> <q2>
      noise <marker> <plaquette> <round>
      measure <q> <z|x> <reset|keep>
      detector <id> m<i> [m<j> ...]
      observable m<i> [m<j> ...]
    """

    d: int
    memory_basis: str
    instructions: list = field(default_factory=list)
    n_qubits: int = 0
    n_measurements: int = 0
    n_detectors: int = 0
    n_markers: int = 0
    marker_info: list = field(default_factory=list)    # (plaquette id, round)
    detector_info: list = field(default_factory=list)  # (plaquette id, round tag, kind)
    observable_refs: tuple = ()

    def serialize(self) -> str:
        head = f"# rydqec circuit d={self.d} memory={self.memory_basis} qubits={self.n_qubits}\n"
        return head + "\n".join(i.line() for i in self.instructions) + "\n"


def build_circuit(layout: Layout, rounds: int | None = None,
                  memory_basis: str = "z",
                  group_order: str = "z_first") -> CircuitIR:
    """d rounds of sequential stabilizer readout plus transversal closure.

    Each plaquette block prepares its ancilla in |+>, runs the CZ ladder in
    readout order (X plaquettes inside a data-side Hadamard sandwich), drops
    one noise marker, and measures the ancilla in the X basis with reset.
    """
    if memory_basis not in ("z", "x"):
        raise ValidationError("memory_basis must be 'z' or 'x'")
    if group_order not in ("z_first", "x_first", "interleaved"):
        raise ValidationError(f"unknown group_order {group_order!r}")
    rounds = layout.d if rounds is None else rounds
    if rounds < 1:
        raise ValidationError("need at least one round")
    ir = CircuitIR(d=layout.d, memory_basis=memory_basis)
    ir.n_qubits = layout.n_qubits
    ins = ir.instructions

    det_basis = "Z" if memory_basis == "z" else "X"
    last_meas = {}

    for q in range(layout.n_data):
        ins.append(Instr("prepare", (q, memory_basis)))

    if group_order == "z_first":
        ordered = [p for p in layout.plaquettes if p.kind == "Z"] + \
                  [p for p in layout.plaquettes if p.kind == "X"]
    elif group_order == "x_first":
        ordered = [p for p in layout.plaquettes if p.kind == "X"] + \
                  [p for p in layout.plaquettes if p.kind == "Z"]
    else:
        ordered = list(layout.plaquettes)

    for rnd in range(1, rounds + 1):
        for plq in ordered:
            anc = plq.ancilla
            ins.append(Instr("prepare", (anc, "x")))
            if plq.kind == "X":
                for q in plq.data_in_order:
                    ins.append(Instr("h", (q,)))
            for q in plq.data_in_order:
                ins.append(Instr("cz", (anc, q)))
            marker = ir.n_markers
            ins.append(Instr("noise", (marker, plq.id, rnd)))
            ir.marker_info.append((plq.id, rnd))
            ir.n_markers += 1
            if plq.kind == "X":
                for q in plq.data_in_order:
                    ins.append(Instr("h", (q,)))
            midx = ir.n_measurements
            ins.append(Instr("measure", (anc, "x", "reset")))
            ir.n_measurements += 1
            if rnd == 1:
                if plq.kind == det_basis:
                    _add_detector(ir, plq.id, rnd, plq.kind, (midx,))
            else:
                _add_detector(ir, plq.id, rnd, plq.kind, (midx, last_meas[plq.id]))
            last_meas[plq.id] = midx

    final_meas = {}
    for q in range(layout.n_data):
        final_meas[q] = ir.n_measurements
        ins.append(Instr("measure", (q, memory_basis, "keep")))
        ir.n_measurements += 1
    for plq in layout.plaquettes:
        if plq.kind != det_basis:
            continue
        refs = tuple(final_meas[q] for q in plq.data_in_order) + (last_meas[plq.id],)
        _add_detector(ir, plq.id, rounds + 1, plq.kind, refs)
    logical = layout.z_logical if memory_basis == "z" else layout.x_logical
    ins.append(Instr("observable", tuple(f"m{final_meas[q]}" for q in logical)))
    ir.observable_refs = tuple(final_meas[q] for q in logical)
    return ir


def _add_detector(ir: CircuitIR, plq_id: int, rnd: int, kind: str, refs: tuple):
    ir.instructions.append(
        Instr("detector", (ir.n_detectors,) + tuple(f"m{m}" for m in refs)))
    ir.detector_info.append((plq_id, rnd, kind))
    ir.n_detectors += 1


# ---------------------------------------------------------------------------
# Pauli-frame propagation

def _instruction_index_of_marker(ir: CircuitIR, marker: int) -> int:
    for i, ins in enumerate(ir.instructions):
        if ins.op == "noise" and ins.args[0] == marker:
            return i
    raise ValidationError(f"marker {marker} not in circuit")


def propagate_frame(ir: CircuitIR, start: int, fx: np.ndarray, fz: np.ndarray):
    """Run the Pauli frame (fx, fz) from instruction index ``start`` to the
    end; returns (measurement flip bits, detector flip bits, observable bit)."""
    meas_flip = np.zeros(ir.n_measurements, dtype=np.uint8)
    det_flip = np.zeros(max(ir.n_detectors, 1), dtype=np.uint8)
    obs = 0
    n_meas = 0
    # count measurements before start so record indices line up
    for ins in ir.instructions[:start]:
        if ins.op == "measure":
            n_meas += 1
    for ins in ir.instructions[start:]:
        op = ins.op
        if op == "cz":
            a, b = ins.args
            fz[b] ^= fx[a]
            fz[a] ^= fx[b]
        elif op == "h":
            q = ins.args[0]
            fx[q], fz[q] = fz[q], fx[q]
        elif op == "measure":
            q, basis, reset = ins.args
            flip = fx[q] if basis == "z" else fz[q]
            meas_flip[n_meas] = flip
            n_meas += 1
            if reset == "reset":
                fx[q] = 0
                fz[q] = 0
        elif op == "prepare":
            q = ins.args[0]
            fx[q] = 0
            fz[q] = 0
        elif op == "detector":
            det_id = ins.args[0]
            bit = 0
            for ref in ins.args[1:]:
                bit ^= int(meas_flip[int(ref[1:])])
            det_flip[det_id] = bit
        elif op == "observable":
            for ref in ins.args:
                obs ^= int(meas_flip[int(ref[1:])])
    return det_flip, obs


def marker_generator_signatures(ir: CircuitIR, layout: Layout):
    """For every marker, the detector/observable signature of each X and Z
    generator on the 5 channel positions (ancilla + 4 gate slots).

    Returns (det_words, obs_bits, n_words): arrays of shape
    (n_markers, 10, n_words) and (n_markers, 10); generator g = 2*pos + b
    with b=0 for X and b=1 for Z on channel position pos.  Positions whose
    gate slot has no data qubit (weight-2 plaquettes) have empty signatures,
    which marginalizes the five-qubit channel onto the present atoms.
    """
    n_words = max(1, (ir.n_detectors + 63) // 64)
    det_words = np.zeros((ir.n_markers, 10, n_words), dtype=np.uint64)
    obs_bits = np.zeros((ir.n_markers, 10), dtype=np.uint8)
    plaq_by_id = {p.id: p for p in layout.plaquettes}
    for marker, (plq_id, _rnd) in enumerate(ir.marker_info):
        plq = plaq_by_id[plq_id]
        start = _instruction_index_of_marker(ir, marker)
        qubits = [plq.ancilla] + list(plq.corners)
        for pos in range(5):
            q = qubits[pos]
            if q is None:
                continue
            for b, which in enumerate("xz"):
                fx = np.zeros(ir.n_qubits, dtype=np.uint8)
                fz = np.zeros(ir.n_qubits, dtype=np.uint8)
                (fx if which == "x" else fz)[q] = 1
                det, obs = propagate_frame(ir, start, fx, fz)
                det_words[marker, 2 * pos + b] = _pack_bits(det, n_words)
                obs_bits[marker, 2 * pos + b] = obs
    return det_words, obs_bits, n_words


def _pack_bits(bits: np.ndarray, n_words: int) -> np.ndarray:
    words = np.zeros(n_words, dtype=np.uint64)
    for i in np.nonzero(bits)[0]:
        words[i // 64] |= np.uint64(1) << np.uint64(i % 64)
    return words


def pauli_signature_tables(det_words: np.ndarray, obs_bits: np.ndarray):
    """Expand generator signatures to all 1024 strings by XOR linearity.

    Returns (sig_det (markers, 1024, words), sig_obs (markers, 1024))."""
    xb, zb = pauli.symplectic_bits()
    n_markers, _, n_words = det_words.shape
    sig_det = np.zeros((n_markers, pauli.N_STRINGS, n_words), dtype=np.uint64)
    sig_obs = np.zeros((n_markers, pauli.N_STRINGS), dtype=np.uint8)
    for pos in range(5):
        for b, bits in ((0, xb[:, pos]), (1, zb[:, pos])):
            mask = bits.astype(bool)
            if not mask.any():
                continue
            gen = det_words[:, 2 * pos + b, :]
            sig_det[:, mask, :] ^= gen[:, None, :]
            sig_obs[:, mask] ^= obs_bits[:, 2 * pos + b][:, None]
    return sig_det, sig_obs


# ---------------------------------------------------------------------------
# Detector error model

@dataclass(frozen=True)
class Fault:
    probability: float
    detectors: tuple
    logical: int
    provenance: tuple  # ((marker, label), ...)


@dataclass(frozen=True)
class DetectorErrorModel:
    faults: tuple
    n_detectors: int
    detector_info: tuple

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("probability,detectors,logical,provenance\n")
            for f in self.faults:
                dets = ";".join(str(d) for d in f.detectors)
                prov = ";".join(f"{m}:{lab}" for m, lab in f.provenance)
                fh.write(f"{f.probability!r},{dets},{f.logical},{prov}\n")


def enumerate_faults(ir: CircuitIR, layout: Layout, channels: dict,
                     p_floor: float = 1e-12) -> DetectorErrorModel:
    """Propagate every Pauli string with lambda >= p_floor at every marker.

    ``channels`` maps plaquette kind ("X"/"Z") to the PauliChannel stored in
    the CZ frame; X-plaquette markers sit inside the Hadamard sandwich so the
    stored labels propagate through the closing Hadamards unchanged here.
    Identical (detector set, logical) signatures merge independently:
    p <- p(1-q) + q(1-p).
    """
    if p_floor < 0:
        raise ValidationError("p_floor must be non-negative")
    det_words, obs_bits, n_words = marker_generator_signatures(ir, layout)
    sig_det, sig_obs = pauli_signature_tables(det_words, obs_bits)
    plaq_by_id = {p.id: p for p in layout.plaquettes}
    merged = {}
    for marker, (plq_id, _rnd) in enumerate(ir.marker_info):
        probs = channels[plaq_by_id[plq_id].kind].probs
        for idx in np.nonzero(probs >= p_floor)[0]:
            if idx == 0:
                continue
            words = sig_det[marker, idx]
            logical = int(sig_obs[marker, idx])
            dets = _unpack_bits(words)
            if not dets and logical == 0:
                continue
            key = (words.tobytes(), logical)
            p = float(probs[idx])
            prov = (marker, pauli.index_to_label(int(idx)))
            if key in merged:
                q, dd, provs = merged[key]
                merged[key] = (q * (1 - p) + p * (1 - q), dd, provs + (prov,))
            else:
                merged[key] = (p, dets, (prov,))
    faults = []
    for (_, logical), (p, dets, provs) in sorted(
            merged.items(), key=lambda kv: (kv[1][1], kv[0][1])):
        faults.append(Fault(probability=p, detectors=dets, logical=logical,
                            provenance=provs))
    return DetectorErrorModel(faults=tuple(faults), n_detectors=ir.n_detectors,
                              detector_info=tuple(ir.detector_info))


def _unpack_bits(words: np.ndarray) -> tuple:
    out = []
    for w, word in enumerate(words):
        word = int(word)
        while word:
            low = word & -word
            out.append(64 * w + low.bit_length() - 1)
            word ^= low
    return tuple(out)
