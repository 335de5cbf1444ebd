"""Matching decoder on per-basis space-time detector graphs.

Faults from the detector error model with at most two detectors of the
chosen basis become weighted edges (single-detector faults connect to a
virtual boundary node); heavier faults are decomposed into existing edges.
Decoding is minimum-weight perfect matching over the defect set: an exact
bitmask dynamic program up to ``cap`` defects, and greedy nearest-neighbour
matching with 2-opt refinement above it (counted, never silent).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .code import DetectorErrorModel
from .errors import IntegrityError

DEFECT_CAP_DEFAULT = 16


@dataclass
class MatchingGraph:
    """Shortest-path tables over one basis' detectors plus a boundary node."""

    basis: str
    detectors: tuple            # global detector ids, node order
    node_of: dict               # global detector id -> node index
    weights: np.ndarray         # (n, n) edge weights (inf if absent)
    edge_logical: np.ndarray    # (n, n) logical parity of direct edges
    edge_prob: np.ndarray       # (n, n) merged probability of direct edges
    boundary_weight: np.ndarray
    boundary_logical: np.ndarray
    boundary_prob: np.ndarray
    dist: np.ndarray = None     # all-pairs shortest paths
    path_logical: np.ndarray = None
    bdist: np.ndarray = None    # node -> boundary shortest path
    bpath_logical: np.ndarray = None
    failure_mass: float = 0.0
    ambiguity_mass: float = 0.0
    cap: int = DEFECT_CAP_DEFAULT
    fallback_count: int = 0

    @property
    def n_nodes(self) -> int:
        return len(self.detectors)

    def save_edges(self, path) -> None:
        """CSV edge list; the virtual boundary node is written as -1."""
        with open(path, "w") as fh:
            fh.write("u,v,weight,p,logical\n")
            n = self.n_nodes
            for i in range(n):
                for j in range(i + 1, n):
                    if np.isfinite(self.weights[i, j]):
                        fh.write(f"{self.detectors[i]},{self.detectors[j]},"
                                 f"{self.weights[i, j]!r},"
                                 f"{self.edge_prob[i, j]!r},"
                                 f"{int(self.edge_logical[i, j])}\n")
            for i in range(n):
                if np.isfinite(self.boundary_weight[i]):
                    fh.write(f"{self.detectors[i]},-1,"
                             f"{self.boundary_weight[i]!r},"
                             f"{self.boundary_prob[i]!r},"
                             f"{int(self.boundary_logical[i])}\n")


@dataclass(frozen=True)
class Correction:
    pairs: tuple                # ((i, j), ...) node pairs, j = -1 for boundary
    weight: float
    logical: int
    used_fallback: bool


def build_graph(dem: DetectorErrorModel, basis: str,
                cap: int = DEFECT_CAP_DEFAULT,
                max_failure_mass: float = 0.01) -> MatchingGraph:
    """Compile the DEM's faults of one detector basis into a matching graph.

    Faults with more than two in-basis detectors are decomposed into a
    minimum-weight partition over existing edges; faults that do not
    decompose are accumulated as failure mass and rejected above
    ``max_failure_mass`` of the total.
    """
    in_basis = {i for i, info in enumerate(dem.detector_info)
                if info[2] == basis}
    # detectors that no fault can fire stay out of the graph
    touched = {d for f in dem.faults for d in f.detectors if d in in_basis}
    detectors = tuple(sorted(touched))
    node_of = {det: n for n, det in enumerate(detectors)}
    n = len(detectors)
    # per-edge probability buckets split by the logical flip the fault carries
    edge_bucket = np.zeros((n, n, 2))
    bbucket = np.zeros((n, 2))

    deferred = []
    total_mass = 0.0
    for fault in dem.faults:
        dets = tuple(sorted(node_of[d] for d in fault.detectors if d in node_of))
        logical = fault.logical
        p = fault.probability
        total_mass += p
        if len(dets) == 0:
            if logical:
                # an undetectable logical flip cannot enter a matching graph
                deferred.append((dets, logical, p))
            continue
        if len(dets) == 1:
            _xor_into(bbucket, (dets[0], logical), p)
        elif len(dets) == 2:
            _xor_into(edge_bucket, (dets[0], dets[1], logical), p)
            _xor_into(edge_bucket, (dets[1], dets[0], logical), p)
        else:
            deferred.append((dets, logical, p))

    # resolve each edge's logical bit from the dominant bucket; the minority
    # bucket is intrinsically mispredicted by a matching graph and reported
    edge_seen = edge_bucket.sum(axis=2) > 0
    edge_logical = (edge_bucket[:, :, 1] > edge_bucket[:, :, 0]).astype(np.uint8)
    edge_prob = _xor_buckets(edge_bucket)
    ambiguity_mass = float(np.triu(edge_bucket.min(axis=2)).sum())
    bseen = bbucket.sum(axis=1) > 0
    blogical = (bbucket[:, 1] > bbucket[:, 0]).astype(np.uint8)
    bprob = _xor_buckets(bbucket)
    ambiguity_mass += float(bbucket.min(axis=1).sum())

    failure_mass = 0.0
    for dets, logical, p in deferred:
        parts = _decompose(dets, logical, edge_seen, bseen, edge_prob, bprob,
                           edge_logical, blogical)
        if parts is None:
            failure_mass += p
            continue
        for comp in parts:
            if len(comp) == 2:
                i, j = comp
                q = edge_prob[i, j]
                edge_prob[i, j] = edge_prob[j, i] = q * (1 - p) + p * (1 - q)
            else:
                q = bprob[comp[0]]
                bprob[comp[0]] = q * (1 - p) + p * (1 - q)
    if total_mass > 0 and failure_mass > max_failure_mass * total_mass:
        raise IntegrityError(
            f"{failure_mass:.3e} of {total_mass:.3e} fault mass does not "
            f"decompose into graph edges; the noise is not graphlike")

    weights = np.full((n, n), np.inf)
    for i in range(n):
        for j in range(n):
            if edge_seen[i, j]:
                p = edge_prob[i, j]
                if p >= 0.5:
                    raise IntegrityError(
                        f"edge ({i},{j}) has p={p:.3f} >= 0.5; unphysical at "
                        "sub-threshold decay rates")
                weights[i, j] = math.log((1 - p) / p)
    bweights = np.full(n, np.inf)
    for i in range(n):
        if bseen[i]:
            p = bprob[i]
            if p >= 0.5:
                raise IntegrityError(f"boundary edge {i} has p >= 0.5")
            bweights[i] = math.log((1 - p) / p)

    graph = MatchingGraph(
        basis=basis, detectors=detectors, node_of=node_of, weights=weights,
        edge_logical=edge_logical, edge_prob=edge_prob,
        boundary_weight=bweights, boundary_logical=blogical,
        boundary_prob=bprob, failure_mass=failure_mass,
        ambiguity_mass=ambiguity_mass, cap=cap)
    _shortest_paths(graph)
    return graph


def _xor_into(buckets, index, p):
    q = buckets[index]
    buckets[index] = q * (1 - p) + p * (1 - q)


def _xor_buckets(buckets):
    p0 = buckets[..., 0]
    p1 = buckets[..., 1]
    return p0 * (1 - p1) + p1 * (1 - p0)


def _decompose(dets, logical, edge_seen, bseen, edge_prob, bprob,
               edge_logical, blogical):
    """Minimum-weight partition of a detector set into existing edges and
    boundary singletons (exhaustive; sets here have at most ~6 detectors).

    Only partitions whose component logical parities XOR to the fault's own
    logical flip are admissible -- anything else would bias predictions."""
    best = (np.inf, None)

    def weight_of(comp):
        if len(comp) == 2:
            i, j = comp
            if not edge_seen[i, j]:
                return None
            return (math.log((1 - edge_prob[i, j]) / edge_prob[i, j]),
                    int(edge_logical[i, j]))
        i = comp[0]
        if not bseen[i]:
            return None
        return (math.log((1 - bprob[i]) / bprob[i]), int(blogical[i]))

    def recurse(remaining, acc, wsum, parity):
        nonlocal best
        if wsum >= best[0]:
            return
        if not remaining:
            if parity == logical:
                best = (wsum, list(acc))
            return
        first = remaining[0]
        got = weight_of((first,))
        if got is not None:
            recurse(remaining[1:], acc + [(first,)], wsum + got[0],
                    parity ^ got[1])
        for k in range(1, len(remaining)):
            comp = (first, remaining[k])
            got = weight_of(tuple(sorted(comp)))
            if got is not None:
                rest = remaining[1:k] + remaining[k + 1:]
                recurse(rest, acc + [comp], wsum + got[0], parity ^ got[1])

    recurse(tuple(dets), [], 0.0, 0)
    return best[1]


def _shortest_paths(graph: MatchingGraph) -> None:
    """Floyd-Warshall with logical parity tracking; strict-improvement
    relaxation keeps tie-breaking deterministic (lexicographic node order)."""
    n = graph.n_nodes
    dist = graph.weights.copy()
    par = graph.edge_logical.astype(np.uint8).copy()
    for i in range(n):
        dist[i, i] = 0.0
    bdist = graph.boundary_weight.copy()
    bpar = graph.boundary_logical.astype(np.uint8).copy()
    for k in range(n):
        via = dist[:, k][:, None] + dist[k, :][None, :]
        better = via < dist - 1e-15
        if better.any():
            pvia = par[:, k][:, None] ^ par[k, :][None, :]
            dist[better] = via[better]
            par[better] = pvia[better]
        bvia = dist[:, k] + bdist[k]
        bbetter = bvia < bdist - 1e-15
        if bbetter.any():
            bpvia = par[:, k] ^ bpar[k]
            bdist[bbetter] = bvia[bbetter]
            bpar[bbetter] = bpvia[bbetter]
    if not np.all(np.isfinite(bdist)):
        raise IntegrityError("matching graph is not connected to the boundary")
    finite = np.isfinite(dist)
    if not np.array_equal(finite, finite.T):
        raise IntegrityError("shortest-path table is not symmetric")
    if finite.any() and np.max(np.abs(dist[finite] - dist.T[finite])) > 1e-12:
        raise IntegrityError("shortest-path table is not symmetric")
    graph.dist = dist
    graph.path_logical = par
    graph.bdist = bdist
    graph.bpath_logical = bpar


def decode(graph: MatchingGraph, detector_bits: np.ndarray) -> Correction:
    """Match the defects of one shot (detector_bits indexed by global ids)."""
    defects = [graph.node_of[d] for d in np.nonzero(detector_bits)[0]
               if d in graph.node_of]
    defects.sort()
    k = len(defects)
    if k == 0:
        return Correction(pairs=(), weight=0.0, logical=0, used_fallback=False)
    if k <= graph.cap:
        pairs, weight = _match_exact(graph, defects)
        fallback = False
    else:
        pairs, weight = _match_greedy(graph, defects)
        graph.fallback_count += 1
        fallback = True
    logical = 0
    out_pairs = []
    for i, j in pairs:
        if j < 0:
            logical ^= int(graph.bpath_logical[defects[i]])
            out_pairs.append((defects[i], -1))
        else:
            logical ^= int(graph.path_logical[defects[i], defects[j]])
            out_pairs.append((defects[i], defects[j]))
    return Correction(pairs=tuple(out_pairs), weight=weight, logical=logical,
                      used_fallback=fallback)


def decode_trace(graph: MatchingGraph, detector_bits: np.ndarray) -> str:
    """Human-readable account of one decoding (debug aid)."""
    corr = decode(graph, detector_bits)
    lines = [f"defects: {[graph.detectors[i] for i, _ in corr.pairs]}"]
    for i, j in corr.pairs:
        if j < 0:
            lines.append(f"  {graph.detectors[i]} -> boundary "
                         f"(w={graph.bdist[i]:.3f}, "
                         f"flip={int(graph.bpath_logical[i])})")
        else:
            lines.append(f"  {graph.detectors[i]} -> {graph.detectors[j]} "
                         f"(w={graph.dist[i, j]:.3f}, "
                         f"flip={int(graph.path_logical[i, j])})")
    lines.append(f"total weight {corr.weight:.3f}, predicted flip "
                 f"{corr.logical}, fallback={corr.used_fallback}")
    return "\n".join(lines)


def _match_exact(graph: MatchingGraph, defects: list):
    """O(2^k k) minimum-weight matching with per-defect boundary option."""
    k = len(defects)
    d = graph.dist[np.ix_(defects, defects)]
    bd = graph.bdist[defects]
    memo_w = np.full(1 << k, np.inf)
    memo_choice = [None] * (1 << k)
    memo_w[0] = 0.0
    for mask in range(1, 1 << k):
        low = (mask & -mask).bit_length() - 1
        rest = mask ^ (1 << low)
        w = bd[low] + memo_w[rest]
        choice = (low, -1, rest)
        m = rest
        while m:
            j = (m & -m).bit_length() - 1
            m ^= 1 << j
            w2 = d[low, j] + memo_w[rest ^ (1 << j)]
            if w2 < w - 1e-15:
                w = w2
                choice = (low, j, rest ^ (1 << j))
        memo_w[mask] = w
        memo_choice[mask] = choice
    pairs = []
    mask = (1 << k) - 1
    while mask:
        i, j, rest = memo_choice[mask]
        pairs.append((i, j))
        mask = rest
    return pairs, float(memo_w[(1 << k) - 1])


def _match_greedy(graph: MatchingGraph, defects: list):
    """Nearest-neighbour construction plus 2-opt refinement."""
    k = len(defects)
    d = graph.dist[np.ix_(defects, defects)]
    bd = graph.bdist[defects]
    unmatched = list(range(k))
    pairs = []
    while unmatched:
        best = (np.inf, None)
        for ai, i in enumerate(unmatched):
            if bd[i] < best[0]:
                best = (bd[i], (i, -1))
            for j in unmatched[ai + 1:]:
                if d[i, j] < best[0]:
                    best = (d[i, j], (i, j))
        _, (i, j) = best
        pairs.append((i, j))
        unmatched.remove(i)
        if j >= 0:
            unmatched.remove(j)

    def pair_w(i, j):
        return bd[i] if j < 0 else d[i, j]

    improved = True
    while improved:
        improved = False
        for a in range(len(pairs)):
            for b in range(a + 1, len(pairs)):
                i1, j1 = pairs[a]
                i2, j2 = pairs[b]
                current = pair_w(i1, j1) + pair_w(i2, j2)
                options = [((i1, i2), (j1, j2)), ((i1, j2), (i2, j1))]
                for (p1, p2) in options:
                    if p1[1] == -1 and p1[0] == -1:
                        continue
                    cand = []
                    ok = True
                    for (u, v) in (p1, p2):
                        if u == -1 and v == -1:
                            ok = False
                            break
                        if u == -1:
                            u, v = v, -1
                        elif v != -1 and u > v:
                            u, v = v, u
                        cand.append((u, v))
                    if not ok:
                        continue
                    w = sum(pair_w(u, v) for u, v in cand)
                    if w < current - 1e-12:
                        pairs[a], pairs[b] = cand[0], cand[1]
                        improved = True
                        current = w
    weight = sum(pair_w(i, j) for i, j in pairs)
    return pairs, float(weight)
