"""Time-optimal symmetric Rydberg CZ pulse: synthesis and verification.

The two atoms of a gate are driven by the same phase-modulated pulse at
constant amplitude Omega_max (the time unit; all rates are expressed in
units of Omega_max).  Under perfect data-ancilla blockade the two-atom
dynamics splits into two closed 2x2 sectors,

    H1 = Omega(t)/2 |0r><01| + h.c.           on span{|01>, |0r>}
    H2 = sqrt(2) Omega(t)/2 |W+><11| + h.c.   on span{|11>, |W+>}

with |W+-> = (|1r> +- |r1>)/sqrt(2), while |00> and |W-> are stationary and
|rr> is never populated.  A pulse implements CZ followed by Rz(theta) on
each atom when

    U1|01> = e^{i theta}|01>        U2|11> = -e^{2 i theta}|11>.

Both sector Hamiltonians are traceless, so the sector propagators have unit
determinant; the remaining phases follow:

    U1|0r> = e^{-i theta}|0r>       U2|W+> = -e^{-2 i theta}|W+>

and the pulse mediates excitation hopping in the symmetric sector,

    full9|1r> = e^{-i theta} (i sin(theta)|1r> - cos(theta)|r1>).

Synthesis uses piecewise-constant phases phi_1..phi_n of equal duration and
bisects the total time T down to the shortest value at which the gate
conditions are still reachable below the requested residual.
"""

from __future__ import annotations

import csv
import hashlib
import importlib.resources
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .errors import ValidationError

# Regression constants pinned from the first verified synthesis run of the
# shipped pulse (n_segments=64, tol=1e-10, seed=7).  Cross-checks at
# n_segments=128 and looser tol land within 1.2e-2 of T and 7e-2 of theta:
# the feasibility boundary is sharp in T but the phase has a shallow family
# just above the minimal time.  T is in units of 1/Omega_max.
TIME_OPTIMAL_T = 7.7045898
TIME_OPTIMAL_THETA = 2.2090484

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class GateModel:
    """Plaquette-level gate parameters.

    omega_max sets the time unit; delta_e is pinned to zero in the rotating
    frame; blockade is "infinite" exactly on the four ancilla-data pairs
    (atom 0 is the ancilla) and "none" on every data-data pair.
    """

    omega_max: float = 1.0
    delta_e: float = 0.0
    blockade: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.omega_max <= 0:
            raise ValidationError("omega_max must be positive")
        if self.delta_e != 0.0:
            raise ValidationError("delta_e must be 0 in the rotating frame")
        pairs = dict(self.blockade) if self.blockade else self.default_blockade()
        for (i, j), flag in pairs.items():
            want = "infinite" if 0 in (i, j) else "none"
            if flag != want:
                raise ValidationError(
                    f"blockade[{(i, j)}] must be {want!r}, got {flag!r}")
        object.__setattr__(self, "blockade", pairs)

    @staticmethod
    def default_blockade() -> dict:
        pairs = {(0, k): "infinite" for k in range(1, 5)}
        for i in range(1, 5):
            for j in range(i + 1, 5):
                pairs[(i, j)] = "none"
        return pairs


@dataclass(frozen=True)
class PulseProfile:
    """Piecewise-constant-phase pulse at amplitude Omega_max.

    segments: tuple of (duration, phase) pairs, durations in 1/Omega_max.
    theta: the single-qubit Rz angle the gate leaves on each atom.
    """

    segments: tuple
    total_time: float
    theta: float

    def __post_init__(self):
        segs = tuple((float(d), float(p)) for d, p in self.segments)
        if not segs or any(d <= 0 for d, _ in segs):
            raise ValidationError("segment durations must be positive")
        if abs(sum(d for d, _ in segs) - self.total_time) > 1e-9 * max(1.0, self.total_time):
            raise ValidationError("total_time must equal the sum of durations")
        if not (-math.pi < self.theta <= math.pi):
            raise ValidationError("theta must lie in (-pi, pi]")
        object.__setattr__(self, "segments", segs)

    @property
    def durations(self) -> np.ndarray:
        return np.array([d for d, _ in self.segments])

    @property
    def phases(self) -> np.ndarray:
        return np.array([p for _, p in self.segments])

    def pulse_id(self) -> str:
        """Content hash used to key channel caches."""
        h = hashlib.sha256()
        for d, p in self.segments:
            h.update(f"{d!r},{p!r};".encode())
        h.update(f"{self.theta!r}".encode())
        return h.hexdigest()[:16]

    def absolute_time(self, model: GateModel) -> float:
        """Total duration in the absolute units of the given model."""
        return self.total_time / model.omega_max


@dataclass(frozen=True)
class RestrictedUnitary:
    """Sector propagators and the assembled 9x9 two-qutrit unitary."""

    u1: np.ndarray  # span{|01>, |0r>}
    u2: np.ndarray  # span{|11>, |W+>}
    full9: np.ndarray

    def __post_init__(self):
        for name, u in (("u1", self.u1), ("u2", self.u2)):
            if np.max(np.abs(u @ u.conj().T - np.eye(2))) > 1e-10:
                raise ValidationError(f"{name} is not unitary")
            if abs(np.linalg.det(u) - 1.0) > 1e-10:
                raise ValidationError(f"{name} must have unit determinant")
        if abs(self.full9[0, 0] - 1.0) > 1e-10 or abs(self.full9[8, 8] - 1.0) > 1e-10:
            raise ValidationError("full9 must act trivially on |00> and |rr>")


def _segment_matrices(phases: np.ndarray, tau: np.ndarray, coupling: float) -> np.ndarray:
    """Per-segment 2x2 propagators exp(-i H tau) in the (ground, excited)
    sector basis, stacked along axis 0."""
    half = coupling * tau / 2.0
    c = np.cos(half)
    s = np.sin(half)
    e = np.exp(1j * phases)
    m = np.empty((len(phases), 2, 2), dtype=complex)
    m[:, 0, 0] = c
    m[:, 1, 1] = c
    m[:, 0, 1] = -1j * s / e
    m[:, 1, 0] = -1j * s * e
    return m


def _segment_matrices_dphi(phases: np.ndarray, tau: np.ndarray, coupling: float) -> np.ndarray:
    half = coupling * tau / 2.0
    s = np.sin(half)
    e = np.exp(1j * phases)
    m = np.zeros((len(phases), 2, 2), dtype=complex)
    m[:, 0, 1] = -s / e
    m[:, 1, 0] = s * e
    return m


def _chain(mats: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Total product plus prefix/suffix stacks for gradient assembly.

    prefix[k] = M_{k-1} ... M_0 (prefix[0] = I); suffix[k] = M_{n-1} ... M_{k+1}.
    """
    n = len(mats)
    eye = np.eye(2, dtype=complex)
    prefix = np.empty((n + 1, 2, 2), dtype=complex)
    prefix[0] = eye
    for k in range(n):
        prefix[k + 1] = mats[k] @ prefix[k]
    suffix = np.empty((n + 1, 2, 2), dtype=complex)
    suffix[n] = eye
    for k in range(n - 1, -1, -1):
        suffix[k] = suffix[k + 1] @ mats[k]
    return prefix[n], prefix, suffix


def _amplitudes_and_grads(phases: np.ndarray, tau: np.ndarray):
    """Return a, b = <g|U|g> of the two sectors and their phase gradients."""
    out = []
    for g in (1.0, SQRT2):
        mats = _segment_matrices(phases, tau, g)
        dmats = _segment_matrices_dphi(phases, tau, g)
        total, prefix, suffix = _chain(mats)
        # d a / d phi_k = (suffix[k+1] dM_k prefix[k])[0, 0]
        left = suffix[1:]          # (n, 2, 2)
        right = prefix[:-1]        # (n, 2, 2)
        grad = np.einsum("kab,kbc,kcd->kad", left, dmats, right)[:, 0, 0]
        out.append((total[0, 0], grad))
    (a, da), (b, db) = out
    return a, da, b, db


def _cost_and_grad(params: np.ndarray, tau: np.ndarray):
    phases, theta = params[:-1], params[-1]
    a, da, b, db = _amplitudes_and_grads(phases, tau)
    t1 = np.exp(1j * theta)
    t2 = np.exp(2j * theta)
    r1 = a - t1
    r2 = b + t2
    cost = abs(r1) ** 2 + abs(r2) ** 2
    gphi = 2.0 * (np.conj(r1) * da + np.conj(r2) * db).real
    gtheta = 2.0 * (np.conj(r1) * (-1j * t1) + np.conj(r2) * (2j * t2)).real
    return cost, np.concatenate([gphi, [gtheta]])


def _polish(phases: np.ndarray, theta: float, tau: np.ndarray,
            iters: int = 12) -> tuple[np.ndarray, float, float]:
    """Gauss-Newton refinement on the complex residual vector.

    The squared cost bottoms out near the float64 noise floor (residual
    ~1e-8); working with the residuals directly reaches ~1e-13.
    """
    x = np.concatenate([phases, [theta]])
    n = len(phases)
    best = (np.inf, x)
    for _ in range(iters):
        a, da, b, db = _amplitudes_and_grads(x[:n], tau)
        t1 = np.exp(1j * x[n])
        t2 = np.exp(2j * x[n])
        r = np.array([a - t1, b + t2])
        norm = float(np.max(np.abs(r)))
        if norm < best[0]:
            best = (norm, x.copy())
        if norm < 1e-14:
            break
        jac_c = np.zeros((2, n + 1), dtype=complex)
        jac_c[0, :n] = da
        jac_c[1, :n] = db
        jac_c[0, n] = -1j * t1
        jac_c[1, n] = 2j * t2
        jr = np.vstack([jac_c.real, jac_c.imag])
        rr = np.concatenate([r.real, r.imag])
        dx, *_ = np.linalg.lstsq(jr, rr, rcond=None)
        x = x - dx
    _, x = best
    return x[:n], float(x[n]), best[0]


def _optimize_at_time(total_time: float, n_segments: int, rng: np.random.Generator,
                      starts: list, n_random_starts: int, maxiter: int = 4000):
    """Best (cost, phases, theta) reachable at fixed total time."""
    tau = np.full(n_segments, total_time / n_segments)
    best = (np.inf, None, None)
    inits = list(starts)
    for _ in range(n_random_starts):
        amp = rng.uniform(0.5, 2.5)
        tgrid = np.linspace(-1, 1, n_segments)
        shape = amp * tgrid**2 + rng.normal(scale=0.3, size=n_segments)
        inits.append(np.concatenate([shape, [rng.uniform(-math.pi, math.pi)]]))
    for x0 in inits:
        res = minimize(_cost_and_grad, x0, args=(tau,), jac=True,
                       method="L-BFGS-B",
                       options={"maxiter": maxiter, "ftol": 1e-18, "gtol": 1e-14})
        fun, phases, theta = res.fun, res.x[:-1], float(res.x[-1])
        if fun < 1e-6:
            phases, theta, rmax = _polish(phases, theta, tau)
            fun = rmax * rmax
        if fun < best[0]:
            best = (fun, phases.copy(), theta)
    return best


def _canonicalize(phases: np.ndarray, theta: float) -> tuple[np.ndarray, float]:
    """Fix the theta -> -theta conjugation degeneracy (keep theta >= 0) and
    wrap into (-pi, pi]."""
    theta = math.remainder(theta, 2 * math.pi)
    if theta == -math.pi:
        theta = math.pi
    if theta < 0:
        phases = -phases
        theta = -theta
    return phases, theta


def synthesize_pulse(model: GateModel, n_segments: int, tol: float,
                     seed: int = 7) -> PulseProfile:
    """Find the shortest equal-segment pulse meeting the CZ algebra.

    Bisects the total time, keeping the shortest T at which an optimized
    phase profile verifies below ``tol``; raises if even the initial upper
    bracket cannot converge.
    """
    if n_segments < 8:
        raise ValidationError("n_segments must be at least 8")
    if tol < 1e-10:
        raise ValidationError("tol must be at least 1e-10")
    rng = np.random.default_rng(seed)

    def feasible(total_time, warm, n_random):
        cost, phases, theta = _optimize_at_time(
            total_time, n_segments, rng, warm, n_random_starts=n_random,
            maxiter=8000)
        profile = _build_profile(total_time, phases, theta, n_segments)
        _, residual = verify_cz_algebra(propagate_restricted(profile))
        return residual, phases, theta

    t_hi = 8.0
    residual, phases, theta = feasible(t_hi, [], 6)
    tries = 0
    while residual >= tol and tries < 4:
        t_hi *= 1.15
        tries += 1
        residual, phases, theta = feasible(t_hi, [], 6)
    if residual >= tol:
        raise ValidationError(
            f"pulse optimizer did not converge: best residual {residual:.3e} "
            f"at T={t_hi:.4f}")
    best = (t_hi, phases, theta, residual)

    t_lo = 0.75 * t_hi
    while t_hi - t_lo > 1e-4 * t_hi:
        mid = 0.5 * (t_lo + t_hi)
        warm = [np.concatenate([best[1], [best[2]]])]
        residual, phases, theta = feasible(mid, warm, 3 if tol >= 1e-9 else 5)
        if residual < tol:
            t_hi = mid
            best = (mid, phases, theta, residual)
        else:
            t_lo = mid
    return _build_profile(best[0], best[1], best[2], n_segments)


def _build_profile(total_time: float, phases: np.ndarray, theta: float,
                   n_segments: int) -> PulseProfile:
    phases, theta = _canonicalize(np.asarray(phases, dtype=float), theta)
    tau = total_time / n_segments
    segments = tuple((tau, float(p)) for p in phases)
    return PulseProfile(segments=segments, total_time=float(n_segments * tau), theta=theta)


# ---------------------------------------------------------------------------
# Restricted propagation and algebra verification

# two-qutrit basis indices (atom a, atom b): |ab> -> 3a + b
_I01, _I0R = 1, 2
_I11, _I1R, _IR1 = 4, 5, 7


def propagate_restricted(profile) -> RestrictedUnitary:
    """Integrate the pulse exactly segment by segment in both sectors and
    assemble the 9x9 two-qutrit unitary from the sector symmetry.

    Accepts a PulseProfile or a bare (durations, phases) pair; a profile of
    zero segments would be rejected upstream, and an all-but-zero-duration
    profile yields the identity.
    """
    durations = profile.durations
    phases = profile.phases
    u1 = _chain(_segment_matrices(phases, durations, 1.0))[0]
    u2 = _chain(_segment_matrices(phases, durations, SQRT2))[0]
    return RestrictedUnitary(u1=u1, u2=u2, full9=assemble_full9(u1, u2))


def assemble_full9(u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """9x9 unitary: trivial |00>, |rr>; u1 on both single-excitation
    sectors; u2 on {|11>, |W+>} with |W-> stationary."""
    full = np.eye(9, dtype=complex)
    for g, e in ((_I01, _I0R), (3, 6)):  # {|01>,|0r>} and symmetric {|10>,|r0>}
        full[g, g] = u1[0, 0]
        full[g, e] = u1[0, 1]
        full[e, g] = u1[1, 0]
        full[e, e] = u1[1, 1]
    # basis change |W+-> = (|1r> +- |r1>)/sqrt(2) in the {|11>,|1r>,|r1>} block
    c = np.array([[1, 0, 0],
                  [0, 1 / SQRT2, 1 / SQRT2],
                  [0, 1 / SQRT2, -1 / SQRT2]], dtype=complex)
    block = c @ np.block([[u2, np.zeros((2, 1))],
                          [np.zeros((1, 2)), np.eye(1)]]) @ c.conj().T
    idx = np.ix_((_I11, _I1R, _IR1), (_I11, _I1R, _IR1))
    full[idx] = block
    return full


def verify_cz_algebra(u: RestrictedUnitary) -> tuple[float, float]:
    """Extract theta from the |01> phase and report the worst deviation over
    the six sector relations (phases on |01>, |0r>, |11>, |W+>, invariance
    of |W->, and the hopping amplitudes i*sin(theta), -cos(theta))."""
    a = u.u1[0, 0]
    theta = float(np.angle(a))
    t1 = np.exp(1j * theta)
    t2 = np.exp(2j * theta)
    w_minus = np.zeros(9, dtype=complex)
    w_minus[_I1R] = 1 / SQRT2
    w_minus[_IR1] = -1 / SQRT2
    ket_1r = np.zeros(9, dtype=complex)
    ket_1r[_I1R] = 1.0
    out_1r = u.full9 @ ket_1r
    deviations = (
        abs(a - t1),
        abs(u.u1[1, 1] - np.conj(t1)),
        abs(u.u2[0, 0] + t2),
        abs(u.u2[1, 1] + np.conj(t2)),
        abs(w_minus.conj() @ (u.full9 @ w_minus) - 1.0),
        abs(out_1r[_I1R] - 1j * math.sin(theta) * np.conj(t1)),
        abs(out_1r[_IR1] + math.cos(theta) * np.conj(t1)),
    )
    return theta, float(max(deviations))


def analytic_cz(theta: float) -> RestrictedUnitary:
    """Ideal CZ followed by Rz(theta) on each atom, as sector unitaries."""
    t1 = np.exp(1j * theta)
    t2 = np.exp(2j * theta)
    u1 = np.diag([t1, np.conj(t1)])
    u2 = np.diag([-t2, -np.conj(t2)])
    return RestrictedUnitary(u1=u1, u2=u2, full9=assemble_full9(u1, u2))


# ---------------------------------------------------------------------------
# File format: CSV of segment boundaries plus a JSON sidecar

def write_pulse(profile: PulseProfile, path, residual: float | None = None) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "phase_rad"])
        t = 0.0
        for dur, phase in profile.segments:
            writer.writerow([repr(t), repr(phase)])
            t += dur
        writer.writerow([repr(profile.total_time), repr(profile.segments[-1][1])])
    if residual is None:
        _, residual = verify_cz_algebra(propagate_restricted(profile))
    sidecar = {
        "omega_max_units": "1.0",
        "total_time": profile.total_time,
        "theta": profile.theta,
        "residual": residual,
    }
    with open(path.with_suffix(path.suffix + ".json"), "w") as fh:
        json.dump(sidecar, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_pulse(path) -> PulseProfile:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["t", "phase_rad"]:
        raise ValidationError(f"{path}: expected header 't,phase_rad'")
    boundaries = [(float(t), float(p)) for t, p in rows[1:]]
    if len(boundaries) < 2:
        raise ValidationError(f"{path}: needs at least two boundary rows")
    segments = []
    for (t0, p0), (t1, _) in zip(boundaries[:-1], boundaries[1:]):
        segments.append((t1 - t0, p0))
    with open(path.with_suffix(path.suffix + ".json")) as fh:
        sidecar = json.load(fh)
    return PulseProfile(segments=tuple(segments),
                        total_time=boundaries[-1][0],
                        theta=float(sidecar["theta"]))


def default_pulse() -> PulseProfile:
    """The shipped time-optimal pulse (synthesized once, pinned as data)."""
    root = importlib.resources.files("rydqec").joinpath("data")
    with importlib.resources.as_file(root.joinpath("default_pulse.csv")) as p:
        return read_pulse(p)
