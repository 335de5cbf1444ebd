"""Fits and classification over extracted channels and Monte Carlo results.

Channel probabilities are fitted to A gamma^n + B gamma^(n+1), where n
counts the decay events behind an error string; strings with n = 1 whose
data-qubit support contains a logical-aligned pair are the hook errors that
break fault tolerance.  Logical error probabilities are fitted to
p_L ~ gamma^nu on a low-gamma window.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import pauli
from .code import READOUT_CORNERS
from .errors import ValidationError

LAMBDA_FLOOR = 1e-14
REFERENCE_GAMMA = 5e-5  # report hook amplitudes at this decay rate


@dataclass(frozen=True)
class PowerLawFit:
    n: int
    a: float
    b: float
    residual_rms: float
    gamma_window: tuple


@dataclass(frozen=True)
class HookRecord:
    pauli: pauli.PauliString
    basis: str
    fit: PowerLawFit
    amplitude_at_ref: float

    def __post_init__(self):
        if self.fit.n != 1:
            raise ValidationError("hook records must come from n=1 fits")
        if not hook_predicate(self.pauli.label, self.basis):
            raise ValidationError("string does not satisfy the hook predicate")


@dataclass(frozen=True)
class NuFit:
    nu: float
    stderr: float
    window: tuple
    d: int
    schedule: str
    n_points: int


def fit_order(gammas, lambdas) -> PowerLawFit:
    """Fit lambda(gamma) = A gamma^n + B gamma^(n+1).

    The integer n comes from rounding the log-log slope at the two smallest
    usable gamma points; A and B follow by linear least squares.  Points at
    the numerical floor are excluded; fewer than three usable points refuse
    the fit.
    """
    g = np.asarray(gammas, dtype=float)
    lam = np.asarray(lambdas, dtype=float)
    if g.shape != lam.shape or g.ndim != 1:
        raise ValidationError("gamma and lambda series must be 1-d and aligned")
    order = np.argsort(g)
    g, lam = g[order], lam[order]
    usable = lam >= LAMBDA_FLOOR
    g, lam = g[usable], lam[usable]
    if len(g) < 3:
        raise ValidationError("fewer than 3 usable points; fit refused")
    slope = (math.log(lam[1]) - math.log(lam[0])) / (math.log(g[1]) - math.log(g[0]))
    n = max(1, round(slope))
    design = np.stack([g**n, g ** (n + 1)], axis=1)
    coef, *_ = np.linalg.lstsq(design, lam, rcond=None)
    resid = lam - design @ coef
    return PowerLawFit(n=n, a=float(coef[0]), b=float(coef[1]),
                       residual_rms=float(np.sqrt(np.mean(resid**2))),
                       gamma_window=(float(g[0]), float(g[-1])))


def hook_predicate(label: str, basis: str) -> bool:
    """True iff the data sub-string carries a logical-aligned error pair.

    basis "X" (X-stabilizer channel): two or more data qubits with Z or Y
    whose readout corners share a column (aligned with the vertical Z_L);
    basis "Z": two or more with X or Y sharing a row (horizontal X_L).
    """
    if basis not in ("X", "Z"):
        raise ValidationError("basis must be 'X' or 'Z'")
    corners = READOUT_CORNERS[basis]
    if basis == "X":
        species = ("Z", "Y")
        axis = 0   # common vertical line: same x offset
    else:
        species = ("X", "Y")
        axis = 1   # common horizontal line: same y offset
    hits = [corners[pos - 1][axis]
            for pos in range(1, 5) if label[pos] in species]
    return len(hits) != len(set(hits))


def census(channels: dict, gamma_grid, reference: dict | None = None) -> list:
    """Hook census over a family of channels.

    ``channels`` maps (schedule label, basis) -> {gamma: PauliChannel};
    ``reference`` optionally maps the same keys to the channel at the
    reference decay rate (otherwise the fit is evaluated there).  Returns
    HookRecord lists keyed by (schedule label, basis).
    """
    grid = np.asarray(sorted(gamma_grid), dtype=float)
    out = {}
    for (label, basis), series in channels.items():
        if sorted(series.keys()) != sorted(grid.tolist()):
            raise ValidationError(
                f"channel series for {label!r}/{basis} does not match the grid")
        probs = np.stack([series[g].probs for g in grid], axis=1)
        records = []
        for idx in range(1, pauli.N_STRINGS):
            lam = probs[idx]
            if np.max(lam) < LAMBDA_FLOOR:
                continue
            plabel = pauli.index_to_label(idx)
            if not hook_predicate(plabel, basis):
                continue
            try:
                fit = fit_order(grid, lam)
            except ValidationError:
                continue
            if fit.n != 1:
                continue
            if reference is not None and (label, basis) in reference:
                amp = float(reference[(label, basis)].probs[idx])
            else:
                amp = fit.a * REFERENCE_GAMMA + fit.b * REFERENCE_GAMMA**2
            records.append(HookRecord(pauli=pauli.PauliString(plabel),
                                      basis=basis, fit=fit,
                                      amplitude_at_ref=amp))
        out[(label, basis)] = records
    return out


def fit_nu(points, d: int, schedule: str, max_rel_ci: float = 0.2,
           crossing_cap: float = 0.1, max_points: int = 5) -> NuFit:
    """Weighted least squares of log p_L against log gamma.

    ``points`` maps gamma -> (p_L, (ci_lo, ci_hi)).  The window keeps the
    lowest-gamma run of points whose relative confidence half-width stays
    below ``max_rel_ci`` and whose p_L sits below the crossing region.
    """
    usable = []
    for g in sorted(points):
        p_l, (lo, hi) = points[g]
        if p_l <= 0.0 or p_l > crossing_cap:
            continue
        half = (hi - lo) / 2.0
        if half > max_rel_ci * p_l:
            continue
        usable.append((g, p_l, half))
    if len(usable) < 3:
        raise ValidationError(
            f"no valid fit window for d={d} {schedule}: "
            f"{len(usable)} usable points")
    usable = usable[:max_points]
    g = np.array([u[0] for u in usable])
    p = np.array([u[1] for u in usable])
    sigma_log = np.array([u[2] / u[1] for u in usable])
    x = np.log(g)
    y = np.log(p)
    w = 1.0 / sigma_log**2
    design = np.stack([np.ones_like(x), x], axis=1)
    wd = design * w[:, None]
    cov = np.linalg.inv(design.T @ wd)
    beta = cov @ (wd.T @ y)
    return NuFit(nu=float(beta[1]), stderr=float(np.sqrt(cov[1, 1])),
                 window=(float(g[0]), float(g[-1])), d=d, schedule=schedule,
                 n_points=len(usable))


# ---------------------------------------------------------------------------
# Report files

def write_census_csv(path, census_records: dict) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["schedule", "basis", "pauli", "n", "A", "B",
                         "lambda_at_ref"])
        for (label, basis) in sorted(census_records):
            for rec in sorted(census_records[(label, basis)],
                              key=lambda r: r.pauli.label):
                writer.writerow([label, basis, rec.pauli.label, rec.fit.n,
                                 repr(rec.fit.a), repr(rec.fit.b),
                                 repr(rec.amplitude_at_ref)])


def write_nu_csv(path, fits: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["d", "schedule", "nu", "stderr", "gamma_min",
                         "gamma_max"])
        for fit in fits:
            writer.writerow([fit.d, fit.schedule, repr(fit.nu),
                             repr(fit.stderr), repr(fit.window[0]),
                             repr(fit.window[1])])
