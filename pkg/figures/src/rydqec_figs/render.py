"""Deterministic figure rendering from the pipeline's CSV files.

Four figure families are supported, keyed by the ``kind`` field of a
figure spec:

  pl_curves        logical error probability vs decay rate (log-log),
                   one series per (d, schedule, p_depl), shaded dark to
                   light with decreasing depletion success
  hook_counts      bar chart of hook-string counts per schedule
  hook_amplitudes  hook-string probabilities at the reference decay rate
  nu_summary       fitted scaling exponent vs depletion probability

Rendering never recomputes physics: the same CSV bytes produce the same
SVG and PNG bytes (fixed style, hashed ids, no timestamps).
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

SCHEMAS = {
    "results": ["d", "gamma", "schedule", "p_depl", "n_shots", "p_L",
                "ci_lo", "ci_hi", "seed"],
    "census": ["schedule", "basis", "pauli", "n", "A", "B", "lambda_at_ref"],
    "counts": ["schedule", "basis", "hook_count"],
    "nu": ["d", "schedule", "nu", "stderr", "gamma_min", "gamma_max"],
}

KIND_SCHEMA = {
    "pl_curves": "results",
    "hook_counts": "counts",
    "hook_amplitudes": "census",
    "nu_summary": "nu",
}

_STYLE = {
    "figure.figsize": (6.0, 4.2),
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "font.size": 9,
    "svg.hashsalt": "rydqec-figs",
    "axes.grid": True,
    "grid.alpha": 0.25,
}


class SchemaError(ValueError):
    """A CSV did not match the published schema."""


def read_rows(path, schema_name: str) -> list:
    expected = SCHEMAS[schema_name]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if header != expected:
            missing = [c for c in expected if c not in header]
            extra = [c for c in header if c not in expected]
            raise SchemaError(
                f"{path}: unknown schema version; missing columns {missing}, "
                f"unexpected columns {extra}")
        return [dict(zip(expected, row)) for row in reader]


def _schedule_key(row) -> tuple:
    return (row["schedule"], float(row["p_depl"]))


def _series_label(schedule: str, p_depl: float) -> str:
    if schedule == "after_every_gate_both":
        return f"every gate, p={100 * p_depl:.0f}%"
    return schedule.replace("_", " ")


def _shade(i: int, n: int):
    # dark (first series) to light, matching the depletion-success ordering
    level = 0.15 + 0.65 * (i / max(n - 1, 1))
    return (level, level * 0.6, 1.0 - 0.5 * level)


def render_pl_curves(rows, ax) -> None:
    groups = {}
    for row in rows:
        key = (int(row["d"]),) + _schedule_key(row)
        groups.setdefault(key, []).append(row)
    order = sorted(groups, key=lambda k: (k[0], -k[2], k[1]))
    for i, key in enumerate(order):
        data = sorted(groups[key], key=lambda r: float(r["gamma"]))
        g = np.array([float(r["gamma"]) for r in data])
        p = np.array([float(r["p_L"]) for r in data])
        lo = np.array([float(r["ci_lo"]) for r in data])
        hi = np.array([float(r["ci_hi"]) for r in data])
        mask = p > 0
        d, schedule, p_depl = key
        ax.errorbar(g[mask], p[mask],
                    yerr=[(p - lo)[mask], (hi - p)[mask]],
                    marker="o", ms=3, lw=1.2, capsize=2,
                    color=_shade(i, len(order)),
                    label=f"d={d}, {_series_label(schedule, p_depl)}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(r"decay rate $\gamma/\Omega_\mathrm{max}$")
    ax.set_ylabel("logical error probability")
    ax.legend(fontsize=7, loc="lower right")


def render_hook_counts(rows, ax) -> None:
    per_sched = {}
    for row in rows:
        per_sched.setdefault(row["schedule"], 0)
        per_sched[row["schedule"]] += int(row["hook_count"])
    labels = sorted(per_sched)
    counts = [per_sched[lab] for lab in labels]
    ax.bar(range(len(labels)), counts,
           color=[_shade(i, len(labels)) for i in range(len(labels))])
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels([lab.replace("_", "\n") for lab in labels], fontsize=6)
    ax.set_ylabel("hook error strings")


def render_hook_amplitudes(rows, ax) -> None:
    groups = {}
    for row in rows:
        groups.setdefault(row["schedule"], []).append(
            float(row["lambda_at_ref"]))
    labels = sorted(groups)
    for i, lab in enumerate(labels):
        amps = sorted(groups[lab], reverse=True)
        ax.scatter([i] * len(amps), amps, s=14,
                   color=_shade(i, len(labels)))
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels([lab.replace("_", "\n") for lab in labels], fontsize=6)
    ax.set_yscale("log")
    ax.set_ylabel(r"hook probability at $\gamma = 5\times 10^{-5}$")


def render_nu_summary(rows, ax) -> None:
    xs, ys, errs, labels = [], [], [], []
    for row in sorted(rows, key=lambda r: r["schedule"]):
        schedule = row["schedule"]
        if schedule.startswith("after_every_gate_both"):
            p = float(schedule.split("p=")[1].rstrip(")"))
            xs.append(p)
            ys.append(float(row["nu"]))
            errs.append(float(row["stderr"]))
        else:
            labels.append((schedule, float(row["nu"]), float(row["stderr"])))
    if xs:
        order = np.argsort(xs)
        xs = np.array(xs)[order]
        ys = np.array(ys)[order]
        errs = np.array(errs)[order]
        ax.errorbar(xs, ys, yerr=errs, marker="s", lw=1.2, capsize=3,
                    color=_shade(0, 3), label="ionization after every gate")
    for i, (schedule, nu, err) in enumerate(labels):
        ax.errorbar([1.0 + 0.08 * (i + 1)], [nu], yerr=[err], marker="d",
                    capsize=3, color=_shade(i + 1, len(labels) + 2),
                    label=schedule.replace("_", " "))
    ax.set_xlabel(r"depletion success probability $p_\mathrm{depl}$")
    ax.set_ylabel(r"scaling exponent $\nu$")
    ax.axhline(2.0, color="0.6", lw=0.8, ls="--")
    ax.axhline(1.0, color="0.6", lw=0.8, ls=":")
    ax.legend(fontsize=6, loc="lower right")


RENDERERS = {
    "pl_curves": render_pl_curves,
    "hook_counts": render_hook_counts,
    "hook_amplitudes": render_hook_amplitudes,
    "nu_summary": render_nu_summary,
}


def render(spec: dict) -> list:
    """Render one figure spec; returns the written file paths."""
    kind = spec.get("kind")
    if kind not in RENDERERS:
        raise SchemaError(f"unknown figure kind {kind!r}")
    rows = read_rows(spec["input"], KIND_SCHEMA[kind])
    written = []
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        RENDERERS[kind](rows, ax)
        if "title" in spec:
            ax.set_title(spec["title"], fontsize=9)
        fig.tight_layout()
        stem = Path(spec["output"])
        stem.parent.mkdir(parents=True, exist_ok=True)
        for ext, meta in (("svg", {"Date": None}), ("png", {})):
            path = stem.with_suffix(f".{ext}")
            fig.savefig(path, metadata=meta)
            written.append(path)
        plt.close(fig)
    return written
