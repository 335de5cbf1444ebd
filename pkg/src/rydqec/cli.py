"""Command-line interface.

Exit codes: 0 success, 2 rejected input, 3 integrity failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .analysis import fit_nu, fit_order, write_nu_csv
from .dynamics import (IonizationSchedule, NoiseParams, SCHEDULE_KINDS,
                       compose_plaquette)
from .errors import IntegrityError, ValidationError
from .experiments import (ExperimentConfig, mc_point, run_figure1c,
                          run_figure2, run_figureS3, verify_run,
                          write_results_csv)
from .pulse import (GateModel, default_pulse, propagate_restricted, read_pulse,
                    synthesize_pulse, verify_cz_algebra, write_pulse)
from .twirl import PauliChannel, error_channel, ptm_diagonal, twirl


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rydqec",
        description="Loss-biased surface-code error correction pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    pulse = sub.add_parser("pulse", help="synthesize or verify CZ pulses")
    pulse_sub = pulse.add_subparsers(dest="pulse_command", required=True)
    synth = pulse_sub.add_parser("synth")
    synth.add_argument("--segments", type=int, default=64)
    synth.add_argument("--tol", type=float, default=1e-8)
    synth.add_argument("--out", required=True)
    verify_p = pulse_sub.add_parser("verify")
    verify_p.add_argument("file")

    chan = sub.add_parser("channel", help="build a plaquette channel")
    chan_sub = chan.add_subparsers(dest="channel_command", required=True)
    build = chan_sub.add_parser("build")
    build.add_argument("--gamma", type=float, required=True)
    build.add_argument("--schedule", choices=SCHEDULE_KINDS, required=True)
    build.add_argument("--p-depl", type=float, default=1.0)
    build.add_argument("--dt", type=float, default=1e-3)
    build.add_argument("--pulse", default=None)
    build.add_argument("--out", required=True)

    tw = sub.add_parser("twirl", help="twirl a built channel to Pauli form")
    tw.add_argument("--gamma", type=float, required=True)
    tw.add_argument("--schedule", choices=SCHEDULE_KINDS, required=True)
    tw.add_argument("--p-depl", type=float, default=1.0)
    tw.add_argument("--dt", type=float, default=1e-3)
    tw.add_argument("--pulse", default=None)
    tw.add_argument("--out", required=True)

    an = sub.add_parser("analyze", help="fits and censuses over channel files")
    an_sub = an.add_subparsers(dest="analyze_command", required=True)
    fo = an_sub.add_parser("fit-order")
    fo.add_argument("--channels", nargs="+", required=True,
                    help="channel JSON files over a gamma grid")
    fo.add_argument("--pauli", required=True)
    fn = an_sub.add_parser("fit-nu")
    fn.add_argument("--results", required=True, help="results CSV")
    fn.add_argument("--out", required=True)
    cen = an_sub.add_parser("census")
    cen.add_argument("--config", required=True)

    samp = sub.add_parser("sample", help="Monte Carlo one (d, gamma, schedule)")
    samp.add_argument("--d", type=int, required=True)
    samp.add_argument("--gamma", type=float, required=True)
    samp.add_argument("--schedule", choices=SCHEDULE_KINDS, required=True)
    samp.add_argument("--p-depl", type=float, default=1.0)
    samp.add_argument("--shots", type=int, default=1_000_000)
    samp.add_argument("--seed", type=int, default=2024)
    samp.add_argument("--out", required=True)

    run = sub.add_parser("run", help="full figure pipelines from a config")
    run.add_argument("figure", choices=["fig1c", "fig2", "figS3"])
    run.add_argument("--config", required=True)
    run.add_argument("--large", action="store_true",
                     help="allow distances beyond 5 (multi-hour budget)")

    ver = sub.add_parser("verify", help="recompute a run and diff its files")
    ver.add_argument("figure", choices=["fig1c", "fig2", "figS3"])
    ver.add_argument("--config", required=True)
    return parser


def _load_config(path: str) -> ExperimentConfig:
    return ExperimentConfig.from_json(path)


def _profile_from_arg(path: str | None):
    return read_pulse(path) if path else default_pulse()


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except IntegrityError as exc:
        print(f"integrity failure: {exc}", file=sys.stderr)
        return 3


def _dispatch(args) -> int:
    if args.command == "pulse":
        if args.pulse_command == "synth":
            profile = synthesize_pulse(GateModel(), args.segments, args.tol)
            theta, residual = verify_cz_algebra(propagate_restricted(profile))
            write_pulse(profile, args.out, residual=residual)
            print(f"T={profile.total_time!r} theta={theta!r} residual={residual:.3e}")
            return 0
        profile = read_pulse(args.file)
        theta, residual = verify_cz_algebra(propagate_restricted(profile))
        print(f"T={profile.total_time!r} theta={theta!r} residual={residual:.3e}")
        return 0

    if args.command == "channel":
        profile = _profile_from_arg(args.pulse)
        schedule = IonizationSchedule(args.schedule, args.p_depl)
        plaq = compose_plaquette(profile, NoiseParams(args.gamma, args.dt),
                                 schedule)
        np.savez_compressed(
            args.out,
            superops=np.stack([s.superop for s in plaq.stages
                               if len(s.active) == 2]),
            meta=json.dumps({"gamma": args.gamma, "dt": args.dt,
                             "schedule": schedule.kind,
                             "p_depl": schedule.p_depl,
                             "pulse_id": plaq.pulse_id}))
        print(f"wrote {args.out}")
        return 0

    if args.command == "twirl":
        profile = _profile_from_arg(args.pulse)
        schedule = IonizationSchedule(args.schedule, args.p_depl)
        plaq = compose_plaquette(profile, NoiseParams(args.gamma, args.dt),
                                 schedule)
        r = ptm_diagonal(error_channel(plaq, profile))
        channel = twirl(r, gamma=args.gamma, schedule=schedule)
        channel.save(args.out)
        print(f"wrote {args.out} (lambda_I={channel.prob('IIIII'):.9f})")
        return 0

    if args.command == "analyze":
        if args.analyze_command == "fit-order":
            chans = [PauliChannel.load(p) for p in args.channels]
            gammas = [c.gamma for c in chans]
            lams = [c.prob(args.pauli) for c in chans]
            fit = fit_order(gammas, lams)
            print(f"n={fit.n} A={fit.a!r} B={fit.b!r} rms={fit.residual_rms:.3e}")
            return 0
        if args.analyze_command == "fit-nu":
            points = {}
            import csv as _csv

            with open(args.results) as fh:
                rows = list(_csv.DictReader(fh))
            fits = []
            cells = {}
            for row in rows:
                key = (int(row["d"]), row["schedule"], float(row["p_depl"]))
                cells.setdefault(key, {})[float(row["gamma"])] = (
                    float(row["p_L"]), (float(row["ci_lo"]), float(row["ci_hi"])))
            for (d, kind, p_depl), points in sorted(cells.items()):
                label = IonizationSchedule(kind, p_depl).label()
                try:
                    fits.append(fit_nu(points, d, label))
                except ValidationError as exc:
                    print(f"skipping {d}/{label}: {exc}", file=sys.stderr)
            write_nu_csv(args.out, fits)
            print(f"wrote {args.out}")
            return 0
        config = _load_config(args.config)
        run_figure2(config)
        print(f"census written under {config.outdir}")
        return 0

    if args.command == "sample":
        config = ExperimentConfig(outdir=".", shots_cap=args.shots,
                                  deep_shots_cap=args.shots, seed=args.seed)
        profile = default_pulse()
        schedule = IonizationSchedule(args.schedule, args.p_depl)
        res = mc_point(profile, args.d, args.gamma, schedule, config)
        write_results_csv(args.out, [res])
        print(f"p_L={res.p_l!r} ({res.n_failures}/{res.n_shots})")
        return 0

    if args.command == "run":
        config = _load_config(args.config)
        if max(config.distances) > 5 and not args.large:
            raise ValidationError(
                "distances beyond 5 need --large (multi-hour budget)")
        runner = {"fig1c": run_figure1c, "fig2": run_figure2,
                  "figS3": run_figureS3}[args.figure]
        out = runner(config)
        for f in out["files"]:
            print(f"wrote {f}")
        return 0

    if args.command == "verify":
        config = _load_config(args.config)
        mismatches = verify_run(config, args.figure)
        if mismatches:
            raise IntegrityError(
                "non-reproducible artifacts: " + ", ".join(mismatches))
        print("all artifacts reproduce byte-identically")
        return 0

    raise ValidationError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
