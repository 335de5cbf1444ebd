"""CLI surface and pipeline orchestration."""

import json

import numpy as np

from rydqec.cli import main
from rydqec.experiments import cell_seed, channel_cache_key, get_channel
from rydqec.dynamics import IonizationSchedule
from rydqec.pulse import default_pulse


def _tiny_mc_config(tmp_path, **kw):
    cfg = {
        "outdir": str(tmp_path / "run"),
        "distances": [3],
        "mc_gammas": [1e-3, 3e-3],
        "channel_gammas": [1e-5, 3e-5, 1e-4, 3e-4, 1e-3],
        "shots_cap": 65536,
        "deep_shots_cap": 65536,
        "target_rel_ci": 0.5,
        "seed": 7,
        "workers": 1,
    }
    cfg.update(kw)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_pulse_synth_and_verify_round_trip(tmp_path, capsys):
    out = tmp_path / "pulse.csv"
    assert main(["pulse", "synth", "--segments", "8", "--tol", "1e-2",
                 "--out", str(out)]) == 0
    assert out.exists()
    assert main(["pulse", "verify", str(out)]) == 0
    text = capsys.readouterr().out
    assert "residual" in text


def test_config_validation_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"outdir": 1}))
    assert main(["run", "fig2", "--config", str(bad)]) == 2
    missing = tmp_path / "missing.json"
    missing.write_text(json.dumps({"distances": [3]}))
    assert main(["run", "fig2", "--config", str(missing)]) == 2


def test_large_distances_need_flag(tmp_path):
    cfg = _tiny_mc_config(tmp_path, distances=[7])
    assert main(["run", "fig1c", "--config", str(cfg)]) == 2


def test_channel_build_subcommand(tmp_path):
    out = tmp_path / "stages.npz"
    assert main(["channel", "build", "--gamma", "1e-4", "--schedule",
                 "ancilla_twice", "--dt", "1e-3", "--out", str(out)]) == 0
    payload = np.load(out)
    meta = json.loads(str(payload["meta"]))
    assert meta["schedule"] == "ancilla_twice"
    assert payload["superops"].shape == (4, 81, 81)


def test_twirl_subcommand_writes_channel(tmp_path):
    out = tmp_path / "chan.json"
    assert main(["twirl", "--gamma", "1e-4", "--schedule", "none",
                 "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["gamma"] == 1e-4
    assert abs(sum(payload["probs"].values()) - 1.0) < 1e-9


def test_sample_subcommand(tmp_path):
    out = tmp_path / "res.csv"
    assert main(["sample", "--d", "3", "--gamma", "1e-3", "--schedule",
                 "after_every_gate_both", "--p-depl", "1.0", "--shots",
                 "20000", "--seed", "5", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "d,gamma,schedule,p_depl,n_shots,p_L,ci_lo,ci_hi,seed"
    assert len(lines) == 2


def test_run_fig1c_structure_and_determinism(tmp_path):
    cfg_path = _tiny_mc_config(tmp_path)
    assert main(["run", "fig1c", "--config", str(cfg_path)]) == 0
    outdir = tmp_path / "run"
    results = (outdir / "fig1c_results.csv").read_bytes()
    lines = results.decode().splitlines()
    # 5 ionization settings x 2 gamma points + header
    assert len(lines) == 1 + 5 * 2
    assert (outdir / "config.resolved.json").exists()
    # byte-identical on re-run
    assert main(["run", "fig1c", "--config", str(cfg_path)]) == 0
    assert (outdir / "fig1c_results.csv").read_bytes() == results
    # and independent of the worker count
    cfg2 = _tiny_mc_config(tmp_path, workers=2)
    outdir2 = tmp_path / "run"
    assert main(["run", "fig1c", "--config", str(cfg2)]) == 0
    assert (outdir / "fig1c_results.csv").read_bytes() == results


def test_verify_subcommand_detects_tampering(tmp_path):
    cfg_path = _tiny_mc_config(tmp_path)
    assert main(["run", "fig1c", "--config", str(cfg_path)]) == 0
    assert main(["verify", "fig1c", "--config", str(cfg_path)]) == 0
    target = tmp_path / "run" / "fig1c_results.csv"
    target.write_bytes(target.read_bytes() + b"tampered\n")
    assert main(["verify", "fig1c", "--config", str(cfg_path)]) == 3


def test_channel_cache_keyed_by_dt_and_pulse(tmp_path):
    profile = default_pulse()
    sched = IonizationSchedule("none")
    a = channel_cache_key(profile.pulse_id(), 1e-4, 1e-3, sched)
    b = channel_cache_key(profile.pulse_id(), 1e-4, 5e-4, sched)
    c = channel_cache_key("otherpulse", 1e-4, 1e-3, sched)
    assert len({a, b, c}) == 3
    cache = tmp_path / "cache"
    ch1 = get_channel(profile, 1e-4, 1e-3, sched, cache)
    files_before = sorted(cache.iterdir())
    ch2 = get_channel(profile, 1e-4, 1e-3, sched, cache)
    assert sorted(cache.iterdir()) == files_before
    assert np.array_equal(ch1.probs, ch2.probs)
    get_channel(profile, 1e-4, 5e-4, sched, cache)
    assert len(list(cache.iterdir())) == len(files_before) + 1


def test_cell_seed_is_stable():
    s1 = cell_seed(2024, 3, "none", 1e-3)
    s2 = cell_seed(2024, 3, "none", 1e-3)
    s3 = cell_seed(2024, 3, "none", 2e-3)
    assert s1 == s2 != s3
    assert 0 <= s1 < 2**63


def test_run_fig2_census_outputs(tmp_path):
    cfg_path = _tiny_mc_config(tmp_path)
    assert main(["run", "fig2", "--config", str(cfg_path)]) == 0
    outdir = tmp_path / "run"
    counts = (outdir / "fig2_counts.csv").read_text().splitlines()
    assert counts[0] == "schedule,basis,hook_count"
    # ten schedule settings (five depletion levels plus five selected
    # locations), two bases each
    assert len(counts) == 1 + 20
    census_lines = (outdir / "fig2_census.csv").read_text().splitlines()
    assert census_lines[0] == "schedule,basis,pauli,n,A,B,lambda_at_ref"
    # the two perfect-every-gate schedules stay hook free
    assert not any(line.startswith("after_every_gate_both(p=1.00)")
                   or line.startswith("ancilla_only_every_gate")
                   for line in census_lines[1:])
