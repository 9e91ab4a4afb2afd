import json
import logging
import math
from pathlib import Path

import numpy as np
import pytest

from rasster import cli
from rasster import experiments as ex
from rasster.errors import ConfigError
from rasster.waveform import PlanKind, interference_pulse_set

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL = """
schemes: [rsf, rasster]
grid: {M: 16}
P: 8
Q: 8
pulses: [16]
interference: {M1: 5, M2: 8}
snr_db: [-5, 10]
sir_db: [100, 10]
scene: {K: 2, layout: single_bin}
trials: 6
seed: 11
"""


def small(**kw):
    return ex.load_config(text=SMALL, **kw)


# ---- configuration

def test_load_shipped_configs():
    for path in CONFIGS.glob("*.yaml"):
        ex.load_config(path)


def test_unknown_key_names_field():
    with pytest.raises(ConfigError, match="scene.colour"):
        ex.load_config(text="scene: {K: 2, colour: red}")


@pytest.mark.parametrize("text,field", [
    ("interference: {M1: 20, M2: 10}", "interference"),
    ("grid: {M: 8}\ninterference: {M1: 2, M2: 9}", "interference"),
    ("pulses: [0]", "pulses"),
    ("trials: 0", "trials"),
    ("grid: {delta_f: 5.0e+6}", "grid"),
    ("rasster: {subbands: [[5, 2]]}", "rasster.subbands"),
    ("schemes: []", "schemes"),
])
def test_inconsistent_config(text, field):
    with pytest.raises(ConfigError, match=field):
        ex.load_config(text=text)


def test_seed_override():
    assert small(seed=99).seed == 99
    assert small(seed=None).seed == 11


def test_non_mapping_config():
    with pytest.raises(ConfigError):
        ex.load_config(text="- 1\n- 2\n")


# ---- seeding and plans

def test_streams_are_distinct_and_stable():
    a = np.random.default_rng(ex.stream(1, "scene", 32, 0)).random()
    assert a == np.random.default_rng(ex.stream(1, "scene", 32, 0)).random()
    assert a != np.random.default_rng(ex.stream(1, "scene", 32, 1)).random()
    assert a != np.random.default_rng(ex.stream(1, "rsf/plan", 32, 0)).random()


def test_make_plan_routes_schemes():
    cfg = small()
    assert ex.make_plan(cfg, "sfw", 16, 0).kind is PlanKind.LINEAR
    assert ex.make_plan(cfg, "rsf", 16, 0).kind is PlanKind.RANDOM_FULL
    r = ex.make_plan(cfg, "rasster", 12, 0)
    assert r.kind is PlanKind.SPARSE_RANDOM and interference_pulse_set(r, 5, 8).size == 0
    assert ex.make_plan(cfg, "rasster", 20, 0).reuse  # more pulses than the 12 allowed carriers


def test_explicit_subbands():
    cfg = ex.load_config(text="grid: {M: 16}\nrasster: {subbands: [[0, 3], [10, 15]]}")
    plan = ex.make_plan(cfg, "rasster", 8, 0)
    assert set(plan.d.tolist()) <= set(range(4)) | set(range(10, 16))


# ---- sweep

def test_noiseless_sweep_hits_everything():
    cfg = ex.load_config(text="""
schemes: [rasster]
grid: {M: 32}
P: 8
Q: 8
pulses: [32]
snr_db: [.inf]
scene: {K: 2}
trials: 20
""")
    rows = ex.run_hit_rate_sweep(cfg)
    assert len(rows) == 1 and rows[0].mean == 1.0 and rows[0].stderr == 0.0


def test_sweep_rows_and_csv_schema():
    rows = ex.run_hit_rate_sweep(small())
    assert len(rows) == 2 * 2 * 2
    text = ex.sweep_to_csv(rows)
    assert text.splitlines()[0] == "scheme,N,snr_db,sir_db,trials,mean,stderr"
    for r in rows:
        assert 0 <= r.mean <= 1 and r.trials == 6


def test_trial_order_and_threads_do_not_matter():
    cfg = small()
    base = ex.sweep_to_csv(ex.run_hit_rate_sweep(cfg))
    rev = ex.sweep_to_csv(ex.run_hit_rate_sweep(cfg, trial_ids=list(reversed(range(cfg.trials)))))
    par = ex.sweep_to_csv(ex.run_hit_rate_sweep(cfg, threads=2))
    assert base == rev == par


def test_adding_a_scheme_leaves_others_unchanged():
    only = ex.run_hit_rate_sweep(small(schemes=["rasster"]))
    both = ex.run_hit_rate_sweep(small())
    assert [r for r in both if r.scheme == "rasster"] == only


def test_infeasible_scheme_skipped(caplog):
    cfg = small(pulses=[8], rsf_partial=False)
    with caplog.at_level(logging.WARNING):
        rows = ex.run_hit_rate_sweep(cfg)
    assert {r.scheme for r in rows} == {"rasster"}
    assert "skipping scheme=rsf N=8" in caplog.text


def test_partial_rsf_runs_below_M():
    rows = ex.run_hit_rate_sweep(small(pulses=[8], rsf_partial=True))
    assert {r.scheme for r in rows} == {"rsf", "rasster"}


# ---- detection map

def test_detection_map_labels():
    cfg = small(snr_db=[math.inf], sir_db=[None], scene={"K": 3, "layout": "clustered"})
    rows, summary = ex.run_detection_map(cfg)
    assert ex.detections_to_csv(rows).splitlines()[0] == "scheme,kind,bin,p,q"
    for s in ("rsf", "rasster"):
        kinds = [r.kind for r in rows if r.scheme == s]
        assert kinds.count("truth") == 3
        e = summary["schemes"][s]
        assert e["hits"] + e["false_alarms"] == kinds.count("hit") + kinds.count("fa")
        assert e["hit_rate"] == 1.0
    json.dumps(summary, allow_nan=False)


def test_detection_map_empty_scene():
    rows, summary = ex.run_detection_map(small(snr_db=[0], sir_db=[None], scene={"K": 0}))
    assert summary["K"] == 0
    for s in ("rsf", "rasster"):
        assert summary["schemes"][s]["all_false_alarm"] is True
    assert all(r.kind == "fa" for r in rows)


def test_detection_map_needs_single_point():
    with pytest.raises(ConfigError):
        ex.run_detection_map(small())


def test_detection_map_deterministic():
    cfg = small(snr_db=[0], sir_db=[10])
    a = ex.detections_to_csv(ex.run_detection_map(cfg)[0])
    b = ex.detections_to_csv(ex.run_detection_map(cfg)[0])
    assert a == b


# ---- diagnostics

def test_diagnostics_small():
    rows = ex.run_diagnostics(ex.load_config(CONFIGS / "diagnostics_small.yaml"))
    assert len(rows) == 5
    assert all(r.spark_failures == 0 and 0 < r.mu <= 1 for r in rows)
    text = ex.diagnostics_to_csv(rows)
    assert text.splitlines()[0] == "seed,N,P,Q,mu,K1,K2,spark_failures"


def test_diagnostics_bounds_only():
    cfg = ex.load_config(CONFIGS / "diagnostics_small.yaml").model_copy(
        update={"diagnostics": ex.DiagnosticsConfig(bounds_only=True, seeds=2)})
    rows = ex.run_diagnostics(cfg)
    assert all(r.mu is None and r.spark_failures is None and r.K2 == 50 for r in rows)


# ---- command line

def test_cli_sweep_and_map(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(SMALL.replace("trials: 6", "trials: 2"))
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "s")]) == 0
    assert (tmp_path / "s" / "hit_rates.csv").exists()
    one = tmp_path / "one.yaml"
    one.write_text(SMALL.replace("snr_db: [-5, 10]", "snr_db: [0]").replace("sir_db: [100, 10]", "sir_db: [10]"))
    assert cli.main(["map", "--config", str(one), "--out", str(tmp_path / "m")]) == 0
    assert json.loads((tmp_path / "m" / "summary.json").read_text())["K"] == 2
    assert cli.main(["plan", "--config", str(cfg), "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "p" / "plan_rasster_N16.json").exists()
    assert cli.main(["diagnose", "--config", str(CONFIGS / "diagnostics_small.yaml"),
                     "--out", str(tmp_path / "d")]) == 0


def test_cli_rejects_bad_input(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("scene: {K: 2, colour: red}\n")
    assert cli.main(["sweep", "--config", str(bad), "--out", str(tmp_path)]) != 0
    assert "scene.colour" in capsys.readouterr().err
    assert cli.main(["sweep", "--config", str(tmp_path / "missing.yaml")]) != 0
    assert cli.main(["sweep", "--threads", "0", "--out", str(tmp_path)]) != 0


def test_cli_sweep_byte_identical(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(SMALL.replace("trials: 6", "trials: 3"))
    for k in ("a", "b"):
        assert cli.main(["sweep", "--config", str(cfg), "--seed", "5", "--out", str(tmp_path / k)]) == 0
    assert (tmp_path / "a" / "hit_rates.csv").read_bytes() == (tmp_path / "b" / "hit_rates.csv").read_bytes()
