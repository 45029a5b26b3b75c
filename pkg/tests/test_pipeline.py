import filecmp
import math

import pytest

from ppgtune.config import Config
from ppgtune.io import DatasetManifest, load_manifest, write_synth_dataset
from ppgtune.optimize import NsgaParams
from ppgtune.pipeline import condition_stats, run_pipeline
from ppgtune.synth import demo_cohort, synth_recording

REPORT_FILES = (
    "report.csv", "segments.csv", "fronts.csv", "distributions.csv", "stats.csv", "motion.csv",
    "summary_by_task.csv", "summary.json", "config_used.toml",
)


@pytest.fixture(scope="module")
def manifest(tmp_path_factory):
    root = tmp_path_factory.mktemp("cohort")
    recs = [synth_recording(c, p, t) for p, t, c in demo_cohort(n_participants=2, duration_s=70, seed=4)]
    return load_manifest(write_synth_dataset(root, recs))


def _cfg(**kw):
    return Config(nsga2=NsgaParams(pop_size=8, generations=3), **kw)


@pytest.fixture(scope="module")
def report(manifest):
    return run_pipeline(manifest, _cfg())


def test_empty_manifest():
    rep = run_pipeline(DatasetManifest(), Config())
    assert rep.rows == [] and rep.segments == []


def test_empty_manifest_writes_headers(tmp_path):
    run_pipeline([], Config()).write(tmp_path)
    assert (tmp_path / "report.csv").read_text().startswith("scope,participant,task,f_low,f_high")


def test_base_rows_use_fixed_cutoffs(report):
    base = report.rows_for("base")
    assert len(base) == 4
    assert all((r.f_low, r.f_high) == (0.5, 4.0) for r in base)


def test_scope_coverage(report, manifest):
    keys = {(e.participant_id, e.task_id) for e in manifest.entries}
    for scope in ("base", "global", "per_person_task"):
        rows = report.rows_for(scope)
        assert len(rows) == len(keys)
        assert {(r.participant, r.task) for r in rows} == keys
    assert len({(r.f_low, r.f_high) for r in report.rows_for("global")}) == 1


def test_slice_choice_no_worse_than_global(report):
    for r in report.rows_for("per_person_task"):
        assert r.score <= r.global_score + 1e-12


def test_distributions_and_stats(report):
    conditions = {d["condition"] for d in report.distributions}
    assert conditions == {"ECG", "F_base", "F_global", "F_pt"}
    tasks = {d["task"] for d in report.distributions}
    assert {s["task"] for s in report.stats} == tasks
    assert {s["metric"] for s in report.stats} == {"mean_ibi_ms", "rmssd_ms"}


def test_condition_stats_matches_direct_tests():
    from ppgtune.stats import PairedSamples, paired_t, rm_anova

    dist = []
    values = {"A": [1.0, 2.0, 4.0, 3.5], "B": [1.5, 2.2, 4.9, 3.6], "C": [0.7, 2.9, 4.1, 3.0]}
    for cond, vals in values.items():
        for i, v in enumerate(vals):
            dist.append(dict(task="t", participant=f"p{i}", condition=cond, mean_ibi_ms=v, rmssd_ms=v * 2))
    rows = condition_stats(dist, ["A", "B", "C"])
    anova = [r for r in rows if r["metric"] == "mean_ibi_ms" and r["test"] == "rm_anova"][0]
    assert anova["statistic"] == pytest.approx(rm_anova(list(zip(*values.values()))).f_stat)
    ab = [r for r in rows if r["metric"] == "mean_ibi_ms" and r["a"] == "A" and r["b"] == "B"][0]
    t, p = paired_t(PairedSamples(values["A"], values["B"]))
    assert ab["statistic"] == pytest.approx(t) and ab["p_bonferroni"] == pytest.approx(min(1.0, 3 * p))


def test_write_is_deterministic(manifest, report, tmp_path):
    report.write(tmp_path / "a")
    run_pipeline(manifest, _cfg()).write(tmp_path / "b")
    for name in REPORT_FILES:
        assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name, shallow=False), name
    assert (tmp_path / "a" / "fig_f1_by_task.svg").exists()


def test_cache_and_parallel_runs_match(manifest, report, tmp_path):
    report.write(tmp_path / "plain")
    cfg = _cfg(cache_dir=str(tmp_path / "cache"))
    run_pipeline(manifest, cfg).write(tmp_path / "cold")
    assert any((tmp_path / "cache").iterdir())
    run_pipeline(manifest, cfg).write(tmp_path / "warm")
    run_pipeline(manifest, _cfg(), jobs=2).write(tmp_path / "par")
    for other in ("cold", "warm", "par"):
        for name in ("report.csv", "segments.csv", "fronts.csv", "stats.csv"):
            assert filecmp.cmp(tmp_path / "plain" / name, tmp_path / other / name, shallow=False), (other, name)


def test_base_only(manifest):
    rep = run_pipeline(manifest, _cfg(scopes=("base",)))
    assert {r.scope for r in rep.rows} == {"base"}
    assert rep.global_pair is None
    assert all(not math.isnan(r.f1) for r in rep.rows)
