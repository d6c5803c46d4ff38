"""Strategy table, worker capping, and the experiment drivers."""
import numpy as np
import pytest

from cnapwp.baselines import (
    ABLATION_CONDITIONS,
    CNAPWP,
    E_ONLY,
    G_ONLY,
    LANDMARK,
    LAST_DRIFT,
    NO_PROMPT,
    STRATEGIES,
    run_ablation,
    run_conditions,
    run_prompt_function_comparison,
    worker_cap,
)
from cnapwp.engine import ALL_MEMORY, SINCE_DRIFT_MEMORY, WINDOW_MEMORY, OnlineEngine
from cnapwp.model import PREFIX_MODE, PROMPT_MODE


def test_strategy_table():
    assert set(STRATEGIES) == {"cnapwp", "g_only", "e_only", "no_prompt", "landmark", "last_drift"}
    assert CNAPWP.use_general and CNAPWP.use_expert
    assert G_ONLY.use_general and not G_ONLY.use_expert
    assert E_ONLY.use_expert and not E_ONLY.use_general
    assert not NO_PROMPT.use_general and not NO_PROMPT.use_expert
    assert NO_PROMPT.freeze_after == 500
    assert LANDMARK.reinit_on_update and LANDMARK.training_memory == ALL_MEMORY
    assert LAST_DRIFT.training_memory == SINCE_DRIFT_MEMORY
    assert CNAPWP.training_memory == WINDOW_MEMORY
    assert list(ABLATION_CONDITIONS) == ["no_prompt", "g_only", "e_only", "full"]


def test_needs_drift_info():
    assert CNAPWP.needs_drift_info  # task recognition keys off drift signals
    assert E_ONLY.needs_drift_info
    assert LAST_DRIFT.needs_drift_info
    assert not G_ONLY.needs_drift_info
    assert not NO_PROMPT.needs_drift_info
    assert not LANDMARK.needs_drift_info


def test_worker_cap(monkeypatch):
    monkeypatch.delenv("CNAPWP_THREADS", raising=False)
    cpus = max(1, __import__("os").cpu_count() or 1)
    assert worker_cap() == cpus
    assert worker_cap(1) == 1
    assert worker_cap(0) == 1  # requests below one clamp up
    monkeypatch.setenv("CNAPWP_THREADS", "1")
    assert worker_cap(8) == 1
    monkeypatch.setenv("CNAPWP_THREADS", "0")
    assert worker_cap() == 1
    monkeypatch.setenv("CNAPWP_THREADS", str(cpus + 5))
    assert worker_cap() == cpus


def test_reinit_rebuilds_the_backbone_from_seed(tiny_stream, small_config):
    engine = OnlineEngine(small_config, LANDMARK)
    engine.prepare(tiny_stream)
    trained_names = {p.name: p.value.copy() for p in engine.model.parameters()}
    engine.consume(tiny_stream, record=False)
    engine._reinit_model()
    for p in engine.model.parameters():
        assert np.array_equal(p.value, trained_names[p.name]), p.name


def test_run_conditions_serial(tiny_stream, small_config):
    reports = run_conditions(
        tiny_stream, small_config, {"full": CNAPWP, "no_prompt": NO_PROMPT}, max_workers=1
    )
    assert set(reports) == {"full", "no_prompt"}
    assert reports["full"].strategy == "cnapwp"
    assert reports["no_prompt"].strategy == "no_prompt"
    assert len(reports["full"].records) == len(reports["no_prompt"].records) == 144


def test_run_ablation_keys(tiny_stream, small_config):
    reports = run_ablation(tiny_stream, small_config, max_workers=1)
    assert set(reports) == {"no_prompt", "g_only", "e_only", "full"}
    for report in reports.values():
        assert len(report.records) == 144


def test_prompt_function_comparison_sets_both_modes(tiny_stream, small_config):
    reports = run_prompt_function_comparison(tiny_stream, small_config, max_workers=1)
    assert set(reports) == {"prefix", "prompt"}
    assert reports["prefix"].config.prompt_mode == PREFIX_MODE
    assert reports["prompt"].config.prompt_mode == PROMPT_MODE
    assert reports["prefix"].strategy == reports["prompt"].strategy == "cnapwp"


def test_condition_runs_match_single_runs(tiny_stream, small_config):
    from cnapwp.engine import run_session

    grouped = run_conditions(tiny_stream, small_config, {"full": CNAPWP}, max_workers=1)
    solo = run_session(tiny_stream, small_config, CNAPWP)
    strip = lambda r: (r.index, r.y, r.y_hat, r.correct, r.task_id, r.buffering)
    assert [strip(r) for r in grouped["full"].records] == [strip(r) for r in solo.records]


@pytest.mark.parametrize("strategy", [LANDMARK, LAST_DRIFT])
def test_reference_baselines_run_end_to_end(strategy, tiny_stream, small_config):
    reports = run_conditions(tiny_stream, small_config, {strategy.name: strategy}, max_workers=1)
    report = reports[strategy.name]
    assert len(report.records) == 144
    assert 0.0 <= report.summary()["average_accuracy"] <= 1.0
