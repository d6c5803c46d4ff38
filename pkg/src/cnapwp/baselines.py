"""Named run conditions and multi-condition experiment drivers.

The full predictor, its prompt ablations, and two reference baselines:

* landmark retrains a fresh backbone on every sample seen so far at each
  update, an upper-effort reference with unbounded memory;
* last_drift keeps one backbone but trains only on samples since the most
  recent drift, the classic adapt-and-forget reference.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Mapping

from .engine import (
    ALL_MEMORY,
    SINCE_DRIFT_MEMORY,
    EngineConfig,
    RunReport,
    StrategySpec,
    run_session,
)
from .model import PREFIX_MODE, PROMPT_MODE
from .stream import EventStream

CNAPWP = StrategySpec("cnapwp", use_general=True, use_expert=True)
G_ONLY = StrategySpec("g_only", use_general=True, use_expert=False)
E_ONLY = StrategySpec("e_only", use_general=False, use_expert=True)
NO_PROMPT = StrategySpec(
    "no_prompt", use_general=False, use_expert=False, freeze_after=500
)
LANDMARK = StrategySpec(
    "landmark", use_general=False, use_expert=False, reinit_on_update=True, training_memory=ALL_MEMORY
)
LAST_DRIFT = StrategySpec(
    "last_drift", use_general=False, use_expert=False, training_memory=SINCE_DRIFT_MEMORY
)

STRATEGIES: dict[str, StrategySpec] = {
    s.name: s for s in (CNAPWP, G_ONLY, E_ONLY, NO_PROMPT, LANDMARK, LAST_DRIFT)
}

# Ablation grid: "full" is the complete predictor, the others switch prompt kinds off.
ABLATION_CONDITIONS: dict[str, StrategySpec] = {
    "no_prompt": NO_PROMPT,
    "g_only": G_ONLY,
    "e_only": E_ONLY,
    "full": CNAPWP,
}


def worker_cap(requested: int | None = None) -> int:
    """Process-pool width: CPUs, capped by CNAPWP_THREADS and the caller."""
    cap = os.cpu_count() or 1
    env = os.environ.get("CNAPWP_THREADS", "").strip()
    if env:
        cap = min(cap, max(1, int(env)))
    if requested is not None:
        cap = min(cap, max(1, requested))
    return max(1, cap)


def _run_job(job: tuple[str, EventStream, EngineConfig, StrategySpec]) -> tuple[str, RunReport]:
    name, stream, config, strategy = job
    return name, run_session(stream, config, strategy)


def run_conditions(
    stream: EventStream,
    config: EngineConfig,
    conditions: Mapping[str, StrategySpec],
    max_workers: int | None = None,
) -> dict[str, RunReport]:
    """Run every condition on the same stream, in parallel when workers allow."""
    jobs = [(name, stream, config, strategy) for name, strategy in conditions.items()]
    workers = worker_cap(max_workers)
    if workers <= 1 or len(jobs) <= 1:
        results = [_run_job(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_run_job, jobs))
    return dict(results)


def run_ablation(
    stream: EventStream, config: EngineConfig, max_workers: int | None = None
) -> dict[str, RunReport]:
    return run_conditions(stream, config, ABLATION_CONDITIONS, max_workers=max_workers)


def run_prompt_function_comparison(
    stream: EventStream, config: EngineConfig, max_workers: int | None = None
) -> dict[str, RunReport]:
    """The full predictor with key/value prompt rows versus input-token prompt rows."""
    jobs = {
        "prefix": (replace(config, prompt_mode=PREFIX_MODE), CNAPWP),
        "prompt": (replace(config, prompt_mode=PROMPT_MODE), CNAPWP),
    }
    workers = worker_cap(max_workers)
    packed = [(name, stream, cfg, strat) for name, (cfg, strat) in jobs.items()]
    if workers <= 1:
        results = [_run_job(job) for job in packed]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(packed))) as pool:
            results = list(pool.map(_run_job, packed))
    return dict(results)
