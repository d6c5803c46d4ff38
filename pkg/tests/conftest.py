"""Shared fixtures: tiny concept pools, a fast engine configuration, and a
hand-computed metrics fixture."""
import pytest

from cnapwp.engine import EngineConfig
from cnapwp.metrics import PredictionRecord
from cnapwp.stream import DriftSchedule, generate_drift_stream


def make_tiny_pools():
    """Two structurally distinct concepts over a five-letter alphabet."""
    alpha = [
        ("a", "b", "c", "d"),
        ("a", "b", "d"),
        ("a", "b", "c", "c", "d"),
    ]
    beta = [
        ("a", "c", "b", "e"),
        ("a", "c", "e"),
        ("a", "c", "b", "b", "e"),
    ]
    return {"alpha": alpha, "beta": beta}


@pytest.fixture
def tiny_pools():
    return make_tiny_pools()


@pytest.fixture
def tiny_stream(tiny_pools):
    """180 events: alpha, beta, alpha with drifts at 60 and 120."""
    schedule = DriftSchedule(60, ("alpha", "beta", "alpha"))
    return generate_drift_stream(tiny_pools, schedule, seed=5)


@pytest.fixture
def small_config():
    return EngineConfig(
        window_size=20,
        buffer_size=6,
        threshold=0.6,
        buckets=2,
        max_len=4,
        lr=0.05,
        batch_size=10,
        epochs=2,
        prompt_len=1,
        heads=2,
        layers=2,
        dropout=0.1,
        seed=3,
        validation_fraction=0.2,
    )


def scripted_records(hit_pattern, task_ids=None, latencies=None):
    """Records with a scripted correctness pattern; labels are arbitrary."""
    n = len(hit_pattern)
    task_ids = task_ids if task_ids is not None else [1] * n
    latencies = latencies if latencies is not None else [0] * n
    return [
        PredictionRecord(
            index=i,
            case_id=f"case{i % 3}",
            y="a" if hit else "b",
            y_hat="a",
            correct=bool(hit),
            task_id=task_ids[i],
            buffering=False,
            latency_ns=latencies[i],
        )
        for i, hit in enumerate(hit_pattern)
    ]


# Hand-computed expectations (segments of four records each):
#   A1 [1,1,1,0]=0.75  B1 [0,1,1,0]=0.50  A2 [1,0,0,0]=0.25
#   C1 [1,1,0,1]=0.75  A3 [1,1,1,0]=0.75
# delta(A,2) = 0.75 - 0.25 = 0.5, delta(A,3) = 0.0, mean positive = 0.25,
# average accuracy = 12/20 = 0.6.
METRICS_HITS = (1, 1, 1, 0, 0, 1, 1, 0, 1, 0, 0, 0, 1, 1, 0, 1, 1, 1, 1, 0)
METRICS_DRIFTS = (4, 8, 12, 16)
METRICS_LABELS = ("A", "B", "A", "C", "A")


@pytest.fixture
def metrics_fixture():
    return scripted_records(METRICS_HITS), METRICS_DRIFTS, METRICS_LABELS
