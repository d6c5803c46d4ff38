"""FIFO sliding window over (event, sample) pairs with a periodic update signal."""
from __future__ import annotations

from collections import deque
from enum import Enum
from typing import Iterator

from .errors import ConfigurationError
from .preprocessing import BucketConfig, EncodedSample, assign_bucket
from .stream import Event


class UpdateSignal(Enum):
    NONE = "none"
    WINDOW_FULL = "window_full"


class SlidingWindow:
    """Keeps the newest ``capacity`` events and signals every ``capacity`` pushes.

    Eviction and the update counter are independent: the signal fires on every
    capacity-th push regardless of what was evicted, then the counter resets.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigurationError("window capacity must be >= 1")
        self.capacity = capacity
        self._buffer: deque[tuple[Event, EncodedSample | None]] = deque()
        self._by_case: dict[str, deque[str]] = {}
        self._since_update = 0

    def __len__(self) -> int:
        return len(self._buffer)

    def push(self, event: Event, sample: EncodedSample | None = None) -> UpdateSignal:
        self._buffer.append((event, sample))
        self._by_case.setdefault(event.case_id, deque()).append(event.activity)
        if len(self._buffer) > self.capacity:
            old_event, _ = self._buffer.popleft()
            case_hist = self._by_case[old_event.case_id]
            case_hist.popleft()
            if not case_hist:
                del self._by_case[old_event.case_id]
        self._since_update += 1
        if self._since_update >= self.capacity:
            self._since_update = 0
            return UpdateSignal.WINDOW_FULL
        return UpdateSignal.NONE

    def activities_for_case(self, case_id: str) -> list[str]:
        """The case's activities currently in the window, oldest first."""
        return list(self._by_case.get(case_id, ()))

    def events(self) -> Iterator[Event]:
        return (event for event, _ in self._buffer)

    def samples(self) -> list[EncodedSample]:
        return [sample for _, sample in self._buffer if sample is not None]

    @property
    def events_since_update(self) -> int:
        return self._since_update


def partition_batches(
    samples: list[EncodedSample] | SlidingWindow,
    bucket_config: BucketConfig,
    batch_size: int,
) -> list[tuple[int, list[list[EncodedSample]]]]:
    """Group samples by bucket (ascending id), keeping arrival order, in chunks <= batch_size."""
    if batch_size < 1:
        raise ConfigurationError("batch_size must be >= 1")
    if isinstance(samples, SlidingWindow):
        samples = samples.samples()
    groups: dict[int, list[EncodedSample]] = {}
    for sample in samples:
        bucket = assign_bucket(sample.effective_len, bucket_config)
        groups.setdefault(bucket, []).append(sample)
    out = []
    for bucket in sorted(groups):
        members = groups[bucket]
        chunks = [members[i : i + batch_size] for i in range(0, len(members), batch_size)]
        out.append((bucket, chunks))
    return out
