"""Per-lane task log with integer-microsecond timestamps."""
from __future__ import annotations

from dataclasses import dataclass, field

LOCALIZATION = "localization"
MAPPING = "mapping"
SEGMENTATION = "segmentation"
LANES = (LOCALIZATION, MAPPING, SEGMENTATION)


def ms_to_us(ms: float) -> int:
    return int(round(ms * 1000))


@dataclass(frozen=True)
class TaskRecord:
    lane: str
    task: str
    # frame id for localization tasks, keyframe index for the other lanes
    key: int
    start_us: int
    end_us: int

    @property
    def duration_ms(self) -> float:
        return (self.end_us - self.start_us) / 1000


@dataclass
class LaneClock:
    busy_until: dict = field(default_factory=lambda: {lane: 0 for lane in LANES})
    log: list = field(default_factory=list)

    def charge(self, lane: str, task: str, key: int, start_us: int, duration_us: int) -> int:
        """Run a task no earlier than ``start_us`` and after the lane frees up."""
        start = max(start_us, self.busy_until[lane])
        end = start + int(duration_us)
        self.log.append(TaskRecord(lane, task, key, start, end))
        self.busy_until[lane] = end
        return end

    def record(self, lane: str, task: str, key: int, start_us: int, end_us: int) -> None:
        if start_us < self.busy_until[lane]:
            start_us = self.busy_until[lane]
        end_us = max(end_us, start_us)
        self.log.append(TaskRecord(lane, task, key, start_us, end_us))
        self.busy_until[lane] = end_us

    def idle_at(self, t_us: int, lanes=(MAPPING, SEGMENTATION)) -> bool:
        return all(self.busy_until[lane] <= t_us for lane in lanes)
