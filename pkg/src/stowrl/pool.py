"""Per-problem priority pool of the best state-action samples.

Only episodes that finish with a positive final reward contribute. In the
default sample granularity, individual samples are ranked by their
discounted return: when the pool is full the lowest return is evicted
(oldest first on ties) and the training batch is drawn from the top of the
ranking (newest first on ties). The alternative episode granularity keeps
whole episodes, ranked by their best sample return, and top_k returns the
samples of the k best episodes.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .trainer import TrajectorySample

DEFAULT_POOL_CAPACITY = 5000

GRANULARITY_SAMPLE = "sample"
GRANULARITY_EPISODE = "episode"
GRANULARITIES = (GRANULARITY_SAMPLE, GRANULARITY_EPISODE)

POOL_DUMP_MAGIC = "stowrl-pool-v1"


@dataclass
class PoolEntry:
    sample: "TrajectorySample"
    episode_id: int
    insertion_seq: int


class ProblemPool:
    def __init__(
        self,
        problem_id: str,
        capacity: int = DEFAULT_POOL_CAPACITY,
        granularity: str = GRANULARITY_SAMPLE,
    ):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        if granularity not in GRANULARITIES:
            raise ValueError(f"granularity must be one of {GRANULARITIES}")
        self.problem_id = problem_id
        self.capacity = capacity  # samples, or episodes in episode granularity
        self.granularity = granularity
        # min-heap on (key, insertion_seq): the evicted entry has the lowest
        # key, oldest first among ties. In sample granularity the key is the
        # sample's return; in episode granularity it is the episode's best
        # sample return and the payload is the whole sample list.
        self._heap: list = []
        self._next_seq = 0

    def __len__(self) -> int:
        return len(self._heap)

    def push_episode(self, episode_id: int, samples, episode_final_reward: float) -> int:
        """Insert a positively rewarded episode; returns how many samples were
        offered (0 when the episode's final reward is not positive)."""
        if episode_final_reward <= 0.0 or not samples:
            return 0
        if self.granularity == GRANULARITY_EPISODE:
            key = max(float(s.v) for s in samples)
            item = (key, self._next_seq, episode_id, list(samples))
            self._next_seq += 1
            if len(self._heap) < self.capacity:
                heapq.heappush(self._heap, item)
            else:
                heapq.heappushpop(self._heap, item)
            return len(samples)
        for sample in samples:
            entry = PoolEntry(sample, episode_id, self._next_seq)
            item = (float(sample.v), self._next_seq, entry)
            self._next_seq += 1
            if len(self._heap) < self.capacity:
                heapq.heappush(self._heap, item)
            else:
                heapq.heappushpop(self._heap, item)
        return len(samples)

    def top_k(self, k: int) -> list["TrajectorySample"]:
        """Highest-return content, best first, newest first on ties.

        Sample granularity: the k best samples. Episode granularity: every
        sample of the k best episodes.
        """
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        ordered = sorted(self._heap, key=lambda item: (-item[0], -item[1]))
        if self.granularity == GRANULARITY_EPISODE:
            out = []
            for _, _, _, samples in ordered[:k]:
                out.extend(samples)
            return out
        return [entry.sample for _, _, entry in ordered[:k]]

    def entries(self) -> list[PoolEntry]:
        """Snapshot of stored sample entries (no particular order)."""
        if self.granularity == GRANULARITY_EPISODE:
            return [
                PoolEntry(sample, episode_id, seq)
                for _, seq, episode_id, samples in self._heap
                for sample in samples
            ]
        return [entry for _, _, entry in self._heap]

    def dump(self, path) -> None:
        """Debug dump, same text family as checkpoints; not meant to be loaded."""
        ordered = sorted(
            ((e.sample.v, e.insertion_seq, e) for e in self.entries()),
            key=lambda item: (-item[0], -item[1]),
        )
        lines = [
            POOL_DUMP_MAGIC,
            f"problem_id {self.problem_id}",
            f"capacity {self.capacity}",
            f"granularity {self.granularity}",
            f"entries {len(ordered)}",
        ]
        for v, _, entry in ordered:
            lines.append(
                f"entry {entry.insertion_seq} {entry.episode_id} "
                f"{entry.sample.action} {float(v)!r}"
            )
        lines.append("end")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
