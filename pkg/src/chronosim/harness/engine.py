"""Single-threaded discrete-event engine with deterministic ordering."""

from __future__ import annotations

import hashlib
import heapq
import itertools
from typing import Any, Callable, Generator

import numpy as np


class CausalityError(RuntimeError):
    """An event was scheduled before the current simulation time."""


class EventQueue:
    """Min-queue on (time, sequence); equal times pop in insertion order."""

    def __init__(self) -> None:
        self._heap: list[tuple[int, int, Callable, tuple]] = []
        self._seq = itertools.count()

    def push(self, time_ps: int, action: Callable, args: tuple = ()) -> None:
        heapq.heappush(self._heap, (time_ps, next(self._seq), action, args))

    def pop(self) -> tuple[int, int, Callable, tuple]:
        return heapq.heappop(self._heap)

    def peek_time(self) -> int | None:
        return self._heap[0][0] if self._heap else None

    def __len__(self) -> int:
        return len(self._heap)


class Engine:
    def __init__(self) -> None:
        self.now = 0
        self.queue = EventQueue()

    def schedule(self, at_ps: int, action: Callable, *args: Any) -> None:
        if at_ps < self.now:
            raise CausalityError(f"event at {at_ps} ps scheduled from {self.now} ps")
        self.queue.push(at_ps, action, args)

    def spawn(self, proc: Generator[int, None, Any], on_done: Callable[[Any], None]) -> None:
        """Drive a procedure, resuming it at each instant it yields."""

        def resume() -> None:
            try:
                at = next(proc)
            except StopIteration as stop:
                on_done(stop.value)
                return
            self.schedule(at, resume)

        resume()

    def run(self, until_ps: int) -> None:
        while self.queue and self.queue.peek_time() <= until_ps:
            t, _, action, args = self.queue.pop()
            if t < self.now:
                raise CausalityError(f"popped event at {t} ps after reaching {self.now} ps")
            self.now = t
            action(*args)


class Streams:
    """Named RNG sub-streams of one seed.

    The key is hashed, so adding a stream never perturbs another one.
    """

    def __init__(self, seed: int) -> None:
        self.seed = seed

    def get(self, *key: str) -> np.random.Generator:
        digest = hashlib.sha256("/".join(key).encode()).digest()
        return np.random.default_rng([self.seed, int.from_bytes(digest[:8], "little")])
