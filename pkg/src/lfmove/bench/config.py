"""Benchmark configuration."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..containers.backoff import BackoffPolicy

OBJECTS = ("qq", "ss", "qs")
WORKLOADS = ("move", "ops", "mixed")
CONTENTION = {"high": 0.1, "low": 0.5}  # mean local work per operation, microseconds
IMPLS = ("lockfree", "locked")

DESK_OPS = 100_000
DESK_TRIALS = 10
FULL_OPS = 5_000_000
FULL_TRIALS = 50
MAX_THREADS = 16
SEED_ELEMENTS = 1000


class BenchUsageError(ValueError):
    pass


@dataclass(frozen=True)
class BenchConfig:
    objects: str = "qs"
    workload: str = "move"
    threads: int = 1
    total_ops: int = DESK_OPS
    trials: int = DESK_TRIALS
    contention: str = "high"
    backoff: bool = False
    backoff_policy: BackoffPolicy = field(default_factory=BackoffPolicy)
    impl: str = "lockfree"
    seed: int = 1
    # overrides the contention level's mean when set (control runs, tests)
    work_mean_us: float | None = None
    seed_elements: int = SEED_ELEMENTS
    checked: bool = False

    def __post_init__(self) -> None:
        if self.objects not in OBJECTS:
            raise BenchUsageError(f"objects must be one of {OBJECTS}, got {self.objects!r}")
        if self.workload not in WORKLOADS:
            raise BenchUsageError(f"workload must be one of {WORKLOADS}, got {self.workload!r}")
        if self.contention not in CONTENTION:
            raise BenchUsageError(f"contention must be high or low, got {self.contention!r}")
        if self.impl not in IMPLS:
            raise BenchUsageError(f"impl must be one of {IMPLS}, got {self.impl!r}")
        if not 1 <= self.threads <= MAX_THREADS:
            raise BenchUsageError(f"threads must be in 1..{MAX_THREADS}, got {self.threads}")
        if self.total_ops < self.threads:
            raise BenchUsageError("need at least one operation per thread")
        if self.trials < 1:
            raise BenchUsageError("need at least one trial")
        if self.work_mean_us is not None and self.work_mean_us < 0:
            raise BenchUsageError("work mean must be non-negative")
        if self.seed_elements < 0:
            raise BenchUsageError("seed_elements must be non-negative")

    @property
    def mean_work_us(self) -> float:
        if self.work_mean_us is not None:
            return self.work_mean_us
        return CONTENTION[self.contention]

    def ops_per_thread(self) -> list[int]:
        """Split ``total_ops`` as evenly as possible (sizes differ by at most one)."""
        q, r = divmod(self.total_ops, self.threads)
        return [q + (1 if i < r else 0) for i in range(self.threads)]
