"""Phase-timed benchmark of the seal/open message cycle.

Each timed iteration takes four timestamps from one monotonic clock::

    t0  nonce generation  t1  seal  t2  parse + open  t3

random = t1 - t0, encryption = t2 - t1, decryption = t3 - t2 and
functional = t3 - t0. Samples stay in memory until the loop ends; nothing is
written while a window is open.
"""

import gc
import os
import platform
import statistics
import sys
import time
from array import array
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Optional

from .envelope import EntropyError, SealSession, generate_nonce, open_sealed, seal_with_nonce

PHASES = ("functional", "random", "encryption", "decryption")
STATISTICS = ("mean", "p95")

DEFAULT_RUNS = 100_000
DEFAULT_WARMUP = 1_000

NS_PER_MS = 1_000_000

SCALING_WARNING = (
    "dynamic frequency scaling can make timings bimodal: cold runs execute at "
    "base clock, sustained load at boost clock"
)
SCALING_ADVICE = (
    "lock the CPU frequency out-of-band (e.g. performance governor, turbo off) "
    "or keep the warmup phase so the measured state is the steady state"
)


class PhaseSample(NamedTuple):
    random_ns: int
    encrypt_ns: int
    decrypt_ns: int
    functional_ns: int

    @property
    def valid(self) -> bool:
        return min(self) >= 0

    def phase(self, name: str) -> int:
        return self[_PHASE_INDEX[name]]


_PHASE_INDEX = {"random": 0, "encryption": 1, "decryption": 2, "functional": 3}


@dataclass
class RunConfig:
    payload_size: int
    runs: int = DEFAULT_RUNS
    warmup_runs: int = DEFAULT_WARMUP
    entropy: Callable[[int], bytes] = os.urandom
    label: str = ""

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.warmup_runs < 0:
            raise ValueError("warmup_runs must be >= 0")
        if self.payload_size < 0:
            raise ValueError("payload_size must be >= 0")


class BenchmarkAborted(RuntimeError):
    """Timing loop stopped early; ``samples`` holds what was collected."""

    def __init__(self, message, samples, cause=None):
        super().__init__(message)
        self.samples = samples
        self.cause = cause


class EmptySampleError(ValueError):
    pass


def _payload(size: int) -> bytes:
    return bytes(i & 0xFF for i in range(size))


def run_benchmark(config: RunConfig, key: bytes, *, clock=time.perf_counter_ns,
                  session: Optional[SealSession] = None) -> list:
    """Run ``config.warmup_runs`` untimed then ``config.runs`` timed cycles.

    Pass a ``session`` to inspect the nonces afterwards; they are recorded
    outside the timed window.
    """
    if session is None:
        session = SealSession(key, config.entropy)
    entropy = config.entropy
    payload = _payload(config.payload_size)

    for _ in range(config.warmup_runs):
        try:
            nonce = generate_nonce(entropy)
        except EntropyError as exc:
            raise BenchmarkAborted("entropy failure during warmup", [], exc) from exc
        open_sealed(key, seal_with_nonce(key, payload, nonce))

    # Preallocated so the loop itself does not grow any container.
    n = config.runs
    t0s, t1s, t2s, t3s = (array("q", bytes(8 * n)) for _ in range(4))
    done = 0
    failure = None
    nonces = [None] * n
    # Like timeit: a cyclic collection would otherwise land inside random
    # windows and charge them for scanning objects unrelated to the cycle.
    gc_was_enabled = gc.isenabled()
    gc.collect()
    gc.disable()
    try:
        for i in range(n):
            t0 = clock()
            try:
                nonce = generate_nonce(entropy)
            except EntropyError as exc:
                failure = exc
                break
            t1 = clock()
            sealed = seal_with_nonce(key, payload, nonce)
            t2 = clock()
            opened = open_sealed(key, sealed)
            t3 = clock()
            t0s[i] = t0; t1s[i] = t1; t2s[i] = t2; t3s[i] = t3
            nonces[i] = nonce
            done = i + 1
            if opened != payload:
                raise RuntimeError("round trip mismatch inside benchmark loop")
    finally:
        if gc_was_enabled:
            gc.enable()

    for nonce in nonces[:done]:
        session.record(nonce)
    samples = [
        PhaseSample(t1s[i] - t0s[i], t2s[i] - t1s[i], t3s[i] - t2s[i], t3s[i] - t0s[i])
        for i in range(done)
    ]
    if failure is not None:
        raise BenchmarkAborted(
            f"entropy failure after {done} of {n} runs", samples, failure) from failure
    return samples


def filter_invalid(samples):
    """Drop samples with any negative duration; returns ``(valid, dropped)``."""
    valid = [s for s in samples if s.valid]
    return valid, len(samples) - len(valid)


def nearest_rank(sorted_values, percent: int):
    """Nearest-rank percentile: element at rank ceil(percent/100 * n), 1-indexed."""
    n = len(sorted_values)
    if n == 0:
        raise EmptySampleError("percentile of an empty sample")
    rank = max(1, -(-percent * n // 100))
    return sorted_values[rank - 1]


@dataclass(frozen=True)
class PhaseStats:
    mean: float
    p5: int
    p95: int
    min: int
    max: int


@dataclass(frozen=True)
class StatsSummary:
    phases: dict
    n_total: int
    n_valid: int
    n_dropped: int

    def stat(self, phase: str, statistic: str) -> float:
        return getattr(self.phases[phase], statistic)


def summarize(samples, n_dropped: int = 0) -> StatsSummary:
    """Mean and nearest-rank p5/p95 per phase over already-filtered samples."""
    if not samples:
        raise EmptySampleError("no valid samples to summarize")
    n = len(samples)
    phases = {}
    for name in PHASES:
        idx = _PHASE_INDEX[name]
        values = sorted(s[idx] for s in samples)
        phases[name] = PhaseStats(
            mean=sum(values) / n,
            p5=nearest_rank(values, 5),
            p95=nearest_rank(values, 95),
            min=values[0],
            max=values[-1],
        )
    return StatsSummary(phases, n + n_dropped, n, n_dropped)


@dataclass(frozen=True)
class BudgetSpec:
    name: str
    limit_ns: float

    def __post_init__(self):
        if not self.limit_ns > 0:
            raise ValueError(f"budget {self.name!r} needs a positive limit")

    @classmethod
    def from_ms(cls, name: str, limit_ms: float) -> "BudgetSpec":
        return cls(name, limit_ms * NS_PER_MS)

    @classmethod
    def parse(cls, text: str) -> "BudgetSpec":
        """Parse ``name=limit_ms``, e.g. ``GOOSE=4``."""
        name, sep, value = text.partition("=")
        if not sep or not name.strip():
            raise ValueError(f"budget must look like name=limit_ms, got {text!r}")
        return cls.from_ms(name.strip(), float(value))


GOOSE = BudgetSpec.from_ms("GOOSE", 4)
IEC_60834_1 = BudgetSpec.from_ms("IEC 60834-1", 10)
SCADA = BudgetSpec.from_ms("SCADA", 1000)
DEFAULT_BUDGETS = (GOOSE, IEC_60834_1, SCADA)


def budget_fraction(duration_ns: float, budget: BudgetSpec) -> float:
    """Percentage of ``budget`` consumed by ``duration_ns``.

    Dividing by the limit's one-percent share keeps
    ``fraction * (limit / 100)`` within one ulp of ``duration_ns``.
    """
    return duration_ns / (budget.limit_ns / 100)


@dataclass(frozen=True)
class Verdict:
    budget: str
    limit_ns: float
    phase: str
    statistic: str
    value_ns: float
    fraction_pct: float
    passed: bool


def budget_verdict(stats: StatsSummary, budget: BudgetSpec, phase: str = "functional",
                   statistic: str = "mean") -> Verdict:
    """Pass iff the statistic is strictly below the limit; a tie fails."""
    if phase not in PHASES:
        raise ValueError(f"unknown phase {phase!r}")
    if statistic not in STATISTICS:
        raise ValueError(f"unknown statistic {statistic!r}")
    value = stats.stat(phase, statistic)
    return Verdict(
        budget=budget.name,
        limit_ns=budget.limit_ns,
        phase=phase,
        statistic=statistic,
        value_ns=value,
        fraction_pct=budget_fraction(value, budget),
        passed=value < budget.limit_ns,
    )


def peak_memory() -> Optional[int]:
    """Peak resident set size of this process in bytes, or None."""
    try:
        import resource
    except ImportError:
        resource = None
    if resource is not None:
        peak = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
        if peak > 0:
            # macOS reports bytes, Linux and the BSDs kilobytes.
            return peak if sys.platform == "darwin" else peak * 1024
    try:
        for line in Path("/proc/self/status").read_text().splitlines():
            if line.startswith("VmHWM:"):
                return int(line.split()[1]) * 1024
    except (OSError, ValueError, IndexError):
        pass
    return None


def measure_clock_resolution(clock=time.perf_counter_ns, reads: int = 1001) -> int:
    """Median of the smallest observable positive steps between clock reads."""
    steps = []
    for _ in range(reads):
        a = clock()
        b = clock()
        while b == a:
            b = clock()
        steps.append(b - a)
    return int(statistics.median(steps))


def _read_sys(path: str) -> Optional[str]:
    try:
        return Path(path).read_text().strip()
    except OSError:
        return None


def frequency_policy() -> str:
    cpufreq = "/sys/devices/system/cpu/cpu0/cpufreq"
    governor = _read_sys(f"{cpufreq}/scaling_governor")
    if governor is None:
        return "unavailable"
    parts = [f"governor={governor}"]
    driver = _read_sys(f"{cpufreq}/scaling_driver")
    if driver:
        parts.append(f"driver={driver}")
    no_turbo = _read_sys("/sys/devices/system/cpu/intel_pstate/no_turbo")
    if no_turbo is not None:
        parts.append(f"turbo={'off' if no_turbo == '1' else 'on'}")
    boost = _read_sys("/sys/devices/system/cpu/cpufreq/boost")
    if boost is not None:
        parts.append(f"boost={'on' if boost == '1' else 'off'}")
    return ", ".join(parts)


def environment_probe() -> dict:
    info = time.get_clock_info("perf_counter")
    return {
        "clock": "perf_counter_ns",
        "clock_implementation": info.implementation,
        "clock_monotonic": info.monotonic,
        "clock_resolution_ns": measure_clock_resolution(),
        "frequency_policy": frequency_policy(),
        "cpu_count": os.cpu_count(),
        "machine": platform.machine() or "unavailable",
        "platform": platform.platform(),
        "python": platform.python_version(),
        "warning": SCALING_WARNING,
        "advice": SCALING_ADVICE,
    }


@dataclass
class CampaignResult:
    payload_size: int
    runs: int
    warmup_runs: int
    label: str
    summary: Optional[StatsSummary]
    n_total: int = 0
    n_dropped: int = 0
    verdicts: list = field(default_factory=list)
    nonce_collisions: int = 0
    peak_memory_bytes: Optional[int] = None
    elapsed_s: float = 0.0
    partial: bool = False


def run_campaign(config: RunConfig, key: bytes, budgets=DEFAULT_BUDGETS, *,
                 clock=time.perf_counter_ns) -> CampaignResult:
    """Run, filter, summarize and judge one payload size against ``budgets``.

    Every budget is judged on the functional mean and the functional p95.
    """
    session = SealSession(key, config.entropy)
    started = time.perf_counter()
    samples = run_benchmark(config, key, clock=clock, session=session)
    elapsed = time.perf_counter() - started
    return judge(config, samples, budgets, session=session, elapsed_s=elapsed)


def judge(config: RunConfig, samples, budgets=DEFAULT_BUDGETS, *, session=None,
          elapsed_s: float = 0.0, partial: bool = False) -> CampaignResult:
    valid, dropped = filter_invalid(samples)
    summary = summarize(valid, dropped) if valid else None
    verdicts = []
    if summary is not None:
        verdicts = [
            budget_verdict(summary, b, "functional", stat)
            for b in budgets for stat in STATISTICS
        ]
    return CampaignResult(
        payload_size=config.payload_size,
        runs=config.runs,
        warmup_runs=config.warmup_runs,
        label=config.label,
        summary=summary,
        n_total=len(samples),
        n_dropped=dropped,
        verdicts=verdicts,
        nonce_collisions=session.collisions if session is not None else 0,
        peak_memory_bytes=peak_memory(),
        elapsed_s=elapsed_s,
        partial=partial,
    )

