import builtins
import gc
import math
import os
import subprocess
import sys
import time
import tracemalloc

import pytest
from hypothesis import given
from hypothesis import strategies as st

from icsaead import bench
from icsaead.bench import (
    GOOSE,
    IEC_60834_1,
    SCADA,
    BenchmarkAborted,
    BudgetSpec,
    EmptySampleError,
    PhaseSample,
    RunConfig,
    budget_fraction,
    budget_verdict,
    filter_invalid,
    run_benchmark,
    summarize,
)
from icsaead.vectors import counting_entropy

KEY = bytes(range(32))


def functional_only(values):
    return [PhaseSample(0, 0, 0, v) for v in values]


def uniform(values):
    return [PhaseSample(v, v, v, v) for v in values]


class OutputShim:
    """Counts writes to stdout/stderr/os.write and calls to print, and how
    many happened while a timing window was open."""

    def __init__(self, monkeypatch):
        self.in_window = False
        self.total = 0
        self.inside = 0
        self.reads = 0
        shim = self

        class Stream:
            def __init__(self, inner):
                self.inner = inner

            def write(self, text):
                shim._hit()
                return len(text)

            def flush(self):
                pass

            def __getattr__(self, name):
                return getattr(self.inner, name)

        real_write = os.write
        real_print = builtins.print

        def counting_write(fd, data):
            shim._hit()
            return real_write(fd, data)

        def counting_print(*args, **kwargs):
            shim._hit()
            return real_print(*args, **kwargs)

        monkeypatch.setattr(sys, "stdout", Stream(sys.stdout))
        monkeypatch.setattr(sys, "stderr", Stream(sys.stderr))
        monkeypatch.setattr(os, "write", counting_write)
        monkeypatch.setattr(builtins, "print", counting_print)

    def _hit(self):
        self.total += 1
        if self.in_window:
            self.inside += 1

    def clock(self):
        # Reads come in fours per iteration: t0 opens the window, t3 closes it.
        position = self.reads % 4
        self.reads += 1
        if position == 0:
            self.in_window = True
        value = time.perf_counter_ns()
        if position == 3:
            self.in_window = False
        return value


class TestRunBenchmark:
    def test_single_run(self):
        samples = run_benchmark(RunConfig(28, runs=1, warmup_runs=0, entropy=counting_entropy()), KEY)
        assert len(samples) == 1
        s = samples[0]
        assert all(isinstance(v, int) for v in s)
        assert s.functional_ns > 0 and s.encrypt_ns > 0 and s.decrypt_ns > 0

    def test_counts_and_containment(self):
        samples = run_benchmark(RunConfig(56, runs=300, warmup_runs=10), KEY)
        assert len(samples) == 300
        for s in samples:
            assert s.valid
            assert s.functional_ns >= s.random_ns
            assert s.functional_ns == s.random_ns + s.encrypt_ns + s.decrypt_ns

    def test_empty_payload(self):
        samples = run_benchmark(RunConfig(0, runs=50, warmup_runs=0), KEY)
        assert all(s.valid for s in samples)

    def test_nonces_recorded(self):
        session = bench.SealSession(KEY)
        run_benchmark(RunConfig(28, runs=500, warmup_runs=5), KEY, session=session)
        assert session.count == 500
        assert session.collisions == 0

    def test_warmup_is_untimed(self):
        shim_reads = []

        def clock():
            shim_reads.append(1)
            return time.perf_counter_ns()

        run_benchmark(RunConfig(28, runs=7, warmup_runs=13), KEY, clock=clock)
        assert len(shim_reads) == 4 * 7

    def test_entropy_failure_aborts_with_partial_samples(self):
        calls = [0]

        def flaky(n):
            calls[0] += 1
            if calls[0] > 5 + 20:
                raise OSError("entropy pool gone")
            return os.urandom(n)

        with pytest.raises(BenchmarkAborted) as info:
            run_benchmark(RunConfig(28, runs=100, warmup_runs=5, entropy=flaky), KEY)
        assert len(info.value.samples) == 20
        assert isinstance(info.value.cause, bench.EntropyError)

    def test_collector_paused_only_while_timing(self):
        seen = []

        def clock():
            seen.append(gc.isenabled())
            return time.perf_counter_ns()

        assert gc.isenabled()
        run_benchmark(RunConfig(28, runs=5, warmup_runs=0), KEY, clock=clock)
        assert seen == [False] * 20
        assert gc.isenabled()

        def dead(n):
            raise OSError("nope")

        with pytest.raises(BenchmarkAborted):
            run_benchmark(RunConfig(28, runs=5, warmup_runs=0, entropy=dead), KEY)
        assert gc.isenabled()

    def test_entropy_failure_in_warmup(self):
        def dead(n):
            raise OSError("nope")

        with pytest.raises(BenchmarkAborted) as info:
            run_benchmark(RunConfig(28, runs=10, warmup_runs=3, entropy=dead), KEY)
        assert info.value.samples == []

    def test_clock_anomalies_are_dropped_not_clamped(self):
        # Every 10th iteration the clock jumps backwards before its last read,
        # the way an overflowing timespec difference would.
        reads = [0]
        base = [0]

        def clock():
            i = reads[0]
            reads[0] += 1
            base[0] += 1000
            if i % 40 == 39:
                return base[0] - 10_000_000
            return base[0]

        samples = run_benchmark(RunConfig(28, runs=200, warmup_runs=0), KEY, clock=clock)
        valid, dropped = filter_invalid(samples)
        assert dropped == 20
        assert len(valid) == 180
        summary = summarize(valid, dropped)
        assert summary.n_total == 200
        assert summary.phases["functional"].min == 3000

    def test_no_output_inside_timed_regions(self, monkeypatch):
        shim = OutputShim(monkeypatch)
        run_benchmark(RunConfig(28, runs=200, warmup_runs=20), KEY, clock=shim.clock)
        assert shim.reads == 4 * 200
        assert shim.inside == 0

    def test_shim_detects_output_in_window(self, monkeypatch):
        # Positive control: an entropy source that prints is caught.
        shim = OutputShim(monkeypatch)

        def chatty(n):
            print("drawing nonce")
            return os.urandom(n)

        run_benchmark(RunConfig(28, runs=5, warmup_runs=0, entropy=chatty), KEY, clock=shim.clock)
        assert shim.inside >= 5

    @pytest.mark.parametrize("kwargs", [
        {"runs": 0}, {"warmup_runs": -1}, {"payload_size": -1},
    ])
    def test_config_validation(self, kwargs):
        args = {"payload_size": 28, **kwargs}
        with pytest.raises(ValueError):
            RunConfig(**args)

    def test_config_defaults(self):
        c = RunConfig(28)
        assert c.runs == 100_000
        assert c.warmup_runs == 1_000


class TestFilter:
    def test_drops_negative(self):
        valid, dropped = filter_invalid(functional_only([5, 7, -3, 9]))
        assert [s.functional_ns for s in valid] == [5, 7, 9]
        assert dropped == 1

    def test_negative_in_any_phase(self):
        samples = [PhaseSample(-1, 2, 3, 4), PhaseSample(1, -2, 3, 4),
                   PhaseSample(1, 2, -3, 4), PhaseSample(1, 2, 3, 4)]
        valid, dropped = filter_invalid(samples)
        assert valid == [PhaseSample(1, 2, 3, 4)]
        assert dropped == 3

    def test_all_valid(self):
        samples = uniform(range(10))
        assert filter_invalid(samples) == (samples, 0)

    def test_all_negative(self):
        valid, dropped = filter_invalid(functional_only([-1, -2, -3]))
        assert valid == [] and dropped == 3
        with pytest.raises(EmptySampleError):
            summarize(valid, dropped)

    @given(st.lists(st.integers(-10**6, 10**6), max_size=200))
    def test_conserves_counts_and_order(self, values):
        samples = functional_only(values)
        valid, dropped = filter_invalid(samples)
        assert len(valid) + dropped == len(samples)
        assert [s.functional_ns for s in valid] == [v for v in values if v >= 0]


def nearest_rank_oracle(values, percent):
    # Smallest observed value with at least percent% of the sample at or below it.
    n = len(values)
    for v in sorted(set(values)):
        if 100 * sum(1 for x in values if x <= v) >= percent * n:
            return v


class TestSummarize:
    def test_constant(self):
        s = summarize(uniform([42] * 100))
        for name in bench.PHASES:
            p = s.phases[name]
            assert p.mean == p.p5 == p.p95 == 42

    def test_one_to_hundred(self):
        s = summarize(uniform(range(1, 101)))
        p = s.phases["functional"]
        assert (p.mean, p.p5, p.p95) == (50.5, 5, 95)

    def test_single(self):
        p = summarize(functional_only([17])).phases["functional"]
        assert p.mean == p.p5 == p.p95 == 17

    def test_empty(self):
        with pytest.raises(EmptySampleError):
            summarize([])

    def test_counts(self):
        s = summarize(uniform([1, 2, 3]), n_dropped=4)
        assert (s.n_total, s.n_valid, s.n_dropped) == (7, 3, 4)

    @given(st.lists(st.integers(0, 10**9), min_size=1, max_size=300))
    def test_percentiles_match_definition(self, values):
        s = summarize(functional_only(values)).phases["functional"]
        assert s.p5 == nearest_rank_oracle(values, 5)
        assert s.p95 == nearest_rank_oracle(values, 95)

    @given(st.lists(st.integers(0, 10**9), min_size=1, max_size=300))
    def test_ordering_invariants(self, values):
        s = summarize(functional_only(values))
        p = s.phases["functional"]
        assert p.min <= p.p5 <= p.p95 <= p.max
        assert p.min <= p.mean <= p.max
        assert summarize(functional_only(values)) == s


class TestBudgets:
    def test_defaults(self):
        assert GOOSE.limit_ns == 4_000_000
        assert IEC_60834_1.limit_ns == 10_000_000
        assert SCADA.limit_ns == 1_000_000_000

    @pytest.mark.parametrize("duration_us,budget,expected", [
        (154.8, GOOSE, 3.87),
        (162.9, GOOSE, 4.07),
        (154.8, IEC_60834_1, 1.548),
    ])
    def test_fraction(self, duration_us, budget, expected):
        assert budget_fraction(duration_us * 1000, budget) == pytest.approx(expected, abs=0.01)

    # Down near the subnormal range the quotient itself loses significand
    # bits, so the bound is checked over plausible nanosecond durations.
    @given(st.one_of(st.just(0.0), st.integers(1, 10**12), st.floats(1e-3, 1e12)),
           st.one_of(st.sampled_from([4e6, 1e7, 1e9]), st.floats(1, 1e12, allow_nan=False)))
    def test_fraction_inverts_within_one_ulp(self, duration, limit):
        b = BudgetSpec("x", limit)
        back = budget_fraction(duration, b) * (b.limit_ns / 100)
        assert abs(back - duration) <= math.ulp(duration)

    def test_verdict_p95_pass(self):
        s = summarize(functional_only([224_200] * 10))
        v = budget_verdict(s, GOOSE, "functional", "p95")
        assert v.passed
        assert v.fraction_pct == pytest.approx(5.61, abs=0.01)

    def test_verdict_boundary_fails(self):
        s = summarize(functional_only([4_000_000]))
        v = budget_verdict(s, GOOSE, "functional", "mean")
        assert not v.passed
        assert v.fraction_pct == 100

    def test_verdict_mean_pass(self):
        s = summarize(functional_only([57_100]))
        v = budget_verdict(s, GOOSE)
        assert v.passed
        assert v.fraction_pct == pytest.approx(1.43, abs=0.01)

    def test_verdict_rejects_unknown_selectors(self):
        s = summarize(functional_only([1]))
        with pytest.raises(ValueError):
            budget_verdict(s, GOOSE, "bogus")
        with pytest.raises(ValueError):
            budget_verdict(s, GOOSE, "functional", "p50")

    @pytest.mark.parametrize("limit", [0, -1])
    def test_non_positive_limit(self, limit):
        with pytest.raises(ValueError):
            BudgetSpec("x", limit)

    def test_parse(self):
        assert BudgetSpec.parse("GOOSE=4") == GOOSE
        assert BudgetSpec.parse("trip=2.5").limit_ns == 2_500_000
        for bad in ("GOOSE", "=4", "x=abc", "x=0"):
            with pytest.raises(ValueError):
                BudgetSpec.parse(bad)


class TestPeakMemory:
    def test_positive_and_monotone(self):
        first = bench.peak_memory()
        assert first is not None and first > 0
        blob = bytearray(32 * 1024 * 1024)
        second = bench.peak_memory()
        del blob
        assert second >= first

    def test_unavailable_is_none(self, monkeypatch):
        import resource

        class NoUsage:
            ru_maxrss = 0

        monkeypatch.setattr(resource, "getrusage", lambda who: NoUsage())
        monkeypatch.setattr(bench, "Path", lambda p: (_ for _ in ()).throw(OSError()))
        assert bench.peak_memory() is None

    def test_heap_peak_constant_across_sizes(self):
        # The Python-heap part of a campaign's footprint must not depend on
        # payload size by more than one page.
        run_benchmark(RunConfig(224, runs=300, warmup_runs=10), KEY)
        peaks = []
        for size in (28, 56, 112, 224):
            tracemalloc.start()
            run_benchmark(RunConfig(size, runs=300, warmup_runs=10), KEY)
            peaks.append(tracemalloc.get_traced_memory()[1])
            tracemalloc.stop()
        assert max(peaks) - min(peaks) <= 4096

    def test_rss_stable_across_sizes(self):
        # One fresh process per size, as each campaign would run. CPython's
        # own start-up RSS varies by a few hundred KiB between identical runs,
        # so the tolerance is 1 MiB rather than one page.
        code = ("import os,sys; from icsaead import bench; "
                "bench.run_campaign(bench.RunConfig(int(sys.argv[1]), runs=5000, warmup_runs=50), "
                "os.urandom(32)); print(bench.peak_memory())")
        peaks = [
            int(subprocess.run([sys.executable, "-c", code, str(size)], check=True,
                               capture_output=True, text=True).stdout)
            for size in (28, 56, 112, 224)
        ]
        assert max(peaks) - min(peaks) <= 1024 * 1024


class TestEnvironmentProbe:
    def test_fields(self):
        env = bench.environment_probe()
        assert env["clock_resolution_ns"] > 0
        assert env["clock_monotonic"] is True
        assert "frequency scaling" in env["warning"]
        assert env["advice"]

    def test_policy_unavailable(self, monkeypatch):
        monkeypatch.setattr(bench, "_read_sys", lambda path: None)
        assert bench.frequency_policy() == "unavailable"
        assert bench.environment_probe()["frequency_policy"] == "unavailable"

    def test_policy_reported(self, monkeypatch):
        files = {
            "/sys/devices/system/cpu/cpu0/cpufreq/scaling_governor": "powersave",
            "/sys/devices/system/cpu/cpu0/cpufreq/scaling_driver": "intel_pstate",
            "/sys/devices/system/cpu/intel_pstate/no_turbo": "0",
        }
        monkeypatch.setattr(bench, "_read_sys", files.get)
        assert bench.frequency_policy() == "governor=powersave, driver=intel_pstate, turbo=on"

    def test_monotonic_reads(self):
        reads = [time.perf_counter_ns() for _ in range(10_000)]
        assert all(b >= a for a, b in zip(reads, reads[1:]))

    def test_resolution_with_coarse_clock(self):
        ticks = iter(range(0, 10**9, 250))
        assert bench.measure_clock_resolution(lambda: next(ticks), reads=11) == 250


class TestCampaign:
    def test_run_campaign(self):
        result = bench.run_campaign(RunConfig(28, runs=200, warmup_runs=10, label="t"), KEY)
        assert result.summary.n_total == 200
        assert result.summary.n_valid + result.summary.n_dropped == 200
        assert len(result.verdicts) == 6
        assert {v.budget for v in result.verdicts} == {"GOOSE", "IEC 60834-1", "SCADA"}
        assert result.nonce_collisions == 0
        assert result.peak_memory_bytes > 0

    def test_judge_without_valid_samples(self):
        result = bench.judge(RunConfig(28, runs=2), functional_only([-1, -1]))
        assert result.summary is None
        assert result.verdicts == []
        assert (result.n_total, result.n_dropped) == (2, 2)
