"""Monte Carlo experiment harness.

Runs seeded, embarrassingly parallel trials of the dynamics, aggregates
per-trial records into point estimates with confidence radii, and writes
CSV (per-trial) plus JSON (aggregate) outputs atomically.  Per-trial RNG
streams are keyed by (master seed, trial index), so results are identical
for any worker count.
"""

import csv
import json
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np
from scipy import stats

from . import rng as rngmod
from .dynamics import (
    SignalAssignment,
    Schedule,
    StopCondition,
    run,
    announcement_fractions,
)
from .errors import InvalidParameterError
from .graphs import (
    gen_balanced_mary,
    gen_baseline,
    gen_pa_clock,
    gen_preferential_attachment,
    gen_random_recursive,
    diameter,
)
from .oracle import negbinom_pmf

RANDOM_FAMILIES = ("pa", "pa_clock", "rrt")
DETERMINISTIC_FAMILIES = ("mary", "line", "star", "complete")
MAX_TRUNCATION_RATE = 0.01


@dataclass
class ExperimentConfig:
    name: str
    family: str
    n: int
    delta: float
    trials: int
    seed: int
    m_ary: int = 2
    depth: Optional[int] = None
    max_steps: Optional[int] = None
    measure_at: Optional[int] = None
    forced_incorrect: tuple = ()
    output_dir: Optional[str] = None
    thresholds: dict = field(default_factory=dict)
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidParameterError("trial count must be >= 1")
        if not (0 < self.delta < 0.5):
            raise InvalidParameterError("delta must lie in (0, 1/2)")
        if self.family not in RANDOM_FAMILIES + DETERMINISTIC_FAMILIES:
            raise InvalidParameterError(f"unknown graph family {self.family!r}")
        if self.family == "mary" and self.depth is None:
            raise InvalidParameterError("mary family needs a depth")

    @classmethod
    def from_file(cls, path):
        if str(path).endswith(".toml"):
            try:
                import tomllib as toml_mod
            except ModuleNotFoundError:
                import tomli as toml_mod

            with open(path, "rb") as fh:
                raw = toml_mod.load(fh)
        else:
            with open(path) as fh:
                raw = json.load(fh)
        if "forced_incorrect" in raw:
            raw["forced_incorrect"] = tuple(raw["forced_incorrect"])
        return cls(**raw)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list               # one dict per trial, source of truth
    aggregate: dict
    passed: bool
    truncated_trials: int
    wall_seconds: float
    total_steps: int


def build_graph(config, trial):
    """Graph for one trial: fresh for random families, shared otherwise."""
    f = config.family
    if f in RANDOM_FAMILIES:
        seed = int(
            rngmod.stream(config.seed, rngmod.GRAPH, trial).integers(1 << 62)
        )
        if f == "pa":
            return gen_preferential_attachment(config.n, seed)
        if f == "pa_clock":
            return gen_pa_clock(config.n, seed)
        return gen_random_recursive(config.n, seed)
    if f == "mary":
        return gen_balanced_mary(config.m_ary, config.depth, None)
    return gen_baseline(f, config.n)


def _stop(config, g):
    if config.max_steps is not None:
        return StopCondition(max_steps=config.max_steps)
    return None


def default_measure(trace, config):
    correct, incorrect, undecided = announcement_fractions(trace.final_state)
    n = trace.graph.n
    return {
        "correct_fraction": correct,
        "incorrect_fraction": incorrect,
        "undecided_fraction": undecided,
        "correct_majority": int(correct * n > n / 2),
        "consensus": int(undecided == 0.0 and (correct == 1.0 or incorrect == 1.0)),
        "correct_consensus": int(correct == 1.0),
        "stabilization_step": -1 if trace.stabilization_step is None else trace.stabilization_step,
        "steps": trace.final_state.t,
        "truncated": int(trace.truncated),
    }


def run_trial(config, trial, measure=default_measure, snapshot_at=None, graph=None):
    g = graph if graph is not None else build_graph(config, trial)
    signals = SignalAssignment.sample(g.n, config.delta, config.seed, trial)
    schedule = Schedule.seeded(config.seed, trial)
    trace = run(
        g,
        signals,
        schedule,
        stop=_stop(config, g),
        forced_incorrect=config.forced_incorrect,
        record_events=False,
        snapshot_at=snapshot_at,
    )
    record = {"trial": trial, "seed": config.seed}
    record.update(measure(trace, config))
    return record


def _trial_batch(args):
    config, trials, measure, snapshot_at = args
    graph = None
    if config.family in DETERMINISTIC_FAMILIES:
        graph = build_graph(config, 0)  # shared; step cap computed once
        from .dynamics import default_step_cap

        default_step_cap(graph)
    return [run_trial(config, t, measure, snapshot_at, graph) for t in trials]


def binomial_radius(p_hat, trials, z=1.96):
    return z * math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / trials)


def aggregate_records(records, config):
    """Recompute all aggregates from per-trial records."""
    agg = {
        "name": config.name,
        "family": config.family,
        "n": config.n,
        "delta": config.delta,
        "trials": len(records),
        "seed": config.seed,
    }
    numeric = [
        k
        for k in records[0]
        if k not in ("trial", "seed") and isinstance(records[0][k], (int, float))
    ]
    for k in numeric:
        vals = np.array([r[k] for r in records], dtype=float)
        agg[f"mean_{k}"] = float(vals.mean())
        agg[f"std_{k}"] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
    trunc = sum(r.get("truncated", 0) for r in records)
    agg["truncated_trials"] = int(trunc)
    agg["truncation_rate"] = trunc / len(records)
    return agg


def run_experiment(config, measure=default_measure, snapshot_at=None, write=True):
    """Execute all trials, aggregate, judge thresholds, and write outputs."""
    t0 = time.monotonic()
    trials = list(range(config.trials))
    if config.workers > 1:
        # fixed-size contiguous batches keyed by trial index: worker-count invariant
        batches = [trials[i : i + 64] for i in range(0, len(trials), 64)]
        args = [(config, b, measure, snapshot_at) for b in batches]
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            parts = list(pool.map(_trial_batch, args))
        records = [r for part in parts for r in part]
    else:
        records = _trial_batch((config, trials, measure, snapshot_at))
    records.sort(key=lambda r: r["trial"])
    agg = aggregate_records(records, config)
    passed = agg["truncation_rate"] <= MAX_TRUNCATION_RATE
    for key, (op, bound) in config.thresholds.items():
        value = agg.get(key)
        ok = value is not None and (value >= bound if op == ">=" else value <= bound)
        agg[f"threshold_{key}"] = {"op": op, "bound": bound, "value": value, "ok": ok}
        passed = passed and ok
    result = ExperimentResult(
        config=config,
        records=records,
        aggregate=agg,
        passed=passed,
        truncated_trials=agg["truncated_trials"],
        wall_seconds=time.monotonic() - t0,
        total_steps=int(sum(r.get("steps", 0) for r in records)),
    )
    if write and config.output_dir:
        write_result(result)
    return result


def _atomic_write(path, writer):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_result(result, output_dir=None):
    outdir = output_dir or result.config.output_dir or "."
    base = os.path.join(outdir, result.config.name)

    def write_csv(fh):
        w = csv.DictWriter(fh, fieldnames=list(result.records[0].keys()))
        w.writeheader()
        w.writerows(result.records)

    def write_json(fh):
        payload = {
            "config": asdict(result.config),
            "aggregate": result.aggregate,
            "passed": result.passed,
            "wall_seconds": result.wall_seconds,
            "total_steps": result.total_steps,
        }
        json.dump(payload, fh, indent=1)

    _atomic_write(base + ".csv", write_csv)
    _atomic_write(base + ".json", write_json)
    return base + ".csv", base + ".json"


# ---------------------------------------------------------------------------
# claim-specific measurements


def measurement_step(n):
    """floor(n ln n / (32 ln ln n)); needs n >= 16 so ln ln n > 0."""
    if n < 16:
        raise InvalidParameterError("measurement step defined for n >= 16 only")
    return int(n * math.log(n) / (32 * math.log(math.log(n))))


def correct_count_threshold(n, delta, T):
    return (0.5 + delta / 2 - math.exp(-T / n)) * n


def majority_at_T(config):
    """Fraction of trials whose step-T snapshot clears the correct-count bound."""
    T = config.measure_at if config.measure_at is not None else None

    def measure(trace, cfg):
        n = trace.graph.n
        t = T if T is not None else measurement_step(n)
        snap = trace.snapshot
        correct = int((snap == 1).sum())
        rec = default_measure(trace, cfg)
        rec["correct_at_T"] = correct
        rec["measure_step"] = t
        rec["indicator"] = int(correct >= correct_count_threshold(n, cfg.delta, t))
        return rec

    snapshot_at = T if T is not None else measurement_step(config.n)
    result = run_experiment(config, measure=measure, snapshot_at=snapshot_at)
    frac = result.aggregate["mean_indicator"]
    result.aggregate["indicator_radius"] = binomial_radius(frac, config.trials)
    return result


def stabilization_bound(g):
    n = g.n
    if g._diameter is None:
        g._diameter = diameter(g)
    return 8 * max(2 * math.log(n) if n > 1 else 0.0, g._diameter + 1) * n


def stabilization_stats(config):
    """Quantiles of the last-change step and the bound-violation rate."""

    def measure(trace, cfg):
        rec = default_measure(trace, cfg)
        bound = stabilization_bound(trace.graph)
        rec["bound"] = bound
        stab = trace.stabilization_step
        rec["violation"] = int(stab is None or stab > bound)
        return rec

    result = run_experiment(config, measure=measure)
    steps = np.array(
        [r["stabilization_step"] for r in result.records if r["stabilization_step"] >= 0]
    )
    agg = result.aggregate
    if len(steps):
        for q in (0.5, 0.9, 0.99, 1.0):
            agg[f"stabilization_q{q}"] = float(np.quantile(steps, q))
    agg["violation_rate"] = agg["mean_violation"]
    return result


def sample_critical_times(n, distance, samples, seed, trial=0):
    """Draw first-passage chain times along a path of the given distance.

    The chain time is the step of the (d+1)-th ordered hit in a uniform
    node schedule: first an occurrence of node 0, then node 1 strictly
    later, and so on through node d.  Consecutive samples consume disjoint
    stretches of one seeded schedule stream.
    """
    if distance < 0 or n < distance + 1:
        raise InvalidParameterError("need 0 <= distance < n")
    gen = rngmod.stream(seed, rngmod.SCHEDULE, trial)
    path_nodes = list(range(distance + 1))
    need = int(samples * (distance + 1) * n * 2 + 1000)
    sched = gen.integers(0, n, size=need, dtype=np.int64)
    positions = {v: np.nonzero(sched == v)[0] for v in path_nodes}
    out = np.empty(samples, dtype=np.int64)
    cur = -1
    for s in range(samples):
        start = cur
        for v in path_nodes:
            pos = positions[v]
            i = np.searchsorted(pos, cur, side="right")
            while i >= len(pos):
                # stream exhausted: extend and rebuild hit positions
                extra = gen.integers(0, n, size=need, dtype=np.int64)
                sched = np.concatenate([sched, extra])
                positions = {u: np.nonzero(sched == u)[0] for u in path_nodes}
                pos = positions[v]
                i = np.searchsorted(pos, cur, side="right")
            cur = int(pos[i])
        out[s] = cur - start
    return out


@dataclass
class GofReport:
    statistic: float
    p_value: float
    dof: int
    bins: int
    samples: int


def chi_square_gof(samples, pmf, support_start, min_expected=5.0):
    """Chi-square goodness of fit of integer samples against a pmf.

    Bins cover support_start..max(samples) plus an aggregated upper tail;
    adjacent bins are merged until every expected count is >= min_expected.
    """
    if len(samples) < 1000:
        raise InvalidParameterError("goodness-of-fit needs >= 1000 samples")
    m = len(samples)
    hi = int(np.max(samples))
    values = np.arange(support_start, hi + 1)
    probs = np.array([pmf(int(t)) for t in values])
    tail = max(1.0 - probs.sum(), 0.0)
    counts = np.bincount(np.asarray(samples) - support_start, minlength=len(values) + 1)[
        : len(values) + 1
    ].astype(float)
    expected = np.append(probs, tail) * m
    observed = counts
    # merge left-to-right until every expected bin mass clears the floor
    merged_o, merged_e = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            merged_o.append(acc_o)
            merged_e.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0:
        if merged_e:
            merged_o[-1] += acc_o
            merged_e[-1] += acc_e
        else:
            merged_o.append(acc_o)
            merged_e.append(acc_e)
    merged_o = np.array(merged_o)
    merged_e = np.array(merged_e) * (m / np.sum(merged_e))
    stat, p = stats.chisquare(merged_o, merged_e)
    return GofReport(
        statistic=float(stat),
        p_value=float(p),
        dof=len(merged_o) - 1,
        bins=len(merged_o),
        samples=m,
    )


def critical_time_gof(n, distance, samples, seed, null_successes=None):
    """Fit chain-time samples to NB(d+1, 1/n); an off-by-one null has power."""
    data = sample_critical_times(n, distance, samples, seed)
    r = null_successes if null_successes is not None else distance + 1
    return chi_square_gof(data, lambda t: negbinom_pmf(t, r, 1.0 / n), support_start=distance + 1)


@dataclass
class SafeSweepRow:
    degree: int
    corrupted: int
    trials: int
    unsafe_rate: float
    radius: float


def safe_probability_sweep(degrees, delta, trials, seed, corrupted_sizes=(0,)):
    """Unsafe rate of star centers against a few hard-coded-incorrect leaves.

    For degree d the star has n = d+1 nodes, the horizon is n*d steps, and
    the corrupted set holds the highest-numbered leaves.  Reports the fitted
    constant c with unsafe_rate <= c/degree across all rows.
    """
    from .analysis import is_safe_thru

    rows = []
    for deg in degrees:
        n = deg + 1
        g = gen_baseline("star", n)
        horizon = n * deg
        for a in corrupted_sizes:
            forced = tuple(range(n - a, n))
            unsafe = 0
            for trial in range(trials):
                signals = SignalAssignment.sample(g.n, delta, seed, trial)
                schedule = Schedule.seeded(seed, trial)
                trace = run(
                    g,
                    signals,
                    schedule,
                    stop=StopCondition(max_steps=horizon),
                    forced_incorrect=forced,
                )
                if not is_safe_thru(trace, 0, horizon):
                    unsafe += 1
            rate = unsafe / trials
            rows.append(
                SafeSweepRow(
                    degree=deg,
                    corrupted=a,
                    trials=trials,
                    unsafe_rate=rate,
                    radius=binomial_radius(rate, trials),
                )
            )
    fitted_c = max((row.unsafe_rate * row.degree for row in rows), default=0.0)
    return rows, fitted_c


def mc_correct_majority(g, delta, trials, seed):
    """Monte Carlo Pr[stabilized correct majority] with a binomial SE."""
    hits = 0
    for trial in range(trials):
        signals = SignalAssignment.sample(g.n, delta, seed, trial)
        schedule = Schedule.seeded(seed, trial)
        trace = run(g, signals, schedule, record_events=False)
        if int((trace.final_state.announcements == 1).sum()) * 2 > g.n:
            hits += 1
    p = hits / trials
    se = math.sqrt(max(p * (1 - p), 1e-12) / trials)
    return p, se
