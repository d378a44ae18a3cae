"""Simulation laboratory for asynchronous majority dynamics on trees.

One uniformly random node per step adopts the majority announcement of its
neighbors, breaking ties toward its private signal.  The package bundles
graph generators (preferential attachment and friends), a compiled
simulation engine with full event traces, structural trace analysis
(critical times, finalization, influence), exact small-instance oracles,
and a reproducible Monte Carlo experiment harness.
"""

from .dynamics import (
    BOT,
    RunTrace,
    Schedule,
    SignalAssignment,
    StopCondition,
    run,
)
from .errors import MajorityLabError
from .graphs import (
    Graph,
    gen_balanced_mary,
    gen_baseline,
    gen_pa_clock,
    gen_preferential_attachment,
    gen_random_recursive,
)

__version__ = "0.1.0"

__all__ = [
    "BOT",
    "Graph",
    "MajorityLabError",
    "RunTrace",
    "Schedule",
    "SignalAssignment",
    "StopCondition",
    "gen_balanced_mary",
    "gen_baseline",
    "gen_pa_clock",
    "gen_preferential_attachment",
    "gen_random_recursive",
    "run",
]
