"""Exact ground truth for tiny instances.

Closed-form step distributions plus a full absorbing-Markov-chain analysis
of the announcement process over all signal assignments.  Monte Carlo
results from the simulation engine are validated against these numbers.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .dynamics import run_reference, SignalAssignment
from .errors import CapacityError, InvalidParameterError, StructuralError

MAX_EXACT_NODES = 8
_RESIDUAL_TOL = 1e-12
_MAX_ITER = 2_000_000


def negbinom_pmf(t, successes, rate):
    """P[sum of ``successes`` geometric(rate) variables equals t].

    pmf(t) = C(t-1, r-1) p^r (1-p)^(t-r), computed in log space.
    """
    r, p = successes, rate
    if r < 1 or not (0 < p <= 1):
        raise InvalidParameterError("need successes >= 1 and rate in (0, 1]")
    if t < r:
        return 0.0
    if p == 1.0:
        return 1.0 if t == r else 0.0
    log_pmf = (
        math.lgamma(t)
        - math.lgamma(r)
        - math.lgamma(t - r + 1)
        + r * math.log(p)
        + (t - r) * math.log1p(-p)
    )
    return math.exp(log_pmf)


def geometric_pmf(t, rate):
    return negbinom_pmf(t, 1, rate)


@njit(cache=True)
def _build_transitions(indptr, indices, bits):
    """next_state[s, v] for announcement profiles encoded base 3 (0=none,1=0,2=1)."""
    n = indptr.shape[0] - 1
    nstates = 3 ** n
    pow3 = np.empty(n, dtype=np.int64)
    acc = 1
    for v in range(n):
        pow3[v] = acc
        acc *= 3
    nxt = np.empty((nstates, n), dtype=np.int64)
    digits = np.empty(n, dtype=np.int64)
    for s in range(nstates):
        rem = s
        for v in range(n):
            digits[v] = rem % 3
            rem //= 3
        for v in range(n):
            c1 = 0
            c0 = 0
            for k in range(indptr[v], indptr[v + 1]):
                d = digits[indices[k]]
                if d == 2:
                    c1 += 1
                elif d == 1:
                    c0 += 1
            if c1 > c0:
                new = 2
            elif c1 < c0:
                new = 1
            else:
                new = 2 if bits[v] == 1 else 1
            nxt[s, v] = s + (new - digits[v]) * pow3[v]
    return nxt


@njit(cache=True)
def _solve_absorption(nxt, n, tol, max_iter):
    """Absorption mass per state from the all-unannounced start.

    Returns (absorbed mass per state, expected steps, residual transient
    mass, iterations used).
    """
    nstates = nxt.shape[0]
    absorbing = np.zeros(nstates, dtype=np.bool_)
    for s in range(nstates):
        rem = s
        announced = True
        for v in range(n):
            if rem % 3 == 0:
                announced = False
                break
            rem //= 3
        if announced:
            fixed = True
            for v in range(n):
                if nxt[s, v] != s:
                    fixed = False
                    break
            if fixed:
                absorbing[s] = True
    p = np.zeros(nstates)
    absorbed = np.zeros(nstates)
    p[0] = 1.0
    inv_n = 1.0 / n
    expected_steps = 0.0
    transient = 1.0
    iters = 0
    while transient > tol and iters < max_iter:
        expected_steps += transient
        q = np.zeros(nstates)
        for s in range(nstates):
            ps = p[s]
            if ps > 0.0:
                w = ps * inv_n
                for v in range(n):
                    q[nxt[s, v]] += w
        transient = 0.0
        for s in range(nstates):
            if absorbing[s]:
                absorbed[s] += q[s]
                q[s] = 0.0
            else:
                transient += q[s]
        p = q
        iters += 1
    return absorbed, expected_steps, transient, iters


def _decode(s, n):
    out = []
    for _ in range(n):
        d = s % 3
        out.append(-1 if d == 0 else d - 1)
        s //= 3
    return tuple(out)


@dataclass
class AbsorptionResult:
    graph_hash: str
    delta: float
    per_assignment: dict        # bits tuple -> {profile tuple: probability}
    p_correct_majority: float
    p_consensus: float
    p_correct_consensus: float
    expected_stabilization_step: float
    residual: float


def exact_absorption(g, delta, tol=_RESIDUAL_TOL):
    """Exact stabilization-outcome distribution for a small graph.

    Builds the announcement chain for each of the 2^n signal assignments,
    solves for absorption probabilities by iterative propagation, and
    aggregates under the biased product measure on signals.
    """
    n = g.n
    if n > MAX_EXACT_NODES:
        raise CapacityError(f"exact absorption limited to n <= {MAX_EXACT_NODES}")
    if not (0 < delta < 0.5):
        raise InvalidParameterError("delta must lie in (0, 1/2)")
    indptr, indices = g.csr()
    per_assignment = {}
    p_major = 0.0
    p_cons = 0.0
    p_correct_cons = 0.0
    exp_steps = 0.0
    worst_residual = 0.0
    for a in range(2 ** n):
        bits = np.array([(a >> v) & 1 for v in range(n)], dtype=np.int8)
        weight = float(
            (0.5 + delta) ** int(bits.sum()) * (0.5 - delta) ** int(n - bits.sum())
        )
        nxt = _build_transitions(indptr, indices, bits)
        absorbed, steps, residual, _ = _solve_absorption(nxt, n, tol, _MAX_ITER)
        if residual > math.sqrt(tol):
            raise StructuralError(
                "transient mass did not vanish: non-absorbing recurrent class?"
            )
        worst_residual = max(worst_residual, residual)
        dist = {}
        for s in np.nonzero(absorbed)[0]:
            profile = _decode(int(s), n)
            prob = float(absorbed[s])
            dist[profile] = prob
            ones = sum(1 for x in profile if x == 1)
            if ones > n / 2:
                p_major += weight * prob
            if ones == n:
                p_cons += weight * prob
                p_correct_cons += weight * prob
            elif ones == 0:
                p_cons += weight * prob
        per_assignment[tuple(int(b) for b in bits)] = dist
        exp_steps += weight * steps
    return AbsorptionResult(
        graph_hash=g.content_hash(),
        delta=delta,
        per_assignment=per_assignment,
        p_correct_majority=p_major,
        p_consensus=p_cons,
        p_correct_consensus=p_correct_cons,
        expected_stabilization_step=exp_steps,
        residual=worst_residual,
    )


@dataclass
class BooleanVerdict:
    monotone: bool
    odd: bool
    min_correct_prob: float  # min over (v, t >= first announce) of Pr[C^t(v) = 1]
    ok: bool = field(init=False)

    def __post_init__(self):
        self.ok = self.monotone and self.odd

    def __bool__(self):
        return self.ok


def exhaustive_boolean_check(g, schedule_nodes, delta=0.3):
    """Check monotonicity and oddness of every announced C^t(v).

    Runs the pure-Python reference dynamics for all 2^n signal assignments
    under the fixed schedule, then compares announcement histories pointwise.
    Also evaluates min Pr[C^t(v) = 1] under the biased product measure over
    all v and t at or after v's first announcement.
    """
    n = g.n
    if n > 4:
        raise CapacityError("exhaustive check limited to n <= 4")
    steps = len(schedule_nodes)
    histories = {}
    for a in range(2 ** n):
        bits = [(a >> v) & 1 for v in range(n)]
        signals = SignalAssignment.explicit(bits, delta)
        state_hist = np.full((steps + 1, n), -1, dtype=np.int8)
        state, events = run_reference(g, signals, schedule_nodes)
        cur = np.full(n, -1, dtype=np.int8)
        for (t, v, _prev, nxt) in events:
            cur[v] = nxt
            state_hist[t] = cur
        histories[a] = state_hist

    monotone = True
    for a in range(2 ** n):
        for b in range(2 ** n):
            if a & b == a and a != b:  # a <= b bitwise
                if np.any(
                    (histories[a] > histories[b]) & (histories[a] >= 0)
                ):
                    monotone = False
    odd = True
    full = 2 ** n - 1
    for a in range(2 ** n):
        comp = histories[a ^ full]
        h = histories[a]
        announced = h >= 0
        if not np.array_equal(announced, comp >= 0):
            odd = False
        elif np.any(comp[announced] != 1 - h[announced]):
            odd = False

    weights = np.array(
        [
            math.prod(
                (0.5 + delta) if (a >> v) & 1 else (0.5 - delta) for v in range(n)
            )
            for a in range(2 ** n)
        ]
    )
    min_prob = 1.0
    stacked = np.stack([histories[a] for a in range(2 ** n)])  # (2^n, steps+1, n)
    for v in range(n):
        for t in range(1, steps + 1):
            if stacked[0, t, v] < 0:
                continue  # announced-status is schedule-determined, same for all a
            prob = float(weights[stacked[:, t, v] == 1].sum())
            min_prob = min(min_prob, prob)
    return BooleanVerdict(monotone=monotone, odd=odd, min_correct_prob=min_prob)


# ---------------------------------------------------------------------------
# disk cache for regression tests


def cache_key(g, delta):
    return f"{g.content_hash()}_{delta:.6f}"


def save_result(result, path):
    payload = {
        "graph_hash": result.graph_hash,
        "delta": result.delta,
        "p_correct_majority": result.p_correct_majority,
        "p_consensus": result.p_consensus,
        "p_correct_consensus": result.p_correct_consensus,
        "expected_stabilization_step": result.expected_stabilization_step,
        "residual": result.residual,
        "per_assignment": {
            ",".join(map(str, bits)): {
                ",".join(map(str, prof)): prob for prof, prob in dist.items()
            }
            for bits, dist in result.per_assignment.items()
        },
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)


def load_result(path):
    with open(path) as fh:
        payload = json.load(fh)
    per_assignment = {
        tuple(int(x) for x in bits.split(",")): {
            tuple(int(x) for x in prof.split(",")): prob
            for prof, prob in dist.items()
        }
        for bits, dist in payload["per_assignment"].items()
    }
    return AbsorptionResult(
        graph_hash=payload["graph_hash"],
        delta=payload["delta"],
        per_assignment=per_assignment,
        p_correct_majority=payload["p_correct_majority"],
        p_consensus=payload["p_consensus"],
        p_correct_consensus=payload["p_correct_consensus"],
        expected_stabilization_step=payload["expected_stabilization_step"],
        residual=payload["residual"],
    )
