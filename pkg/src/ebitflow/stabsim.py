"""Stabilizer-circuit simulation of swap schedules under Pauli noise.

The simulator executes a ``SwapSchedule`` on a binary symplectic tableau
(destabilizer/stabilizer rows with phase bits), which keeps every operation
polynomial in the qubit count. Supported noise:

* ``swap_depolarize_p``: before each Bell measurement, with this probability
  a uniformly random two-qubit Pauli (identity included) hits the two
  measured qubits. At probability 1 the measured pair is fully depolarized.
* ``pair_error``: per edge, the probability that a freshly created pair is
  replaced by a uniformly random Bell state, i.e. by the maximally mixed
  two-qubit state. A pair wrong with probability q sits at trace distance
  (3/4) q from the ideal pair, so a trace-distance budget d converts to a
  replacement probability of (4/3) d.

Besides Monte-Carlo estimation this module computes exact delivered-state
error for small schedules: every Pauli-noise branch delivers a product of
Bell states, so the output mixture is diagonal in the Bell-product basis
and trace distances reduce to exact rational arithmetic over per-site
branch weights.

Trace distance here is (1/2) the trace norm of the difference, so the
distance between a Bell state and the maximally mixed two-qubit state
is 3/4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ScheduleViolation, TooLarge, ValidationError
from .netgraph import EdgeKey, NetworkGraph, as_fraction
from .pathplan import (
    BellMeasure,
    CreateBellPair,
    PauliCorrect,
    SwapSchedule,
)

# Exact computations are contracted for at most this many qubits.
EXACT_QUBIT_LIMIT = 12

# Two-sided 95% normal quantile, used for Wilson intervals.
WILSON_Z = 1.959963984540054


class StabilizerState:
    """Pure stabilizer state on ``n`` qubits, initially all-zeros.

    Rows 0..n-1 of the tableau hold destabilizers, rows n..2n-1 hold
    stabilizers. ``r`` holds the phase exponent of each generator mod 4
    (generators stay at 0 or 2, meaning +1 or -1).
    """

    def __init__(self, n: int) -> None:
        if n < 0:
            raise ValidationError("qubit count must be non-negative")
        self.n = n
        self.x = np.zeros((2 * n, n), dtype=np.int8)
        self.z = np.zeros((2 * n, n), dtype=np.int8)
        self.r = np.zeros(2 * n, dtype=np.int64)
        for i in range(n):
            self.x[i, i] = 1
            self.z[n + i, i] = 1

    def h(self, q: int) -> None:
        self.r = (self.r + 2 * (self.x[:, q] * self.z[:, q]).astype(np.int64)) % 4
        self.x[:, q], self.z[:, q] = self.z[:, q].copy(), self.x[:, q].copy()

    def cnot(self, control: int, target: int) -> None:
        sign = (
            self.x[:, control]
            * self.z[:, target]
            * (self.x[:, target] ^ self.z[:, control] ^ 1)
        )
        self.r = (self.r + 2 * sign.astype(np.int64)) % 4
        self.x[:, target] ^= self.x[:, control]
        self.z[:, control] ^= self.z[:, target]

    def apply_x(self, q: int) -> None:
        self.r = (self.r + 2 * self.z[:, q].astype(np.int64)) % 4

    def apply_z(self, q: int) -> None:
        self.r = (self.r + 2 * self.x[:, q].astype(np.int64)) % 4

    def apply_y(self, q: int) -> None:
        self.r = (self.r + 2 * (self.x[:, q] ^ self.z[:, q]).astype(np.int64)) % 4

    @staticmethod
    def _phase_exponent(x1, z1, x2, z2) -> int:
        """Exponent of i contributed by multiplying Pauli row 1 into row 2."""
        g = np.zeros(x1.shape, dtype=np.int64)
        both = (x1 == 1) & (z1 == 1)
        g[both] = z2[both].astype(np.int64) - x2[both]
        only_x = (x1 == 1) & (z1 == 0)
        g[only_x] = z2[only_x].astype(np.int64) * (2 * x2[only_x].astype(np.int64) - 1)
        only_z = (x1 == 0) & (z1 == 1)
        g[only_z] = x2[only_z].astype(np.int64) * (1 - 2 * z2[only_z].astype(np.int64))
        return int(g.sum())

    def _rowsum(self, h: int, i: int) -> None:
        """Multiply generator ``i`` into generator ``h``."""
        self.r[h] = (
            self.r[h]
            + self.r[i]
            + self._phase_exponent(self.x[i], self.z[i], self.x[h], self.z[h])
        ) % 4
        self.x[h] ^= self.x[i]
        self.z[h] ^= self.z[i]

    def measure(self, q: int, rng: np.random.Generator) -> int:
        """Measure qubit ``q`` in the computational basis; returns 0 or 1."""
        n = self.n
        pivot = None
        for row in range(n, 2 * n):
            if self.x[row, q]:
                pivot = row
                break
        if pivot is not None:
            for row in range(2 * n):
                if row != pivot and self.x[row, q]:
                    self._rowsum(row, pivot)
            self.x[pivot - n] = self.x[pivot]
            self.z[pivot - n] = self.z[pivot]
            self.r[pivot - n] = self.r[pivot]
            self.x[pivot] = 0
            self.z[pivot] = 0
            outcome = int(rng.integers(2))
            self.z[pivot, q] = 1
            self.r[pivot] = 2 * outcome
            return outcome
        # Outcome determined: accumulate the stabilizer product selected by
        # the destabilizers that touch q with an X.
        xs = np.zeros(n, dtype=np.int8)
        zs = np.zeros(n, dtype=np.int8)
        rs = 0
        for j in range(n):
            if self.x[j, q]:
                rs = (
                    rs
                    + self.r[n + j]
                    + self._phase_exponent(self.x[n + j], self.z[n + j], xs, zs)
                ) % 4
                xs ^= self.x[n + j]
                zs ^= self.z[n + j]
        assert rs in (0, 2)
        return 0 if rs == 0 else 1

    def expectation(self, xs: Sequence[int], zs: Sequence[int]) -> int:
        """Expectation of the +1-phase Pauli with X part ``xs``, Z part ``zs``.

        Returns +1 or -1 when the Pauli (up to sign) is in the stabilizer
        group, 0 otherwise.
        """
        n = self.n
        px = np.asarray(xs, dtype=np.int8)
        pz = np.asarray(zs, dtype=np.int8)
        stab_x, stab_z = self.x[n:], self.z[n:]
        anti = ((stab_x & pz).sum(axis=1) + (stab_z & px).sum(axis=1)) % 2
        if anti.any():
            return 0
        acc_x = np.zeros(n, dtype=np.int8)
        acc_z = np.zeros(n, dtype=np.int8)
        acc_r = 0
        for j in range(n):
            overlap = int((self.x[j] & pz).sum() + (self.z[j] & px).sum()) % 2
            if overlap:
                acc_r = (
                    acc_r
                    + self.r[n + j]
                    + self._phase_exponent(self.x[n + j], self.z[n + j], acc_x, acc_z)
                ) % 4
                acc_x ^= self.x[n + j]
                acc_z ^= self.z[n + j]
        if not (np.array_equal(acc_x, px) and np.array_equal(acc_z, pz)):
            return 0
        assert acc_r in (0, 2)
        return 1 if acc_r == 0 else -1

    def pair_expectations(self, qa: int, qb: int) -> tuple[int, int]:
        """Signs of XX and ZZ on a qubit pair (+1, -1, or 0 each)."""
        xs = np.zeros(self.n, dtype=np.int8)
        zs = np.zeros(self.n, dtype=np.int8)
        xs[qa] = xs[qb] = 1
        xx = self.expectation(xs, np.zeros(self.n, dtype=np.int8))
        zs[qa] = zs[qb] = 1
        zz = self.expectation(np.zeros(self.n, dtype=np.int8), zs)
        return xx, zz


@dataclass(frozen=True)
class NoiseModel:
    """Pauli noise parameters for schedule execution.

    Attributes:
        swap_depolarize_p: Two-qubit depolarizing probability applied to the
            measured qubits of every Bell measurement.
        pair_error: Per-edge probability that a created pair is replaced by
            a uniformly random Bell state.
    """

    swap_depolarize_p: Fraction = Fraction(0)
    pair_error: Mapping[EdgeKey, Fraction] = field(default_factory=dict)

    def __post_init__(self) -> None:
        p = as_fraction(self.swap_depolarize_p, "swap_depolarize_p")
        if not 0 <= p <= 1:
            raise ValidationError("swap_depolarize_p outside [0, 1]")
        object.__setattr__(self, "swap_depolarize_p", p)
        cleaned = {}
        for key, q in dict(self.pair_error).items():
            qf = as_fraction(q, f"pair_error[{key}]")
            if not 0 <= qf <= 1:
                raise ValidationError(f"pair_error[{key}] outside [0, 1]")
            cleaned[key] = qf
        object.__setattr__(self, "pair_error", cleaned)

    @classmethod
    def zero(cls) -> "NoiseModel":
        return cls()

    @classmethod
    def from_graph(cls, g: NetworkGraph, swap_depolarize_p=0) -> "NoiseModel":
        """Saturate each edge's generation-error budget with pair noise.

        An edge budget d becomes replacement probability (4/3) d, which puts
        the generated pair at trace distance exactly d from ideal. Budgets
        above 3/4 cannot be saturated by this channel and are rejected.
        """
        pair_error = {}
        for e in g.edges:
            if e.gen_error == 0:
                continue
            q = e.gen_error * Fraction(4, 3)
            if q > 1:
                raise ValidationError(
                    f"edge {e.key}: generation error {e.gen_error} above 3/4 "
                    "cannot be realized as Bell-mixing noise"
                )
            pair_error[e.key] = q
        return cls(swap_depolarize_p=swap_depolarize_p, pair_error=pair_error)


@dataclass(frozen=True)
class PairOutcome:
    """Stabilizer check of one delivered pair."""

    copy: int
    source_qubit: int
    sink_qubit: int
    xx_sign: int
    zz_sign: int

    @property
    def passed(self) -> bool:
        return self.xx_sign == 1 and self.zz_sign == 1


@dataclass(frozen=True)
class RunResult:
    """One execution of a schedule: outcomes, corrections, delivered pairs."""

    outcomes: tuple[tuple[int, int], ...]
    corrections: tuple[tuple[int, str], ...]
    pairs: tuple[PairOutcome, ...]
    state: StabilizerState

    @property
    def all_passed(self) -> bool:
        return all(p.passed for p in self.pairs)


_PAULI_NAMES = {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "XZ"}


def run_schedule(
    sched: SwapSchedule,
    noise: NoiseModel | None = None,
    seed: int | Sequence[int] = 0,
) -> RunResult:
    """Execute a schedule once on the tableau simulator.

    Deterministic for a given (schedule, noise, seed) triple: random draws
    happen in instruction order from a single seeded generator.

    Raises:
        ScheduleViolation: On double creation, gates or corrections on
            measured qubits, re-measurement, or unknown measurement sources.
    """
    noise = noise or NoiseModel.zero()
    rng = np.random.default_rng(seed)
    state = StabilizerState(sched.n_qubits)
    created: set[int] = set()
    measured: set[int] = set()
    outcomes: dict[int, tuple[int, int]] = {}
    corrections: list[tuple[int, str]] = []
    p_swap = float(noise.swap_depolarize_p)

    def require_live(q: int, action: str) -> None:
        if q not in created:
            raise ScheduleViolation(f"{action} on qubit q{q} before creation")
        if q in measured:
            raise ScheduleViolation(f"{action} on already measured qubit q{q}")

    for ins in sched.instructions:
        if isinstance(ins, CreateBellPair):
            for q in (ins.qubit_left, ins.qubit_right):
                if q in created:
                    raise ScheduleViolation(f"qubit q{q} created twice")
                created.add(q)
            state.h(ins.qubit_left)
            state.cnot(ins.qubit_left, ins.qubit_right)
            q_err = noise.pair_error.get(ins.edge, Fraction(0))
            if q_err > 0 and rng.random() < float(q_err):
                _apply_pauli(state, ins.qubit_right, int(rng.integers(4)))
        elif isinstance(ins, BellMeasure):
            require_live(ins.qubit_left, "measurement")
            require_live(ins.qubit_right, "measurement")
            if p_swap > 0 and rng.random() < p_swap:
                _apply_pauli(state, ins.qubit_left, int(rng.integers(4)))
                _apply_pauli(state, ins.qubit_right, int(rng.integers(4)))
            state.cnot(ins.qubit_left, ins.qubit_right)
            state.h(ins.qubit_left)
            a = state.measure(ins.qubit_left, rng)
            b = state.measure(ins.qubit_right, rng)
            outcomes[ins.index] = (a, b)
            measured.add(ins.qubit_left)
            measured.add(ins.qubit_right)
        elif isinstance(ins, PauliCorrect):
            require_live(ins.qubit, "correction")
            frame_x = frame_z = 0
            for src in ins.sources:
                if src not in outcomes:
                    raise ScheduleViolation(f"correction reads unknown outcome m{src}")
                a, b = outcomes[src]
                frame_z ^= a
                frame_x ^= b
            if frame_x:
                state.apply_x(ins.qubit)
            if frame_z:
                state.apply_z(ins.qubit)
            corrections.append((ins.qubit, _PAULI_NAMES[(frame_x, frame_z)]))
        else:
            raise ScheduleViolation(f"unknown instruction {ins!r}")

    pairs = []
    for d in sched.deliveries:
        require_live(d.source_qubit, "delivery check")
        require_live(d.sink_qubit, "delivery check")
        xx, zz = state.pair_expectations(d.source_qubit, d.sink_qubit)
        pairs.append(
            PairOutcome(
                copy=d.copy,
                source_qubit=d.source_qubit,
                sink_qubit=d.sink_qubit,
                xx_sign=xx,
                zz_sign=zz,
            )
        )
    ordered = tuple(outcomes[i] for i in sorted(outcomes))
    return RunResult(
        outcomes=ordered,
        corrections=tuple(corrections),
        pairs=tuple(pairs),
        state=state,
    )


def _apply_pauli(state: StabilizerState, q: int, which: int) -> None:
    if which == 1:
        state.apply_x(q)
    elif which == 2:
        state.apply_z(q)
    elif which == 3:
        state.apply_y(q)


def wilson_interval(successes: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValidationError("trials must be positive")
    p = successes / trials
    zz = z * z
    denom = 1 + zz / trials
    center = (p + zz / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + zz / (4 * trials * trials)) / denom
    # Rounding must not push an endpoint past the point estimate.
    return (max(0.0, min(center - half, p)), min(1.0, max(center + half, p)))


@dataclass(frozen=True)
class PairStats:
    copy: int
    passes: int
    trials: int
    estimate: float
    wilson_low: float
    wilson_high: float


@dataclass(frozen=True)
class FidelityEstimate:
    """Monte-Carlo estimate of per-pair stabilizer-check pass rates."""

    trials: int
    pairs: tuple[PairStats, ...]
    all_pass_count: int

    @property
    def all_pass_rate(self) -> float:
        return self.all_pass_count / self.trials


def fidelity_estimate(
    sched: SwapSchedule,
    noise: NoiseModel | None = None,
    trials: int = 1000,
    seed: int = 0,
) -> FidelityEstimate:
    """Estimate Pr[pair passes its XX and ZZ check] for every delivery.

    Each trial runs the schedule with an independent generator seeded by
    (seed, trial index), so estimates are reproducible and trials could be
    distributed without changing results.
    """
    if trials <= 0:
        raise ValidationError("trials must be positive")
    noise = noise or NoiseModel.zero()
    passes = [0] * len(sched.deliveries)
    all_pass = 0
    for trial in range(trials):
        result = run_schedule(sched, noise, seed=(seed, trial))
        ok_all = True
        for i, pair in enumerate(result.pairs):
            if pair.passed:
                passes[i] += 1
            else:
                ok_all = False
        if ok_all:
            all_pass += 1
    stats = []
    for i, d in enumerate(sched.deliveries):
        lo, hi = wilson_interval(passes[i], trials)
        stats.append(
            PairStats(
                copy=d.copy,
                passes=passes[i],
                trials=trials,
                estimate=passes[i] / trials,
                wilson_low=lo,
                wilson_high=hi,
            )
        )
    return FidelityEstimate(trials=trials, pairs=tuple(stats), all_pass_count=all_pass)


def _copy_sites(sched: SwapSchedule) -> dict[int, tuple[list[EdgeKey], int]]:
    """Per path copy: the edges of its created pairs and its measurement count."""
    qubit_copy: dict[int, int] = {}
    sites: dict[int, tuple[list[EdgeKey], int]] = {}
    for ins in sched.instructions:
        if isinstance(ins, CreateBellPair):
            qubit_copy[ins.qubit_left] = ins.copy
            qubit_copy[ins.qubit_right] = ins.copy
            edges, bsms = sites.setdefault(ins.copy, ([], 0))
            edges.append(ins.edge)
        elif isinstance(ins, BellMeasure):
            copy = qubit_copy.get(ins.qubit_left)
            if copy is None or qubit_copy.get(ins.qubit_right) != copy:
                raise ScheduleViolation(
                    "measurement couples qubits from different path copies"
                )
            edges, bsms = sites[copy]
            sites[copy] = (edges, bsms + 1)
    return sites


def _mixing_site(q: Fraction) -> dict[tuple[int, int], Fraction]:
    # With probability q the pair picks a uniformly random Bell label.
    quarter = q / 4
    return {
        (0, 0): 1 - 3 * quarter,
        (1, 0): quarter,
        (0, 1): quarter,
        (1, 1): quarter,
    }


def _convolve(
    d1: Mapping[tuple[int, int], Fraction], d2: Mapping[tuple[int, int], Fraction]
) -> dict[tuple[int, int], Fraction]:
    out: dict[tuple[int, int], Fraction] = {}
    for (x1, z1), p1 in d1.items():
        for (x2, z2), p2 in d2.items():
            key = (x1 ^ x2, z1 ^ z2)
            out[key] = out.get(key, Fraction(0)) + p1 * p2
    return out


def exact_pass_probability(
    sched: SwapSchedule,
    noise: NoiseModel | None = None,
    *,
    include_pair_error: bool = True,
    include_swap_error: bool = True,
) -> Fraction:
    """Exact probability that every delivered pair passes its Bell check.

    Each noise site contributes an independent Bell-label flip distribution
    on its path copy: a uniformly random Pauli on qubits that feed a Bell
    measurement flips the delivered label's X and Z bits uniformly, and a
    replaced pair does the same. Flips add over GF(2), so per-copy branch
    weights are an XOR-convolution across sites, and copies multiply.
    """
    noise = noise or NoiseModel.zero()
    prob = Fraction(1)
    sites = _copy_sites(sched)
    for copy in sorted(sites):
        edges, bsms = sites[copy]
        dist: dict[tuple[int, int], Fraction] = {(0, 0): Fraction(1)}
        if include_pair_error:
            for edge in edges:
                q = noise.pair_error.get(edge, Fraction(0))
                if q > 0:
                    dist = _convolve(dist, _mixing_site(q))
        if include_swap_error and noise.swap_depolarize_p > 0:
            site = _mixing_site(noise.swap_depolarize_p)
            for _ in range(bsms):
                dist = _convolve(dist, site)
        prob *= dist.get((0, 0), Fraction(0))
    return prob


def _require_exact_regime(sched: SwapSchedule) -> None:
    if sched.n_qubits > EXACT_QUBIT_LIMIT:
        raise TooLarge(
            f"{sched.n_qubits} qubits exceed the exact regime of {EXACT_QUBIT_LIMIT}"
        )


def exact_operation_error(sched: SwapSchedule, noise: NoiseModel | None = None) -> Fraction:
    """Trace distance between noisy and noiseless execution on ideal pairs.

    Pair-generation noise is deliberately excluded: this measures only the
    error the swapping operation itself introduces.

    Raises:
        TooLarge: Beyond the exact-computation qubit limit.
    """
    _require_exact_regime(sched)
    return 1 - exact_pass_probability(
        sched, noise, include_pair_error=False, include_swap_error=True
    )


def exact_trace_distance(sched: SwapSchedule, noise: NoiseModel | None = None) -> Fraction:
    """Exact trace distance of the delivered state from ideal pairs,
    with both pair-generation and swap noise active.

    Raises:
        TooLarge: Beyond the exact-computation qubit limit.
    """
    _require_exact_regime(sched)
    return 1 - exact_pass_probability(
        sched, noise, include_pair_error=True, include_swap_error=True
    )


def estimate_operation_error(
    sched: SwapSchedule,
    noise: NoiseModel | None = None,
    trials: int = 1000,
    seed: int = 0,
) -> float:
    """Monte-Carlo stand-in for ``exact_operation_error`` on large schedules."""
    noise = noise or NoiseModel.zero()
    stripped = NoiseModel(swap_depolarize_p=noise.swap_depolarize_p)
    est = fidelity_estimate(sched, stripped, trials=trials, seed=seed)
    return 1.0 - est.all_pass_rate


def generation_error_budget(g: NetworkGraph, active: Iterable[EdgeKey]) -> Fraction:
    """Sum of per-edge generation-error budgets over ``active`` edges."""
    total = Fraction(0)
    for key in active:
        total += g.edge_map[key].gen_error
    return total


@dataclass(frozen=True)
class ErrorBudget:
    """Additive end-to-end error bound: generation plus operation error.

    The delivered state's trace distance from ideal pairs is at most
    ``generation + operation``: generation noise moves the input state by at
    most the summed per-edge budgets, the swapping operation cannot increase
    that distance, and its own error adds by the triangle inequality.
    """

    generation: Fraction
    operation: Fraction

    @property
    def total(self) -> Fraction:
        return self.generation + self.operation
