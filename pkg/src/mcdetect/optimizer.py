"""Monte Carlo cost and cyclic person-by-person optimization of sensor rules.

Sensor rules are represented discretely: an (L, N) bit matrix giving each
sensor's decision on each bank sample.  One sweep visits sensors in order;
for sensor j it recomputes, per sample, the decomposition polynomial
``P_j1 = F(u | u_j=1) - F(u | u_j=0)`` under the *current* bits of all
other sensors, and sets the bit to ``indicator(P_j1 * lhat)``.  All N
samples of one sensor update from the same snapshot (they are mutually
independent given the other sensors), and the next sensor sees the new
block.  Each sensor block therefore costs exactly two batched fusion
evaluations over the bank, i.e. 2*L*N single-vote evaluations per sweep.

The cost recorded after each sensor block reuses the identity
``1 - F(u) = (1 - u_j) P_j1 + P_j2``, so tracing adds no fusion
evaluations and the trace is exactly the non-increasing sequence the
termwise-minimizing update guarantees.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .fusion import AndRule, FusionRule, OrRule
from .model import BayesConstants
from .sampling import SampleBank

__all__ = [
    "RuleLabels",
    "OptimizeTrace",
    "indicator",
    "cost_mc",
    "sweep",
    "optimize",
    "analytic_and_or",
    "exhaustive_optimum",
    "labels_from_lhat",
    "labels_from_affine",
    "labels_random",
    "labels_constant",
    "save_rule_file",
]


@dataclass
class RuleLabels:
    """Discrete sensor decision rules: bits[j][i] is sensor j's bit on sample i."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        if bits.ndim != 2:
            raise ValueError("labels must be a (num_sensors, num_samples) matrix")
        if np.any(bits > 1):
            raise ValueError("labels must be bits")
        self.bits = bits

    @property
    def num_sensors(self) -> int:
        return int(self.bits.shape[0])

    @property
    def num_samples(self) -> int:
        return int(self.bits.shape[1])

    def copy(self) -> "RuleLabels":
        return RuleLabels(self.bits.copy())


@dataclass
class OptimizeTrace:
    """Record of one optimization run.

    ``costs`` holds the cost after every sensor-block update, all sweeps
    concatenated (L values per sweep); the sequence is non-increasing.
    ``converged`` means the final sweep changed no label.
    """

    initial_cost: float
    costs: list[float] = field(default_factory=list)
    flip_counts: list[int] = field(default_factory=list)
    sweeps_used: int = 0
    converged: bool = False


def indicator(x) -> int:
    """Binary threshold with ties going to 1: returns 1 iff x >= 0."""
    return 1 if x >= 0 else 0


def _check_shapes(bank: SampleBank, labels: RuleLabels, rule: FusionRule) -> None:
    if labels.num_sensors != rule.num_sensors:
        raise ValueError(
            f"labels cover {labels.num_sensors} sensors, rule expects "
            f"{rule.num_sensors}"
        )
    if labels.num_samples != bank.size:
        raise ValueError(
            f"labels cover {labels.num_samples} samples, bank holds {bank.size}"
        )
    if bank.num_sensors != rule.num_sensors:
        raise ValueError(
            f"bank partitions {bank.num_sensors} sensors, rule expects "
            f"{rule.num_sensors}"
        )


def _mean_weighted(omega0: np.ndarray, bank: SampleBank, constants: BayesConstants) -> float:
    # Single shared accumulation so traced and direct costs agree bitwise.
    return constants.c + float(np.dot(omega0, bank.weights)) / bank.size


def cost_mc(
    bank: SampleBank,
    labels: RuleLabels,
    rule: FusionRule,
    constants: BayesConstants,
) -> float:
    """Importance-sampled Bayesian cost of the given discrete sensor rules.

    c + (1/N) * sum_i [1 - F(vote on sample i)] * lhat_i / g_i.
    """
    _check_shapes(bank, labels, rule)
    decisions = rule.evaluate_batch(np.ascontiguousarray(labels.bits.T))
    omega0 = 1.0 - decisions.astype(np.float64)
    return _mean_weighted(omega0, bank, constants)


def sweep(
    bank: SampleBank,
    labels: RuleLabels,
    rule: FusionRule,
    constants: BayesConstants,
) -> tuple[RuleLabels, list[float]]:
    """One full cyclic pass over all sensors; returns new labels and the
    cost after each sensor block."""
    _check_shapes(bank, labels, rule)
    votes = labels.bits.T.copy()  # (N, L) working copy; the input stays intact
    lhat = bank.lhat_values
    costs: list[float] = []
    for j in range(rule.num_sensors):
        votes[:, j] = 1
        f1 = rule.evaluate_batch(votes).astype(np.int64)
        votes[:, j] = 0
        f0 = rule.evaluate_batch(votes).astype(np.int64)
        p_j1 = f1 - f0
        new_bits = (p_j1 * lhat >= 0.0).astype(np.uint8)
        votes[:, j] = new_bits
        # 1 - F(u) = (1 - u_j) P_j1 + P_j2 with P_j2 = 1 - F(u | u_j = 1):
        # integer-valued in float64, so the traced cost is the exact cost.
        omega0 = (1.0 - new_bits) * p_j1 + (1.0 - f1)
        costs.append(_mean_weighted(omega0, bank, constants))
    return RuleLabels(votes.T.copy()), costs


def optimize(
    bank: SampleBank,
    rule: FusionRule,
    constants: BayesConstants,
    init: RuleLabels,
    max_sweeps: int = 100,
) -> tuple[RuleLabels, OptimizeTrace]:
    """Sweep until a full pass flips no label, or ``max_sweeps`` is hit.

    Non-convergence is reported via ``trace.converged`` rather than raised:
    with frozen samples the cost strictly decreases on every flip except
    0 -> 1 ties, so failure to terminate indicates inconsistent inputs,
    not a property of the method.
    """
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be >= 1")
    trace = OptimizeTrace(initial_cost=cost_mc(bank, init, rule, constants))
    labels = init.copy()
    for _ in range(max_sweeps):
        new_labels, costs = sweep(bank, labels, rule, constants)
        flips = int(np.count_nonzero(new_labels.bits != labels.bits))
        trace.costs.extend(costs)
        trace.flip_counts.append(flips)
        trace.sweeps_used += 1
        labels = new_labels
        if flips == 0:
            trace.converged = True
            break
    return labels, trace


def analytic_and_or(
    bank: SampleBank,
    which: FusionRule | str,
    constants: BayesConstants | None = None,
) -> RuleLabels:
    """Closed-form optimal labels for the AND or OR fusion rule.

    Every sensor copies the sign of the likelihood combination:
    bits[j][i] = indicator(lhat_i).  The cost constants do not enter; the
    argument documents which rule the caller is solving.
    """
    if isinstance(which, str):
        ok = which.lower() in ("and", "or")
        num = None
    else:
        ok = isinstance(which, (AndRule, OrRule))
        num = which.num_sensors
    if not ok:
        raise ValueError("analytic solution exists only for the AND / OR rules")
    if num is not None and num != bank.num_sensors:
        raise ValueError("rule and bank disagree on the sensor count")
    row = (bank.lhat_values >= 0.0).astype(np.uint8)
    return RuleLabels(np.tile(row, (bank.num_sensors, 1)))


def exhaustive_optimum(
    bank: SampleBank,
    rule: FusionRule,
    constants: BayesConstants,
) -> tuple[RuleLabels, float]:
    """Global minimizer of the Monte Carlo cost over all 2^(L*N) labelings.

    Test oracle only; refuses instances with more than 24 label bits.
    Labelings are enumerated as integers where sample i's vote occupies
    bits [i*L, (i+1)*L) with sensor 0 at the group's least significant
    bit; ties go to the smallest such integer.  The returned cost is
    recomputed through :func:`cost_mc` on the winning labels.
    """
    ell = rule.num_sensors
    n = bank.size
    total_bits = ell * n
    if total_bits > 24:
        raise ValueError(f"{ell} sensors x {n} samples = {total_bits} bits > 24")
    if bank.num_sensors != ell:
        raise ValueError("bank partitions a different sensor count")

    all_votes = np.array(
        [[(v >> j) & 1 for j in range(ell)] for v in range(2**ell)], dtype=np.uint8
    )
    omega_by_vote = 1.0 - rule.evaluate_batch(all_votes).astype(np.float64)
    # contrib[i, v]: sample i's cost term when its vote pattern is v.
    contrib = (bank.weights[:, None] / n) * omega_by_vote[None, :]

    mask = (1 << ell) - 1
    best_cost = np.inf
    best_code = 0
    chunk = 1 << 20
    for start in range(0, 2**total_bits, chunk):
        codes = np.arange(start, min(start + chunk, 2**total_bits), dtype=np.int64)
        acc = np.zeros(codes.shape[0])
        for i in range(n):
            acc += contrib[i, (codes >> (i * ell)) & mask]
        pos = int(np.argmin(acc))
        if acc[pos] < best_cost:
            best_cost = float(acc[pos])
            best_code = int(codes[pos])

    bits = np.empty((ell, n), dtype=np.uint8)
    for i in range(n):
        for j in range(ell):
            bits[j, i] = (best_code >> (i * ell + j)) & 1
    labels = RuleLabels(bits)
    return labels, cost_mc(bank, labels, rule, constants)


def labels_from_lhat(bank: SampleBank) -> RuleLabels:
    """Default initialization: every sensor thresholds the likelihood sign."""
    return analytic_and_or(bank, "and")


def labels_from_affine(bank: SampleBank, scale: float, offset: float) -> RuleLabels:
    """Threshold each scalar observation: bit = indicator(scale*y + offset).

    Only defined when every sensor observes a scalar.
    """
    if any(s.stop - s.start != 1 for s in bank.sensor_slices):
        raise ValueError("affine initialization needs 1-D sensor observations")
    y = bank.samples.T  # (L, N) since all sensors are scalar
    return RuleLabels((scale * y + offset >= 0.0).astype(np.uint8))


def labels_random(bank: SampleBank, seed: int) -> RuleLabels:
    rng = np.random.default_rng(seed)
    return RuleLabels(
        rng.integers(0, 2, size=(bank.num_sensors, bank.size), dtype=np.uint8)
    )


def labels_constant(bank: SampleBank, bit: int) -> RuleLabels:
    if bit not in (0, 1):
        raise ValueError("bit must be 0 or 1")
    return RuleLabels(
        np.full((bank.num_sensors, bank.size), bit, dtype=np.uint8)
    )


def save_rule_file(bank: SampleBank, labels: RuleLabels, path) -> None:
    """Write learned rules as CSV rows: sensor, sample, bit, observation
    coordinates.  The file alone suffices to deploy the rules."""
    if labels.num_sensors != bank.num_sensors or labels.num_samples != bank.size:
        raise ValueError("labels do not match the bank")
    dims = "/".join(str(s.stop - s.start) for s in bank.sensor_slices)
    with open(path, "w", newline="") as fh:
        fh.write(f"# dims={dims}\n")
        writer = csv.writer(fh)
        writer.writerow(["sensor", "sample", "bit", "coords"])
        for j in range(bank.num_sensors):
            pts = bank.sensor_points(j)
            for i in range(bank.size):
                row = [j, i, int(labels.bits[j, i])]
                row.extend(repr(v) for v in pts[i])
                writer.writerow(row)
