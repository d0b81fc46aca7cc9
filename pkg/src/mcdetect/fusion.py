"""Fusion rules on L one-bit sensor votes, and their decomposition polynomials.

A fusion rule maps a vote vector in {0,1}^L to the system decision bit.
For coordinate optimization we need, per sensor j, the polynomial P_j1 in
the other sensors' bits whose sign (times the likelihood combination)
decides sensor j's optimal bit.  Its defining sum ranges over all 2^L vote
patterns, which is hopeless at L=100; but exactly one pattern matches the
other sensors' bits in each half of the sum, so

    P_j1(u) = F(u with u_j=1) - F(u with u_j=0)
    P_j2(u) = 1 - F(u with u_j=1)

each costing two (one) black-box evaluations.  The brute-force sums are
kept as test oracles (``pj1_reference`` / ``pj2_reference``).

Every rule counts how many votes it has evaluated (``eval_count``); the
counter is best-effort instrumentation, exact in single-threaded use.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "FusionRule",
    "AndRule",
    "OrRule",
    "KofLRule",
    "TruthTableRule",
    "PredicateRule",
    "paths_rule",
    "parse_rule",
    "format_rule",
    "pj1",
    "pj2",
    "pj1_reference",
    "pj2_reference",
    "indicator_omega0",
]


class FusionRule:
    """Base class: an immutable binary map on {0,1}^L plus an eval counter."""

    def __init__(self, num_sensors: int):
        if num_sensors < 1:
            raise ValueError("num_sensors must be >= 1")
        self.num_sensors = int(num_sensors)
        self.eval_count = 0

    def _batch(self, votes: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def evaluate_batch(self, votes: np.ndarray) -> np.ndarray:
        """Decision bits for a (M, L) matrix of votes; counts M evaluations."""
        votes = np.asarray(votes)
        if votes.ndim != 2 or votes.shape[1] != self.num_sensors:
            raise ValueError(
                f"votes have {votes.shape[-1] if votes.ndim else 0} bits, "
                f"expected {self.num_sensors}"
            )
        self.eval_count += votes.shape[0]
        return self._batch(votes)

    def evaluate(self, vote) -> int:
        """Decision bit for a single vote vector; counts one evaluation."""
        vote = np.atleast_1d(np.asarray(vote))
        if vote.shape != (self.num_sensors,):
            raise ValueError(
                f"vote has {vote.shape[0]} bits, expected {self.num_sensors}"
            )
        self.eval_count += 1
        return int(self._batch(vote[None, :])[0])

    def reset_eval_count(self) -> None:
        self.eval_count = 0


class KofLRule(FusionRule):
    """Declare H1 when at least k of the L sensors vote 1."""

    def __init__(self, k: int, num_sensors: int):
        super().__init__(num_sensors)
        if not 1 <= k <= num_sensors:
            raise ValueError(f"k={k} outside 1..{num_sensors}")
        self.k = int(k)

    def _batch(self, votes):
        return (np.count_nonzero(votes, axis=1) >= self.k).astype(np.uint8)


class AndRule(KofLRule):
    """Declare H1 only on a unanimous vote (k = L)."""

    def __init__(self, num_sensors: int):
        super().__init__(num_sensors, num_sensors)


class OrRule(KofLRule):
    """Declare H1 when any sensor votes 1 (k = 1)."""

    def __init__(self, num_sensors: int):
        super().__init__(1, num_sensors)


class TruthTableRule(FusionRule):
    """Arbitrary rule tabulated over all 2^L votes, L <= 20.

    Table index: bit i of the index is sensor i's bit (sensor 0 is the
    least significant bit).
    """

    MAX_SENSORS = 20

    def __init__(self, bits, num_sensors: int):
        super().__init__(num_sensors)
        if num_sensors > self.MAX_SENSORS:
            raise ValueError(f"truth tables support at most {self.MAX_SENSORS} sensors")
        table = np.asarray(bits, dtype=np.uint8)
        if table.shape != (2**num_sensors,):
            raise ValueError(
                f"table has {table.size} entries, expected {2 ** num_sensors}"
            )
        if np.any(table > 1):
            raise ValueError("table entries must be bits")
        self.table = table
        self.table.setflags(write=False)
        self._powers = (1 << np.arange(num_sensors, dtype=np.int64))

    def _batch(self, votes):
        idx = votes.astype(np.int64) @ self._powers
        return self.table[idx]


class PredicateRule(FusionRule):
    """Named black-box rule given as a vectorized function on vote rows."""

    def __init__(self, name: str, fn, num_sensors: int):
        super().__init__(num_sensors)
        self.name = name
        self._fn = fn

    def _batch(self, votes):
        return np.asarray(self._fn(votes), dtype=np.uint8)


def paths_rule(num_pairs: int) -> PredicateRule:
    """Surveillance rule on 2-sensor paths: declare H1 iff exactly one of
    the ``num_pairs`` sensor pairs (2p, 2p+1) votes (1, 1)."""
    if num_pairs < 1:
        raise ValueError("num_pairs must be >= 1")

    def fn(votes: np.ndarray) -> np.ndarray:
        pairs = votes.reshape(votes.shape[0], num_pairs, 2)
        fired = np.logical_and(pairs[:, :, 0], pairs[:, :, 1])
        return (np.count_nonzero(fired, axis=1) == 1).astype(np.uint8)

    return PredicateRule(f"paths:{num_pairs}", fn, 2 * num_pairs)


def pj1(rule: FusionRule, vote, j: int) -> int:
    """F with sensor j's bit forced to 1, minus F with it forced to 0.

    Independent of the vote's own j-th bit; in {-1, 0, 1}.  Sensor indices
    are 0-based.
    """
    _check_sensor(rule, j)
    vote = np.array(vote, copy=True)
    vote[j] = 1
    f1 = rule.evaluate(vote)
    vote[j] = 0
    f0 = rule.evaluate(vote)
    return f1 - f0


def pj2(rule: FusionRule, vote, j: int) -> int:
    """Constant part of the H0-indicator split at sensor j: 1 - F(u | u_j=1)."""
    _check_sensor(rule, j)
    vote = np.array(vote, copy=True)
    vote[j] = 1
    return 1 - rule.evaluate(vote)


def pj1_reference(rule: FusionRule, vote, j: int) -> int:
    """Brute-force decomposition sum over all 2^L vote patterns (oracle)."""
    return _reference_sum(rule, vote, j, first_kind=True)


def pj2_reference(rule: FusionRule, vote, j: int) -> int:
    """Brute-force companion sum (constant in sensor j's bit; oracle)."""
    return _reference_sum(rule, vote, j, first_kind=False)


def indicator_omega0(rule: FusionRule, vote) -> int:
    """1 iff the vote lands in the region where the system declares H0."""
    return 1 - rule.evaluate(vote)


def _check_sensor(rule: FusionRule, j: int) -> None:
    if not 0 <= j < rule.num_sensors:
        raise ValueError(f"sensor index {j} outside 0..{rule.num_sensors - 1}")


def _reference_sum(rule: FusionRule, vote, j: int, first_kind: bool) -> int:
    ell = rule.num_sensors
    if ell > 20:
        raise ValueError("reference sums enumerate 2^L patterns; L > 20 refused")
    _check_sensor(rule, j)
    vote = np.asarray(vote)
    total = 0
    for k in range(2**ell):
        pattern = [(k >> m) & 1 for m in range(ell)]
        match = 1
        for m in range(ell):
            if m == j:
                continue
            match *= pattern[m] * vote[m] + (1 - pattern[m]) * (1 - vote[m])
        if match == 0:
            continue
        f = rule.evaluate(pattern)
        if first_kind:
            total += (1 - f) * (1 - 2 * pattern[j]) * match
        else:
            total += (1 - f) * pattern[j] * match
    return int(total)


def parse_rule(text: str, num_sensors: int) -> FusionRule:
    """Build a rule from its configuration string.

    Accepted forms: ``and``, ``or``, ``k-of-l:K``, ``truth-table:HEX``
    (hex-packed table, table bit t = decision on vote index t), and
    ``paths:P`` (requires L = 2P).
    """
    text = text.strip().lower()
    if text == "and":
        return AndRule(num_sensors)
    if text == "or":
        return OrRule(num_sensors)
    if text.startswith("k-of-l:"):
        k = int(text.split(":", 1)[1])
        return KofLRule(k, num_sensors)
    if text.startswith("truth-table:"):
        digits = text.split(":", 1)[1].strip()
        value = int(digits, 16)
        size = 2**num_sensors
        if value >= (1 << size):
            raise ValueError(f"truth table {digits!r} too wide for {num_sensors} sensors")
        bits = [(value >> t) & 1 for t in range(size)]
        return TruthTableRule(bits, num_sensors)
    if text.startswith("paths:"):
        pairs = int(text.split(":", 1)[1])
        if num_sensors != 2 * pairs:
            raise ValueError(
                f"paths rule with {pairs} pairs needs {2 * pairs} sensors, "
                f"scenario has {num_sensors}"
            )
        return paths_rule(pairs)
    raise ValueError(f"unknown fusion rule {text!r}")


def format_rule(rule: FusionRule) -> str:
    """Inverse of :func:`parse_rule` for manifests and curve labels."""
    if isinstance(rule, AndRule):
        return "and"
    if isinstance(rule, OrRule):
        return "or"
    if isinstance(rule, KofLRule):
        return f"k-of-l:{rule.k}"
    if isinstance(rule, TruthTableRule):
        value = 0
        for t, bit in enumerate(rule.table):
            value |= int(bit) << t
        return f"truth-table:{value:x}"
    if isinstance(rule, PredicateRule):
        return rule.name
    raise TypeError(f"cannot format {type(rule).__name__}")
