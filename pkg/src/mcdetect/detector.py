"""Deploying learned rules to fresh observations and scoring the system.

Discrete rules only fix bits on the bank samples; a deployed rule extends
each sensor's bits to the whole observation space by nearest reference
point (Euclidean distance, ties to the lowest sample index).  System
performance is scored on fresh Monte Carlo draws under each hypothesis,
and a cost-ratio sweep traces out ROC curves for both the distributed
system and the centralized likelihood-ratio baseline.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .fusion import AndRule, FusionRule, OrRule, format_rule
from .model import Scenario, bayes_constants
from .optimizer import RuleLabels, analytic_and_or, labels_from_lhat, optimize
from .sampling import SampleBank, TrialDistribution, draw_bank, rederive_bank

__all__ = [
    "DeployedRule",
    "OperatingPoint",
    "RocCurve",
    "deploy",
    "load_rule_file",
    "evaluate_system",
    "evaluate_on_bank",
    "centralized_decide",
    "centralized_point",
    "roc_sweep",
    "roc_dominates",
    "save_roc",
]


class _ScalarIndex:
    """Nearest-point lookup on a 1-D reference set.

    Sorted-order bisection; equidistant queries and duplicate coordinates
    resolve to the lowest original reference index.
    """

    def __init__(self, refs: np.ndarray):
        refs = np.asarray(refs, dtype=np.float64).ravel()
        order = np.argsort(refs, kind="stable")
        self._sorted = refs[order]
        self._orig = order
        # First sorted position holding each value; within a run of equal
        # values the stable sort keeps original indices ascending.
        self._run_start = np.searchsorted(self._sorted, self._sorted, side="left")
        self._n = refs.shape[0]

    def query(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=np.float64).ravel()
        pos = np.searchsorted(self._sorted, q, side="left")
        left = pos - 1
        has_left = left >= 0
        has_right = pos < self._n
        d_left = np.where(has_left, q - self._sorted[np.clip(left, 0, None)], np.inf)
        d_right = np.where(
            has_right, self._sorted[np.clip(pos, None, self._n - 1)] - q, np.inf
        )
        cand_left = self._orig[self._run_start[np.clip(left, 0, None)]]
        cand_right = self._orig[np.clip(pos, None, self._n - 1)]
        out = np.where(d_left < d_right, cand_left, cand_right)
        tie = d_left == d_right
        if np.any(tie):
            out[tie] = np.minimum(cand_left[tie], cand_right[tie])
        return out


class _VectorIndex:
    """Nearest-point lookup by linear scan for multi-dimensional sensors."""

    _CHUNK = 256

    def __init__(self, refs: np.ndarray):
        self._refs = np.asarray(refs, dtype=np.float64)

    def query(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=np.float64)
        out = np.empty(q.shape[0], dtype=np.int64)
        for start in range(0, q.shape[0], self._CHUNK):
            block = q[start : start + self._CHUNK]
            d2 = ((block[:, None, :] - self._refs[None, :, :]) ** 2).sum(axis=2)
            # argmin returns the first minimum: the lowest-index tie-break.
            out[start : start + block.shape[0]] = np.argmin(d2, axis=1)
        return out


@dataclass
class DeployedRule:
    """Per-sensor nearest-reference classifiers built from learned bits."""

    reference_points: list[np.ndarray]
    bits: list[np.ndarray]
    _indexes: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if len(self.reference_points) != len(self.bits):
            raise ValueError("need one bit array per sensor")
        self._indexes = [
            _ScalarIndex(pts) if pts.shape[1] == 1 else _VectorIndex(pts)
            for pts in self.reference_points
        ]

    @property
    def num_sensors(self) -> int:
        return len(self.reference_points)

    @property
    def sensor_dims(self) -> tuple[int, ...]:
        return tuple(p.shape[1] for p in self.reference_points)

    def sensor_bit(self, j: int, y) -> np.ndarray:
        """Sensor j's decision bits for a (M, n_j) block of observations."""
        y = np.asarray(y, dtype=np.float64)
        if y.ndim == 1:
            y = y[:, None]
        idx = self._indexes[j].query(y if y.shape[1] > 1 else y.ravel())
        return self.bits[j][idx]

    def decide(self, observations: np.ndarray) -> np.ndarray:
        """All sensors' votes for (M, total_dim) joint observations."""
        obs = np.asarray(observations, dtype=np.float64)
        edges = np.cumsum([0] + [p.shape[1] for p in self.reference_points])
        votes = np.empty((obs.shape[0], self.num_sensors), dtype=np.uint8)
        for j in range(self.num_sensors):
            votes[:, j] = self.sensor_bit(j, obs[:, edges[j] : edges[j + 1]])
        return votes


def deploy(bank: SampleBank, labels: RuleLabels) -> DeployedRule:
    """Extend discrete labels to continuous observations via nearest sample."""
    if labels.num_sensors != bank.num_sensors or labels.num_samples != bank.size:
        raise ValueError("labels do not match the bank")
    return DeployedRule(
        reference_points=[
            np.ascontiguousarray(bank.sensor_points(j))
            for j in range(bank.num_sensors)
        ],
        bits=[labels.bits[j].copy() for j in range(bank.num_sensors)],
    )


def load_rule_file(path) -> DeployedRule:
    """Rebuild a deployed rule from the CSV written by the optimizer."""
    per_sensor: dict[int, list[tuple[int, int, list[float]]]] = {}
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            fh.seek(0)
        reader = csv.reader(fh)
        header = next(reader)
        if header[:3] != ["sensor", "sample", "bit"]:
            raise ValueError("not a rule file")
        for row in reader:
            if not row:
                continue
            j, i, bit = int(row[0]), int(row[1]), int(row[2])
            per_sensor.setdefault(j, []).append((i, bit, [float(v) for v in row[3:]]))
    points, bits = [], []
    for j in sorted(per_sensor):
        rows = sorted(per_sensor[j])
        points.append(np.array([r[2] for r in rows], dtype=np.float64))
        bits.append(np.array([r[1] for r in rows], dtype=np.uint8))
    return DeployedRule(reference_points=points, bits=bits)


@dataclass
class OperatingPoint:
    """One (false alarm, detection) point with its Bayes cost and errors."""

    pf: float
    pd: float
    bayes_cost: float
    sweep_parameter: float = float("nan")
    stderr_pf: float = float("nan")
    stderr_pd: float = float("nan")


@dataclass
class RocCurve:
    """Operating points sorted by false-alarm probability, plus provenance."""

    points: list[OperatingPoint]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = sorted(self.points, key=lambda p: (p.pf, p.pd))

    def pf_values(self) -> np.ndarray:
        return np.array([p.pf for p in self.points])

    def pd_values(self) -> np.ndarray:
        return np.array([p.pd for p in self.points])

    def pd_at(self, pf, anchors=()) -> np.ndarray:
        """Detection probability at the queried false-alarm levels.

        Piecewise-linear interpolation between achieved points (achievable
        by randomizing between them).  ``anchors`` adds operating points
        known to be achievable, e.g. the trivial corners (0,0) and (1,1)
        for monotone fusion rules.  Queries outside the covered range clamp
        to the endpoint values.
        """
        xs = np.concatenate([self.pf_values(), [a[0] for a in anchors]])
        ys = np.concatenate([self.pd_values(), [a[1] for a in anchors]])
        order = np.argsort(xs, kind="stable")
        xs, ys = xs[order], ys[order]
        # Keep the best pd at duplicated pf: the upper achievable envelope.
        keep_x, keep_y = [], []
        for x, y in zip(xs, ys):
            if keep_x and x == keep_x[-1]:
                keep_y[-1] = max(keep_y[-1], y)
            else:
                keep_x.append(x)
                keep_y.append(y)
        return np.interp(np.asarray(pf, dtype=np.float64), keep_x, keep_y)


def _bayes_cost(scenario: Scenario, pf: float, pd: float) -> float:
    return (
        scenario.cost_00 * scenario.prior_p0 * (1.0 - pf)
        + scenario.cost_01 * scenario.prior_p1 * (1.0 - pd)
        + scenario.cost_10 * scenario.prior_p0 * pf
        + scenario.cost_11 * scenario.prior_p1 * pd
    )


def _binomial_stderr(p: float, m: int) -> float:
    return float(np.sqrt(p * (1.0 - p) / m))


def evaluate_system(
    scenario: Scenario,
    rule: DeployedRule,
    fusion: FusionRule,
    num_draws: int,
    seed,
) -> OperatingPoint:
    """Score a deployed rule set on fresh draws under each hypothesis."""
    if num_draws < 1:
        raise ValueError("num_draws must be >= 1")
    seed_h0, seed_h1 = np.random.SeedSequence(seed).spawn(2)
    y0 = scenario.density_h0.sample(num_draws, seed_h0)
    y1 = scenario.density_h1.sample(num_draws, seed_h1)
    pf = float(np.mean(fusion.evaluate_batch(rule.decide(y0))))
    pd = float(np.mean(fusion.evaluate_batch(rule.decide(y1))))
    return OperatingPoint(
        pf=pf,
        pd=pd,
        bayes_cost=_bayes_cost(scenario, pf, pd),
        stderr_pf=_binomial_stderr(pf, num_draws),
        stderr_pd=_binomial_stderr(pd, num_draws),
    )


def evaluate_on_bank(
    bank: SampleBank,
    labels: RuleLabels,
    fusion: FusionRule,
    scenario: Scenario,
) -> OperatingPoint:
    """Optimistic variant: score on the training bank itself.

    The bank is drawn from the trial density, so hypothesis-conditional
    probabilities are importance-reweighted: pf = mean(F * p0/g) and
    pd = mean(F * p1/g).  Estimates are clipped to [0, 1]; standard errors
    come from the weighted-term sample variance.
    """
    if bank.log_p0 is None or bank.log_p1 is None:
        raise ValueError("bank lacks stored log densities")
    decided = fusion.evaluate_batch(
        np.ascontiguousarray(labels.bits.T)
    ).astype(np.float64)
    out = []
    for logp in (bank.log_p0, bank.log_p1):
        terms = decided * np.exp(logp - np.log(bank.g_values))
        est = float(np.mean(terms))
        se = float(np.std(terms, ddof=1) / np.sqrt(bank.size)) if bank.size > 1 else float("nan")
        out.append((min(max(est, 0.0), 1.0), se))
    (pf, se_f), (pd, se_d) = out
    return OperatingPoint(
        pf=pf,
        pd=pd,
        bayes_cost=_bayes_cost(scenario, pf, pd),
        stderr_pf=se_f,
        stderr_pd=se_d,
    )


def centralized_decide(scenario: Scenario, y, threshold: float):
    """Likelihood-ratio test: 1 iff p(y|H1)/p(y|H0) >= threshold.

    Computed in log space; thresholds 0 and +inf give the constant
    detectors.  Accepts one point or a matrix of points.
    """
    if threshold < 0.0:
        raise ValueError("threshold must be nonnegative")
    llr = np.asarray(scenario.density_h1.log_density(y)) - np.asarray(
        scenario.density_h0.log_density(y)
    )
    with np.errstate(divide="ignore"):
        cut = np.log(threshold)
    decision = (llr >= cut).astype(np.uint8)
    return int(decision) if decision.ndim == 0 else decision


def centralized_point(
    scenario: Scenario,
    threshold: float,
    num_draws: int,
    seed,
) -> OperatingPoint:
    """Operating point of the centralized likelihood-ratio detector."""
    seed_h0, seed_h1 = np.random.SeedSequence(seed).spawn(2)
    y0 = scenario.density_h0.sample(num_draws, seed_h0)
    y1 = scenario.density_h1.sample(num_draws, seed_h1)
    pf = float(np.mean(centralized_decide(scenario, y0, threshold)))
    pd = float(np.mean(centralized_decide(scenario, y1, threshold)))
    return OperatingPoint(
        pf=pf,
        pd=pd,
        bayes_cost=_bayes_cost(scenario, pf, pd),
        sweep_parameter=threshold,
        stderr_pf=_binomial_stderr(pf, num_draws),
        stderr_pd=_binomial_stderr(pd, num_draws),
    )


def roc_sweep(
    scenario: Scenario,
    fusion: FusionRule,
    trial: TrialDistribution,
    bank_size: int,
    num_draws: int,
    grid,
    seeds: tuple[int, int],
    init_fn=labels_from_lhat,
    max_sweeps: int = 100,
    eval_on_training: bool = False,
) -> tuple[RocCurve, RocCurve]:
    """Trace distributed and centralized ROC curves over a cost-ratio grid.

    Each grid value r is the ratio b/a realized by the cost structure
    C00 = C11 = 0, C01 = 1, C10 = r with equal priors; the scenario's own
    costs and priors are ignored for the sweep.  Per point the likelihood
    combination is re-derived on the one shared bank, rules re-optimized,
    deployed, and scored on evaluation draws shared across the grid; the
    centralized detector thresholds the likelihood ratio at r on the same
    draws.
    """
    grid = [float(r) for r in grid]
    if not grid or any(r <= 0.0 for r in grid):
        raise ValueError("grid must be nonempty with positive ratios")
    bank_seed, eval_seed = seeds
    bank = draw_bank(trial, scenario, bank_size, bank_seed)

    seed_h0, seed_h1 = np.random.SeedSequence(eval_seed).spawn(2)
    y0 = scenario.density_h0.sample(num_draws, seed_h0)
    y1 = scenario.density_h1.sample(num_draws, seed_h1)

    dist_points, cent_points, sweeps_used, all_converged = [], [], [], True
    for ratio in grid:
        swept = scenario.with_costs(0.0, 1.0, ratio, 0.0, prior_p0=0.5, prior_p1=0.5)
        constants = bayes_constants(swept)
        bank_r = rederive_bank(bank, constants)
        labels, trace = optimize(
            bank_r, fusion, constants, init_fn(bank_r), max_sweeps=max_sweeps
        )
        sweeps_used.append(trace.sweeps_used)
        all_converged = all_converged and trace.converged
        if eval_on_training:
            point = evaluate_on_bank(bank_r, labels, fusion, swept)
        else:
            deployed = deploy(bank_r, labels)
            pf = float(np.mean(fusion.evaluate_batch(deployed.decide(y0))))
            pd = float(np.mean(fusion.evaluate_batch(deployed.decide(y1))))
            point = OperatingPoint(
                pf=pf,
                pd=pd,
                bayes_cost=_bayes_cost(swept, pf, pd),
                stderr_pf=_binomial_stderr(pf, num_draws),
                stderr_pd=_binomial_stderr(pd, num_draws),
            )
        point.sweep_parameter = ratio
        dist_points.append(point)

        cpf = float(np.mean(centralized_decide(swept, y0, ratio)))
        cpd = float(np.mean(centralized_decide(swept, y1, ratio)))
        cent_points.append(
            OperatingPoint(
                pf=cpf,
                pd=cpd,
                bayes_cost=_bayes_cost(swept, cpf, cpd),
                sweep_parameter=ratio,
                stderr_pf=_binomial_stderr(cpf, num_draws),
                stderr_pd=_binomial_stderr(cpd, num_draws),
            )
        )

    common = {
        "scenario": scenario.name,
        "trial": trial.kind,
        "fusion": format_rule(fusion),
        "bank_size": bank_size,
        "num_draws": num_draws,
        "bank_seed": bank_seed,
        "eval_seed": eval_seed,
        "eval_on_training": eval_on_training,
    }
    dist = RocCurve(
        dist_points,
        metadata=dict(
            common,
            kind="distributed",
            sweeps=sweeps_used,
            converged=all_converged,
        ),
    )
    cent = RocCurve(cent_points, metadata=dict(common, kind="centralized"))
    return dist, cent


def roc_dominates(
    upper: RocCurve,
    lower: RocCurve,
    slack: float,
    anchors=(),
    restrict_to_overlap: bool = False,
) -> bool:
    """True if ``upper``'s detection rate is within ``slack`` of dominating
    ``lower`` at every matched false-alarm probe.

    Probes are the union of both curves' pf values (plus anchors); with
    ``restrict_to_overlap`` the comparison stays inside the pf range both
    curves actually cover, for rules whose sweeps cannot reach a corner.
    """
    probes = np.concatenate(
        [upper.pf_values(), lower.pf_values(), [a[0] for a in anchors]]
    )
    if restrict_to_overlap:
        lo = max(upper.pf_values().min(), lower.pf_values().min())
        hi = min(upper.pf_values().max(), lower.pf_values().max())
        probes = probes[(probes >= lo) & (probes <= hi)]
        if probes.size == 0:
            return True
    up = upper.pd_at(probes, anchors=anchors)
    low = lower.pd_at(probes, anchors=anchors)
    return bool(np.all(up >= low - slack))


def save_roc(curve: RocCurve, path, curve_id: str | None = None) -> None:
    """Write a curve as CSV with one row per operating point."""
    label = curve_id or "{}:{}:{}".format(
        curve.metadata.get("kind", "curve"),
        curve.metadata.get("fusion", "?"),
        curve.metadata.get("trial", "?"),
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["sweep_parameter", "pf", "pd", "bayes_cost", "stderr_pf", "stderr_pd", "curve_id"]
        )
        for p in curve.points:
            writer.writerow(
                [
                    repr(p.sweep_parameter),
                    repr(p.pf),
                    repr(p.pd),
                    repr(p.bayes_cost),
                    repr(p.stderr_pf),
                    repr(p.stderr_pd),
                    label,
                ]
            )
