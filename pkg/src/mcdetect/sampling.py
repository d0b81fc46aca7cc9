"""Trial (importance) distributions and the frozen sample bank.

Optimization never touches fresh randomness: all samples are drawn once
from a trial density ``g``, and the per-sample quantities the optimizer
needs (``g`` values, the signed likelihood combination, and the importance
weights ``lhat/g``) are precomputed here and frozen.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .model import (
    BayesConstants,
    Density,
    Gaussian,
    Mixture,
    Scenario,
    bayes_constants,
    lhat_from_log_densities,
)

__all__ = [
    "TrialDistribution",
    "SampleBank",
    "build_trial",
    "draw_bank",
    "rederive_bank",
    "save_bank",
    "load_bank",
]

TRIAL_KINDS = ("gaussian", "mixture")


@dataclass(frozen=True)
class TrialDistribution:
    """A sampling density ``g`` together with the recipe that built it.

    Both built-in kinds have support on all of R^d, so ``g`` is strictly
    positive wherever either hypothesis density is.
    """

    kind: str
    density: Density


def build_trial(scenario: Scenario, kind: str = "mixture") -> TrialDistribution:
    """Construct the trial density for a scenario.

    ``"gaussian"``: a single Gaussian moment-matched to the equal-weight
    mixture of the two hypothesis densities.  ``"mixture"``: that mixture
    itself, g = 0.5 p(.|H0) + 0.5 p(.|H1).  A caller may also wrap any
    strictly positive density via ``TrialDistribution("custom", d)``.
    """
    if kind == "gaussian":
        m0, c0 = scenario.density_h0.moments()
        m1, c1 = scenario.density_h1.moments()
        mean = 0.5 * (m0 + m1)
        cov = (
            0.5 * (c0 + np.outer(m0, m0))
            + 0.5 * (c1 + np.outer(m1, m1))
            - np.outer(mean, mean)
        )
        return TrialDistribution("gaussian", Gaussian(mean, cov))
    if kind == "mixture":
        parts = []
        for dens in (scenario.density_h0, scenario.density_h1):
            if isinstance(dens, Mixture):
                parts.extend(zip(0.5 * dens.weights, dens.components))
            else:
                parts.append((0.5, dens))
        weights = [w for w, _ in parts]
        comps = [c for _, c in parts]
        return TrialDistribution("mixture", Mixture(weights, comps))
    raise ValueError(f"unknown trial kind {kind!r}; expected one of {TRIAL_KINDS}")


@dataclass(frozen=True)
class SampleBank:
    """N frozen draws from a trial density plus their precomputed weights.

    ``samples`` is (N, total_dim) with sensor j owning the column slice
    ``sensor_slices[j]``.  ``weights[i] == lhat_values[i] / g_values[i]``
    exactly.  Banks are immutable; deriving a bank for different cost
    constants creates a new object sharing the sample array.
    """

    samples: np.ndarray
    g_values: np.ndarray
    lhat_values: np.ndarray
    weights: np.ndarray
    seed: int | None
    sensor_slices: tuple[slice, ...]
    constants: BayesConstants | None = None
    trial_kind: str = "custom"
    log_p0: np.ndarray | None = field(default=None, repr=False)
    log_p1: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        for arr in (self.samples, self.g_values, self.lhat_values, self.weights):
            arr.setflags(write=False)
        if not (self.g_values.shape == self.lhat_values.shape == self.weights.shape):
            raise ValueError("per-sample arrays must share one length")
        if self.samples.shape[0] != self.g_values.shape[0]:
            raise ValueError("sample count does not match per-sample arrays")
        if not np.all(np.isfinite(self.g_values)) or np.any(self.g_values <= 0.0):
            raise ValueError("trial density values must be finite and positive")

    @property
    def size(self) -> int:
        return int(self.samples.shape[0])

    @property
    def num_sensors(self) -> int:
        return len(self.sensor_slices)

    def sensor_points(self, j: int) -> np.ndarray:
        """The (N, n_j) reference observations of sensor ``j`` (0-based)."""
        return self.samples[:, self.sensor_slices[j]]


def draw_bank(
    trial: TrialDistribution,
    scenario: Scenario,
    count: int,
    seed: int,
) -> SampleBank:
    """Draw ``count`` samples from the trial density and freeze the bank."""
    if count < 1:
        raise ValueError("count must be >= 1")
    samples = trial.density.sample(count, seed)
    log_g = trial.density.log_density(samples)
    g_values = np.exp(np.atleast_1d(log_g))
    if not np.all(np.isfinite(g_values)) or np.any(g_values <= 0.0):
        raise ValueError(
            "trial density vanished or overflowed on its own draws; "
            "the trial must be strictly positive with finite values"
        )
    constants = bayes_constants(scenario)
    log_p0 = np.atleast_1d(scenario.density_h0.log_density(samples))
    log_p1 = np.atleast_1d(scenario.density_h1.log_density(samples))
    lhat_values = lhat_from_log_densities(constants, log_p0, log_p1)
    return SampleBank(
        samples=samples,
        g_values=g_values,
        lhat_values=np.atleast_1d(lhat_values),
        weights=np.atleast_1d(lhat_values) / g_values,
        seed=seed,
        sensor_slices=scenario.sensor_slices,
        constants=constants,
        trial_kind=trial.kind,
        log_p0=log_p0,
        log_p1=log_p1,
    )


def rederive_bank(bank: SampleBank, constants: BayesConstants) -> SampleBank:
    """Same samples and trial values, new cost constants.

    Used by operating-point sweeps: the draw and the trial density do not
    depend on the cost structure, so only ``lhat`` and the weights need
    recomputing.
    """
    if bank.log_p0 is None or bank.log_p1 is None:
        raise ValueError("bank lacks stored log densities; re-draw it instead")
    lhat_values = np.atleast_1d(
        lhat_from_log_densities(constants, bank.log_p0, bank.log_p1)
    )
    return SampleBank(
        samples=bank.samples,
        g_values=bank.g_values,
        lhat_values=lhat_values,
        weights=lhat_values / bank.g_values,
        seed=bank.seed,
        sensor_slices=bank.sensor_slices,
        constants=constants,
        trial_kind=bank.trial_kind,
        log_p0=bank.log_p0,
        log_p1=bank.log_p1,
    )


def save_bank(bank: SampleBank, path) -> None:
    """Write the bank as CSV: sensor component columns, then g, then lhat.

    Floats are written with ``repr`` so a reload reproduces every value
    bit-exactly.
    """
    dim = bank.samples.shape[1]
    header = [f"y{k}" for k in range(dim)] + ["g", "lhat"]
    meta = ",".join(
        f"{a}={b}"
        for a, b in [
            ("seed", bank.seed),
            ("trial", bank.trial_kind),
            ("dims", "/".join(str(s.stop - s.start) for s in bank.sensor_slices)),
        ]
    )
    with open(path, "w", newline="") as fh:
        fh.write(f"# {meta}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(bank.size):
            row = [repr(v) for v in bank.samples[i]]
            row.append(repr(float(bank.g_values[i])))
            row.append(repr(float(bank.lhat_values[i])))
            writer.writerow(row)


def load_bank(path) -> SampleBank:
    """Reload a CSV bank written by :func:`save_bank`.

    The reloaded bank supports cost evaluation and optimization but not
    :func:`rederive_bank` (log densities are not part of the table).
    """
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        meta = {}
        if first.startswith("#"):
            for item in first[1:].strip().split(","):
                key, _, val = item.partition("=")
                meta[key.strip()] = val.strip()
            header = fh.readline()
        else:
            header = first
        ncols = len(header.strip().split(","))
        rows = [row for row in csv.reader(fh) if row]
    data = np.array([[float(v) for v in row] for row in rows])
    if data.shape[1] != ncols:
        raise ValueError("ragged bank table")
    samples = np.ascontiguousarray(data[:, :-2])
    g_values = np.ascontiguousarray(data[:, -2])
    lhat_values = np.ascontiguousarray(data[:, -1])
    dims = [int(d) for d in meta.get("dims", "").split("/") if d] or [1] * samples.shape[1]
    edges = np.cumsum([0] + dims)
    slices = tuple(slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]))
    seed = meta.get("seed")
    return SampleBank(
        samples=samples,
        g_values=g_values,
        lhat_values=lhat_values,
        weights=lhat_values / g_values,
        seed=None if seed in (None, "None") else int(seed),
        sensor_slices=slices,
        trial_kind=meta.get("trial", "custom"),
    )
