"""Detection scenarios: priors, costs, and hypothesis-conditional densities.

A scenario bundles everything that defines a binary detection problem for a
parallel sensor network: the two hypothesis priors, the four decision cost
coefficients, and the joint observation density under each hypothesis
(multivariate Gaussian or Gaussian mixture).  The signed likelihood
combination ``a*p(y|H1) - b*p(y|H0)`` drives every downstream computation;
its sign is the centralized Bayes decision statistic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

__all__ = [
    "Gaussian",
    "Mixture",
    "Density",
    "Scenario",
    "BayesConstants",
    "bayes_constants",
    "lhat",
    "lhat_from_log_densities",
]

_LOG_2PI = float(np.log(2.0 * np.pi))


def _as_points(y, dim: int) -> tuple[np.ndarray, bool]:
    """Coerce ``y`` to a (M, dim) float array; report whether input was 1-D."""
    arr = np.asarray(y, dtype=np.float64)
    if arr.ndim == 1:
        if arr.shape[0] != dim:
            raise ValueError(f"point has dimension {arr.shape[0]}, expected {dim}")
        return arr[None, :], True
    if arr.ndim == 2:
        if arr.shape[1] != dim:
            raise ValueError(f"points have dimension {arr.shape[1]}, expected {dim}")
        return arr, False
    raise ValueError("expected a vector or a matrix of row vectors")


class Gaussian:
    """Multivariate normal density with a full covariance matrix.

    The covariance is validated (symmetric positive definite) by running a
    Cholesky factorization once at construction; the factor is kept for all
    later density evaluations and draws.
    """

    def __init__(self, mean, cov):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
        cov = np.asarray(cov, dtype=np.float64)
        if cov.ndim == 0:
            cov = cov.reshape(1, 1)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ValueError("covariance must be a square matrix")
        if cov.shape[0] != self.mean.shape[0]:
            raise ValueError(
                f"mean has dimension {self.mean.shape[0]} but covariance is "
                f"{cov.shape[0]}x{cov.shape[1]}"
            )
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12):
            i, j = np.unravel_index(np.argmax(np.abs(cov - cov.T)), cov.shape)
            raise ValueError(f"covariance not symmetric at entry ({i}, {j})")
        try:
            self._chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariance is not positive definite") from exc
        self.cov = cov
        self._log_det = 2.0 * float(np.sum(np.log(np.diag(self._chol))))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def log_density(self, y):
        """Log pdf at ``y`` (a point or a matrix of row-vector points)."""
        pts, single = _as_points(y, self.dim)
        # Solve chol @ z = (y - mean)^T; the squared norm of z is the
        # Mahalanobis quadratic form.
        z = solve_triangular(self._chol, (pts - self.mean).T, lower=True)
        quad = np.sum(z * z, axis=0)
        out = -0.5 * (self.dim * _LOG_2PI + self._log_det + quad)
        return float(out[0]) if single else out

    def sample(self, count: int, seed: int) -> np.ndarray:
        """Draw ``count`` i.i.d. points, deterministic for a given seed."""
        if count < 1:
            raise ValueError("count must be >= 1")
        rng = np.random.default_rng(seed)
        z = rng.standard_normal((count, self.dim))
        return self.mean + z @ self._chol.T

    def moments(self) -> tuple[np.ndarray, np.ndarray]:
        return self.mean.copy(), self.cov.copy()


class Mixture:
    """Finite mixture of Gaussians with fixed nonnegative weights."""

    def __init__(self, weights, components):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.components = list(components)
        if self.weights.ndim != 1 or len(self.components) != self.weights.shape[0]:
            raise ValueError("need one weight per component")
        if np.any(self.weights < 0.0):
            raise ValueError("mixture weights must be nonnegative")
        if abs(float(self.weights.sum()) - 1.0) > 1e-12:
            raise ValueError(f"mixture weights sum to {self.weights.sum()!r}, not 1")
        dims = {c.dim for c in self.components}
        if len(dims) != 1:
            raise ValueError("mixture components must share one dimension")
        # log(0) weights are tolerated: those components are never selected.
        with np.errstate(divide="ignore"):
            self._log_weights = np.log(self.weights)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def log_density(self, y):
        """Log pdf at ``y`` via log-sum-exp over component log pdfs."""
        pts, single = _as_points(y, self.dim)
        comp = np.stack([c.log_density(pts) for c in self.components])
        out = logsumexp(comp + self._log_weights[:, None], axis=0)
        return float(out[0]) if single else out

    def sample(self, count: int, seed: int) -> np.ndarray:
        """Draw by selecting a component per point, then a Gaussian draw."""
        if count < 1:
            raise ValueError("count must be >= 1")
        rng = np.random.default_rng(seed)
        which = rng.choice(len(self.components), size=count, p=self.weights)
        z = rng.standard_normal((count, self.dim))
        out = np.empty((count, self.dim))
        for k, comp in enumerate(self.components):
            mask = which == k
            if np.any(mask):
                out[mask] = comp.mean + z[mask] @ comp._chol.T
        return out

    def moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Mean and covariance of the mixture (law of total covariance)."""
        mean = sum(w * c.mean for w, c in zip(self.weights, self.components))
        cov = sum(
            w * (c.cov + np.outer(c.mean, c.mean))
            for w, c in zip(self.weights, self.components)
        ) - np.outer(mean, mean)
        return np.asarray(mean), np.asarray(cov)


Density = Gaussian | Mixture


@dataclass(frozen=True)
class BayesConstants:
    """The three scalars that reduce the Bayesian cost to a single integral.

    ``a`` scales the H1 density, ``b`` the H0 density in the signed
    likelihood combination; ``c`` is the cost floor attained when the system
    always declares H1.
    """

    a: float
    b: float
    c: float

    def __post_init__(self):
        if not (self.a > 0.0 and self.b > 0.0):
            raise ValueError(f"need a > 0 and b > 0, got a={self.a}, b={self.b}")


@dataclass(frozen=True)
class Scenario:
    """A complete detection problem for ``num_sensors`` parallel sensors.

    ``sensor_dims[j]`` is the observation dimension of sensor ``j`` (all
    shipped scenarios use 1); the joint densities live on the concatenated
    observation space of dimension ``sum(sensor_dims)``.
    """

    num_sensors: int
    prior_p0: float
    prior_p1: float
    cost_00: float
    cost_01: float
    cost_10: float
    cost_11: float
    density_h0: Density
    density_h1: Density
    sensor_dims: tuple[int, ...] = ()
    name: str = "scenario"

    def __post_init__(self):
        if self.num_sensors < 1:
            raise ValueError("num_sensors must be >= 1")
        dims = self.sensor_dims or tuple([1] * self.num_sensors)
        object.__setattr__(self, "sensor_dims", tuple(int(d) for d in dims))
        if len(self.sensor_dims) != self.num_sensors:
            raise ValueError("need one dimension per sensor")
        if any(d < 1 for d in self.sensor_dims):
            raise ValueError("sensor dimensions must be positive")
        for p, tag in ((self.prior_p0, "p0"), (self.prior_p1, "p1")):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"prior {tag}={p} outside [0, 1]")
        if abs(self.prior_p0 + self.prior_p1 - 1.0) > 1e-12:
            raise ValueError(
                f"priors must sum to 1, got {self.prior_p0} + {self.prior_p1}"
            )
        for cst, tag in (
            (self.cost_00, "C00"),
            (self.cost_01, "C01"),
            (self.cost_10, "C10"),
            (self.cost_11, "C11"),
        ):
            if cst < 0.0:
                raise ValueError(f"cost {tag}={cst} must be nonnegative")
        if not self.cost_01 > self.cost_11:
            raise ValueError("need C01 > C11 (missing H1 must cost more)")
        if not self.cost_10 > self.cost_00:
            raise ValueError("need C10 > C00 (false alarm must cost more)")
        total = self.total_dim
        for dens, tag in ((self.density_h0, "H0"), (self.density_h1, "H1")):
            if dens.dim != total:
                raise ValueError(
                    f"{tag} density has dimension {dens.dim}, "
                    f"expected {total} = sum of sensor dimensions"
                )

    @property
    def total_dim(self) -> int:
        return int(sum(self.sensor_dims))

    @property
    def sensor_slices(self) -> tuple[slice, ...]:
        """Column slice of the joint observation owned by each sensor."""
        edges = np.cumsum((0,) + self.sensor_dims)
        return tuple(slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]))

    def with_costs(self, cost_00, cost_01, cost_10, cost_11,
                   prior_p0=None, prior_p1=None) -> "Scenario":
        """Same densities and sensors, different cost/prior structure."""
        return Scenario(
            num_sensors=self.num_sensors,
            prior_p0=self.prior_p0 if prior_p0 is None else prior_p0,
            prior_p1=self.prior_p1 if prior_p1 is None else prior_p1,
            cost_00=cost_00,
            cost_01=cost_01,
            cost_10=cost_10,
            cost_11=cost_11,
            density_h0=self.density_h0,
            density_h1=self.density_h1,
            sensor_dims=self.sensor_dims,
            name=self.name,
        )


def bayes_constants(scenario: Scenario) -> BayesConstants:
    """Collapse priors and costs into the (a, b, c) triple.

    a = P1 (C01 - C11), b = P0 (C10 - C00), c = C10 P0 + C11 P1.
    """
    return BayesConstants(
        a=scenario.prior_p1 * (scenario.cost_01 - scenario.cost_11),
        b=scenario.prior_p0 * (scenario.cost_10 - scenario.cost_00),
        c=scenario.cost_10 * scenario.prior_p0 + scenario.cost_11 * scenario.prior_p1,
    )


def lhat_from_log_densities(constants: BayesConstants, logp0, logp1):
    """Signed combination a*p1 - b*p0 from log densities.

    The larger exponent is factored out so the result keeps full relative
    precision even when both densities underflow a direct exp(); joint
    densities of a hundred 1-D sensors routinely sit near exp(-120).
    """
    alpha = np.log(constants.a) + np.asarray(logp1, dtype=np.float64)
    beta = np.log(constants.b) + np.asarray(logp0, dtype=np.float64)
    m = np.maximum(alpha, beta)
    out = np.exp(m) * (np.exp(alpha - m) - np.exp(beta - m))
    return float(out) if out.ndim == 0 else out


def lhat(scenario: Scenario, y):
    """Evaluate a*p(y|H1) - b*p(y|H0) at one point or a matrix of points."""
    constants = bayes_constants(scenario)
    return lhat_from_log_densities(
        constants,
        scenario.density_h0.log_density(y),
        scenario.density_h1.log_density(y),
    )
