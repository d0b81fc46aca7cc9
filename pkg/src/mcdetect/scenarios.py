"""Built-in benchmark scenarios for the shipped experiments.

Both model a signal observed through independent per-sensor noise, which
makes the joint observations conditionally dependent under H1: the signal
is common to all sensors (ten-sensor case) or to the two sensors on the
crossed path (hundred-sensor case).
"""

from __future__ import annotations

import numpy as np

from .model import Gaussian, Mixture, Scenario

__all__ = ["ten_sensor_scenario", "hundred_sensor_scenario", "two_gaussian_scenario"]

SIGNAL_MEAN = 1.0
SIGNAL_VAR = 0.4
NOISE_VAR = 0.6


def ten_sensor_scenario() -> Scenario:
    """Ten sensors, each observing signal-plus-noise under H1.

    H0: y_i = v_i with v_i ~ N(0, 0.6) independent.
    H1: y_i = s + v_i with one shared s ~ N(1, 0.4), so the H1 covariance
    is 0.6 on the diagonal plus 0.4 everywhere.
    """
    num = 10
    h0 = Gaussian(np.zeros(num), NOISE_VAR * np.eye(num))
    h1 = Gaussian(
        np.full(num, SIGNAL_MEAN),
        NOISE_VAR * np.eye(num) + SIGNAL_VAR * np.ones((num, num)),
    )
    return Scenario(
        num_sensors=num,
        prior_p0=0.5,
        prior_p1=0.5,
        cost_00=0.0,
        cost_01=1.0,
        cost_10=1.0,
        cost_11=0.0,
        density_h0=h0,
        density_h1=h1,
        name="ten-sensor",
    )


def hundred_sensor_scenario() -> Scenario:
    """One hundred sensors on fifty two-sensor paths, one crossed at random.

    H0: all sensors see pure noise, N(0, 0.6 I).
    H1: the target crosses one of the 50 paths uniformly; the two sensors
    on that path see the shared signal, giving a 50-component mixture whose
    k-th component adds mean (1, 1) and covariance [[0.4, 0.4], [0.4, 0.4]]
    on the k-th sensor pair.
    """
    num = 100
    pairs = num // 2
    h0 = Gaussian(np.zeros(num), NOISE_VAR * np.eye(num))
    components = []
    for k in range(pairs):
        mean = np.zeros(num)
        mean[2 * k : 2 * k + 2] = SIGNAL_MEAN
        cov = NOISE_VAR * np.eye(num)
        cov[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] += SIGNAL_VAR * np.ones((2, 2))
        components.append(Gaussian(mean, cov))
    h1 = Mixture(np.full(pairs, 1.0 / pairs), components)
    return Scenario(
        num_sensors=num,
        prior_p0=0.5,
        prior_p1=0.5,
        cost_00=0.0,
        cost_01=1.0,
        cost_10=1.0,
        cost_11=0.0,
        density_h0=h0,
        density_h1=h1,
        name="hundred-sensor-paths",
    )


def two_gaussian_scenario(
    mean0: float = 0.0,
    var0: float = NOISE_VAR,
    mean1: float = SIGNAL_MEAN,
    var1: float = SIGNAL_VAR + NOISE_VAR,
) -> Scenario:
    """Single scalar sensor with Gaussian densities under both hypotheses.

    Small enough for quadrature ground truth; used in estimator-error
    studies and docs.
    """
    return Scenario(
        num_sensors=1,
        prior_p0=0.5,
        prior_p1=0.5,
        cost_00=0.0,
        cost_01=1.0,
        cost_10=1.0,
        cost_11=0.0,
        density_h0=Gaussian([mean0], [[var0]]),
        density_h1=Gaussian([mean1], [[var1]]),
        name="two-gaussian",
    )
