"""Distributed detection rule design by Monte Carlo importance sampling.

Given a fixed fusion rule and possibly dependent multi-sensor observation
densities, this package searches for the local sensor decision rules that
minimize the Bayesian detection cost, approximated on a frozen importance
sample.  Cyclic person-by-person updates converge in finitely many sweeps
at O(L*N) fusion evaluations per sweep, which makes hundred-sensor
networks tractable; for the AND and OR rules the optimum is also available
in closed form.  Deployment to fresh observations is by nearest-sample
lookup, with a centralized likelihood-ratio baseline and ROC sweeps for
evaluation.
"""

__version__ = "0.1.0"

from .model import (
    BayesConstants,
    Density,
    Gaussian,
    Mixture,
    Scenario,
    bayes_constants,
    lhat,
)
from .sampling import SampleBank, TrialDistribution, build_trial, draw_bank, rederive_bank
from .fusion import (
    AndRule,
    FusionRule,
    KofLRule,
    OrRule,
    PredicateRule,
    TruthTableRule,
    parse_rule,
    paths_rule,
)
from .optimizer import (
    OptimizeTrace,
    RuleLabels,
    analytic_and_or,
    cost_mc,
    exhaustive_optimum,
    indicator,
    optimize,
    sweep,
)
from .detector import (
    DeployedRule,
    OperatingPoint,
    RocCurve,
    centralized_decide,
    deploy,
    evaluate_system,
    roc_sweep,
)
from .scenarios import hundred_sensor_scenario, ten_sensor_scenario, two_gaussian_scenario

__all__ = [
    "BayesConstants",
    "Density",
    "Gaussian",
    "Mixture",
    "Scenario",
    "bayes_constants",
    "lhat",
    "SampleBank",
    "TrialDistribution",
    "build_trial",
    "draw_bank",
    "rederive_bank",
    "AndRule",
    "FusionRule",
    "KofLRule",
    "OrRule",
    "PredicateRule",
    "TruthTableRule",
    "parse_rule",
    "paths_rule",
    "OptimizeTrace",
    "RuleLabels",
    "analytic_and_or",
    "cost_mc",
    "exhaustive_optimum",
    "indicator",
    "optimize",
    "sweep",
    "DeployedRule",
    "OperatingPoint",
    "RocCurve",
    "centralized_decide",
    "deploy",
    "evaluate_system",
    "roc_sweep",
    "hundred_sensor_scenario",
    "ten_sensor_scenario",
    "two_gaussian_scenario",
]
