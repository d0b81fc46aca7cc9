"""Scenario configuration files: schema, parsing, and validation.

A run is described by one TOML document.  Sections: ``[priors]``,
``[costs]``, ``[h0]``/``[h1]`` (density specs), ``[fusion]``,
``[sampling]``, ``[evaluation]``, and optionally ``[sweep]``,
``[optimizer]``, and ``[sensors]``.  Unknown sections or keys are
rejected with the offending location in the message.

Density specs::

    [h0]
    type = "gaussian"
    dim = 10
    mean = 0.0                      # scalar broadcast, or a list
    cov = { diagonal = 0.6 }        # or { equicorrelated = [var, offdiag] },
                                    # a scalar (diagonal), or a full matrix

    [h1]
    type = "mixture"
    dim = 4
    [[h1.components]]
    weight = 0.5
    mean = [1.0, 1.0, 0.0, 0.0]
    cov = { diagonal = 0.6 }
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .model import Density, Gaussian, Mixture, Scenario

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config"]


class ConfigError(ValueError):
    """Configuration problem, message prefixed with its file location."""


@dataclass
class RunConfig:
    """Validated scenario plus all run parameters from one config file."""

    scenario: Scenario
    fusion: str
    fusion_list: list[str]
    trial: str
    bank_size: int
    bank_seed: int
    eval_draws: int
    eval_seed: int
    sweep_grid: list[float] | None = None
    init: str = "lhat"
    max_sweeps: int = 100
    raw: dict = field(default_factory=dict, repr=False)


_SECTIONS = {
    "priors",
    "costs",
    "h0",
    "h1",
    "fusion",
    "sampling",
    "evaluation",
    "sweep",
    "optimizer",
    "sensors",
}
_KEYS = {
    "priors": {"p0", "p1"},
    "costs": {"c00", "c01", "c10", "c11"},
    "h0": {"type", "dim", "mean", "cov", "components"},
    "h1": {"type", "dim", "mean", "cov", "components"},
    "fusion": {"rule", "rules"},
    "sampling": {"trial", "n", "seed"},
    "evaluation": {"m", "seed"},
    "sweep": {"grid"},
    "optimizer": {"init", "max_sweeps"},
    "sensors": {"dims"},
}


def _need(table: dict, section: str, key: str):
    if key not in table:
        raise ConfigError(f"[{section}]: missing required key {key!r}")
    return table[key]


def _reject_unknown(table: dict, section: str) -> None:
    for key in table:
        if key not in _KEYS[section]:
            raise ConfigError(f"[{section}].{key}: unknown key")


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _integer(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return int(value)


def _mean_vector(value, dim: int, where: str) -> np.ndarray:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return np.full(dim, float(value))
    if isinstance(value, list):
        if len(value) != dim:
            raise ConfigError(f"{where}: mean has {len(value)} entries, dim is {dim}")
        return np.array([_number(v, where) for v in value])
    raise ConfigError(f"{where}: mean must be a number or a list")


def _cov_matrix(value, dim: int, where: str) -> np.ndarray:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value) * np.eye(dim)
    if isinstance(value, dict):
        if set(value) == {"diagonal"}:
            return _number(value["diagonal"], where) * np.eye(dim)
        if set(value) == {"equicorrelated"}:
            pair = value["equicorrelated"]
            if not (isinstance(pair, list) and len(pair) == 2):
                raise ConfigError(f"{where}: equicorrelated needs [variance, offdiag]")
            var, off = (_number(v, where) for v in pair)
            return (var - off) * np.eye(dim) + off * np.ones((dim, dim))
        if set(value) == {"diagonal", "block_start", "block"}:
            # Diagonal base with one explicit square block overwriting it.
            mat = _number(value["diagonal"], where) * np.eye(dim)
            start = _integer(value["block_start"], f"{where}.block_start")
            block = np.array(
                [[_number(v, where) for v in row] for row in value["block"]],
                dtype=np.float64,
            )
            if block.ndim != 2 or block.shape[0] != block.shape[1]:
                raise ConfigError(f"{where}.block: must be square")
            if start < 0 or start + block.shape[0] > dim:
                raise ConfigError(
                    f"{where}.block_start: block [{start}, {start + block.shape[0]}) "
                    f"falls outside dimension {dim}"
                )
            mat[start : start + block.shape[0], start : start + block.shape[0]] = block
            return mat
        raise ConfigError(
            f"{where}: covariance shorthand must be 'diagonal', 'equicorrelated', "
            f"or 'diagonal'+'block_start'+'block'"
        )
    if isinstance(value, list):
        mat = np.array(
            [[_number(v, where) for v in row] for row in value], dtype=np.float64
        )
        if mat.shape != (dim, dim):
            raise ConfigError(f"{where}: covariance is {mat.shape}, expected ({dim}, {dim})")
        return mat
    raise ConfigError(f"{where}: covariance must be a number, table, or matrix")


def _density(table: dict, section: str) -> Density:
    _reject_unknown(table, section)
    kind = _need(table, section, "type")
    dim = _integer(_need(table, section, "dim"), f"[{section}].dim")
    if dim < 1:
        raise ConfigError(f"[{section}].dim: must be positive")
    try:
        if kind == "gaussian":
            if "components" in table:
                raise ConfigError(f"[{section}].components: not valid for gaussian type")
            mean = _mean_vector(_need(table, section, "mean"), dim, f"[{section}].mean")
            cov = _cov_matrix(_need(table, section, "cov"), dim, f"[{section}].cov")
            return Gaussian(mean, cov)
        if kind == "mixture":
            comps = _need(table, section, "components")
            if not isinstance(comps, list) or not comps:
                raise ConfigError(f"[{section}].components: need a nonempty list")
            weights, members = [], []
            for idx, comp in enumerate(comps):
                where = f"[[{section}.components]] #{idx + 1}"
                extra = set(comp) - {"weight", "mean", "cov"}
                if extra:
                    raise ConfigError(f"{where}.{extra.pop()}: unknown key")
                weights.append(_number(comp.get("weight"), f"{where}.weight"))
                members.append(
                    Gaussian(
                        _mean_vector(comp.get("mean"), dim, f"{where}.mean"),
                        _cov_matrix(comp.get("cov"), dim, f"{where}.cov"),
                    )
                )
            return Mixture(weights, members)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[{section}]: {exc}") from exc
    raise ConfigError(f"[{section}].type: unknown density type {kind!r}")


def parse_config(data: dict, name: str = "scenario") -> RunConfig:
    """Validate a parsed TOML document and build the run configuration."""
    for section in data:
        if section not in _SECTIONS:
            raise ConfigError(f"[{section}]: unknown section")
    for section in ("priors", "costs", "h0", "h1", "fusion", "sampling", "evaluation"):
        if section not in data:
            raise ConfigError(f"[{section}]: missing required section")
        if not isinstance(data[section], dict):
            raise ConfigError(f"[{section}]: expected a section")

    for section in ("priors", "costs", "fusion", "sampling", "evaluation"):
        _reject_unknown(data[section], section)

    priors = data["priors"]
    p0 = _number(_need(priors, "priors", "p0"), "[priors].p0")
    p1 = _number(_need(priors, "priors", "p1"), "[priors].p1")
    costs = data["costs"]
    c = {k: _number(_need(costs, "costs", k), f"[costs].{k}") for k in ("c00", "c01", "c10", "c11")}

    h0 = _density(data["h0"], "h0")
    h1 = _density(data["h1"], "h1")

    dims = None
    if "sensors" in data:
        _reject_unknown(data["sensors"], "sensors")
        raw_dims = _need(data["sensors"], "sensors", "dims")
        if not isinstance(raw_dims, list):
            raise ConfigError("[sensors].dims: expected a list of integers")
        dims = tuple(_integer(v, "[sensors].dims") for v in raw_dims)

    num_sensors = len(dims) if dims else h0.dim
    try:
        scenario = Scenario(
            num_sensors=num_sensors,
            prior_p0=p0,
            prior_p1=p1,
            cost_00=c["c00"],
            cost_01=c["c01"],
            cost_10=c["c10"],
            cost_11=c["c11"],
            density_h0=h0,
            density_h1=h1,
            sensor_dims=dims or (),
            name=name,
        )
    except ValueError as exc:
        raise ConfigError(f"scenario: {exc}") from exc

    fusion_section = data["fusion"]
    rule = fusion_section.get("rule")
    rules = fusion_section.get("rules")
    if rule is None and not rules:
        raise ConfigError("[fusion]: need 'rule' or 'rules'")
    if rules is not None and not (
        isinstance(rules, list) and all(isinstance(r, str) for r in rules)
    ):
        raise ConfigError("[fusion].rules: expected a list of rule strings")
    if rule is not None and not isinstance(rule, str):
        raise ConfigError("[fusion].rule: expected a string")
    fusion = rule or rules[0]
    fusion_list = list(rules) if rules else [fusion]

    sampling = data["sampling"]
    trial = _need(sampling, "sampling", "trial")
    if trial not in ("gaussian", "mixture", "both"):
        raise ConfigError(f"[sampling].trial: {trial!r} not in gaussian/mixture/both")
    bank_size = _integer(_need(sampling, "sampling", "n"), "[sampling].n")
    bank_seed = _integer(_need(sampling, "sampling", "seed"), "[sampling].seed")
    if bank_size < 1:
        raise ConfigError("[sampling].n: must be >= 1")

    evaluation = data["evaluation"]
    eval_draws = _integer(_need(evaluation, "evaluation", "m"), "[evaluation].m")
    eval_seed = _integer(_need(evaluation, "evaluation", "seed"), "[evaluation].seed")
    if eval_draws < 1:
        raise ConfigError("[evaluation].m: must be >= 1")

    sweep_grid = None
    if "sweep" in data:
        _reject_unknown(data["sweep"], "sweep")
        grid = _need(data["sweep"], "sweep", "grid")
        if isinstance(grid, dict) and set(grid) == {"logspace"}:
            spec = grid["logspace"]
            if not (isinstance(spec, list) and len(spec) == 3):
                raise ConfigError("[sweep].grid: logspace needs [lo_exp, hi_exp, count]")
            lo, hi = _number(spec[0], "[sweep].grid"), _number(spec[1], "[sweep].grid")
            count = _integer(spec[2], "[sweep].grid")
            if count < 1:
                raise ConfigError("[sweep].grid: count must be >= 1")
            sweep_grid = [float(v) for v in np.logspace(lo, hi, count)]
        elif isinstance(grid, list) and grid:
            sweep_grid = [_number(v, "[sweep].grid") for v in grid]
        else:
            raise ConfigError("[sweep].grid: expected a list or { logspace = [...] }")
        if any(v <= 0.0 for v in sweep_grid):
            raise ConfigError("[sweep].grid: ratios must be positive")

    init = "lhat"
    max_sweeps = 100
    if "optimizer" in data:
        _reject_unknown(data["optimizer"], "optimizer")
        init = data["optimizer"].get("init", "lhat")
        if not isinstance(init, str):
            raise ConfigError("[optimizer].init: expected a string")
        _validate_init(init)
        if "max_sweeps" in data["optimizer"]:
            max_sweeps = _integer(data["optimizer"]["max_sweeps"], "[optimizer].max_sweeps")
            if max_sweeps < 1:
                raise ConfigError("[optimizer].max_sweeps: must be >= 1")

    # The fusion strings are validated against the sensor count here so a
    # bad rule fails at load time with its location.
    from .fusion import parse_rule

    for text in fusion_list:
        try:
            parse_rule(text, scenario.num_sensors)
        except ValueError as exc:
            raise ConfigError(f"[fusion]: {exc}") from exc

    return RunConfig(
        scenario=scenario,
        fusion=fusion,
        fusion_list=fusion_list,
        trial=trial,
        bank_size=bank_size,
        bank_seed=bank_seed,
        eval_draws=eval_draws,
        eval_seed=eval_seed,
        sweep_grid=sweep_grid,
        init=init,
        max_sweeps=max_sweeps,
        raw=data,
    )


def _validate_init(text: str) -> None:
    if text == "lhat" or text in ("const:0", "const:1"):
        return
    if text.startswith("affine:"):
        parts = text.split(":", 1)[1].split(",")
        if len(parts) != 2:
            raise ConfigError("[optimizer].init: affine needs 'affine:scale,offset'")
        try:
            float(parts[0]), float(parts[1])
        except ValueError as exc:
            raise ConfigError(f"[optimizer].init: {exc}") from exc
        return
    if text.startswith("random:"):
        try:
            int(text.split(":", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"[optimizer].init: {exc}") from exc
        return
    raise ConfigError(f"[optimizer].init: unknown initialization {text!r}")


def load_config(path) -> RunConfig:
    """Parse and validate a TOML scenario file."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    from pathlib import Path

    return parse_config(data, name=Path(path).stem)
