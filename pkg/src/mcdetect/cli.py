"""Command-line entry points and on-disk run artifacts.

Commands::

    mcdetect validate <cfg>
    mcdetect optimize <cfg> -o <dir>
    mcdetect roc      <cfg> -o <dir>
    mcdetect eval     <cfg> --labels <rule.csv> -o <dir>
    mcdetect paper    <1|2> -o <dir>

Exit codes: 0 success, 1 invalid input, 2 internal diagnostic (an
optimization failed to converge, which indicates inconsistent inputs).

Every run writes a ``manifest.json`` capturing the seeds, parameters, and
config hash; re-running from the same manifest reproduces all CSV outputs
byte for byte.  All randomness flows from the named seeds; nothing is
seeded from the clock.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .detector import (
    evaluate_system,
    load_rule_file,
    roc_sweep,
    save_roc,
)
from .fusion import parse_rule
from .model import bayes_constants
from .optimizer import (
    labels_from_affine,
    labels_from_lhat,
    labels_random,
    labels_constant,
    optimize,
    save_rule_file,
)
from .sampling import build_trial, draw_bank, save_bank
from .scenarios import hundred_sensor_scenario, ten_sensor_scenario

OK, BAD_INPUT, DIAGNOSTIC = 0, 1, 2

PAPER_DEFAULTS = {
    1: dict(bank_size=1000, eval_draws=10_000, grid_points=21,
            rules=("and", "or", "k-of-l:4"), init="affine:3,-4"),
    2: dict(bank_size=10_000, eval_draws=10_000, grid_points=9,
            rules=("paths:50",), init="lhat"),
}
PAPER_SEEDS = {1: (20260801, 20260802), 2: (20260811, 20260812)}
SWEEP_SPAN = (-2.0, 2.0)


def _init_labels(bank, spec: str):
    if spec == "lhat":
        return labels_from_lhat(bank)
    if spec.startswith("affine:"):
        scale, offset = (float(v) for v in spec.split(":", 1)[1].split(","))
        return labels_from_affine(bank, scale, offset)
    if spec.startswith("random:"):
        return labels_random(bank, int(spec.split(":", 1)[1]))
    if spec.startswith("const:"):
        return labels_constant(bank, int(spec.split(":", 1)[1]))
    raise ConfigError(f"unknown initialization {spec!r}")


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "seed_override", None) is not None:
        cfg.bank_seed = int(args.seed_override)
        cfg.eval_seed = int(args.seed_override) + 1
    if getattr(args, "max_sweeps", None) is not None:
        cfg.max_sweeps = int(args.max_sweeps)
    if getattr(args, "trial", None) is not None:
        cfg.trial = args.trial
    return cfg


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out_dir: Path, command: str, cfg_path, cfg: RunConfig | None,
                    outputs: list[str], extra: dict | None = None) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "config": str(cfg_path) if cfg_path else None,
        "config_sha256": _sha256(Path(cfg_path)) if cfg_path else None,
        "outputs": sorted(outputs),
    }
    if cfg is not None:
        manifest["parameters"] = {
            "fusion": cfg.fusion_list,
            "trial": cfg.trial,
            "bank_size": cfg.bank_size,
            "bank_seed": cfg.bank_seed,
            "eval_draws": cfg.eval_draws,
            "eval_seed": cfg.eval_seed,
            "sweep_grid": cfg.sweep_grid,
            "init": cfg.init,
            "max_sweeps": cfg.max_sweeps,
        }
    manifest.update(extra or {})
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return BAD_INPUT
    scn = cfg.scenario
    print(f"ok: {scn.name}")
    print(f"  sensors:  {scn.num_sensors} (dims {'/'.join(map(str, scn.sensor_dims))})")
    print(f"  priors:   P0={scn.prior_p0} P1={scn.prior_p1}")
    constants = bayes_constants(scn)
    print(f"  costs:    a={constants.a} b={constants.b} c={constants.c}")
    print(f"  fusion:   {', '.join(cfg.fusion_list)}")
    print(f"  sampling: trial={cfg.trial} n={cfg.bank_size} seed={cfg.bank_seed}")
    if cfg.sweep_grid:
        print(f"  sweep:    {len(cfg.sweep_grid)} ratios "
              f"[{cfg.sweep_grid[0]:.4g} .. {cfg.sweep_grid[-1]:.4g}]")
    return OK


def cmd_optimize(args) -> int:
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        if cfg.trial == "both":
            raise ConfigError("[sampling].trial: pick one trial for optimize "
                              "(or pass --trial)")
        rule = parse_rule(cfg.fusion, cfg.scenario.num_sensors)
    except ConfigError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return BAD_INPUT
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    trial = build_trial(cfg.scenario, cfg.trial)
    bank = draw_bank(trial, cfg.scenario, cfg.bank_size, cfg.bank_seed)
    constants = bayes_constants(cfg.scenario)
    labels, trace = optimize(
        bank, rule, constants, _init_labels(bank, cfg.init), cfg.max_sweeps
    )

    save_bank(bank, out_dir / "bank.csv")
    save_rule_file(bank, labels, out_dir / "labels.csv")
    with open(out_dir / "trace.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["update", "cost"])
        writer.writerow([0, repr(trace.initial_cost)])
        for t, cost in enumerate(trace.costs, start=1):
            writer.writerow([t, repr(cost)])
    _write_manifest(
        out_dir, "optimize", args.config, cfg,
        ["bank.csv", "labels.csv", "trace.csv"],
        extra={"sweeps_used": trace.sweeps_used, "converged": trace.converged,
               "final_cost": trace.costs[-1]},
    )
    print(f"final cost {trace.costs[-1]:.6g} after {trace.sweeps_used} sweeps "
          f"({'converged' if trace.converged else 'NOT CONVERGED'})")
    if not trace.converged:
        print("diagnostic: zero-flip termination not reached; inputs are "
              "likely inconsistent", file=sys.stderr)
        return DIAGNOSTIC
    return OK


def cmd_roc(args) -> int:
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        if cfg.sweep_grid is None:
            raise ConfigError("[sweep]: required for the roc command")
        rules = [(text, parse_rule(text, cfg.scenario.num_sensors))
                 for text in cfg.fusion_list]
    except ConfigError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return BAD_INPUT
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    trials = ["gaussian", "mixture"] if cfg.trial == "both" else [cfg.trial]
    outputs, all_converged = [], True
    centralized = None
    curves = []
    for trial_kind in trials:
        trial = build_trial(cfg.scenario, trial_kind)
        for text, rule in rules:
            dist, cent = roc_sweep(
                cfg.scenario, rule, trial, cfg.bank_size, cfg.eval_draws,
                cfg.sweep_grid, (cfg.bank_seed, cfg.eval_seed),
                init_fn=lambda b: _init_labels(b, cfg.init),
                max_sweeps=cfg.max_sweeps,
                eval_on_training=args.eval_on_training,
            )
            all_converged = all_converged and dist.metadata["converged"]
            curve_id = f"dist:{text}:{trial_kind}"
            fname = "roc_" + curve_id.replace(":", "_").replace("-", "") + ".csv"
            save_roc(dist, out_dir / fname, curve_id=curve_id)
            outputs.append(fname)
            curves.append((curve_id, dist))
            if centralized is None:
                centralized = cent
    save_roc(centralized, out_dir / "roc_centralized.csv", curve_id="centralized")
    outputs.append("roc_centralized.csv")
    _write_combined(out_dir, curves + [("centralized", centralized)])
    outputs.append("roc_combined.csv")
    _write_manifest(out_dir, "roc", args.config, cfg, outputs,
                    extra={"eval_on_training": args.eval_on_training})
    print(f"wrote {len(outputs)} files to {out_dir}")
    if not all_converged:
        print("diagnostic: at least one grid point did not converge", file=sys.stderr)
        return DIAGNOSTIC
    return OK


def _write_combined(out_dir: Path, curves) -> None:
    with open(out_dir / "roc_combined.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["sweep_parameter", "pf", "pd", "bayes_cost", "stderr_pf", "stderr_pd", "curve_id"]
        )
        for curve_id, curve in curves:
            for p in curve.points:
                writer.writerow(
                    [repr(p.sweep_parameter), repr(p.pf), repr(p.pd),
                     repr(p.bayes_cost), repr(p.stderr_pf), repr(p.stderr_pd), curve_id]
                )


def cmd_eval(args) -> int:
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        rule = parse_rule(cfg.fusion, cfg.scenario.num_sensors)
        deployed = load_rule_file(args.labels)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return BAD_INPUT
    if deployed.num_sensors != cfg.scenario.num_sensors:
        print(f"invalid: rule file covers {deployed.num_sensors} sensors, "
              f"scenario has {cfg.scenario.num_sensors}", file=sys.stderr)
        return BAD_INPUT
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    point = evaluate_system(cfg.scenario, deployed, rule, cfg.eval_draws, cfg.eval_seed)
    with open(out_dir / "operating_point.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pf", "pd", "bayes_cost", "stderr_pf", "stderr_pd"])
        writer.writerow([repr(point.pf), repr(point.pd), repr(point.bayes_cost),
                         repr(point.stderr_pf), repr(point.stderr_pd)])
    _write_manifest(out_dir, "eval", args.config, cfg, ["operating_point.csv"],
                    extra={"labels": str(args.labels)})
    print(f"pf={point.pf:.4f} pd={point.pd:.4f} cost={point.bayes_cost:.6g}")
    return OK


def cmd_paper(args) -> int:
    if args.example not in (1, 2):
        print(f"invalid: unknown example {args.example}; pick 1 or 2", file=sys.stderr)
        return BAD_INPUT
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = dict(PAPER_DEFAULTS[args.example])
    if args.grid_points is not None:
        spec["grid_points"] = int(args.grid_points)
    scenario = ten_sensor_scenario() if args.example == 1 else hundred_sensor_scenario()
    seeds = PAPER_SEEDS[args.example]
    grid = [float(v) for v in np.logspace(*SWEEP_SPAN, spec["grid_points"])]

    outputs, curves = [], []
    centralized = None
    for trial_kind in ("mixture", "gaussian"):
        trial = build_trial(scenario, trial_kind)
        for text in spec["rules"]:
            rule = parse_rule(text, scenario.num_sensors)
            dist, cent = roc_sweep(
                scenario, rule, trial, spec["bank_size"], spec["eval_draws"],
                grid, seeds, init_fn=lambda b: _init_labels(b, spec["init"]),
                eval_on_training=args.eval_on_training,
            )
            curve_id = f"dist:{text}:{trial_kind}"
            fname = "roc_" + curve_id.replace(":", "_").replace("-", "") + ".csv"
            save_roc(dist, out_dir / fname, curve_id=curve_id)
            outputs.append(fname)
            curves.append((curve_id, dist))
            if centralized is None:
                centralized = cent
    save_roc(centralized, out_dir / "roc_centralized.csv", curve_id="centralized")
    outputs.append("roc_centralized.csv")
    _write_combined(out_dir, curves + [("centralized", centralized)])
    outputs.append("roc_combined.csv")
    _write_manifest(
        out_dir, f"paper {args.example}", None, None, outputs,
        extra={"scenario": scenario.name, "seeds": seeds, "grid": grid,
               "parameters": spec},
    )

    print(f"{scenario.name}: distributed vs centralized (matched false-alarm rate)")
    header = f"{'curve':<28} {'points':>6} {'pf range':>17} {'mean pd gap':>12}"
    print(header)
    print("-" * len(header))
    for curve_id, curve in curves:
        pf = curve.pf_values()
        gap = float(np.mean(
            centralized.pd_at(pf, anchors=((0, 0), (1, 1))) - curve.pd_values()
        ))
        print(f"{curve_id:<28} {len(curve.points):>6} "
              f"[{pf.min():.3f}, {pf.max():.3f}] {gap:>12.4f}")
    return OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mcdetect",
        description="Distributed detection rule design by Monte Carlo "
                    "importance sampling and cyclic optimization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="check a scenario config")
    p_val.add_argument("config")
    p_val.set_defaults(fn=cmd_validate)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--out", required=True, help="output directory")
    common.add_argument("--seed-override", type=int, default=None,
                        help="replace the sampling seed (evaluation seed becomes +1)")
    common.add_argument("--max-sweeps", type=int, default=None)
    common.add_argument("--trial", choices=("gaussian", "mixture"), default=None)

    p_opt = sub.add_parser("optimize", parents=[common],
                           help="draw a bank and optimize sensor rules")
    p_opt.add_argument("config")
    p_opt.set_defaults(fn=cmd_optimize)

    p_roc = sub.add_parser("roc", parents=[common], help="sweep ROC curves")
    p_roc.add_argument("config")
    p_roc.add_argument("--eval-on-training", action="store_true",
                       help="score on the training bank (importance-reweighted) "
                            "instead of fresh draws")
    p_roc.set_defaults(fn=cmd_roc)

    p_eval = sub.add_parser("eval", parents=[common],
                            help="evaluate a saved rule file")
    p_eval.add_argument("config")
    p_eval.add_argument("--labels", required=True, help="rule CSV from optimize")
    p_eval.set_defaults(fn=cmd_eval)

    p_paper = sub.add_parser("paper", parents=[common],
                             help="run a built-in benchmark end to end")
    p_paper.add_argument("example", type=int, choices=(1, 2))
    p_paper.add_argument("--grid-points", type=int, default=None)
    p_paper.add_argument("--eval-on-training", action="store_true")
    p_paper.set_defaults(fn=cmd_paper)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
