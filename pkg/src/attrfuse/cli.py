"""Command-line interface: calibration, observation fusion, experiments, theorem suites."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from attrfuse._version import __version__
from attrfuse.catalog import compute_stats, load_catalog
from attrfuse.classifier import load_models, save_models
from attrfuse.experiments import (
    experiment1_distribution_shift,
    experiment2_threshold_comparison,
    experiment3_attribute_families,
    theorem_suites,
    write_exp1_csvs,
    write_exp2_csv,
    write_exp3_csv,
    write_manifest,
    write_theorem_csv,
)
from attrfuse.fusion import decide, init_posterior, make_observation, posterior, update
from attrfuse.simulator import CALIBRATION_STREAM, PICK_STREAM, calibrate_scenario, derived_rng, load_scenario


def _read_observation_lines(path: Path) -> list[tuple[str, int, float]]:
    """Parse observation lines `attribute,bin,score`; a header row and #-comments are skipped."""
    rows: list[tuple[str, int, float]] = []
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = [p.strip() for p in stripped.split(",")]
        if len(parts) != 3:
            raise SystemExit(f"{path}:{line_no}: expected `attribute,bin,score`, got {line!r}")
        if line_no == 1 and parts == ["attribute", "bin", "score"]:
            continue
        try:
            rows.append((parts[0], int(parts[1]), float(parts[2])))
        except ValueError:
            raise SystemExit(f"{path}:{line_no}: could not parse bin/score in {line!r}") from None
    return rows


def _cmd_calibrate(args) -> int:
    scenario = load_scenario(args.scenario)
    seed = scenario.seed if args.seed is None else args.seed
    models = calibrate_scenario(scenario, derived_rng(seed, CALIBRATION_STREAM))
    save_models(models, scenario.catalog, args.out)
    for i in sorted(models):
        region = sorted(models[i].reliable_region)
        print(f"{scenario.catalog.attributes[i]}: reliable bins {region if region else 'none'}")
    print(f"wrote {len(models)} models to {args.out}")
    return 0


def _cmd_fuse(args) -> int:
    catalog = load_catalog(args.catalog)
    models = load_models(args.model, catalog)
    stats = compute_stats(catalog)
    state = init_posterior(catalog)
    adopted = skipped = 0
    for attribute_id, bin_index, score in _read_observation_lines(Path(args.obs)):
        i = catalog.attribute_index(attribute_id)
        if i not in models:
            raise SystemExit(f"no calibrated model for attribute {attribute_id!r}")
        obs = make_observation(models[i], bin_index, score)
        new_state = update(state, obs, models[i], stats)
        if new_state is state:
            skipped += 1
        else:
            adopted += 1
        state = new_state
    decision = decide(state, catalog, rng=derived_rng(args.seed, PICK_STREAM))
    probs = posterior(state)
    record = {
        "winner": None if decision.winner is None else catalog.objects[decision.winner],
        "candidates": [catalog.objects[j] for j in decision.candidates],
        "tie_broken_by": decision.tie_broken_by,
        "posterior": {catalog.objects[j]: float(probs[j]) for j in range(catalog.n_objects)},
        "adopted_observations": adopted,
        "discarded_observations": skipped,
        "positive_counts": {catalog.attributes[i]: int(state.n_pos[i]) for i in range(catalog.n_attributes) if state.n_pos[i]},
        "negative_counts": {catalog.attributes[i]: int(state.n_neg[i]) for i in range(catalog.n_attributes) if state.n_neg[i]},
        "saturated": state.saturated,
    }
    text = json.dumps(record, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def _cmd_exp1(args) -> int:
    scenario = load_scenario(args.scenario)
    seed = scenario.seed if args.seed is None else args.seed
    n = args.trials
    result = experiment1_distribution_shift(scenario, n_pos=n, n_neg=n, seed=seed)
    paths = write_exp1_csvs(result, args.out)
    write_manifest(args.out, "exp1", seed, n or result.n_pos, scenario=scenario)
    for k, overlap in enumerate(result.overlap):
        print(f"bin {k} {scenario.bins[k]}: overlap {overlap:.4f}")
    print(f"wrote {', '.join(str(p) for p in paths)}")
    return 0


def _cmd_exp2(args) -> int:
    scenario = load_scenario(args.scenario)
    seed = scenario.seed if args.seed is None else args.seed
    curve = experiment2_threshold_comparison(scenario, trials=args.trials, seed=seed)
    path = write_exp2_csv(curve, args.out)
    write_manifest(args.out, "exp2", seed, args.trials, scenario=scenario)
    print("K  two_threshold  single_threshold  random_tie")
    for idx, k in enumerate(curve.k_values):
        print(
            f"{k:<3}{curve.two_threshold_error[idx]:<15.4f}"
            f"{curve.single_threshold_error[idx]:<18.4f}{curve.random_tie_error[idx]:.4f}"
        )
    print(f"wrote {path}")
    return 0


def _cmd_exp3(args) -> int:
    scenario = load_scenario(args.scenario)
    seed = scenario.seed if args.seed is None else args.seed
    result = experiment3_attribute_families(scenario, trials=args.trials, seed=seed)
    path = write_exp3_csv(result, args.out)
    write_manifest(args.out, "exp3", seed, args.trials, scenario=scenario)
    header = "bin        " + "".join(f"{name:<10}" for name in result.systems)
    print(header)
    for k, interval in enumerate(result.bins):
        cells = "".join(f"{result.accuracy[k, s]:<10.4f}" for s in range(len(result.systems)))
        print(f"{str(interval):<11}{cells}")
    print(f"wrote {path}")
    return 0


def _cmd_theorems(args) -> int:
    report = theorem_suites(trials=args.trials, seed=args.seed)
    status = "PASS" if report.exact_pass else "FAIL"
    print(
        f"[{status}] exact recognition: {report.exact_correct}/{report.exact_cases} "
        "randomized bound-satisfying cases decided correctly"
    )
    curve = ", ".join(f"K={k}: {e:.4f}" for k, e in zip(report.convergence_k, report.convergence_error))
    status = "PASS" if report.convergence_pass else "FAIL"
    print(
        f"[{status}] convergence: error {curve} "
        f"(requires decrease over the first two checkpoints and final < {report.convergence_ceiling})"
    )
    if args.out:
        write_theorem_csv(report, args.out)
        write_manifest(args.out, "theorems", args.seed, args.trials)
        print(f"wrote {Path(args.out) / 'theorem_convergence.csv'}")
    return 0 if report.all_pass else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="attrfuse",
        description="Attribute-classifier fusion: calibration, observation fusion, and experiment harnesses.",
    )
    parser.add_argument("--version", action="version", version=f"attrfuse {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="calibrate two-threshold models from a scenario's training draws")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("fuse", help="classify raw observation lines and report the MAP decision")
    p.add_argument("--catalog", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--obs", required=True, help="CSV lines: attribute,bin,score")
    p.add_argument("--seed", type=int, default=0, help="seed for the tie-breaking pick")
    p.add_argument("--out", default=None, help="write the decision record here instead of stdout")
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("exp1", help="score-distribution shift across bins (KDE curves + overlap)")
    p.add_argument("--scenario", required=True)
    p.add_argument("--trials", type=int, default=None, help="draws per bin per class (default: calibration counts)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_exp1)

    p = sub.add_parser("exp2", help="two-threshold fusion vs single-threshold baseline error curves")
    p.add_argument("--scenario", required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_exp2)

    p = sub.add_parser("exp3", help="per-bin accuracy of fine/coarse/all attribute systems")
    p.add_argument("--scenario", required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_exp3)

    p = sub.add_parser("theorems", help="run the exact-recognition and convergence Monte Carlo suites")
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_theorems)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
