#!/usr/bin/env python3
"""
Command-line entry point for the output-gap toolkit.

    python og_cli.py estimate  --spec uni-lt --gdp gdp.csv --iters 2000 --burnin 1000 --seed 7
    python og_cli.py simulate  --spec biv-lt --n 216 --seed 3 --out sim/
    python og_cli.py summarize --draws output/draws.csv
    python og_cli.py compare   --first uni/states.csv --second biv/states.csv
"""
import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from dotenv import load_dotenv
from pydantic import ValidationError

load_dotenv()

from config import settings
from data import artifacts
from data.schema_definitions import RunConfig
from data.series_loader import (
    SeriesFile,
    format_quarter,
    levels_from_inflation,
    levels_from_output,
    load_series,
    transform,
    write_series,
)
from output_gap.diagnostics import (
    chain_autocorrelations,
    cycle_correlation,
    effective_sample_sizes,
    posterior_summary,
    smoothed_map_states,
    turning_points,
)
from output_gap.errors import OutputGapError, StructuralError
from output_gap.models import ModelSpec, ParameterVector, simulate_data
from output_gap.priors import default_priors, prior_mean_vector, prior_moments
from output_gap.sampler import PosteriorDraws, merge_draws, run_chains

logger = logging.getLogger(__name__)

# Flag name -> RunConfig field
ESTIMATE_FLAGS = {
    "spec": "spec",
    "gdp": "gdp_path",
    "cpi": "cpi_path",
    "out": "output_dir",
    "iters": "n_iter",
    "burnin": "burn_in",
    "thin": "thin",
    "seed": "seed",
    "C": "C",
    "lambda_scale": "lambda_scale",
    "chains": "chains",
    "level": "hpd_level",
    "proposal_init": "proposal_init",
}


def _parse_assignments(items: Optional[List[str]], flag: str) -> Dict[str, List[float]]:
    """Parse repeated NAME=v1[,v2] flags."""
    parsed = {}
    for item in items or []:
        name, sep, raw = item.partition("=")
        if not sep:
            raise StructuralError(f"{flag} expects NAME=VALUE, got '{item}'")
        try:
            parsed[name.strip()] = [float(v) for v in raw.split(",")]
        except ValueError:
            raise StructuralError(f"{flag} {name}: '{raw}' is not numeric")
    return parsed


def build_run_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> RunConfig:
    """Merge --config (a RunConfig JSON or a previous manifest) with explicit flags."""
    values: Dict = {}
    if args.config:
        payload = artifacts.read_json(Path(args.config))
        values.update(payload.get("run_config", payload))
    for flag, field_name in ESTIMATE_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            values[field_name] = value
    if args.exact_tau:
        values["exact_tau_conditional"] = True
    for name, numbers in _parse_assignments(args.prior, "--prior").items():
        if len(numbers) != 2:
            raise StructuralError(f"--prior {name} needs two hyperparameters a,b")
        values.setdefault("prior_overrides", {})[name] = {"a": numbers[0], "b": numbers[1]}

    spec_label = values.get("spec")
    if spec_label and spec_label.lower().startswith("biv") and not values.get("cpi_path"):
        parser.error(f"--spec {spec_label} requires --cpi")
    if values.get("seed") is None:
        values["seed"] = int(np.random.SeedSequence().generate_state(1, dtype=np.uint64)[0])
        logger.info(f"No seed given, using {values['seed']}")
    return RunConfig(**values)


def _estimate_summary(
    run_config: RunConfig,
    data,
    draws: PosteriorDraws,
    out_dir: Path,
    lam_upper: float,
    kappa_init: float,
    write_states: bool = True,
) -> Dict:
    """Write draws, summary and autocorrelation files; returns manifest diagnostics."""
    rows = posterior_summary(draws, level=run_config.hpd_level)
    artifacts.write_draws_csv(draws, out_dir / artifacts.DRAWS_FILE)
    artifacts.write_summary_csv(rows, out_dir / artifacts.SUMMARY_FILE)
    artifacts.write_autocorrelation_csv(
        chain_autocorrelations(draws), out_dir / artifacts.AUTOCORRELATION_FILE
    )
    if write_states:
        map_states = smoothed_map_states(draws, data.observations, lam_upper, kappa_init)
        artifacts.write_states_csv(
            data, draws, map_states, out_dir / artifacts.STATES_FILE, run_config.hpd_level
        )
        cycle = map_states[:, draws.spec.state_index("psi")]
        artifacts.write_turning_points_csv(
            turning_points(cycle), data.date_labels(), out_dir / artifacts.TURNING_POINTS_FILE
        )
    return {"effective_sample_size": effective_sample_sizes(draws)}


def cmd_estimate(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    run_config = build_run_config(args, parser)
    spec = run_config.model_spec()
    prior = run_config.prior_config()
    chain_settings = run_config.to_chain_settings()
    out_dir = Path(run_config.output_dir)

    gdp = load_series(Path(run_config.gdp_path), "gdp")
    cpi = load_series(Path(run_config.cpi_path), "cpi") if spec.is_bivariate else None
    data = transform(gdp, cpi)
    logger.info(f"Estimating {spec.label} on {data.n_obs} quarters")

    started = time.perf_counter()
    chains = run_chains(spec, prior, data.observations, chain_settings, run_config.chains)
    wall_time = time.perf_counter() - started

    if len(chains) > 1:
        for k, chain in enumerate(chains, start=1):
            _estimate_summary(
                run_config, data, chain, out_dir / f"chain_{k}",
                prior.lam_upper, chain_settings.kappa_init, write_states=False,
            )
    pooled = merge_draws(chains) if len(chains) > 1 else chains[0]
    diagnostics = _estimate_summary(
        run_config, data, pooled, out_dir, prior.lam_upper, chain_settings.kappa_init
    )

    manifest = {
        "run_config": run_config.model_dump(mode="json"),
        "spec": spec.label,
        "seed": run_config.seed,
        "chain_seeds": [c.metadata.get("seed") for c in chains],
        "prior": prior.to_dict(),
        "prior_moments": prior_moments(prior).to_dict(orient="records"),
        "acceptance_rates": pooled.acceptance_rates,
        "final_proposals": [c.final_proposals for c in chains],
        "effective_sample_size": diagnostics["effective_sample_size"],
        "n_obs": data.n_obs,
        "n_keep": pooled.n_keep,
        "date_range": [data.date_labels()[0], data.date_labels()[-1]],
        "wall_time_seconds": wall_time,
    }
    artifacts.write_json(manifest, out_dir / artifacts.MANIFEST_FILE)
    logger.info(f"Artifacts written to {out_dir}")
    return 0


def cmd_simulate(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    spec = ModelSpec.from_label(args.spec)
    prior = default_priors().for_spec(spec)
    params = prior_mean_vector(prior)
    if args.params:
        params = ParameterVector.from_dict(artifacts.read_json(Path(args.params)))
    overrides = {name: vals[0] for name, vals in _parse_assignments(args.param, "--param").items()}
    if overrides:
        params = params.replace(**overrides)

    seed = args.seed
    if seed is None:
        seed = int(np.random.SeedSequence().generate_state(1, dtype=np.uint64)[0])
    rng = np.random.default_rng(seed)
    y, states = simulate_data(spec, params, args.n, rng, kappa0=args.kappa0)

    out_dir = Path(args.out)
    start = pd.Period(args.start.replace("-", ""), freq="Q")
    if spec.is_bivariate:
        # One extra leading quarter: inflation needs a previous CPI level.
        index = pd.period_range(start, periods=args.n + 1, freq="Q")
        gdp_levels = levels_from_output(np.concatenate([[y[0, 0]], y[:, 0]]))
        cpi_levels = levels_from_inflation(y[:, 1])
        write_series(SeriesFile("cpi", index, cpi_levels), out_dir / "cpi.csv")
        dates = index[1:]
    else:
        index = pd.period_range(start, periods=args.n, freq="Q")
        gdp_levels = levels_from_output(y[:, 0])
        dates = index
    write_series(SeriesFile("gdp", index, gdp_levels), out_dir / "gdp.csv")

    truth = {
        "spec": spec.label,
        "seed": seed,
        "n": args.n,
        "kappa0": args.kappa0,
        "parameters": params.to_dict(),
        "dates": [format_quarter(p) for p in dates],
        "observations": {name: y[:, j] for j, name in enumerate(spec.observation_names)},
        "states": {name: states[:, j] for j, name in enumerate(spec.state_names)},
    }
    artifacts.write_json(truth, out_dir / "truth.json")
    logger.info(f"Simulated {args.n} quarters of {spec.label} into {out_dir}")
    return 0


def cmd_summarize(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    draws_path = Path(args.draws)
    spec_label = args.spec
    if spec_label is None:
        manifest_path = draws_path.parent / artifacts.MANIFEST_FILE
        if not manifest_path.exists():
            parser.error("--spec is required when no manifest.json sits next to the draws file")
        spec_label = artifacts.read_json(manifest_path)["spec"]
    draws = artifacts.read_draws_csv(draws_path, ModelSpec.from_label(spec_label))
    out = Path(args.out) if args.out else draws_path.parent / artifacts.SUMMARY_FILE
    frame = artifacts.write_summary_csv(posterior_summary(draws, level=args.level), out)
    print(frame.to_string(index=False))
    return 0


def cmd_compare(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    first = pd.read_csv(args.first)
    second = pd.read_csv(args.second)
    for frame, name in ((first, args.first), (second, args.second)):
        if args.column not in frame.columns:
            raise StructuralError(f"{name} has no column '{args.column}'")
    merged = first[["date", args.column]].merge(
        second[["date", args.column]], on="date", suffixes=("_first", "_second")
    )
    corr = cycle_correlation(merged[f"{args.column}_first"], merged[f"{args.column}_second"])
    print(json.dumps({"column": args.column, "n": len(merged), "correlation": corr}))
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Bayesian output-gap estimation")
    parser.add_argument("--log-level", default=settings.log_level, help="Logging level")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="Run the sampler and write artifacts")
    est.add_argument("--spec", help="Model label, e.g. uni-lt, biv-irw")
    est.add_argument("--gdp", help="GDP level CSV")
    est.add_argument("--cpi", help="CPI level CSV (bivariate specs)")
    est.add_argument("--iters", type=int, help="Total iterations")
    est.add_argument("--burnin", type=int, help="Burn-in iterations")
    est.add_argument("--thin", type=int, help="Thinning interval")
    est.add_argument("--seed", type=int, help="Root seed (unsigned 64-bit)")
    est.add_argument("--C", type=float, help="Adaptation constant")
    est.add_argument("--lambda-scale", dest="lambda_scale", choices=["pi", "two_pi"])
    est.add_argument("--chains", type=int, help="Independent chains run in parallel")
    est.add_argument("--level", type=float, help="HPD level")
    est.add_argument("--proposal-init", dest="proposal_init", choices=["conditional", "prior"],
                     help="Starting point of the adaptive proposals")
    est.add_argument("--prior", action="append", metavar="NAME=A,B", help="Override a prior")
    est.add_argument("--exact-tau", action="store_true", help="Joint target for theta1 and sigma2_xi")
    est.add_argument("--config", help="RunConfig JSON or a previous manifest.json")
    est.add_argument("--out", help="Output directory")
    est.set_defaults(func=cmd_estimate)

    sim = sub.add_parser("simulate", help="Generate synthetic series with known truth")
    sim.add_argument("--spec", required=True)
    sim.add_argument("--n", type=int, default=216, help="Number of model quarters")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--params", help="JSON file with parameter values")
    sim.add_argument("--param", action="append", metavar="NAME=VALUE", help="Set one parameter")
    sim.add_argument("--kappa0", type=float, default=settings.simulation_kappa)
    sim.add_argument("--start", default="1960-Q1", help="First quarter")
    sim.add_argument("--out", default=settings.output_dir)
    sim.set_defaults(func=cmd_simulate)

    summ = sub.add_parser("summarize", help="Recompute summaries from draws.csv")
    summ.add_argument("--draws", required=True)
    summ.add_argument("--spec")
    summ.add_argument("--out")
    summ.add_argument("--level", type=float, default=settings.hpd_level)
    summ.set_defaults(func=cmd_summarize)

    cmp_ = sub.add_parser("compare", help="Correlate the cycles of two states.csv files")
    cmp_.add_argument("--first", required=True)
    cmp_.add_argument("--second", required=True)
    cmp_.add_argument("--column", default="cycle_map")
    cmp_.set_defaults(func=cmd_compare)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=args.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args, parser)
    except (OutputGapError, ValidationError, FileNotFoundError, json.JSONDecodeError) as exc:
        error = {"error": type(exc).__name__, "message": str(exc)}
        for attr in ("row", "iteration", "block", "time_index"):
            if getattr(exc, attr, None) is not None:
                error[attr] = getattr(exc, attr)
        print(json.dumps(error), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
