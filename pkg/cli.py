import os
import sys
import logging
import argparse

import pandas as pd

from config import DEFAULT_JOBS, LOG_LEVEL, THIN_MIN_DIST_M
from models.experiment import VirtualSpeciesParams
from services import pipeline, tuning
from services.data_service import dataset_frame
from services.geospatial import thin
from services.reporting import emit_report
from services.sac_service import sac_range
from services.simulation import simulate_virtual_species
from utils.errors import CellFailure
from utils.file_processing import load_experiment_config, read_json, write_csv, write_json, write_plan

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit 1 so that 2 stays reserved for partial runs."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FATAL, f"{self.prog}: error: {message}\n")


def _scheme_block_km(cfg, scheme, in_time, seed, n_jobs):
    if scheme.block_km != "sac":
        return scheme.block_km
    return sac_range(in_time, cfg.sac_model, cfg.sac_aggregation, seed=seed, n_jobs=n_jobs).range_km


def cmd_thin(args) -> int:
    cfg = load_experiment_config(args.config)
    d, _ = pipeline.load_source(cfg, args.seed)
    min_dist = args.min_dist_m or cfg.thin_min_dist_m or THIN_MIN_DIST_M
    kept = thin(d, min_dist, cfg.seed if args.seed is None else args.seed)
    write_csv(pd.DataFrame({"id": kept}), os.path.join(args.out, "thinned_ids.csv"))
    print(f"Kept {len(kept)} of {len(d)} records at {min_dist:g} m")
    return EXIT_OK


def cmd_sac_range(args) -> int:
    cfg = load_experiment_config(args.config)
    _, _, in_time, _ = pipeline.prepare_data(cfg, args.seed)
    seed = cfg.seed if args.seed is None else args.seed
    result = sac_range(in_time, cfg.sac_model, cfg.sac_aggregation, seed=seed, n_jobs=args.jobs)
    write_csv(result.to_frame(), os.path.join(args.out, "sac_ranges.csv"))
    print(f"SAC range ({result.aggregation}, {result.model_kind}): {result.range_km:.1f} km")
    return EXIT_OK


def cmd_split(args) -> int:
    cfg = load_experiment_config(args.config)
    _, _, in_time, _ = pipeline.prepare_data(cfg, args.seed)
    schemes, _ = pipeline.select_cells(cfg, pipeline.parse_only(args.only))
    seed = cfg.seed if args.seed is None else args.seed
    for scheme in schemes:
        block_km = _scheme_block_km(cfg, scheme, in_time, seed, args.jobs)
        plan = pipeline.build_plan(scheme, in_time, block_km, scheme.seed if args.seed is None else args.seed)
        path = write_plan(plan, os.path.join(args.out, "plans"), scheme.name)
        print(f"{scheme.name}: {len(plan)} folds ({plan.n_flagged} flagged) -> {path}")
    return EXIT_OK


def cmd_tune(args) -> int:
    """Search and select only; no out-of-time evaluation."""
    cfg = load_experiment_config(args.config)
    _, _, in_time, _ = pipeline.prepare_data(cfg, args.seed)
    schemes, learners = pipeline.select_cells(cfg, pipeline.parse_only(args.only))
    seed = cfg.seed if args.seed is None else args.seed
    frames, best, failures = [], {}, []
    for scheme in schemes:
        try:
            block_km = _scheme_block_km(cfg, scheme, in_time, seed, args.jobs)
            plan = pipeline.build_plan(scheme, in_time, block_km, scheme.seed if args.seed is None else args.seed)
        except Exception as e:
            failures.append(CellFailure(scheme.name, "*", None, e).to_dict())
            continue
        for i, learner in learners:
            try:
                configs = tuning.sample_configs(learner.search_space(), cfg.n_configs, pipeline.learner_seed(seed, i),
                                                learner=learner.name, kind=learner.kind)
                search = tuning.run_search(configs, plan, in_time, scheme.name, learner.name, cfg.smote, args.jobs)
            except Exception as e:
                failures.append(CellFailure(scheme.name, learner.name, None, e).to_dict())
                continue
            frames.append(search.to_frame())
            best[f"{scheme.name}/{learner.name}"] = tuning.select_best(search).model_dump()

    search_frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=pipeline.SEARCH_COLUMNS)
    write_csv(search_frame, os.path.join(args.out, "search.csv"))
    write_json({"theta_star": best, "failures": failures}, os.path.join(args.out, "best.json"))
    for f in failures:
        logger.error(f"Cell failed: {f}")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_run(args) -> int:
    cfg = load_experiment_config(args.config)
    manifest = pipeline.run_experiment(cfg, args.out, args.seed, args.jobs, pipeline.parse_only(args.only))
    print(f"Run '{cfg.name}' {manifest['status']}: {len(manifest['failures'])} failed cells -> {args.out or cfg.output_dir}")
    return EXIT_PARTIAL if manifest["status"] == "partial" else EXIT_OK


def cmd_simulate(args) -> int:
    payload = read_json(args.config)
    params = VirtualSpeciesParams(**payload.get("simulate", payload))
    if args.seed is not None:
        params = params.model_copy(update={"seed": args.seed})
    d = simulate_virtual_species(params)
    path = write_csv(dataset_frame(d), os.path.join(args.out, "dataset.csv"))
    print(f"Simulated {len(d)} records, prevalence {d.label.mean():.3f} -> {path}")
    return EXIT_OK


def cmd_report(args) -> int:
    report_dir = emit_report(args.out)
    print(f"Report written to {report_dir}")
    return EXIT_OK


COMMANDS = {
    "thin": (cmd_thin, "Spatially thin records to a minimum distance"),
    "sac-range": (cmd_sac_range, "Estimate the SAC range from per-feature variograms"),
    "split": (cmd_split, "Build and save fold plans"),
    "tune": (cmd_tune, "Random hyperparameter search and selection"),
    "run": (cmd_run, "Run the full experiment and write the report bundle"),
    "simulate": (cmd_simulate, "Simulate a virtual-species dataset"),
    "report": (cmd_report, "Emit report tables from an existing bundle"),
}


def build_parser() -> ArgumentParser:
    p = ArgumentParser(prog="geocv", description="SAC-aware cross-validation for presence/absence geodata.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)
    for name, (_, help_text) in COMMANDS.items():
        s = sub.add_parser(name, help=help_text)
        if name != "report":
            s.add_argument("--config", required=True, help="Experiment (or simulation) JSON config.")
        s.add_argument("--out", required=name != "run", default=None, help="Output directory.")
        s.add_argument("--seed", type=int, default=None, help="Global seed override.")
        s.add_argument("--jobs", type=int, default=DEFAULT_JOBS, help="Parallel workers (results do not depend on it).")
        if name in ("split", "tune", "run"):
            s.add_argument("--only", default=None, help="Cell filter, e.g. scheme=sp200,learner=rf")
        if name == "thin":
            s.add_argument("--min-dist-m", type=float, default=None, help="Minimum distance in meters.")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=LOG_LEVEL, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    handler = COMMANDS[args.command][0]
    try:
        return handler(args)
    except Exception as e:
        logger.error(f"{args.command} failed -> {type(e).__name__}: {e}")
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
