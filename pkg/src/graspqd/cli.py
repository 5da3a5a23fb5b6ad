"""Experiment orchestration: config parsing, seeded campaigns, comparisons.

Subcommands:
  run CONFIG          execute a replicated campaign and persist everything
  compare DIRS...     cross-campaign metric table with rank-sum tests
  metrics DIR         tidy per-generation CSV for one campaign
  dump-trace CONFIG GENOME_FILE   per-step rollout CSV for one genome
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml
from scipy.stats import mannwhitneyu

from .algorithms import (
    KIND_MAP_ELITES,
    AlgorithmConfig,
    RunAbortedError,
    run_algorithm,
)
from .core import ConfigurationError, Genome, RngStream
from .cvt import load_or_build_cvt
from .grasp_env import (
    EnvConfig,
    GripperConfig,
    ObjectConfig,
    PlanarArmEnv,
    ToleranceConfig,
)
from .io import (
    read_history,
    read_manifest,
    read_repertoire,
    sha256_file,
    write_history,
    write_manifest,
    write_repertoire,
)
from .metrics import (
    aggregate,
    coverage,
    first_success_generation,
    sample_efficiency,
    successful_run_rate,
)
from .variation import VariationConfig

COVERAGE_COMPONENT = 3  # gripper heading at first touch: the headline space


@dataclass(frozen=True)
class RunConfig:
    """One campaign: an algorithm, an environment, seeds and outputs."""

    algorithm: AlgorithmConfig
    environment: EnvConfig
    variation: VariationConfig
    seed: int = 0
    replicates: int = 1
    output_dir: str = "runs/campaign"
    parallel_evaluators: int = 1
    coverage_resolution: int = 10

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigurationError("replicates must be >= 1")
        if self.parallel_evaluators < 1:
            raise ConfigurationError("parallel_evaluators must be >= 1")
        if self.coverage_resolution < 1:
            raise ConfigurationError("coverage_resolution must be >= 1")


def _take(block: dict, allowed, where: str) -> dict:
    block = dict(block or {})
    unknown = set(block) - set(allowed)
    if unknown:
        raise ConfigurationError(f"unknown key(s) {sorted(unknown)} in {where}")
    return block


def _build_environment(block: dict) -> EnvConfig:
    block = _take(
        block,
        ("n_dof", "link_lengths", "timesteps", "table_height", "object", "gripper", "tolerances"),
        "environment",
    )
    obj = _take(block.pop("object", {}), ("radius", "position"), "environment.object")
    grip = _take(
        block.pop("gripper", {}),
        ("finger_length", "max_aperture", "close_speed"),
        "environment.gripper",
    )
    tol = _take(
        block.pop("tolerances", {}),
        ("contact_eps", "penetration_max", "lift_height_min", "touch_window_steps"),
        "environment.tolerances",
    )
    if "position" in obj and obj["position"] is not None:
        obj["position"] = tuple(float(v) for v in obj["position"])
    if "link_lengths" in block:
        block["link_lengths"] = tuple(float(v) for v in block["link_lengths"])
    return EnvConfig(
        **block,
        obj=ObjectConfig(**obj),
        gripper=GripperConfig(**grip),
        tolerances=ToleranceConfig(**tol),
    )


def _build_algorithm(block: dict, novelty_block: dict) -> AlgorithmConfig:
    block = _take(
        block,
        ("kind", "mu", "lambda", "generations", "k", "archive_add_count", "cvt_cells"),
        "algorithm",
    )
    novelty_block = _take(novelty_block, ("k",), "novelty")
    if "lambda" in block:
        block["lam"] = int(block.pop("lambda"))
    algo_k = block.pop("k", None)
    nov_k = novelty_block.get("k")
    if algo_k is not None and nov_k is not None and int(algo_k) != int(nov_k):
        raise ConfigurationError("algorithm.k conflicts with novelty.k")
    k = nov_k if nov_k is not None else algo_k
    if k is not None:
        block["k"] = int(k)
    return AlgorithmConfig(**block)


def load_run_config(path, seed=None, replicates=None, parallel=None, output_dir=None) -> RunConfig:
    """Parse a YAML run config; CLI flags override file values."""
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    doc = _take(
        doc,
        (
            "seed",
            "replicates",
            "output_dir",
            "parallel_evaluators",
            "coverage_resolution",
            "algorithm",
            "novelty",
            "variation",
            "environment",
        ),
        "run config",
    )
    algorithm = _build_algorithm(doc.get("algorithm", {}), doc.get("novelty", {}))
    environment = _build_environment(doc.get("environment", {}))
    var_block = _take(doc.get("variation", {}), ("sigma", "p_mut", "p_cx", "order"), "variation")
    variation = VariationConfig(**var_block)
    return RunConfig(
        algorithm=algorithm,
        environment=environment,
        variation=variation,
        seed=int(seed if seed is not None else doc.get("seed", 0)),
        replicates=int(replicates if replicates is not None else doc.get("replicates", 1)),
        output_dir=str(output_dir if output_dir is not None else doc.get("output_dir", "runs/campaign")),
        parallel_evaluators=int(parallel if parallel is not None else doc.get("parallel_evaluators", 1)),
        coverage_resolution=int(doc.get("coverage_resolution", 10)),
    )


def config_to_dict(config: RunConfig) -> dict:
    """Canonical echo of a config (resolved defaults, plain types)."""
    env = config.environment
    algo = config.algorithm
    var = config.variation
    return {
        "seed": config.seed,
        "replicates": config.replicates,
        "output_dir": config.output_dir,
        "parallel_evaluators": config.parallel_evaluators,
        "coverage_resolution": config.coverage_resolution,
        "algorithm": {
            "kind": algo.kind,
            "mu": algo.mu,
            "lambda": algo.lam,
            "generations": algo.generations,
            "k": algo.k,
            "archive_add_count": algo.archive_add_count,
            "cvt_cells": algo.cvt_cells,
        },
        "variation": {
            "sigma": var.sigma,
            "p_mut": var.p_mut,
            "p_cx": var.p_cx,
            "order": var.order,
        },
        "environment": {
            "n_dof": env.n_dof,
            "link_lengths": list(env.link_lengths),
            "timesteps": env.timesteps,
            "table_height": env.table_height,
            "object": {"radius": env.obj.radius, "position": list(env.object_position)},
            "gripper": {
                "finger_length": env.gripper.finger_length,
                "max_aperture": env.gripper.max_aperture,
                "close_speed": env.gripper.close_speed,
            },
            "tolerances": {
                "contact_eps": env.tolerances.contact_eps,
                "penetration_max": env.tolerances.penetration_max,
                "lift_height_min": env.tolerances.lift_height_min,
                "touch_window_steps": env.tolerances.touch_window_steps,
            },
        },
    }


def run_campaign(config: RunConfig) -> int:
    """Execute `replicates` seeded runs; returns a process exit status."""
    out = Path(config.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as e:
        print(f"error: output directory {out} is not writable: {e}", file=sys.stderr)
        return 2

    cvt_grid = None
    if config.algorithm.kind == KIND_MAP_ELITES:
        env0 = PlanarArmEnv(config.environment)
        dim = sum(s.dim for s in env0.component_specs)
        cvt_grid = load_or_build_cvt(
            config.algorithm.cvt_cells, dim, RngStream(config.seed).derive("cvt"), cache_dir=out
        )

    status = 0
    runs = []
    for r in range(config.replicates):
        run_seed = config.seed + r
        run_dir = out / f"run_{r:03d}"
        run_dir.mkdir(parents=True, exist_ok=True)
        env = PlanarArmEnv(config.environment)
        rng = RngStream(run_seed)
        run_status = "ok"
        try:
            repertoire, history = run_algorithm(
                config.algorithm,
                env,
                rng,
                variation=config.variation,
                workers=config.parallel_evaluators,
                cvt=cvt_grid,
            )
        except RunAbortedError as e:
            repertoire, history = e.repertoire, e.history
            run_status = f"failed: {e.reason}"
            status = 1
            print(f"run {r}: aborted ({e.reason}); partial outputs flushed", file=sys.stderr)
        meta = {"algorithm": config.algorithm.kind, "seed": run_seed, "run_index": r}
        rep_path = run_dir / "repertoire.jsonl"
        hist_path = run_dir / "history.jsonl"
        write_repertoire(rep_path, repertoire, meta)
        write_history(hist_path, history, meta)
        runs.append(
            {
                "run_index": r,
                "seed": run_seed,
                "status": run_status,
                "repertoire_file": str(rep_path.relative_to(out)),
                "repertoire_sha256": sha256_file(rep_path),
                "history_file": str(hist_path.relative_to(out)),
                "history_sha256": sha256_file(hist_path),
                "successes": history.total_successes,
                "evaluations": history.total_evaluations,
            }
        )
    write_manifest(out / "campaign.json", config_to_dict(config), runs)
    return status


@dataclass
class CampaignMetrics:
    label: str
    directory: str
    environment: dict
    efficiencies: list
    coverages: list
    first_successes: list  # None for unsuccessful runs
    run_rate: float


def load_campaign_metrics(campaign_dir, resolution: int) -> CampaignMetrics:
    campaign_dir = Path(campaign_dir)
    doc = read_manifest(campaign_dir / "campaign.json")
    label = doc["config"]["algorithm"]["kind"]
    effs, covs, firsts, histories = [], [], [], []
    for run in doc["runs"]:
        if run["status"] != "ok":
            continue
        history, _ = read_history(campaign_dir / run["history_file"])
        repertoire, _ = read_repertoire(campaign_dir / run["repertoire_file"])
        histories.append(history)
        effs.append(sample_efficiency(history.ledger))
        covs.append(coverage(repertoire, COVERAGE_COMPONENT, resolution))
        firsts.append(first_success_generation(history))
    if not histories:
        raise ValueError(f"campaign {campaign_dir} has no completed runs")
    return CampaignMetrics(
        label=label,
        directory=str(campaign_dir),
        environment=doc["config"]["environment"],
        efficiencies=effs,
        coverages=covs,
        first_successes=firsts,
        run_rate=successful_run_rate(histories),
    )


def compare_campaigns(campaign_dirs, output_path, resolution: int = 10) -> int:
    """Cross-campaign table of the four measures plus pairwise rank-sum
    p-values on sample efficiency and coverage."""
    campaigns = [load_campaign_metrics(d, resolution) for d in campaign_dirs]
    envs = [c.environment for c in campaigns]
    for other in envs[1:]:
        if other != envs[0]:
            print(
                "error: campaigns use incompatible environments; refusing to compare",
                file=sys.stderr,
            )
            return 2
    labels = []
    for c in campaigns:
        label = c.label
        if label in labels:
            label = f"{c.label}@{Path(c.directory).name}"
        labels.append(label)

    rows = []
    lines = []
    for label, c in zip(labels, campaigns):
        firsts = [f for f in c.first_successes if f is not None]
        lines.append(f"{label} ({len(c.efficiencies)} runs, run rate {c.run_rate:.2f})")
        rows.append(("rate", label, "", "successful_run_rate", "value", c.run_rate))
        for metric, values in (
            ("sample_efficiency", c.efficiencies),
            ("coverage_b4", c.coverages),
            ("first_success_generation", firsts),
        ):
            agg = aggregate(values)
            lines.append(f"  {metric}: {agg}")
            for stat in ("median", "iqr", "mean", "std", "n"):
                rows.append(("aggregate", label, "", metric, stat, getattr(agg, stat)))
    for i in range(len(campaigns)):
        for j in range(i + 1, len(campaigns)):
            for metric, attr in (("sample_efficiency", "efficiencies"), ("coverage_b4", "coverages")):
                a = getattr(campaigns[i], attr)
                b = getattr(campaigns[j], attr)
                if np.ptp(a + b) == 0:  # identical constant samples: no test
                    p = 1.0
                else:
                    p = float(mannwhitneyu(a, b, alternative="two-sided").pvalue)
                rows.append(("ranksum", labels[i], labels[j], metric, "p_value", p))
                lines.append(f"rank-sum {labels[i]} vs {labels[j]} on {metric}: p={p:.4g}")

    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    with output_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record", "campaign", "other", "metric", "stat", "value"])
        writer.writerows(rows)
    print("\n".join(lines))
    print(f"wrote {output_path}")
    return 0


def export_metrics_csv(campaign_dir, output_path, resolution: int = 10) -> int:
    """Tidy CSV: one row per run x generation x metric."""
    campaign_dir = Path(campaign_dir)
    doc = read_manifest(campaign_dir / "campaign.json")
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    with output_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "generation", "metric", "value"])
        for run in doc["runs"]:
            if run["status"] != "ok":
                continue
            history, _ = read_history(campaign_dir / run["history_file"])
            repertoire, _ = read_repertoire(campaign_dir / run["repertoire_file"])
            spec = repertoire.component_specs[COVERAGE_COMPONENT]
            cells = resolution ** spec.dim
            successes = sorted(repertoire.successes(), key=lambda ind: ind.generation_born)
            occupied = set()
            pointer = 0
            cum_evals = 0
            cum_succ = 0
            for record in history.records:
                cum_evals += record.evaluations
                cum_succ += record.successes
                while (
                    pointer < len(successes)
                    and successes[pointer].generation_born <= record.generation
                ):
                    comp = successes[pointer].behavior.components[COVERAGE_COMPONENT]
                    if comp is not None:
                        z = spec.bounds.normalize(spec.bounds.clip(comp))
                        occupied.add(tuple(np.minimum((z * resolution).astype(int), resolution - 1)))
                    pointer += 1
                g = record.generation
                writer.writerow([run["run_index"], g, "evaluations", record.evaluations])
                writer.writerow([run["run_index"], g, "successes", record.successes])
                writer.writerow([run["run_index"], g, "cumulative_evaluations", cum_evals])
                writer.writerow([run["run_index"], g, "cumulative_successes", cum_succ])
                writer.writerow(
                    [run["run_index"], g, "sample_efficiency", cum_succ / cum_evals if cum_evals else 0.0]
                )
                writer.writerow([run["run_index"], g, "repertoire_size", record.repertoire_size])
                writer.writerow([run["run_index"], g, "coverage_b4", len(occupied) / cells])
    print(f"wrote {output_path}")
    return 0


def dump_trace(config_path, genome_path, output_path) -> int:
    """Roll out one genome and write the per-step trace CSV."""
    config = load_run_config(config_path)
    env = PlanarArmEnv(config.environment)
    doc = json.loads(Path(genome_path).read_text(encoding="utf-8"))
    params = doc["genome"] if isinstance(doc, dict) else doc
    genome = Genome(np.asarray(params, dtype=float))
    trace = env.rollout(genome)
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    with output_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["step", "grip_x", "grip_y", "grip_theta", "aperture", "obj_x", "obj_y", "touched", "grasped"]
        )
        for t in range(env.cfg.timesteps + 1):
            writer.writerow(
                [
                    t,
                    trace.gripper_position[t, 0],
                    trace.gripper_position[t, 1],
                    trace.gripper_orientation[t],
                    trace.aperture[t],
                    trace.object_position[t, 0],
                    trace.object_position[t, 1],
                    int(trace.t_touch is not None and t >= trace.t_touch),
                    int(trace.grasp_step is not None and t >= trace.grasp_step),
                ]
            )
    print(
        f"t_touch={trace.t_touch} t_close_reach={trace.t_close_reach} "
        f"grasp_step={trace.grasp_step} stable={trace.grasp_stable_at_end}"
    )
    print(f"wrote {output_path}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="graspqd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a campaign from a YAML config")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--replicates", type=int, default=None)
    p_run.add_argument("--parallel", type=int, default=None)
    p_run.add_argument("--output", default=None)

    p_cmp = sub.add_parser("compare", help="compare campaign directories")
    p_cmp.add_argument("dirs", nargs="+")
    p_cmp.add_argument("--output", default="comparison.csv")
    p_cmp.add_argument("--coverage-resolution", type=int, default=10)

    p_met = sub.add_parser("metrics", help="export per-generation metrics CSV")
    p_met.add_argument("dir")
    p_met.add_argument("--output", default="metrics.csv")
    p_met.add_argument("--coverage-resolution", type=int, default=10)

    p_tr = sub.add_parser("dump-trace", help="per-step rollout CSV for one genome")
    p_tr.add_argument("config")
    p_tr.add_argument("genome_file")
    p_tr.add_argument("--output", default="trace.csv")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            config = load_run_config(
                args.config,
                seed=args.seed,
                replicates=args.replicates,
                parallel=args.parallel,
                output_dir=args.output,
            )
            return run_campaign(config)
        if args.command == "compare":
            return compare_campaigns(args.dirs, args.output, args.coverage_resolution)
        if args.command == "metrics":
            return export_metrics_csv(args.dir, args.output, args.coverage_resolution)
        if args.command == "dump-trace":
            return dump_trace(args.config, args.genome_file, args.output)
    except ConfigurationError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
