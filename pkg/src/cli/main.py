"""
``locov`` command group.

Exit status: 0 on success, 1 on a runtime or I/O failure, 2 on an invalid
configuration. Every command holds the lock of the directory it writes.
"""

import functools
import json
import uuid
from pathlib import Path
from typing import Callable, Optional, Sequence

import click
import numpy as np

from ..evaluation.export import write_report_csv, write_report_json
from ..models.detection import SETUPS
from ..models.experiment import ExperimentConfig, load_config, parse_config
from ..storage.checkpoint import load_checkpoint
from ..storage.dataset_store import load_dataset
from ..storage.locking import output_lock
from ..utils.errors import ConfigError, LocovError
from ..utils.logger import clear_context, engine_logger, log_error, set_command, set_run_id
from ..workflows.ablation import ABLATION_CSV, run_ablation
from ..workflows.evaluate import load_network, resolve_setups, run_evaluation, write_detections
from ..workflows.gradcheck import CHECKS, GradcheckSettings, run_gradcheck
from ..workflows.lsm import train_lsm
from ..workflows.stt import train_stt
from ..workflows.synth import synthesize


EXIT_RUNTIME = 1
EXIT_CONFIG = 2

CORRUPTION = 1.0


def _command(name: str) -> Callable:
    """Attach logging context and translate failures into exit codes."""

    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            set_command(name)
            set_run_id(uuid.uuid4().hex[:12])
            try:
                return func(*args, **kwargs)
            except ConfigError as exc:
                log_error(exc, "config", {"command": name, "field": exc.field})
                click.echo(f"error: {exc}", err=True)
                raise click.exceptions.Exit(EXIT_CONFIG)
            except (LocovError, OSError) as exc:
                log_error(exc, "runtime", {"command": name})
                click.echo(f"error: {exc}", err=True)
                raise click.exceptions.Exit(EXIT_RUNTIME)
            finally:
                clear_context()

        return wrapper

    return decorator


def _experiment(config_path: Optional[str], seed: Optional[int], world_seed: bool = False) -> ExperimentConfig:
    config = load_config(config_path) if config_path else ExperimentConfig()
    if seed is None:
        return config
    data = config.model_dump()
    if world_seed:
        data["world"]["seed"] = seed
    else:
        data["seed"] = seed
    return parse_config(data)


def _out_dir(out: Optional[str], config: ExperimentConfig, default: str = "") -> Path:
    if out:
        return Path(out)
    root = Path(config.output_dir)
    return root / default if default else root


def _echo_json(payload) -> None:
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


config_option = click.option("--config", "config_path", type=click.Path(dir_okay=False),
                             help="Experiment config (JSON).")
dataset_option = click.option("--dataset", type=click.Path(file_okay=False), required=True,
                              help="Dataset directory written by `synth`.")
out_option = click.option("--out", type=click.Path(file_okay=False), help="Output directory.")
seed_option = click.option("--seed", type=int, help="Override the seed from the config.")


@click.group()
@click.version_option(version="1.0.0", prog_name="locov")
def cli():
    """Desk-scale open-vocabulary detection experiments."""


@cli.command()
@config_option
@out_option
@seed_option
@_command("synth")
def synth(config_path, out, seed):
    """Generate a synthetic dataset; --seed replaces the world seed."""
    config = _experiment(config_path, seed, world_seed=True)
    target = _out_dir(out, config, "dataset")
    with output_lock(target):
        root, stats = synthesize(config.world, target)
    click.echo(stats.model_dump_json(indent=2))
    engine_logger.info("synth done", path=str(root))


@cli.command("train-lsm")
@config_option
@dataset_option
@out_option
@seed_option
@_command("train-lsm")
def train_lsm_command(config_path, dataset, out, seed):
    """Train the matching stage and write lsm.ckpt."""
    config = _experiment(config_path, seed)
    data = load_dataset(dataset, ["train"])
    target = _out_dir(out, config)
    with output_lock(target):
        result = train_lsm(config, data, target)
    _echo_json({
        "checkpoint": str(result.checkpoint), "metrics": str(result.metrics), "steps": result.steps,
        "initial_loss": result.initial_loss, "final_loss": result.final_loss,
    })


@cli.command("train-stt")
@config_option
@dataset_option
@click.option("--checkpoint", type=click.Path(dir_okay=False, exists=True),
              help="Matching-stage checkpoint to start from; omit for task tuning alone.")
@out_option
@seed_option
@_command("train-stt")
def train_stt_command(config_path, dataset, checkpoint, out, seed):
    """Tune on known-class labels and write stt.ckpt."""
    config = _experiment(config_path, seed)
    lsm = load_checkpoint(checkpoint, "LSM") if checkpoint else None
    data = load_dataset(dataset, ["train", "val"])
    target = _out_dir(out, config)
    with output_lock(target):
        result = train_stt(config, data, target, lsm=lsm)
    _echo_json({
        "checkpoint": str(result.checkpoint), "metrics": str(result.metrics),
        "steps_run": result.steps_run, "best_step": result.best_step, "best_val_ap": result.best_val_ap,
        "frozen": list(result.frozen),
    })


@cli.command()
@click.option("--checkpoint", type=click.Path(dir_okay=False, exists=True), required=True,
              help="Checkpoint to evaluate.")
@dataset_option
@click.option("--split", default="test", show_default=True, help="Dataset split to evaluate on.")
@click.option("--setup", type=click.Choice([*SETUPS, "all"]), default="all", show_default=True)
@out_option
@_command("evaluate")
def evaluate(checkpoint, dataset, split, setup, out):
    """Detect on a split and write eval_<split>.json and .csv."""
    ckpt = load_checkpoint(checkpoint)
    data = load_dataset(dataset, [split])
    setups = resolve_setups(setup)
    target = Path(out) if out else Path(checkpoint).parent
    with output_lock(target):
        report, detections = run_evaluation(load_network(ckpt, data), data, split, setups)
        write_report_json(report, target / f"eval_{split}.json")
        write_report_csv(report, target / f"eval_{split}.csv")
        for name, dets in detections.items():
            write_detections(dets, target / f"detections_{split}_{name}.jsonl")
    _echo_json({name: {"ap": block.ap, "ap50": block.ap50, "ap75": block.ap75}
                for name, block in report.blocks.items()})


def _corrupt_hook(target: str):
    def hook(check: str, name: str, grad: np.ndarray) -> np.ndarray:
        return grad + CORRUPTION if check == target else grad
    return hook


@cli.command()
@config_option
@seed_option
@click.option("--instances", type=click.IntRange(min=1), help="Random instances per check.")
@click.option("--check", "checks", multiple=True, type=click.Choice(CHECKS),
              help="Restrict to these checks (repeatable).")
@click.option("--corrupt", type=click.Choice(CHECKS), hidden=True)
@_command("gradcheck")
def gradcheck(config_path, seed, instances, checks, corrupt):
    """Finite-difference check of every loss; exit 1 on any failure."""
    config = _experiment(config_path, seed)
    settings = GradcheckSettings(instances=instances) if instances else GradcheckSettings()
    selected: Sequence[str] = checks or CHECKS
    report = run_gradcheck(config, settings, selected, _corrupt_hook(corrupt) if corrupt else None)
    for entry in report.entries:
        status = "ok" if entry.passed else "FAIL"
        click.echo(f"{status:4}  {entry.check:12} {entry.group:24} max_rel_error={entry.max_rel_error:.3e}")
    if not report.passed:
        failed = sorted({e.check for e in report.failures})
        click.echo(f"gradient check failed: {', '.join(failed)}", err=True)
        raise click.exceptions.Exit(EXIT_RUNTIME)
    click.echo("all gradient checks passed")


@cli.command()
@config_option
@dataset_option
@out_option
@seed_option
@_command("ablate")
def ablate(config_path, dataset, out, seed):
    """Run the configured ablation grid and write ablation.csv."""
    config = _experiment(config_path, seed)
    data = load_dataset(dataset)
    target = _out_dir(out, config, "ablation")
    with output_lock(target):
        rows = run_ablation(config, data, target)
    failed = [r.cell for r in rows if r.status != "ok"]
    _echo_json({"csv": str(target / ABLATION_CSV), "cells": len(rows), "failed": failed})


def main() -> None:
    cli(prog_name="locov")


__all__ = ['cli', 'main']
