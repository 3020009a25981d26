#!/usr/bin/env python3
"""
Outbreak Stacking - Main Entry Point

Run the synthetic surveillance benchmark stage by stage or end to end.

Usage:
    # Full experiment with the default method set
    python main.py experiment --seed 7

    # Same, with explicit methods and a fixed-k sweep
    python main.py experiment --methods 'C1,C2,C3,Bayes,RKI,S(mu,O3,1),P(mu,O3,1)' --k-sweep 2,6,10

    # Single stages (each reads the previous stage's files under --out)
    python main.py generate --out data/experiments/run1
    python main.py detect --out data/experiments/run1
    python main.py evaluate --e 0.01 --out data/experiments/run1

Exit codes: 0 success, 1 usage error, 2 data/configuration error.
"""

import sys
from pathlib import Path
from typing import List, Optional

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

import click
from pydantic import ValidationError
from rich.console import Console
from rich.markup import escape

from core.experiment import ExperimentPlan, ExperimentRunner, render_ranks, render_results
from evaluation.curves import metric_column
from stacking.config import split_method_list
from utils.config import get_config, init_config
from utils.errors import InvalidConfigError, SurveillanceError, handle_error
from utils.logger import get_logger, init_logger


console = Console()
logger = get_logger("main")


class SurveillanceCLI(click.Group):
    """Click group mapping failures onto the documented exit codes"""

    def main(self, *args, **kwargs):
        kwargs["standalone_mode"] = False
        try:
            return super().main(*args, **kwargs)
        except click.UsageError as e:
            e.show()
            sys.exit(1)
        except click.Abort:
            console.print("[yellow]Aborted[/yellow]")
            sys.exit(1)
        except SurveillanceError as e:
            console.print(f"[red]Error:[/red] {escape(str(e))}")
            logger.bind(code=e.code).error("Command failed")
            sys.exit(2)
        except click.ClickException as e:
            e.show()
            sys.exit(2)
        except Exception as e:
            handle_error(e, "cli", {"exception": type(e).__name__}, raise_after_log=False)
            console.print(f"[red]Error:[/red] {type(e).__name__}: {escape(str(e))}")
            sys.exit(2)


def _csv_ints(value: Optional[str]) -> Optional[List[int]]:
    if value is None:
        return None
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {value!r}")


def plan_options(func):
    """Options shared by every stage command"""
    options = [
        click.option("--seed", type=click.IntRange(min=0), help="Experiment seed"),
        click.option("--grid", "grid_path", type=click.Path(), help="Test case grid JSON"),
        click.option("--methods", help="Comma-separated methods, e.g. 'C1,RKI,P(mu,O3,1)'"),
        click.option(
            "--e", "e", type=click.FloatRange(min=0.0, max=1.0, min_open=True),
            help="Maximum false alarm rate for pAUC/dAUC",
        ),
        click.option("--k", "k_mode", help="Outbreak size constant: 'uniform' or 'fixed:<int>'"),
        click.option("--jobs", type=click.IntRange(min=1), help="Parallel test cases"),
        click.option("--out", "out_dir", type=click.Path(), help="Output directory"),
        click.option("--n-series", type=click.IntRange(min=1), help="Series per test case"),
        click.option("--n-trees", type=click.IntRange(min=1), help="Trees per forest"),
        click.option("--test-cases", help="Comma-separated test case ids (default: whole grid)"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def build_plan(
    seed=None,
    grid_path=None,
    methods=None,
    e=None,
    k_mode=None,
    jobs=None,
    out_dir=None,
    n_series=None,
    n_trees=None,
    test_cases=None,
) -> ExperimentPlan:
    """Plan from config.yaml with command-line overrides"""
    config = get_config()
    forest = config.forest
    if n_trees is not None:
        forest = forest.model_copy(update={"n_trees": n_trees})
    try:
        return ExperimentPlan.from_config(
            config,
            seed=seed,
            grid_path=grid_path,
            methods=split_method_list(methods) if methods else None,
            e=e,
            k_mode=k_mode,
            jobs=jobs,
            out_dir=out_dir,
            n_series=n_series,
            test_cases=_csv_ints(test_cases),
            forest=forest,
        )
    except ValidationError as err:
        first = err.errors()[0]
        field = ".".join(str(p) for p in first["loc"])
        raise InvalidConfigError(field, first.get("input"), first["msg"]) from err


def _report(stage: str, paths) -> None:
    console.print(f"[green]✓[/green] {stage}: {len(paths)} file(s) written")


@click.group(cls=SurveillanceCLI)
@click.option("--config", "config_path", type=click.Path(), help="Alternative config.yaml")
def cli(config_path):
    """
    🦠 Outbreak Stacking - p-value fusion for syndromic surveillance

    Generate the synthetic benchmark, run the surveillance detectors, train
    stacking forests and rank every method by partial detection-rate AUC.
    """
    if config_path:
        config = init_config(Path(config_path))
        init_logger(config, force=True)


@cli.command()
@plan_options
def generate(**options):
    """Generate synthetic test case bundles"""
    runner = ExperimentRunner(build_plan(**options))
    _report("generate", runner.generate())


@cli.command()
@plan_options
def detect(**options):
    """Run the detectors over every bundle"""
    runner = ExperimentRunner(build_plan(**options))
    _report("detect", runner.detect())


@cli.command()
@plan_options
def dataset(**options):
    """Assemble stacking datasets for every fusion method"""
    runner = ExperimentRunner(build_plan(**options))
    _report("dataset", runner.dataset())


@cli.command()
@plan_options
def train(**options):
    """Train one forest per (test case, fusion method)"""
    runner = ExperimentRunner(build_plan(**options))
    _report("train", runner.train())


@cli.command()
@plan_options
def evaluate(**options):
    """Score every method on the evaluation weeks (pAUC/dAUC)"""
    plan = build_plan(**options)
    runner = ExperimentRunner(plan)
    _report("evaluate", runner.evaluate())

    from core.persistence import read_results

    metric = metric_column("dauc", plan.e)
    console.print(render_results(read_results(plan.out / "results" / "results.csv", metric), metric))


@cli.command()
@plan_options
def rank(**options):
    """Average ranks overall and per (T,S1,S2) subset"""
    runner = ExperimentRunner(build_plan(**options))
    console.print(render_ranks(runner.rank()))


@cli.command()
@plan_options
@click.option("--k-sweep", help="Also run fixed-k arms, e.g. '2,6,10'")
def experiment(k_sweep, **options):
    """Run every stage end to end"""
    plan = build_plan(**options)
    ks = _csv_ints(k_sweep) if k_sweep else list(get_config().experiment.k_sweep)

    console.print("\n[bold cyan]════════════════════════════════════════════════════════════════[/bold cyan]")
    console.print("[bold yellow]   🦠  OUTBREAK STACKING - BENCHMARK RUN[/bold yellow]")
    console.print("[bold cyan]════════════════════════════════════════════════════════════════[/bold cyan]\n")
    console.print(f"  Seed: [cyan]{plan.seed}[/cyan]   e: [cyan]{plan.e}[/cyan]   k: [cyan]{plan.k_mode}[/cyan]")
    console.print(f"  Methods: [cyan]{', '.join(plan.methods)}[/cyan]")
    console.print(f"  Output: [cyan]{plan.out_dir}[/cyan]\n")

    runner = ExperimentRunner(plan)
    ranks = runner.run_all()
    console.print(render_ranks(ranks))

    if ks:
        sweep = runner.run_k_sweep(ks)
        metric = metric_column("dauc", plan.e)
        medians = sweep.groupby(["method", "k"], sort=False)[metric].median().unstack("k")
        console.print("[bold]Median dAUC per k[/bold]")
        console.print(medians.round(4).to_string())


if __name__ == "__main__":
    cli()
