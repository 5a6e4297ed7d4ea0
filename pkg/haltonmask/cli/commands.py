"""Click commands of the haltonmask command line.

Exit codes: 0 success, 2 configuration error, 3 resource limit, 4 internal
invariant violation.

"""
import functools
import logging
import sys
from typing import Any, Callable, Dict, List, Optional

import click
import numpy as np
import yaml
from pydantic import ValidationError

from haltonmask.analysis.simulate import SamplingTrace, SeedStreams, run_sampling
from haltonmask.cli.config import RunConfig, load_config
from haltonmask.cli.io import METRICS_COLUMNS, atomic_write, gray_levels, render_csv, render_pgm, write_schedule
from haltonmask.cli.render import SummaryRender
from haltonmask.errors import InvalidArgumentError, InvariantViolationError, ResourceLimitError
from haltonmask.schedule.plan import PlanShape, StepSizePlan
from haltonmask.schedule.schedulers import Schedule, SchedulerName, build_scheduler
from haltonmask.sequence.lds import halton_2d
from haltonmask.toy.infotheory import aggregate_mi, aggregate_mi_along, total_correlation
from haltonmask.toy.model import MAX_STATES, ToyJointModel, oracle_for

__all__ = [
    "schedule_cli",
    "analysis_cli",
    "EXIT_CONFIG",
    "EXIT_RESOURCE",
    "EXIT_INVARIANT",
]

logger = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_RESOURCE = 3
EXIT_INVARIANT = 4

summary_render = SummaryRender()


def run_options(func: Callable) -> Callable:
    """Options shared by every command."""

    options = [
        click.option("-c", "--config", help="YAML experiment manifest; flags override its values."),
        click.option("--grid", help="Token grid as HxW."),
        click.option("--steps", type=int, help="Number of unmasking steps S."),
        click.option(
            "--scheduler",
            "schedulers",
            multiple=True,
            type=click.Choice([name.value for name in SchedulerName]),
            help="Scheduler; repeat to compare several.",
        ),
        click.option("--seed", type=int, help="Master seed; generated and printed when absent."),
        click.option("--beta", type=float, help="Coupling β of the toy model."),
        click.option("--lambda", "length_scale", type=float, help="Decay length λ of the toy model."),
        click.option("--vocab", type=int, help="Vocabulary size V of the toy model."),
        click.option("--radius", help="Interaction radius of the toy model, or 'full'."),
        click.option("--plan", type=click.Choice([shape.value for shape in PlanShape]), help="Step size plan."),
        click.option("--gumbel-scale", type=float, help="Initial Gumbel noise scale of the confidence scheduler."),
        click.option("--temperature", type=float, help="Value sampling temperature."),
        click.option("--exact/--no-exact", default=None, help="Compute exact information quantities."),
        click.option("--numeric", type=click.Choice(["rational", "float"]), help="Numeric backend of sequences."),
        click.option("--count", type=int, help="Number of Halton points for the sequence command."),
        click.option("--steps-list", help="Comma separated step counts for the sweep command."),
        click.option("--out", help="Output directory."),
        click.option("-v", "--verbose", is_flag=True, help="Debug logging."),
    ]

    for option in reversed(options):
        func = option(func)

    return func


def handle_errors(func: Callable) -> Callable:
    """Report errors on stderr and exit with the matching code."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (ValidationError, InvalidArgumentError, yaml.YAMLError, OSError) as error:
            click.echo(f"configuration error: {error}", err=True)
            sys.exit(EXIT_CONFIG)
        except ResourceLimitError as error:
            click.echo(f"resource limit: {error}", err=True)
            sys.exit(EXIT_RESOURCE)
        except InvariantViolationError as error:
            click.echo(f"internal invariant violation: {error}", err=True)
            sys.exit(EXIT_INVARIANT)

    return wrapper


def _overrides(options: Dict[str, Any]) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    model: Dict[str, Any] = {}

    for key in ("grid", "steps", "seed", "plan", "temperature", "exact", "numeric", "count", "out"):
        if options.get(key) is not None:
            overrides[key] = options[key]

    if options.get("schedulers"):
        overrides["schedulers"] = list(options["schedulers"])

    if options.get("steps_list"):
        overrides["sweep_steps"] = [int(token) for token in options["steps_list"].split(",") if token.strip()]

    for flag, key in (("beta", "beta"), ("length_scale", "length_scale"), ("vocab", "vocab"), ("radius", "radius")):
        if options.get(flag) is not None:
            model[key] = options[flag]

    if model:
        overrides["model"] = model

    if options.get("gumbel_scale") is not None:
        overrides["confidence"] = {"gumbel_scale_initial": options["gumbel_scale"]}

    return overrides


def _configure(options: Dict[str, Any], needs_grid: bool = True) -> RunConfig:
    logging.basicConfig(
        level=logging.DEBUG if options.get("verbose") else logging.WARNING,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        overrides = _overrides(options)
    except ValueError as error:
        raise InvalidArgumentError(f"Invalid --steps-list: {error}") from error

    config = load_config(options.get("config"), overrides)

    if needs_grid:
        config.require_grid()

    logger.debug("configuration: %s", config.json())

    return config


def _resolve_seed(config: RunConfig) -> RunConfig:
    if config.seed is not None:
        return config

    seed = int(np.random.SeedSequence().entropy % 2**63)
    click.echo(f"seed: {seed}", err=True)

    return config.copy(update={"seed": seed})


def _needs_seed(names: List[SchedulerName]) -> bool:
    return any(name in (SchedulerName.RANDOM, SchedulerName.CONFIDENCE) for name in names)


def _trace(config: RunConfig, name: SchedulerName, plan: StepSizePlan) -> SamplingTrace:
    predictor = oracle_for(config.toy_model())

    return run_sampling(
        predictor,
        name,
        config.grid,
        plan,
        seed=config.seed or 0,
        value_temperature=config.temperature,
        confidence=config.confidence,
    )


def _schedule(config: RunConfig, name: SchedulerName, plan: StepSizePlan) -> Schedule:
    """A fixed schedule, or the realized one for the confidence scheduler."""

    if name is SchedulerName.CONFIDENCE:
        return _trace(config, name, plan).schedule

    seed = SeedStreams.from_seed(config.seed or 0).permutation
    return build_scheduler(name, config.grid, plan, seed=seed).schedule  # type: ignore


def _enumerable(model: ToyJointModel):
    if model.state_space > MAX_STATES:
        raise ResourceLimitError(
            f"Exact analysis of the {model.grid} grid with V={model.vocab_size} needs {model.state_space} "
            f"assignments (limit {MAX_STATES}); use a smaller grid or vocabulary."
        )


@click.group()
def schedule_cli():
    """CLI for haltonmask schedules and sequences."""


@schedule_cli.command()
@run_options
@handle_errors
def schedule(**options):
    """Write a schedule file."""

    config = _configure(options)
    name = config.schedulers[0]

    if _needs_seed([name]):
        config = _resolve_seed(config)

    result = _schedule(config, name, config.step_plan())

    path = config.out / f"schedule_{name.value}.json"
    write_schedule(path, result, name.value, seed=config.seed if _needs_seed([name]) else None, params=config.params())

    click.echo(str(path))


@schedule_cli.command()
@run_options
@handle_errors
def sequence(**options):
    """Write the first points of the 2D Halton sequence."""

    config = _configure(options, needs_grid=False)
    exact = config.numeric == "rational"
    points = halton_2d(config.count, exact=exact)

    def text(value) -> str:
        return str(value) if exact else repr(float(value))

    rows = [{"index": i, "x": text(p.x), "y": text(p.y)} for i, p in enumerate(points.points, start=1)]

    path = config.out / f"halton_{config.count}_{config.numeric}.csv"
    atomic_write(path, render_csv(["index", "x", "y"], rows))

    click.echo(str(path))


@click.group()
def analysis_cli():
    """CLI for haltonmask analyses on the toy model."""


@analysis_cli.command()
@run_options
@handle_errors
def compare(**options):
    """Per-step metrics of several schedulers, with exact MI in exact mode."""

    config = _resolve_seed(_configure(options))
    model = config.toy_model()

    if config.exact:
        _enumerable(model)

    plan = config.step_plan()
    rows = []
    aggregate: Dict[str, Optional[float]] = {}
    final_entropy: Dict[str, float] = {}

    for name in config.schedulers:
        trace = _trace(config, name, plan)
        kl_steps = aggregate_mi_along(model, trace.schedule, trace.assignment()) if config.exact else None

        for record in trace.records:
            metrics = record.metrics
            rows.append(
                {
                    "step": metrics.step_index + 1,
                    "scheduler": name.value,
                    "entropy_sum_nats": metrics.entropy_sum,
                    "intra_min_nn": metrics.intra_step_min_nn_distance,
                    "intra_mean_nn": metrics.intra_step_mean_nn_distance,
                    "mean_dist_revealed": metrics.mean_distance_to_revealed,
                    "kl_step_nats": kl_steps[metrics.step_index].kl_joint_vs_product if kl_steps else None,
                }
            )

        aggregate[name.value] = aggregate_mi(model, trace.schedule) if config.exact else None
        final_entropy[name.value] = trace.records[-1].metrics.entropy_sum

    summary = summary_render.render_compare(str(config.grid), plan.steps, config.seed, aggregate, final_entropy)

    atomic_write(config.out / "metrics.csv", render_csv(METRICS_COLUMNS, rows))
    atomic_write(config.out / "summary.txt", summary)

    click.echo(summary, nl=False)


@analysis_cli.command("entropy-maps")
@run_options
@handle_errors
def entropy_maps(**options):
    """Write one entropy graymap per step and a CSV of raw entropies."""

    config = _resolve_seed(_configure(options))
    name = config.schedulers[0]
    trace = _trace(config, name, config.step_plan())

    # frame s shows the state after s steps; the last frame is fully revealed
    frames = [record.entropy_map for record in trace.records]
    frames.append(np.full((config.grid.height, config.grid.width), np.nan))

    rows = []
    for frame_index, frame in enumerate(frames):
        atomic_write(
            config.out / f"entropy_{name.value}_{frame_index:03d}.pgm",
            render_pgm(gray_levels(frame, config.model.vocab)),
        )

        for row in range(frame.shape[0]):
            for col in range(frame.shape[1]):
                value = frame[row, col]
                rows.append(
                    {
                        "frame": frame_index,
                        "row": row,
                        "col": col,
                        "entropy_nats": None if np.isnan(value) else float(value),
                    }
                )

    atomic_write(config.out / f"entropy_{name.value}.csv", render_csv(["frame", "row", "col", "entropy_nats"], rows))

    click.echo(f"{len(frames)} frames written to {config.out}")


@analysis_cli.command()
@run_options
@handle_errors
def sweep(**options):
    """Exact aggregate MI against the number of steps."""

    config = _configure(options)

    if _needs_seed(config.schedulers):
        config = _resolve_seed(config)

    model = config.toy_model()
    _enumerable(model)

    rows = []
    table: Dict[str, List[float]] = {}

    for name in config.schedulers:
        table[name.value] = []

        for steps in config.sweep_steps:
            value = aggregate_mi(model, _schedule(config, name, config.step_plan(steps)))
            table[name.value].append(value)
            rows.append({"steps": steps, "scheduler": name.value, "aggregate_mi_nats": value})

    summary = summary_render.render_sweep(str(config.grid), total_correlation(model), table, config.sweep_steps)

    atomic_write(config.out / "sweep.csv", render_csv(["steps", "scheduler", "aggregate_mi_nats"], rows))
    atomic_write(config.out / "sweep.txt", summary)

    click.echo(summary, nl=False)
