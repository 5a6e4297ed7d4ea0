import math
from pathlib import Path

import pytest
from pydantic import ValidationError

from haltonmask.cli.config import ModelOptions, RunConfig, load_config
from haltonmask.errors import InvalidArgumentError
from haltonmask.schedule.plan import PlanShape
from haltonmask.schedule.schedulers import SchedulerName
from haltonmask.sequence.gridmap import GridSpec


def test_defaults(tmp_path: Path):
    config = RunConfig(grid="4x4", out=tmp_path)

    assert config.grid == GridSpec(height=4, width=4)
    assert config.steps == 8
    assert config.schedulers == [SchedulerName.HALTON]
    assert config.plan is PlanShape.COSINE
    assert config.model.radius == pytest.approx(math.sqrt(2))
    assert config.confidence.gumbel_scale_initial == 4.5
    assert config.out == tmp_path


@pytest.mark.parametrize(
    "values",
    [
        {"grid": "4x4", "steps": 20},
        {"grid": "4x4", "steps": 0},
        {"grid": "4x4", "unknown": 1},
        {"grid": "4x4", "schedulers": ["spiral"]},
        {"grid": "4x4", "schedulers": []},
        {"grid": "4x4", "sweep_steps": [1, 17]},
        {"grid": "4x4", "model": {"vocab": 1}},
        {"grid": "4x4", "model": {"radius": "full"}},
        {"grid": "4x4", "seed": -1},
        {"grid": "4x4", "numeric": "decimal"},
        {"grid": "4"},
    ],
)
def test_validation_raises(values):
    with pytest.raises(ValueError):
        RunConfig.parse_obj(values).toy_model()


def test_steps_message():
    with pytest.raises(ValidationError, match="steps exceed token count"):
        RunConfig(grid="4x4", steps=20)


@pytest.mark.parametrize(
    "radius, result",
    [
        ("full", None),
        ("none", None),
        ("null", None),
        (None, None),
        (1.5, 1.5),
        ("2", 2.0),
    ],
)
def test_model_radius(radius, result):
    assert ModelOptions(radius=radius).radius == result


def test_model_lambda_alias():
    assert ModelOptions.parse_obj({"lambda": 2.5}).length_scale == 2.5
    assert ModelOptions(length_scale=0.5).length_scale == 0.5


def test_toy_model():
    config = RunConfig.parse_obj({"grid": "3x3", "model": {"vocab": 3, "beta": 0.5, "lambda": 2.0, "radius": "full"}})
    model = config.toy_model()

    assert (model.vocab_size, model.coupling, model.length_scale, model.neighbor_radius) == (3, 0.5, 2.0, None)


def test_step_plan():
    config = RunConfig(grid="4x4", steps=4, plan="linear")

    assert config.step_plan().counts == [4, 4, 4, 4]
    assert config.step_plan(2).counts == [8, 8]


def test_load_config_overrides(tmp_path: Path):
    config_path = tmp_path / "experiment.yaml"
    config_path.write_text(
        "grid: 3x3\nsteps: 3\nseed: 5\nmodel:\n  beta: 0.5\n  vocab: 3\nschedulers: [halton, raster]\n",
        encoding="utf-8",
    )

    config = load_config(str(config_path), {"steps": 9, "model": {"beta": 2.0}})

    assert config.steps == 9
    assert config.seed == 5
    assert config.model.beta == 2.0
    assert config.model.vocab == 3
    assert config.schedulers == [SchedulerName.HALTON, SchedulerName.RASTER]


def test_load_config_without_file():
    assert load_config(None, {"grid": "2x2", "steps": 2}).steps == 2


def test_load_config_rejects_non_mapping(tmp_path: Path):
    config_path = tmp_path / "list.yaml"
    config_path.write_text("- 1\n- 2\n", encoding="utf-8")

    with pytest.raises(ValueError):
        load_config(str(config_path), {})


def test_out_must_be_a_directory(tmp_path: Path):
    file_path = tmp_path / "file.txt"
    file_path.write_text("", encoding="utf-8")

    with pytest.raises(ValidationError):
        RunConfig(grid="2x2", out=file_path)


@pytest.mark.parametrize(
    "grid, steps, sweep_steps",
    [
        ("2x2", 4, [1, 2, 4]),
        ("1x3", 3, [1, 2]),
        ("8x8", 8, [1, 2, 4, 8, 16, 32]),
    ],
)
def test_defaults_follow_the_grid(grid: str, steps: int, sweep_steps):
    config = RunConfig(grid=grid)

    assert config.steps == steps
    assert config.sweep_steps == sweep_steps


def test_grid_is_optional():
    config = RunConfig(numeric="rational", count=4)

    assert config.grid is None
    assert config.steps is None
    assert config.sweep_steps is None

    with pytest.raises(InvalidArgumentError, match="grid is required"):
        config.require_grid()


def test_require_grid():
    assert RunConfig(grid="2x3").require_grid() == GridSpec(height=2, width=3)
