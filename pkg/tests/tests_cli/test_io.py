import json
import math
import os
import stat
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from haltonmask.cli.io import (
    METRICS_COLUMNS,
    REVEALED_GRAY,
    ScheduleFile,
    atomic_write,
    format_value,
    gray_levels,
    parse_pgm,
    read_schedule,
    render_csv,
    render_pgm,
    write_schedule,
)
from haltonmask.schedule.plan import step_size_plan
from haltonmask.schedule.schedulers import halton_schedule, random_schedule
from haltonmask.sequence.gridmap import GridSpec


def test_schedule_file_roundtrip(tmp_path: Path):
    grid = GridSpec(height=5, width=3)
    schedule = random_schedule(grid, step_size_plan(grid.n, 4), seed=9)
    path = tmp_path / "schedule.json"

    write_schedule(path, schedule, "random", seed=9, params={"plan": "cosine"})
    result, header = read_schedule(path)

    assert result == schedule
    assert (header.version, header.height, header.width, header.steps) == (1, 5, 3, 4)
    assert (header.scheduler, header.seed, header.params) == ("random", 9, {"plan": "cosine"})


def test_schedule_file_layout(tmp_path: Path):
    grid = GridSpec(height=2, width=2)
    path = tmp_path / "schedule.json"

    write_schedule(path, halton_schedule(grid, step_size_plan(4, 4)), "halton")
    data = json.loads(path.read_text(encoding="utf-8"))

    assert data["body"] == [[[0, 1]], [[1, 0]], [[0, 0]], [[1, 1]]]
    assert data["header"]["seed"] is None


@pytest.mark.parametrize(
    "data",
    [
        {
            "header": {"height": 2, "width": 2, "steps": 2, "scheduler": "x"},
            "body": [[[0, 0], [0, 1], [1, 0], [1, 1]]],
        },
        {
            "header": {"height": 2, "width": 2, "steps": 1, "scheduler": "x"},
            "body": [[[0, 0], [0, 1], [1, 0]]],
        },
    ],
)
def test_schedule_file_rejects_inconsistent_body(data):
    with pytest.raises(ValueError):
        ScheduleFile.parse_obj(data).to_schedule()


def test_schedule_file_rejects_other_versions():
    with pytest.raises(ValidationError):
        ScheduleFile.parse_obj(
            {"header": {"version": 2, "height": 1, "width": 1, "steps": 1, "scheduler": "x"}, "body": [[[0, 0]]]}
        )


def test_atomic_write(tmp_path: Path):
    path = tmp_path / "nested" / "file.txt"

    atomic_write(path, "first")
    atomic_write(path, b"second")

    assert path.read_bytes() == b"second"
    assert [item.name for item in path.parent.iterdir()] == ["file.txt"]


@pytest.mark.skipif(os.name != "posix", reason="POSIX permissions")
def test_atomic_write_follows_the_umask(tmp_path: Path):
    previous = os.umask(0o027)

    try:
        atomic_write(tmp_path / "file.txt", "data")
    finally:
        os.umask(previous)

    assert stat.S_IMODE((tmp_path / "file.txt").stat().st_mode) == 0o640


@pytest.mark.parametrize("target", ["os.replace", "os.chmod"])
def test_atomic_write_cleans_up_on_failure(tmp_path: Path, mocker, target: str):
    mocker.patch(f"haltonmask.cli.io.{target}", side_effect=OSError("disk full"))

    with pytest.raises(OSError, match="disk full"):
        atomic_write(tmp_path / "file.txt", "data")

    assert list(tmp_path.iterdir()) == []


@pytest.mark.parametrize(
    "value, result",
    [
        (None, ""),
        (math.inf, ""),
        (math.nan, ""),
        (3, "3"),
        (np.int64(7), "7"),
        (0.1, "0.1"),
        (1.0 / 3.0, "0.333333333333"),
        (np.float64(2.5), "2.5"),
    ],
)
def test_format_value(value, result: str):
    assert format_value(value) == result


def test_render_csv():
    rows = [
        {"step": 1, "scheduler": "halton", "entropy_sum_nats": 0.5, "intra_min_nn": math.inf},
        {"step": 2, "scheduler": "halton", "mean_dist_revealed": 1.0, "kl_step_nats": None},
    ]

    assert render_csv(METRICS_COLUMNS, rows) == (
        "step,scheduler,entropy_sum_nats,intra_min_nn,intra_mean_nn,mean_dist_revealed,kl_step_nats\n"
        "1,halton,0.5,,,,\n"
        "2,halton,,,,1,\n"
    )


def test_gray_levels():
    entropies = np.array([[0.0, math.log(2)], [math.log(2) / 2, np.nan]])

    assert gray_levels(entropies, 2).tolist() == [[0, 254], [127, REVEALED_GRAY]]


def test_pgm_roundtrip():
    levels = np.array([[0, 10, 255], [254, 1, 2]], dtype=np.uint8)
    data = render_pgm(levels)

    assert data.startswith(b"P5\n3 2\n255\n")
    assert np.array_equal(parse_pgm(data), levels)


def test_parse_pgm_raises():
    with pytest.raises(ValueError):
        parse_pgm(b"P2\n1 1\n255\n\x00")
