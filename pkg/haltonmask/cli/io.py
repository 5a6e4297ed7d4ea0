"""On-disk formats: schedule files, metrics CSV and entropy graymaps.

Every file is written atomically through a temporary file in the target
directory followed by a rename.

"""
import csv
import io
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from haltonmask.schedule.schedulers import Schedule, schedule_from_steps
from haltonmask.sequence.gridmap import GridSpec

__all__ = [
    "ScheduleFileHeader",
    "ScheduleFile",
    "METRICS_COLUMNS",
    "atomic_write",
    "write_schedule",
    "read_schedule",
    "format_value",
    "render_csv",
    "gray_levels",
    "render_pgm",
    "parse_pgm",
    "REVEALED_GRAY",
]

METRICS_COLUMNS = [
    "step",
    "scheduler",
    "entropy_sum_nats",
    "intra_min_nn",
    "intra_mean_nn",
    "mean_dist_revealed",
    "kl_step_nats",
]

# graymap value reserved for revealed cells; masked cells use 0..254
REVEALED_GRAY = 255
MASKED_GRAY_MAX = 254


class ScheduleFileHeader(BaseModel):
    version: Literal[1] = 1
    height: int
    width: int
    steps: int
    scheduler: str
    seed: Optional[int] = None
    params: Dict[str, Any] = Field(default_factory=dict)

    class Config:
        extra = "forbid"


class ScheduleFile(BaseModel):
    """A schedule on disk: a header and S arrays of ``[row, col]`` pairs."""

    header: ScheduleFileHeader
    body: List[List[Tuple[int, int]]]

    class Config:
        extra = "forbid"

    @classmethod
    def from_schedule(
        cls, schedule: Schedule, scheduler: str, seed: Optional[int] = None, params: Optional[Dict[str, Any]] = None
    ) -> "ScheduleFile":
        header = ScheduleFileHeader(
            height=schedule.grid.height,
            width=schedule.grid.width,
            steps=schedule.size,
            scheduler=scheduler,
            seed=seed,
            params=params or {},
        )
        body = [[(cell.row, cell.col) for cell in step] for step in schedule.steps]

        return cls(header=header, body=body)

    def to_schedule(self) -> Schedule:
        if len(self.body) != self.header.steps:
            raise ValueError(f"The header announces {self.header.steps} steps, the body has {len(self.body)}.")

        grid = GridSpec(height=self.header.height, width=self.header.width)
        return schedule_from_steps(self.body, grid)


def _file_mode() -> int:
    """0o666 filtered by the process umask, the mode ``open`` would give."""

    umask = os.umask(0)
    os.umask(umask)

    return 0o666 & ~umask


def atomic_write(path: Path, data: Union[str, bytes]):
    """Write ``data`` to ``path`` through a temporary file and a rename.

    The temporary file is removed when any step fails.

    """

    path.parent.mkdir(parents=True, exist_ok=True)
    payload = data.encode("utf-8") if isinstance(data, str) else data

    tmp_file = tempfile.NamedTemporaryFile(dir=path.parent, prefix=f".{path.name}.", delete=False)
    tmp_path = Path(tmp_file.name)

    try:
        with tmp_file:
            tmp_file.write(payload)

        os.chmod(tmp_path, _file_mode())
        os.replace(tmp_path, path)
    except BaseException:
        tmp_path.unlink(missing_ok=True)
        raise


def write_schedule(
    path: Path, schedule: Schedule, scheduler: str, seed: Optional[int] = None, params: Optional[Dict[str, Any]] = None
):
    schedule_file = ScheduleFile.from_schedule(schedule, scheduler, seed, params)
    atomic_write(path, schedule_file.json(indent=2) + "\n")


def read_schedule(path: Path) -> Tuple[Schedule, ScheduleFileHeader]:
    schedule_file = ScheduleFile.parse_file(path)
    return schedule_file.to_schedule(), schedule_file.header


def format_value(value: Optional[float]) -> str:
    """CSV text of a number; undefined values are empty fields."""

    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return ""

    if isinstance(value, (int, np.integer)):
        return str(value)

    return f"{value:.12g}"


def render_csv(columns: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> str:
    """A UTF-8 CSV document with a header row."""

    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()

    for row in rows:
        writer.writerow({key: value if isinstance(value, str) else format_value(value) for key, value in row.items()})

    return buffer.getvalue()


def gray_levels(entropies: np.ndarray, vocab_size: int) -> np.ndarray:
    """Map entropies in [0, log V] linearly to 0..254; NaN (revealed) maps to 255."""

    scale = MASKED_GRAY_MAX / math.log(vocab_size)
    levels = np.full(entropies.shape, REVEALED_GRAY, dtype=np.uint8)

    masked = ~np.isnan(entropies)
    levels[masked] = np.clip(np.rint(entropies[masked] * scale), 0, MASKED_GRAY_MAX).astype(np.uint8)

    return levels


def render_pgm(levels: np.ndarray) -> bytes:
    """A binary portable graymap (P5, maxval 255)."""

    height, width = levels.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")

    return header + np.ascontiguousarray(levels, dtype=np.uint8).tobytes()


def parse_pgm(data: bytes) -> np.ndarray:
    """Read back a graymap written by :func:`render_pgm`."""

    magic, size, maxval, pixels = data.split(b"\n", 3)

    if magic != b"P5" or maxval != b"255":
        raise ValueError("Not a binary graymap with maxval 255.")

    width, height = (int(token) for token in size.split())
    return np.frombuffer(pixels, dtype=np.uint8).reshape(height, width)
