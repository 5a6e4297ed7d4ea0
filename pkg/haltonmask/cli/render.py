import os
from pathlib import Path
from typing import Mapping, Optional, Sequence

from jinja2 import Environment, FileSystemLoader, Template

__all__ = [
    "SummaryRender",
]


# templates setting for text summaries
TEMPLATES_FOLDER = Path(os.path.join(os.path.dirname(__file__), "templates/"))

template_env = Environment(loader=FileSystemLoader(searchpath=TEMPLATES_FOLDER), keep_trailing_newline=True)


class SummaryRender:
    """Render human-readable summaries of haltonmask runs.

    Args:
        precision: significant digits of reported numbers.

    """

    _template_compare: Template = template_env.get_template("compare.jinja2")
    _template_sweep: Template = template_env.get_template("sweep.jinja2")

    def __init__(self, precision: int = 6):
        self.precision = precision

    def number(self, value: Optional[float]) -> str:
        if value is None:
            return "n/a"

        return f"{value:.{self.precision}g}"

    def render_compare(
        self,
        grid: str,
        steps: int,
        seed: int,
        aggregate: Mapping[str, Optional[float]],
        final_entropy: Mapping[str, float],
    ) -> str:
        """Render the summary of the compare command with `compare.jinja2` template.

        Args:
            grid: grid label.
            steps: number of steps.
            seed: master seed.
            aggregate: exact aggregate MI per scheduler, None when not computed.
            final_entropy: entropy sum of the last step per scheduler.

        """

        rows = [(name, self.number(aggregate.get(name)), self.number(final_entropy[name])) for name in final_entropy]

        return self._template_compare.render(grid=grid, steps=steps, seed=seed, rows=rows)

    def render_sweep(
        self, grid: str, total_correlation: float, table: Mapping[str, Sequence[float]], steps: Sequence[int]
    ) -> str:
        """Render aggregate MI against the number of steps with `sweep.jinja2` template."""

        rows = [(name, [self.number(value) for value in values]) for name, values in table.items()]

        return self._template_sweep.render(
            grid=grid, total_correlation=self.number(total_correlation), rows=rows, steps=list(steps)
        )
