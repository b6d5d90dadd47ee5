"""CSV emission helpers and the common Monte Carlo summary record."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path


def fmt(value) -> str:
    """Format a cell: floats at 17 significant digits (round-trip safe)."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(cell) for cell in row])


@dataclass
class EstimatorSummary:
    """Result of one ensemble estimator run.

    studentized = (estimate - target) / stderr, left as None when there is
    no target or the standard error is zero.
    """

    name: str
    n: int
    estimate: float
    target: float | None = None
    stderr: float = 0.0
    studentized: float | None = None
    passed: bool | None = None

    HEADER = ["name", "n", "estimate", "target", "stderr", "studentized"]

    def csv_row(self):
        return [self.name, self.n, self.estimate, self.target,
                self.stderr, self.studentized]


def studentize(estimate: float, target: float, stderr: float) -> float:
    if stderr > 0.0:
        return (estimate - target) / stderr
    return 0.0 if estimate == target else float("inf")


def write_summaries(path, summaries) -> None:
    write_csv(path, EstimatorSummary.HEADER, [s.csv_row() for s in summaries])


@dataclass
class CheckRow:
    """One row of a pathwise-identity verification report."""

    check: str
    params: str
    lhs: float
    rhs: float
    residual_or_z: float
    passed: bool | None

    HEADER = ["check", "params", "lhs", "rhs", "residual_or_z", "pass"]

    def csv_row(self):
        return [self.check, self.params, self.lhs, self.rhs,
                self.residual_or_z, self.passed]


def write_check_rows(path, rows) -> None:
    write_csv(path, CheckRow.HEADER, [r.csv_row() for r in rows])
