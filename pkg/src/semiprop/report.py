"""Machine-readable run reports: JSON check records and 17-digit CSV tables.

A report is a flat list of check records plus an optional convergence
table.  Records carry both the measured value and the tolerance it was
held against; diagnostic records are informational and never affect the
overall pass flag.  CSV output uses 17 significant digits so that reruns
of the same configuration diff clean.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from . import __version__

__all__ = [
    "CheckRecord",
    "Report",
    "build_convergence_rows",
    "emit_convergence_table",
    "format_float",
    "write_csv",
]

# below this a residual sequence is roundoff, not discretization error
PLATEAU_FLOOR = 1e-12


@dataclass(frozen=True)
class CheckRecord:
    """One measured value held against one tolerance.

    ``detail`` states the comparison in words (most checks are
    value <= tolerance; probes like positivity say so here).
    Diagnostic records report a value with no pass semantics.
    """

    name: str
    value: float
    tolerance: Optional[float]
    passed: bool
    diagnostic: bool = False
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "diagnostic": self.diagnostic,
            "detail": self.detail,
        }


@dataclass
class Report:
    scenario: str
    checks: list[CheckRecord] = field(default_factory=list)
    convergence: Optional[list[dict]] = None
    seed: int = 0
    runtime_seconds: float = 0.0
    version: str = __version__

    @property
    def passed(self) -> bool:
        gating = [c.passed for c in self.checks if not c.diagnostic]
        return bool(gating) and all(gating)

    def as_dict(self) -> dict:
        payload = {
            "scenario": self.scenario,
            "checks": [c.as_dict() for c in self.checks],
        }
        if self.convergence is not None:
            payload["convergence"] = self.convergence
        payload["seed"] = self.seed
        payload["runtime_seconds"] = self.runtime_seconds
        payload["version"] = self.version
        payload["pass"] = self.passed
        return payload

    def write_json(self, path: Path) -> None:
        path.write_text(json.dumps(self.as_dict(), indent=2) + "\n")


def format_float(value) -> str:
    """Decimal rendering used in every CSV cell."""
    if isinstance(value, str):
        return value
    if isinstance(value, (int,)) or (
        hasattr(value, "dtype") and value.dtype.kind in "iu"
    ):
        return str(int(value))
    return "%.17g" % float(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_float(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def build_convergence_rows(
    hs: Sequence[float], residuals: Sequence[float]
) -> list[dict]:
    """Rows (h, residual, observed_order) from a refinement sequence.

    The order entry is the exponent fitted between consecutive rows; the
    first row has none, and rows at the roundoff plateau (either residual
    below PLATEAU_FLOOR) are marked not applicable rather than fitted.
    """
    hs = [float(h) for h in hs]
    residuals = [float(r) for r in residuals]
    if len(hs) != len(residuals):
        raise ValueError("need one residual per refinement level")
    if len(hs) < 3:
        raise ValueError(
            "need at least 3 refinement levels, got {}".format(len(hs))
        )
    if any(h <= 0 for h in hs):
        raise ValueError("refinement levels must be positive")
    rows = [{"h": hs[0], "residual": residuals[0], "observed_order": None}]
    for i in range(1, len(hs)):
        if min(residuals[i], residuals[i - 1]) <= PLATEAU_FLOOR:
            order = None
        elif hs[i] == hs[i - 1]:
            raise ValueError("refinement levels must be distinct")
        else:
            order = math.log(residuals[i - 1] / residuals[i]) / math.log(
                hs[i - 1] / hs[i]
            )
        rows.append({"h": hs[i], "residual": residuals[i], "observed_order": order})
    return rows


def emit_convergence_table(hs: Sequence[float], residuals: Sequence[float]) -> str:
    """CSV text of a refinement study, orders marked n/a on the plateau."""
    rows = build_convergence_rows(hs, residuals)
    lines = ["h,residual,observed_order"]
    for row in rows:
        order = row["observed_order"]
        lines.append(
            ",".join(
                [
                    format_float(row["h"]),
                    format_float(row["residual"]),
                    "n/a" if order is None else format_float(order),
                ]
            )
        )
    return "\n".join(lines) + "\n"
