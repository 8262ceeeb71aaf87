"""Report files.

JSON reports are written with sorted keys and fixed separators so that the
same run gives the same bytes; exact coefficients are strings in the
canonical text form and floats use their shortest round-trip form.
"""

from __future__ import annotations

import csv
import json
from collections.abc import Iterable
from collections.abc import Mapping
from collections.abc import Sequence
from fractions import Fraction
from pathlib import Path
from typing import Any

import mpmath
import numpy as np

from hnf.checks import CheckResult
from hnf.ledger import Ledger
from hnf.scalar import BaseNumber
from hnf.scalar import SmallDenomScalar
from hnf.scalar import scalar_text
from hnf.series import GradedSeries
from hnf.series import series_text

SCHEMA_VERSION = 1

LEDGER_COLUMNS = ("J", "exact", "magnitude", "step", "monomial")


def jsonable(value: Any) -> Any:
    """Convert engine values to plain JSON values."""
    if isinstance(value, Mapping):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, mpmath.mpf):
        return mpmath.nstr(value, 17)
    if isinstance(value, (Fraction, BaseNumber, Path)):
        return str(value)
    if isinstance(value, SmallDenomScalar):
        return scalar_text(value)
    if isinstance(value, GradedSeries):
        return series_text(value)
    if isinstance(value, CheckResult):
        return jsonable(value.as_dict())
    as_dict = getattr(value, "as_dict", None)
    if callable(as_dict):
        return jsonable(as_dict())
    return value


def build_report(
    command: str,
    parameters: Mapping[str, Any],
    checks: Sequence[CheckResult],
    result: Mapping[str, Any],
) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "parameters": jsonable(parameters),
        "checks": {c.name: "pass" if c.passed else "fail" for c in checks},
        "failures": [f"{c.name}: {f}" for c in checks for f in c.failures],
        "result": jsonable(result),
    }


def _prepare(path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)


def write_json(path: str | Path, data: Mapping[str, Any]) -> None:
    path = Path(path)
    _prepare(path)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(
            jsonable(data), f, sort_keys=True, indent=2, separators=(",", ": ")
        )
        f.write("\n")


def write_csv(
    path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]
) -> None:
    path = Path(path)
    _prepare(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(x) for x in row])


def _cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, mpmath.mpf):
        return mpmath.nstr(value, 17)
    return str(value)


def write_ledger(path: str | Path, ledger: Ledger) -> None:
    """One row per (J, step, monomial), sorted by J, step, monomial."""
    write_csv(
        path,
        LEDGER_COLUMNS,
        (
            [entry.row()[c] for c in LEDGER_COLUMNS]
            for entry in ledger
        ),
    )


def write_trajectory(
    path: str | Path, trajectory: Mapping[str, np.ndarray]
) -> None:
    """Columns t, q_i, p_i, J_i (pulled-back actions), energy."""
    t = trajectory["t"]
    q, p, J = trajectory["q"], trajectory["p"], trajectory["J"]
    d = q.shape[1]
    header = (
        ["t"]
        + [f"q{i + 1}" for i in range(d)]
        + [f"p{i + 1}" for i in range(d)]
        + [f"J{i + 1}" for i in range(d)]
        + ["energy"]
    )
    rows = (
        [t[k], *q[k], *p[k], *J[k], trajectory["energy"][k]]
        for k in range(len(t))
    )
    write_csv(path, header, rows)
