"""Run configuration.

`RunConfig` is validated before any computation starts. It is built from
the command-line flags laid over an optional JSON file given with
``--config``; flags that were given explicitly win over the file.
"""

from __future__ import annotations

import json
import os
from collections.abc import Mapping
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import fields
from pathlib import Path
from typing import Any
from typing import Literal

from hnf.errors import RangeError
from hnf.errors import UnknownConfigKey

THREADS_ENV = "HNF_THREADS"

COMMANDS = ("bnf", "hnf", "freq", "arith", "majorant", "lemmas", "torus")
ARITH_KINDS = ("sigma", "bruno", "zn", "absorb", "density")
NEEDS_INPUT = ("bnf", "hnf", "freq", "torus")

_PATHS = ("input", "out", "ledger", "csv")
_TUPLES = ("beta", "bound", "rhos", "actions")

Form = Literal["direct", "kam"]
Strategy = Literal["degree", "monomial"]
Norm = Literal["linf", "l1", "l2"]
IntegratorName = Literal["dop853", "leapfrog", "yoshida"]


def thread_count() -> int:
    """Worker count for the parallel loops, from HNF_THREADS (default 1)."""
    value = os.environ.get(THREADS_ENV, "1")
    try:
        count = int(value)
    except ValueError:
        raise RangeError(f"{THREADS_ENV}={value!r} is not an integer") from None
    if count < 1:
        raise RangeError(f"{THREADS_ENV} must be at least 1, got {count}")
    return count


@dataclass(frozen=True)
class RunConfig:
    """Everything one invocation of ``hnf`` computes with."""

    command: str
    kind: str | None = None
    input: Path | None = None
    cutoff: int | None = None
    steps: int | None = None
    kmax: int = 8
    seed: int = 0
    precision: int = 128
    out: Path = Path("report.json")
    ledger: Path | None = None
    csv: Path | None = None
    form: Form = "direct"
    strategy: Strategy = "degree"
    beta: tuple[float, ...] = ()
    sequence: str = "geometric(0.5)"
    rho_spec: str = "geometric(0.5)"
    target: str = "geometric(0.5)"
    bound: tuple[float, ...] = (1.0, 1.0, 0.0, 0.0)
    s0: float = 0.5
    eps: float = 0.01
    samples: int = 1000
    norm: Norm = "linf"
    R: float = 1.0
    kappa: float = 1.75
    z0: float | None = None
    N: int = 40
    rhos: tuple[float, ...] = (0.1, 0.05, 0.025)
    actions: tuple[float, ...] = ()
    T: float = 100.0
    points: int = 8
    integrator: IntegratorName = "dop853"
    step: float = 1e-2
    energy_tol: float = 1e-9

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise RangeError(f"unknown command {self.command!r}")
        if self.command == "arith" and self.kind not in ARITH_KINDS:
            raise RangeError(
                f"arith needs one of {', '.join(ARITH_KINDS)}, "
                f"got {self.kind!r}"
            )
        if self.command in NEEDS_INPUT and self.input is None:
            raise RangeError(f"{self.command} needs an input file")
        if self.cutoff is not None and self.cutoff < 2:
            raise RangeError(f"cutoff must be at least 2, got {self.cutoff}")
        for name in ("steps", "kmax", "N"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise RangeError(f"{name} must be nonnegative, got {value}")
        if self.precision < 16:
            raise RangeError(f"precision {self.precision} is below 16 bits")
        if self.samples < 1 or self.points < 1:
            raise RangeError("samples and points must be positive")
        if self.form not in ("direct", "kam"):
            raise RangeError(f"unknown iteration form {self.form!r}")
        if self.strategy not in ("degree", "monomial"):
            raise RangeError(f"unknown removal strategy {self.strategy!r}")
        if self.norm not in ("linf", "l1", "l2"):
            raise RangeError(f"unknown norm {self.norm!r}")
        if self.integrator not in ("dop853", "leapfrog", "yoshida"):
            raise RangeError(f"unknown integrator {self.integrator!r}")
        if len(self.bound) != 4:
            raise RangeError("bound takes the four constants C, k, l, m")
        if self.T <= 0 or self.step <= 0:
            raise RangeError("T and step must be positive")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> RunConfig:
        """Build a config, rejecting keys that name no field.

        Raises:
            UnknownConfigKey: For the first unknown key, in sorted order.
        """
        known = {f.name for f in fields(cls)}
        for key in sorted(data):
            if key not in known:
                raise UnknownConfigKey(key)
        values = dict(data)
        for key in _PATHS:
            if values.get(key) is not None:
                values[key] = Path(values[key])
        for key in _TUPLES:
            if values.get(key) is not None:
                values[key] = tuple(float(x) for x in values[key])
        return cls(**values)

    @staticmethod
    def read(path: str | Path) -> dict[str, Any]:
        with open(path) as f:
            data = json.load(f)
        if not isinstance(data, dict):
            raise RangeError(f"config file {path} must hold a JSON object")
        return data

    def parameters(self) -> dict[str, Any]:
        """The config as JSON-ready values, for reports.

        Output paths are left out so a report does not depend on where it
        is written.
        """
        out = asdict(self)
        for key in ("out", "ledger", "csv"):
            del out[key]
        if out["input"] is not None:
            out["input"] = Path(out["input"]).name
        for key in _TUPLES:
            out[key] = list(out[key])
        return out
