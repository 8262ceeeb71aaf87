"""The small-denominator ledger.

Every divisor (alpha, J) an engine divides by is recorded together with the
step and the monomial that required it, so a run can be audited afterwards.
"""

from __future__ import annotations

import logging
from collections.abc import Iterator
from collections.abc import Sequence
from dataclasses import dataclass
from dataclasses import field

from hnf.scalar import BaseNumber

logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class LedgerEntry:
    J: tuple[int, ...]
    step: int
    monomial: str
    pairing: BaseNumber = field(compare=False)

    @property
    def magnitude(self) -> float:
        return abs(complex(self.pairing))

    def row(self) -> dict[str, str | int | float]:
        return {
            "J": " ".join(str(j) for j in self.J),
            "exact": str(self.pairing),
            "magnitude": self.magnitude,
            "step": self.step,
            "monomial": self.monomial,
        }


@dataclass
class Ledger:
    """Append-only record of divisors, one entry per (J, step, monomial)."""

    _entries: dict[tuple[tuple[int, ...], int, str], LedgerEntry] = field(
        default_factory=dict
    )

    def record(
        self,
        J: Sequence[int],
        pairing: BaseNumber,
        *,
        step: int,
        monomial: str,
    ) -> None:
        key = (tuple(J), step, monomial)
        if key not in self._entries:
            self._entries[key] = LedgerEntry(key[0], step, monomial, pairing)
            logger.debug(
                "ledger: J=%s at step %d for %s", key[0], step, monomial
            )

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[LedgerEntry]:
        return iter(sorted(self._entries.values()))

    def forms(self) -> set[tuple[int, ...]]:
        return {entry.J for entry in self._entries.values()}

    def smallest(self) -> LedgerEntry | None:
        return min(self, key=lambda e: e.magnitude, default=None)
