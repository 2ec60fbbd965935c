"""Two-candidate vote tallies and their half-time / final summaries.

``H`` is the incumbent, ``N`` the challenger. A row is one counting unit
(municipality or polling table); ``counted_by_halftime`` marks rows already
counted when the count was halted.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .errors import DataError
from .geodata import _parse_int, _read_rows

TALLY_FIELDS = ("region_id", "unit_id", "votes_H", "votes_N", "votes_other", "counted_by_halftime", "settlement_id")
_REQUIRED = TALLY_FIELDS[:-1]
_TRUE = {"1", "true", "t", "yes", "y"}
_FALSE = {"0", "false", "f", "no", "n"}


@dataclass(frozen=True)
class TallyRow:
    region_id: str
    unit_id: str
    votes_H: int
    votes_N: int
    votes_other: int
    counted_by_halftime: bool
    settlement_id: Optional[str] = None

    def __post_init__(self):
        if min(self.votes_H, self.votes_N, self.votes_other) < 0:
            raise ValueError("vote counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.votes_H + self.votes_N + self.votes_other


@dataclass(frozen=True)
class BallotSummary:
    """Half-time (lower case) and final (upper case) totals for one scope."""

    v_H: int
    v_N: int
    V_H: int
    V_N: int
    v_other: int = 0
    V_other: int = 0

    @property
    def v(self) -> int:
        return self.v_H + self.v_N

    @property
    def V(self) -> int:
        return self.V_H + self.V_N

    @property
    def delta(self) -> float:
        """Normalized half-time margin (v_H - v_N) / (v_H + v_N)."""
        return float(self.delta_fraction())

    @property
    def r(self) -> Optional[float]:
        """Challenger's half-time lead factor v_N / v_H; ``None`` when v_H == 0."""
        r = self.r_fraction()
        return None if r is None else float(r)

    def delta_fraction(self) -> Fraction:
        if self.v == 0:
            raise ZeroDivisionError("no two-candidate votes counted by half-time")
        return Fraction(self.v_H - self.v_N, self.v)

    def r_fraction(self) -> Optional[Fraction]:
        return None if self.v_H == 0 else Fraction(self.v_N, self.v_H)

    def shares(self, convention: str = "two-candidate") -> dict[str, float]:
        """Half-time and final shares under either normalization.

        ``two-candidate`` divides by H + N; ``raw`` divides by all counted
        ballots including third parties.
        """
        if convention == "two-candidate":
            hd, fd = self.v, self.V
        elif convention == "raw":
            hd, fd = self.v + self.v_other, self.V + self.V_other
        else:
            raise ValueError(f"unknown convention {convention!r}")
        return {
            "v_H": self.v_H / hd if hd else float("nan"),
            "v_N": self.v_N / hd if hd else float("nan"),
            "V_H": self.V_H / fd if fd else float("nan"),
            "V_N": self.V_N / fd if fd else float("nan"),
        }


def _parse_bool(text: str, line: int) -> bool:
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise DataError(f"counted_by_halftime is not a boolean: {text!r}", line=line)


def load_tallies(source) -> list[TallyRow]:
    rows = _read_rows(source, TALLY_FIELDS, _REQUIRED)
    if not rows:
        raise DataError("no tally rows")
    out = []
    for line, rec in rows:
        if not rec["region_id"] or not rec["unit_id"]:
            raise DataError("region_id and unit_id are required", line=line)
        out.append(
            TallyRow(
                region_id=rec["region_id"],
                unit_id=rec["unit_id"],
                votes_H=_parse_int(rec["votes_H"], "votes_H", line),
                votes_N=_parse_int(rec["votes_N"], "votes_N", line),
                votes_other=_parse_int(rec["votes_other"], "votes_other", line),
                counted_by_halftime=_parse_bool(rec["counted_by_halftime"], line),
                settlement_id=rec.get("settlement_id") or None,
            )
        )
    return out


def write_tallies(rows: Iterable[TallyRow], dest) -> None:
    def _write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TALLY_FIELDS)
        for r in rows:
            w.writerow([r.region_id, r.unit_id, r.votes_H, r.votes_N, r.votes_other,
                        "true" if r.counted_by_halftime else "false", r.settlement_id or ""])

    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            _write(fh)
    else:
        _write(dest)


def summarize(rows: Sequence[TallyRow], region: Optional[str] = None) -> BallotSummary:
    """Aggregate tallies for one region (``region``) or the whole country (``None``)."""
    scoped = [r for r in rows if region is None or r.region_id == region]
    half = [r for r in scoped if r.counted_by_halftime]
    if not half:
        where = "country" if region is None else f"region {region!r}"
        raise DataError(f"no half-time rows in {where}")
    return BallotSummary(
        v_H=sum(r.votes_H for r in half),
        v_N=sum(r.votes_N for r in half),
        V_H=sum(r.votes_H for r in scoped),
        V_N=sum(r.votes_N for r in scoped),
        v_other=sum(r.votes_other for r in half),
        V_other=sum(r.votes_other for r in scoped),
    )
