"""Orchestration of the three tests over regions, center counts and model forms.

A run loads both CSVs, checks that they refer to the same regions and
settlements, then evaluates one report cell per (scope unit, nvc, form).
Cells are independent and may run on a thread pool; they are assembled in a
fixed order so the JSON report does not depend on scheduling.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

import numpy as np

from . import __version__
from .ballots import TallyRow, load_tallies, summarize
from .errors import ConfigError, DataError, DegenerateError
from .fairwin import fair_win_probability
from .geodata import (
    DistanceDistribution,
    Placement,
    Region,
    distance_distribution,
    load_settlements,
    merge_distributions,
    nearest_center_distances,
    place_voting_centers,
)
from .inference import (
    ResamplePlan,
    bootstrap_c_over_m,
    probability_all_geo,
    probability_gip_form,
    probability_gip_window,
)
from .model import (
    Form,
    ModelSpec,
    SweepRow,
    default_grid,
    gip_lower_bound,
    moment_fair_win,
    moment_halftime_lead,
    sweep_model_params,
)

# bump on any change to the report layout
SCHEMA_VERSION = 1
COUNTRY = "country"
CHOROPLETH_FIELDS = ("region_id", "nvc", "form", "p_conjecture")
SWEEP_FIELDS = ("form", "param1", "param2", "E_h", "E_gh", "flag")


class Scope(str, enum.Enum):
    PER_REGION = "per-region"
    COUNTRY = "country"
    BOTH = "both"


def _spec(value) -> ModelSpec:
    if isinstance(value, ModelSpec):
        return value
    if isinstance(value, (str, Form)):
        return ModelSpec.default(value)
    if isinstance(value, Mapping):
        return ModelSpec.from_dict(value)
    raise ConfigError(f"cannot read a model form from {value!r}")


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a report, apart from the input file contents.

    ``c`` replaces the axis of reflection of every form. ``weighted``
    weights the share-versus-distance fits by unit ballot totals.
    """

    settlements_path: str
    tallies_path: str
    nvc: tuple[int, ...] = (1, 3, 5)
    placement: Placement = Placement.TOP_POPULATION
    forms: tuple[ModelSpec, ...] = (ModelSpec.default(Form.LINEAR),)
    scope: Scope = Scope.BOTH
    plan: ResamplePlan = field(default_factory=ResamplePlan)
    c: float = 0.5
    min_population: int = 0
    weighted: bool = True

    def __post_init__(self):
        try:
            nvc = tuple(int(n) for n in self.nvc)
            placement = Placement(self.placement)
            scope = Scope(self.scope)
            forms = tuple(replace(_spec(f), c=float(self.c)) for f in self.forms)
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from None
        if not nvc or min(nvc) < 1:
            raise ConfigError("nvc values must be >= 1")
        if len(set(nvc)) != len(nvc):
            raise ConfigError("nvc values must be distinct")
        if not forms:
            raise ConfigError("at least one form is required")
        if self.min_population < 0:
            raise ConfigError("min_population must be >= 0")
        for path in (self.settlements_path, self.tallies_path):
            if not os.access(path, os.R_OK) or not os.path.isfile(path):
                raise ConfigError(f"cannot read {path}")
        object.__setattr__(self, "nvc", nvc)
        object.__setattr__(self, "placement", placement)
        object.__setattr__(self, "scope", scope)
        object.__setattr__(self, "forms", forms)

    def to_dict(self) -> dict:
        return {
            "settlements_path": str(self.settlements_path),
            "tallies_path": str(self.tallies_path),
            "nvc": list(self.nvc),
            "placement": self.placement.value,
            "forms": [f.to_dict() for f in self.forms],
            "scope": self.scope.value,
            "plan": {
                "mode": self.plan.mode.value,
                "sample_size": self.plan.sample_size,
                "replicates": self.plan.replicates,
                "seed": self.plan.seed,
            },
            "c": self.c,
            "min_population": self.min_population,
            "weighted": self.weighted,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        known = {"settlements_path", "tallies_path", "nvc", "placement", "forms",
                 "scope", "plan", "c", "min_population", "weighted"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        for key in ("settlements_path", "tallies_path"):
            if key not in data:
                raise ConfigError(f"missing config key {key!r}")
        kw = dict(data)
        try:
            if "plan" in kw:
                kw["plan"] = ResamplePlan(**kw["plan"])
            if "forms" in kw:
                kw["forms"] = tuple(kw["forms"])
            return cls(**kw)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None


# --------------------------------------------------------------------------
# Loading


@dataclass(frozen=True)
class Inputs:
    regions: tuple[Region, ...]
    tallies: tuple[TallyRow, ...]
    region_of: Mapping[str, str]  # settlement id -> region id


def check_linkage(regions: Sequence[Region], tallies: Sequence[TallyRow]) -> None:
    """Raise :class:`DataError` naming every id that does not link up."""
    region_ids = {r.id for r in regions}
    region_of = {s.id: r.id for r in regions for s in r.settlements}
    tally_regions = {t.region_id for t in tallies}
    problems = []
    orphan = sorted(tally_regions - region_ids)
    if orphan:
        problems.append("tally regions without settlements: " + ", ".join(orphan))
    missing = sorted(region_ids - tally_regions)
    if missing:
        problems.append("settlement regions without tallies: " + ", ".join(missing))
    bad = sorted(t.unit_id for t in tallies if t.settlement_id is not None and t.settlement_id not in region_of)
    if bad:
        problems.append("units with unknown settlement_id: " + ", ".join(bad))
    wrong = sorted(
        t.unit_id for t in tallies
        if t.settlement_id in region_of and region_of[t.settlement_id] != t.region_id
    )
    if wrong:
        problems.append("units linked to a settlement in another region: " + ", ".join(wrong))
    if problems:
        raise DataError("; ".join(problems))


def load_inputs(config: RunConfig) -> Inputs:
    regions = load_settlements(config.settlements_path)
    tallies = load_tallies(config.tallies_path)
    check_linkage(regions, tallies)
    region_of = {s.id: r.id for r in regions for s in r.settlements}
    if config.min_population:
        kept = []
        for r in regions:
            members = tuple(s for s in r.settlements if s.population >= config.min_population)
            if not members:
                raise DataError(f"min_population {config.min_population} empties region {r.id!r}")
            kept.append(Region(r.id, members, r.name))
        regions = kept
    return Inputs(tuple(regions), tuple(tallies), region_of)


# --------------------------------------------------------------------------
# Cells


def _num(value) -> Optional[float]:
    """JSON-safe float: non-finite values become null."""
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


@dataclass(frozen=True)
class _Geometry:
    """Distances for one nvc: per-region laws and per-settlement distances."""

    nvc: int
    dists: Mapping[str, DistanceDistribution]
    country: DistanceDistribution
    distance_of: Mapping[str, float]


def _geometry(inputs: Inputs, nvc: int, placement: Placement) -> _Geometry:
    dists, distance_of = {}, {}
    for region in inputs.regions:
        centers = place_voting_centers(region, nvc, placement)
        dists[region.id] = distance_distribution(region, centers)
        d = nearest_center_distances(region, centers)
        distance_of.update({s.id: float(x) for s, x in zip(region.settlements, d)})
    country = merge_distributions([dists[r.id] for r in inputs.regions])
    return _Geometry(nvc, dists, country, distance_of)


def _points(tallies: Iterable[TallyRow], distance_of: Mapping[str, float]) -> np.ndarray:
    """Rows of (distance, incumbent share of all ballots, ballots) for linked units."""
    rows = [
        (distance_of[t.settlement_id], t.votes_H / t.total, t.total)
        for t in tallies
        if t.settlement_id in distance_of and t.total > 0
    ]
    return np.array(rows, dtype=float).reshape(-1, 3)


def _moments(dist: DistanceDistribution, notes: list[str]) -> dict:
    out = {"x_max": dist.x_max, "mean": dist.mean(), "atoms": len(dist)}
    try:
        out["fair_win"] = moment_fair_win(dist)
        out["halftime_lead"] = moment_halftime_lead(dist)
        out["gip_lower_bound"] = gip_lower_bound(dist)
    except DegenerateError as exc:
        notes.append(f"degenerate distance distribution: {exc}")
        out.update(fair_win=None, halftime_lead=None, gip_lower_bound=None)
    return {k: (_num(v) if k != "atoms" else v) for k, v in out.items()}


def _prong1(summary) -> dict:
    out = {}
    for convention in ("two-candidate", "raw"):
        p = fair_win_probability(summary.v_H, summary.v_N, v_other=summary.v_other, convention=convention)
        out[convention] = {"log10": _num(p.log10_value), "value": str(p), "asymptotic": p.asymptotic}
    return out


def _prong2(dist, spec: ModelSpec, plan: ResamplePlan, notes: list[str]) -> Optional[dict]:
    if plan.sample_size > len(dist):
        notes.append(f"sample size {plan.sample_size} exceeds the {len(dist)} populated settlements")
        return None
    # the linear form is tested through its closed-form moment conditions
    est = probability_all_geo(dist, plan, None if spec.form is Form.LINEAR else spec)
    return {
        "fraction": est.fraction,
        "fraction_fair_win": est.fraction_fair_win,
        "fraction_halftime_lead": est.fraction_halftime_lead,
        "replicates": est.replicates,
        "exhaustive": est.exhaustive,
        "standard_error": _num(est.standard_error()),
    }


def _prong3(points, dist, spec, delta, lower_bound, plan, weighted, notes) -> Optional[dict]:
    if len(points) < 2 or np.ptp(points[:, 0]) == 0:
        notes.append("fewer than two distinct unit distances; no share fit")
        return None
    if spec.form is Form.LINEAR:
        if lower_bound is None:
            return None
        sample = bootstrap_c_over_m(points, plan, weighted)
        est = probability_gip_window(sample.ratios, lower_bound, delta)
    else:
        est = probability_gip_form(points, spec, dist, delta, plan, weighted)
    return {"fraction": est.fraction, "applicable": est.applicable,
            "n_used": est.n_used, "n_undefined": est.n_undefined}


def _cells_for(unit: str, geometry: _Geometry, inputs: Inputs, config: RunConfig) -> list[dict]:
    scope = "country" if unit == COUNTRY else "region"
    dist = geometry.country if unit == COUNTRY else geometry.dists[unit]
    tallies = [t for t in inputs.tallies if unit == COUNTRY or t.region_id == unit]
    base_notes: list[str] = []
    try:
        summary = summarize(tallies)
    except DataError as exc:
        summary = None
        base_notes.append(str(exc))
    moments = _moments(dist, base_notes)
    points = _points(tallies, geometry.distance_of)
    delta = summary.delta if summary is not None else None
    prong1 = _prong1(summary) if summary is not None else None

    cells = []
    for spec in config.forms:
        notes = list(base_notes)
        prong2 = _prong2(dist, spec, config.plan, notes)
        prong3 = None
        if delta is not None:
            prong3 = _prong3(points, dist, spec, delta, moments["gip_lower_bound"], config.plan, config.weighted, notes)
        cells.append({
            "scope": scope,
            "unit": unit,
            "nvc": geometry.nvc,
            "form": spec.form.value,
            "params": dict(sorted(spec.params.items())),
            "delta": _num(delta),
            "r": _num(summary.r) if summary is not None else None,
            "half_time": None if summary is None else {
                "v_H": summary.v_H, "v_N": summary.v_N, "v_other": summary.v_other,
                "V_H": summary.V_H, "V_N": summary.V_N, "V_other": summary.V_other,
            },
            "prong1": prong1,
            "prong2": prong2,
            "prong3": prong3,
            "moments": moments,
            "points": int(len(points)),
            "notes": notes,
        })
    return cells


def _units(config: RunConfig, inputs: Inputs) -> list[str]:
    units = []
    if config.scope in (Scope.PER_REGION, Scope.BOTH):
        units.extend(r.id for r in inputs.regions)
    if config.scope in (Scope.COUNTRY, Scope.BOTH):
        units.append(COUNTRY)
    return units


def run_analysis(config: RunConfig, workers: int = 1, inputs: Optional[Inputs] = None) -> dict:
    """Evaluate every (scope unit, nvc, form) cell and return the report dict.

    The result depends only on ``config`` and the file contents; ``workers``
    changes scheduling, never output.
    """
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    inputs = inputs or load_inputs(config)
    geometries = [_geometry(inputs, n, config.placement) for n in sorted(config.nvc)]
    tasks = [(unit, geo) for unit in _units(config, inputs) for geo in geometries]

    def work(task):
        return _cells_for(task[0], task[1], inputs, config)

    if workers == 1:
        results = [work(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, tasks))
    cells = [cell for block in results for cell in block]
    return {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "seed": config.plan.seed,
        "config": config.to_dict(),
        "degenerate": any(n.startswith("degenerate") for c in cells for n in c["notes"]),
        "cells": cells,
    }


def report_json(report: Mapping) -> str:
    """Canonical serialization: sorted keys, no NaN, trailing newline."""
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


# --------------------------------------------------------------------------
# CSV extracts


def _write_csv(header, rows, dest) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    text = buf.getvalue()
    if dest is not None:
        Path(dest).write_text(text, encoding="utf-8")
    return text


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def emit_choropleth(report: Mapping, scope: str = "region", prong: int = 3, dest=None) -> str:
    """Per-unit conjecture probabilities as ``region_id,nvc,form,p_conjecture``.

    ``scope`` selects region or country cells; ``prong`` picks the prong-2
    or prong-3 fraction. Rows are ordered by region id, then nvc, then form
    order within the run. Cells without a value get an empty field.
    """
    if scope not in ("region", "country"):
        raise ValueError("scope must be 'region' or 'country'")
    if prong not in (2, 3):
        raise ValueError("prong must be 2 or 3")
    key = f"prong{prong}"
    chosen = [(i, c) for i, c in enumerate(report.get("cells", ())) if c["scope"] == scope]
    chosen.sort(key=lambda ic: (ic[1]["unit"], ic[1]["nvc"], ic[0]))
    rows = [
        (c["unit"], c["nvc"], c["form"], _fmt(c[key]["fraction"] if c[key] else None))
        for _, c in chosen
    ]
    return _write_csv(CHOROPLETH_FIELDS, rows, dest)


def emit_sweep(rows: Iterable[SweepRow], dest=None) -> str:
    """Sweep table as ``form,param1,param2,E_h,E_gh,flag``."""
    out = []
    for r in rows:
        p1 = _fmt(r.params[0])
        p2 = _fmt(r.params[1]) if len(r.params) > 1 else ""
        out.append((Form(r.form).value, p1, p2, _fmt(r.E_h), _fmt(r.E_gh), "true" if r.flag else "false"))
    return _write_csv(SWEEP_FIELDS, out, dest)


def run_sweep(
    inputs: Inputs,
    forms: Sequence[Form | str],
    nvc: int,
    *,
    unit: str = COUNTRY,
    placement: Placement | str = Placement.TOP_POPULATION,
    points: int = 41,
    c: float = 0.5,
) -> list[SweepRow]:
    """Default-grid sweeps of several forms on one unit's distance law."""
    geometry = _geometry(inputs, nvc, Placement(placement))
    if unit == COUNTRY:
        dist = geometry.country
    elif unit in geometry.dists:
        dist = geometry.dists[unit]
    else:
        raise ConfigError(f"unknown region {unit!r}")
    rows: list[SweepRow] = []
    for form in forms:
        rows.extend(sweep_model_params(form, default_grid(form, points), dist, c=c))
    return rows
