"""Settlements, voting-center placement and distance distributions.

Distances are great-circle (haversine) kilometres on a sphere of radius
6371 km; coordinates are decimal degrees.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import os
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError

EARTH_RADIUS_KM = 6371.0
SETTLEMENT_FIELDS = ("id", "name", "region_id", "latitude", "longitude", "population")
KMEANS_MAX_ITER = 100


@dataclass(frozen=True)
class Settlement:
    id: str
    name: str
    region_id: str
    latitude: float
    longitude: float
    population: int

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude out of range: {self.latitude}")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"longitude out of range: {self.longitude}")
        if self.population < 0:
            raise ValueError(f"negative population: {self.population}")

    @property
    def coords(self) -> tuple[float, float]:
        return (self.latitude, self.longitude)


@dataclass(frozen=True)
class Region:
    id: str
    settlements: tuple[Settlement, ...]
    name: str = ""

    def __post_init__(self):
        if not self.settlements:
            raise ValueError(f"region {self.id!r} has no settlements")
        if not any(s.population > 0 for s in self.settlements):
            raise ValueError(f"region {self.id!r} has no populated settlement")
        if not self.name:
            object.__setattr__(self, "name", self.id)

    @property
    def population(self) -> int:
        return sum(s.population for s in self.settlements)

    def coordinates(self) -> np.ndarray:
        return np.array([s.coords for s in self.settlements], dtype=float)


class Placement(str, enum.Enum):
    TOP_POPULATION = "top"
    WEIGHTED_KMEANS = "kmeans"


@dataclass(frozen=True)
class VotingCenters:
    region_id: str
    centers: tuple[tuple[float, float], ...]
    nvc: int
    strategy: Placement
    settlement_ids: tuple[str, ...] = ()


@dataclass(frozen=True, eq=False)
class DistanceDistribution:
    """Empirical law of voter-to-nearest-center distance.

    ``x`` holds one distance per atom (km) and ``weights`` the population
    share of that atom; weights sum to one.
    """

    x: np.ndarray
    weights: np.ndarray
    total_population: int = 0
    x_max: float = field(init=False)

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        w = np.array(self.weights, dtype=float)
        if x.ndim != 1 or x.shape != w.shape or x.size == 0:
            raise ValueError("x and weights must be nonempty 1-D arrays of equal length")
        if np.any(x < 0) or not np.all(np.isfinite(x)):
            raise ValueError("distances must be finite and nonnegative")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and positive")
        w = w / math.fsum(w)
        x.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "x_max", float(x.max()))

    @classmethod
    def from_populations(cls, x, populations) -> "DistanceDistribution":
        """Build from raw (possibly zero) populations; zero-mass atoms are dropped."""
        x = np.asarray(x, dtype=float)
        pop = np.asarray(populations, dtype=float)
        keep = pop > 0
        if not keep.any():
            raise DataError("distance distribution has no population mass")
        return cls(x[keep], pop[keep], int(round(pop[keep].sum())))

    def __len__(self) -> int:
        return self.x.size

    def mean(self) -> float:
        return math.fsum(self.weights * self.x)

    def expect(self, values) -> float:
        """Weighted mean of ``values`` (array over atoms or callable of x)."""
        if callable(values):
            values = values(self.x)
        return math.fsum(self.weights * np.asarray(values, dtype=float))


# --------------------------------------------------------------------------
# CSV I/O


def _open_text(source) -> tuple[IO[str], bool]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline="", encoding="utf-8"), True
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(source.decode("utf-8"), newline=""), True
    if isinstance(source, io.TextIOBase):
        return source, False
    # binary stream
    return io.TextIOWrapper(source, encoding="utf-8", newline=""), False


def _read_rows(source, fields: Sequence[str], required: Sequence[str]):
    fh, owned = _open_text(source)
    try:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty file (no header)", line=1) from None
        header = [h.strip().lstrip("﻿") for h in header]
        missing = [f for f in required if f not in header]
        if missing:
            raise DataError(f"header missing columns {missing}", line=1)
        index = {name: header.index(name) for name in fields if name in header}
        rows = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"expected {len(header)} fields, got {len(row)}", line=line)
            rows.append((line, {name: row[i].strip() for name, i in index.items()}))
        return rows
    finally:
        if owned:
            fh.close()


def _parse_int(text: str, what: str, line: int) -> int:
    try:
        value = int(text)
    except ValueError:
        raise DataError(f"{what} is not an integer: {text!r}", line=line) from None
    if value < 0:
        raise DataError(f"{what} must be nonnegative, got {value}", line=line)
    return value


def load_settlements(source, min_population: int = 0) -> list[Region]:
    """Read the settlements CSV and group rows into regions.

    Regions are returned sorted by id; settlements keep file order.
    ``min_population`` drops settlements below the threshold after
    validation (default keeps everything).
    """
    rows = _read_rows(source, SETTLEMENT_FIELDS, SETTLEMENT_FIELDS)
    if not rows:
        raise DataError("no settlement rows")
    seen: dict[str, int] = {}
    grouped: dict[str, list[Settlement]] = {}
    for line, rec in rows:
        sid = rec["id"]
        if not sid:
            raise DataError("empty settlement id", line=line)
        if sid in seen:
            raise DataError(f"duplicate settlement id {sid!r} (first on line {seen[sid]})", line=line)
        seen[sid] = line
        if not rec["region_id"]:
            raise DataError("empty region_id", line=line)
        try:
            lat = float(rec["latitude"])
            lon = float(rec["longitude"])
        except ValueError:
            raise DataError("latitude/longitude must be numbers", line=line) from None
        pop = _parse_int(rec["population"], "population", line)
        try:
            s = Settlement(sid, rec["name"], rec["region_id"], lat, lon, pop)
        except ValueError as exc:
            raise DataError(str(exc), line=line) from None
        grouped.setdefault(s.region_id, []).append(s)

    regions = []
    for rid in sorted(grouped):
        members = [s for s in grouped[rid] if s.population >= min_population]
        try:
            regions.append(Region(rid, tuple(members)))
        except ValueError as exc:
            raise DataError(str(exc)) from None
    return regions


def write_settlements(regions: Iterable[Region], dest) -> None:
    def _write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SETTLEMENT_FIELDS)
        for region in regions:
            for s in region.settlements:
                w.writerow([s.id, s.name, s.region_id, repr(s.latitude), repr(s.longitude), s.population])

    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            _write(fh)
    else:
        _write(dest)


# --------------------------------------------------------------------------
# Distances


def haversine_distance(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Great-circle distance in km between two (lat, lon) points in degrees."""
    lat1, lon1 = map(math.radians, a)
    lat2, lon2 = map(math.radians, b)
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def haversine_matrix(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Pairwise distances, shape (len(points), len(centers))."""
    p = np.radians(np.asarray(points, dtype=float).reshape(-1, 2))
    c = np.radians(np.asarray(centers, dtype=float).reshape(-1, 2))
    dlat = c[None, :, 0] - p[:, None, 0]
    dlon = c[None, :, 1] - p[:, None, 1]
    h = np.sin(dlat / 2) ** 2 + np.cos(p[:, None, 0]) * np.cos(c[None, :, 0]) * np.sin(dlon / 2) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(h)))


# --------------------------------------------------------------------------
# Voting centers


def _top_population_order(settlements: Sequence[Settlement]) -> list[int]:
    return sorted(range(len(settlements)), key=lambda i: (-settlements[i].population, settlements[i].id))


def _top_population(settlements: Sequence[Settlement], nvc: int) -> list[int]:
    chosen: list[int] = []
    taken: set[tuple[float, float]] = set()
    for i in _top_population_order(settlements):
        if len(chosen) == nvc:
            break
        if settlements[i].coords in taken:
            continue
        chosen.append(i)
        taken.add(settlements[i].coords)
    return chosen


def _spherical_centroid(coords: np.ndarray, weights: np.ndarray) -> tuple[float, float]:
    lat, lon = np.radians(coords[:, 0]), np.radians(coords[:, 1])
    v = np.stack([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)], axis=1)
    m = (weights[:, None] * v).sum(axis=0)
    norm = np.linalg.norm(m)
    if norm == 0.0:
        return tuple(coords[0])
    m /= norm
    return (math.degrees(math.asin(max(-1.0, min(1.0, m[2])))), math.degrees(math.atan2(m[1], m[0])))


def _weighted_kmeans(settlements: Sequence[Settlement], nvc: int) -> list[int]:
    coords = np.array([s.coords for s in settlements], dtype=float)
    pops = np.array([s.population for s in settlements], dtype=float)
    centers = _top_population(settlements, nvc)
    k = len(centers)
    dist = haversine_matrix(coords, coords)
    assign = None
    for _ in range(KMEANS_MAX_ITER):
        new_assign = np.argmin(dist[:, centers], axis=1)
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        updated: list[int] = []
        for j in range(k):
            members = np.flatnonzero(assign == j)
            mass = pops[members]
            if mass.sum() <= 0:
                updated.append(centers[j])
                continue
            target = _spherical_centroid(coords[members], mass)
            # snap to the nearest settlement not already holding a center
            d = haversine_matrix(np.array([target]), coords)[0]
            for i in np.argsort(d, kind="stable"):
                if int(i) not in updated:
                    updated.append(int(i))
                    break
        centers = updated
    return centers


def place_voting_centers(region: Region, nvc: int, strategy: Placement | str = Placement.TOP_POPULATION) -> VotingCenters:
    """Choose ``nvc`` major voting centers among a region's settlements.

    ``TOP_POPULATION`` takes the most populous settlements (ties by id).
    ``WEIGHTED_KMEANS`` runs population-weighted k-means on great-circle
    distance starting from the top-population centers, snapping each updated
    center to the nearest settlement. Asking for more centers than there are
    settlements makes every settlement a center.
    """
    if nvc < 1:
        raise ValueError("nvc must be >= 1")
    strategy = Placement(strategy)
    settlements = region.settlements
    n = min(nvc, len(settlements))
    if strategy is Placement.TOP_POPULATION:
        idx = _top_population(settlements, n)
    else:
        idx = _weighted_kmeans(settlements, n)
    return VotingCenters(
        region_id=region.id,
        centers=tuple(settlements[i].coords for i in idx),
        nvc=nvc,
        strategy=strategy,
        settlement_ids=tuple(settlements[i].id for i in idx),
    )


def nearest_center_distances(region: Region, centers: VotingCenters) -> np.ndarray:
    """Distance (km) from every settlement of ``region`` to its nearest center."""
    if centers.region_id != region.id:
        raise ValueError(f"centers belong to {centers.region_id!r}, not {region.id!r}")
    d = haversine_matrix(region.coordinates(), np.array(centers.centers)).min(axis=1)
    # a settlement that is itself a center sits at exactly zero
    ids = set(centers.settlement_ids)
    for i, s in enumerate(region.settlements):
        if s.id in ids:
            d[i] = 0.0
    return d


def distance_distribution(
    regions: Region | Sequence[Region],
    centers: VotingCenters | Mapping[str, VotingCenters],
) -> DistanceDistribution:
    """Population-weighted distance distribution of one region or a pool of regions.

    One atom per populated settlement: its nearest-center distance weighted
    by population. Pooling regions uses each region's own centers.
    """
    if isinstance(regions, Region):
        regions = [regions]
    if isinstance(centers, VotingCenters):
        centers = {centers.region_id: centers}
    xs, pops = [], []
    for region in regions:
        if region.id not in centers:
            raise DataError(f"no voting centers for region {region.id!r}")
        xs.append(nearest_center_distances(region, centers[region.id]))
        pops.append(np.array([s.population for s in region.settlements], dtype=float))
    return DistanceDistribution.from_populations(np.concatenate(xs), np.concatenate(pops))


def merge_distributions(dists: Sequence[DistanceDistribution]) -> DistanceDistribution:
    """Pool distributions, re-weighting each by its total population."""
    totals = np.array([d.total_population for d in dists], dtype=float)
    if np.any(totals <= 0):
        raise ValueError("merging requires positive total_population on every input")
    x = np.concatenate([d.x for d in dists])
    pop = np.concatenate([d.weights * t for d, t in zip(dists, totals)])
    return DistanceDistribution(x, pop, int(totals.sum()))
