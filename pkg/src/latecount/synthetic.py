"""Synthetic Honduras-shaped fixture.

Eighteen regions placed at the departamento capitals. Most regions have a
dominant capital and population that decays quickly with distance from it;
three remote regions are sparse, with population spread out to their
edges. Ballot shares in the dense regions drift *against* the incumbent
with distance, while in the sparse regions they drift toward the incumbent, so the
fixture exercises both outcomes of every test.

The shipped CSVs under ``latecount/data`` are ``generate(seed=2017)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .ballots import TallyRow, write_tallies
from .geodata import Region, Settlement, write_settlements

DEFAULT_SEED = 2017
SETTLEMENTS_PER_REGION = 120
COUNTED_P0 = 0.6
COUNTED_DECAY = 0.5
LATE_SWING = 0.1


@dataclass(frozen=True)
class _RegionShape:
    code: str
    name: str
    lat: float
    lon: float
    population: int
    radius_km: float
    capital_share: float
    decay_km: float | None  # None: no decay of population with distance
    sparse: bool = False


REGIONS = (
    _RegionShape("HN-AT", "Atlantida", 15.78, -86.79, 470_000, 45, 0.35, 10),
    _RegionShape("HN-CH", "Choluteca", 13.30, -87.19, 450_000, 45, 0.30, 10),
    _RegionShape("HN-CL", "Colon", 15.93, -85.94, 320_000, 60, 0.30, 12),
    _RegionShape("HN-CM", "Comayagua", 14.45, -87.64, 510_000, 45, 0.30, 10),
    _RegionShape("HN-CP", "Copan", 14.84, -89.15, 380_000, 40, 0.30, 9),
    _RegionShape("HN-CR", "Cortes", 15.50, -88.03, 1_600_000, 40, 0.45, 8),
    _RegionShape("HN-EP", "El Paraiso", 14.03, -86.58, 460_000, 50, 0.30, 10),
    _RegionShape("HN-FM", "Francisco Morazan", 14.07, -87.19, 1_500_000, 50, 0.50, 8),
    _RegionShape("HN-GD", "Gracias a Dios", 15.26, -83.78, 95_000, 130, 0.15, 40, True),
    _RegionShape("HN-IN", "Intibuca", 14.31, -88.18, 240_000, 35, 0.30, 8),
    _RegionShape("HN-IB", "Islas de la Bahia", 16.32, -86.54, 65_000, 70, 0.18, None, True),
    _RegionShape("HN-LP", "La Paz", 14.32, -87.68, 205_000, 35, 0.30, 8),
    _RegionShape("HN-LE", "Lempira", 14.58, -88.58, 330_000, 40, 0.30, 9),
    _RegionShape("HN-OC", "Ocotepeque", 14.44, -89.18, 150_000, 30, 0.30, 7),
    _RegionShape("HN-OL", "Olancho", 14.78, -86.24, 530_000, 120, 0.20, 40, True),
    _RegionShape("HN-SB", "Santa Barbara", 14.92, -88.24, 430_000, 40, 0.30, 9),
    _RegionShape("HN-VA", "Valle", 13.44, -87.73, 180_000, 25, 0.30, 6),
    _RegionShape("HN-YO", "Yoro", 15.14, -87.13, 590_000, 55, 0.30, 11),
)

SPARSE_REGIONS = tuple(r.code for r in REGIONS if r.sparse)


def _offset(lat: float, lon: float, dist_km: np.ndarray, bearing: np.ndarray):
    """Points at the given distance and bearing (flat-earth, fine at < 200 km)."""
    dlat = dist_km * np.cos(bearing) / 111.2
    dlon = dist_km * np.sin(bearing) / (111.2 * math.cos(math.radians(lat)))
    return lat + dlat, lon + dlon


def _settlements(shape: _RegionShape, gen: np.random.Generator) -> tuple[list[Settlement], np.ndarray]:
    n = SETTLEMENTS_PER_REGION - 1
    if shape.code == "HN-IB":
        # an east-west island chain
        along = gen.uniform(-shape.radius_km, shape.radius_km, n)
        dist = np.abs(along) + gen.uniform(0, 3, n)
        bearing = np.where(along >= 0, math.pi / 2, -math.pi / 2) + gen.normal(0, 0.05, n)
    else:
        dist = shape.radius_km * np.sqrt(gen.uniform(0.01, 1.0, n))
        bearing = gen.uniform(0, 2 * math.pi, n)
    lat, lon = _offset(shape.lat, shape.lon, dist, bearing)

    raw = gen.lognormal(0.0, 0.8, n)
    if shape.decay_km is not None:
        raw *= np.exp(-dist / shape.decay_km)
    rest = shape.population * (1 - shape.capital_share)
    pops = np.maximum(1, np.round(rest * raw / raw.sum())).astype(int)
    capital_pop = shape.population - int(pops.sum())

    out = [Settlement(f"{shape.code}-000", f"{shape.name} capital", shape.code, round(shape.lat, 5), round(shape.lon, 5), capital_pop)]
    for i in range(n):
        out.append(Settlement(f"{shape.code}-{i + 1:03d}", f"{shape.name} {i + 1}", shape.code,
                              round(float(lat[i]), 5), round(float(lon[i]), 5), int(pops[i])))
    return out, np.concatenate([[0.0], dist])


def _tallies(shape: _RegionShape, settlements: list[Settlement], dist: np.ndarray, gen: np.random.Generator) -> list[TallyRow]:
    n = len(settlements)
    scaled = dist / shape.radius_km
    counted = gen.uniform(size=n) < COUNTED_P0 * np.exp(-COUNTED_DECAY * scaled)
    counted[0] = True
    sd = 0.07 if shape.sparse else 0.03
    noise_h, noise_n = gen.normal(0, sd, n), gen.normal(0, sd, n)
    # the capital is many polling tables; its noise averages out
    noise_h[0] = noise_n[0] = 0.0
    if shape.sparse:
        share_h = 0.33 + 0.22 * scaled + noise_h
        share_n = 0.53 - 0.20 * scaled + noise_n
    else:
        share_h = 0.42 - 0.04 * scaled + noise_h
        share_n = 0.46 + 0.02 * scaled + noise_n
    # late units swing to the incumbent regardless of where they are
    share_h = share_h + np.where(counted, 0.0, LATE_SWING)
    share_n = share_n - np.where(counted, 0.0, LATE_SWING)
    share_h = np.clip(share_h, 0.05, 0.85)
    share_n = np.clip(share_n, 0.05, 0.9 - share_h)
    rows = []
    for i, s in enumerate(settlements):
        ballots = max(1, int(round(0.55 * s.population * 0.58)))
        votes_h = int(round(ballots * share_h[i]))
        votes_n = int(round(ballots * share_n[i]))
        rows.append(TallyRow(shape.code, f"U-{s.id}", votes_h, votes_n, ballots - votes_h - votes_n,
                             bool(counted[i]), s.id))
    return rows


def generate(seed: int = DEFAULT_SEED) -> tuple[list[Region], list[TallyRow]]:
    gen = np.random.default_rng(seed)
    regions, tallies = [], []
    for shape in REGIONS:
        settlements, dist = _settlements(shape, gen)
        regions.append(Region(shape.code, tuple(settlements), shape.name))
        tallies.extend(_tallies(shape, settlements, dist, gen))
    regions.sort(key=lambda r: r.id)
    return regions, tallies


def write_fixture(directory, seed: int = DEFAULT_SEED) -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    regions, tallies = generate(seed)
    s_path, t_path = directory / "settlements.csv", directory / "tallies.csv"
    write_settlements(regions, s_path)
    write_tallies(tallies, t_path)
    return s_path, t_path


def fixture_paths() -> tuple[Path, Path]:
    """Paths of the shipped fixture CSVs."""
    base = resources.files("latecount") / "data"
    return Path(str(base / "settlements.csv")), Path(str(base / "tallies.csv"))
