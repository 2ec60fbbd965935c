"""Resampling engines and the probability estimators built on them.

Two resampling modes are supported:

* ``BOOTSTRAP`` draws ``sample_size`` atoms with replacement, each with
  probability equal to its population weight; every draw is one sampled
  voter, so replicate atoms carry equal weight.
* ``SUBSAMPLE`` picks ``sample_size`` distinct atoms uniformly without
  replacement and keeps their population weights (renormalized). This is
  the delete-d jackknife, often just called jackknifing. With
  ``sample_size`` equal to the number of atoms it returns the original law.

Replicate ``b`` is generated from ``rng.sub_seed(plan.seed, b, stream)``
only, so any subset of replicates can be regenerated independently and
results never depend on evaluation order.
"""

from __future__ import annotations

import csv
import enum
import itertools
import math
import os
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from . import rng
from .geodata import DistanceDistribution
from .model import ModelSpec, form_conditions, moment_conditions

CHUNK = 1024
MAX_ENUMERATION = 2_000_000
SLOPE_EPS = 1e-15

# independent random streams
STREAM_DISTANCES = 0
STREAM_TALLIES = 1


class ResampleMode(str, enum.Enum):
    BOOTSTRAP = "bootstrap"
    SUBSAMPLE = "subsample"


@dataclass(frozen=True)
class ResamplePlan:
    mode: ResampleMode = ResampleMode.SUBSAMPLE
    sample_size: int = 20
    replicates: int = 10_000
    seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "mode", ResampleMode(self.mode))
        if self.sample_size < 2:
            raise ValueError("sample_size must be >= 2")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


def _check_plan(dist: DistanceDistribution, plan: ResamplePlan) -> None:
    if plan.mode is ResampleMode.SUBSAMPLE and plan.sample_size > len(dist):
        raise ValueError(f"subsample of {plan.sample_size} from only {len(dist)} atoms")


def _replicate_atoms(dist: DistanceDistribution, plan: ResamplePlan, start: int, stop: int, stream: int) -> np.ndarray:
    _check_plan(dist, plan)
    n, size = len(dist), plan.sample_size
    seeds = rng.sub_seeds(plan.seed, np.arange(start, stop), stream)
    if plan.mode is ResampleMode.BOOTSTRAP:
        # inverse CDF: atom i covers [cdf[i-1], cdf[i])
        cdf = np.cumsum(dist.weights)
        u = rng.uniform_matrix(seeds, size)
        return np.minimum(np.searchsorted(cdf, u, side="right"), n - 1)
    # N smallest of n uniform keys, listed in ascending atom order
    keys = rng.uniform_matrix(seeds, n)
    if size == n:
        return np.broadcast_to(np.arange(n), keys.shape)
    return np.sort(np.argpartition(keys, size - 1, axis=1)[:, :size], axis=1)


def replicate_arrays(
    dist: DistanceDistribution, plan: ResamplePlan, start: int, stop: int, stream: int = STREAM_DISTANCES
) -> tuple[np.ndarray, np.ndarray]:
    """Distances and normalized weights of replicates ``start..stop-1``, shape (stop-start, N)."""
    atoms = _replicate_atoms(dist, plan, start, stop, stream)
    if plan.mode is ResampleMode.BOOTSTRAP:
        return dist.x[atoms], np.full(atoms.shape, 1.0 / plan.sample_size)
    w = dist.weights[atoms]
    return dist.x[atoms], w / w.sum(axis=1, keepdims=True)


def _chunks(total: int) -> Iterator[tuple[int, int]]:
    for start in range(0, total, CHUNK):
        yield start, min(total, start + CHUNK)


def resample(dist: DistanceDistribution, plan: ResamplePlan) -> Iterator[DistanceDistribution]:
    """Yield ``plan.replicates`` replicate distributions in replicate order."""
    _check_plan(dist, plan)
    for start, stop in _chunks(plan.replicates):
        for atoms in _replicate_atoms(dist, plan, start, stop, STREAM_DISTANCES):
            w = dist.weights[atoms]
            if plan.mode is ResampleMode.BOOTSTRAP:
                yield DistanceDistribution(dist.x[atoms], np.ones(len(atoms)), plan.sample_size)
            else:
                yield DistanceDistribution(dist.x[atoms], w, int(round(dist.total_population * w.sum())))


# --------------------------------------------------------------------------
# All-geodemographics probability


@dataclass(frozen=True)
class AllGeoEstimate:
    """Fractions of replicates meeting each condition and both together."""

    fraction: float
    fraction_fair_win: float
    fraction_halftime_lead: float
    replicates: int
    exhaustive: bool

    def standard_error(self) -> float:
        if self.exhaustive:
            return 0.0
        p = self.fraction
        return math.sqrt(p * (1.0 - p) / self.replicates)


def _conditions(spec: Optional[ModelSpec], x, w):
    if spec is None:
        return moment_conditions(x, w)
    return form_conditions(spec, x, w)


def probability_all_geo(
    dist: DistanceDistribution,
    plan: ResamplePlan,
    spec: Optional[ModelSpec] = None,
    exhaustive: Optional[bool] = None,
) -> AllGeoEstimate:
    """Fraction of replicates in which the challenger leads at half-time yet loses.

    With ``spec=None`` the linear-model moment conditions are used
    (E(X - x_max/2) > 0 and E[(X - x_max/2)(X - x_max)] > 0); otherwise the
    general conditions E[h(X)] > 0 and E[g(X)h(X)] < 0 of ``spec``.

    In subsample mode, when the number of distinct subsets C(n, N) does not
    exceed ``plan.replicates`` (or ``exhaustive=True``), every subset is
    evaluated once instead of sampling; the result is then exact.
    """
    _check_plan(dist, plan)
    n, size = len(dist), plan.sample_size
    if plan.mode is ResampleMode.SUBSAMPLE:
        n_subsets = math.comb(n, size)
        if exhaustive is None:
            exhaustive = n_subsets <= plan.replicates
        if exhaustive and n_subsets > MAX_ENUMERATION:
            raise ValueError(f"{n_subsets} subsets is too many to enumerate")
    elif exhaustive:
        raise ValueError("exhaustive evaluation is only defined for subsample mode")
    else:
        exhaustive = False

    both = fair_count = lead_count = 0
    if exhaustive:
        total = n_subsets
        combos = itertools.combinations(range(n), size)
        while True:
            block = np.array(list(itertools.islice(combos, CHUNK * 8)), dtype=np.intp)
            if block.size == 0:
                break
            fair, lead = _conditions(spec, dist.x[block], dist.weights[block])
            both += int(np.count_nonzero(fair & lead))
            fair_count += int(np.count_nonzero(fair))
            lead_count += int(np.count_nonzero(lead))
    else:
        total = plan.replicates
        for start, stop in _chunks(total):
            x, w = replicate_arrays(dist, plan, start, stop)
            fair, lead = _conditions(spec, x, w)
            both += int(np.count_nonzero(fair & lead))
            fair_count += int(np.count_nonzero(fair))
            lead_count += int(np.count_nonzero(lead))
    return AllGeoEstimate(both / total, fair_count / total, lead_count / total, total, exhaustive)


# --------------------------------------------------------------------------
# Share-versus-distance fits


@dataclass(frozen=True)
class FitResult:
    """Weighted least-squares line of incumbent share on distance.

    ``c_hat`` is the fitted share at distance zero, ``m_hat`` the slope per
    km and ``ratio`` their quotient (``None`` when the slope is zero).
    """

    c_hat: float
    m_hat: float
    ratio: Optional[float]
    weight_scheme: str


def _as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] not in (2, 3):
        raise ValueError("points must be rows of (x, share[, weight])")
    if arr.shape[1] == 2:
        arr = np.column_stack([arr, np.ones(len(arr))])
    if np.any(arr[:, 2] < 0):
        raise ValueError("weights must be nonnegative")
    return arr


def _wls(x, y, w):
    """Row-wise weighted simple regression; NaN where x has no spread."""
    sw = w.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        xb = (w * x).sum(axis=-1) / sw
        yb = (w * y).sum(axis=-1) / sw
        dx = x - xb[..., None]
        sxx = (w * dx * dx).sum(axis=-1)
        slope = (w * dx * (y - yb[..., None])).sum(axis=-1) / sxx
        flat = (x.max(axis=-1) == x.min(axis=-1)) | ~(sw > 0)
        slope = np.where(flat, np.nan, slope)
        intercept = yb - slope * xb
    return intercept, slope


def _ratio(c, m):
    c, m = np.asarray(c, dtype=float), np.asarray(m, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(np.abs(m) < SLOPE_EPS, np.nan, c / m)


def fit_h_linear(points, weighted: bool = True) -> FitResult:
    """Fit ``share = c + m * x`` to rows of ``(x, share, weight)``."""
    arr = _as_points(points)
    x, y = arr[:, 0], arr[:, 1]
    w = arr[:, 2] if weighted else np.ones(len(arr))
    if len(arr) < 2 or np.ptp(x[w > 0]) == 0:
        raise ValueError("need at least two distinct distances to fit a slope")
    c, m = (float(v) for v in _wls(x, y, w))
    r = float(_ratio(c, m))
    return FitResult(c, m, None if math.isnan(r) else r, "weighted" if weighted else "unweighted")


@dataclass(frozen=True)
class FitSample:
    """Per-replicate bootstrap fits. NaN slopes mark undefined replicates."""

    c_hat: np.ndarray
    m_hat: np.ndarray

    @property
    def ratios(self) -> np.ndarray:
        """c/m for every replicate, NaN where undefined."""
        return _ratio(self.c_hat, self.m_hat)

    @property
    def n_undefined(self) -> int:
        return int(np.count_nonzero(np.isnan(self.ratios)))


def _bootstrap_fits(regressor, y, w, plan: ResamplePlan) -> tuple[np.ndarray, np.ndarray]:
    n = len(y)
    intercepts = np.empty(plan.replicates)
    slopes = np.empty(plan.replicates)
    for start, stop in _chunks(plan.replicates):
        seeds = rng.sub_seeds(plan.seed, np.arange(start, stop), STREAM_TALLIES)
        idx = np.minimum((rng.uniform_matrix(seeds, n) * n).astype(np.intp), n - 1)
        intercepts[start:stop], slopes[start:stop] = _wls(regressor[idx], y[idx], w[idx])
    return intercepts, slopes


def bootstrap_c_over_m(points, plan: ResamplePlan, weighted: bool = True) -> FitSample:
    """Refit the share line on ``plan.replicates`` bootstrap resamples of the points.

    The resampling unit is the point (tally unit); every replicate draws as
    many points as the input has, with replacement. Population weighting
    enters through the fit weights, not the draw.
    """
    arr = _as_points(points)
    if len(arr) < 2:
        raise ValueError("need at least two points")
    w = arr[:, 2] if weighted else np.ones(len(arr))
    c, m = _bootstrap_fits(arr[:, 0], arr[:, 1], w, plan)
    return FitSample(c, m)


@dataclass(frozen=True)
class WindowEstimate:
    """Fraction of bootstrap fits consistent with the conjecture.

    ``applicable`` is false when the half-time margin does not favour the
    challenger; the fraction is then reported as zero.
    """

    fraction: float
    applicable: bool
    n_used: int
    n_undefined: int


def probability_gip_window(ratios, lower_bound: float, delta: float) -> WindowEstimate:
    """Fraction of ratios ``rho`` with ``lower_bound < rho * delta < 0``.

    NaN ratios (zero fitted slope) are left out of the denominator and
    counted in ``n_undefined``.
    """
    if lower_bound > 0:
        raise ValueError("lower bound must be <= 0")
    rho = np.asarray(ratios, dtype=float)
    defined = ~np.isnan(rho)
    n_used, n_undef = int(defined.sum()), int((~defined).sum())
    if not delta < 0 or n_used == 0:
        return WindowEstimate(0.0, delta < 0, n_used, n_undef)
    t = rho[defined] * delta
    hits = int(np.count_nonzero((lower_bound < t) & (t < 0)))
    return WindowEstimate(hits / n_used, True, n_used, n_undef)


def probability_gip_form(
    points,
    spec: ModelSpec,
    dist: DistanceDistribution,
    delta: float,
    plan: ResamplePlan,
    weighted: bool = True,
) -> WindowEstimate:
    """Conjecture probability for an arbitrary functional form.

    Each bootstrap replicate fits ``share = b0 + A * phi(x)`` with ``phi``
    the zero-mean shape of ``spec`` (shape parameters fixed, x_max from
    ``dist``). With ``c = b0 + A * phi(0)`` and ``h = A * phi`` the
    replicate supports the conjecture when the challenger led at half-time
    (``delta < 0``), ``c > 0`` and::

        c * delta * E[g] > E[h g] - E[h] E[g]

    For the linear form this is the same event as the c/m window test.
    """
    arr = _as_points(points)
    x_max = dist.x_max
    phi_pts, _, _ = spec.basis(arr[:, 0], x_max)
    phi0 = float(spec.basis(0.0, x_max)[0])
    phi_d, _, g_d = spec.basis(dist.x, x_max)
    wd = dist.weights
    e_g = math.fsum(wd * g_d)
    cov = math.fsum(wd * phi_d * g_d) - math.fsum(wd * phi_d) * e_g
    w = arr[:, 2] if weighted else np.ones(len(arr))
    b0, amp = _bootstrap_fits(np.asarray(phi_pts, dtype=float), arr[:, 1], w, plan)
    defined = ~np.isnan(amp)
    n_used, n_undef = int(defined.sum()), int((~defined).sum())
    if not delta < 0 or n_used == 0:
        return WindowEstimate(0.0, delta < 0, n_used, n_undef)
    c = b0[defined] + amp[defined] * phi0
    hit = (c > 0) & (c * delta * e_g > amp[defined] * cov)
    return WindowEstimate(int(np.count_nonzero(hit)) / n_used, True, n_used, n_undef)


def bootstrap_form_fits(points, spec: ModelSpec, x_max: float, plan: ResamplePlan, weighted: bool = True) -> FitSample:
    """Per-replicate ``(c, A)`` of the form fit used by :func:`probability_gip_form`."""
    arr = _as_points(points)
    phi_pts, _, _ = spec.basis(arr[:, 0], x_max)
    phi0 = float(spec.basis(0.0, x_max)[0])
    w = arr[:, 2] if weighted else np.ones(len(arr))
    b0, amp = _bootstrap_fits(np.asarray(phi_pts, dtype=float), arr[:, 1], w, plan)
    return FitSample(b0 + amp * phi0, amp)


def write_fit_sample(sample: FitSample, dest) -> None:
    """Dump per-replicate fits as ``replicate,c_hat,m_hat,ratio`` (empty ratio when undefined)."""
    ratios = sample.ratios

    def _write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("replicate", "c_hat", "m_hat", "ratio"))
        for b, (c, m, r) in enumerate(zip(sample.c_hat, sample.m_hat, ratios)):
            w.writerow((b, repr(float(c)), repr(float(m)), "" if math.isnan(r) else repr(float(r))))

    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            _write(fh)
    else:
        _write(fh=dest)
