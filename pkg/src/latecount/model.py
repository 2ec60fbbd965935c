"""Distance-dependent preference and counting models.

Voter preference is split into a constant ``c``, a location-independent
preference ``epsilon`` and a zero-mean, net-increasing geodemography
component ``h``::

    f_H(x) = c + epsilon + h(x)        f_N(x) = c - epsilon - h(x)

``g(x)`` is the probability that a ballot cast at distance ``x`` had been
counted by half-time. Half-time and final shares are expectations over the
population distance distribution ``X``::

    v_i = E[f_i(X) g(X)]               V_i = E[f_i(X)]

All expectations are exact weighted sums over the empirical atoms.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np
from scipy import integrate

from .ballots import BallotSummary
from .errors import DegenerateError
from .geodata import DistanceDistribution

GRID_POINTS = 1024


class Form(str, enum.Enum):
    LINEAR = "linear"
    LOGARITHMIC = "log"
    POWER_LAW = "power"
    EXP1 = "exp1"
    EXP2 = "exp2"


PARAM_NAMES: dict[Form, tuple[str, ...]] = {
    Form.LINEAR: ("m",),
    Form.LOGARITHMIC: ("s",),
    Form.POWER_LAW: ("k",),
    Form.EXP1: ("r",),
    Form.EXP2: ("r_h", "r_g"),
}
_OPTIONAL = {"amplitude", "g0", "d"}

# Shape parameters in units of x_max; used when a form is requested by name only.
DEFAULT_PARAMS: dict[Form, dict[str, float]] = {
    Form.LINEAR: {"m": 0.5},
    Form.LOGARITHMIC: {"s": 0.1},
    Form.POWER_LAW: {"k": 2.0},
    Form.EXP1: {"r": 0.25},
    Form.EXP2: {"r_h": 0.25, "r_g": 0.5},
}


def _unit(x, x_max):
    x = np.asarray(x, dtype=float)
    x_max = np.asarray(x_max, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x_max > 0, x / np.where(x_max > 0, x_max, 1.0), np.nan)


def _exp_core(u, t):
    # e^{x/r} shifted to zero mean on [0, x_max]; written relative to e^{x_max/r}
    return np.exp((u - 1.0) * t) - (-np.expm1(-t)) / t


def _exp_g(u, t):
    return (np.exp(-u * t) - np.exp(-t)) / (-np.expm1(-t))


def _log_core(u, sigma):
    mean = ((1.0 + sigma) * np.log1p(sigma) - sigma) / sigma
    return np.log1p(u * sigma) - mean


@dataclass(frozen=True)
class ModelSpec:
    """Functional form and parameters of h and g.

    Parameters
    ----------
    form : Form
        One of linear, log, power, exp1, exp2.
    params : mapping
        Form parameters: linear ``m`` (slope of h), log ``s`` (scale),
        power ``k`` (exponent), exp1 ``r`` (rate shared by h and g),
        exp2 ``r_h`` and ``r_g``. Optional: ``amplitude`` (max |h| for the
        nonlinear forms; defaults to the largest value keeping f_H, f_N in
        [0, 1]), ``g0`` (linear g(0), default 1) and ``d`` (linear g slope,
        only when ``g_vanishes_at_xM`` is false).
    c, epsilon : float
        Axis of reflection and location-independent preference.
    g_vanishes_at_xM : bool
        Linear form only: force g(x_max) = 0, i.e. d = g0 / x_max.
    relative : bool
        Lengths (``m`` per unit, ``s``, ``r``, ``r_h``, ``r_g``, ``d``) are
        expressed in units of x_max instead of km.
    """

    form: Form = Form.LINEAR
    params: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_PARAMS[Form.LINEAR]))
    c: float = 0.5
    epsilon: float = 0.0
    g_vanishes_at_xM: bool = True
    relative: bool = True

    def __post_init__(self):
        form = Form(self.form)
        object.__setattr__(self, "form", form)
        params = {k: float(v) for k, v in dict(self.params).items()}
        object.__setattr__(self, "params", params)
        missing = [p for p in PARAM_NAMES[form] if p not in params]
        unknown = [p for p in params if p not in PARAM_NAMES[form] and p not in _OPTIONAL]
        if missing or unknown:
            raise ValueError(f"{form.value}: missing params {missing}, unknown params {unknown}")
        for name in ("s", "k", "r", "r_h", "r_g"):
            if name in params and not params[name] > 0:
                raise ValueError(f"parameter {name} must be positive")
        if not self.g_vanishes_at_xM and form is Form.LINEAR and "d" not in params:
            raise ValueError("linear g without g(x_max)=0 needs parameter d")

    @classmethod
    def default(cls, form: Union[Form, str], **kw) -> "ModelSpec":
        form = Form(form)
        return cls(form=form, params=dict(DEFAULT_PARAMS[form]), **kw)

    # -- serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "form": self.form.value,
            "params": dict(sorted(self.params.items())),
            "c": self.c,
            "epsilon": self.epsilon,
            "g_vanishes_at_xM": self.g_vanishes_at_xM,
            "relative": self.relative,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ModelSpec":
        form = Form(data["form"])
        return cls(
            form=form,
            params=dict(data.get("params") or DEFAULT_PARAMS[form]),
            c=float(data.get("c", 0.5)),
            epsilon=float(data.get("epsilon", 0.0)),
            g_vanishes_at_xM=bool(data.get("g_vanishes_at_xM", True)),
            relative=bool(data.get("relative", True)),
        )

    def with_params(self, **params) -> "ModelSpec":
        merged = dict(self.params)
        merged.update(params)
        return ModelSpec(self.form, merged, self.c, self.epsilon, self.g_vanishes_at_xM, self.relative)

    # -- evaluation --------------------------------------------------------
    def _length(self, name, x_max):
        """Shape length as a multiple of x_max."""
        value = self.params[name]
        if self.relative:
            return value
        with np.errstate(divide="ignore"):
            return value / np.asarray(x_max, dtype=float)

    @property
    def amplitude(self) -> float:
        if "amplitude" in self.params:
            return self.params["amplitude"]
        e = abs(self.epsilon)
        return min(self.c - e, 1.0 - self.c - e)

    def basis(self, x, x_max):
        """Return ``(phi, scale, g)`` with ``h = scale * phi``.

        ``phi`` is the zero-mean shape of h (unit peak magnitude for the
        nonlinear forms, ``x - x_max/2`` in km or in units of x_max for the
        linear form). Broadcasts over ``x`` and ``x_max``.
        """
        u = _unit(x, x_max)
        form = self.form
        if form is Form.LINEAR:
            g0 = self.params.get("g0", 1.0)
            if self.g_vanishes_at_xM:
                g = g0 * (1.0 - u)
            elif self.relative:
                g = g0 - self.params["d"] * u
            else:
                g = g0 - self.params["d"] * np.asarray(x, dtype=float)
            phi = u - 0.5 if self.relative else np.asarray(x, dtype=float) - 0.5 * np.asarray(x_max, dtype=float)
            return phi, self.params["m"], g
        if form is Form.POWER_LAW:
            k = self.params["k"]
            core = u**k - 1.0 / (k + 1.0)
            peak = max(1.0 / (k + 1.0), k / (k + 1.0))
            return core / peak, self.amplitude, 1.0 - u**k
        if form is Form.LOGARITHMIC:
            sigma = 1.0 / self._length("s", x_max)
            core = _log_core(u, sigma)
            peak = np.maximum(np.abs(_log_core(0.0, sigma)), np.abs(_log_core(1.0, sigma)))
            return core / peak, self.amplitude, 1.0 - np.log1p(u * sigma) / np.log1p(sigma)
        if form is Form.EXP1:
            t_h = t_g = 1.0 / self._length("r", x_max)
        else:
            t_h = 1.0 / self._length("r_h", x_max)
            t_g = 1.0 / self._length("r_g", x_max)
        core = _exp_core(u, t_h)
        peak = np.maximum(np.abs(_exp_core(0.0, t_h)), np.abs(_exp_core(1.0, t_h)))
        return core / peak, self.amplitude, _exp_g(u, t_g)

    def h(self, x, x_max):
        phi, scale, _ = self.basis(x, x_max)
        return scale * phi

    def g(self, x, x_max):
        return self.basis(x, x_max)[2]

    def f_H(self, x, x_max):
        return self.c + self.epsilon + self.h(x, x_max)

    def f_N(self, x, x_max):
        return self.c - self.epsilon - self.h(x, x_max)

    def check(self, x_max: float, tol: float = 1e-12) -> None:
        """Validate the model constraints on [0, x_max]; raise ValueError listing violations."""
        if not x_max > 0:
            raise DegenerateError("x_max must be positive")
        grid = np.linspace(0.0, x_max, GRID_POINTS)
        problems = []
        for name, values in (("f_H", self.f_H(grid, x_max)), ("f_N", self.f_N(grid, x_max)), ("g", self.g(grid, x_max))):
            if np.any(values < -tol) or np.any(values > 1 + tol) or not np.all(np.isfinite(values)):
                problems.append(f"{name} leaves [0, 1]")
        h = self.h(grid, x_max)
        hmax = float(np.max(np.abs(h)))
        # adaptive quadrature: the 1024-point trapezoid is too coarse for steep exponentials
        # breakpoints near 0 resolve the u**k cusp of small power-law exponents
        area, _ = integrate.quad(
            lambda t: float(self.h(t, x_max)), 0.0, x_max, limit=400,
            points=[x_max * 1e-9, x_max * 1e-6, x_max * 1e-3], epsabs=1e-12 * x_max * max(hmax, 1e-300), epsrel=1e-12,
        )
        if abs(area) > 1e-9 * x_max * max(hmax, 1e-300):
            problems.append(f"integral of h is {area:.3e}, not zero")
        if not h[-1] - h[0] > 0:
            problems.append("h is not net-increasing")
        if self.form is Form.LINEAR and self.g_vanishes_at_xM and abs(float(self.g(x_max, x_max))) > tol:
            problems.append("g(x_max) != 0")
        if problems:
            raise ValueError(f"{self.form.value} model invalid on [0, {x_max:g}]: " + "; ".join(problems))


# --------------------------------------------------------------------------
# Geometric moments (linear model with g(x_max) = 0)


def _centered(dist: DistanceDistribution):
    if not dist.x_max > 0:
        raise DegenerateError("distance distribution has x_max == 0")
    a = dist.x - 0.5 * dist.x_max
    b = dist.x - dist.x_max
    return a, b


def moment_fair_win(dist: DistanceDistribution) -> float:
    """E(X - x_max/2); positive iff the incumbent wins in the all-geodemographics extreme."""
    a, _ = _centered(dist)
    return math.fsum(dist.weights * a)


def moment_halftime_lead(dist: DistanceDistribution) -> float:
    """E[(X - x_max/2)(X - x_max)]; positive iff the challenger can lead at half-time."""
    a, b = _centered(dist)
    return math.fsum(dist.weights * a * b)


def conjecture_all_geo(dist: DistanceDistribution) -> bool:
    """Both moment conditions hold strictly; degenerate distributions fail."""
    try:
        return moment_fair_win(dist) > 0 and moment_halftime_lead(dist) > 0
    except DegenerateError:
        return False


def gip_lower_bound(dist: DistanceDistribution) -> float:
    """Lower edge of the admissible c/m window:

        E[(X - x_max/2)(X - x_max)] / E(X - x_max) - E(X - x_max/2)

    This equals Var(X) / (E[X] - x_max) and so is never positive.
    """
    a, b = _centered(dist)
    eb = math.fsum(dist.weights * b)
    if eb == 0.0:
        raise DegenerateError("all mass sits at x_max")
    return math.fsum(dist.weights * a * b) / eb - math.fsum(dist.weights * a)


def moment_conditions(x: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise signs of both moments for stacked replicates.

    ``x`` and ``w`` have shape (B, N); each row is one distribution with its
    own x_max. Weights need not be normalized. Returns two boolean arrays.
    """
    x_max = x.max(axis=-1, keepdims=True)
    a = x - 0.5 * x_max
    fair = np.sum(w * a, axis=-1)
    lead = np.sum(w * a * (x - x_max), axis=-1)
    return fair > 0, lead > 0


def form_conditions(spec: ModelSpec, x: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise E[h(X)] > 0 and E[g(X)h(X)] < 0 for stacked replicates."""
    x_max = x.max(axis=-1, keepdims=True)
    phi, scale, g = spec.basis(x, x_max)
    h = scale * phi
    with np.errstate(invalid="ignore"):
        eh = np.sum(w * h, axis=-1)
        egh = np.sum(w * g * h, axis=-1)
    return eh > 0, egh < 0


# --------------------------------------------------------------------------
# Shares and the location-independent preference


def _delta(summary) -> float:
    return summary.delta if isinstance(summary, BallotSummary) else float(summary)


def _expectations(spec: ModelSpec, dist: DistanceDistribution):
    if not dist.x_max > 0:
        raise DegenerateError("distance distribution has x_max == 0")
    phi, scale, g = spec.basis(dist.x, dist.x_max)
    h = scale * phi
    w = dist.weights
    return math.fsum(w * h), math.fsum(w * g), math.fsum(w * g * h)


def eval_halftime_shares(spec: ModelSpec, dist: DistanceDistribution) -> tuple[float, float]:
    """(E[f_H g], E[f_N g]): shares of all eligible ballots counted by half-time."""
    _, eg, egh = _expectations(spec, dist)
    base = spec.c * eg
    pref = spec.epsilon * eg + egh
    return base + pref, base - pref


def eval_final_shares(spec: ModelSpec, dist: DistanceDistribution) -> tuple[float, float]:
    """(E[f_H], E[f_N]) once every ballot is counted."""
    eh, _, _ = _expectations(spec, dist)
    return spec.c + spec.epsilon + eh, spec.c - spec.epsilon - eh


def gip_estimate(spec: ModelSpec, dist: DistanceDistribution, summary: Union[BallotSummary, float], c: float | None = None) -> float:
    """Location-independent preference implied by the half-time margin.

    ``epsilon = c * delta - E[h g] / E[g]``; negative values favour the
    challenger. ``c`` defaults to ``spec.c``.
    """
    c = spec.c if c is None else c
    _, eg, egh = _expectations(spec, dist)
    if eg == 0.0:
        raise DegenerateError("E[g(X)] == 0: nothing counted by half-time")
    return c * _delta(summary) - egh / eg


def general_win_condition(spec: ModelSpec, dist: DistanceDistribution, summary: Union[BallotSummary, float]) -> bool:
    """Incumbent wins the full count given the observed half-time margin:

        c * delta * E[g] > E[h g] - E[h] E[g]
    """
    eh, eg, egh = _expectations(spec, dist)
    return spec.c * _delta(summary) * eg > egh - eh * eg


# --------------------------------------------------------------------------
# Parameter sweeps


@dataclass(frozen=True)
class SweepRow:
    form: Form
    params: tuple[float, ...]
    E_h: float
    E_gh: float

    @property
    def flag(self) -> bool:
        """Half-time lead for the challenger while the incumbent wins overall."""
        return self.E_h > 0 and self.E_gh < 0


def default_grid(form: Union[Form, str], points: int = 41) -> list[tuple[float, ...]]:
    """Grids in units of x_max: slope in [-1, 1]; log10 of lengths in [-2, 2]."""
    form = Form(form)
    if form is Form.LINEAR:
        return [(float(m),) for m in np.linspace(-1.0, 1.0, points)]
    if form is Form.POWER_LAW:
        return [(float(k),) for k in np.logspace(-1, 1, points)]
    lengths = np.logspace(-2, 2, points)
    if form is Form.EXP2:
        coarse = np.logspace(-2, 2, max(3, points // 2))
        return [(float(a), float(b)) for a in coarse for b in coarse]
    return [(float(v),) for v in lengths]


def sweep_model_params(
    form: Union[Form, str],
    grid: Iterable[Union[float, Sequence[float]]],
    dist: DistanceDistribution,
    *,
    c: float = 0.5,
    relative: bool = True,
) -> list[SweepRow]:
    """E[h(X)] and E[g(X)h(X)] over a parameter grid.

    Grid points are scalars or tuples matching ``PARAM_NAMES[form]``. Specs
    are evaluated without the range checks of :meth:`ModelSpec.check`, so
    the sweep may include decreasing h (negative linear slopes).
    """
    form = Form(form)
    names = PARAM_NAMES[form]
    rows = []
    for point in grid:
        values = (float(point),) if np.isscalar(point) else tuple(float(v) for v in point)
        if len(values) != len(names):
            raise ValueError(f"{form.value} grid points need {len(names)} values, got {values}")
        spec = ModelSpec(form, dict(zip(names, values)), c=c, relative=relative)
        eh, _, egh = _expectations(spec, dist)
        rows.append(SweepRow(form, values, eh, egh))
    return rows
