"""Fair-win probability for a well-mixed electorate.

With no geographic structure, the half-time shares ``p`` and ``q`` are
binomial sampling estimates, approximately Normal(p, p(1-p)/v) and
Normal(q, q(1-q)/v). The incumbent wins the full count when the estimate of
his share exceeds the challenger's, so::

    P(win) = integral (1 - Phi_Y) dPhi_Z = P(G > 0),
    G ~ Normal(p - q, (p(1-p) + q(1-q)) / v)

Results for national-scale counts can be near 10**-1770, far below double precision, so
everything is carried as log10.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np
from scipy import special

MILLS_THRESHOLD = 8.0
_LN10 = math.log(10.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class LogProb:
    """A probability stored as its base-10 logarithm.

    ``asymptotic`` is set when the value came from the Mills-ratio series
    rather than a direct complementary error function evaluation.
    """

    log10_value: float
    asymptotic: bool = False

    def __post_init__(self):
        if self.log10_value > 0 or math.isnan(self.log10_value):
            raise ValueError(f"log10 probability must be <= 0, got {self.log10_value}")

    @property
    def probability(self) -> float:
        """Plain float; underflows to 0.0 below ~1e-308."""
        return 10.0**self.log10_value

    def __str__(self) -> str:
        if self.log10_value == -math.inf:
            return "0"
        return f"1e{self.log10_value!r}"

    @classmethod
    def parse(cls, text: str) -> "LogProb":
        text = text.strip()
        if text == "0":
            return cls(-math.inf)
        m = re.fullmatch(r"1e(-?[0-9.]+(?:e-?[0-9]+)?)", text)
        if not m:
            raise ValueError(f"not a log10 probability string: {text!r}")
        return cls(float(m.group(1)))


def log_normal_tail(z: float) -> LogProb:
    """log10 of the upper normal tail 1 - Phi(z).

    Uses erfc up to z = 8 and the Mills-ratio series
    phi(z)/z * (1 - 1/z^2 + 3/z^4 - 15/z^6) beyond.
    """
    z = float(z)
    if math.isnan(z):
        raise ValueError("z is NaN")
    if z <= MILLS_THRESHOLD:
        if z < 0:
            # 1 - Phi(z) = 1 - Phi(-z): keep precision near one
            return LogProb(min(0.0, math.log1p(-0.5 * math.erfc(-z / math.sqrt(2.0))) / _LN10))
        return LogProb(math.log10(0.5 * math.erfc(z / math.sqrt(2.0))))
    z2 = 1.0 / (z * z)
    series = 1.0 - z2 + 3.0 * z2**2 - 15.0 * z2**3
    ln_tail = -0.5 * z * z - _LOG_SQRT_2PI - math.log(z) + math.log(series)
    return LogProb(ln_tail / _LN10, asymptotic=True)


def _shares(v_H: int, v_N: int, v_other: int, convention: str) -> tuple[float, float, float]:
    if v_H < 0 or v_N < 0 or v_other < 0:
        raise ValueError("vote counts must be nonnegative")
    if convention == "two-candidate":
        n = v_H + v_N
    elif convention == "raw":
        n = v_H + v_N + v_other
    else:
        raise ValueError(f"unknown convention {convention!r}")
    if v_H + v_N <= 0:
        raise ValueError("no two-candidate votes")
    return v_H / n, v_N / n, float(n)


def fair_win_probability(v_H: int, v_N: int, *, v_other: int = 0, convention: str = "two-candidate") -> LogProb:
    """Probability that the incumbent's final total exceeds the challenger's.

    Parameters
    ----------
    v_H, v_N : int
        Half-time counts for the incumbent and the challenger.
    v_other : int
        Third-party ballots, used only by the ``raw`` convention.
    convention : {"two-candidate", "raw"}
        ``two-candidate`` normalizes shares over H + N so p + q = 1;
        ``raw`` divides by every counted ballot.
    """
    p, q, n = _shares(v_H, v_N, v_other, convention)
    var = (p * (1.0 - p) + q * (1.0 - q)) / n
    mean = p - q
    if var == 0.0:
        return LogProb(0.0 if mean > 0 else (math.log10(0.5) if mean == 0 else -math.inf))
    return log_normal_tail(-mean / math.sqrt(var))


def fair_win_probability_quadrature(
    v_H: int, v_N: int, *, v_other: int = 0, convention: str = "two-candidate", step: float = 0.01
) -> LogProb:
    """Same probability by direct integration of ``(1 - Phi_Y) dPhi_Z``.

    The integrand ``log(1 - Phi(y(z))) + log phi(z)`` is summed in log space
    with the trapezoid rule on a z-grid that is coarse over the bulk of ``Z``
    and fine around the mode of the integrand, so extreme tails never
    underflow.
    """
    p, q, n = _shares(v_H, v_N, v_other, convention)
    sp = math.sqrt(p * (1.0 - p) / n)
    sq = math.sqrt(q * (1.0 - q) / n)
    if sp == 0.0 or sq == 0.0:
        return fair_win_probability(v_H, v_N, v_other=v_other, convention=convention)
    if p > q:
        # integrate the unlikely event and complement it, keeping precision near 1
        ln_c = _ln_quadrature(q, p, sq, sp, step)
        return LogProb(math.log1p(-math.exp(ln_c)) / _LN10 + 0.0)
    return LogProb(min(0.0, _ln_quadrature(p, q, sp, sq, step) / _LN10))


def _ln_quadrature(p: float, q: float, sp: float, sq: float, step: float) -> float:
    """Natural log of P(Y > Z), Y ~ N(p, sp^2), Z ~ N(q, sq^2), integrated over the Z scale."""
    total = sp * sp + sq * sq
    z_mode = -sq * (q - p) / total
    width = sp / math.sqrt(total)
    # coarse grid over the bulk of Z, fine grid around the integrand's mode
    fine_h = min(step, width / 50.0)
    fine = np.arange(z_mode - 40.0 * width, z_mode + 40.0 * width + fine_h, fine_h)
    coarse = np.arange(-15.0, 15.0 + step, step)
    z = np.union1d(coarse, fine)
    y = (q - p + sq * z) / sp
    log_f = special.log_ndtr(-y) - 0.5 * z * z - _LOG_SQRT_2PI
    # trapezoid weights (z[i+1] - z[i-1]) / 2 on the non-uniform grid
    dz = np.diff(z)
    weights = np.empty_like(z)
    weights[0], weights[-1] = dz[0] / 2.0, dz[-1] / 2.0
    weights[1:-1] = (dz[:-1] + dz[1:]) / 2.0
    return float(special.logsumexp(log_f + np.log(weights)))
