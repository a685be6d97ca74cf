"""
Divergence of the Hilbert-Schmidt sum that obstructs extending the flow to spins.

If the flow extended to the spin chain, the off-corner block of ``U_t`` between
the right half-line and the left half-line would be Hilbert-Schmidt, i.e.::

    I_t = sum_{m, n >= 1} |(e_{-m}, U_t e_n)|^2
        = (1/pi^2) sum_{m, n >= 1} sin^2(pi t) / (m + t + n)^2

would be finite.  It is not for any non-integer ``t``; the partial sums grow
like ``sin^2(pi t)/pi^2 * ln M``.  The log rate is derived here (grouping the
double sum by ``s = m + n``), not a quoted result.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy.stats import linregress

from .one_particle import is_integer_time, matrix_element_U, sinpi

__all__ = [
    "DivergenceSeries",
    "COMPENSATED_FROM",
    "hs_partial_sum",
    "hs_divergence_fit",
    "hs_sum_vs_kernel_crosscheck",
    "expected_slope",
]

COMPENSATED_FROM = 2**16


@dataclass(frozen=True)
class DivergenceSeries:
    t: float
    cutoffs: tuple
    partial_sums: tuple
    fitted_slope: float
    slope_stderr: float
    intercept: float

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.partial_sums)


def _check_domain(t: float, M: int):
    if not math.isfinite(t):
        raise ValueError(f"t must be finite, got {t}")
    if int(M) != M or M < 1:
        raise ValueError(f"cutoff must be a positive integer, got {M}")
    if is_integer_time(t) and -2 * M <= t <= -2:
        raise ValueError(f"t = {t:g} makes m + t + n vanish inside the cutoff (domain is t > -2 or non-integer t)")


def expected_slope(t: float) -> float:
    """Asymptotic growth rate of ``I_t(M)`` per unit ``ln M``."""
    return sinpi(t) ** 2 / math.pi**2


def hs_partial_sum(t: float, M: int) -> float:
    """``I_t(M) = (1/pi^2) sum_{m,n=1..M} sin^2(pi t) / (m + t + n)^2`` in O(M).

    Terms are grouped along anti-diagonals ``s = m + n`` with multiplicity
    ``min(s - 1, 2M + 1 - s)``.  From ``M >= 2**16`` the sum is accumulated with
    ``math.fsum`` (correctly rounded).
    """
    t = float(t)
    _check_domain(t, M)
    M = int(M)
    if is_integer_time(t):
        return 0.0
    s = np.arange(2, 2 * M + 1, dtype=float)
    mult = np.minimum(s - 1, 2 * M + 1 - s)
    terms = mult / (s + t) ** 2
    total = math.fsum(terms) if M >= COMPENSATED_FROM else float(np.sum(terms))
    return sinpi(t) ** 2 / math.pi**2 * total


def hs_divergence_fit(t: float, cutoffs) -> DivergenceSeries:
    """Least-squares fit of ``I_t(M)`` against ``ln M``."""
    cutoffs = tuple(int(M) for M in cutoffs)
    if len(cutoffs) < 4:
        raise ValueError("need at least 4 cutoffs")
    if any(b <= a for a, b in zip(cutoffs, cutoffs[1:])):
        raise ValueError("cutoffs must be strictly ascending")
    if cutoffs[-1] < 8 * cutoffs[0]:
        raise ValueError("cutoffs must span at least 3 octaves")
    sums = tuple(hs_partial_sum(t, M) for M in cutoffs)
    if not any(sums):
        return DivergenceSeries(float(t), cutoffs, sums, 0.0, 0.0, 0.0)
    fit = linregress(np.log(cutoffs), sums)
    return DivergenceSeries(float(t), cutoffs, sums, float(fit.slope), float(fit.stderr), float(fit.intercept))


def hs_sum_vs_kernel_crosscheck(t: float, M: int) -> float:
    """``|sum |matrix_element_U(m, n, t)|^2 - hs_partial_sum(t, M)|`` over the full ``M x M`` block."""
    t = float(t)
    ref = hs_partial_sum(t, M)
    m = np.arange(1, int(M) + 1)
    total = 0.0
    # row blocks keep memory at O(M * block)
    block = max(1, 2_000_000 // int(M))
    for a in range(0, int(M), block):
        vals = matrix_element_U(m[a : a + block, None], m[None, :], t)
        total += float(np.sum(np.abs(vals) ** 2))
    return abs(total - ref)
