"""
Diagnostics of locality, causality and asymptotic abelianness for the flow.

Odd sector: for one-particle vectors ``f, g`` the graded commutator of
``c(f)`` and ``tau_t(c^*(g))`` is the anticommutator, a scalar multiple of the
identity::

    {c(f), tau_t(c^*(g))} = sum_j f_j (U_t g)_j

which is computed exactly from the kernel (no truncation is needed since only
the sites of ``f`` enter).  Even sector: no closed form, so the finite Fock
oracle supplies qualitative witnesses.  Finite windows revive, so these are not
asymptotic statements.
"""
from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Optional

import numpy as np

from . import fock_oracle
from .fock_oracle import FockMatrix, GradingError
from .one_particle import DEFAULT_PAD, WaveFunction, apply_shift_exact, shift_kernel

__all__ = [
    "DecayProfile",
    "odd_anticommutator_scalar",
    "aa_decay_profile",
    "even_commutator_norm_oracle",
    "tail_weight",
    "captured_weight",
    "backward_leakage",
]


@dataclass(frozen=True)
class DecayProfile:
    """Samples of a nonnegative decay signal plus a dyadic sup-envelope fit.

    ``envelope`` holds ``(T, sup_{t in [T, 2T]} value)`` for every complete
    dyadic window of the grid; ``exponent`` and ``prefactor`` fit
    ``sup ~ prefactor * T**(-exponent)`` when at least two windows exist.
    """

    times: np.ndarray
    values: np.ndarray
    envelope: tuple = ()
    exponent: Optional[float] = None
    prefactor: Optional[float] = None

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise ValueError("times and values must have equal length")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("profile values must be finite")


def odd_anticommutator_scalar(f: WaveFunction, g: WaveFunction, t: float, pad: Optional[int] = None) -> complex:
    """``sum_j f_j (U_t g)_j``, the scalar in ``{c(f), tau_t(c^*(g))}``.

    Only the rows of ``U_t`` on the sites of ``f`` are needed, so the value is
    exact and ``pad`` is accepted for interface symmetry but unused.
    """
    K = shift_kernel(t, f.window, g.window)
    return complex(np.dot(f.amplitudes, K.entries @ g.amplitudes))


def _dyadic_envelope(times: np.ndarray, values: np.ndarray):
    pos = times[times > 0]
    if pos.size == 0:
        return ()
    T = 2.0 ** math.ceil(math.log2(pos.min()))
    out = []
    while 2 * T <= times.max():
        sel = (times >= T) & (times <= 2 * T)
        if np.any(sel):
            out.append((T, float(values[sel].max())))
        T *= 2
    return tuple(out)


def aa_decay_profile(f: WaveFunction, g: WaveFunction, times, pad: Optional[int] = None) -> DecayProfile:
    """``|{c(f), tau_t(c^*(g))}|`` on an ascending time grid, with an envelope fit."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("time grid must be a nonempty 1-d array")
    if np.any(np.diff(times) <= 0):
        raise ValueError("time grid must be strictly ascending")
    values = np.array([abs(odd_anticommutator_scalar(f, g, t)) for t in times])
    env = _dyadic_envelope(times, values)
    exponent = prefactor = None
    usable = [(T, v) for T, v in env if v > 0]
    if len(usable) >= 2:
        x = np.log([T for T, _ in usable])
        y = np.log([v for _, v in usable])
        slope, intercept = np.polyfit(x, y, 1)
        exponent, prefactor = float(-slope), float(math.exp(intercept))
    return DecayProfile(times, values, env, exponent, prefactor)


def even_commutator_norm_oracle(window, A: FockMatrix, B: FockMatrix, t: float, cap: int = fock_oracle.DEFAULT_SITE_CAP) -> float:
    """``|| [A, exp(itH_W) B exp(-itH_W)] ||`` for even ``A, B`` on the oracle window."""
    w = fock_oracle.as_window(window, cap)
    for name, X in (("A", A), ("B", B)):
        if X.window != w:
            raise ValueError(f"{name} lives on {X.window}, expected {w}")
        defect = np.max(np.abs(fock_oracle.grading(X).entries - X.entries))
        if defect > 1e-12 * max(1.0, np.max(np.abs(X.entries))):
            raise GradingError(f"{name} is not even (grading defect {defect:.2e})")
    H = fock_oracle.truncated_hamiltonian(w, cap)
    Bt = fock_oracle.heisenberg_evolve(B, H, t, _eig=fock_oracle._hamiltonian_eigh(w, cap))
    return A.commutator(Bt).norm()


def _check_pad(pad):
    if int(pad) != pad or pad < 0:
        raise ValueError(f"pad must be a nonnegative integer, got {pad}")


def tail_weight(f: WaveFunction, t: float, radius: int, pad: Optional[int] = None) -> float:
    """Weight of ``U_t f`` farther than ``radius`` from the shifted centroid of ``f``.

    Summed over the padded window only, so ``pad`` should be much larger than
    ``radius`` (default ``100 * radius``).
    """
    if radius < 1:
        raise ValueError("radius must be a positive integer")
    pad = 100 * int(radius) if pad is None else pad
    _check_pad(pad)
    if pad <= radius:
        raise ValueError(f"pad ({pad}) must exceed radius ({radius})")
    g = apply_shift_exact(f, t, pad)
    center = f.centroid() + float(t)
    far = np.abs(g.window.sites - center) > radius
    return float(np.sum(np.abs(g.amplitudes[far]) ** 2))


def captured_weight(f: WaveFunction, t: float, radius: int) -> float:
    """Weight of ``U_t f`` within ``radius`` of the shifted centroid (exact, no padding)."""
    g = apply_shift_exact(f, t, pad=int(radius) + int(math.ceil(abs(t))) + f.window.size)
    center = f.centroid() + float(t)
    near = np.abs(g.window.sites - center) <= radius
    return float(np.sum(np.abs(g.amplitudes[near]) ** 2))


def backward_leakage(f: WaveFunction, t: float, pad: int = DEFAULT_PAD) -> float:
    """Weight of ``U_t f`` strictly behind the support of ``f`` (sites ``< min supp f``)."""
    if not t > 0:
        raise ValueError(f"backward leakage is defined for t > 0, got {t}")
    _check_pad(pad)
    lo, _ = f.support()
    g = apply_shift_exact(f, t, pad)
    behind = g.window.sites < lo
    return float(np.sum(np.abs(g.amplitudes[behind]) ** 2))
