"""
Gauge-invariant quasi-free states of the shift flow.

A state is fixed by a momentum occupation density ``rho(k)`` on ``[-pi, pi]``.
For the flow generated by multiplication with ``k`` the equilibrium states are
Fermi-Dirac densities ``rho_beta(k) = 1 / (1 + exp(beta k))``; ``beta = +inf``
fills every ``k < 0`` (the ground state) and ``beta = -inf`` every ``k > 0``
(the ceiling state).

Correlation convention::

    Gamma[j, l] = phi(c_l^* c_j) = (1/2pi) int rho(k) exp(-i (j - l) k) dk

which is the infinite-volume limit of ``(1 + exp(beta h_W))^{-1}`` for the
truncated generator ``h_W`` (cross-checked against finite Gibbs states in
:mod:`shiftflow.fock_oracle`).
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy.integrate import quad
from scipy.linalg import toeplitz
from scipy.special import expit

from .one_particle import DEFAULT_PAD, WaveFunction, Window, build_shift_kernel

__all__ = [
    "QuasiFreeState",
    "CorrelationMatrix",
    "two_point",
    "correlation_matrix",
    "evolve_correlation_matrix",
    "kms_pair",
    "kms_residual",
]

QUAD_EPSABS = 1e-12


@dataclass(frozen=True)
class QuasiFreeState:
    """Fermi-Dirac state at inverse temperature ``beta`` (may be +-inf)."""

    beta: float

    def __post_init__(self):
        b = float(self.beta)
        if math.isnan(b):
            raise ValueError("beta must not be NaN")
        object.__setattr__(self, "beta", b)

    @classmethod
    def ground(cls) -> "QuasiFreeState":
        return cls(math.inf)

    @classmethod
    def ceiling(cls) -> "QuasiFreeState":
        return cls(-math.inf)

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.beta)

    def occupation(self, k):
        k = np.asarray(k, dtype=float)
        if self.beta == math.inf:
            out = (k < 0).astype(float)
        elif self.beta == -math.inf:
            out = (k > 0).astype(float)
        else:
            out = expit(-self.beta * k)
        return out if out.ndim else float(out)

    def _pieces(self):
        # integration pieces; the indicator densities are split at k = 0
        if self.beta == math.inf:
            return [(-math.pi, 0.0)], lambda k: 1.0
        if self.beta == -math.inf:
            return [(0.0, math.pi)], lambda k: 1.0
        return [(-math.pi, 0.0), (0.0, math.pi)], lambda k: expit(-self.beta * k)


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """``Gamma[j, l] = phi(c_l^* c_j)`` on a window."""

    window: Window
    entries: np.ndarray

    def __post_init__(self):
        e = np.array(self.entries, dtype=complex)
        if e.shape != (self.window.size, self.window.size):
            raise ValueError(f"entries shape {e.shape} does not match {self.window}")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    def __getitem__(self, key):
        j, l = key
        return self.entries[self.window.offset(j), self.window.offset(l)]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def complement(self) -> "CorrelationMatrix":
        """Matrix of ``phi(c_j c_l^*) = delta_jl - Gamma[j, l]``, re-indexed as a correlation of holes."""
        return CorrelationMatrix(self.window, np.eye(self.window.size) - self.entries.T)

    def restrict(self, window: Window) -> "CorrelationMatrix":
        if not self.window.covers(window):
            raise ValueError(f"{window} is not inside {self.window}")
        a = window.lo - self.window.lo
        return CorrelationMatrix(window, self.entries[a : a + window.size, a : a + window.size])


def _fourier_coefficient(state: QuasiFreeState, d: int, weight=None) -> complex:
    """(1/2pi) int rho(k) exp(-i d k) dk."""
    pieces, rho = state._pieces()
    re = im = 0.0
    for a, b in pieces:
        re += quad(lambda k: rho(k) * math.cos(d * k), a, b, epsabs=QUAD_EPSABS, epsrel=1e-12, limit=400)[0]
        if d:
            im -= quad(lambda k: rho(k) * math.sin(d * k), a, b, epsabs=QUAD_EPSABS, epsrel=1e-12, limit=400)[0]
    return complex(re, im) / (2 * math.pi)


def two_point(state: QuasiFreeState, j: int, l: int) -> complex:
    """``phi_beta(c_l^* c_j)``; the reversed order follows from CAR, ``phi(c_j c_l^*) = delta_jl - phi(c_l^* c_j)``."""
    d = int(j) - int(l)
    if state.beta == 0:
        return complex(0.5 if d == 0 else 0.0)
    return _fourier_coefficient(state, d)


def correlation_matrix(state: QuasiFreeState, window: Window) -> CorrelationMatrix:
    """Toeplitz matrix of two-point functions on ``window``."""
    n = window.size
    # first column: d = j - l = 0..n-1 ; first row: d = 0..-(n-1)
    col = np.array([two_point(state, d, 0) for d in range(n)])
    row = np.array([two_point(state, -d, 0) for d in range(n)])
    return CorrelationMatrix(window, toeplitz(col, row))


def evolve_correlation_matrix(gamma: CorrelationMatrix, t: float, pad: int = DEFAULT_PAD) -> CorrelationMatrix:
    """``U_t Gamma U_t^*`` on the window of ``gamma`` padded by ``pad``.

    Entries outside the input window are taken as zero, so only blocks far from
    the edges approximate the infinite-volume evolution.
    """
    K = build_shift_kernel(t, gamma.window, pad).entries
    return CorrelationMatrix(gamma.window.pad(pad), K @ gamma.entries @ K.conj().T)


def _transform(f: WaveFunction, k):
    """ftilde(k) = sum_j f_j exp(i j k)."""
    return np.sum(f.amplitudes * np.exp(1j * f.window.sites * k))


def _complex_quad(fn, a, b, epsabs):
    re = quad(lambda k: fn(k).real, a, b, epsabs=epsabs, epsrel=epsabs, limit=400)[0]
    im = quad(lambda k: fn(k).imag, a, b, epsabs=epsabs, epsrel=epsabs, limit=400)[0]
    return complex(re, im)


def kms_pair(state: QuasiFreeState, f: WaveFunction, g: WaveFunction, t: float, epsabs: float = 1e-10):
    """Return ``(F(t + i beta), G(t))`` for the KMS boundary condition.

    ``F(z) = phi(c(f) tau_z(c^*(g)))`` and ``G(t) = phi(tau_t(c^*(g)) c(f))``.  In
    momentum space, with ``w(k) = ftilde(-k) gtilde(k)``::

        F(t + i beta) = (1/2pi) int (1 - rho(k)) exp(-beta k) exp(i t k) w(k) dk
        G(t)          = (1/2pi) int rho(k) exp(i t k) w(k) dk
    """
    if not state.is_finite:
        raise ValueError("KMS residual needs a finite beta")
    beta = state.beta
    t = float(t)

    def w(k):
        return _transform(f, -k) * _transform(g, k)

    def upper(k):
        return expit(beta * k) * math.exp(-beta * k) * np.exp(1j * t * k) * w(k)

    def lower(k):
        return expit(-beta * k) * np.exp(1j * t * k) * w(k)

    F = _complex_quad(upper, -math.pi, math.pi, epsabs) / (2 * math.pi)
    G = _complex_quad(lower, -math.pi, math.pi, epsabs) / (2 * math.pi)
    return F, G


def kms_residual(state: QuasiFreeState, f: WaveFunction, g: WaveFunction, t: float, epsabs: float = 1e-10) -> float:
    """``|F(t + i beta) - G(t)|``; zero up to quadrature error for a KMS state."""
    F, G = kms_pair(state, f, g, t, epsabs)
    return abs(F - G)
