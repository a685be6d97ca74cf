"""
One-particle shift flow on the lattice.

The unitary group ``U_t`` acts on ``l^2(Z)`` as multiplication by
``exp(i t k)`` in momentum space, ``k`` in ``[-pi, pi]``.  In position space
its kernel is the band-limited (sinc) interpolation of the integer shift::

    (U_t chi_j)_l = sinc(pi (j + t - l))

so ``U_n`` is the exact n-step right shift for integer ``n``.  Everything on
this module lives on finite windows of sites; infinite sums over ``Z`` are
truncated to an explicit padding.

The generator kernel ``h`` with ``U_t = exp(i t h)`` is stored with the
``1/(2 pi)`` Fourier normalization, ``h[j, m] = i (-1)^(j-m) / (j-m)``.  The
unnormalized momentum integral ``G(x) = int k exp(ikx) dk`` gives
``-2 pi i (-1)^x / x`` at integer ``x``, which differs from ``h`` by a factor
``-2 pi`` (sign from ``G(m - j)`` vs ``G(j - m)``).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy.signal import fftconvolve

__all__ = [
    "Window",
    "WaveFunction",
    "KernelMatrix",
    "MomentumGrid",
    "DEFAULT_PAD",
    "MAX_EXPM_SIZE",
    "sinpi",
    "is_integer_time",
    "sinc_shift_coeff",
    "shift_kernel",
    "build_shift_kernel",
    "apply_shift_exact",
    "apply_shift_fft",
    "generator_kernel",
    "expm_generator",
    "matrix_element_U",
    "generator_column_error",
    "sinc_tail_bound",
]

# 2 / (pi^2 * pad) <= 1e-4
DEFAULT_PAD = 2048
MAX_EXPM_SIZE = 2048
# above this many kernel entries the exact route switches to convolution
_DENSE_LIMIT = 4_000_000


@dataclass(frozen=True)
class Window:
    """Closed block of integer sites ``[lo, hi]``."""

    lo: int
    hi: int

    def __post_init__(self):
        if int(self.lo) != self.lo or int(self.hi) != self.hi:
            raise ValueError(f"window bounds must be integers, got [{self.lo}, {self.hi}]")
        object.__setattr__(self, "lo", int(self.lo))
        object.__setattr__(self, "hi", int(self.hi))
        if self.lo > self.hi:
            raise ValueError(f"empty window [{self.lo}, {self.hi}]")

    @classmethod
    def centered(cls, center: int, radius: int) -> "Window":
        return cls(center - radius, center + radius)

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    def __contains__(self, j) -> bool:
        return self.lo <= j <= self.hi

    def __len__(self) -> int:
        return self.size

    def shift(self, x: int) -> "Window":
        return Window(self.lo + x, self.hi + x)

    def pad(self, p: int) -> "Window":
        if p < 0:
            raise ValueError(f"pad must be nonnegative, got {p}")
        return Window(self.lo - p, self.hi + p)

    def offset(self, j: int) -> int:
        if j not in self:
            raise IndexError(f"site {j} outside window [{self.lo}, {self.hi}]")
        return j - self.lo

    def covers(self, other: "Window") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi


def _frozen(a, dtype=complex) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class WaveFunction:
    """Finitely supported vector in ``l^2(Z)``; zero outside ``window``."""

    window: Window
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes)
        if amps.shape != (self.window.size,):
            raise ValueError(
                f"expected {self.window.size} amplitudes for {self.window}, got shape {amps.shape}"
            )
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def delta(cls, j: int) -> "WaveFunction":
        """The basis vector chi_j."""
        return cls(Window(j, j), np.ones(1))

    @classmethod
    def from_dict(cls, values: dict) -> "WaveFunction":
        w = Window(min(values), max(values))
        amps = np.zeros(w.size, complex)
        for j, v in values.items():
            amps[j - w.lo] = v
        return cls(w, amps)

    def __getitem__(self, j: int) -> complex:
        if j in self.window:
            return complex(self.amplitudes[j - self.window.lo])
        return 0j

    @property
    def norm2(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    @property
    def norm(self) -> float:
        return math.sqrt(self.norm2)

    def support(self) -> tuple[int, int]:
        """Smallest and largest site carrying a nonzero amplitude."""
        nz = np.flatnonzero(self.amplitudes)
        if nz.size == 0:
            raise ValueError("zero wavefunction has no support")
        return self.window.lo + int(nz[0]), self.window.lo + int(nz[-1])

    def centroid(self) -> float:
        weights = np.abs(self.amplitudes) ** 2
        return float(np.dot(weights, self.window.sites) / weights.sum())

    def embed(self, window: Window) -> "WaveFunction":
        """Same vector on a larger window; fails if support would be lost."""
        lo, hi = self.support() if np.any(self.amplitudes) else (window.lo, window.lo)
        if not (window.lo <= lo and hi <= window.hi):
            raise ValueError(f"support [{lo}, {hi}] does not fit in {window}")
        out = np.zeros(window.size, complex)
        a, b = max(window.lo, self.window.lo), min(window.hi, self.window.hi)
        if a <= b:
            out[a - window.lo : b - window.lo + 1] = self.amplitudes[a - self.window.lo : b - self.window.lo + 1]
        return WaveFunction(window, out)

    def restrict(self, window: Window) -> "WaveFunction":
        """Project onto ``window`` (amplitudes elsewhere are dropped)."""
        out = np.zeros(window.size, complex)
        a, b = max(window.lo, self.window.lo), min(window.hi, self.window.hi)
        if a <= b:
            out[a - window.lo : b - window.lo + 1] = self.amplitudes[a - self.window.lo : b - self.window.lo + 1]
        return WaveFunction(window, out)

    def to_window(self, window: Window) -> "WaveFunction":
        return self.restrict(window)

    def distance2(self, other: "WaveFunction") -> float:
        """Squared l2 distance, both vectors read as zero outside their windows."""
        lo = min(self.window.lo, other.window.lo)
        hi = max(self.window.hi, other.window.hi)
        w = Window(lo, hi)
        d = self.restrict(w).amplitudes - other.restrict(w).amplitudes
        return float(np.sum(np.abs(d) ** 2))


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Dense matrix from ``col_window`` (inputs) to ``row_window`` (outputs)."""

    row_window: Window
    col_window: Window
    entries: np.ndarray

    def __post_init__(self):
        e = _frozen(self.entries, dtype=np.result_type(self.entries, float))
        if e.shape != (self.row_window.size, self.col_window.size):
            raise ValueError(f"entries shape {e.shape} does not match windows")
        object.__setattr__(self, "entries", e)

    def __matmul__(self, other):
        if isinstance(other, KernelMatrix):
            if self.col_window != other.row_window:
                raise ValueError("kernel windows do not compose")
            return KernelMatrix(self.row_window, other.col_window, self.entries @ other.entries)
        if isinstance(other, WaveFunction):
            return self.apply(other)
        return NotImplemented

    def apply(self, f: WaveFunction) -> WaveFunction:
        f = f.embed(self.col_window) if f.window != self.col_window else f
        return WaveFunction(self.row_window, self.entries @ f.amplitudes)

    def adjoint(self) -> "KernelMatrix":
        return KernelMatrix(self.col_window, self.row_window, self.entries.conj().T)

    def column(self, j: int) -> np.ndarray:
        return self.entries[:, self.col_window.offset(j)]

    def __getitem__(self, key):
        l, j = key
        return self.entries[self.row_window.offset(l), self.col_window.offset(j)]


@dataclass(frozen=True)
class MomentumGrid:
    """Uniform momentum nodes ``k_m = -pi + 2 pi m / n_points``."""

    n_points: int

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 1:
            raise ValueError(f"n_points must be a positive integer, got {self.n_points}")

    @property
    def nodes(self) -> np.ndarray:
        m = np.arange(self.n_points)
        return -np.pi + 2 * np.pi * m / self.n_points


def _check_time(t) -> float:
    t = float(t)
    if not math.isfinite(t):
        raise ValueError(f"time must be finite, got {t}")
    return t


def is_integer_time(t: float) -> bool:
    return float(t).is_integer()


def sinpi(t):
    """sin(pi t) with exact zeros at integers and exact oddness in t."""
    t = np.asarray(t, dtype=float)
    n = np.rint(t)
    r = t - n
    parity = np.where(np.remainder(n, 2) == 0, 1.0, -1.0)
    out = parity * np.sin(np.pi * r)
    return out if out.ndim else float(out)


def _shift_values(d, t: float) -> np.ndarray:
    """sinc(pi (d + t)) for integer offsets ``d = j - l``."""
    d = np.asarray(d)
    if is_integer_time(t):
        return (d + int(t) == 0).astype(float)
    n = np.rint(t)
    s = np.sin(np.pi * (t - n))
    # sin(pi (d + t)) = (-1)^(d + n) sin(pi (t - n))
    sign = np.where(np.remainder(d + n, 2) == 0, 1.0, -1.0)
    return sign * s / (np.pi * (d + t))


def sinc_shift_coeff(j, t, l):
    """Kernel value ``sinc(pi (j + t - l))``; exactly ``delta_{j+t,l}`` for integer t.

    Broadcasts over array-valued ``j`` and ``l``.
    """
    t = _check_time(t)
    out = _shift_values(np.asarray(j) - np.asarray(l), t)
    return out if out.ndim else float(out)


def shift_kernel(t: float, row_window: Window, col_window: Window) -> KernelMatrix:
    """Truncation of ``U_t`` to the block ``row_window x col_window``."""
    t = _check_time(t)
    d = col_window.sites[None, :] - row_window.sites[:, None]
    return KernelMatrix(row_window, col_window, _shift_values(d, t))


def build_shift_kernel(t: float, in_window: Window, pad: int = DEFAULT_PAD) -> KernelMatrix:
    """``U_t`` acting on vectors supported in ``in_window``, output window padded by ``pad``."""
    if pad < 0:
        raise ValueError(f"pad must be nonnegative, got {pad}")
    return shift_kernel(t, in_window.pad(pad), in_window)


def sinc_tail_bound(pad: int, t: float = 0.5) -> float:
    """Leading-order weight ``sum_{|x| > pad} sinc^2(pi (x + t))``, i.e. ``2 sin^2(pi t) / (pi^2 pad)``."""
    if pad <= 0:
        return 1.0
    return 2.0 * sinpi(t) ** 2 / (np.pi**2 * pad)


def apply_shift_exact(f: WaveFunction, t: float, pad: int = DEFAULT_PAD) -> WaveFunction:
    """Apply the truncated sinc kernel; output lives on ``f.window`` padded by ``pad``.

    Large problems are evaluated as a linear (not circular) convolution, which is
    the same Toeplitz product as the dense kernel up to rounding.
    """
    t = _check_time(t)
    if pad < 0:
        raise ValueError(f"pad must be nonnegative, got {pad}")
    out_w = f.window.pad(pad)
    if is_integer_time(t):
        return _integer_shift(f, int(t), out_w)
    if out_w.size * f.window.size <= _DENSE_LIMIT:
        return shift_kernel(t, out_w, f.window).apply(f)
    # out[l] = sum_j f[j] tap[l - j],  tap[m] = sinc(pi (t - m))
    m = np.arange(out_w.lo - f.window.hi, out_w.hi - f.window.lo + 1)
    taps = _shift_values(-m, t)
    full = fftconvolve(f.amplitudes, taps)
    start = f.window.size - 1
    return WaveFunction(out_w, full[start : start + out_w.size])


def _integer_shift(f: WaveFunction, n: int, out_w: Window) -> WaveFunction:
    moved = WaveFunction(f.window.shift(n), f.amplitudes)
    return moved.restrict(out_w)


def apply_shift_fft(f: WaveFunction, t: float, grid: MomentumGrid) -> WaveFunction:
    """Periodic approximation of ``U_t`` on ``grid.n_points`` sites around ``f``.

    The lattice is closed into a ring of ``n_points`` sites, transformed to the
    momentum nodes of ``grid``, multiplied by ``exp(i t k_m)`` and transformed
    back.  Exactly unitary; wraps around, so it is only an approximation of the
    infinite-lattice flow.
    """
    t = _check_time(t)
    n = grid.n_points
    if n < f.window.size:
        raise ValueError(f"grid of {n} points is smaller than the support window ({f.window.size} sites)")
    lo = f.window.lo - (n - f.window.size) // 2
    out_w = Window(lo, lo + n - 1)
    x = f.embed(out_w).amplitudes
    p = np.arange(n)
    alt = np.where(p % 2 == 0, 1.0, -1.0)
    # ftilde(k_m) = sum_p x_p exp(i p k_m), k_m = -pi + 2 pi m / n; site offset lo cancels
    spectrum = n * np.fft.ifft(x * alt)
    spectrum *= np.exp(1j * t * grid.nodes)
    y = alt * np.fft.fft(spectrum) / n
    return WaveFunction(out_w, y)


def generator_kernel(window: Window) -> KernelMatrix:
    """Hermitian kernel ``h[j, m] = i (-1)^(j-m) / (j-m)``, zero diagonal."""
    d = window.sites[:, None] - window.sites[None, :]
    safe = np.where(d == 0, 1, d)
    sign = np.where(d % 2 == 0, 1.0, -1.0)
    h = np.where(d == 0, 0.0, 1j * sign / safe)
    return KernelMatrix(window, window, h)


@lru_cache(maxsize=16)
def _generator_eigh(window: Window):
    w, v = np.linalg.eigh(generator_kernel(window).entries)
    w.setflags(write=False)
    v.setflags(write=False)
    return w, v


def expm_generator(window: Window, t: float, max_size: int = MAX_EXPM_SIZE) -> KernelMatrix:
    """``exp(i t h_W)`` for the generator truncated to ``window``."""
    t = _check_time(t)
    if window.size > max_size:
        raise ValueError(f"window of {window.size} sites exceeds dense exponentiation limit {max_size}")
    w, v = _generator_eigh(window)
    return KernelMatrix(window, window, (v * np.exp(1j * t * w)) @ v.conj().T)


def generator_column_error(window: Window, t: float, site: int = 0, max_size: int = MAX_EXPM_SIZE) -> float:
    """Full l2 distance between ``exp(i t h_W) chi_site`` and the exact column ``U_t chi_site``.

    The exact column has unit norm, so its weight outside ``window`` is
    ``1 - sum_in |sinc|^2`` and no padding is involved.
    """
    if site not in window:
        raise ValueError(f"site {site} is outside {window}")
    approx = expm_generator(window, t, max_size).column(site)
    exact = _shift_values(site - window.sites, _check_time(t))
    inside = np.abs(exact) ** 2
    outside = max(0.0, 1.0 - math.fsum(inside))
    return math.sqrt(math.fsum(np.abs(approx - exact) ** 2) + outside)


def matrix_element_U(m, n, t):
    """``(e_{-m}, U_t e_n) = (-1)^(m+n) sin(pi t) / (pi (m + t + n))`` for ``m, n >= 1``.

    Vectorized over ``m`` and ``n``.
    """
    t = _check_time(t)
    m = np.asarray(m)
    n = np.asarray(n)
    if np.any(m < 1) or np.any(n < 1):
        raise ValueError("matrix_element_U needs m >= 1 and n >= 1")
    if is_integer_time(t):
        if t <= -2:
            # closed form is 0/0 here; U_t is the exact shift
            out = ((m + n + int(t)) == 0).astype(complex)
        else:
            out = np.zeros(np.broadcast(m, n).shape, complex)
    else:
        sign = np.where((m + n) % 2 == 0, 1.0, -1.0)
        out = (sign * np.sin(np.pi * t) / (np.pi * (m + t + n))).astype(complex)
    return out if out.ndim else complex(out)
