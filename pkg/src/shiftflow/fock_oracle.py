"""
Exact finite Fock-space oracle.

Sites of a window ``[lo, hi]`` are tensor factors ``0 .. n-1`` (site ``lo``
is the most significant bit of a basis index, occupation 1 = filled).  The
Jordan-Wigner string uses ``sigma^z = 2 c^* c - 1``::

    c_j = sigma^z_lo ... sigma^z_{j-1}  a_j

so that ``sigma^x_j = S^(j) (c_j + c_j^*)`` is the bare local flip and spin
operators are translation covariant.  The crossed-product element ``T`` is
represented by the identity, which is consistent only for windows inside
``[1, inf)`` where the twisted grading acts trivially.

Everything here is dense; the default cap of 12 sites means 4096 x 4096.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.special import expit

from .one_particle import WaveFunction, Window, expm_generator, generator_kernel
from .quasifree_states import CorrelationMatrix

__all__ = [
    "DEFAULT_SITE_CAP",
    "SiteCapError",
    "GradingError",
    "FockMatrix",
    "as_window",
    "annihilator",
    "creator",
    "number",
    "identity",
    "parity",
    "grading",
    "pauli",
    "c_of",
    "c_star_of",
    "quadratic_form",
    "truncated_hamiltonian",
    "heisenberg_evolve",
    "quasifree_equivalence_check",
    "gibbs_correlation",
    "gibbs_correlation_dense",
    "gibbs_correlation_closed",
    "opnorm",
    "car_residual",
    "pauli_residual",
]

DEFAULT_SITE_CAP = 12


class SiteCapError(ValueError):
    """Requested Fock space exceeds the configured site cap."""


class GradingError(ValueError):
    """Operator does not have the required even/odd parity."""


def as_window(window, cap: int = DEFAULT_SITE_CAP) -> Window:
    """Accept a :class:`Window` or a site count ``n`` (meaning sites ``1..n``)."""
    if not isinstance(window, Window):
        window = Window(1, int(window))
    if window.size > cap:
        raise SiteCapError(f"{window.size} sites exceed the oracle cap of {cap}")
    return window


@dataclass(frozen=True, eq=False)
class FockMatrix:
    """Dense operator on the Fock space of ``window``."""

    window: Window
    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=complex)
        dim = 2**self.window.size
        if e.shape != (dim, dim):
            raise ValueError(f"expected {dim}x{dim} matrix for {self.window}, got {e.shape}")
        object.__setattr__(self, "entries", e)

    @property
    def n_sites(self) -> int:
        return self.window.size

    @property
    def dim(self) -> int:
        return 2**self.n_sites

    def _check(self, other: "FockMatrix"):
        if self.window != other.window:
            raise ValueError(f"Fock spaces differ: {self.window} vs {other.window}")

    def __matmul__(self, other: "FockMatrix") -> "FockMatrix":
        self._check(other)
        return FockMatrix(self.window, self.entries @ other.entries)

    def __add__(self, other: "FockMatrix") -> "FockMatrix":
        self._check(other)
        return FockMatrix(self.window, self.entries + other.entries)

    def __sub__(self, other: "FockMatrix") -> "FockMatrix":
        self._check(other)
        return FockMatrix(self.window, self.entries - other.entries)

    def __mul__(self, z) -> "FockMatrix":
        return FockMatrix(self.window, self.entries * z)

    __rmul__ = __mul__

    def __neg__(self) -> "FockMatrix":
        return FockMatrix(self.window, -self.entries)

    def dagger(self) -> "FockMatrix":
        return FockMatrix(self.window, self.entries.conj().T)

    def norm(self) -> float:
        return opnorm(self.entries)

    def anticommutator(self, other: "FockMatrix") -> "FockMatrix":
        return self @ other + other @ self

    def commutator(self, other: "FockMatrix") -> "FockMatrix":
        return self @ other - other @ self


def opnorm(a: np.ndarray) -> float:
    """Operator (spectral) norm; Hermitian and anti-Hermitian inputs use eigvalsh."""
    a = np.asarray(a)
    if not a.any():
        return 0.0
    scale = np.max(np.abs(a))
    if np.allclose(a, a.conj().T, rtol=0, atol=1e-14 * scale):
        return float(np.max(np.abs(np.linalg.eigvalsh(a))))
    if np.allclose(a, -a.conj().T, rtol=0, atol=1e-14 * scale):
        return float(np.max(np.abs(np.linalg.eigvalsh(1j * a))))
    return float(np.linalg.norm(a, 2))


@lru_cache(maxsize=32)
def _occupations(n: int) -> np.ndarray:
    """occ[s, p] = occupation of tensor factor p in basis state s."""
    s = np.arange(2**n)[:, None]
    shifts = n - 1 - np.arange(n)[None, :]
    occ = (s >> shifts) & 1
    occ.setflags(write=False)
    return occ


@lru_cache(maxsize=32)
def _string_signs(n: int) -> np.ndarray:
    """sign[s, p] = prod_{q < p} (2 occ_q - 1) evaluated on basis state s."""
    occ = _occupations(n)
    empties = np.cumsum(1 - occ, axis=1) - (1 - occ)
    sign = np.where(empties % 2 == 0, 1.0, -1.0)
    sign.setflags(write=False)
    return sign


def _hop(n: int, j: int, m: int):
    """Action of c_j^* c_m on basis states: (source, target, sign) for nonvanishing columns."""
    occ = _occupations(n)
    sign = _string_signs(n)
    states = np.arange(2**n)
    src = states[occ[:, m] == 1]
    mid = src ^ (1 << (n - 1 - m))
    sgn = sign[src, m]
    if j == m:
        return src, src, np.ones(src.size)
    keep = occ[mid, j] == 0
    src, mid, sgn = src[keep], mid[keep], sgn[keep]
    dst = mid | (1 << (n - 1 - j))
    return src, dst, sgn * sign[mid, j]


def _site_index(window: Window, j: int) -> int:
    if j not in window:
        raise ValueError(f"site {j} outside {window}")
    return j - window.lo


def annihilator(window, j: int, cap: int = DEFAULT_SITE_CAP) -> FockMatrix:
    """``c_j`` on the Fock space of ``window`` (an int ``n`` means sites ``1..n``)."""
    w = as_window(window, cap)
    n = w.size
    p = _site_index(w, j)
    occ = _occupations(n)
    src = np.flatnonzero(occ[:, p] == 1)
    dst = src ^ (1 << (n - 1 - p))
    m = np.zeros((2**n, 2**n), complex)
    m[dst, src] = _string_signs(n)[src, p]
    return FockMatrix(w, m)


def creator(window, j: int, cap: int = DEFAULT_SITE_CAP) -> FockMatrix:
    return annihilator(window, j, cap).dagger()


def number(window, j: int, cap: int = DEFAULT_SITE_CAP) -> FockMatrix:
    w = as_window(window, cap)
    return FockMatrix(w, np.diag(_occupations(w.size)[:, _site_index(w, j)]).astype(complex))


def identity(window, cap: int = DEFAULT_SITE_CAP) -> FockMatrix:
    w = as_window(window, cap)
    return FockMatrix(w, np.eye(2**w.size, dtype=complex))


def parity(window, cap: int = DEFAULT_SITE_CAP) -> FockMatrix:
    """``prod_j (-1)^{N_j}``; conjugation by it implements the grading."""
    w = as_window(window, cap)
    total = _occupations(w.size).sum(axis=1)
    return FockMatrix(w, np.diag(np.where(total % 2 == 0, 1.0, -1.0)).astype(complex))


def grading(A: FockMatrix) -> FockMatrix:
    """Theta(A): flips the sign of odd monomials."""
    d = np.diag(parity(A.window, cap=A.n_sites).entries)
    return FockMatrix(A.window, d[:, None] * A.entries * d[None, :])


def pauli(window, j: int, axis: str, cap: int = DEFAULT_SITE_CAP) -> FockMatrix:
    """Spin operator ``sigma^axis_j`` built from fermions (``T`` represented by 1).

    The string ``S^(j)`` runs over represented sites ``1 <= i < j``.
    """
    w = as_window(window, cap)
    if w.lo < 1:
        raise ValueError(f"spin operators need a window inside [1, inf), got {w}")
    if axis not in ("x", "y", "z"):
        raise ValueError(f"axis must be x, y or z, got {axis!r}")
    # operators are products of signed permutations; form them sparsely
    c = sparse.csr_matrix(annihilator(w, j, cap).entries)
    cd = c.conj().T.tocsr()
    one = sparse.identity(2**w.size, dtype=complex, format="csr")

    def sz(i):
        ci = sparse.csr_matrix(annihilator(w, i, cap).entries)
        return 2 * (ci.conj().T @ ci) - one

    if axis == "z":
        return FockMatrix(w, sz(j).toarray())
    S = one
    for i in range(w.lo, j):
        S = S @ sz(i)
    if axis == "x":
        return FockMatrix(w, (S @ (c + cd)).toarray())
    return FockMatrix(w, (1j * (S @ (c - cd))).toarray())


def _sparse_max(m) -> float:
    m = m.tocoo()
    return float(np.max(np.abs(m.data))) if m.nnz else 0.0


def car_residual(window, cap: int = DEFAULT_SITE_CAP) -> float:
    """Largest entry of any CAR defect ``{c_i, c_j}``, ``{c_i^*, c_j} - delta_ij`` over all pairs.

    Products are formed sparsely from the dense generators, so ten sites take
    seconds rather than minutes.
    """
    w = as_window(window, cap)
    cs = [sparse.csr_matrix(annihilator(w, j, cap).entries) for j in w.sites]
    one = sparse.identity(2**w.size, dtype=complex, format="csr")
    worst = 0.0
    for i, ci in enumerate(cs):
        cid = ci.conj().T.tocsr()
        for j, cj in enumerate(cs):
            worst = max(worst, _sparse_max(ci @ cj + cj @ ci))
            d = cid @ cj + cj @ cid
            worst = max(worst, _sparse_max(d - one if i == j else d))
    return worst


def pauli_residual(window, cap: int = DEFAULT_SITE_CAP) -> float:
    """Largest defect of the Pauli algebra built from fermions on ``window``.

    Checks ``x y = i z`` cyclically, squares equal to one, and commutation of
    every pair of components on distinct sites.
    """
    w = as_window(window, cap)
    ops = {(int(j), a): sparse.csr_matrix(pauli(w, int(j), a, cap).entries) for j in w.sites for a in "xyz"}
    one = sparse.identity(2**w.size, dtype=complex, format="csr")
    worst = 0.0
    for j in w.sites:
        j = int(j)
        x, y, z = ops[j, "x"], ops[j, "y"], ops[j, "z"]
        for a, b, c in ((x, y, z), (y, z, x), (z, x, y)):
            worst = max(worst, _sparse_max(a @ b - 1j * c))
        for a in (x, y, z):
            worst = max(worst, _sparse_max(a @ a - one))
        for k in w.sites:
            k = int(k)
            if k <= j:
                continue
            for a in "xyz":
                for b in "xyz":
                    A, B = ops[j, a], ops[k, b]
                    worst = max(worst, _sparse_max(A @ B - B @ A))
    return worst


def _combination(window: Window, f: WaveFunction, op) -> FockMatrix:
    lo, hi = f.support() if np.any(f.amplitudes) else (window.lo, window.lo)
    if not (window.lo <= lo and hi <= window.hi):
        raise ValueError(f"support [{lo}, {hi}] of f is not inside {window}")
    out = np.zeros((2**window.size,) * 2, complex)
    for j in range(lo, hi + 1):
        if f[j]:
            out += f[j] * op(window, j, window.size).entries
    return FockMatrix(window, out)


def c_of(window, f: WaveFunction, cap: int = DEFAULT_SITE_CAP) -> FockMatrix:
    """``c(f) = sum_j f_j c_j`` (linear in ``f``)."""
    return _combination(as_window(window, cap), f, annihilator)


def c_star_of(window, f: WaveFunction, cap: int = DEFAULT_SITE_CAP) -> FockMatrix:
    """``c^*(f) = sum_j f_j c_j^*`` (linear in ``f``)."""
    return _combination(as_window(window, cap), f, creator)


def quadratic_form(window, coeffs: np.ndarray, cap: int = DEFAULT_SITE_CAP) -> FockMatrix:
    """``sum_{j,m} coeffs[j, m] c_j^* c_m`` assembled directly in the occupation basis."""
    w = as_window(window, cap)
    n = w.size
    coeffs = np.asarray(coeffs)
    if coeffs.shape != (n, n):
        raise ValueError(f"coefficient matrix must be {n}x{n}")
    out = np.zeros((2**n, 2**n), complex)
    for j in range(n):
        for m in range(n):
            if coeffs[j, m] == 0:
                continue
            src, dst, sgn = _hop(n, j, m)
            out[dst, src] += coeffs[j, m] * sgn
    return FockMatrix(w, out)


def truncated_hamiltonian(window, cap: int = DEFAULT_SITE_CAP) -> FockMatrix:
    """``H_W = sum_{j,m in W} h[j, m] c_j^* c_m`` with the normalized generator kernel."""
    w = as_window(window, cap)
    return quadratic_form(w, generator_kernel(w).entries, cap)


@lru_cache(maxsize=8)
def _hamiltonian_eigh(window: Window, cap: int):
    H = truncated_hamiltonian(window, cap).entries
    return np.linalg.eigh(H)


def _eigh(H: FockMatrix):
    return np.linalg.eigh(H.entries)


def heisenberg_evolve(A: FockMatrix, H: FockMatrix, t: float, _eig=None) -> FockMatrix:
    """``exp(itH) A exp(-itH)`` via Hermitian eigendecomposition of ``H``."""
    if A.window != H.window:
        raise ValueError(f"dimension mismatch: {A.window} vs {H.window}")
    w, v = _eig if _eig is not None else _eigh(H)
    phase = np.exp(1j * t * w)
    A_eig = v.conj().T @ A.entries @ v
    A_eig = phase[:, None] * A_eig * phase.conj()[None, :]
    return FockMatrix(A.window, v @ A_eig @ v.conj().T)


def quasifree_equivalence_check(window, f: WaveFunction, t: float, cap: int = DEFAULT_SITE_CAP) -> float:
    """``|| exp(itH_W) c(f) exp(-itH_W) - c(exp(i t h_W) f) ||``.

    An exact identity in finite dimensions, so the value is pure rounding.
    """
    w = as_window(window, cap)
    cf = c_of(w, f, cap)
    H = truncated_hamiltonian(w, cap)
    lhs = heisenberg_evolve(cf, H, t, _eig=_hamiltonian_eigh(w, cap))
    g = expm_generator(w, t).apply(f)
    rhs = c_of(w, g, cap)
    return (lhs - rhs).norm()


def gibbs_correlation_dense(window, beta: float, cap: int = DEFAULT_SITE_CAP) -> np.ndarray:
    """``Tr(exp(-beta H_W) c_l^* c_j) / Tr(exp(-beta H_W))`` from the full many-body state."""
    w = as_window(window, cap)
    n = w.size
    e, v = _hamiltonian_eigh(w, cap)
    weights = np.exp(-beta * (e - (e.min() if beta >= 0 else e.max())))
    rho = (v * (weights / weights.sum())) @ v.conj().T
    gamma = np.zeros((n, n), complex)
    for j in range(n):
        for l in range(n):
            # Tr(rho X) with X = c_l^* c_j = sum_s rho[s, dst(s)] sign(s)
            src, dst, sgn = _hop(n, l, j)
            gamma[j, l] = np.sum(rho[src, dst] * sgn)
    return gamma


def gibbs_correlation_closed(window, beta: float, cap: int = DEFAULT_SITE_CAP) -> np.ndarray:
    """One-particle formula ``(1 + exp(beta h_W))^{-1}``."""
    w = as_window(window, cap)
    e, q = np.linalg.eigh(generator_kernel(w).entries)
    return (q * expit(-beta * e)) @ q.conj().T


def gibbs_correlation(window, beta: float, cap: int = DEFAULT_SITE_CAP, tol: float = 1e-8) -> CorrelationMatrix:
    """Finite-volume Gibbs correlation matrix, computed two independent ways.

    Raises ``ArithmeticError`` if the many-body trace and the one-particle
    formula disagree by more than ``tol``.
    """
    beta = float(beta)
    if not np.isfinite(beta):
        raise ValueError("Gibbs state needs a finite beta")
    w = as_window(window, cap)
    dense = gibbs_correlation_dense(w, beta, cap)
    closed = gibbs_correlation_closed(w, beta, cap)
    gap = float(np.max(np.abs(dense - closed)))
    if gap > tol:
        raise ArithmeticError(f"Gibbs routes disagree by {gap:.3e} (> {tol:g})")
    return CorrelationMatrix(w, dense)
