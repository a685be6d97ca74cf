import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import polygamma

from shiftflow.one_particle import (
    MomentumGrid,
    WaveFunction,
    Window,
    apply_shift_exact,
    apply_shift_fft,
    build_shift_kernel,
    expm_generator,
    generator_column_error,
    generator_kernel,
    matrix_element_U,
    shift_kernel,
    sinc_shift_coeff,
    sinpi,
)


def tail_oracle(dist, t):
    """sum_{m > dist} sinc^2(pi (m + phi)) in closed form via the trigamma function.

    Only uses sin^2(pi (m + phi)) = sin^2(pi phi) and sum_{m>=a} (m+x)^-2 = psi'(a+x).
    """
    return math.sin(math.pi * t) ** 2 / math.pi**2 * float(polygamma(1, dist + 1 + t))


def momentum_oracle(j, t, l):
    """(1/2pi) int exp(i (j + t - l) k) dk by quadrature."""
    x = j + t - l
    re = quad(lambda k: math.cos(x * k), -math.pi, math.pi, epsabs=1e-14, limit=200)[0]
    return re / (2 * math.pi)


# -- sinc_shift_coeff ---------------------------------------------------------


def test_integer_shift_is_exact():
    assert sinc_shift_coeff(0, 3, 3) == 1.0
    assert sinc_shift_coeff(0, 3, 2) == 0.0
    assert sinc_shift_coeff(5, -2, 3) == 1.0


def test_half_step_value():
    assert sinc_shift_coeff(0, 0.5, 0) == pytest.approx(2 / math.pi, abs=1e-15)
    assert sinc_shift_coeff(0, 0.5, 0) == pytest.approx(0.636619772, abs=1e-9)


def test_two_closed_forms_agree():
    j, t, l = 2, 0.3, 5
    alt = (-1) ** (j - l) * math.sin(0.3 * math.pi) / (math.pi * (j + t - l))
    plain = math.sin(math.pi * (j + t - l)) / (math.pi * (j + t - l))
    assert sinc_shift_coeff(j, t, l) == pytest.approx(alt, abs=1e-14)
    assert sinc_shift_coeff(j, t, l) == pytest.approx(plain, abs=1e-14)


@pytest.mark.parametrize("j,t,l", [(0, 0.5, 0), (0, 0.25, 3), (-4, 1.7, 1), (10, -0.6, 2)])
def test_kernel_matches_momentum_integral(j, t, l):
    assert sinc_shift_coeff(j, t, l) == pytest.approx(momentum_oracle(j, t, l), abs=1e-12)


def test_rejects_nonfinite_time():
    with pytest.raises(ValueError):
        build_shift_kernel(float("nan"), Window(0, 0), 3)
    with pytest.raises(ValueError):
        apply_shift_exact(WaveFunction.delta(0), float("inf"), 3)


def test_sinpi_exact_zeros_and_oddness():
    for n in range(-5, 6):
        assert sinpi(n) == 0.0
    ts = np.linspace(-7.3, 7.3, 301)
    assert np.array_equal(sinpi(-ts), -sinpi(ts))


# -- build_shift_kernel -------------------------------------------------------


def test_unit_kernel_is_shift_permutation():
    w = Window(-4, 4)
    K = build_shift_kernel(1, w, pad=1).entries
    assert set(np.unique(K)) <= {0.0, 1.0}
    assert np.all(K.sum(axis=0) == 1)
    rows = np.argmax(K, axis=0)
    # column j -> row for site j + 1 in the padded window [-5, 5]
    assert np.array_equal(rows, np.arange(w.size) + 2)


def test_column_norms_match_tail_oracle():
    w = Window(-50, 50)
    pad = 10_000
    K = build_shift_kernel(0.5, w, pad)
    norms = np.sum(K.entries**2, axis=0)
    assert np.all(norms <= 1 + 1e-12)
    lo_bound = 1 - 3 / (math.pi**2 * pad)
    assert np.all(norms >= lo_bound)
    # exact deficit of column j: tails beyond both padded edges
    for j in (-50, 0, 50):
        right = K.row_window.hi - j  # last kept row offset
        left = j - K.row_window.lo
        # kept l - j in [-left, right]; x = j + t - l = t - (l - j)
        deficit = tail_oracle(right, -0.5) + tail_oracle(left, 0.5)
        col = norms[j - w.lo]
        assert 1 - col == pytest.approx(deficit, rel=1e-6)


def test_half_steps_there_and_back():
    pad = 2000
    f = WaveFunction.delta(0)
    g = apply_shift_exact(apply_shift_exact(f, 0.5, pad), -0.5, pad)
    tail = tail_oracle(pad, 0.5) * 2
    assert g[0].real >= 1 - 2 * tail
    assert g[0].real <= 1 + 1e-12


# -- apply_shift_exact ---------------------------------------------------------


def test_exact_integer_apply():
    g = apply_shift_exact(WaveFunction.delta(0), 2, pad=2)
    assert g.window == Window(-2, 2)
    assert np.array_equal(g.amplitudes, [0, 0, 0, 0, 1])


def test_exact_half_step_amplitudes():
    g = apply_shift_exact(WaveFunction.delta(0), 0.5, pad=1000)
    assert g[0].real == pytest.approx(2 / math.pi, abs=1e-15)
    assert g[1].real == pytest.approx(2 / math.pi, abs=1e-15)
    assert g[-1].real == pytest.approx(-2 / (3 * math.pi), abs=1e-15)


def test_exact_identity_at_zero():
    rng = np.random.default_rng(1)
    f = WaveFunction(Window(-3, 4), rng.normal(size=8) + 1j * rng.normal(size=8))
    g = apply_shift_exact(f, 0.0, pad=5)
    assert np.array_equal(g.restrict(f.window).amplitudes, f.amplitudes)
    assert g.norm2 == pytest.approx(f.norm2, rel=1e-15)


def test_norm_never_grows():
    rng = np.random.default_rng(2)
    f = WaveFunction(Window(-10, 10), rng.normal(size=21) + 1j * rng.normal(size=21))
    for t in (0.1, 0.5, 2.3, -1.7):
        g = apply_shift_exact(f, t, pad=500)
        assert g.norm2 <= f.norm2 * (1 + 1e-12)
        assert f.norm2 - g.norm2 <= 2 * f.window.size * 2 / (math.pi**2 * 500) * f.norm2


def test_convolution_route_matches_dense_route():
    rng = np.random.default_rng(3)
    f = WaveFunction(Window(-20, 20), rng.normal(size=41) + 1j * rng.normal(size=41))
    pad = 60_000  # forces the convolution branch
    fast = apply_shift_exact(f, 0.37, pad)
    check = Window(-300, 300)
    dense = shift_kernel(0.37, check, f.window).apply(f)
    assert np.max(np.abs(fast.restrict(check).amplitudes - dense.amplitudes)) < 1e-12


# -- apply_shift_fft -------------------------------------------------------------


def test_fft_integer_shift():
    g = apply_shift_fft(WaveFunction.delta(0), 1, MomentumGrid(1024))
    target = WaveFunction.delta(1)
    assert g.distance2(target) < 1e-24


def test_fft_is_unitary():
    rng = np.random.default_rng(4)
    for _ in range(5):
        f = WaveFunction(Window(-30, 30), rng.normal(size=61) + 1j * rng.normal(size=61))
        g = apply_shift_fft(f, rng.uniform(-5, 5), MomentumGrid(257))
        assert g.norm2 == pytest.approx(f.norm2, rel=1e-12)


def test_fft_matches_exact_route():
    f = WaveFunction.delta(0)
    fft = apply_shift_fft(f, 0.5, MomentumGrid(2**14))
    exact = apply_shift_exact(f, 0.5, pad=2**12)
    assert fft.distance2(exact) <= 1e-3


def test_fft_wraparound_shrinks_with_grid():
    f = WaveFunction.delta(0)
    errs = []
    for n in (2**10, 2**12, 2**14):
        exact = apply_shift_exact(f, 0.5, pad=n)
        errs.append(apply_shift_fft(f, 0.5, MomentumGrid(n)).distance2(exact))
    assert errs[0] > errs[1] > errs[2]


def test_fft_rejects_small_grid():
    with pytest.raises(ValueError):
        apply_shift_fft(WaveFunction(Window(0, 9), np.ones(10)), 0.5, MomentumGrid(8))


def test_momentum_grid_nodes():
    g = MomentumGrid(8)
    assert g.nodes[0] == -math.pi
    assert np.allclose(np.diff(g.nodes), 2 * math.pi / 8)
    assert g.nodes[-1] < math.pi


# -- generator ---------------------------------------------------------------------


def test_generator_entries():
    h = generator_kernel(Window(-3, 3))
    assert np.all(np.diag(h.entries) == 0)
    assert h[0, 1] == 1j
    assert h[1, 0] == -1j
    assert h[0, 2] == pytest.approx(-0.5j)
    assert np.array_equal(h.entries, h.entries.conj().T)


def test_generator_matches_momentum_integral():
    # (1/2pi) int k exp(i (m - j) k) dk
    h = generator_kernel(Window(0, 4))
    for j in range(5):
        for m in range(5):
            x = m - j
            im = quad(lambda k: k * math.sin(x * k), -math.pi, math.pi, epsabs=1e-13)[0] / (2 * math.pi)
            assert h[j, m] == pytest.approx(1j * im, abs=1e-12)


def test_generator_spectrum_inside_momentum_band():
    h = generator_kernel(Window(-256, 255)).entries
    ev = np.linalg.eigvalsh(h)
    assert ev.min() >= -math.pi - 1e-6
    assert ev.max() <= math.pi + 1e-6


def test_expm_identity_and_unitarity():
    w = Window(-20, 20)
    assert np.allclose(expm_generator(w, 0.0).entries, np.eye(w.size), atol=1e-13)
    U = expm_generator(w, 0.73).entries
    assert np.max(np.abs(U @ U.conj().T - np.eye(w.size))) < 1e-10


def test_expm_group_law():
    w = Window(-40, 40)
    a = expm_generator(w, 0.4) @ expm_generator(w, 1.3)
    b = expm_generator(w, 1.7)
    assert np.max(np.abs(a.entries - b.entries)) < 1e-9


def test_expm_rejects_oversize():
    with pytest.raises(ValueError):
        expm_generator(Window(0, 99), 0.5, max_size=50)


def test_expm_central_entry_converges():
    errs = []
    for half in (64, 128, 256):
        U = expm_generator(Window(-half, half), 0.5)
        errs.append(abs(U[0, 0] - 2 / math.pi))
    # error sequence roughly halves per doubling (about 5.8e-3, 2.9e-3, 1.5e-3)
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 2e-3


# -- matrix_element_U ------------------------------------------------------------


def test_matrix_element_values():
    assert matrix_element_U(1, 1, 0.5) == pytest.approx(1 / (2.5 * math.pi), abs=1e-15)
    assert abs(matrix_element_U(1, 1, 0.5)) == pytest.approx(0.127324, abs=1e-6)
    for t in (-1, 0, 1, 2, 7):
        assert matrix_element_U(3, 4, t) == 0


def test_matrix_element_integer_below_minus_two_is_shift():
    # m + n + t = 0 lands e_n on e_{-m}
    assert matrix_element_U(1, 2, -3) == 1
    assert matrix_element_U(1, 1, -3) == 0


def test_matrix_element_rejects_nonpositive():
    with pytest.raises(ValueError):
        matrix_element_U(0, 1, 0.5)


def test_matrix_element_equals_kernel():
    rng = np.random.default_rng(5)
    m = rng.integers(1, 200, size=1000)
    n = rng.integers(1, 200, size=1000)
    for t in rng.uniform(-1.9, 5, size=10):
        a = matrix_element_U(m, n, t)
        b = sinc_shift_coeff(n, t, -m)
        assert np.max(np.abs(a - b)) < 1e-14


# -- properties -----------------------------------------------------------------

times = st.floats(min_value=-6, max_value=6, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(t=times, lo=st.integers(-20, 20), size=st.integers(1, 12))
def test_time_reversal_is_exact_adjoint(t, lo, size):
    w = Window(lo, lo + size - 1)
    K = shift_kernel(t, w, w).entries
    Kr = shift_kernel(-t, w, w).entries
    assert np.array_equal(Kr, K.conj().T)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(-8, 8), lo=st.integers(-10, 10), size=st.integers(1, 10))
def test_integer_time_is_permutation(n, lo, size):
    w = Window(lo, lo + size - 1)
    K = build_shift_kernel(n, w, pad=abs(n)).entries
    assert set(np.unique(K)) <= {0.0, 1.0}
    assert np.all(K.sum(axis=0) == 1)


@settings(max_examples=20, deadline=None)
@given(s=st.floats(-2, 2), t=st.floats(-2, 2))
def test_group_law_defect_within_tail(s, t):
    pad = 400
    f = WaveFunction.delta(0)
    two = apply_shift_exact(apply_shift_exact(f, t, pad), s, pad)
    one = apply_shift_exact(f, s + t, 2 * pad)
    # defect is bounded by the discarded weight of the first step plus the second
    bound = 4 * (2 / (math.pi**2 * pad)) + 1e-12
    assert two.distance2(one) <= bound


def test_generator_column_error_matches_padded_route():
    # independent route: padded exact column plus closed-form tail beyond the pad
    w, t, pad = Window(-16, 15), 0.5, 4000
    approx = expm_generator(w, t).apply(WaveFunction.delta(0))
    exact = apply_shift_exact(WaveFunction.delta(0), t, pad)
    beyond = tail_oracle(pad, -t) + tail_oracle(pad, t)  # output window is [-pad, pad]
    ref = math.sqrt(approx.distance2(exact) + beyond)
    assert generator_column_error(w, t) == pytest.approx(ref, rel=1e-9)


def test_generator_column_error_validation():
    with pytest.raises(ValueError):
        generator_column_error(Window(1, 4), 0.5, site=0)
