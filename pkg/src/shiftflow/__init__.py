"""Numerical laboratory for the continuous shift flow on the fermion chain."""

from .one_particle import (
    KernelMatrix,
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
    sinc_shift_coeff,
)

__version__ = "0.1.0"
