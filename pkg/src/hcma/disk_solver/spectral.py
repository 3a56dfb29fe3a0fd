"""Fourier-multiplier operators on the unit circle and the Riemann-Hilbert split.

Boundary functions are sampled on ``theta_j = 2 pi j / M`` with ``M`` a
power of two; ``np.fft`` ordering is used throughout.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class WindingError(ValueError):
    """Raised when a function to be factorised winds around the origin."""


def _check_grid(m: int, strict: bool = True) -> None:
    if m < 16 or (strict and m & (m - 1)):
        raise ValueError(f"grid size must be a power of two >= 16, got {m}")


def circle_grid(m: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(m) / m)


def wavenumbers(m: int) -> np.ndarray:
    return np.fft.fftfreq(m, 1.0 / m).astype(int)


def hilbert_transform(values) -> np.ndarray:
    """Boundary values of the conjugate function vanishing at the centre.

    Multiplier ``-i sign(k)``; the mean and the Nyquist mode are sent to 0.
    Real input gives real output.
    """
    values = np.asarray(values)
    m = values.shape[-1]
    _check_grid(m)
    k = wavenumbers(m)
    mult = -1j * np.sign(k)
    mult[m // 2] = 0.0
    out = np.fft.ifft(np.fft.fft(values, axis=-1) * mult, axis=-1)
    return out.real if np.isrealobj(values) else out


def szego_project(values) -> np.ndarray:
    """Keep the modes ``k >= 1`` (holomorphic, vanishing at the centre)."""
    values = np.asarray(values, dtype=complex)
    m = values.shape[-1]
    _check_grid(m, strict=False)
    k = wavenumbers(m)
    c = np.fft.fft(values, axis=-1)
    c[..., (k < 1) | (k == -(m // 2))] = 0.0
    return np.fft.ifft(c, axis=-1)


def holomorphic_part(values) -> np.ndarray:
    """Keep the modes ``k >= 0``."""
    values = np.asarray(values, dtype=complex)
    m = values.shape[-1]
    k = wavenumbers(m)
    c = np.fft.fft(values, axis=-1)
    c[..., (k < 0)] = 0.0
    return np.fft.ifft(c, axis=-1)


def negative_mode_energy(values) -> float:
    """``sum_{k<0} |c_k|^2`` of a boundary function."""
    values = np.asarray(values, dtype=complex)
    m = values.shape[-1]
    c = np.fft.fft(values) / m
    return float(np.sum(np.abs(c[wavenumbers(m) < 0]) ** 2))


def coeffs_to_grid(coeffs, m: int) -> np.ndarray:
    """Values on the ``m``-grid of ``sum_{k>=0} c_k zeta^k``."""
    c = np.asarray(coeffs, dtype=complex)
    if len(c) > m // 2:
        raise ValueError("grid too coarse for the number of modes")
    full = np.zeros(m, dtype=complex)
    full[: len(c)] = c
    return np.fft.ifft(full) * m


def grid_to_coeffs(values, n_modes: int) -> np.ndarray:
    """Modes ``0..n_modes`` of a boundary function (negative modes dropped)."""
    values = np.asarray(values, dtype=complex)
    m = len(values)
    return (np.fft.fft(values) / m)[: n_modes + 1]


def truncate_real(values, n_modes: int) -> np.ndarray:
    """Low-pass a real boundary function to ``|k| <= n_modes``."""
    m = len(values)
    c = np.fft.fft(values)
    c[np.abs(wavenumbers(m)) > n_modes] = 0.0
    return np.fft.ifft(c).real


def winding_number(values) -> int:
    """Discrete winding number about 0 of a closed sampled curve."""
    v = np.asarray(values, dtype=complex)
    d = np.angle(np.roll(v, -1) / v)
    return int(np.rint(np.sum(d) / (2 * np.pi)))


@dataclass
class RHFactorization:
    """``phi = rho * g`` on the circle with ``rho > 0`` and ``g`` holomorphic.

    ``g`` is stored through ``log_g`` (boundary values of a holomorphic
    function with real part zero at the centre); ``theta0 = arg g(0)``.
    """

    rho_boundary: np.ndarray
    log_g: np.ndarray
    theta0: float

    @property
    def g(self) -> np.ndarray:
        return np.exp(self.log_g)

    @property
    def g_fourier(self) -> np.ndarray:
        m = len(self.log_g)
        return np.fft.fft(self.g) / m

    def g0(self) -> complex:
        return complex(self.g_fourier[0])

    def g_at(self, zeta) -> np.ndarray:
        """Evaluate the holomorphic extension of ``g`` inside the disk."""
        m = len(self.log_g)
        c = (np.fft.fft(self.log_g) / m)[: m // 2]
        return np.exp(np.polynomial.polynomial.polyval(np.asarray(zeta, complex), c))


def rh_factorize(values) -> RHFactorization:
    """Split a nonvanishing winding-zero boundary function as ``rho * g``.

    With ``log phi = A + iB`` (continuous branch of the argument), the
    holomorphic function with imaginary part ``B`` and real part vanishing
    at 0 is ``-T(B) + iB``, so ``rho = exp(A + T(B))``.
    """
    phi = np.asarray(values, dtype=complex)
    m = len(phi)
    _check_grid(m)
    if np.any(phi == 0):
        raise WindingError("function vanishes on the circle")
    wn = winding_number(phi)
    if wn != 0:
        raise WindingError(f"winding number {wn} != 0")
    A = np.log(np.abs(phi))
    B = np.unwrap(np.angle(phi))
    # choose the branch whose mean lies in (-pi, pi]
    shift = 2 * np.pi * np.round(B.mean() / (2 * np.pi))
    B = B - shift
    TB = hilbert_transform(B)
    log_g = -TB + 1j * B
    rho = np.exp(A + TB)
    return RHFactorization(rho, log_g, float(B.mean()))
