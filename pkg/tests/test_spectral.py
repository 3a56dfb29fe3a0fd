import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hcma.disk_solver.spectral import (
    WindingError,
    circle_grid,
    coeffs_to_grid,
    grid_to_coeffs,
    hilbert_transform,
    holomorphic_part,
    negative_mode_energy,
    rh_factorize,
    szego_project,
    winding_number,
)

M = 64
TH = 2 * np.pi * np.arange(M) / M
ZETA = np.exp(1j * TH)


def test_hilbert_examples():
    assert np.allclose(hilbert_transform(np.cos(TH)), np.sin(TH), atol=1e-14)
    assert np.allclose(hilbert_transform(np.ones(M)), 0.0, atol=1e-15)
    assert np.allclose(hilbert_transform(ZETA), -1j * ZETA, atol=1e-14)


def test_hilbert_rejects_bad_grid():
    with pytest.raises(ValueError):
        hilbert_transform(np.ones(48))
    with pytest.raises(ValueError):
        hilbert_transform(np.ones(8))


def test_hilbert_real_in_real_out():
    out = hilbert_transform(np.cos(3 * TH) + 0.2)
    assert np.isrealobj(out)


@given(st.integers(-M // 2 + 1, M // 2 - 1))
def test_multipliers_exact_on_modes(k):
    e = ZETA**k
    assert np.max(np.abs(hilbert_transform(e) - (-1j * np.sign(k)) * e)) < 1e-12
    assert np.max(np.abs(szego_project(e) - (e if k >= 1 else 0))) < 1e-12
    assert np.max(np.abs(holomorphic_part(e) - (e if k >= 0 else 0))) < 1e-12


@given(st.lists(st.floats(-1, 1), min_size=M, max_size=M))
def test_hilbert_square_is_minus_identity_on_mean_zero(vals):
    u = np.array(vals)
    # remove the Nyquist mode, which T annihilates on an even grid
    c = np.fft.fft(u)
    c[M // 2] = 0
    u = np.fft.ifft(c).real
    assert np.max(np.abs(hilbert_transform(hilbert_transform(u)) + (u - u.mean()))) < 1e-12


@given(st.lists(st.complex_numbers(max_magnitude=1, allow_nan=False), min_size=M, max_size=M))
def test_szego_idempotent_and_self_adjoint(vals):
    f = np.array(vals)
    g = np.roll(f, 3).conj()
    Sf = szego_project(f)
    assert np.max(np.abs(szego_project(Sf) - Sf)) < 1e-12
    # real pairing (1/4pi) int Re(f conj g)
    pair = lambda a, b: np.mean(np.real(a * np.conj(b))) / 2
    assert abs(pair(Sf, g) - pair(f, szego_project(g))) < 1e-12


def test_szego_examples():
    assert np.allclose(szego_project(ZETA), ZETA)
    assert np.allclose(szego_project(np.conj(ZETA)), 0)
    assert np.allclose(szego_project(np.ones(M)), 0)


def test_coefficient_roundtrip():
    c = np.array([0.3, 1 + 2j, -0.5j, 0.1])
    assert np.allclose(grid_to_coeffs(coeffs_to_grid(c, M), 3), c)
    with pytest.raises(ValueError):
        coeffs_to_grid(np.ones(40), M)


def test_negative_mode_energy():
    assert negative_mode_energy(ZETA) < 1e-30
    assert abs(negative_mode_energy(ZETA + 0.5 * np.conj(ZETA) ** 2) - 0.25) < 1e-14


def test_winding_number():
    assert winding_number(ZETA) == 1
    assert winding_number(ZETA**-2) == -2
    assert winding_number(2 + ZETA) == 0


class TestRH:
    def test_model_disk_input_one(self):
        f = rh_factorize(np.ones(M, complex))
        assert np.allclose(f.rho_boundary, 1) and np.allclose(f.g, 1) and f.theta0 == 0

    def test_positive_constant(self):
        f = rh_factorize(2 * np.ones(M, complex))
        assert np.allclose(f.rho_boundary, 2) and np.allclose(f.g, 1)

    def test_exp_zeta(self):
        # log-split oracle: log phi = zeta is already holomorphic with Re(0) = 0
        f = rh_factorize(np.exp(ZETA))
        assert np.max(np.abs(f.rho_boundary - 1)) < 1e-13
        assert np.max(np.abs(f.g - np.exp(ZETA))) < 1e-13
        assert abs(f.g_at(0.3 + 0.2j) - np.exp(0.3 + 0.2j)) < 1e-13

    @given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-1.2, 1.2))
    def test_invariants(self, a, b, th):
        phi = np.exp(a * np.cos(TH) + 1j * b * np.sin(2 * TH) + 1j * th) * (1 + 0.3 * ZETA)
        f = rh_factorize(phi)
        assert np.all(f.rho_boundary > 0)
        assert abs(abs(f.g0()) - 1) < 1e-10
        assert np.max(np.abs(f.rho_boundary * f.g - phi)) < 1e-9
        assert negative_mode_energy(f.log_g) < 1e-26
        assert abs(f.theta0 - np.angle(f.g0())) < 1e-10

    def test_regrid_invariance(self):
        def phi(m):
            z = circle_grid(m)
            return np.exp(0.4 * np.cos(np.angle(z))) * (1 + 0.4 * z) * np.exp(0.2j)

        a, b = rh_factorize(phi(256)), rh_factorize(phi(512))
        assert np.max(np.abs(a.rho_boundary - b.rho_boundary[::2])) < 1e-9
        assert np.max(np.abs(a.g_fourier[:20] - b.g_fourier[:20])) < 1e-9
        assert abs(a.theta0 - b.theta0) < 1e-12

    def test_nonzero_winding_rejected(self):
        with pytest.raises(WindingError, match="winding"):
            rh_factorize(ZETA)
