import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hcma.geom_core import (
    GeodesicState,
    SurfaceMetric,
    clairaut_constant,
    continue_jacobi,
    curvature_fourier,
    equator_start,
    geodesic_spectrum,
    integrate_geodesic,
    jacobi_along_path,
    jacobi_grid,
    real_frame,
    sample_angles,
)

ROUND = SurfaceMetric.round_sphere()


@pytest.fixture(scope="module")
def zoll_spectrum():
    return geodesic_spectrum(SurfaceMetric.zoll(0.2), 0.7)


def _x_ode_curvature(eps, angle, z, n=4000):
    """Curvature at complex arclength ``z`` from RK4 on the second-order x-equation.

    ``x'' = -x/m^2 - (1 - x^2 - c^2) m_x / m^3`` with ``x = cos r``, integrated
    along the path 0 -> Re z -> z.
    """
    c = np.cos(angle)
    m = lambda x: 1 + eps * x * (1 - x * x)
    mx = lambda x: eps * (1 - 3 * x * x)
    f = lambda y: np.array([y[1], -y[0] / m(y[0]) ** 2 - (1 - y[0] ** 2 - c * c) * mx(y[0]) / m(y[0]) ** 3])
    y = np.array([0.0, -np.sin(angle)], complex)
    for seg in (z.real, 1j * z.imag):
        h = seg / n
        for _ in range(n):
            k1 = f(y)
            k2 = f(y + h / 2 * k1)
            k3 = f(y + h / 2 * k2)
            k4 = f(y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    x = y[0]
    return 1 / m(x) ** 2 - x * mx(x) / m(x) ** 3


class TestGeodesics:
    def test_round_great_circle_closed_form(self):
        a = 0.6
        tr = integrate_geodesic(ROUND, equator_start(a), 2 * np.pi, 1e-3, samples=65)
        assert np.max(np.abs(tr.x + np.sin(a) * np.sin(tr.sigma))) < 1e-12
        assert tr.closure_defect() < 1e-12

    @given(st.floats(0.0, 0.45), st.floats(0.05, 1.565))
    def test_zoll_unit_speed_clairaut_closure(self, eps, angle):
        tr = integrate_geodesic(SurfaceMetric.zoll(eps), equator_start(angle), 2 * np.pi, 2 * np.pi / 4096,
                                samples=257)
        assert tr.speed_defect() < 1e-10
        assert np.max(np.abs(clairaut_constant(tr)[1:-1] - np.cos(angle))) < 1e-8
        assert tr.periodicity_defect() < 1e-9

    @given(st.floats(0.0, 0.45), st.floats(0.05, 1.546))
    def test_zoll_closes_in_theta(self, eps, angle):
        # theta is swept fast near the pole; 1.546 is the steepest of 32 sampled angles
        tr = integrate_geodesic(SurfaceMetric.zoll(eps), equator_start(angle), 2 * np.pi, 2 * np.pi / 16384,
                                samples=257)
        assert tr.closure_defect() < 1e-8

    def test_many_geodesics_near_pole(self):
        _, s = geodesic_spectrum(SurfaceMetric.zoll(0.2), 1.565)
        assert np.isfinite(s.strip_width)

    def test_flat_is_a_line(self):
        tr = integrate_geodesic(SurfaceMetric.flat(), GeodesicState((0.0, 0.0), (0.6, 0.8)), 1.0, 0.1)
        assert np.allclose(tr.position[-1], [0.6, 0.8])
        assert np.all(tr.curvature() == 0)

    def test_input_rejection(self):
        m = SurfaceMetric.zoll(0.1)
        with pytest.raises(ValueError, match="unit"):
            integrate_geodesic(m, GeodesicState((np.pi / 2, 0), (1.0, 1.0)), 1.0, 0.1)
        with pytest.raises(ValueError):
            integrate_geodesic(m, equator_start(0.3), -1.0, 0.1)
        with pytest.raises(ValueError):
            integrate_geodesic(m, equator_start(0.3), 1.0, 0.0)
        with pytest.raises(ValueError):
            SurfaceMetric.zoll(0.6)
        with pytest.raises(ValueError):
            SurfaceMetric.from_name("torus")
        with pytest.raises(ValueError):
            sample_angles(0)

    def test_sample_angles(self):
        assert np.allclose(sample_angles(2), [np.pi / 8, 3 * np.pi / 8])


class TestSpectrum:
    def test_round_sphere_single_mode(self):
        _, s = geodesic_spectrum(ROUND, 0.4)
        assert s.kmax == 0 and abs(s.coeffs[0] - 1) < 1e-14
        assert np.isinf(s.strip_width) and np.isinf(s.certified_tau())

    def test_partial_period_rejected(self):
        tr = integrate_geodesic(ROUND, equator_start(0.4), np.pi, 1e-3, samples=65)
        with pytest.raises(ValueError, match="period"):
            curvature_fourier(ROUND, tr)

    def test_real_axis_reconstruction(self, zoll_spectrum):
        tr, s = zoll_spectrum
        assert np.max(np.abs(s.evaluate(tr.sigma) - tr.curvature())) < 1e-12

    def test_complex_continuation_matches_x_ode(self, zoll_spectrum):
        _, s = zoll_spectrum
        for z in (1.1 + 0.2j, 4.0 + 0.35j, 2.5 - 0.3j):
            assert abs(s.evaluate(z) - _x_ode_curvature(0.2, 0.7, z)) < 1e-9

    def test_strip_width_and_certificate(self):
        widths = [geodesic_spectrum(SurfaceMetric.zoll(e), 0.7)[1].strip_width for e in (0.1, 0.2, 0.3)]
        assert widths == pytest.approx([1.4371418090750723, 1.1811848681023653, 1.0087481254675947], rel=1e-6)
        s = geodesic_spectrum(SurfaceMetric.zoll(0.2), 0.7)[1]
        ct = s.certified_tau(1e-8)
        assert 0 < ct < s.strip_width
        assert s.truncation_error(ct) <= 1e-8 < s.truncation_error(ct + 0.05)
        assert s.certified_tau(1e-6) > ct
        assert s.truncation_error(s.strip_width) == np.inf


class TestJacobi:
    def test_round_sphere_tan(self):
        sig = np.linspace(0, 2 * np.pi, 16, endpoint=False)
        tau = np.linspace(0.05, 2.0, 8)
        g = jacobi_grid(np.array([1.0 + 0j]), sig, tau, step=1e-3)
        z = sig[:, None] + 1j * tau[None, :]
        assert np.max(np.abs(g.a - np.tan(z))) < 1e-10
        assert np.max(np.abs(g.wronskian - 1)) < 1e-12

    @given(st.floats(0, 2 * np.pi), st.floats(-0.3, 0.3))
    def test_wronskian_is_one(self, sigma, tau):
        _, s = geodesic_spectrum(SurfaceMetric.zoll(0.2), 0.7)
        st_ = jacobi_along_path(s, [0, sigma, sigma + 1j * tau], step=2e-3)[-1]
        assert abs(st_[0] * st_[3] - st_[1] * st_[2] - 1) < 1e-10

    def test_grid_matches_path(self, zoll_spectrum):
        _, s = zoll_spectrum
        g = jacobi_grid(s, [0.5, 2.0], [0.0, 0.2, 0.4], step=1e-3)
        p = jacobi_along_path(s, [0, 2.0, 2.0 + 0.2j, 2.0 + 0.4j], step=1e-3)
        assert np.max(np.abs(g.Y[1] - p[1:, 0])) < 1e-12
        assert np.max(np.abs(g.Z[1] - p[1:, 2])) < 1e-12

    def test_continue_rejections(self, zoll_spectrum):
        _, s = zoll_spectrum
        f = real_frame(s, 1.0)
        with pytest.raises(ValueError, match="certified"):
            continue_jacobi(f, s.strip_width, spectrum=s)
        f.sigma_tau = 1.0 + 0.1j
        with pytest.raises(ValueError, match="real axis"):
            continue_jacobi(f, 0.1)

    def test_round_continuation_has_no_breach(self):
        f = real_frame(np.array([1.0 + 0j]), 0.3)
        res = continue_jacobi(f, 2.0, n_out=21)
        assert res.breach_tau is None and res.max_wronskian_defect < 1e-12
        assert abs(res.frames[-1].a - np.tan(0.3 + 2j)) < 1e-10

    def test_pole_detected(self):
        # K = 0, so Y(i tau) = Y0 + i tau Y'0 vanishes at tau = 0.5
        f = real_frame(np.array([0j]), 0.0)
        f.Y, f.Yp = 1e-3, 1j * 1e-3 / 0.5
        f.Z, f.Zp = 0.0, 1.0 / f.Y
        res = continue_jacobi(f, 1.0, n_out=201)
        assert res.breach_kind in ("pole", "im_a") and res.breach_tau == pytest.approx(0.5, abs=0.01)
