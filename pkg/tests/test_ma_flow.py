import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hcma.ma_flow import (
    ExhaustionModel,
    SingularHessian,
    commutation_defect,
    complex_gradient,
    complex_hessian_from_real,
    detect_period,
    flow,
    flow_map,
    growth_test,
    hessian_identity_defect,
    leaf_uniformize,
    rotation_between,
)

EUC = ExhaustionModel.euclidean()
Z0 = np.array([0.6 + 0.2j, -0.3 + 0.5j])


def _bundle():
    u = lambda z: np.log(1 + abs(z[0]) ** 2) + np.log(abs(z[1]) ** 2)
    return ExhaustionModel.line_bundle(u)


class TestEuclidean:
    def test_xi_flow_scales_tau(self):
        tr = flow(EUC, Z0, "xi", 3.0, step=1e-3, n_out=31)
        assert tr.invariant_defect() < 1e-9
        assert np.max(np.abs(tr.points[-1] - np.exp(1.5) * Z0)) < 1e-9

    def test_eta_flow_preserves_tau(self):
        tr = flow(EUC, Z0, "eta", 3.0, step=1e-3, n_out=31, find_period=True)
        assert tr.invariant_defect() < 1e-9
        assert tr.period == pytest.approx(4 * np.pi, abs=1e-9)

    def test_period_constant_along_xi(self):
        periods = [detect_period(EUC, flow_map(EUC, Z0, "xi", t)) for t in (0.0, 0.7, 1.5, 3.0)]
        assert np.ptp(periods) < 1e-6

    @given(st.floats(0, 2), st.floats(0, 6))
    def test_flows_commute(self, t, s):
        assert commutation_defect(EUC, Z0, t, s, step=5e-3) < 1e-9

    def test_backward_flow_and_csv(self):
        tr = flow(EUC, Z0, "xi", -1.0, step=1e-2, n_out=3)
        assert np.allclose(tr.points[-1], np.exp(-0.5) * Z0)
        lines = tr.to_csv().strip().split("\n")
        assert lines[0] == "t,re_z1,im_z1,re_z2,im_z2,tau" and len(lines) == len(tr.t) + 1

    def test_chart_truncation(self):
        tr = flow(EUC, Z0, "xi", 5.0, step=1e-2, in_chart=lambda z: np.sum(abs(z) ** 2) < 4)
        assert tr.truncated and tr.tau[-1] < 4

    def test_argument_checks(self):
        with pytest.raises(ValueError):
            flow(EUC, Z0, "zeta", 1.0)
        with pytest.raises(ValueError):
            flow(EUC, Z0, "xi", 1.0, step=0.0)
        with pytest.raises(ValueError, match="fixed point"):
            detect_period(EUC, np.zeros(2, complex))


class TestLeaves:
    def test_uniformizer_is_holomorphic(self):
        leaf = leaf_uniformize(EUC, Z0)
        assert leaf.s0 == pytest.approx(4 * np.pi)
        for zeta in (0.3 + 0.1j, -0.2 + 0.25j):
            assert leaf.cr_residual(zeta) < 1e-8
        assert leaf.modulus_defect(0.4, 2.0) < 1e-10
        t, s = leaf.params(leaf.zeta(0.4, 2.0))
        assert (t, s) == pytest.approx((0.4, 2.0))

    def test_rotation_is_a_constant_phase(self):
        leaf = leaf_uniformize(EUC, Z0)
        ratio, other = rotation_between(leaf, 0.5, 1.3)
        assert abs(abs(ratio) - 1) < 1e-10
        assert abs(ratio - np.exp(-2j * np.pi * 1.3 / leaf.s0)) < 1e-9
        z = 0.2 - 0.3j
        assert np.max(np.abs(other(z) - leaf(z / ratio))) < 1e-9


class TestLineBundle:
    def test_gradient_tangent_to_leaf(self):
        z = np.array([0.4 - 0.3j, 0.7 + 0.2j])
        g = complex_gradient(_bundle(), z)
        assert abs(g.Y[0]) < 1e-7
        assert abs(g.Y[1] - z[1]) < 1e-7
        assert g.residual < 1e-7

    def test_hessian_identity(self):
        assert hessian_identity_defect(_bundle(), np.array([0.4 - 0.3j, 0.7 + 0.2j])) < 1e-6

    def test_singular_hessian(self):
        m = ExhaustionModel.line_bundle(lambda z: np.log(abs(z[0]) ** 2) + np.log(abs(z[1]) ** 2))
        with pytest.raises(SingularHessian):
            complex_gradient(m, np.array([0.5 + 0.1j, 0.3 - 0.4j]))

    def test_levi_matches_euclidean(self):
        m = ExhaustionModel.line_bundle(lambda z: np.log(np.sum(abs(z) ** 2)))
        assert np.max(np.abs(m.levi(Z0) - np.eye(2))) < 1e-7


def test_complex_hessian_from_real():
    # f = |z|^2 + Re(z^2): Hessian [[4, 0], [0, 0]] in (x, y); f_{z zbar} = 1
    assert complex_hessian_from_real(np.array([[4.0, 0.0], [0.0, 0.0]]))[0, 0] == pytest.approx(1.0)
    # f = x y: f_{z zbar} = 0 and the imaginary part vanishes by symmetry
    assert complex_hessian_from_real(np.array([[0.0, 1.0], [1.0, 0.0]]))[0, 0] == 0


@pytest.fixture(scope="module")
def samples():
    rng = np.random.default_rng(7)
    d = rng.normal(size=(200, 2)) + 1j * rng.normal(size=(200, 2))
    d /= np.linalg.norm(d, axis=1)[:, None]
    r = np.geomspace(0.1, 100.0, 200)
    pts = d * r[:, None]
    # include the real z1 axis, where exp(z1) is largest
    axis = np.stack([r, np.zeros_like(r)], 1).astype(complex)
    return np.concatenate([pts, axis])


class TestGrowth:
    @pytest.mark.parametrize("deg", [1, 2, 3])
    def test_monomials_pass(self, samples, deg):
        vals = samples[:, 0] ** (deg - 1) * samples[:, 1] if deg > 1 else samples[:, 0]
        assert growth_test(EUC, samples, vals, N=deg).passes

    def test_exponential_fails(self, samples):
        res = growth_test(EUC, samples, np.exp(samples[:, 0]), N=3)
        assert not res.passes and res.tail_slope > 1

    def test_needs_large_tau(self, samples):
        with pytest.raises(ValueError):
            growth_test(EUC, samples[:10] * 0.01, np.ones(10), N=1)
