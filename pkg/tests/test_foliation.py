import json

import numpy as np
import pytest
import sympy as sp

from hcma.disk_solver import HermitianModel, solve_boundary
from hcma.disk_solver.disks import disk_from_solve
from hcma.disk_solver.foliation import (
    FoliationChart,
    LeafJet,
    assemble_foliation,
    beta_form,
    default_leaf_samples,
    invert_fn,
    levi_verify,
    potential_jet,
    structure_report,
    tangency_verify,
)
from hcma.ma_flow import complex_hessian_from_real

REF = HermitianModel("reference")
QL = HermitianModel("quadric-like")
FLAT = HermitianModel("flat")
SAMPLES = default_leaf_samples()


@pytest.fixture(scope="module")
def ref_chart():
    return assemble_foliation(REF, 0.0, [0, 0.3, 0.3j], n_modes=16)


@pytest.fixture(scope="module")
def ql_chart():
    return assemble_foliation(QL, 0.05, [0, 0.2, 0.2j, -0.2], n_modes=32)


@pytest.fixture(scope="module")
def ql_jet(ql_chart):
    return LeafJet.build(QL, ql_chart.leaf(0.2).disk)


def _levi_det_oracle(x0, y0, a0, b0):
    """Bordered complex Hessian determinant of -log(1+|z1|^2) - log|t|^2, symbolically."""
    x, y, a, b = sp.symbols("x y a b", real=True)
    u = -sp.log(1 + x**2 + y**2) - sp.log(a**2 + b**2)
    d = lambda f, p, q: (sp.diff(f, p) - sp.I * sp.diff(f, q)) / 2
    dbar = lambda f, p, q: (sp.diff(f, p) + sp.I * sp.diff(f, q)) / 2
    var = [(x, y), (a, b)]
    du = [d(u, *v) for v in var]
    H = [[dbar(d(u, *vi), *vj) for vj in var] for vi in var]
    L = sp.Matrix([[0, sp.conjugate(du[0]), sp.conjugate(du[1])],
                   [du[0], H[0][0], H[0][1]],
                   [du[1], H[1][0], H[1][1]]])
    val = L.det().subs({x: x0, y: y0, a: a0, b: b0})
    return complex(sp.N(sp.simplify(val)))


class TestUndeformed:
    def test_psi_is_identity(self, ref_chart):
        rep = ref_chart.reports["structure"]
        assert rep["psi_minus_id"] < 1e-12
        assert rep["max_boundary_u"] < 1e-12
        assert rep["embedded"]

    def test_levi_det_against_symbolic(self, ref_chart):
        jet = LeafJet.build(REF, ref_chart.leaf(0).disk)
        pj = potential_jet(jet, 0.5)
        oracle = _levi_det_oracle(0.0, 0.0, 0.5, 0.0)
        assert abs(oracle - 4.0) < 1e-12
        assert abs(pj.levi_det - oracle.real) < 1e-7

    def test_levi_det_off_centre(self, ref_chart):
        jet = LeafJet.build(REF, ref_chart.leaf(0.3).disk)
        zeta = 0.4 - 0.3j
        pj = potential_jet(jet, zeta)
        z1, t = pj.point
        oracle = _levi_det_oracle(z1.real, z1.imag, t.real, t.imag)
        assert abs(pj.levi_det - oracle.real) < 1e-6 * abs(oracle)

    def test_leaf_direction_is_degenerate(self, ref_chart):
        jet = LeafJet.build(REF, ref_chart.leaf(0.3j).disk)
        for z in SAMPLES[:4]:
            pj = potential_jet(jet, complex(z))
            assert abs(pj.leaf_form) < 1e-8

    def test_tangency_reference(self, ref_chart):
        rep = tangency_verify(ref_chart, 0.3)
        assert rep["residual"] < 1e-8
        assert rep["negative_mode_energy"] < 1e-26

    def test_tangency_flat_is_exact(self):
        chart = assemble_foliation(FLAT, 0.0, [0.1], n_modes=8)
        jet = LeafJet.exact_model(FLAT, chart.leaves[0].disk)
        assert tangency_verify(chart, jet=jet)["residual"] < 1e-12

    def test_tangency_negative_control(self, ref_chart):
        # a non-extremal disk through the same point fails the tangency identity
        d = ref_chart.leaf(0.3).disk
        f1 = d.f1.copy()
        f1[2] += 0.05
        sol = solve_boundary(REF, f1, 0.0, len(d.f1) - 2, d.n_grid, None)
        bad = disk_from_solve(f1, sol, 0.0, d.n_grid)
        assert bad.boundary_residual(REF) < 1e-12
        beta, _, _ = beta_form(REF, bad, SAMPLES)
        z1, t = bad.evaluate(SAMPLES)
        du = np.stack([-np.conj(z1) / (1 + abs(z1) ** 2), -1 / t], 1)
        assert np.max(np.abs(beta + SAMPLES[:, None] * du)) > 1e-3

    def test_u_lambda_closed_form(self, ref_chart):
        for z1, t in [(0.05 + 0.1j, 0.3), (0.25, -0.2 + 0.4j)]:
            exact = -np.log(1 + abs(z1) ** 2) - np.log(abs(t) ** 2)
            assert abs(ref_chart.u_lambda(z1, t) - exact) < 1e-10


class TestDeformed:
    def test_structure(self, ql_chart):
        rep = ql_chart.reports["structure"]
        assert rep["max_grad_norm"] < 1e-10
        assert rep["max_boundary_residual"] < 1e-10
        assert rep["max_boundary_u"] < 1e-10
        assert rep["embedded"]
        assert rep["min_separation"] > 0.5
        # |Psi - Id| <= C |lam| with C = 0.04 measured on this grid
        assert rep["psi_minus_id"] == pytest.approx(0.002022731567290156, rel=1e-5)
        assert rep["psi_minus_id"] <= 0.05 * 0.05

    def test_jet_matches_fd_of_u_lambda(self, ql_chart, ql_jet):
        pj = potential_jet(ql_jet, 0.5 + 0.2j)
        P = pj.point
        x0 = np.array([P[0].real, P[1].real, P[0].imag, P[1].imag])
        U = lambda x: ql_chart.u_lambda(complex(x[0], x[2]), complex(x[1], x[3]))
        h = 2e-3
        E = np.eye(4)
        g = np.array([(U(x0 + h * E[i]) - U(x0 - h * E[i])) / (2 * h) for i in range(4)])
        H = np.zeros((4, 4))
        for i in range(4):
            for j in range(i, 4):
                H[i, j] = H[j, i] = (U(x0 + h * E[i] + h * E[j]) - U(x0 + h * E[i] - h * E[j])
                                     - U(x0 - h * E[i] + h * E[j]) + U(x0 - h * E[i] - h * E[j])) / (4 * h * h)
        assert np.max(np.abs(0.5 * (g[:2] - 1j * g[2:]) - pj.du)) < 5e-5
        assert np.max(np.abs(complex_hessian_from_real(H) - pj.hess)) < 5e-5

    def test_tangency(self, ql_chart, ql_jet):
        rep = tangency_verify(ql_chart, 0.2, jet=ql_jet)
        assert rep["residual"] < 1e-7
        assert rep["beta_scale_spread"] < 1e-12

    def test_levi(self, ql_chart, ql_jet):
        jets = {r.z_prime: (ql_jet if r.z_prime == 0.2 else LeafJet.build(QL, r.disk)) for r in ql_chart.leaves}
        rep = levi_verify(ql_chart, jets=jets)
        assert rep["sign_constant"] and rep["det_sign"] == -1
        assert rep["band_ratio"] <= 2
        assert rep["band_ratio"] == pytest.approx(1.1071992599866667, rel=1e-6)
        assert rep["max_leaf_form"] < 1e-8
        assert rep["min_tangent_form"] > 0
        assert rep["max_ma_residual"] < 1e-8

    def test_invert_roundtrip(self, ql_chart):
        d = ql_chart.leaf(-0.2).disk
        for z in SAMPLES:
            t = d.evaluate(z)[1]
            assert abs(invert_fn(d, t) - z) < 1e-13
        zp, zeta = ql_chart.invert(*ql_chart.leaf(0).disk.evaluate(0.3 - 0.4j))
        assert abs(zp) < 1e-11 and abs(zeta - (0.3 - 0.4j)) < 1e-11

    def test_json_roundtrip(self, ql_chart):
        back = FoliationChart.from_dict(json.loads(ql_chart.to_json()))
        assert back.lam == ql_chart.lam and back.n_modes == ql_chart.n_modes
        for a, b in zip(back.leaves, ql_chart.leaves):
            assert np.array_equal(a.disk.f1, b.disk.f1) and np.array_equal(a.disk.fn, b.disk.fn)
        assert structure_report(back) == structure_report(ql_chart)

    def test_schema_rejected(self, ql_chart):
        d = ql_chart.to_dict()
        d["schema"] = 99
        with pytest.raises(ValueError, match="schema"):
            FoliationChart.from_dict(d)

    def test_leaf_trace_csv(self, ql_chart):
        rows = ql_chart.leaf_trace_csv(0.2, n=16).strip().split("\n")
        assert rows[0] == "theta,re_f1,im_f1,re_fn,im_fn" and len(rows) == 17
