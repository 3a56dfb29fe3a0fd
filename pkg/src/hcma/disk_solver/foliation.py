"""Foliation of the deformed neighbourhood by extremal disks.

For a grid of base points ``z'`` the extremal disk ``f(.; z', lam)`` is
followed from ``lam = 0`` by continuation. The leaf map
``F(z', zeta) = f(zeta; z', lam)`` carries ``u = -log |zeta|^2`` to the
potential ``u_lam``; its derivatives at a leaf point come from the chain
rule, with ``zeta``-derivatives taken from the Fourier series and
``z'``-derivatives from finite differences of neighbouring extremals.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..ma_flow import complex_hessian_from_real
from .disks import (
    DEFAULT_MODES,
    BoundaryDisk,
    continuation,
    embedding_check,
    grad_energy,
    newton_disk,
)
from .model import HermitianModel
from .spectral import coeffs_to_grid, negative_mode_energy, rh_factorize

SCHEMA = 1
STENCIL_STEP = 5e-3
LEAF_TOL = 1e-13
COLLISION_TOL = 1e-9

_P = np.polynomial.polynomial


class LeafCollision(RuntimeError):
    """Two sampled leaves meet away from the divisor."""


def default_grid(spacing: float = 0.2) -> list[complex]:
    """3 x 3 square of base points centred at the origin."""
    s = (-spacing, 0.0, spacing)
    return [complex(a, b) for b in s for a in s]


def default_leaf_samples(radii=(0.35, 0.6, 0.85), n_angles: int = 4) -> np.ndarray:
    th = 2 * np.pi * (np.arange(n_angles) + 0.125) / n_angles
    return np.array([r * np.exp(1j * a) for r in radii for a in th])


# ---------------------------------------------------------------------------
# Leaf jets
# ---------------------------------------------------------------------------

_OFFSETS = [(1, 0), (-1, 0), (2, 0), (-2, 0), (0, 1), (0, -1), (0, 2), (0, -2),
            (1, 1), (1, -1), (-1, 1), (-1, -1), (2, 2), (2, -2), (-2, 2), (-2, -2)]


def _solve_leaf(model, z_prime, lam, f_init, n_modes, tol=LEAF_TOL):
    res = newton_disk(model, z_prime, lam, f_init, n_modes=n_modes, tol=tol)
    d = res.disk
    return BoundaryDisk(d.f1[: n_modes + 2], d.fn[: n_modes + 2], lam, d.n_grid), res


@dataclass
class LeafJet:
    """Coefficients of the leaf family and their ``z'``-derivatives (``z' = a + ib``)."""

    disk: BoundaryDisk
    c: np.ndarray  # (2, K) coefficients of (f1, fn)
    ca: np.ndarray
    cb: np.ndarray
    caa: np.ndarray
    cbb: np.ndarray
    cab: np.ndarray

    @classmethod
    def build(cls, model: HermitianModel, disk: BoundaryDisk, step: float = STENCIL_STEP,
              tol: float = LEAF_TOL) -> "LeafJet":
        n_modes = len(disk.f1) - 2
        z0 = disk.z_prime
        lam = disk.lam
        vals = {}
        for i, j in _OFFSETS:
            d, _ = _solve_leaf(model, z0 + step * (i + 1j * j), lam, disk, n_modes, tol)
            vals[(i, j)] = np.array([d.f1, d.fn])
        c0 = np.array([disk.f1, disk.fn])
        h = step
        ca = (-vals[(2, 0)] + 8 * vals[(1, 0)] - 8 * vals[(-1, 0)] + vals[(-2, 0)]) / (12 * h)
        cb = (-vals[(0, 2)] + 8 * vals[(0, 1)] - 8 * vals[(0, -1)] + vals[(0, -2)]) / (12 * h)
        caa = (-vals[(2, 0)] + 16 * vals[(1, 0)] - 30 * c0 + 16 * vals[(-1, 0)] - vals[(-2, 0)]) / (12 * h * h)
        cbb = (-vals[(0, 2)] + 16 * vals[(0, 1)] - 30 * c0 + 16 * vals[(0, -1)] - vals[(0, -2)]) / (12 * h * h)
        d1 = (vals[(1, 1)] - vals[(1, -1)] - vals[(-1, 1)] + vals[(-1, -1)]) / (4 * h * h)
        d2 = (vals[(2, 2)] - vals[(2, -2)] - vals[(-2, 2)] + vals[(-2, -2)]) / (16 * h * h)
        cab = (4 * d1 - d2) / 3
        return cls(disk, c0, ca, cb, caa, cbb, cab)

    @classmethod
    def exact_model(cls, model: HermitianModel, disk: BoundaryDisk, step: float = 1e-4) -> "LeafJet":
        """Jet of the model family ``(z', zeta h(z')^{-1/2})`` (valid at ``lam = 0``)."""
        def coeff(z):
            d = BoundaryDisk.model_extremal(model, z, len(disk.f1) - 1)
            return np.array([d.f1, d.fn])
        z0, h = disk.z_prime, step
        f = lambda i, j: coeff(z0 + h * (i + 1j * j))
        c0 = f(0, 0)
        ca = (f(1, 0) - f(-1, 0)) / (2 * h)
        cb = (f(0, 1) - f(0, -1)) / (2 * h)
        caa = (f(1, 0) - 2 * c0 + f(-1, 0)) / h**2
        cbb = (f(0, 1) - 2 * c0 + f(0, -1)) / h**2
        cab = (f(1, 1) - f(1, -1) - f(-1, 1) + f(-1, -1)) / (4 * h * h)
        return cls(disk, c0, ca, cb, caa, cbb, cab)

    # -- leaf map derivatives at zeta ---------------------------------------
    def point(self, zeta) -> np.ndarray:
        return np.array([_P.polyval(zeta, self.c[k]) for k in range(2)])

    def _ev(self, coeffs, zeta, der=0):
        return np.array([_P.polyval(zeta, _P.polyder(coeffs[k], der) if der else coeffs[k]) for k in range(2)])

    def real_jet(self, zeta: complex):
        """``DF`` (4 x 4) and ``Hess F_k`` (4 x 4 x 4) in ``X = (a, b, xi, eta)``.

        Output coordinates are ordered ``(Re f1, Re fn, Im f1, Im fn)``.
        """
        Fa, Fb = self._ev(self.ca, zeta), self._ev(self.cb, zeta)
        Fz = self._ev(self.c, zeta, 1)
        Fzz = self._ev(self.c, zeta, 2)
        Faz, Fbz = self._ev(self.ca, zeta, 1), self._ev(self.cb, zeta, 1)
        Faa, Fbb, Fab = self._ev(self.caa, zeta), self._ev(self.cbb, zeta), self._ev(self.cab, zeta)
        # complex-valued columns: d/dxi = d/dzeta, d/deta = i d/dzeta
        cols = [Fa, Fb, Fz, 1j * Fz]
        sec = np.empty((4, 4, 2), complex)
        sec[0, 0], sec[1, 1], sec[0, 1] = Faa, Fbb, Fab
        sec[0, 2], sec[0, 3] = Faz, 1j * Faz
        sec[1, 2], sec[1, 3] = Fbz, 1j * Fbz
        sec[2, 2], sec[3, 3], sec[2, 3] = Fzz, -Fzz, 1j * Fzz
        for i in range(4):
            for j in range(i):
                sec[i, j] = sec[j, i]
        DF = np.zeros((4, 4))
        HF = np.zeros((4, 4, 4))
        for j, col in enumerate(cols):
            DF[:2, j] = col.real
            DF[2:, j] = col.imag
        HF[:2] = np.moveaxis(sec.real, 2, 0)
        HF[2:] = np.moveaxis(sec.imag, 2, 0)
        return DF, HF, Fz


@dataclass
class PotentialJet:
    """First and complex second derivatives of ``u_lam`` at a leaf point, coordinates ``(z1, t)``."""

    point: np.ndarray  # (z1, t)
    du: np.ndarray  # (u_1, u_t)
    hess: np.ndarray  # [[u_11bar, u_1tbar], [u_t1bar, u_ttbar]]
    leaf_tangent: np.ndarray  # d f / d zeta

    @property
    def levi_matrix(self) -> np.ndarray:
        L = np.zeros((3, 3), complex)
        L[0, 1:] = np.conj(self.du)
        L[1:, 0] = self.du
        L[1:, 1:] = self.hess
        return L

    @property
    def levi_det(self) -> float:
        return float(np.real(np.linalg.det(self.levi_matrix)))

    def form(self, v) -> float:
        v = np.asarray(v, complex)
        return float(np.real(v @ self.hess @ np.conj(v)))

    @property
    def leaf_form(self) -> float:
        v = self.leaf_tangent / np.linalg.norm(self.leaf_tangent)
        return self.form(v)

    @property
    def complex_tangent_form(self) -> float:
        """Hessian on ``ker du`` (unit vector ``(u_t, -u_1)``)."""
        v = np.array([self.du[1], -self.du[0]])
        return self.form(v / np.linalg.norm(v))

    @property
    def hessian_det(self) -> float:
        return float(np.real(np.linalg.det(self.hess)))


def potential_jet(jet: LeafJet, zeta: complex) -> PotentialJet:
    DF, HF, Fz = jet.real_jet(zeta)
    xi, eta = zeta.real, zeta.imag
    s = xi * xi + eta * eta
    gradU = np.array([0.0, 0.0, -2 * xi / s, -2 * eta / s])
    HU = np.zeros((4, 4))
    HU[2, 2] = 2 * (xi * xi - eta * eta) / s**2
    HU[3, 3] = -HU[2, 2]
    HU[2, 3] = HU[3, 2] = 4 * xi * eta / s**2
    DFinv = np.linalg.inv(DF)
    g = DFinv.T @ gradU
    H = DFinv.T @ (HU - np.einsum("k,kij->ij", g, HF)) @ DFinv
    H = 0.5 * (H + H.T)
    du = 0.5 * (g[:2] - 1j * g[2:])
    return PotentialJet(jet.point(zeta), du, complex_hessian_from_real(H), Fz)


# ---------------------------------------------------------------------------
# Chart
# ---------------------------------------------------------------------------


@dataclass
class LeafRecord:
    z_prime: complex
    disk: BoundaryDisk
    E: float
    grad_norm: float
    residual: float
    tail_energy: float
    newton_steps: int

    def to_dict(self) -> dict:
        return {
            "z_prime": [self.z_prime.real, self.z_prime.imag],
            "fourier": self.disk.to_dict(),
            "E": self.E,
            "grad_norm": self.grad_norm,
            "residual": self.residual,
            "tail_energy": self.tail_energy,
        }


@dataclass
class FoliationChart:
    model: HermitianModel
    lam: complex
    n_modes: int
    leaves: list[LeafRecord]
    reports: dict = field(default_factory=dict)

    # -- maps ----------------------------------------------------------------
    def leaf(self, z_prime: complex) -> LeafRecord:
        k = int(np.argmin([abs(l.z_prime - z_prime) for l in self.leaves]))
        return self.leaves[k]

    def disk_at(self, z_prime: complex) -> BoundaryDisk:
        """Extremal disk through an arbitrary base point (warm start from the nearest leaf)."""
        rec = self.leaf(z_prime)
        if abs(rec.z_prime - z_prime) == 0:
            return rec.disk
        return _solve_leaf(self.model, z_prime, self.lam, rec.disk, self.n_modes)[0]

    def psi(self, z_prime: complex, t: complex) -> np.ndarray:
        """``Psi_lam(z', t) = f(h(z')^{1/2} t; z', lam)``."""
        d = self.disk_at(z_prime)
        return np.array(d.evaluate(np.sqrt(self.model.h_base(z_prime)) * t))

    def invert(self, z1: complex, t: complex, tol: float = 1e-12, max_iter: int = 50):
        """Leaf coordinates ``(z', zeta)`` of the point ``(z1, t)``."""
        zp = complex(z1)
        zeta = 0.0
        for _ in range(max_iter):
            d = self.disk_at(zp)
            zeta = invert_fn(d, t)
            f1 = complex(_P.polyval(zeta, d.f1))
            err = z1 - f1
            zp += err
            if abs(err) < tol:
                return zp, zeta
        raise RuntimeError("leaf inversion did not converge")

    def u_lambda(self, z1: complex, t: complex) -> float:
        """``u_lam = Phi_lam^* u_0`` evaluated by inverting the leaf map."""
        _, zeta = self.invert(z1, t)
        return float(-np.log(abs(zeta) ** 2))

    def jet(self, z_prime: complex) -> LeafJet:
        return LeafJet.build(self.model, self.disk_at(z_prime))

    # -- serialization -------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "lambda": [self.lam.real, self.lam.imag],
            "model": self.model.to_dict(),
            "n_modes": self.n_modes,
            "grid": [l.to_dict() for l in self.leaves],
            "reports": _jsonable(self.reports),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "FoliationChart":
        if d.get("schema") != SCHEMA:
            raise ValueError(f"unsupported chart schema {d.get('schema')!r}")
        lam = complex(*d["lambda"])
        m = d["model"]
        model = HermitianModel(m["name"], m["coupling"], m.get("dim", 2))
        leaves = []
        for g in d["grid"]:
            disk = BoundaryDisk.from_dict(g["fourier"], lam)
            leaves.append(LeafRecord(complex(*g["z_prime"]), disk, g["E"], g["grad_norm"],
                                     g.get("residual", np.nan), g.get("tail_energy", np.nan), 0))
        return cls(model, lam, d["n_modes"], leaves, d.get("reports", {}))

    def leaf_trace_csv(self, z_prime: complex, n: int = 256) -> str:
        d = self.leaf(z_prime).disk
        th = 2 * np.pi * np.arange(n) / n
        f1, fn = d.evaluate(np.exp(1j * th))
        rows = ["theta,re_f1,im_f1,re_fn,im_fn"]
        rows += [f"{a:.17g},{b.real:.17g},{b.imag:.17g},{c.real:.17g},{c.imag:.17g}"
                 for a, b, c in zip(th, f1, fn)]
        return "\n".join(rows) + "\n"


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, (np.floating, float)):
        return float(x)
    return x


def invert_fn(disk: BoundaryDisk, t: complex, tol: float = 1e-14, max_iter: int = 60) -> complex:
    """Solve ``fn(zeta) = t`` by Newton's method from ``t / fn'(0)``."""
    zeta = t / disk.fn[1]
    dcoef = _P.polyder(disk.fn)
    for _ in range(max_iter):
        r = _P.polyval(zeta, disk.fn) - t
        step = r / _P.polyval(zeta, dcoef)
        zeta -= step
        if abs(step) < tol:
            break
    return complex(zeta)


# ---------------------------------------------------------------------------
# Assembly and verification
# ---------------------------------------------------------------------------


def assemble_foliation(model: HermitianModel, lam: complex, z_grid=None, n_modes: int = DEFAULT_MODES,
                       lam_step: float = 0.01, tol: float = 1e-10,
                       samples=None) -> FoliationChart:
    """Extremal disks over ``z_grid`` at parameter ``lam`` with structural reports."""
    lam = complex(lam)
    z_grid = default_grid() if z_grid is None else [complex(z) for z in z_grid]
    leaves = []
    for z in z_grid:
        final, _ = continuation(model, z, lam, lam_step, n_modes, tol=min(tol, LEAF_TOL))
        d = final.disk
        leaves.append(LeafRecord(z, BoundaryDisk(d.f1[: n_modes + 2], d.fn[: n_modes + 2], lam, d.n_grid),
                                 final.E, final.grad_norm, final.residual, final.tail_energy,
                                 final.iterations))
    chart = FoliationChart(model, lam, n_modes, leaves)
    chart.reports["structure"] = structure_report(chart, samples)
    if chart.reports["structure"]["min_separation"] <= COLLISION_TOL:
        raise LeafCollision(f"sampled leaves meet: {chart.reports['structure']}")
    return chart


def structure_report(chart: FoliationChart, samples=None) -> dict:
    """Gradient, boundary, embedding, ``Psi - Id`` and disjointness on the grid."""
    samples = default_leaf_samples() if samples is None else np.asarray(samples)
    model = chart.model
    th = 2 * np.pi * np.arange(256) / 256
    boundary_u = 0.0
    psi_dev = 0.0
    grad = 0.0
    resid = 0.0
    tail = 0.0
    embedded = True
    for rec in chart.leaves:
        d = rec.disk
        f1, fn = d.evaluate(np.exp(1j * th))
        boundary_u = max(boundary_u, float(np.max(np.abs(np.log(model.r(f1, fn, chart.lam))))))
        grad = max(grad, grad_energy(model, d).norm)
        resid = max(resid, d.boundary_residual(model))
        tail = max(tail, d.tail_energy())
        embedded &= bool(embedding_check(d)["embedded"])
        sq = np.sqrt(model.h_base(rec.z_prime))
        t = samples / sq
        g1, gn = d.evaluate(samples)
        psi_dev = max(psi_dev, float(np.max(np.abs(g1 - rec.z_prime))), float(np.max(np.abs(gn - t))))
    # disjointness: points of leaf A against leaf B at equal t
    min_sep = np.inf
    for ia, A in enumerate(chart.leaves):
        tA = np.array(A.disk.evaluate(samples)[1])
        f1A = A.disk.evaluate(samples)[0]
        for ib, B in enumerate(chart.leaves):
            if ia == ib:
                continue
            for t, za in zip(tA, f1A):
                zb = invert_fn(B.disk, t)
                if abs(zb) >= 1:
                    continue
                sep = abs(za - _P.polyval(zb, B.disk.f1)) / abs(A.z_prime - B.z_prime)
                min_sep = min(min_sep, float(sep))
    return {
        "max_grad_norm": grad,
        "max_boundary_residual": resid,
        "max_boundary_u": boundary_u,
        "max_tail_energy": tail,
        "embedded": embedded,
        "psi_minus_id": psi_dev,
        "min_separation": min_sep,
    }


def levi_verify(chart: FoliationChart, samples=None, jets=None) -> dict:
    """Levi determinant, leaf degeneracy and positivity on the complex tangent space."""
    samples = default_leaf_samples() if samples is None else np.asarray(samples)
    dets, scaled, leaf, tang, ma = [], [], [], [], []
    for rec in chart.leaves:
        jet = jets[rec.z_prime] if jets else LeafJet.build(chart.model, rec.disk)
        for z in samples:
            pj = potential_jet(jet, complex(z))
            t = pj.point[1]
            dets.append(pj.levi_det)
            scaled.append(pj.levi_det * abs(t) ** 2)
            nrm = np.linalg.norm(pj.hess)
            leaf.append(abs(pj.leaf_form) / nrm)
            tang.append(pj.complex_tangent_form)
            ma.append(abs(pj.hessian_det) / nrm**2)
    scaled = np.array(scaled)
    signs = np.sign(scaled)
    mag = np.abs(scaled)
    return {
        "n_points": len(dets),
        "det_sign": int(signs[0]) if np.all(signs == signs[0]) else 0,
        "sign_constant": bool(np.all(signs == signs[0])),
        "scaled_det_min": float(mag.min()),
        "scaled_det_max": float(mag.max()),
        "band_ratio": float(mag.max() / mag.min()),
        "max_leaf_form": float(max(leaf)),
        "min_tangent_form": float(min(tang)),
        "max_ma_residual": float(max(ma)),
    }


def beta_form(model: HermitianModel, disk: BoundaryDisk, samples):
    """``beta = g dt + zeta g_1 dz1`` at leaf points, scaled so that ``beta(df/dzeta) = 1``.

    ``g`` is the holomorphic factor of ``zeta r_t = rho g`` and ``g_1`` the
    holomorphic part of ``r_1 / rho``. Returns the covectors ``(beta_1,
    beta_t)`` per sample, the scale factors ``beta(df/dzeta)`` before
    normalisation and the negative-mode energy of ``r_1 / rho``.
    """
    m = disk.n_grid
    zeta_b = np.exp(2j * np.pi * np.arange(m) / m)
    z1, t = disk.boundary(m)
    _, r1, rt = model.r_derivs(z1, t, disk.lam)
    fac = rh_factorize(zeta_b * rt)
    ratio = r1 / fac.rho_boundary
    g1c = (np.fft.fft(ratio) / m)[: m // 2]
    out, scales = [], []
    for z in np.asarray(samples, complex):
        beta = np.array([z * _P.polyval(z, g1c), complex(fac.g_at(z))])
        s = beta @ np.array(disk.derivative(z))
        out.append(beta / s)
        scales.append(s)
    return np.array(out), np.array(scales), negative_mode_energy(ratio)


def tangency_verify(chart: FoliationChart, z_prime: complex | None = None, samples=None,
                    jet: LeafJet | None = None) -> dict:
    """Compare the normalised ``beta`` with ``-zeta du`` along a leaf."""
    samples = default_leaf_samples() if samples is None else np.asarray(samples)
    rec = chart.leaves[0] if z_prime is None else chart.leaf(z_prime)
    if jet is None:
        jet = LeafJet.build(chart.model, rec.disk)
    betas, scales, neg = beta_form(chart.model, rec.disk, samples)
    resid = 0.0
    for z, b in zip(samples, betas):
        pj = potential_jet(jet, complex(z))
        resid = max(resid, float(np.max(np.abs(b + z * pj.du))))
    return {
        "z_prime": rec.z_prime,
        "residual": resid,
        "beta_scale_spread": float(np.max(np.abs(scales - scales.mean()))),
        "negative_mode_energy": neg,
    }


def verify_chart(chart: FoliationChart, levi: bool = True, tangency: bool = True, samples=None) -> dict:
    """Run the requested verifications, sharing the leaf jets between them."""
    jets = {rec.z_prime: LeafJet.build(chart.model, rec.disk) for rec in chart.leaves}
    out = {"structure": structure_report(chart, samples)}
    if levi:
        out["levi"] = levi_verify(chart, samples, jets)
    if tangency:
        per = [tangency_verify(chart, rec.z_prime, samples, jets[rec.z_prime]) for rec in chart.leaves]
        out["tangency"] = {
            "max_residual": max(p["residual"] for p in per),
            "max_negative_mode_energy": max(p["negative_mode_energy"] for p in per),
            "max_beta_scale_spread": max(p["beta_scale_spread"] for p in per),
        }
    chart.reports.update(out)
    return out
