"""Holomorphic disks attached to ``r = 1`` and the distortion functional.

A disk is ``f(zeta) = (f1(zeta), fn(zeta))`` with ``f1(0) = z'`` and
``fn = zeta (1 + w)``, ``w`` holomorphic with ``Im w(0) = 0``. Base
variations ``df1`` live in ``H0`` (modes ``k >= 1``). The free parameter of
the extremal problem is ``x = f1 - z'``; ``fn`` follows from the boundary
condition.

Gradients are taken for the real pairing

    <h1, h2> = (1 / 4 pi) int Re(h1 conj(h2)) dtheta = (1/2) Re sum_k h1_k conj(h2_k),

for which ``grad E = -2 sec(theta0) S0(conj(r_1 / rho))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from .model import HermitianModel
from .spectral import (
    RHFactorization,
    WindingError,
    circle_grid,
    coeffs_to_grid,
    grid_to_coeffs,
    hilbert_transform,
    negative_mode_energy,
    rh_factorize,
    szego_project,
    truncate_real,
    winding_number,
)

DEFAULT_MODES = 64
POINT_TOL = 1e-13


class ContractionError(RuntimeError):
    """The boundary fixed-point map is not contracting."""


class ConvergenceError(RuntimeError):
    def __init__(self, msg, history=None, last=None):
        super().__init__(msg)
        self.history = history or []
        self.last = last


class EmbeddingError(RuntimeError):
    pass


def default_grid(n_modes: int) -> int:
    m = 16
    while m < 4 * n_modes:
        m *= 2
    return m


def pairing(a, b) -> float:
    """``(1/2) Re sum a_k conj(b_k)`` on coefficient arrays."""
    return 0.5 * float(np.real(np.vdot(b, a)))


# ---------------------------------------------------------------------------
# Disk representation
# ---------------------------------------------------------------------------


@dataclass
class BoundaryDisk:
    f1: np.ndarray  # modes 0..N; f1[0] = z'
    fn: np.ndarray  # modes 0..N; fn[0] = 0
    lam: complex = 0.0
    n_grid: int | None = None

    def __post_init__(self):
        self.f1 = np.asarray(self.f1, complex)
        self.fn = np.asarray(self.fn, complex)
        n = max(len(self.f1), len(self.fn))
        self.f1 = np.pad(self.f1, (0, n - len(self.f1)))
        self.fn = np.pad(self.fn, (0, n - len(self.fn)))
        if self.n_grid is None:
            self.n_grid = default_grid(n - 1)

    @property
    def n_modes(self) -> int:
        return len(self.f1) - 1

    @property
    def z_prime(self) -> complex:
        return complex(self.f1[0])

    @classmethod
    def model_extremal(cls, model: HermitianModel, z_prime: complex, n_modes: int = DEFAULT_MODES,
                       lam: complex = 0.0) -> "BoundaryDisk":
        """``(z', zeta / h(z')^{1/2})``, the extremal at ``lam = 0``."""
        f1 = np.zeros(n_modes + 1, complex)
        fn = np.zeros(n_modes + 1, complex)
        f1[0] = z_prime
        fn[1] = 1.0 / np.sqrt(model.h_base(z_prime))
        return cls(f1, fn, lam)

    def boundary(self, m: int | None = None):
        m = self.n_grid if m is None else m
        return coeffs_to_grid(self.f1, m), coeffs_to_grid(self.fn, m)

    def evaluate(self, zeta):
        zeta = np.asarray(zeta, complex)
        P = np.polynomial.polynomial.polyval
        return P(zeta, self.f1), P(zeta, self.fn)

    def derivative(self, zeta, order: int = 1):
        zeta = np.asarray(zeta, complex)
        P = np.polynomial.polynomial
        return P.polyval(zeta, P.polyder(self.f1, order)), P.polyval(zeta, P.polyder(self.fn, order))

    def rotated(self, phi: float) -> "BoundaryDisk":
        """The disk ``zeta -> f(e^{i phi} zeta)``."""
        k = np.arange(len(self.f1))
        rot = np.exp(1j * phi * k)
        return BoundaryDisk(self.f1 * rot, self.fn * rot, self.lam, self.n_grid)

    def normalized(self) -> "BoundaryDisk":
        """Rotate so that ``fn'(0)`` is real and positive."""
        return self.rotated(-np.angle(self.fn[1]))

    def tail_energy(self, frac: float = 0.25) -> float:
        """Energy in the last ``frac`` of the modes relative to the total."""
        n = len(self.f1)
        k0 = int(np.floor(n * (1 - frac)))
        tot = np.sum(np.abs(self.f1[1:]) ** 2) + np.sum(np.abs(self.fn) ** 2)
        tail = np.sum(np.abs(self.f1[k0:]) ** 2) + np.sum(np.abs(self.fn[k0:]) ** 2)
        return float(tail / tot) if tot > 0 else 0.0

    def boundary_residual(self, model: HermitianModel, m: int | None = None) -> float:
        z1, t = self.boundary(m)
        return float(np.max(np.abs(model.r(z1, t, self.lam) - 1.0)))

    def to_dict(self) -> dict:
        return {
            "f1": [[c.real, c.imag] for c in self.f1],
            "fn": [[c.real, c.imag] for c in self.fn],
        }

    @classmethod
    def from_dict(cls, d: dict, lam: complex) -> "BoundaryDisk":
        f1 = np.array([a + 1j * b for a, b in d["f1"]])
        fn = np.array([a + 1j * b for a, b in d["fn"]])
        return cls(f1, fn, lam)


def distortion_energy(disk: BoundaryDisk) -> float:
    """``E(f) = fn'(0)``, the real part of the first mode of ``fn``."""
    if abs(disk.fn[0]) > 1e-12:
        raise ValueError("fn(0) must vanish")
    return float(disk.fn[1].real)


# ---------------------------------------------------------------------------
# Boundary fixed point
# ---------------------------------------------------------------------------


@dataclass
class BoundarySolve:
    w: np.ndarray  # modes 0..N of w
    v: np.ndarray  # grid values of Im w (warm start)
    iterations: int
    residual: float
    contraction: float  # observed increment ratio
    dF_estimate: float  # sup |Im(zeta r_t) / Re(zeta r_t)|
    history: list = field(default_factory=list)


def solve_boundary(model: HermitianModel, f1_coeffs, lam: complex = 0.0, n_modes: int | None = None,
                   n_grid: int | None = None, v0=None, tol: float = 1e-12,
                   max_iter: int = 200) -> BoundarySolve:
    """Find ``w`` with ``r(f1, zeta (1 + w), lam) = 1`` on the circle.

    Iterates ``v <- T(P_N G(v))`` where ``G`` solves the boundary equation
    pointwise for ``u = Re w`` by Newton's method.
    """
    f1_coeffs = np.asarray(f1_coeffs, complex)
    n_modes = len(f1_coeffs) - 1 if n_modes is None else n_modes
    m = default_grid(n_modes) if n_grid is None else n_grid
    zeta = circle_grid(m)
    z1 = np.ascontiguousarray(coeffs_to_grid(f1_coeffs, m))
    v = np.zeros(m) if v0 is None else np.array(v0, float)
    u = np.zeros(m)
    kind, coup = model.kind, float(model.coupling)
    lam = complex(lam)
    history = []
    prev_inc = None
    ratio = 0.0
    dF = 0.0
    for it in range(1, max_iter + 1):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            u, _ = kernels.boundary_newton(kind, coup, lam, z1, zeta, v, u, POINT_TOL, 50)
        u = np.asarray(u)
        if not np.all(np.isfinite(u)):
            raise ConvergenceError("pointwise boundary solve diverged (dr/du vanished)", history)
        uN = truncate_real(u, n_modes)
        v_new = hilbert_transform(uN)
        inc = float(np.max(np.abs(v_new - v)))
        v = v_new
        if prev_inc is not None and prev_inc > 1e-13:
            ratio = inc / prev_inc
        history.append(inc)
        if it == 1:
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                t = zeta * (1 + u + 1j * v)
                _, _, rt = model.r_derivs(z1, t, lam)
                zr = zeta * rt
                dF = float(np.max(np.abs(zr.imag / zr.real)))
            if not dF < 1.0:
                raise ContractionError(f"contraction estimate {dF:.3f} >= 1")
        if it >= 4 and ratio >= 1.0 and inc > tol:
            raise ContractionError(f"fixed-point increments not contracting (ratio {ratio:.3f})")
        prev_inc = inc
        if inc <= tol:
            break
    else:
        raise ConvergenceError(f"no convergence in {max_iter} iterations", history)
    # w = uN + i T(uN): modes 0..N
    cu = np.fft.fft(uN) / m
    w = np.zeros(n_modes + 1, complex)
    w[0] = cu[0].real
    w[1:] = 2 * cu[1: n_modes + 1]
    fn = np.zeros(n_modes + 1, complex)
    fn[1:] = w[:-1]
    fn[1] += 1.0
    # residual uses the truncated disk; the last mode of w falls off fn at
    # order N, so also include it via the grid form
    t = zeta * (1 + coeffs_to_grid(w, m))
    res = float(np.max(np.abs(model.r(z1, t, lam) - 1.0)))
    return BoundarySolve(w, v, it, res, ratio, dF, history)


def disk_from_solve(f1_coeffs, sol: BoundarySolve, lam, n_grid=None) -> BoundaryDisk:
    """Assemble ``fn = zeta (1 + w)`` (modes ``0..N+1``) and pad ``f1``."""
    w = sol.w
    fn = np.zeros(len(w) + 1, complex)
    fn[1] = 1.0 + w[0]
    fn[2:] = w[1:]
    f1 = np.zeros(len(fn), complex)
    f1[: len(f1_coeffs)] = f1_coeffs
    return BoundaryDisk(f1, fn, lam, n_grid)


# ---------------------------------------------------------------------------
# RH factor, tangent map and gradient
# ---------------------------------------------------------------------------


def boundary_data(model: HermitianModel, disk: BoundaryDisk, m: int | None = None):
    """Grid values ``(zeta, z1, t, r_1, r_t)`` along the boundary of ``disk``."""
    m = disk.n_grid if m is None else m
    zeta = circle_grid(m)
    z1, t = disk.boundary(m)
    _, r1, rt = model.r_derivs(z1, t, disk.lam)
    return zeta, z1, t, r1, rt


def rh_of_disk(model: HermitianModel, disk: BoundaryDisk, m: int | None = None) -> RHFactorization:
    zeta, _, _, _, rt = boundary_data(model, disk, m)
    return rh_factorize(zeta * rt)


def _check_theta(fac: RHFactorization):
    if abs(fac.theta0) >= np.pi / 2 - 0.1:
        raise ValueError(f"theta0 = {fac.theta0:.3f} outside the perturbative regime")


@dataclass
class TangentResult:
    dfn: np.ndarray  # modes 0..M/2-1
    residual: float
    theta0: float


def tangent_delta_fn(model: HermitianModel, disk: BoundaryDisk, delta_base, m: int | None = None) -> TangentResult:
    """Complete a base variation ``df1 in H0`` to a tangent vector.

    ``dfn = zeta g^{-1} q`` with ``q = -P - i T(P) + i b``,
    ``P = Re(r_1 df1) / rho``, ``b = tan(theta0) a``, ``a = -mean(P)``.
    """
    m = disk.n_grid if m is None else m
    zeta, _, _, r1, rt = boundary_data(model, disk, m)
    fac = rh_factorize(zeta * rt)
    _check_theta(fac)
    d1 = np.asarray(delta_base, complex)
    if abs(d1[0]) > 1e-14:
        raise ValueError("base variation must vanish at 0")
    d1g = coeffs_to_grid(d1, m)
    P = np.real(r1 * d1g) / fac.rho_boundary
    a = -P.mean()
    b = np.tan(fac.theta0) * a
    q = -P - 1j * hilbert_transform(P) + 1j * b
    dfn_g = zeta * np.exp(-fac.log_g) * q
    res = float(np.max(np.abs(2 * np.real(rt * dfn_g) + 2 * np.real(r1 * d1g))))
    c = np.fft.fft(dfn_g) / m
    return TangentResult(c[: m // 2], res, fac.theta0)


@dataclass
class GradientResult:
    grad: np.ndarray  # modes 0..N (mode 0 is 0)
    norm: float
    theta0: float
    negative_mode_energy: float
    full: np.ndarray  # grid values of the untruncated gradient


def grad_energy(model: HermitianModel, disk: BoundaryDisk, m: int | None = None,
                n_modes: int | None = None) -> GradientResult:
    """``grad E = -2 sec(theta0) S0(conj(r_1 / rho))`` truncated to the disk's modes."""
    m = disk.n_grid if m is None else m
    n_modes = disk.n_modes if n_modes is None else n_modes
    zeta, _, _, r1, rt = boundary_data(model, disk, m)
    fac = rh_factorize(zeta * rt)
    _check_theta(fac)
    ratio = r1 / fac.rho_boundary
    g_full = -2.0 / np.cos(fac.theta0) * szego_project(np.conj(ratio))
    c = np.fft.fft(g_full) / m
    grad = np.zeros(n_modes + 1, complex)
    grad[1:] = c[1: n_modes + 1]
    norm = float(np.sqrt(np.sum(np.abs(grad) ** 2)))
    return GradientResult(grad, norm, fac.theta0, negative_mode_energy(ratio), g_full)


# ---------------------------------------------------------------------------
# Robin constant
# ---------------------------------------------------------------------------


@dataclass
class RobinResult:
    formula: float
    extrapolated: float

    @property
    def difference(self) -> float:
        return abs(self.formula - self.extrapolated)


def robin_constant(model: HermitianModel, disk: BoundaryDisk, radii=(0.05, 0.025, 0.0125),
                   n_angles: int = 64) -> RobinResult:
    """``R(f) = v_f(0)`` with ``v_f = f^* log(1/r) - log(1/|zeta|^2)``.

    Computed from the closed form ``-log h(z', 0) - log |fn'(0)|^2`` and,
    independently, by Richardson extrapolation in ``eps^2`` of the circle
    means of ``v_f`` at the given radii.
    """
    if abs(disk.fn[1]) < 1e-14:
        raise ValueError("fn'(0) vanishes; disk is not transverse to the divisor")
    formula = -np.log(model.h_base(disk.z_prime)) - 2 * np.log(abs(disk.fn[1]))
    P = np.polynomial.polynomial.polyval
    fn_over_zeta = disk.fn[1:]
    means = []
    th = 2 * np.pi * np.arange(n_angles) / n_angles
    for eps in radii:
        zz = eps * np.exp(1j * th)
        z1 = P(zz, disk.f1)
        t = P(zz, disk.fn)
        q = P(zz, fn_over_zeta)
        hv = np.real(model.h(z1, disk.lam * t))
        vf = -np.log(hv) - np.log(np.abs(q) ** 2)
        means.append(vf.mean())
    # Richardson table in eps^2
    x = np.asarray(radii, float) ** 2
    table = list(means)
    for level in range(1, len(table)):
        table = [(x[i] * table[i + 1] - x[i + level] * table[i]) / (x[i] - x[i + level])
                 for i in range(len(table) - 1)]
    return RobinResult(float(formula), float(table[0]))


# ---------------------------------------------------------------------------
# Embeddedness
# ---------------------------------------------------------------------------


def _segments_cross(p, q):
    """Count proper intersections between the closed polygons' non-adjacent edges."""
    a = p
    b = np.roll(p, -1)
    n = len(p)
    ax, ay = a.real, a.imag
    bx, by = b.real, b.imag

    def orient(px, py, qx, qy, rx, ry):
        return (qx - px) * (ry - py) - (qy - py) * (rx - px)

    count = 0
    for i in range(n):
        j = np.arange(i + 2, n)
        if i == 0:
            j = j[j != n - 1]
        if len(j) == 0:
            continue
        o1 = orient(ax[i], ay[i], bx[i], by[i], ax[j], ay[j])
        o2 = orient(ax[i], ay[i], bx[i], by[i], bx[j], by[j])
        o3 = orient(ax[j], ay[j], bx[j], by[j], ax[i], ay[i])
        o4 = orient(ax[j], ay[j], bx[j], by[j], bx[i], by[i])
        count += int(np.sum((o1 * o2 < 0) & (o3 * o4 < 0)))
    return count


def embedding_check(disk: BoundaryDisk, m: int | None = None) -> dict:
    """Self-intersection scan of the boundary of ``fn`` and its winding number."""
    m = disk.n_grid if m is None else m
    _, t = disk.boundary(m)
    wn = winding_number(t)
    crossings = _segments_cross(t, None)
    return {"winding": wn, "crossings": crossings, "embedded": wn == 1 and crossings == 0}


# ---------------------------------------------------------------------------
# Energy as a function of the base variation
# ---------------------------------------------------------------------------


class DiskProblem:
    """``E`` and ``grad E`` as functions of ``x = f1 - z'`` (modes 1..N)."""

    def __init__(self, model: HermitianModel, z_prime: complex, lam: complex = 0.0,
                 n_modes: int = DEFAULT_MODES, n_grid: int | None = None, tol: float = 1e-14):
        self.model = model
        self.z_prime = complex(z_prime)
        self.lam = complex(lam)
        self.n_modes = n_modes
        self.n_grid = default_grid(n_modes + 1) if n_grid is None else n_grid
        self.tol = tol
        self._v = None

    def f1_coeffs(self, x):
        f1 = np.zeros(self.n_modes + 1, complex)
        f1[0] = self.z_prime
        f1[1:] = x[1: self.n_modes + 1]
        return f1

    def disk(self, x, warm: bool = True) -> tuple[BoundaryDisk, BoundarySolve]:
        f1 = self.f1_coeffs(x)
        sol = solve_boundary(self.model, f1, self.lam, self.n_modes, self.n_grid,
                             v0=self._v if warm else None, tol=self.tol)
        self._v = sol.v
        return disk_from_solve(f1, sol, self.lam, self.n_grid), sol

    def energy(self, x) -> float:
        return distortion_energy(self.disk(x)[0])

    def gradient(self, x) -> GradientResult:
        d, _ = self.disk(x)
        return grad_energy(self.model, d, n_modes=self.n_modes)

    def x_of(self, disk: BoundaryDisk) -> np.ndarray:
        x = np.zeros(self.n_modes + 1, complex)
        k = min(len(disk.f1), self.n_modes + 1)
        x[1:k] = disk.f1[1:k]
        return x


@dataclass
class NewtonResult:
    disk: BoundaryDisk
    E: float
    grad_norm: float
    residual: float
    iterations: int
    embedded: bool
    history: list
    theta0: float = 0.0
    tail_energy: float = 0.0
    contraction: float = 0.0


def newton_disk(model: HermitianModel, z_prime: complex, lam: complex = 0.0, f_init: BoundaryDisk | None = None,
                n_modes: int = DEFAULT_MODES, n_grid: int | None = None, tol: float = 1e-10,
                max_iter: int = 60, curvature: float | None = None) -> NewtonResult:
    """Critical point of ``E`` among disks through ``z'`` at parameter ``lam``.

    Quasi-Newton ``x <- x - grad/d`` with a scalar ``d`` measured once by a
    directional difference of the gradient (``d = +-2`` at the model
    disk), with backtracking on ``|grad E|``.
    """
    prob = DiskProblem(model, z_prime, lam, n_modes, n_grid)
    if f_init is None:
        f_init = BoundaryDisk.model_extremal(model, z_prime, n_modes, lam)
    f_init = f_init.normalized()
    x = prob.x_of(f_init)
    g = prob.gradient(x)
    history = [g.norm]
    d = curvature
    it = 0
    if d is None:
        s = g.grad if g.norm > 1e-12 else np.eye(1, n_modes + 1, 1, dtype=complex)[0]
        s = s / np.sqrt(pairing(s, s))
        eps = 1e-5
        gp = prob.gradient(x + eps * s).grad
        gm = prob.gradient(x - eps * s).grad
        d = pairing((gp - gm) / (2 * eps), s)
        if not abs(d) > 0.2:
            d = 2.0
    while g.norm > tol and it < max_iter:
        it += 1
        step = 1.0
        for _ in range(30):
            xn = x - step * g.grad / d
            try:
                gn = prob.gradient(xn)
            except (ContractionError, ConvergenceError, WindingError, ValueError):
                step *= 0.5
                continue
            if gn.norm < g.norm or gn.norm <= tol:
                break
            step *= 0.5
        else:
            raise ConvergenceError("step rejection cascade", history, x)
        x, g = xn, gn
        history.append(g.norm)
    if g.norm > tol:
        raise ConvergenceError(f"gradient {g.norm:.3e} above tolerance after {it} iterations", history, x)
    disk, sol = prob.disk(x)
    disk = disk.normalized()
    emb = embedding_check(disk)
    if not emb["embedded"]:
        raise EmbeddingError(f"disk is not embedded: {emb}")
    return NewtonResult(disk, distortion_energy(disk), g.norm, disk.boundary_residual(model), it,
                        True, history, g.theta0, disk.tail_energy(), sol.contraction)


def continuation(model: HermitianModel, z_prime: complex, lam_target: complex, step: float = 0.01,
                 n_modes: int = DEFAULT_MODES, tol: float = 1e-10, f_init: BoundaryDisk | None = None):
    """Follow the extremal from ``lam = 0`` to ``lam_target`` in steps of size ``step``."""
    lam_target = complex(lam_target)
    n = max(1, int(np.ceil(abs(lam_target) / step - 1e-9)))
    lams = [lam_target * k / n for k in range(n + 1)] if lam_target != 0 else [0j]
    disk = f_init
    results = []
    for lam in lams:
        res = newton_disk(model, z_prime, lam, disk, n_modes=n_modes, tol=tol)
        disk = BoundaryDisk(res.disk.f1[: n_modes + 1], res.disk.fn[: n_modes + 1], lam)
        results.append(res)
    return results[-1], results


# ---------------------------------------------------------------------------
# Second variation
# ---------------------------------------------------------------------------


@dataclass
class SecondVariation:
    matrix: np.ndarray  # real, basis (zeta^k, i zeta^k) for k = 1..n_basis
    complex_block: np.ndarray  # n_basis x n_basis entries on the zeta^k directions

    def deviation(self, target: float = 2.0) -> float:
        return float(np.max(np.abs(self.matrix - target * np.eye(len(self.matrix)))))


def second_variation_check(model: HermitianModel, n_basis: int = 4, eps: float = 1e-4,
                           n_modes: int = 16, n_grid: int | None = None, z_prime: complex = 0.0,
                           lam: complex = 0.0) -> SecondVariation:
    """Central-difference Jacobian of ``grad E`` at the model disk."""
    prob = DiskProblem(model, z_prime, lam, n_modes, n_grid)
    x0 = prob.x_of(BoundaryDisk.model_extremal(model, z_prime, n_modes))
    basis = []
    for k in range(1, n_basis + 1):
        for c in (1.0, 1j):
            e = np.zeros(n_modes + 1, complex)
            e[k] = c
            basis.append(e)
    nb = len(basis)
    J = np.zeros((nb, nb))
    for j, e in enumerate(basis):
        dg = (prob.gradient(x0 + eps * e).grad - prob.gradient(x0 - eps * e).grad) / (2 * eps)
        for i, b in enumerate(basis):
            J[i, j] = pairing(dg, b) / pairing(b, b)
    return SecondVariation(J, J[::2, ::2].copy())
