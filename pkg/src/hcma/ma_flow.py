"""Complex gradient flows of a plurisubharmonic exhaustion ``tau``.

Convention for real and imaginary parts of the (1,0) field ``Y``:

    xi  = (Y + conj Y) / 2      so that  dz/dt = Y / 2,      xi tau  = tau
    eta = (Y - conj Y) / (2i)   so that  dz/ds = -i Y / 2,   eta tau = 0

With it the Euclidean model ``tau = |z|^2`` has ``Y = z``, the xi-flow is
``z -> e^{t/2} z`` and the eta-flow ``z -> e^{-is/2} z`` with period
``s0 = 4 pi``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

FD_STEP = 1e-5
FD_STEP_2 = 1e-3


class ModelKind(enum.Enum):
    EUCLIDEAN = "euclidean"
    LINE_BUNDLE = "line_bundle"


class SingularHessian(ValueError):
    pass


@dataclass
class ExhaustionModel:
    """``tau`` on an open set of complex ``dim``-space.

    The Euclidean model carries exact derivatives. A line-bundle model is
    built from a potential ``u`` (``tau = exp(u)``) and differentiated by
    centred finite differences, second derivatives with one Richardson step.
    """

    kind: ModelKind
    dim: int
    u_func: Callable | None = field(default=None, repr=False)
    grad_func: Callable | None = field(default=None, repr=False)
    fd_step: float = FD_STEP
    fd_step2: float = FD_STEP_2

    @classmethod
    def euclidean(cls, dim: int = 2) -> "ExhaustionModel":
        return cls(ModelKind.EUCLIDEAN, dim)

    @classmethod
    def line_bundle(cls, u_func: Callable, dim: int = 2, grad_func: Callable | None = None) -> "ExhaustionModel":
        """``u_func(z) -> float`` with ``z`` a complex vector; ``tau = e^u``."""
        return cls(ModelKind.LINE_BUNDLE, dim, u_func, grad_func)

    # -- values ----------------------------------------------------------
    def tau(self, z) -> float:
        z = np.asarray(z, complex)
        if self.kind is ModelKind.EUCLIDEAN:
            return float(np.sum(z.real**2 + z.imag**2))
        return float(np.exp(self.u_func(z)))

    def u(self, z) -> float:
        return float(np.log(self.tau(z)))

    # -- derivatives -----------------------------------------------------
    def dbar_tau(self, z) -> np.ndarray:
        """``d tau / d zbar_j``."""
        z = np.asarray(z, complex)
        if self.kind is ModelKind.EUCLIDEAN:
            return z.copy()
        return _dbar(self.tau, z, self.fd_step)

    def levi(self, z) -> np.ndarray:
        """``H[i, j] = d^2 tau / dz_i dzbar_j``."""
        z = np.asarray(z, complex)
        if self.kind is ModelKind.EUCLIDEAN:
            return np.eye(self.dim, dtype=complex)
        return _levi_richardson(self.tau, z, self.fd_step2)


def _real_grad(f, z, h):
    n = len(z)
    gx = np.empty(n)
    gy = np.empty(n)
    for k in range(n):
        e = np.zeros(n, complex)
        e[k] = h
        gx[k] = (f(z + e) - f(z - e)) / (2 * h)
        e[k] = 1j * h
        gy[k] = (f(z + e) - f(z - e)) / (2 * h)
    return gx, gy


def _dbar(f, z, h):
    gx, gy = _real_grad(f, z, h)
    return 0.5 * (gx + 1j * gy)


def _d(f, z, h):
    gx, gy = _real_grad(f, z, h)
    return 0.5 * (gx - 1j * gy)


def _real_hessian(f, z, h):
    """Hessian of ``f`` in the real coordinates ``(x_1..x_n, y_1..y_n)``."""
    n = len(z)
    dirs = [np.eye(n, dtype=complex)[k] for k in range(n)] + [1j * np.eye(n, dtype=complex)[k] for k in range(n)]
    m = 2 * n
    H = np.empty((m, m))
    f0 = f(z)
    for a in range(m):
        ea = h * dirs[a]
        H[a, a] = (f(z + ea) - 2 * f0 + f(z - ea)) / h**2
        for b in range(a + 1, m):
            eb = h * dirs[b]
            v = (f(z + ea + eb) - f(z + ea - eb) - f(z - ea + eb) + f(z - ea - eb)) / (4 * h * h)
            H[a, b] = H[b, a] = v
    return H


def complex_hessian_from_real(H: np.ndarray) -> np.ndarray:
    """``d^2 f / dz_i dzbar_j`` from the real Hessian."""
    n = H.shape[0] // 2
    xx, yy = H[:n, :n], H[n:, n:]
    xy = H[:n, n:]
    return 0.25 * ((xx + yy) + 1j * (xy - xy.T))


def _levi_richardson(f, z, h):
    a = complex_hessian_from_real(_real_hessian(f, z, h))
    b = complex_hessian_from_real(_real_hessian(f, z, h / 2))
    return (4 * b - a) / 3


# ---------------------------------------------------------------------------
# Complex gradient and flows
# ---------------------------------------------------------------------------


@dataclass
class GradientResult:
    Y: np.ndarray
    condition: float
    residual: float  # |Y tau - tau| / tau


def complex_gradient(model: ExhaustionModel, z, max_condition: float = 1e12) -> GradientResult:
    """Solve ``sum_i tau_{i jbar} Y^i = tau_{jbar}`` for the (1,0) field ``Y``."""
    z = np.asarray(z, complex)
    H = model.levi(z)
    tau = model.tau(z)
    sv = np.linalg.svd(H, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    # finite-difference Hessians carry round-off of order eps * tau / h^2
    noise = 0.0 if model.kind is ModelKind.EUCLIDEAN else 1e3 * np.finfo(float).eps * max(tau, 1.0) / model.fd_step2**2
    if not np.isfinite(cond) or cond > max_condition or sv[-1] <= noise:
        raise SingularHessian(f"complex Hessian is singular (condition {cond:.3e}, smallest singular value {sv[-1]:.3e})")
    c = model.dbar_tau(z)
    Y = np.linalg.solve(H.T, c)
    if model.kind is ModelKind.EUCLIDEAN:
        dtau = np.conj(z)
    else:
        dtau = _d(model.tau, z, model.fd_step)
    ytau = complex(np.dot(Y, dtau))
    res = abs(ytau - tau) / tau if tau != 0 else abs(ytau)
    return GradientResult(Y, cond, float(res))


def _field(model, kind):
    if model.kind is ModelKind.EUCLIDEAN:
        if kind == "xi":
            return lambda z: 0.5 * z
        return lambda z: -0.5j * z

    def f(z):
        Y = complex_gradient(model, z).Y
        return 0.5 * Y if kind == "xi" else -0.5j * Y

    return f


def _rk4(f, z, h):
    k1 = f(z)
    k2 = f(z + 0.5 * h * k1)
    k3 = f(z + 0.5 * h * k2)
    k4 = f(z + h * k3)
    return z + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


@dataclass
class FlowTrace:
    t: np.ndarray
    points: np.ndarray  # (n_samples, dim) complex
    tau: np.ndarray
    field_kind: str
    truncated: bool = False
    period: float | None = None

    def invariant_defect(self) -> float:
        """Relative violation of ``tau(t) = e^t tau(0)`` (xi) or ``tau(t) = tau(0)`` (eta)."""
        t0 = self.tau[0]
        target = t0 * np.exp(self.t - self.t[0]) if self.field_kind == "xi" else np.full_like(self.tau, t0)
        return float(np.max(np.abs(self.tau - target) / target))

    def to_csv(self) -> str:
        dim = self.points.shape[1]
        head = ["t"] + [f"{p}{k + 1}" for k in range(dim) for p in ("re_z", "im_z")] + ["tau"]
        lines = [",".join(head)]
        for t, z, tv in zip(self.t, self.points, self.tau):
            vals = [t] + [v for zz in z for v in (zz.real, zz.imag)] + [tv]
            lines.append(",".join(repr(float(v)) for v in vals))
        return "\n".join(lines) + "\n"


def flow(model: ExhaustionModel, z, field_kind: str, t_end: float, step: float = 1e-3,
         n_out: int | None = None, in_chart: Callable | None = None, find_period: bool = False) -> FlowTrace:
    """RK4 integration of the xi- or eta-flow started at ``z``.

    ``in_chart(z) -> bool`` bounds the domain; leaving it truncates the
    trace. ``find_period`` runs :func:`detect_period` for eta traces.
    """
    if field_kind not in ("xi", "eta"):
        raise ValueError("field_kind must be 'xi' or 'eta'")
    if not step > 0:
        raise ValueError("step must be positive")
    z = np.asarray(z, complex)
    f = _field(model, field_kind)
    sign = 1.0 if t_end >= 0 else -1.0
    nsteps = max(1, int(np.ceil(abs(t_end) / step - 1e-9)))
    h = sign * abs(t_end) / nsteps
    stride = 1 if n_out is None else max(1, nsteps // max(1, n_out - 1))
    ts, pts, taus = [0.0], [z.copy()], [model.tau(z)]
    cur = z.copy()
    truncated = False
    for i in range(nsteps):
        cur = _rk4(f, cur, h)
        if in_chart is not None and not in_chart(cur):
            truncated = True
            break
        if (i + 1) % stride == 0 or i == nsteps - 1:
            ts.append((i + 1) * h)
            pts.append(cur.copy())
            taus.append(model.tau(cur))
    tr = FlowTrace(np.array(ts), np.array(pts), np.array(taus), field_kind, truncated)
    if find_period and field_kind == "eta" and not truncated:
        tr.period = detect_period(model, z, step=step)
    return tr


def flow_map(model: ExhaustionModel, z, field_kind: str, t: float, step: float = 1e-3) -> np.ndarray:
    """End point of the flow after time ``t``."""
    z = np.asarray(z, complex)
    if t == 0:
        return z.copy()
    f = _field(model, field_kind)
    n = max(1, int(np.ceil(abs(t) / step - 1e-9)))
    h = t / n
    for _ in range(n):
        z = _rk4(f, z, h)
    return z


def detect_period(model: ExhaustionModel, z, step: float = 1e-3, s_max: float = 40.0,
                  tol: float = 1e-12) -> float:
    """Return time of the eta-orbit through ``z``.

    Uses the Poincaré section through ``z`` orthogonal to the orbit
    velocity and refines the crossing by bisection.
    """
    z0 = np.asarray(z, complex)
    f = _field(model, "eta")
    v0 = f(z0)
    vr = np.concatenate([v0.real, v0.imag])
    if np.linalg.norm(vr) == 0:
        raise ValueError("fixed point of the eta-flow")

    def g(p):
        d = p - z0
        return float(np.dot(np.concatenate([d.real, d.imag]), vr))

    cur = z0.copy()
    s = 0.0
    gprev = 0.0
    left = False
    scale = np.linalg.norm(vr) * np.linalg.norm(np.concatenate([z0.real, z0.imag]))
    while s < s_max:
        nxt = _rk4(f, cur, step)
        gn = g(nxt)
        if not left and np.linalg.norm(nxt - z0) > 10 * step * np.linalg.norm(vr):
            left = True
        if left and gprev < 0 <= gn:
            lo, hi, plo = 0.0, step, cur
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                pm = _rk4(f, plo, mid)
                if g(pm) < 0:
                    lo = mid
                else:
                    hi = mid
            per = s + 0.5 * (lo + hi)
            end = _rk4(f, cur, per - s)
            if np.linalg.norm(end - z0) > 1e-4 * max(1.0, scale):
                raise ValueError("eta-orbit is not closed")
            return per
        gprev = gn
        cur = nxt
        s += step
    raise ValueError("no return to the section within s_max; orbit not periodic")


def commutation_defect(model: ExhaustionModel, z, t: float, s: float, step: float = 1e-3) -> float:
    a = flow_map(model, flow_map(model, z, "eta", s, step), "xi", t, step)
    b = flow_map(model, flow_map(model, z, "xi", t, step), "eta", s, step)
    return float(np.max(np.abs(a - b)))


def hessian_identity_defect(model: ExhaustionModel, z) -> float:
    """``max |tau_{i jbar} - e^u (u_{i jbar} + u_i u_jbar)|`` by finite differences."""
    z = np.asarray(z, complex)
    tau_h = model.levi(z)
    u = model.u
    h2 = model.fd_step2
    uh = (4 * complex_hessian_from_real(_real_hessian(u, z, h2 / 2))
          - complex_hessian_from_real(_real_hessian(u, z, h2))) / 3
    ui = _d(u, z, model.fd_step)
    uj = _dbar(u, z, model.fd_step)
    rhs = np.exp(u(z)) * (uh + np.outer(ui, uj))
    return float(np.max(np.abs(tau_h - rhs)))


# ---------------------------------------------------------------------------
# Leaf uniformization
# ---------------------------------------------------------------------------


@dataclass
class LeafUniformizer:
    """The leaf through ``base`` as a punctured disk.

    ``zeta = exp(-(2 pi / s0)(t + u0 - i s))`` labels ``phi_s(psi_t(base))``.
    """

    model: ExhaustionModel
    base: np.ndarray
    s0: float
    u0: float
    step: float = 1e-3

    def zeta(self, t, s):
        return np.exp(-(2 * np.pi / self.s0) * (np.asarray(t) + self.u0 - 1j * np.asarray(s)))

    def params(self, zeta):
        """Invert :meth:`zeta`; ``s`` is returned in ``[0, s0)``."""
        zeta = complex(zeta)
        t = -self.s0 / (2 * np.pi) * np.log(abs(zeta)) - self.u0
        s = (self.s0 / (2 * np.pi) * np.angle(zeta)) % self.s0
        return t, s

    def point(self, t, s) -> np.ndarray:
        p = flow_map(self.model, self.base, "xi", t, self.step)
        return flow_map(self.model, p, "eta", s, self.step)

    def __call__(self, zeta) -> np.ndarray:
        return self.point(*self.params(zeta))

    def modulus_defect(self, t, s) -> float:
        """``| |zeta| - exp(-2 pi u / s0) |`` at the point with parameters (t, s)."""
        p = self.point(t, s)
        return float(abs(abs(self.zeta(t, s)) - np.exp(-2 * np.pi * self.model.u(p) / self.s0)))

    def cr_residual(self, zeta, h: float = 1e-3) -> float:
        """``|dF/dzetabar|`` relative to ``|dF/dzeta|`` by centred differences."""
        zeta = complex(zeta)
        def deriv(e):
            # fourth-order centred stencil
            return (8 * (self(zeta + e * h) - self(zeta - e * h))
                    - (self(zeta + 2 * e * h) - self(zeta - 2 * e * h))) / (12 * h)

        fx = deriv(1.0)
        fy = deriv(1j)
        dbar = 0.5 * (fx + 1j * fy)
        d = 0.5 * (fx - 1j * fy)
        return float(np.linalg.norm(dbar) / max(np.linalg.norm(d), 1e-300))


def leaf_uniformize(model: ExhaustionModel, z, s0: float | None = None, step: float = 1e-3) -> LeafUniformizer:
    z = np.asarray(z, complex)
    if s0 is None:
        s0 = detect_period(model, z, step=step)
    return LeafUniformizer(model, z, float(s0), model.u(z), step)


def rotation_between(leaf: LeafUniformizer, t1: float, s1: float) -> tuple[complex, LeafUniformizer]:
    """Re-base ``leaf`` at ``phi_{s1} psi_{t1}(base)`` and return the ratio of uniformizers.

    The ratio ``zeta_new / zeta_old`` is evaluated at the new base point
    and should be a unimodular constant ``exp(-2 pi i s1 / s0)``.
    """
    nb = leaf.point(t1, s1)
    other = leaf_uniformize(leaf.model, nb, leaf.s0, leaf.step)
    ratio = complex(other.zeta(0.0, 0.0) / leaf.zeta(t1, s1))
    return ratio, other


# ---------------------------------------------------------------------------
# Growth test
# ---------------------------------------------------------------------------


@dataclass
class GrowthResult:
    passes: bool
    C_estimate: float
    tail_slope: float


def growth_test(model: ExhaustionModel, points, values, N: int, slope_tol: float = 0.05,
                min_ceiling: float = 1e3) -> GrowthResult:
    """Decide whether ``|f| <= C (1 + tau)^N`` on the samples.

    The log-log slope of the running maximum of ``|f| / (1 + tau)^N``
    over the top decade of ``tau`` must not exceed ``slope_tol``.
    """
    pts = np.asarray(points, complex)
    vals = np.abs(np.asarray(values, complex))
    taus = np.array([model.tau(p) for p in pts])
    if taus.max() < min_ceiling:
        raise ValueError(f"samples must reach tau >= {min_ceiling}")
    order = np.argsort(taus)
    taus, vals = taus[order], vals[order]
    with np.errstate(over="ignore", divide="ignore"):
        logq = np.log(vals) - N * np.log1p(taus)
    logq = np.where(np.isfinite(logq), logq, np.where(vals == 0, -np.inf, np.inf))
    run = np.maximum.accumulate(logq)
    tail = taus >= taus.max() / 10
    x = np.log1p(taus[tail])
    y = run[tail]
    if not np.all(np.isfinite(y)):
        slope = np.inf if np.any(y == np.inf) else 0.0
    elif np.ptp(x) == 0:
        slope = 0.0
    else:
        slope = float(np.polyfit(x, y, 1)[0])
    C = float(np.exp(run[-1])) if np.isfinite(run[-1]) else np.inf
    return GrowthResult(bool(slope <= slope_tol and np.isfinite(C)), C, slope)
