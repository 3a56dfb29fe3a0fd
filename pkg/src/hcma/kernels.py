"""Hot inner loops, each in a numba-compilable loop form and a numpy form.

The public names at the bottom of the module (``geodesic_rev``,
``jacobi_strip``, ``jacobi_path``, ``boundary_newton``) are bound to one of
the two implementations according to :data:`hcma._accel.USE_NUMBA`. Both
variants are importable directly (``*_loop`` / ``*_numpy``) for testing and
benchmarking.
"""
from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# Surface-of-revolution geodesics
#
# Metric (1 + h(cos r))^2 dr^2 + sin(r)^2 dth^2 with h(x) = eps * x * (1 - x^2).
# In the variable x = cos r, with Clairaut constant c = sin(r)^2 th', unit
# speed reads m(x)^2 x'^2 + c^2 = 1 - x^2 and the geodesic equations become
#   x''  = -x / m^2 - (1 - x^2 - c^2) m'(x) / m^3,     m = 1 + h(x)
#   th'  = c / (1 - x^2)
# which, unlike the r-form, stay regular when the geodesic passes near a pole.
# State is (x, x', th).
# ---------------------------------------------------------------------------


def _rev_rhs(eps, c, x, p):
    m = 1.0 + eps * x * (1.0 - x * x)
    mp = eps * (1.0 - 3.0 * x * x)
    s2 = 1.0 - x * x
    thp = 0.0 if c == 0.0 else c / s2
    return thp, -x / (m * m) - (s2 - c * c) * mp / (m * m * m)


_rev_rhs = njit(_rev_rhs)


def _geodesic_rev_loop(eps, c, x0, th0, p0, step, nsteps, stride):
    nb = c.shape[0]
    nsamp = nsteps // stride + 1
    out = np.empty((nb, nsamp, 3))
    for b in range(nb):
        x = x0[b]
        th = th0[b]
        p = p0[b]
        cb = c[b]
        out[b, 0, 0] = x
        out[b, 0, 1] = th
        out[b, 0, 2] = p
        j = 1
        for i in range(nsteps):
            t1, a1 = _rev_rhs(eps, cb, x, p)
            p2 = p + 0.5 * step * a1
            t2, a2 = _rev_rhs(eps, cb, x + 0.5 * step * p, p2)
            p3 = p + 0.5 * step * a2
            t3, a3 = _rev_rhs(eps, cb, x + 0.5 * step * p2, p3)
            p4 = p + step * a3
            t4, a4 = _rev_rhs(eps, cb, x + step * p3, p4)
            x += step / 6.0 * (p + 2.0 * p2 + 2.0 * p3 + p4)
            th += step / 6.0 * (t1 + 2.0 * t2 + 2.0 * t3 + t4)
            p += step / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            if (i + 1) % stride == 0:
                out[b, j, 0] = x
                out[b, j, 1] = th
                out[b, j, 2] = p
                j += 1
    return out


def _rev_rhs_np(eps, c, x, p):
    m = 1.0 + eps * x * (1.0 - x * x)
    mp = eps * (1.0 - 3.0 * x * x)
    s2 = 1.0 - x * x
    thp = np.where(c != 0.0, c / np.where(c != 0.0, s2, 1.0), 0.0)
    return thp, -x / (m * m) - (s2 - c * c) * mp / (m * m * m)


def geodesic_rev_numpy(eps, c, x0, th0, p0, step, nsteps, stride):
    """Batch RK4 over geodesics, vectorised across the batch axis."""
    c = np.asarray(c, float)
    x = np.array(x0, float)
    th = np.array(th0, float)
    p = np.array(p0, float)
    nsamp = nsteps // stride + 1
    out = np.empty((c.shape[0], nsamp, 3))
    out[:, 0] = np.stack([x, th, p], axis=-1)
    j = 1
    h = step
    for i in range(nsteps):
        t1, a1 = _rev_rhs_np(eps, c, x, p)
        p2 = p + 0.5 * h * a1
        t2, a2 = _rev_rhs_np(eps, c, x + 0.5 * h * p, p2)
        p3 = p + 0.5 * h * a2
        t3, a3 = _rev_rhs_np(eps, c, x + 0.5 * h * p2, p3)
        p4 = p + h * a3
        t4, a4 = _rev_rhs_np(eps, c, x + h * p3, p4)
        x = x + h / 6.0 * (p + 2.0 * p2 + 2.0 * p3 + p4)
        th = th + h / 6.0 * (t1 + 2.0 * t2 + 2.0 * t3 + t4)
        p = p + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        if (i + 1) % stride == 0:
            out[:, j, 0] = x
            out[:, j, 1] = th
            out[:, j, 2] = p
            j += 1
    return out


# ---------------------------------------------------------------------------
# Complexified Jacobi equation  Y'' + K(z) Y = 0,  K(z) = sum_k c_k e^{ikz}
# State vector (Y, Y', Z, Z'). ``cfull`` holds c_{-K..K}.
# ---------------------------------------------------------------------------


def _kz(cfull, z):
    nk = (cfull.shape[0] - 1) // 2
    acc = cfull[nk] + 0j
    if nk == 0:
        return acc
    ez = np.exp(1j * z)
    emz = 1.0 / ez
    pp = 1.0 + 0j
    pm = 1.0 + 0j
    for k in range(1, nk + 1):
        pp *= ez
        pm *= emz
        acc += cfull[nk + k] * pp + cfull[nk - k] * pm
    return acc


def _jac_step(cfull, z, s, dz):
    y, yp, w, wp = s[0], s[1], s[2], s[3]
    k0 = _kz(cfull, z)
    k1y, k1yp, k1w, k1wp = yp, -k0 * y, wp, -k0 * w
    km = _kz(cfull, z + 0.5 * dz)
    y2 = y + 0.5 * dz * k1y
    w2 = w + 0.5 * dz * k1w
    k2y, k2yp, k2w, k2wp = yp + 0.5 * dz * k1yp, -km * y2, wp + 0.5 * dz * k1wp, -km * w2
    y3 = y + 0.5 * dz * k2y
    w3 = w + 0.5 * dz * k2w
    k3y, k3yp, k3w, k3wp = yp + 0.5 * dz * k2yp, -km * y3, wp + 0.5 * dz * k2wp, -km * w3
    k1e = _kz(cfull, z + dz)
    y4 = y + dz * k3y
    w4 = w + dz * k3w
    k4y, k4yp, k4w, k4wp = yp + dz * k3yp, -k1e * y4, wp + dz * k3wp, -k1e * w4
    s[0] = y + dz / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
    s[1] = yp + dz / 6.0 * (k1yp + 2.0 * k2yp + 2.0 * k3yp + k4yp)
    s[2] = w + dz / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
    s[3] = wp + dz / 6.0 * (k1wp + 2.0 * k2wp + 2.0 * k3wp + k4wp)


def _march(cfull, z0, z1, s, step):
    d = z1 - z0
    length = abs(d)
    if length == 0.0:
        return
    n = int(np.ceil(length / step - 1e-12))
    if n < 1:
        n = 1
    dz = d / n
    z = z0
    for i in range(n):
        _jac_step(cfull, z, s, dz)
        z = z0 + (i + 1) * dz


_kz = njit(_kz)
_jac_step = njit(_jac_step)
_march = njit(_march)


def _jacobi_strip_loop(cfull, sigmas, taus, step):
    ns = sigmas.shape[0]
    nt = taus.shape[0]
    out = np.empty((4, ns, nt), dtype=np.complex128)
    base = np.zeros(4, dtype=np.complex128)
    base[0] = 1.0
    base[3] = 1.0
    sig_prev = 0.0
    for i in range(ns):
        _march(cfull, sig_prev + 0j, sigmas[i] + 0j, base, step)
        sig_prev = sigmas[i]
        s = base.copy()
        tprev = 0.0
        for j in range(nt):
            _march(cfull, sigmas[i] + 1j * tprev, sigmas[i] + 1j * taus[j], s, step)
            tprev = taus[j]
            for q in range(4):
                out[q, i, j] = s[q]
    return out


def _jacobi_path_loop(cfull, waypoints, state0, step):
    s = state0.copy()
    out = np.empty((waypoints.shape[0], 4), dtype=np.complex128)
    for q in range(4):
        out[0, q] = s[q]
    for i in range(1, waypoints.shape[0]):
        _march(cfull, waypoints[i - 1], waypoints[i], s, step)
        for q in range(4):
            out[i, q] = s[q]
    return out


def _kz_np(cfull, z):
    nk = (cfull.shape[0] - 1) // 2
    z = np.asarray(z, dtype=np.complex128)
    if nk == 0:
        return np.full(z.shape, cfull[0], dtype=np.complex128)
    k = np.arange(-nk, nk + 1)
    return np.exp(1j * np.multiply.outer(z, k)) @ cfull


def _jac_step_np(cfull, z, s, dz):
    y, yp, w, wp = s
    k0 = _kz_np(cfull, z)
    km = _kz_np(cfull, z + 0.5 * dz)
    ke = _kz_np(cfull, z + dz)
    k1 = (yp, -k0 * y, wp, -k0 * w)
    s2 = [s[q] + 0.5 * dz * k1[q] for q in range(4)]
    k2 = (s2[1], -km * s2[0], s2[3], -km * s2[2])
    s3 = [s[q] + 0.5 * dz * k2[q] for q in range(4)]
    k3 = (s3[1], -km * s3[0], s3[3], -km * s3[2])
    s4 = [s[q] + dz * k3[q] for q in range(4)]
    k4 = (s4[1], -ke * s4[0], s4[3], -ke * s4[2])
    return [s[q] + dz / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]) for q in range(4)]


def _march_np(cfull, z0, z1, s, step):
    d = z1 - z0
    length = abs(d)
    if length == 0.0:
        return s
    n = max(1, int(np.ceil(length / step - 1e-12)))
    dz = d / n
    for i in range(n):
        s = _jac_step_np(cfull, z0 + i * dz, s, dz)
    return s


def jacobi_strip_numpy(cfull, sigmas, taus, step):
    """Numpy variant: real-axis march is sequential, vertical lines are batched."""
    sigmas = np.asarray(sigmas, float)
    taus = np.asarray(taus, float)
    ns, nt = sigmas.shape[0], taus.shape[0]
    s = [np.array(1.0 + 0j), np.array(0j), np.array(0j), np.array(1.0 + 0j)]
    starts = np.empty((4, ns), dtype=np.complex128)
    prev = 0.0
    for i in range(ns):
        s = _march_np(cfull, prev + 0j, sigmas[i] + 0j, s, step)
        prev = sigmas[i]
        for q in range(4):
            starts[q, i] = s[q]
    out = np.empty((4, ns, nt), dtype=np.complex128)
    vs = [starts[q].copy() for q in range(4)]
    tprev = 0.0
    for j in range(nt):
        d = taus[j] - tprev
        if d != 0.0:
            n = max(1, int(np.ceil(abs(d) / step - 1e-12)))
            dt = d / n
            for i in range(n):
                z = sigmas + 1j * (tprev + i * dt)
                vs = _jac_step_np(cfull, z, vs, 1j * dt)
        tprev = taus[j]
        for q in range(4):
            out[q, :, j] = vs[q]
    return out


def jacobi_path_numpy(cfull, waypoints, state0, step):
    s = [np.array(v) for v in state0]
    out = np.empty((len(waypoints), 4), dtype=np.complex128)
    out[0] = state0
    for i in range(1, len(waypoints)):
        s = _march_np(cfull, waypoints[i - 1], waypoints[i], s, step)
        out[i] = [complex(v) for v in s]
    return out


# ---------------------------------------------------------------------------
# Hermitian model h(z1, z2) and the pointwise boundary root-finder.
#
# kind 0: h = 1
# kind 1: h = 1 + S
# kind 2: h = 1 / (1 + S)
# all kinds add coupling * |z1|^2 * 2 Re(conj(z1) z2); S = |z1|^2 + |z2|^2.
# The functions are written elementwise so they work for scalars (numba)
# and for numpy arrays alike.
# ---------------------------------------------------------------------------


def model_h(kind, coupling, z1, z2):
    s = z1.real**2 + z1.imag**2 + z2.real**2 + z2.imag**2
    if kind == 0:
        base = 1.0 + 0.0 * s
    elif kind == 1:
        base = 1.0 + s
    else:
        base = 1.0 / (1.0 + s)
    a1 = z1.real**2 + z1.imag**2
    q = 2.0 * a1 * (z1.real * z2.real + z1.imag * z2.imag)
    return base + coupling * q


def model_dh(kind, coupling, z1, z2):
    """Holomorphic derivatives (dh/dz1, dh/dz2)."""
    s = z1.real**2 + z1.imag**2 + z2.real**2 + z2.imag**2
    if kind == 0:
        bp = 0.0 * s
    elif kind == 1:
        bp = 1.0 + 0.0 * s
    else:
        bp = -1.0 / (1.0 + s) ** 2
    c1 = np.conj(z1)
    c2 = np.conj(z2)
    d1 = bp * c1 + coupling * (c1 * c1 * z2 + 2.0 * z1 * c1 * c2)
    d2 = bp * c2 + coupling * (z1 * c1 * c1)
    return d1, d2


_model_h_jit = njit(model_h)
_model_dh_jit = njit(model_dh)


def _boundary_newton_loop(kind, coupling, lam, z1, zeta, v, u, tol, maxit):
    m = zeta.shape[0]
    out = u.copy()
    worst = 0
    for j in range(m):
        uj = out[j]
        for it in range(maxit):
            t = zeta[j] * (1.0 + uj + 1j * v[j])
            z2 = lam * t
            hv = _model_h_jit(kind, coupling, z1[j], z2)
            d1, d2 = _model_dh_jit(kind, coupling, z1[j], z2)
            tt = t.real**2 + t.imag**2
            rv = hv * tt
            rt = lam * d2 * tt + hv * np.conj(t)
            dr = 2.0 * (rt * zeta[j]).real
            if dr == 0.0 or not np.isfinite(dr):
                uj = np.nan
                break
            du = (rv - 1.0) / dr
            uj -= du
            if abs(du) <= tol:
                break
        if it + 1 > worst:
            worst = it + 1
        out[j] = uj
    return out, worst


def boundary_newton_numpy(kind, coupling, lam, z1, zeta, v, u, tol, maxit):
    """Solve r(z1, zeta (1 + u + i v), lam) = 1 for real u at every grid point."""
    u = np.array(u, float)
    active = np.ones(u.shape, bool)
    its = 0
    for it in range(maxit):
        its = it + 1
        t = zeta * (1.0 + u + 1j * v)
        z2 = lam * t
        hv = model_h(kind, coupling, z1, z2)
        _, d2 = model_dh(kind, coupling, z1, z2)
        tt = np.abs(t) ** 2
        rt = lam * d2 * tt + hv * np.conj(t)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            du = (hv * tt - 1.0) / (2.0 * (rt * zeta).real)
        du = np.where(active, du, 0.0)
        if not np.all(np.isfinite(du)):
            return np.where(np.isfinite(du), u - du, np.nan), its
        u = u - du
        active &= np.abs(du) > tol
        if not active.any():
            break
    return u, its


if USE_NUMBA:
    geodesic_rev = njit(_geodesic_rev_loop)
    jacobi_strip = njit(_jacobi_strip_loop)
    jacobi_path = njit(_jacobi_path_loop)
    boundary_newton = njit(_boundary_newton_loop)
else:
    geodesic_rev = geodesic_rev_numpy
    jacobi_strip = jacobi_strip_numpy
    jacobi_path = jacobi_path_numpy
    boundary_newton = boundary_newton_numpy


def compiled_variants():
    """Return numba-compiled kernels regardless of the env flag (for benchmarks)."""
    return {
        "geodesic_rev": njit(_geodesic_rev_loop),
        "jacobi_strip": njit(_jacobi_strip_loop),
        "jacobi_path": njit(_jacobi_path_loop),
        "boundary_newton": njit(_boundary_newton_loop),
    }


def numpy_variants():
    return {
        "geodesic_rev": geodesic_rev_numpy,
        "jacobi_strip": jacobi_strip_numpy,
        "jacobi_path": jacobi_path_numpy,
        "boundary_newton": boundary_newton_numpy,
    }
