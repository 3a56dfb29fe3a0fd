"""Adapted complex structure, tube-radius scans and Kähler-potential diagnostics.

On the leaf ``psi_gamma(sigma + i tau)`` the adapted complex structure acts
on the parallel frame ``(xi, eta)`` through the ratio ``a = Z / Y`` of the
complexified Jacobi fields:

    J xi  = e (eta - Re(a) xi),        e = 1 / Im(a)
    J eta = e (Re(a) eta - |a|^2 xi)

The second line is forced by ``J^2 = -1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geom_core import (
    POLE_THRESHOLD,
    JacobiFrame,
    MetricKind,
    StripGrid,
    SurfaceMetric,
    geodesic_spectrum,
    jacobi_along_path,
    jacobi_grid,
    sample_angles,
)

OSCILLATION_TOL = 1e-4
BISECTION_TOL = 1e-6


class OutsideTube(ValueError):
    """Raised when a point has ``Im a <= 0``."""


@dataclass
class AdaptedJ:
    at: complex
    geodesic_id: int
    re_a: float
    im_a: float
    e: float
    J_matrix: np.ndarray

    def apply(self, v):
        """Apply J to coordinates ``(c_xi, c_eta)`` in the parallel frame."""
        return self.J_matrix @ np.asarray(v, float)


def j_matrix(a: complex) -> np.ndarray:
    """Matrix of J in the basis (xi, eta); columns are J xi and J eta."""
    re, im = a.real, a.imag
    e = 1.0 / im
    return np.array([[-e * re, -e * (re * re + im * im)],
                     [e, e * re]])


def adapted_structure(frame: JacobiFrame | complex, geodesic_id: int = 0) -> AdaptedJ:
    a = frame.a if isinstance(frame, JacobiFrame) else complex(frame)
    at = frame.sigma_tau if isinstance(frame, JacobiFrame) else complex("nan")
    if not a.imag > 0:
        raise OutsideTube(f"Im a = {a.imag:.3e} <= 0 at {at}")
    return AdaptedJ(at=at, geodesic_id=geodesic_id, re_a=a.real, im_a=a.imag,
                    e=1.0 / a.imag, J_matrix=j_matrix(a))


# ---------------------------------------------------------------------------
# Compactification and tube radius
# ---------------------------------------------------------------------------


@dataclass
class Compactification:
    extends: bool
    limit_value: complex
    oscillation: float
    cauchy_defect: float


def compactification_check(a_grid, taus=None, tol: float = OSCILLATION_TOL) -> Compactification:
    """Test whether ``a`` settles to a constant as ``tau`` grows.

    ``a_grid[i, j]`` holds ``a(sigma_i + i tau_j)`` on a uniform sigma grid.
    The value at the puncture ``zeta = exp(i z) = 0`` is the sigma-mean of
    the last column (Cauchy's formula on the circle ``tau = tau_max``).
    """
    a_grid = np.asarray(a_grid, dtype=complex)
    if a_grid.ndim == 1:
        a_grid = a_grid[:, None]
    if a_grid.shape[0] < 16:
        raise ValueError("need at least 16 sigma samples")
    if not np.all(a_grid.imag > 0):
        raise ValueError("Im a must be positive on the grid")
    last = a_grid[:, -1]
    limit = complex(last.mean())
    osc = float(np.max(np.abs(last - limit)))
    if a_grid.shape[1] > 1:
        prev_mean = complex(a_grid[:, -2].mean())
        cauchy = abs(limit - prev_mean)
    else:
        cauchy = 0.0
    ok = bool(np.isfinite(osc) and osc <= tol and cauchy <= tol)
    return Compactification(ok, limit, osc, float(cauchy))


@dataclass
class GeodesicScan:
    geodesic_id: int
    angle: float
    strip_width: float
    certified_tau: float
    scanned_tau: float
    breach_tau: float | None
    breach_kind: str | None
    min_im_a: float
    max_wronskian_defect: float
    compactification: Compactification | None = None


@dataclass
class TubeReport:
    radius_estimate: float
    entire_flag: bool
    limit_value: complex | None
    per_geodesic_breach: list[tuple[int, float]]
    tau_ceiling: float
    scans: list[GeodesicScan] = field(default_factory=list)

    def to_dict(self) -> dict:
        lv = None if self.limit_value is None else [self.limit_value.real, self.limit_value.imag]
        return {
            "radius_estimate": self.radius_estimate,
            "entire_flag": self.entire_flag,
            "limit_value": lv,
            "per_geodesic_breach": [[g, t] for g, t in self.per_geodesic_breach],
            "tau_ceiling": self.tau_ceiling,
            "geodesics": [
                {
                    "id": s.geodesic_id,
                    "angle": s.angle,
                    "strip_width": _finite_or_none(s.strip_width),
                    "certified_tau": _finite_or_none(s.certified_tau),
                    "scanned_tau": s.scanned_tau,
                    "breach_tau": s.breach_tau,
                    "breach_kind": s.breach_kind,
                    "min_im_a": s.min_im_a,
                    "wronskian_defect": s.max_wronskian_defect,
                }
                for s in self.scans
            ],
        }


def _finite_or_none(x):
    return float(x) if np.isfinite(x) else None


def _bad(state, tau_sign=1.0) -> str | None:
    y = state[0]
    if abs(y) < POLE_THRESHOLD:
        return "pole"
    if (state[2] / y).imag * tau_sign <= 0:
        return "im_a"
    return None


def _localize(coeffs, sigma, tau_lo, tau_hi, state_lo, step):
    """Bisect for the first breach on the vertical line through ``sigma``."""
    while tau_hi - tau_lo > BISECTION_TOL:
        mid = 0.5 * (tau_lo + tau_hi)
        st = jacobi_along_path(coeffs, [sigma + 1j * tau_lo, sigma + 1j * mid],
                               min(step, (mid - tau_lo) / 4), state0=state_lo)[-1]
        if _bad(st) is None:
            tau_lo, state_lo = mid, st
        else:
            tau_hi = mid
    return tau_hi


def scan_geodesic(metric: SurfaceMetric, angle: float, tau_ceiling: float, geodesic_id: int = 0,
                  n_sigma: int = 32, dtau: float = 0.05, step: float = 1e-3,
                  certify_tol: float = 1e-8, n_samples: int = 512) -> tuple[GeodesicScan, StripGrid | None]:
    """Scan ``Im a`` and ``|Y|`` on the strip above one geodesic.

    The scan stops at the certified height of the curvature continuation.
    If the fitted strip of analyticity is narrower than the ceiling, that
    width is itself reported as the breach (kind ``"analyticity"``) unless
    an earlier ``Im a`` or pole breach is found.
    """
    _, spec = geodesic_spectrum(metric, angle, n_samples=n_samples)
    w = spec.strip_width
    cert = spec.certified_tau(certify_tol)
    top = min(tau_ceiling, cert)
    nt = max(2, int(np.ceil(top / dtau)) + 1)
    taus = np.linspace(0.0, top, nt)
    sigmas = 2 * np.pi * np.arange(n_sigma) / n_sigma
    grid = jacobi_grid(spec, sigmas, taus, step)
    Y = grid.Y[:, 1:]
    a = grid.a[:, 1:]
    bad = (np.abs(Y) < POLE_THRESHOLD) | ~(a.imag > 0)
    breach_tau, kind = None, None
    if bad.any():
        j = int(np.argmax(bad.any(axis=0)))
        i = int(np.argmax(bad[:, j]))
        lo = taus[j]
        state_lo = np.array([grid.Y[i, j], grid.Yp[i, j], grid.Z[i, j], grid.Zp[i, j]])
        breach_tau = _localize(spec.coeffs, sigmas[i], lo, taus[j + 1], state_lo, step)
        st = jacobi_along_path(spec.coeffs, [sigmas[i] + 1j * lo, sigmas[i] + 1j * breach_tau],
                               step, state0=state_lo)[-1]
        kind = _bad(st) or "im_a"
    elif np.isfinite(w) and w < tau_ceiling:
        breach_tau, kind = float(w), "analyticity"
    wdef = float(np.max(np.abs(grid.wronskian - 1.0)))
    min_im = float(np.min(a.imag)) if a.size else np.inf
    scan = GeodesicScan(geodesic_id, float(angle), float(w), float(cert), float(top),
                        None if breach_tau is None else float(breach_tau), kind, min_im, wdef)
    if breach_tau is None and top >= tau_ceiling:
        scan.compactification = compactification_check(grid.a[:, 1:], taus[1:])
    return scan, grid


def tube_radius(metric: SurfaceMetric, n_geodesics: int, tau_ceiling: float, **kw) -> TubeReport:
    """Scan ``n_geodesics`` equatorial geodesics up to ``tau_ceiling``.

    ``entire_flag`` requires no breach on any geodesic and a successful
    compactification test (``a`` tends to a constant) on each of them.
    """
    if n_geodesics < 1:
        raise ValueError("n_geodesics must be >= 1")
    if not tau_ceiling > 0:
        raise ValueError("tau_ceiling must be positive")
    scans = []
    for gid, ang in enumerate(sample_angles(n_geodesics)):
        scan, _ = scan_geodesic(metric, ang, tau_ceiling, gid, **kw)
        scans.append(scan)
    breaches = [(s.geodesic_id, s.breach_tau) for s in scans if s.breach_tau is not None]
    radius = min([t for _, t in breaches], default=tau_ceiling)
    radius = min(radius, tau_ceiling)
    comps = [s.compactification for s in scans]
    entire = not breaches and all(c is not None and c.extends for c in comps)
    limit = None
    if comps and all(c is not None for c in comps):
        limit = complex(np.mean([c.limit_value for c in comps]))
    return TubeReport(float(radius), bool(entire), limit, breaches, float(tau_ceiling), scans)


# ---------------------------------------------------------------------------
# Potential diagnostics
# ---------------------------------------------------------------------------


@dataclass
class PotentialDiagnostics:
    E: float
    u: float
    rho_pot: float
    omega_pair: float


def potential_diagnostics(E: float) -> PotentialDiagnostics:
    """Closed forms for ``rho = log(1 + cosh x)`` and ``omega(xi, eta) = tanh(x/2)``.

    Here ``x = 2 sqrt(2E)``; ``tanh(x/2)`` equals ``sinh x / (1 + cosh x)``
    without the overflow of the latter for large energies.
    """
    E = float(E)
    if not E >= 0:
        raise ValueError("energy must be nonnegative")
    x = 2.0 * np.sqrt(2.0 * E)
    # log(1 + cosh x) = x + log((1 + e^{-x})^2 / 2), stable for large x
    rho = x + 2.0 * np.log1p(np.exp(-x)) - np.log(2.0)
    return PotentialDiagnostics(E, float(np.sqrt(E)), float(rho), float(np.tanh(x / 2)))


def leaf_potential(sigma, tau):
    """``u = sqrt(E)`` pulled back to a unit-speed leaf: ``|tau| / sqrt(2)``."""
    return np.abs(np.asarray(tau, float)) / np.sqrt(2.0) + 0.0 * np.asarray(sigma, float)


def leaf_harmonicity_residual(tau_lo: float = 0.1, tau_hi: float = 2.0, n: int = 41) -> float:
    """Max five-point Laplacian of the leaf potential on a grid off ``tau = 0``."""
    if tau_lo <= 0:
        raise ValueError("grid must avoid tau = 0")
    s = np.linspace(0.0, 1.0, n)
    t = np.linspace(tau_lo, tau_hi, n)
    hs, ht = s[1] - s[0], t[1] - t[0]
    S, T = np.meshgrid(s, t, indexing="ij")
    u = leaf_potential(S, T)
    lap = ((u[2:, 1:-1] - 2 * u[1:-1, 1:-1] + u[:-2, 1:-1]) / hs**2
           + (u[1:-1, 2:] - 2 * u[1:-1, 1:-1] + u[1:-1, :-2]) / ht**2)
    return float(np.max(np.abs(lap)))


def strip_a_grid(metric: SurfaceMetric, angle: float, sigmas, taus, step: float = 1e-3):
    """Convenience: ``a`` on a tensor grid above one geodesic."""
    _, spec = geodesic_spectrum(metric, angle)
    return jacobi_grid(spec, sigmas, taus, step).a


__all__ = [
    "AdaptedJ", "Compactification", "GeodesicScan", "MetricKind", "OutsideTube",
    "PotentialDiagnostics", "TubeReport", "adapted_structure", "compactification_check",
    "j_matrix", "leaf_harmonicity_residual", "potential_diagnostics", "scan_geodesic",
    "strip_a_grid", "tube_radius",
]
