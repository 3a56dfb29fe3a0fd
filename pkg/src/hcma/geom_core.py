"""Geodesics, curvature spectra and complexified Jacobi fields on surfaces.

Everything here is two-dimensional: along a unit-speed geodesic the normal
Jacobi equation is the scalar ODE ``Y'' + K(sigma) Y = 0``. The curvature
along a closed geodesic is expanded in Fourier modes, which continues it
holomorphically to the strip ``|Im z| < w`` where ``w`` is read off the
decay of the coefficients. The Jacobi equation is then integrated in
complex time along straight segments of that strip.

Surface models
--------------
``RoundSphere``      unit sphere, K = 1.
``Flat``             flat plane, K = 0 (period treated as 2*pi by convention).
``ZollRevolution``   metric ``(1 + h(cos r))^2 dr^2 + sin(r)^2 dth^2`` with the
                     odd profile ``h(x) = eps * x * (1 - x^2)``; every geodesic
                     closes with length 2*pi.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import kernels

TWO_PI = 2.0 * np.pi

POLE_THRESHOLD = 1e-8
# relative size below which Fourier coefficients are treated as round-off
NOISE_FLOOR = 1e-13


class MetricKind(enum.Enum):
    ROUND_SPHERE = "round"
    FLAT = "flat"
    ZOLL = "zoll"


@dataclass(frozen=True)
class SurfaceMetric:
    kind: MetricKind
    zoll_eps: float = 0.0
    period: float = TWO_PI

    def __post_init__(self):
        if self.kind is MetricKind.ZOLL and not abs(self.zoll_eps) < 0.5:
            # m = 1 + h stays positive for |eps| < 2.6, but closure of the
            # numerical family has only been checked on this range
            raise ValueError("zoll_eps must satisfy |eps| < 0.5")

    @classmethod
    def round_sphere(cls) -> "SurfaceMetric":
        return cls(MetricKind.ROUND_SPHERE)

    @classmethod
    def flat(cls) -> "SurfaceMetric":
        return cls(MetricKind.FLAT)

    @classmethod
    def zoll(cls, eps: float) -> "SurfaceMetric":
        return cls(MetricKind.ZOLL, float(eps))

    @classmethod
    def from_name(cls, name: str, eps: float = 0.0) -> "SurfaceMetric":
        name = name.lower()
        if name in ("round", "roundsphere", "sphere"):
            return cls.round_sphere()
        if name == "flat":
            return cls.flat()
        if name in ("zoll", "zollrevolution"):
            return cls.zoll(eps)
        raise ValueError(f"unknown metric {name!r}")

    @property
    def eps(self) -> float:
        return self.zoll_eps if self.kind is MetricKind.ZOLL else 0.0

    def warp(self, r):
        """The radial factor ``m = 1 + h(cos r)``."""
        x = np.cos(r)
        return 1.0 + self.eps * x * (1.0 - x * x)

    def warp_x(self, x):
        return 1.0 + self.eps * x * (1.0 - x * x)

    def curvature_x(self, x):
        """Gauss curvature as a function of ``x = cos r``: ``1/m^2 - x m'/m^3``."""
        if self.kind is MetricKind.FLAT:
            return np.zeros_like(x)
        m = self.warp_x(x)
        mp = self.eps * (1.0 - 3.0 * x * x)
        return 1.0 / (m * m) - x * mp / (m * m * m)

    def gauss_curvature(self, r):
        """Gauss curvature at colatitude ``r`` (any array shape, real or complex)."""
        if self.kind is MetricKind.FLAT:
            return np.zeros_like(np.asarray(r, dtype=float) if np.isrealobj(r) else r)
        x = np.cos(r)
        eps = self.eps
        m = 1.0 + eps * x * (1.0 - x * x)
        hp = eps * (1.0 - 3.0 * x * x)
        return 1.0 / (m * m) - x * hp / (m * m * m)

    def speed_sq(self, position, velocity) -> float:
        if self.kind is MetricKind.FLAT:
            return float(velocity[0] ** 2 + velocity[1] ** 2)
        r = position[0]
        return float((self.warp(r) * velocity[0]) ** 2 + (np.sin(r) * velocity[1]) ** 2)


@dataclass(frozen=True)
class GeodesicState:
    position: tuple[float, float]
    velocity: tuple[float, float]
    arclength: float = 0.0


@dataclass
class Trajectory:
    """Uniform samples of a geodesic.

    For revolution metrics ``x = cos r`` and ``xp = dx/dsigma`` are the
    integrated variables; ``position``/``velocity`` are derived from them.
    """

    metric: SurfaceMetric
    sigma: np.ndarray
    position: np.ndarray  # (n, 2)
    velocity: np.ndarray  # (n, 2)
    x: np.ndarray | None = None
    xp: np.ndarray | None = None
    clairaut: float = 0.0

    def state(self, i: int) -> GeodesicState:
        return GeodesicState(tuple(self.position[i]), tuple(self.velocity[i]), float(self.sigma[i]))

    def speed_defect(self) -> float:
        if self.x is None:
            return float(np.max(np.abs(np.sum(self.velocity**2, axis=1) - 1.0)))
        m = self.metric.warp_x(self.x)
        s2 = 1.0 - self.x**2
        return float(np.max(np.abs(m**2 * self.xp**2 + self.clairaut**2 - s2)))

    def closure_defect(self) -> float:
        """Distance between first and last sample in phase space.

        Revolution metrics compare ``(x, x', theta mod 2 pi)``.
        """
        if self.x is None:
            d = np.concatenate([self.position[-1] - self.position[0], self.velocity[-1] - self.velocity[0]])
            return float(np.linalg.norm(d))
        dth = self.position[-1, 1] - self.position[0, 1]
        dth = (dth + np.pi) % TWO_PI - np.pi
        return float(np.sqrt((self.x[-1] - self.x[0]) ** 2 + (self.xp[-1] - self.xp[0]) ** 2 + dth**2))

    def periodicity_defect(self) -> float:
        """Mismatch of ``(x, x')`` between the ends; the curvature depends on nothing else.

        Near-polar geodesics sweep ``theta`` quickly, so the full closure
        defect is limited by the step far sooner than this one.
        """
        if self.x is None:
            return self.closure_defect()
        return float(np.hypot(self.x[-1] - self.x[0], self.xp[-1] - self.xp[0]))

    def curvature(self) -> np.ndarray:
        if self.x is None:
            return np.zeros(len(self.sigma))
        return self.metric.curvature_x(self.x)


def equator_start(angle: float) -> GeodesicState:
    """Unit-speed state on the equator heading at ``angle`` from the parallel."""
    return GeodesicState((np.pi / 2, 0.0), (np.sin(angle), np.cos(angle)))


def integrate_geodesic(metric: SurfaceMetric, init: GeodesicState, sigma_end: float,
                       step: float, samples: int | None = None) -> Trajectory:
    """RK4 geodesic flow from ``init`` over arclength ``sigma_end``.

    ``step`` is an upper bound; it is shrunk so that ``sigma_end`` is hit
    exactly. ``samples`` uniform output samples are returned (endpoints
    included); by default every step is kept.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    if not sigma_end > 0:
        raise ValueError("sigma_end must be positive")
    if abs(metric.speed_sq(init.position, init.velocity) - 1.0) > 1e-10:
        raise ValueError("initial velocity is not unit length")
    nsteps = int(np.ceil(sigma_end / step - 1e-9))
    if samples is None:
        stride = 1
    else:
        if samples < 2:
            raise ValueError("need at least two samples")
        stride = max(1, int(np.ceil(nsteps / (samples - 1))))
        nsteps = stride * (samples - 1)
    h = sigma_end / nsteps
    sig = init.arclength + h * stride * np.arange(nsteps // stride + 1)
    if metric.kind is MetricKind.FLAT:
        v = np.asarray(init.velocity, float)
        s = (sig - init.arclength)[:, None]
        pos = np.asarray(init.position, float) + s * v
        return Trajectory(metric, sig, pos, np.tile(v, (len(sig), 1)))
    r0, th0 = init.position
    rp, thp = init.velocity
    c = np.sin(r0) ** 2 * thp
    x0 = np.cos(r0)
    p0 = -np.sin(r0) * rp
    out = np.asarray(kernels.geodesic_rev(metric.eps, np.array([c]), np.array([x0]), np.array([th0]),
                                          np.array([p0]), h, nsteps, stride))[0]
    x, th, xp = out[:, 0], out[:, 1], out[:, 2]
    s2 = np.maximum(1.0 - x * x, 0.0)
    sr = np.sqrt(s2)
    with np.errstate(divide="ignore", invalid="ignore"):
        rd = np.where(sr > 0, -xp / sr, 0.0)
        thd = np.where((c == 0.0) | (s2 == 0), 0.0, c / s2)
    pos = np.stack([np.arccos(np.clip(x, -1.0, 1.0)), th], axis=-1)
    vel = np.stack([rd, thd], axis=-1)
    return Trajectory(metric, sig, pos, vel, x=x, xp=xp, clairaut=float(c))


def clairaut_constant(traj: Trajectory) -> np.ndarray:
    """``sin(r)^2 * dtheta/dsigma`` along a revolution-metric trajectory."""
    return (1.0 - traj.x**2) * traj.velocity[:, 1]


# ---------------------------------------------------------------------------
# Curvature spectrum
# ---------------------------------------------------------------------------


@dataclass
class CurvatureSpectrum:
    """Fourier coefficients ``c_k`` of ``K(gamma(sigma))`` over one period.

    ``coeffs`` stores ``c_{-K..K}`` after truncation at the noise floor;
    ``raw`` keeps every computed mode. ``strip_width`` is the fitted width
    ``w`` of the strip of analyticity (``inf`` when no mode above the
    floor exists); ``decay_ratio`` is ``r = e^w`` in ``|c_k| <= C r^-|k|``.
    """

    coeffs: np.ndarray
    raw: np.ndarray
    decay_ratio: float
    strip_width: float
    fit_constant: float
    noise_floor: float
    kmax: int

    def evaluate(self, z):
        k = np.arange(-self.kmax, self.kmax + 1)
        z = np.asarray(z, dtype=complex)
        return np.exp(1j * np.multiply.outer(z, k)) @ self.coeffs

    def truncation_error(self, tau: float) -> float:
        """Size of the neglected modes continued to height ``tau``.

        Modes beyond ``kmax`` sit at the noise floor; their continuation
        grows like ``floor * exp(k tau)`` until the true decay takes over.
        """
        if not np.isfinite(self.strip_width):
            return 0.0
        w = self.strip_width
        if tau >= w:
            return np.inf
        q = np.exp(-(w - abs(tau)))
        return self.fit_constant * q ** (self.kmax + 1) / (1.0 - q)

    def certified_tau(self, tol: float = 1e-8) -> float:
        """Largest height at which :meth:`truncation_error` stays below ``tol``."""
        if not np.isfinite(self.strip_width):
            return np.inf
        lo, hi = 0.0, self.strip_width
        if self.truncation_error(0.0) > tol:
            return 0.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if self.truncation_error(mid) <= tol:
                lo = mid
            else:
                hi = mid
        return lo


def _fit_decay(mags: np.ndarray, floor: float):
    """Fit ``|c_k| <= C exp(-w k)`` on the modes above ``floor`` (k >= 1).

    Uses the upper envelope ``max_{j >= k} |c_j|`` so that isolated zeros
    (odd/even cancellations) do not bias the slope.
    """
    k = np.arange(len(mags))
    keep = (k >= 1) & (mags > floor)
    if not keep.any():
        return np.inf, 0.0, 0
    kmax = int(k[keep].max())
    env = np.maximum.accumulate(mags[1: kmax + 1][::-1])[::-1]
    kk = np.arange(1, kmax + 1)
    if kmax < 3:
        # too few modes for a slope; bound by the floor crossing
        w = np.log(env[0] / floor) / (kmax + 1)
        return float(w), float(env[0] * np.exp(w)), kmax
    slope, icpt = np.polyfit(kk, np.log(env), 1)
    w = -slope
    # make the bound hold on every fitted mode
    c = float(np.max(env * np.exp(w * kk)))
    return float(w), c, kmax


def curvature_fourier(metric: SurfaceMetric, geodesic: Trajectory,
                      closure_tol: float = 1e-7) -> CurvatureSpectrum:
    """Fourier spectrum of the curvature along a closed geodesic.

    ``geodesic`` must cover exactly one period with uniform samples, the
    last one repeating the first.
    """
    n = len(geodesic.sigma) - 1
    span = geodesic.sigma[-1] - geodesic.sigma[0]
    if abs(span - metric.period) > 1e-9 * metric.period:
        raise ValueError("geodesic must cover exactly one period")
    if metric.kind is not MetricKind.FLAT:
        defect = geodesic.periodicity_defect()
        if defect > closure_tol:
            raise ValueError(f"geodesic does not close (defect {defect:.3e})")
    kvals = geodesic.curvature()[:-1]
    c = np.fft.fft(kvals) / n
    half = n // 2
    raw = np.concatenate([c[-(half - 1):], c[:half]]) if half > 1 else c.copy()
    # raw covers k = -(half-1) .. half-1
    raw = raw[: 2 * half - 1]
    ks = np.arange(-(half - 1), half)
    pos = np.abs(raw[ks >= 0])
    neg = np.abs(raw[ks <= 0][::-1])
    mags = np.maximum(pos, neg)
    scale = max(abs(raw[half - 1]), np.max(mags), 1.0)
    floor = NOISE_FLOOR * scale
    w, cfit, kmax = _fit_decay(mags, floor)
    coeffs = raw[half - 1 - kmax: half + kmax].copy()
    return CurvatureSpectrum(coeffs=coeffs, raw=raw, decay_ratio=float(np.exp(w)) if np.isfinite(w) else np.inf,
                             strip_width=w, fit_constant=cfit, noise_floor=floor, kmax=kmax)


def geodesic_spectrum(metric: SurfaceMetric, angle: float, n_samples: int = 512,
                      substeps: int = 32) -> tuple[Trajectory, CurvatureSpectrum]:
    """Integrate the equatorial geodesic at ``angle`` for one period and expand K."""
    init = equator_start(angle)
    step = metric.period / (n_samples * substeps)
    traj = integrate_geodesic(metric, init, metric.period, step, samples=n_samples + 1)
    return traj, curvature_fourier(metric, traj)


def sample_angles(n: int) -> np.ndarray:
    """Launch angles ``(j + 1/2) pi / (2n)`` covering all geodesics up to symmetry."""
    if n < 1:
        raise ValueError("need at least one geodesic")
    return (np.arange(n) + 0.5) * np.pi / (2 * n)


# ---------------------------------------------------------------------------
# Jacobi fields in complex time
# ---------------------------------------------------------------------------


@dataclass
class JacobiFrame:
    sigma_tau: complex
    Y: complex
    Yp: complex
    Z: complex
    Zp: complex
    curvature_fourier: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(1, complex))

    @property
    def a(self) -> complex:
        return self.Z / self.Y

    @property
    def wronskian(self) -> complex:
        return self.Y * self.Zp - self.Yp * self.Z


@dataclass
class StripGrid:
    """Fundamental Jacobi solutions on a tensor grid ``sigmas x taus``."""

    sigmas: np.ndarray
    taus: np.ndarray
    Y: np.ndarray
    Yp: np.ndarray
    Z: np.ndarray
    Zp: np.ndarray

    @property
    def a(self) -> np.ndarray:
        return self.Z / self.Y

    @property
    def wronskian(self) -> np.ndarray:
        return self.Y * self.Zp - self.Yp * self.Z

    def frame(self, i: int, j: int, coeffs=None) -> JacobiFrame:
        return JacobiFrame(complex(self.sigmas[i] + 1j * self.taus[j]), complex(self.Y[i, j]),
                           complex(self.Yp[i, j]), complex(self.Z[i, j]), complex(self.Zp[i, j]),
                           np.zeros(1, complex) if coeffs is None else coeffs)


def _as_coeffs(spec) -> np.ndarray:
    if isinstance(spec, CurvatureSpectrum):
        return np.ascontiguousarray(spec.coeffs, dtype=np.complex128)
    c = np.ascontiguousarray(spec, dtype=np.complex128)
    if c.ndim != 1 or len(c) % 2 == 0:
        raise ValueError("coefficients must be c_{-K..K}")
    return c


def jacobi_grid(spectrum, sigmas, taus, step: float = 1e-3) -> StripGrid:
    """Integrate the frame (Y, Z) with ``Y(0)=Z'(0)=1``, ``Y'(0)=Z(0)=0``.

    The path runs along the real axis to each ``sigma`` and then vertically
    through the sorted ``taus`` (which may be negative).
    """
    if not step > 0:
        raise ValueError("step must be positive")
    c = _as_coeffs(spectrum)
    sigmas = np.ascontiguousarray(sigmas, dtype=float)
    taus = np.ascontiguousarray(taus, dtype=float)
    if np.any(np.diff(sigmas) < 0):
        raise ValueError("sigmas must be sorted")
    out = np.asarray(kernels.jacobi_strip(c, sigmas, taus, step))
    return StripGrid(sigmas, taus, out[0], out[1], out[2], out[3])


def jacobi_along_path(spectrum, waypoints, step: float = 1e-3, state0=None) -> np.ndarray:
    """Frame states at each waypoint of a piecewise-linear complex path."""
    c = _as_coeffs(spectrum)
    wp = np.ascontiguousarray(waypoints, dtype=np.complex128)
    s0 = np.array([1, 0, 0, 1], dtype=np.complex128) if state0 is None else np.asarray(state0, np.complex128)
    return np.asarray(kernels.jacobi_path(c, wp, s0, step))


def real_frame(spectrum, sigma: float, step: float = 1e-3) -> JacobiFrame:
    """The frame at the real point ``sigma`` (``tau = 0``)."""
    c = _as_coeffs(spectrum)
    s = jacobi_along_path(c, [0.0, sigma], step)[-1]
    return JacobiFrame(complex(sigma), *map(complex, s), curvature_fourier=c)


@dataclass
class ContinuationResult:
    frames: list[JacobiFrame]
    breach_tau: float | None
    breach_kind: str | None
    max_wronskian_defect: float

    @property
    def a(self) -> np.ndarray:
        return np.array([f.a for f in self.frames])


def continue_jacobi(frame: JacobiFrame, tau_end: float, step: float = 1e-3,
                    n_out: int = 41, certify_tol: float = 1e-8,
                    spectrum: CurvatureSpectrum | None = None) -> ContinuationResult:
    """Continue a real frame vertically to ``sigma + i*tau_end``.

    ``frame.curvature_fourier`` supplies ``K``. When ``spectrum`` is given,
    ``tau_end`` beyond its certified height is rejected. Points where
    ``|Y|`` drops below :data:`POLE_THRESHOLD` are reported as a breach.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    if abs(frame.sigma_tau.imag) > 0:
        raise ValueError("start frame must lie on the real axis")
    if spectrum is not None and abs(tau_end) > spectrum.certified_tau(certify_tol):
        raise ValueError("tau_end exceeds the certified strip of analyticity")
    c = _as_coeffs(frame.curvature_fourier)
    sigma = frame.sigma_tau.real
    taus = np.linspace(0.0, tau_end, n_out)
    wp = sigma + 1j * taus
    states = jacobi_along_path(c, wp, step, state0=[frame.Y, frame.Yp, frame.Z, frame.Zp])
    frames = [JacobiFrame(complex(z), *map(complex, s), curvature_fourier=c) for z, s in zip(wp, states)]
    breach_tau = None
    kind = None
    for f in frames[1:]:
        if abs(f.Y) < POLE_THRESHOLD:
            breach_tau, kind = f.sigma_tau.imag, "pole"
            break
        if f.a.imag * np.sign(tau_end) <= 0:
            breach_tau, kind = f.sigma_tau.imag, "im_a"
            break
    w0 = frame.wronskian
    defect = max(abs(f.wronskian - w0) for f in frames)
    return ContinuationResult(frames, breach_tau, kind, float(defect))
