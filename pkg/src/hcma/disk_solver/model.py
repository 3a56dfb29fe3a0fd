"""Hermitian length function near the divisor and the boundary defining function.

Coordinates on the deformed neighbourhood are ``(z1, t)``; the ambient
second coordinate is ``z2 = lam * t`` and the boundary is

    r(z1, t, lam) = h(z1, lam * t) * |t|^2 = 1.

Built-in profiles (``S = |z1|^2 + |z2|^2``, ``q = |z1|^2 * 2 Re(conj(z1) z2)``):

``flat``          h = 1
``reference``     h = 1 + S                    mixed Hessian +1 at the centre
``quadric-like``  h = 1 / (1 + S) + k * q      mixed Hessian -1 at the centre

All of them have ``h(0) = 1`` and vanishing first and pure second
derivatives at the centre. Only ``quadric-like`` makes ``log(1/h)``
plurisubharmonic, which is what the second-variation identity and the
Levi-form signature rely on. The quartic coupling ``q`` leaves the
normalisations untouched but makes the dependence on ``lam`` non-radial.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels

_KINDS = {"flat": 0, "reference": 1, "quadric-like": 2}
_DEFAULT_COUPLING = {"flat": 0.0, "reference": 0.0, "quadric-like": 0.5}


@dataclass(frozen=True)
class HermitianModel:
    name: str = "quadric-like"
    coupling: float | None = None
    dim: int = 2

    def __post_init__(self):
        if self.name not in _KINDS:
            raise ValueError(f"unknown model {self.name!r}; choose from {sorted(_KINDS)}")
        if self.dim != 2:
            raise ValueError("only dim = 2 is implemented")
        if self.coupling is None:
            object.__setattr__(self, "coupling", _DEFAULT_COUPLING[self.name])

    @property
    def kind(self) -> int:
        return _KINDS[self.name]

    # -- h and its holomorphic derivatives ---------------------------------
    def h(self, z1, z2=0.0):
        z1 = np.asarray(z1, complex)
        z2 = np.asarray(z2, complex) + 0 * z1
        return kernels.model_h(self.kind, float(self.coupling), z1, z2)

    def dh(self, z1, z2=0.0):
        z1 = np.asarray(z1, complex)
        z2 = np.asarray(z2, complex) + 0 * z1
        return kernels.model_dh(self.kind, float(self.coupling), z1, z2)

    def h_base(self, z_prime) -> float:
        """``h`` restricted to the divisor ``t = 0``."""
        return float(np.real(self.h(complex(z_prime), 0.0)))

    # -- defining function ---------------------------------------------------
    def r(self, z1, t, lam=0.0):
        t = np.asarray(t, complex)
        return np.real(self.h(z1, lam * t)) * np.abs(t) ** 2

    def r_derivs(self, z1, t, lam=0.0):
        """``(r, dr/dz1, dr/dt)`` with ``z1`` and ``t`` as independent coordinates."""
        t = np.asarray(t, complex)
        z2 = lam * t
        hv = np.real(self.h(z1, z2))
        d1, d2 = self.dh(z1, z2)
        tt = np.abs(t) ** 2
        return hv * tt, d1 * tt, lam * d2 * tt + hv * np.conj(t)

    def u0(self, z1, t, lam=0.0):
        """Reference potential ``log 1/r``."""
        return -np.log(self.r(z1, t, lam))

    def normalization_report(self, step: float = 1e-3) -> dict:
        """Finite-difference two-jet of ``h(z1, 0)`` at the centre."""
        f = lambda z: float(np.real(self.h(z, 0.0)))
        h = step
        hx = (f(h) - f(-h)) / (2 * h)
        hy = (f(1j * h) - f(-1j * h)) / (2 * h)
        hxx = (f(h) - 2 * f(0) + f(-h)) / h**2
        hyy = (f(1j * h) - 2 * f(0) + f(-1j * h)) / h**2
        hxy = (f(h + 1j * h) - f(h - 1j * h) - f(-h + 1j * h) + f(-h - 1j * h)) / (4 * h * h)
        return {
            "h0": f(0.0),
            "dh": abs(0.5 * (hx - 1j * hy)),
            "pure_second": abs(0.25 * (hxx - hyy - 2j * hxy)),
            "mixed": 0.25 * (hxx + hyy),
        }

    def to_dict(self) -> dict:
        return {"name": self.name, "coupling": self.coupling, "dim": self.dim}
