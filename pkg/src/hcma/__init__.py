"""Numerical toolkit for homogeneous complex Monge-Ampere foliations.

Submodules: ``geom_core`` (geodesics and complexified Jacobi fields),
``tube`` (adapted complex structure and tube radius), ``ma_flow``
(gradient flows of an exhaustion), ``disk_solver`` (extremal disks and
the foliation they sweep out) and ``cli``.
"""
from ._accel import backend_name

__version__ = "0.1.0"
