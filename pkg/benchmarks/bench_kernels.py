"""Time the numba and numpy variants of each hot kernel on representative inputs.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--json out.json]

Compilation is triggered once before timing, so the numba column is
steady-state cost. Each row also reports the max deviation between the
two backends.
"""
from __future__ import annotations

import argparse
import json
import time

import numpy as np

from hcma import kernels
from hcma.disk_solver import BoundaryDisk, HermitianModel
from hcma.disk_solver.spectral import circle_grid, coeffs_to_grid
from hcma.geom_core import SurfaceMetric, _as_coeffs, geodesic_spectrum, sample_angles


def _inputs():
    metric = SurfaceMetric.zoll(0.2)
    nb = 8
    ang = sample_angles(nb)
    geo = (0.2, np.cos(ang), np.zeros(nb), np.zeros(nb), -np.sin(ang), 2 * np.pi / 4096, 4096, 8)
    cfull = _as_coeffs(geodesic_spectrum(metric, 0.7)[1])
    strip = (cfull, np.linspace(0, 2 * np.pi, 16, endpoint=False), np.linspace(0.05, 0.5, 10), 1e-3)
    wp = 0.3 + 1j * np.linspace(0, 0.8, 41)
    state0 = np.array([1, 0, 0, 1], dtype=complex)
    path = (cfull, wp, state0, 1e-3)
    model = HermitianModel("quadric-like")
    d = BoundaryDisk.model_extremal(model, 0.2 + 0.1j, 64)
    m = 256
    z1 = coeffs_to_grid(d.f1, m) + 0.01 * circle_grid(m) ** 2
    newton = (model.kind, float(model.coupling), 0.05 + 0j, z1, circle_grid(m), 0.01 * np.sin(np.arange(m)),
              np.zeros(m), 1e-13, 50)
    return {"geodesic_rev": geo, "jacobi_strip": strip, "jacobi_path": path, "boundary_newton": newton}


def _first(x):
    return x[0] if isinstance(x, tuple) else x


def _best(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", default=None)
    a = ap.parse_args(argv)

    compiled = kernels.compiled_variants()
    numpy_ = kernels.numpy_variants()
    inputs = _inputs()
    rows = []
    print(f"{'kernel':<16} {'numba [s]':>10} {'numpy [s]':>10} {'speedup':>8} {'max diff':>10}")
    for name, args in inputs.items():
        t0 = time.perf_counter()
        compiled[name](*args)
        t_compile = time.perf_counter() - t0
        tn, on = _best(compiled[name], args, a.repeat)
        tp, op = _best(numpy_[name], args, a.repeat)
        diff = float(np.max(np.abs(np.asarray(_first(on)) - np.asarray(_first(op)))))
        rows.append({"kernel": name, "numba": tn, "numpy": tp, "first_call": t_compile,
                     "speedup": tp / tn, "max_diff": diff})
        print(f"{name:<16} {tn:10.4f} {tp:10.4f} {tp / tn:8.1f} {diff:10.2e}")
    if a.json:
        with open(a.json, "w") as fh:
            json.dump(rows, fh, indent=1)
    return rows


if __name__ == "__main__":
    main()
