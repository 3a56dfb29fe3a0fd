"""Batch front-end: ``hcma {tube, foliate, flow, verify}``.

Every option can also be given in a flat ``key = value`` config file
(``--config run.cfg``); keys are the long option names with dashes or
underscores, ``#`` starts a comment and command-line flags win over the
file. Reports are JSON with a ``"schema": 1`` field, written atomically;
run metadata (timestamps, argv, backend) goes to a ``.meta.json`` sidecar
so that the reports themselves are byte-identical across reruns.

Exit status: 0 when every requested check passes, 1 when a check fails
(reports are still written), 2 on a configuration error.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import backend_name

SCHEMA = 1
EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# IO helpers
# ---------------------------------------------------------------------------


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=False, default=_default) + "\n"


def _default(x):
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    raise TypeError(f"not serializable: {type(x)}")


def _clean(x):
    """Replace non-finite floats by None so the JSON stays strict."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (float, np.floating)) and not np.isfinite(x):
        return None
    return x


def write_report(path: Path, payload: dict, argv: list[str]) -> None:
    payload = {"schema": SCHEMA, **_clean(payload)}
    atomic_write(path, dump_json(payload))
    meta = {
        "schema": SCHEMA,
        "written_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "argv": argv,
        "version": __version__,
        "backend": backend_name(),
        "report": path.name,
    }
    atomic_write(path.with_suffix(".meta.json"), dump_json(meta))


def read_config(path: str) -> dict[str, str]:
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _complex(s: str) -> complex:
    try:
        return complex(s.replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a complex number: {s!r}") from exc


def _complex_list(s: str) -> list[complex]:
    return [_complex(p) for p in s.split(",") if p.strip()]


def _flag(s) -> bool:
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {s!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hcma", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="flat key = value file")
        sp.add_argument("--out", default="out", help="output directory")

    t = sub.add_parser("tube", help="tube radius scan for a surface of revolution")
    common(t)
    t.add_argument("--metric", default="round", choices=["round", "flat", "zoll"])
    t.add_argument("--zoll-eps", type=float, default=0.0)
    t.add_argument("--geodesics", type=int, default=32)
    t.add_argument("--tau-ceiling", type=float, default=6.0)
    t.add_argument("--n-sigma", type=int, default=32)
    t.add_argument("--dtau", type=float, default=0.05)
    t.add_argument("--step", type=float, default=1e-3)
    t.add_argument("--certify-tol", type=float, default=1e-8)
    t.add_argument("--expect", choices=["none", "entire", "breach"], default="none",
                   help="fail unless the scan reaches this verdict")

    f = sub.add_parser("foliate", help="extremal disks and the foliation they sweep out")
    common(f)
    f.add_argument("--model", default="quadric-like", choices=["flat", "reference", "quadric-like"])
    f.add_argument("--coupling", type=float, default=None)
    f.add_argument("--lambda", dest="lam", type=_complex, default=0j)
    f.add_argument("--modes", type=int, default=64)
    f.add_argument("--grid", type=_complex_list, default=None, help="comma-separated base points")
    f.add_argument("--grid-spacing", type=float, default=0.2)
    f.add_argument("--lambda-step", type=float, default=0.01)
    f.add_argument("--tol", type=float, default=1e-10)
    f.add_argument("--levi", type=_flag, nargs="?", const=True, default=False)
    f.add_argument("--tangency", type=_flag, nargs="?", const=True, default=False)
    f.add_argument("--traces", type=_flag, nargs="?", const=True, default=False,
                   help="write one CSV boundary trace per leaf")

    fl = sub.add_parser("flow", help="gradient flows of |z|^2 on complex space")
    common(fl)
    fl.add_argument("--field", default="xi", choices=["xi", "eta"])
    fl.add_argument("--start", type=_complex_list, default=[1 + 0.5j, 0.3 - 0.2j])
    fl.add_argument("--t-end", type=float, default=3.0)
    fl.add_argument("--step", type=float, default=1e-3)
    fl.add_argument("--n-out", type=int, default=301)
    fl.add_argument("--tol", type=float, default=1e-9)

    v = sub.add_parser("verify", help="replay the checks on a stored foliation chart")
    common(v)
    v.add_argument("--chart", required=True)
    v.add_argument("--levi", type=_flag, nargs="?", const=True, default=False)
    v.add_argument("--tangency", type=_flag, nargs="?", const=True, default=False)
    v.add_argument("--tol", type=float, default=1e-10)
    return p


def parse(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = read_config(args.config)
        cfg.pop("command", None)
        # re-parse with config values as defaults so explicit flags still win
        sp = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sp._actions}
        defaults = {}
        for k, val in cfg.items():
            dest = "lam" if k == "lambda" else k
            if dest not in known or dest in ("config", "help"):
                raise ConfigError(f"unknown config key {k!r} for {args.command}")
            act = known[dest]
            try:
                defaults[dest] = act.type(val) if act.type else val
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise ConfigError(f"bad value for {k}: {val!r}") from exc
            if act.choices and defaults[dest] not in act.choices:
                raise ConfigError(f"{k} must be one of {sorted(act.choices)}")
        sp.set_defaults(**defaults)
        args = parser.parse_args(argv)
    validate(args)
    return args


def validate(a: argparse.Namespace) -> None:
    def positive(name):
        val = getattr(a, name, None)
        if val is not None and not val > 0:
            raise ConfigError(f"{name} must be > 0")

    for name in ("tau_ceiling", "dtau", "step", "certify_tol", "tol", "t_end", "lambda_step", "grid_spacing"):
        positive(name)
    if a.command == "tube":
        if a.geodesics < 1:
            raise ConfigError("geodesics must be >= 1")
        if a.n_sigma < 16 or a.n_sigma & (a.n_sigma - 1):
            raise ConfigError("n-sigma must be a power of two >= 16")
        if a.metric == "zoll" and not abs(a.zoll_eps) < 0.5:
            raise ConfigError("zoll-eps must satisfy |eps| < 0.5")
    if a.command == "foliate" and a.modes < 8:
        raise ConfigError("modes must be >= 8")
    if a.command == "flow" and a.n_out < 2:
        raise ConfigError("n-out must be >= 2")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def run_tube(a, argv) -> int:
    from .geom_core import SurfaceMetric
    from .tube import tube_radius

    metric = SurfaceMetric.from_name(a.metric, a.zoll_eps)
    rep = tube_radius(metric, a.geodesics, a.tau_ceiling, n_sigma=a.n_sigma, dtau=a.dtau,
                      step=a.step, certify_tol=a.certify_tol)
    payload = {"config": {"metric": a.metric, "zoll_eps": metric.eps, "geodesics": a.geodesics,
                          "tau_ceiling": a.tau_ceiling}, **rep.to_dict()}
    ok = True
    if a.expect == "entire":
        ok = bool(rep.entire_flag)
    elif a.expect == "breach":
        ok = any(t is not None for _, t in rep.per_geodesic_breach)
    payload["passed"] = ok
    write_report(Path(a.out) / "tube_report.json", payload, argv)
    print(f"tube: metric={a.metric} entire={rep.entire_flag} radius={rep.radius_estimate} -> {'ok' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def _foliation_checks(reports: dict, tol: float) -> dict:
    s = reports["structure"]
    checks = {
        "grad_norm": s["max_grad_norm"] <= tol,
        "boundary_residual": s["max_boundary_residual"] <= tol,
        "boundary_u": s["max_boundary_u"] <= tol,
        "embedded": bool(s["embedded"]),
    }
    if "levi" in reports:
        checks["levi_sign_constant"] = bool(reports["levi"]["sign_constant"])
        checks["levi_band"] = reports["levi"]["band_ratio"] <= 2.0
    if "tangency" in reports:
        checks["tangency"] = reports["tangency"]["max_residual"] <= 1e-7
    return checks


def run_foliate(a, argv) -> int:
    from .disk_solver import HermitianModel
    from .disk_solver.foliation import assemble_foliation, default_grid, verify_chart

    model = HermitianModel(a.model, a.coupling)
    grid = a.grid if a.grid else default_grid(a.grid_spacing)
    chart = assemble_foliation(model, a.lam, grid, a.modes, a.lambda_step, a.tol)
    if a.levi or a.tangency:
        verify_chart(chart, levi=a.levi, tangency=a.tangency)
    checks = _foliation_checks(chart.reports, a.tol)
    chart.reports["checks"] = checks
    out = Path(a.out)
    d = chart.to_dict()
    write_report(out / "chart.json", d, argv)
    write_report(out / "foliate_report.json", {"reports": d["reports"], "lambda": d["lambda"],
                                               "model": d["model"]}, argv)
    if a.traces:
        for k, rec in enumerate(chart.leaves):
            atomic_write(out / f"leaf_{k:02d}.csv", chart.leaf_trace_csv(rec.z_prime))
    ok = all(checks.values())
    print(f"foliate: model={a.model} lambda={a.lam} leaves={len(chart.leaves)} -> {'ok' if ok else 'FAIL'}")
    for k, v in checks.items():
        print(f"  {k}: {'pass' if v else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def run_flow(a, argv) -> int:
    from .ma_flow import ExhaustionModel, flow

    model = ExhaustionModel.euclidean(len(a.start))
    tr = flow(model, np.array(a.start), a.field, a.t_end, a.step, n_out=a.n_out,
              find_period=a.field == "eta")
    out = Path(a.out)
    atomic_write(out / f"flow_{a.field}.csv", tr.to_csv())
    defect = tr.invariant_defect()
    ok = defect <= a.tol
    payload = {"field": a.field, "start": [[z.real, z.imag] for z in a.start], "t_end": a.t_end,
               "invariant_defect": defect, "period": tr.period, "truncated": tr.truncated, "passed": ok}
    write_report(out / f"flow_{a.field}.json", payload, argv)
    print(f"flow: field={a.field} invariant defect={defect:.3e} -> {'ok' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def run_verify(a, argv) -> int:
    from .disk_solver.foliation import FoliationChart, verify_chart

    try:
        chart = FoliationChart.from_dict(json.loads(Path(a.chart).read_text()))
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load chart {a.chart}: {exc}") from exc
    chart.reports = {}
    reports = verify_chart(chart, levi=a.levi, tangency=a.tangency)
    checks = _foliation_checks(reports, a.tol)
    ok = all(checks.values())
    write_report(Path(a.out) / "verify_report.json", {"chart": str(a.chart), "reports": reports,
                                                      "checks": checks, "passed": ok}, argv)
    print(f"verify: {a.chart} -> {'ok' if ok else 'FAIL'}")
    for k, v in checks.items():
        print(f"  {k}: {'pass' if v else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


_COMMANDS = {"tube": run_tube, "foliate": run_foliate, "flow": run_flow, "verify": run_verify}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse(argv)
    except ConfigError as exc:
        print(f"hcma: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # argparse
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return _COMMANDS[args.command](args, argv)
    except ConfigError as exc:
        print(f"hcma: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"hcma: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except RuntimeError as exc:
        print(f"hcma: run failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
