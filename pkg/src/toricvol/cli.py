"""Command-line front end: ``toricvol <command> ...``.

Every report is a JSON object holding the command, an echo of the
configuration, a version string and the result.  Wall-clock time is added
unless ``--no-timing`` is given, in which case identical inputs give
byte-identical output.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .condition import nu_tail_mc, mixed_tail_check
from .errors import DimensionLimitError, NumericalError, ToricvolError
from .quadrature import Region, integrate_density
from .real_roots import real_experiment
from .solver import expected_count, expected_roots_mc, solve
from .supports import mixed_volume_oracle
from .systems import PolySample, SystemSpec, condition_matrix, evaluate
from .toric import (ToricPoint, hamiltonian, hamiltonian_flow, hamiltonian_flow_rk4, kahler_eval,
                    root_density)

EXIT_USAGE, EXIT_NUMERIC, EXIT_DIMENSION = 1, 2, 3
STOCHASTIC = {"expected-roots", "condition-tail", "real"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def version_string() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).resolve().parent, capture_output=True,
                             text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


# ------------------------------------------------------------------ parsing

def _floats(text: str) -> list[float]:
    text = text.strip()
    if text.startswith("["):
        return [float(x) for x in json.loads(text)]
    return [float(x) for x in text.split(",") if x.strip()]


def _load_json(path_or_text: str):
    p = Path(path_or_text)
    if p.exists():
        return json.loads(p.read_text())
    return json.loads(path_or_text)


def _load_system(cfg) -> SystemSpec:
    if not cfg.system:
        raise UsageError("--system is required")
    spec = SystemSpec.from_json(_load_json(cfg.system))
    if cfg.field:
        spec = spec.with_field(cfg.field)
    return spec


def _load_region(cfg, n: int) -> Region:
    if cfg.region:
        return Region.from_json(_load_json(cfg.region))
    if cfg.pbox:
        return Region.from_json({"p": _load_json(cfg.pbox)})
    return Region.full(n)


def _load_point(cfg, n: int) -> ToricPoint:
    if cfg.point is None:
        raise UsageError("--point is required")
    p = _floats(cfg.point)
    q = _floats(cfg.q) if cfg.q else [0.0] * len(p)
    if len(p) != n or len(q) != n:
        raise UsageError(f"--point and --q need {n} coordinates")
    return ToricPoint(np.array(p), np.array(q))


def _load_coeffs(cfg, spec: SystemSpec) -> PolySample:
    if not cfg.coeffs:
        raise UsageError("--coeffs is required")
    return PolySample.from_json(spec, _load_json(cfg.coeffs))


def _clean(x):
    """Convert numpy containers and non-finite floats into JSON-safe values."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, complex):
        return [_clean(x.real), _clean(x.imag)]
    return x


def _complex_list(arr) -> list:
    return [[float(np.real(c)), float(np.imag(c))] for c in np.ravel(arr)]


# ---------------------------------------------------------------- commands

def cmd_eval(cfg) -> dict:
    spec = _load_system(cfg)
    at = _load_point(cfg, spec.n)
    polys = []
    for s in spec.polys:
        ev = kahler_eval(s, at)
        polys.append({"g": ev.g, "momentum": ev.grad, "metric": ev.metric})
    out = {"point": at.to_json(), "polynomials": polys}
    if spec.n <= 4:
        out["root_density"] = root_density(spec, at)
    if cfg.coeffs:
        f = _load_coeffs(cfg, spec)
        vals, logs = evaluate(f, at, scaled=True)
        out["values_scaled"] = _complex_list(vals)
        out["log_scale"] = logs
        out["condition_matrix"] = [_complex_list(r) for r in condition_matrix(f, at).D]
    return out


def cmd_solve(cfg) -> dict:
    spec = _load_system(cfg)
    f = _load_coeffs(cfg, spec)
    expected = None if spec.is_linear else expected_count(spec)
    rs = solve(f, expected=expected)
    out = rs.to_json()
    out["expected"] = expected
    return out


def cmd_mixed_volume(cfg) -> dict:
    spec = _load_system(cfg)
    n = spec.n
    if n > 3:
        raise DimensionLimitError("mixed volume is limited to n <= 3")
    res = integrate_density(spec, Region.full(n), tol=cfg.tol)
    oracle = mixed_volume_oracle(*(s.polytope() for s in spec.polys))
    roots_oracle = float(oracle) * math.factorial(n)
    diff = res.value - roots_oracle
    return {"quad": res.value, "quad_error": res.error, "oracle": roots_oracle,
            "mixed_volume_quad": res.value / math.factorial(n),
            "mixed_volume_oracle": f"{oracle.numerator}/{oracle.denominator}",
            "abs_diff": abs(diff), "rel_diff": abs(diff) / roots_oracle if roots_oracle else abs(diff)}


def cmd_expected_roots(cfg) -> dict:
    spec = _load_system(cfg)
    region = _load_region(cfg, spec.n)
    quad = integrate_density(spec, region, tol=cfg.tol)
    mc = expected_roots_mc(spec, region, cfg.samples, cfg.seed, cfg.workers)
    diff = abs(mc["mean"] - quad.value)
    if mc["stderr"] > 0:
        z = diff / mc["stderr"]
    else:
        # every sample gave the same count; compare at quadrature accuracy
        z = 0.0 if diff <= max(quad.error, cfg.tol * max(1.0, quad.value)) else math.inf
    return {"region": region.to_json(), "quad": quad.value, "quad_error": quad.error,
            "mc": mc, "z_score": z, "pass": bool(z <= 3.0)}


def cmd_condition_tail(cfg) -> dict:
    spec = _load_system(cfg)
    region = _load_region(cfg, spec.n)
    if not cfg.eps:
        raise UsageError("--eps is required")
    eps = _floats(cfg.eps)
    if region.bounded:
        checks = mixed_tail_check(spec, region, eps, cfg.samples, cfg.seed, workers=cfg.workers,
                                tol=cfg.tol)
        return {"region": region.to_json(), "rows": [c.to_json() for c in checks]}
    rep = nu_tail_mc(spec, region, eps, cfg.samples, cfg.seed, workers=cfg.workers)
    rows = [dict(e.to_json(), theorem3_rhs=None) for e in rep.estimates]
    return {"region": region.to_json(), "rows": rows, "rejected": rep.rejected,
            "note": "theorem3_rhs needs a bounded p box for the mixed dilation"}


def cmd_real(cfg) -> dict:
    spec = _load_system(cfg)
    if not spec.is_real:
        spec = spec.with_field("real")
    region = _load_region(cfg, spec.n)
    eps = _floats(cfg.eps) if cfg.eps else []
    rep = real_experiment(spec, region, cfg.samples, cfg.seed, workers=cfg.workers,
                          eps_list=eps, tol=cfg.tol)
    out = rep.to_json()
    out["bound_holds"] = bool(rep.mc_mean <= rep.theorem4_bound + 3 * rep.mc_stderr)
    return out


def cmd_flow(cfg) -> dict:
    spec = _load_system(cfg)
    at = _load_point(cfg, spec.n)
    if cfg.xi is None:
        raise UsageError("--xi is required")
    xi = np.array(_floats(cfg.xi))
    poly = spec.polys[cfg.poly]
    end = hamiltonian_flow(poly, at, xi, cfg.t)
    rk4 = hamiltonian_flow_rk4(poly, at, xi, cfg.t, steps=cfg.steps)
    dq = np.angle(np.exp(1j * (end.q - rk4.q)))
    return {"start": at.to_json(), "end": end.to_json(), "rk4_end": rk4.to_json(),
            "rk4_max_diff": float(np.max(np.abs(dq))),
            "h_start": hamiltonian(poly, at, xi), "h_end": hamiltonian(poly, end, xi),
            "p_unchanged": bool(np.array_equal(end.p, at.p))}


COMMANDS = {
    "eval": cmd_eval,
    "solve": cmd_solve,
    "mixed-volume": cmd_mixed_volume,
    "expected-roots": cmd_expected_roots,
    "condition-tail": cmd_condition_tail,
    "real": cmd_real,
    "flow": cmd_flow,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--system", help="system JSON file (or inline JSON)")
    common.add_argument("--field", choices=("complex", "real"), help="override the system field")
    common.add_argument("--region", help="region JSON {'p': [[a, b], ...], 'q': 'full' | [...]}")
    common.add_argument("--pbox", help="p box as JSON [[a, b], ...]; q is taken as full")
    common.add_argument("--point", help="p coordinates, comma separated")
    common.add_argument("--q", help="q coordinates, comma separated (default 0)")
    common.add_argument("--coeffs", help="coefficient JSON file (or inline JSON)")
    common.add_argument("--xi", help="flow direction, comma separated")
    common.add_argument("--t", type=float, default=1.0, help="flow time")
    common.add_argument("--steps", type=int, default=64, help="RK4 steps for the flow check")
    common.add_argument("--poly", type=int, default=0, help="polynomial index for the flow")
    common.add_argument("--samples", type=int, default=10000)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--eps", help="comma separated thresholds")
    common.add_argument("--tol", type=float, default=1e-6)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--no-timing", action="store_true",
                        help="omit wall-clock time so reports are byte-reproducible")
    parser = _Parser(prog="toricvol", description="Root counts and condition numbers "
                     "of random sparse polynomial systems on the log-torus.")
    parser.add_argument("--version", action="version", version=version_string())
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _flatten(prefix: str, x, rows: list):
    if isinstance(x, dict):
        for k, v in x.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, rows)
    elif isinstance(x, list) and any(isinstance(v, (dict, list)) for v in x):
        for i, v in enumerate(x):
            _flatten(f"{prefix}[{i}]", v, rows)
    else:
        rows.append((prefix, json.dumps(x)))


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, sort_keys=True) + "\n"
    rows: list = []
    _flatten("", report, rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    w.writerows(rows)
    return buf.getvalue()


def run(argv=None) -> tuple[str, str | None]:
    """Parse ``argv``, execute the command and return ``(rendered report, output path)``."""
    parser = build_parser()
    cfg = parser.parse_args(argv)
    if cfg.command in STOCHASTIC and cfg.seed is None:
        parser.error(f"--seed is required for '{cfg.command}'")
    if cfg.samples <= 0 or cfg.workers <= 0:
        parser.error("--samples and --workers must be positive")
    start = time.perf_counter()
    config = {k: v for k, v in sorted(vars(cfg).items()) if k not in ("out", "no_timing")}
    report = {"command": cfg.command, "config": config, "version": version_string()}
    report["result"] = COMMANDS[cfg.command](cfg)
    if not cfg.no_timing:
        report["wall_clock_s"] = time.perf_counter() - start
    return render(_clean(report), cfg.format), cfg.out


def main(argv=None) -> int:
    try:
        text, out = run(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else 0
    except UsageError as e:
        print(f"toricvol: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DimensionLimitError as e:
        print(f"toricvol: dimension limit: {e}", file=sys.stderr)
        return EXIT_DIMENSION
    except NumericalError as e:
        print(f"toricvol: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ToricvolError, ValueError, OSError, KeyError) as e:
        print(f"toricvol: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
