"""Command-line front end: ``curvedqm <command> [options]``.

Exit status is 0 when every check passes, 1 when any fails and 2 for usage
or configuration errors.  Options can also come from a ``key=value`` file
given with ``--config``; command-line flags take precedence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

from . import __version__
from .checks import (
    DEFAULT_TOLERANCES,
    factors_suite,
    geometry_suite,
    geometry_tables,
    hermiticity_suite,
    ordering_suite,
    write_tables,
)
from .fields import FD_ORDERS, PhysicalParams, make_grid
from .operators import DEFAULT_CLEARANCE
from .report import Report, _clean
from .surfaces import MONGE_HEIGHTS, SURFACE_NAMES, SURFACE_PARAMS, make_surface, reference_check

COMMANDS = ("geom", "check", "ordering", "factors", "hermiticity")
EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    surface: str = "torus"
    params: dict = field(default_factory=dict)
    n: int = 128
    n_zeta: Optional[int] = None
    margin: float = 0.05
    fd_order: int = 4
    seed: int = 0
    hbar: float = 1.0
    mass: float = 1.0
    factors: Optional[str] = None
    clearance: float = DEFAULT_CLEARANCE
    pairs: int = 10
    tolerances: dict = field(default_factory=dict)
    corrupt_normal: bool = False

    def validate(self) -> None:
        if self.surface not in SURFACE_NAMES:
            raise ConfigError(f"--surface: unknown surface {self.surface!r}; choose from {', '.join(SURFACE_NAMES)}")
        bad = set(self.params) - set(SURFACE_PARAMS[self.surface])
        if bad:
            raise ConfigError(f"--{sorted(bad)[0]}: not a parameter of {self.surface} "
                              f"(accepted: {', '.join(SURFACE_PARAMS[self.surface])})")
        if "height" in self.params and self.params["height"] not in MONGE_HEIGHTS:
            raise ConfigError(f"--height: choose from {', '.join(MONGE_HEIGHTS)}")
        if self.fd_order not in FD_ORDERS:
            raise ConfigError(f"--fd-order: must be one of {FD_ORDERS}")
        if self.n < 16 or (self.n_zeta is not None and self.n_zeta < 16):
            raise ConfigError("--n: at least 16 nodes per axis")
        if self.margin < 0:
            raise ConfigError("--margin: must be non-negative")
        if self.hbar <= 0 or self.mass <= 0:
            raise ConfigError("--hbar/--mass: must be positive")
        if self.factors not in (None, "ode", "closed", "constant"):
            raise ConfigError("--factors: choose ode, closed or constant")
        if self.clearance < 0:
            raise ConfigError("--clearance: must be non-negative")
        if self.pairs < 1:
            raise ConfigError("--pairs: at least one pair")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"--tol-{sorted(unknown)[0]}: unknown check family "
                              f"(known: {', '.join(sorted(DEFAULT_TOLERANCES))})")
        for k, v in self.tolerances.items():
            if not v > 0:
                raise ConfigError(f"--tol-{k}: must be positive")

    @property
    def shape(self) -> tuple:
        return (self.n, self.n_zeta or self.n)

    def echo(self) -> dict:
        d = asdict(self)
        d["params"] = dict(sorted(d["params"].items()))
        d["tolerances"] = dict(sorted(d["tolerances"].items()))
        return d


# --- parsing ------------------------------------------------------------------------------

# config-file key -> (RunConfig attribute or surface parameter, converter)
_SCALAR_KEYS = {
    "surface": str,
    "n": int,
    "n_zeta": int,
    "margin": float,
    "fd_order": int,
    "seed": int,
    "hbar": float,
    "mass": float,
    "factors": str,
    "clearance": float,
    "pairs": int,
}
_PARAM_KEYS = {"a": float, "b": float, "L": float, "c": float, "height": str}


def _convert(key: str, conv, raw: str, origin: str):
    try:
        return conv(raw)
    except ValueError:
        raise ConfigError(f"{origin}{key}: invalid {conv.__name__} value {raw!r}") from None


def read_config(path: str) -> dict:
    """Parse a flat key=value file; blank lines and ``#`` comments are ignored."""
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"--config: cannot read {path}: {exc.strerror}") from None
    out = {}
    for no, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{no}: expected key=value")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        origin = f"{path}:{no}: "
        if key in _SCALAR_KEYS:
            out[key] = _convert(key, _SCALAR_KEYS[key], raw, origin)
        elif key in _PARAM_KEYS:
            out.setdefault("params", {})[key] = _convert(key, _PARAM_KEYS[key], raw, origin)
        elif key.startswith("tol_"):
            out.setdefault("tolerances", {})[key[4:]] = _convert(key, float, raw, origin)
        else:
            raise ConfigError(f"{origin}unknown key {key!r}")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="curvedqm", description="Verify quantum operators on curved surfaces.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "geom": "export frame quantities (r_mu, r^mu, n, H, sqrt g) as CSV plus a JSON summary",
        "check": "geometry identity suite",
        "ordering": "compare T, T1, T2 and the g^1/4 form with the Laplacian; H^2 excess of p^2",
        "factors": "solve the ordering-factor ODEs and compare with closed forms",
        "hermiticity": "Hermiticity defects of momenta and Laplacians",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name], description=helps[name])
        p.add_argument("--config", metavar="FILE", help="key=value file; flags override its values")
        p.add_argument("--surface", choices=SURFACE_NAMES)
        p.add_argument("--a", type=float, help="first shape parameter (torus a, sphere radius, ...)")
        p.add_argument("--b", type=float, help="second shape parameter (torus b, spheroid b)")
        p.add_argument("--L", type=float, help="half-extent of non-periodic plane/cylinder/catenoid axes")
        p.add_argument("--c", type=float, help="Monge patch amplitude")
        p.add_argument("--height", choices=MONGE_HEIGHTS, help="Monge patch height function")
        p.add_argument("--n", type=int, help="nodes per axis (default 128)")
        p.add_argument("--n-zeta", type=int, help="nodes along the second axis (default: --n)")
        p.add_argument("--margin", type=float, help="distance kept from non-periodic chart edges (default 0.05)")
        p.add_argument("--fd-order", type=int, help="finite-difference order: 2, 4 or 6 (default 4)")
        p.add_argument("--seed", type=int, help="seed for random test fields (default 0)")
        p.add_argument("--hbar", type=float)
        p.add_argument("--mass", type=float)
        p.add_argument("--json", metavar="PATH", help="write the JSON report here")
        p.add_argument("--csv-dir", metavar="DIR", help="write CSV data into this directory")
        if name == "check":
            p.add_argument("--debug-corrupt-normal", action="store_true",
                           help="fault injection: tilt the normal field so the identities must fail")
        if name in ("ordering", "factors"):
            p.add_argument("--clearance", type=float,
                           help=f"chart distance kept from factor singular lines (default {DEFAULT_CLEARANCE})")
        if name == "ordering":
            p.add_argument("--factors", choices=("ode", "closed", "constant"),
                           help="ordering factors (default ode on surfaces of revolution, else constant)")
        if name == "hermiticity":
            p.add_argument("--pairs", type=int, help="number of seeded field pairs (default 10)")
    return parser


def _split_tolerances(argv: list) -> tuple:
    """Pull ``--tol-<family> VALUE`` (or ``--tol-<family>=VALUE``) out of argv."""
    rest, tols = [], {}
    it = iter(argv)
    for arg in it:
        if arg.startswith("--tol-"):
            key, eq, raw = arg[6:].partition("=")
            if not eq:
                raw = next(it, None)
                if raw is None:
                    raise ConfigError(f"--tol-{key}: expected a value")
            tols[key.replace("-", "_")] = _convert(f"tol-{key}", float, raw, "--")
        else:
            rest.append(arg)
    return rest, tols


def make_config(args: argparse.Namespace, tols: dict) -> RunConfig:
    base = read_config(args.config) if args.config else {}
    params = dict(base.pop("params", {}))
    tolerances = dict(base.pop("tolerances", {}))
    for key in _PARAM_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    tolerances.update(tols)
    values = dict(base)
    for f in fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None and f.name not in ("params", "tolerances"):
            values[f.name] = flag
    if getattr(args, "debug_corrupt_normal", False):
        values["corrupt_normal"] = True
    cfg = RunConfig(**values, params=params, tolerances=tolerances)
    cfg.validate()
    return cfg


# --- commands -----------------------------------------------------------------------------


def _surface_and_grid(cfg: RunConfig):
    chart = make_surface(cfg.surface, cfg.params)
    return chart, make_grid(chart, cfg.shape, margin=cfg.margin, fd_order=cfg.fd_order)


def run(command: str, cfg: RunConfig, csv_dir: Optional[str]) -> Report:
    chart, grid = _surface_and_grid(cfg)
    phys = PhysicalParams(cfg.hbar, cfg.mass)
    if command == "geom":
        tables = geometry_tables(grid)
        write_tables(tables, csv_dir or f"geom_{chart.name}")
        fr = grid.frames
        summary = {
            "csv_dir": csv_dir or f"geom_{chart.name}",
            "files": sorted(k.replace("^", "_up_") + ".csv" for k in tables),
            "mean_curvature_min": float(fr.mean_curv.min()),
            "mean_curvature_max": float(fr.mean_curv.max()),
            "gauss_curvature_min": float(fr.gauss_curv.min()),
            "gauss_curvature_max": float(fr.gauss_curv.max()),
            "area": float(grid.weights.sum()),
        }
        checks = reference_check(chart, grid).checks if chart.reference is not None else []
        report = Report.build(checks, extra=summary)
    elif command == "check":
        report = geometry_suite(grid, cfg.tolerances, corrupt_normal=cfg.corrupt_normal)
    elif command == "ordering":
        kind = cfg.factors or ("ode" if chart.revolution else "constant")
        report = ordering_suite(grid, kind, cfg.seed, phys, cfg.clearance, cfg.tolerances, csv_dir=csv_dir)
    elif command == "factors":
        report = factors_suite(grid, cfg.tolerances, cfg.seed, phys, cfg.clearance, csv_dir=csv_dir)
    else:
        report = hermiticity_suite(grid, cfg.seed, cfg.pairs, phys, cfg.tolerances)
    report.config = {"command": command, **cfg.echo()}
    return report


def main(argv: Optional[list] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv, tols = _split_tolerances(argv)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"curvedqm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    try:
        cfg = make_config(args, tols)
        report = run(args.command, cfg, args.csv_dir)
    except (ConfigError, ValueError, LookupError) as exc:
        # InvalidParams, GridTooCoarse, NotSeparable, MissingReference, DegenerateChart all land here
        print(f"curvedqm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.json:
        parent = os.path.dirname(args.json)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(args.json, "w") as fh:
            fh.write(report.to_json())
    print(report.table())
    if args.command == "geom":
        print(json.dumps(_clean(report.extra), indent=2, sort_keys=True))
    failed = [c.name for c in report.checks if not c.passed]
    print(f"{args.command}: {'PASS' if not failed else 'FAIL'} "
          f"({len(report.checks) - len(failed)}/{len(report.checks)} checks passed)")
    return EXIT_PASS if not failed else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
