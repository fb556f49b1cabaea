"""
``finjet`` command-line front end.

Subcommands::

    finjet eval   --config S.json --point "x=0.1,0.2;y=1,0" --quantity g
    finjet verify --config S.json --suite cocycle,rescaling [--seed N] [--tol X] [--out R.json]
    finjet diff   A.json B.json

Exit codes: 0 pass, 1 check failure (or regression), 2 configuration or
parse error, 3 numeric-domain error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from . import diffeo as dd
from . import quantization as qz
from .connections import KINDS, horizontal_jet
from .errors import (
    DimensionError,
    DomainError,
    FinjetError,
    ModelInvalidError,
    NumericDomainError,
    OrderExceededError,
    ParseError,
    PreconditionError,
    ResonantWeightError,
)
from .fields import SymbolField
from .finsler import LocalGeometry, PointOnSlit, model_from_dict
from .suites import SUITES, Scenario, run_suite

SCHEMA = "finjet-report/1"
QUANTITIES = ("F", "g", "A", "omega", "N", "chern", "berwald", "cartan", "landsberg", "sasaki", "betas")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

_CONFIG_ERRORS = (
    ParseError,
    ModelInvalidError,
    PreconditionError,
    ResonantWeightError,
    DimensionError,
    KeyError,
    TypeError,
    json.JSONDecodeError,
    OSError,
)
_NUMERIC_ERRORS = (NumericDomainError, DomainError, OrderExceededError, FloatingPointError, np.linalg.LinAlgError)


class ConfigError(FinjetError):
    pass


# -- scenario loading ---------------------------------------------------------------


def _diffeo(spec: dict, n: int):
    kind = spec.get("kind", "expr")
    if kind == "expr":
        return dd.diffeo_from_dict(spec, n)
    if kind == "identity":
        return dd.identity(n)
    if kind == "translation":
        return dd.translation(spec["vector"])
    if kind == "rotation":
        return dd.rotation(n, float(spec["angle"]), tuple(spec.get("plane", (0, 1))))
    if kind == "dilation":
        return dd.dilation(n, float(spec["factor"]))
    if kind == "inversion":
        return dd.inversion(n, float(spec.get("exclude_radius", 0.3)))
    if kind == "cubic":
        return dd.cubic_perturbation(n, float(spec.get("eps", 0.05)), int(spec.get("seed", 0)))
    if kind == "compose":
        return _diffeo(spec["outer"], n).compose(_diffeo(spec["inner"], n))
    raise ConfigError(f"unknown diffeomorphism kind {kind!r}")


def load_scenario(cfg: dict, seed: int | None = None, tol: float | None = None) -> Scenario:
    """Resolve a scenario dictionary; raises ConfigError on inconsistencies."""
    if "model" not in cfg:
        raise ConfigError("scenario has no 'model'")
    model = model_from_dict(cfg["model"])
    n = model.n
    diffeos = {name: _diffeo(spec, n) for name, spec in cfg.get("diffeos", {}).items()}
    symbols = {}
    for name, spec in cfg.get("symbols", {}).items():
        P = SymbolField(spec["components"], float(spec.get("weight", 0.0)), base_dim=n)
        if P.n != n:
            raise ConfigError(f"symbol {name!r} has dimension {P.n}, model has {n}")
        symbols[name] = P
    densities = {
        name: qz.density(spec["expr"], float(spec.get("weight", 0.0)), n) for name, spec in cfg.get("densities", {}).items()
    }
    weights = []
    for w in cfg.get("weights", []):
        lam, mu = float(w[0]), float(w[1])
        delta = float(w[2]) if len(w) > 2 else mu - lam
        if abs(delta - (mu - lam)) > 1e-12:
            raise ConfigError(f"weight triple {w}: delta must equal mu - lambda")
        weights.append((lam, mu, delta))
    # optional name selection: {"use": {"f": ..., "h": ..., "symbol": ...}}
    use = cfg.get("use", {})
    for key in ("f", "h"):
        if key in use and use[key] not in diffeos:
            raise ConfigError(f"'use.{key}' refers to unknown diffeomorphism {use[key]!r}")
    if "symbol" in use:
        if use["symbol"] not in symbols:
            raise ConfigError(f"'use.symbol' refers to unknown symbol {use['symbol']!r}")
        symbols = {use["symbol"]: symbols[use["symbol"]], **symbols}
    pair = ()
    if "f" in use:
        f = diffeos[use["f"]]
        pair = (f, diffeos[use["h"]] if "h" in use else f)
    samples = cfg.get("samples", {})
    tolerances = dict(cfg.get("tolerances", {}))
    for k in tolerances:
        if k not in SUITES:
            raise ConfigError(f"tolerance given for unknown suite {k!r}")
    if tol is not None:
        tolerances = {s: float(tol) for s in SUITES}
    qcfg = cfg.get("quantization", {})
    scn = Scenario(
        model=model,
        diffeos=diffeos,
        pair=pair,
        symbols=symbols,
        densities=densities,
        weights=weights,
        seed=int(seed if seed is not None else samples.get("seed", 0)),
        count=int(samples.get("count", 10)),
        box=tuple(float(v) for v in samples.get("box", (-1.0, 1.0))),
        y_shell=tuple(float(v) for v in samples.get("y_shell", (0.5, 2.0))),
        tolerances=tolerances,
        psi=cfg.get("rescaling", {}).get("psi", "exp(sin(x1))"),
        sigma=qcfg.get("sigma", "0.3*sin(x1)"),
        qmetric=qcfg.get("metric"),
    )
    if not 0 < scn.y_shell[0] < scn.y_shell[1]:
        raise ConfigError("y_shell must satisfy 0 < r0 < r1")
    return scn


def scenario_digest(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def read_config(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ConfigError("scenario must be a JSON object")
    return cfg


def parse_point(text: str, n: int) -> PointOnSlit:
    """Parse ``"x=a,b;y=c,d"``."""
    parts = {}
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        key, sep, vals = chunk.partition("=")
        if not sep or key.strip() not in ("x", "y"):
            raise ConfigError(f"malformed point {text!r}; expected 'x=...;y=...'")
        try:
            parts[key.strip()] = [float(v) for v in vals.split(",")]
        except ValueError as exc:
            raise ConfigError(f"malformed number in point {text!r}") from exc
    x = parts.get("x", [0.0] * n)
    y = parts.get("y")
    if y is None:
        raise ConfigError("point needs a 'y=' part")
    if len(x) != n or len(y) != n:
        raise ConfigError(f"point has dimension ({len(x)}, {len(y)}), model has {n}")
    return PointOnSlit(x, y)


# -- eval -------------------------------------------------------------------------------------


def evaluate_quantity(cfg: dict, scn: Scenario, pt: PointOnSlit, quantity: str) -> np.ndarray:
    model = scn.model
    if quantity == "betas":
        qcfg = cfg.get("quantization", {})
        m = int(qcfg.get("m", 2 * model.n))
        lam, mu = scn.weights[0][:2] if scn.weights else (0.0, 1.0)
        return np.array([float(b) for b in qz.beta_constants(m, lam, mu)])
    if quantity == "sasaki":
        return qz.sasaki_metric_jet(model, pt, 0).value
    if quantity in KINDS:
        return horizontal_jet(LocalGeometry(model, pt, order=6), quantity).value
    geo = LocalGeometry(model, pt, order=6)
    attr = {"F": "F", "g": "g", "A": "A", "omega": "omega", "N": "N", "landsberg": "landsberg"}
    if quantity not in attr:
        raise ConfigError(f"unknown quantity {quantity!r}; expected one of {', '.join(QUANTITIES)}")
    return np.asarray(getattr(geo, attr[quantity]).value, dtype=float)


def format_values(arr) -> str:
    return " ".join("%.17g" % (float(v) + 0.0) for v in np.asarray(arr, dtype=float).ravel())


def cmd_eval(args) -> int:
    cfg = read_config(args.config)
    scn = load_scenario(cfg)
    if args.quantity not in QUANTITIES:
        raise ConfigError(f"unknown quantity {args.quantity!r}; expected one of {', '.join(QUANTITIES)}")
    pt = parse_point(args.point, scn.n) if args.point else PointOnSlit(np.zeros(scn.n), np.eye(scn.n)[0])
    print(format_values(evaluate_quantity(cfg, scn, pt, args.quantity)))
    return EXIT_OK


# -- verify -------------------------------------------------------------------------------------


def build_report(cfg: dict, scn: Scenario, suites) -> dict:
    checks = []
    for s in suites:
        checks.extend(c.to_dict() for c in run_suite(s, scn))
    return {
        "schema": SCHEMA,
        "engine_version": __version__,
        "scenario_digest": scenario_digest(cfg),
        "seed": scn.seed,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "checks": checks,
    }


def _suite_list(text: str | None):
    if not text or text == "all":
        return list(SUITES)
    names = [s.strip() for s in text.split(",") if s.strip()]
    for s in names:
        if s not in SUITES:
            raise ConfigError(f"unknown suite {s!r}; expected one of {', '.join(SUITES)}")
    return names


def cmd_verify(args) -> int:
    cfg = read_config(args.config)
    suites = _suite_list(args.suite)
    scn = load_scenario(cfg, seed=args.seed, tol=args.tol)
    report = build_report(cfg, scn, suites)
    text = json.dumps(report, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    for c in report["checks"]:
        res = "-" if c["max_residual"] is None else "%.3e" % c["max_residual"]
        print(f"{c['status']:>14}  {c['suite']}: {c['check']}  residual={res}")
    failed = any(c["pass"] is False for c in report["checks"])
    return EXIT_FAIL if failed else EXIT_OK


# -- diff ---------------------------------------------------------------------------------------

REGRESSION_FACTOR = 1.10
# residuals below this are rounding noise and never count as regressions
_NOISE = 1e-13


def diff_reports(a: dict, b: dict) -> tuple[list[str], bool]:
    """(lines, regressed) comparing report ``b`` against baseline ``a``."""
    if a.get("scenario_digest") != b.get("scenario_digest"):
        raise ConfigError("reports were produced from different scenarios")
    key = lambda c: (c["suite"], c["check"])
    base = {key(c): c for c in a.get("checks", [])}
    lines, regressed = [], False
    for c in b.get("checks", []):
        old = base.pop(key(c), None)
        name = f"{c['suite']}: {c['check']}"
        if old is None:
            lines.append(f"added       {name}")
            continue
        ra, rb = old["max_residual"], c["max_residual"]
        if ra == rb and old["pass"] == c["pass"]:
            continue
        if old["pass"] and c["pass"] is False:
            lines.append(f"REGRESSION  {name}: now failing ({ra!r} -> {rb!r})")
            regressed = True
        elif ra is not None and rb is not None and rb > REGRESSION_FACTOR * ra and rb > _NOISE:
            lines.append(f"REGRESSION  {name}: {ra!r} -> {rb!r} ({rb / ra if ra else float('inf'):.3g}x)")
            regressed = True
        elif ra is not None and rb is not None and rb < ra:
            lines.append(f"improved    {name}: {ra!r} -> {rb!r}")
        else:
            lines.append(f"changed     {name}: {ra!r} -> {rb!r}")
    for k in base:
        lines.append(f"removed     {k[0]}: {k[1]}")
    return lines, regressed


def cmd_diff(args) -> int:
    a, b = read_config(args.report_a), read_config(args.report_b)
    for r in (a, b):
        if r.get("schema") != SCHEMA:
            raise ConfigError(f"not a {SCHEMA} report")
    lines, regressed = diff_reports(a, b)
    for line in lines:
        print(line)
    return EXIT_FAIL if regressed else EXIT_OK


# -- entry point -------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="finjet", description="Finsler jet engine: evaluation and verification.")
    p.add_argument("--version", action="version", version=f"finjet {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eval", help="print a geometric quantity at a point")
    e.add_argument("--config", required=True)
    e.add_argument("--point", default=None, help='"x=a,b;y=c,d"')
    e.add_argument("--quantity", required=True, help=", ".join(QUANTITIES))
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("verify", help="run verification suites and write a report")
    v.add_argument("--config", required=True)
    v.add_argument("--suite", default="all", help="comma-separated suite names, or 'all'")
    v.add_argument("--seed", type=int, default=None)
    v.add_argument("--tol", type=float, default=None, help="override every suite tolerance")
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("diff", help="compare two reports")
    d.add_argument("report_a")
    d.add_argument("report_b")
    d.set_defaults(func=cmd_diff)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"finjet: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERIC_ERRORS as exc:
        print(f"finjet: numeric-domain error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except _CONFIG_ERRORS as exc:
        print(f"finjet: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
